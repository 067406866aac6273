#pragma once

#include <array>
#include <functional>

namespace boundwalk {

/// Point in the (lambda, mu) plane.
using Point2 = std::array<double, 2>;

struct Value2 {
    double value = 0.0;
    Point2 grad{};
};

struct Minimum2 {
    Point2 point{};
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct QuasiNewtonOptions {
    int max_iterations = 100;
    double gradient_tolerance = 1e-9;
    int max_halvings = 30;
};

/// Minimises f over {p : p[1] >= 0} with BFGS inverse-Hessian updates,
/// gradient projection on the bound and halving backtracking.
Minimum2 minimize_bounded_bfgs(const std::function<Value2(const Point2&)>& f, Point2 start,
                               const QuasiNewtonOptions& options = {});

struct NelderMeadOptions {
    int max_iterations = 200;
    double reflection = 1.0;
    double expansion = 2.0;
    double contraction = 0.5;
    double shrink = 0.5;
    double value_tolerance = 1e-12;
    double size_tolerance = 1e-10;
};

/// Derivative-free simplex minimisation. Infeasible points should return +inf.
Minimum2 minimize_nelder_mead(const std::function<double(const Point2&)>& f, std::array<Point2, 3> simplex,
                              const NelderMeadOptions& options = {});

}  // namespace boundwalk
