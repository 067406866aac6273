#include "boundwalk/optim2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace boundwalk {

namespace {

struct Mat2 {
    double a = 1.0, b = 0.0, d = 1.0;  // symmetric [[a, b], [b, d]]

    Point2 apply(const Point2& v) const { return {a * v[0] + b * v[1], b * v[0] + d * v[1]}; }
};

double dot2(const Point2& u, const Point2& v) { return u[0] * v[0] + u[1] * v[1]; }

// Zero the mu component when mu sits on its bound and the gradient pushes outward.
Point2 projected_gradient(const Point2& p, const Point2& g) {
    Point2 pg = g;
    if (p[1] <= 0.0 && g[1] > 0.0) pg[1] = 0.0;
    return pg;
}

}  // namespace

Minimum2 minimize_bounded_bfgs(const std::function<Value2(const Point2&)>& f, Point2 start,
                               const QuasiNewtonOptions& options) {
    start[1] = std::max(start[1], 0.0);
    Point2 x = start;
    Value2 fx = f(x);
    Mat2 h;
    bool fresh = true;

    Minimum2 out{x, fx.value, 0, false};
    for (int it = 0; it < options.max_iterations; ++it) {
        out.iterations = it + 1;
        const Point2 pg = projected_gradient(x, fx.grad);
        if (std::max(std::abs(pg[0]), std::abs(pg[1])) <= options.gradient_tolerance) {
            out.converged = true;
            break;
        }
        const bool mu_pinned = x[1] <= 0.0 && fx.grad[1] > 0.0;
        Point2 dir = h.apply(fx.grad);
        dir = {-dir[0], -dir[1]};
        if (mu_pinned) {
            // Inverse of the reduced Hessian on lambda (Schur complement of H).
            const double reduced = h.d > 0.0 ? h.a - h.b * h.b / h.d : h.a;
            dir = {-(reduced > 0.0 ? reduced : 1.0) * fx.grad[0], 0.0};
        }
        if (dot2(dir, pg) >= 0.0) {
            h = Mat2{};
            fresh = true;
            dir = {-pg[0], -pg[1]};
        }

        double t = 1.0;
        bool accepted = false;
        Point2 xn{};
        Value2 fn{};
        for (int k = 0; k <= options.max_halvings; ++k, t *= 0.5) {
            xn = {x[0] + t * dir[0], std::max(0.0, x[1] + t * dir[1])};
            fn = f(xn);
            const Point2 step{xn[0] - x[0], xn[1] - x[1]};
            if (std::isfinite(fn.value) && fn.value <= fx.value + 1e-4 * dot2(fx.grad, step)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;

        const Point2 s{xn[0] - x[0], xn[1] - x[1]};
        const Point2 y{fn.grad[0] - fx.grad[0], fn.grad[1] - fx.grad[1]};
        const double sy = dot2(s, y);
        if (sy > 1e-14 * std::sqrt(dot2(s, s) * dot2(y, y)) && sy > 0.0) {
            if (fresh) {
                const double scale = sy / dot2(y, y);
                h = Mat2{scale, 0.0, scale};
                fresh = false;
            }
            // H+ = (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            const double rho = 1.0 / sy;
            const Point2 hy = h.apply(y);
            const double yhy = dot2(y, hy);
            h.a += rho * rho * yhy * s[0] * s[0] + rho * s[0] * s[0] - 2.0 * rho * hy[0] * s[0];
            h.d += rho * rho * yhy * s[1] * s[1] + rho * s[1] * s[1] - 2.0 * rho * hy[1] * s[1];
            h.b += rho * rho * yhy * s[0] * s[1] + rho * s[0] * s[1] - rho * (hy[0] * s[1] + hy[1] * s[0]);
        }
        const bool stalled = std::abs(s[0]) + std::abs(s[1]) <=
                             1e-15 * (1.0 + std::abs(x[0]) + std::abs(x[1]));
        x = xn;
        fx = fn;
        if (stalled) break;
    }
    out.point = x;
    out.value = fx.value;
    return out;
}

Minimum2 minimize_nelder_mead(const std::function<double(const Point2&)>& f, std::array<Point2, 3> simplex,
                              const NelderMeadOptions& options) {
    std::array<double, 3> fv{};
    for (int i = 0; i < 3; ++i) fv[i] = f(simplex[i]);

    auto order = [&] {
        std::array<int, 3> idx{0, 1, 2};
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        simplex = {simplex[idx[0]], simplex[idx[1]], simplex[idx[2]]};
        fv = {fv[idx[0]], fv[idx[1]], fv[idx[2]]};
    };
    auto along = [](const Point2& from, const Point2& to, double t) {
        return Point2{from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])};
    };

    Minimum2 out;
    order();
    for (int it = 0; it < options.max_iterations; ++it) {
        out.iterations = it + 1;
        const double size = std::max({std::abs(simplex[1][0] - simplex[0][0]), std::abs(simplex[1][1] - simplex[0][1]),
                                      std::abs(simplex[2][0] - simplex[0][0]), std::abs(simplex[2][1] - simplex[0][1])});
        if (std::isfinite(fv[2]) && fv[2] - fv[0] <= options.value_tolerance && size <= options.size_tolerance) {
            out.converged = true;
            break;
        }
        const Point2 centroid{0.5 * (simplex[0][0] + simplex[1][0]), 0.5 * (simplex[0][1] + simplex[1][1])};
        const Point2 reflected = along(centroid, simplex[2], -options.reflection);
        const double fr = f(reflected);
        if (fr < fv[0]) {
            const Point2 expanded = along(centroid, simplex[2], -options.expansion);
            const double fe = f(expanded);
            if (fe < fr) {
                simplex[2] = expanded;
                fv[2] = fe;
            } else {
                simplex[2] = reflected;
                fv[2] = fr;
            }
        } else if (fr < fv[1]) {
            simplex[2] = reflected;
            fv[2] = fr;
        } else {
            // Outside contraction when the reflection beats the worst vertex, inside otherwise.
            const bool outside = fr < fv[2];
            const Point2 contracted =
                outside ? along(centroid, reflected, options.contraction) : along(centroid, simplex[2], options.contraction);
            const double fc = f(contracted);
            if (fc < (outside ? fr : fv[2])) {
                simplex[2] = contracted;
                fv[2] = fc;
            } else {
                for (int i = 1; i < 3; ++i) {
                    simplex[i] = along(simplex[0], simplex[i], options.shrink);
                    fv[i] = f(simplex[i]);
                }
            }
        }
        order();
    }
    out.point = simplex[0];
    out.value = fv[0];
    return out;
}

}  // namespace boundwalk
