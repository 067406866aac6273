#pragma once

#include "boundwalk/core.hpp"

#include <optional>

namespace boundwalk {

/// Minimiser of the Lagrangian over the box for fixed multipliers.
/// `lagrangian_value` is ||d - delta||_p^p (epsilon for L-infinity)
/// + lambda b.delta + mu ||delta||^2, i.e. without the -lambda c - mu r terms.
struct InnerResult {
    Vector delta;
    double lagrangian_value = 0.0;
};

struct SolverSettings {
    int max_dual_iterations = 100;
    double dual_tolerance = 1e-9;
};

InnerResult inner_infimum_l2(double lambda, double mu, const TrustRegionProblem& problem);
InnerResult inner_infimum_l1(double lambda, double mu, const TrustRegionProblem& problem);
InnerResult inner_infimum_l0(double lambda, double mu, const TrustRegionProblem& problem);
/// Fixed slack: the L-infinity ball of radius epsilon is merged into the box.
InnerResult inner_infimum_linf(double lambda, double mu, double epsilon, const TrustRegionProblem& problem);

struct EpsilonSearch {
    double epsilon = 0.0;
    InnerResult inner;
};

/// Minimises the L-infinity inner value over epsilon >= 0. The value is
/// convex and piecewise quadratic in epsilon; the smallest root of its right
/// derivative is found exactly by sweeping the sorted breakpoints.
EpsilonSearch epsilon_search_linf(double lambda, double mu, const TrustRegionProblem& problem);

struct DualEvaluation {
    double value = 0.0;     // g(lambda, mu)
    double d_lambda = 0.0;  // b.delta - c
    double d_mu = 0.0;      // ||delta||^2 - r
    Vector delta;
    std::optional<double> epsilon;
};

/// Dual function and its gradient. For L-infinity the slack is searched
/// unless `epsilon` pins it.
DualEvaluation dual_value_and_grad(double lambda, double mu, const TrustRegionProblem& problem,
                                   std::optional<double> epsilon = std::nullopt);

/// Inner minimiser for whichever norm the problem uses.
InnerResult inner_infimum(double lambda, double mu, const TrustRegionProblem& problem,
                          double* epsilon_out = nullptr);

struct DualMaximum {
    DualState state;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Maximises g over lambda free, mu >= 0, starting at (0, 0). Bounded
/// quasi-Newton for L1/L2/L-infinity, Nelder-Mead for L0.
DualMaximum maximize_dual(const TrustRegionProblem& problem, const SolverSettings& settings = {});

/// Full step solve: dual maximisation, primal recovery, feasibility repair.
/// When b.delta = c cannot be met inside the trust region and box, the
/// returned step pushes b.delta towards c as far as allowed and
/// `feasible` is false.
Solution solve(const TrustRegionProblem& problem, const SolverSettings& settings = {});

}  // namespace boundwalk
