#pragma once

// Oracle-backed self-checks of the solver, the criterion gradient and the
// attack on analytic models. Shared by the CLI `verify` command and the
// acceptance binary.

#include "boundwalk/core.hpp"
#include "boundwalk/models.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace boundwalk::verify {

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

/// Random problem in [0, 1]^n. With `reach_factor` <= 1 the equality is
/// satisfied by a point strictly inside the trust ball and box; larger
/// factors can make it unreachable.
TrustRegionProblem random_problem(std::mt19937_64& rng, std::size_t n, NormKind norm, double reach_factor = 1.0);

/// in -> hidden (tanh) -> classes with standard normal weights and biases.
Model random_tanh_mlp(std::mt19937_64& rng, std::size_t in, std::size_t hidden, std::size_t classes);

/// solve() against grid_solve on `instances` problems per norm with
/// n in {1, 2, 3}. Convex norms must not exceed the lattice optimum by more
/// than the lattice resolution; L0 must never beat it and must match it up to
/// one component on at least 90% of the instances. The second result checks
/// the trust-region, box and equality constraints of every feasible solution.
std::vector<SuiteResult> solver_suites(std::uint64_t seed = 1, int instances = 200);

/// Primal objective minus maximised dual on random L2 problems.
SuiteResult strong_duality_suite(std::uint64_t seed = 2, int instances = 100);

/// The attack on the (3, 4) / -2 linear model from x = (0.1, 0.1) must come
/// within 1% of the exact distance in every norm within 50 queries, and match
/// the exact L0 count.
SuiteResult linear_convergence_suite();

/// adv_value_and_grad against central differences on random tanh MLPs.
SuiteResult gradient_suite(std::uint64_t seed = 3, int instances = 100);

std::vector<SuiteResult> run_all(std::uint64_t seed = 1);

}  // namespace boundwalk::verify
