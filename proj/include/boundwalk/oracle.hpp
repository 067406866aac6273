#pragma once

#include "boundwalk/core.hpp"

#include <cstddef>

namespace boundwalk::oracle {

struct GridSpec {
    double resolution = 1e-3;
    std::size_t dimension_cap = 3;
};

/// Exhaustive reference solver for the step subproblem in low dimension.
///
/// Every coordinate but one (the pivot) runs over the lattice
/// {k * resolution} clipped to the box and the trust ball, plus the box
/// endpoints and d_j; the pivot is solved from b . delta = c. All pivots with
/// b_j != 0 are tried. The result is an upper bound on the true optimum and
/// never increases when the resolution is halved. `feasible` is false and
/// the objective +inf when no lattice point satisfies the constraints.
Solution grid_solve(const TrustRegionProblem& problem, const GridSpec& spec = {});

/// Distance from x to the hyperplane w . z + offset = 0 in the norm p, via
/// the dual norm of w. Only meaningful when the witness point stays inside
/// the box, which the caller checks.
double linear_minimal_distance(const Vector& w, double offset, const Vector& x, NormKind p);

/// Smallest number of coordinates of x that must change (to box extremes)
/// for w . z + offset > 0. Exhaustive over subsets, n <= 12.
std::size_t l0_minimal_linear(const Vector& w, double offset, const Vector& x, BoxBounds bounds = {});

class UnreachableError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace boundwalk::oracle
