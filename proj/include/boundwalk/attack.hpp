#pragma once

#include "boundwalk/core.hpp"
#include "boundwalk/criterion.hpp"
#include "boundwalk/models.hpp"
#include "boundwalk/trust_region.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>

namespace boundwalk {

/// No adversarial starting point in the pool or among the random draws.
class StartFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Input violates an attack precondition (e.g. x is already adversarial).
class PreconditionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct AttackConfig {
    NormKind norm = NormKind::L2;
    /// Bound r on the squared L2 length of one step.
    double trust_radius = 1e-2;
    int max_steps = 1000;
    double radius_decay = 0.98;
    int binary_search_steps = 10;
    /// 0 means no budget beyond max_steps.
    long max_queries = 0;
    /// Each step aims for adv = -margin * ||b|| so iterates land strictly
    /// on the adversarial side of the linearised boundary.
    double boundary_margin = 1e-7;
    /// From a non-adversarial iterate the step aims past the linearised
    /// boundary by this fraction of adv.
    double overshoot = 0.1;
    /// Start from the closest pool sample of the (rank+1)-th distinct
    /// adversarial class (see find_starting_point).
    int start_rank = 0;
    BoxBounds bounds;
    SolverSettings solver;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TracePoint {
    long queries = 0;
    double distance = 0.0;

    bool operator==(const TracePoint&) const = default;
};

struct AttackState {
    int k = 0;
    Vector x_tilde;
    std::optional<Vector> best;
    double best_distance = std::numeric_limits<double>::infinity();
    long queries = 0;
    std::vector<TracePoint> trace;
};

struct AttackResult {
    bool success = false;
    std::optional<Vector> adversarial;
    double distance = std::numeric_limits<double>::infinity();
    long queries_used = 0;
    /// Model evaluations spent choosing the start; not part of queries_used.
    long start_queries = 0;
    std::vector<TracePoint> trace;
};

struct StartingPoint {
    Vector point;
    long queries = 0;
};

/// Closest (in L2) adversarial pool sample. Rank k > 0 takes the closest
/// sample of the (k+1)-th distinct adversarial class met in distance order,
/// or the (k+1)-th closest adversarial when there are too few classes.
/// Falls back to up to 1000 uniform draws in the box.
StartingPoint find_starting_point(const Dataset& pool, std::span<const double> x, const Criterion& crit,
                                  const Model& model, std::uint64_t seed = 0, int rank = 0,
                                  BoxBounds bounds = {});

struct BoundaryPoint {
    Vector point;
    long queries = 0;
};

/// Bisection on the segment [x, start]; returns the adversarial end of the
/// final interval.
BoundaryPoint binary_search_to_boundary(const Model& model, const Criterion& crit, std::span<const double> x,
                                        std::span<const double> start, int steps = 10);

/// Boundary-walking attack: start, bisect to the boundary, then repeatedly
/// linearise the boundary and solve the trust-region step.
AttackResult run_attack(const Model& model, std::span<const double> x, const Criterion& crit,
                        const AttackConfig& config, const Dataset& pool);

struct PgdConfig {
    double epsilon = 0.1;
    double stepsize = 0.01;
    int iterations = 1000;
    BoxBounds bounds;
    std::uint64_t seed = 0;
};

/// Signed-gradient steps on the cross-entropy, projected onto the
/// epsilon-ball and box, from a random start in the ball.
AttackResult run_pgd(const Model& model, std::span<const double> x, const Criterion& crit, const PgdConfig& config);

/// As run_pgd with Adam updates (0.9 / 0.999 / 1e-8) instead of sign steps.
AttackResult run_adam_pgd(const Model& model, std::span<const double> x, const Criterion& crit,
                          const PgdConfig& config);

}  // namespace boundwalk
