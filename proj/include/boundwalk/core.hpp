#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace boundwalk {

/// Flat real-valued input, perturbation or normal vector.
using Vector = std::vector<double>;

class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class InvalidBoundsError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class InvalidProblemError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Components differing by more than this count towards the L0 distance.
inline constexpr double kL0Tolerance = 1e-9;

enum class NormKind { L0, L1, L2, Linf };

std::string_view to_string(NormKind norm);
/// Accepts "l0", "l1", "l2", "linf" (case-insensitive, "inf" also works).
NormKind parse_norm(std::string_view text);

struct BoxBounds {
    double lower = 0.0;
    double upper = 1.0;

    double diameter() const { return upper - lower; }
};

/// Multipliers of the trust-region Lagrangian. `epsilon` is the L-infinity
/// slack and is only set for that norm.
struct DualState {
    double lambda = 0.0;
    double mu = 0.0;
    std::optional<double> epsilon;
};

/// One step subproblem: minimise ||x - x_tilde - delta||_p subject to
/// b . delta = c, ||delta||_2^2 <= r and lower <= x_tilde + delta <= upper.
struct TrustRegionProblem {
    Vector x;
    Vector x_tilde;
    Vector b;
    double c = 0.0;
    double r = 0.0;
    BoxBounds bounds;
    NormKind norm = NormKind::L2;

    std::size_t size() const { return x.size(); }
    /// Throws InvalidProblemError / DimensionError when an invariant is broken.
    void validate() const;
    /// d = x - x_tilde
    Vector residual() const;
    double step_lower(std::size_t j) const { return bounds.lower - x_tilde[j]; }
    double step_upper(std::size_t j) const { return bounds.upper - x_tilde[j]; }
};

struct Solution {
    Vector delta;
    double objective = 0.0;
    DualState dual;
    bool feasible = false;
    int iterations = 0;
};

/// ||a - b||_p; for L0 the fraction of components that differ.
double lp_distance(std::span<const double> a, std::span<const double> b, NormKind p);

/// ||v||_p of a single vector (L0 again as a fraction).
double lp_norm(std::span<const double> v, NormKind p);

Vector project_box(std::span<const double> v, std::span<const double> lo, std::span<const double> hi);
Vector project_box(std::span<const double> v, BoxBounds bounds);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> v);

bool all_finite(std::span<const double> v);

}  // namespace boundwalk
