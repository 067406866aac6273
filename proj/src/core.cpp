#include "boundwalk/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace boundwalk {

std::string_view to_string(NormKind norm) {
    switch (norm) {
        case NormKind::L0: return "l0";
        case NormKind::L1: return "l1";
        case NormKind::L2: return "l2";
        case NormKind::Linf: return "linf";
    }
    return "?";
}

NormKind parse_norm(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (lower == "l0") return NormKind::L0;
    if (lower == "l1") return NormKind::L1;
    if (lower == "l2") return NormKind::L2;
    if (lower == "linf" || lower == "inf" || lower == "l_inf") return NormKind::Linf;
    throw std::invalid_argument("unknown norm '" + std::string(text) + "'");
}

void TrustRegionProblem::validate() const {
    const std::size_t n = x.size();
    if (n == 0) throw DimensionError("trust-region problem has zero dimension");
    if (x_tilde.size() != n || b.size() != n)
        throw DimensionError("x, x_tilde and b must share one length");
    if (!(bounds.lower < bounds.upper)) throw InvalidBoundsError("box bounds need lower < upper");
    if (!(r > 0.0) || !std::isfinite(r)) throw InvalidProblemError("trust radius must be positive");
    if (!std::isfinite(c) || !all_finite(x) || !all_finite(x_tilde) || !all_finite(b))
        throw InvalidProblemError("non-finite entries in trust-region problem");
    for (std::size_t j = 0; j < n; ++j) {
        if (x[j] < bounds.lower || x[j] > bounds.upper || x_tilde[j] < bounds.lower ||
            x_tilde[j] > bounds.upper)
            throw InvalidProblemError("x and x_tilde must lie inside the box");
    }
    if (squared_norm(b) == 0.0) throw InvalidProblemError("boundary normal b is zero");
}

Vector TrustRegionProblem::residual() const {
    Vector d(x.size());
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = x[j] - x_tilde[j];
    return d;
}

double lp_norm(std::span<const double> v, NormKind p) {
    if (v.empty()) throw DimensionError("norm of an empty vector");
    double acc = 0.0;
    switch (p) {
        case NormKind::L0:
            for (double e : v) acc += std::abs(e) > kL0Tolerance ? 1.0 : 0.0;
            return acc / static_cast<double>(v.size());
        case NormKind::L1:
            for (double e : v) acc += std::abs(e);
            return acc;
        case NormKind::L2:
            for (double e : v) acc += e * e;
            return std::sqrt(acc);
        case NormKind::Linf:
            for (double e : v) acc = std::max(acc, std::abs(e));
            return acc;
    }
    return acc;
}

double lp_distance(std::span<const double> a, std::span<const double> b, NormKind p) {
    if (a.size() != b.size()) throw DimensionError("lp_distance: length mismatch");
    Vector diff(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) diff[j] = a[j] - b[j];
    return lp_norm(diff, p);
}

Vector project_box(std::span<const double> v, std::span<const double> lo, std::span<const double> hi) {
    if (v.size() != lo.size() || v.size() != hi.size())
        throw DimensionError("project_box: length mismatch");
    Vector out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
        if (lo[j] > hi[j]) throw InvalidBoundsError("project_box: lower bound above upper bound");
        out[j] = std::clamp(v[j], lo[j], hi[j]);
    }
    return out;
}

Vector project_box(std::span<const double> v, BoxBounds bounds) {
    if (bounds.lower > bounds.upper) throw InvalidBoundsError("project_box: lower bound above upper bound");
    Vector out(v.begin(), v.end());
    for (double& e : out) e = std::clamp(e, bounds.lower, bounds.upper);
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
    return acc;
}

double squared_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double e : v) acc += e * e;
    return acc;
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double e) { return std::isfinite(e); });
}

}  // namespace boundwalk
