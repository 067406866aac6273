#include "boundwalk/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace boundwalk::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double objective(NormKind norm, const std::array<double, 3>& d, const std::array<double, 3>& delta, std::size_t n) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double e = std::abs(d[j] - delta[j]);
        switch (norm) {
            case NormKind::L0: acc += e > kL0Tolerance ? 1.0 : 0.0; break;
            case NormKind::L1: acc += e; break;
            case NormKind::L2: acc += e * e; break;
            case NormKind::Linf: acc = std::max(acc, e); break;
        }
    }
    if (norm == NormKind::L0) return acc / static_cast<double>(n);
    if (norm == NormKind::L2) return std::sqrt(acc);
    return acc;
}

std::vector<double> lattice(double lo, double hi, double radius, double res, double extra) {
    std::vector<double> v;
    const double a = std::max(lo, -radius), b = std::min(hi, radius);
    if (a <= b) {
        const auto k0 = static_cast<long long>(std::ceil(a / res));
        const auto k1 = static_cast<long long>(std::floor(b / res));
        for (long long k = k0; k <= k1; ++k) v.push_back(static_cast<double>(k) * res);
    }
    for (double e : {lo, hi, extra})
        if (std::abs(e) <= radius) v.push_back(e);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

}  // namespace

Solution grid_solve(const TrustRegionProblem& problem, const GridSpec& spec) {
    problem.validate();
    const std::size_t n = problem.size();
    if (n > spec.dimension_cap || n > 3) throw DimensionError("grid_solve supports at most 3 dimensions");
    if (!(spec.resolution > 0.0)) throw std::invalid_argument("grid resolution must be positive");

    const double radius = std::sqrt(problem.r);
    std::array<double, 3> d{}, lo{}, hi{}, b{};
    std::array<std::vector<double>, 3> cand;
    for (std::size_t j = 0; j < n; ++j) {
        d[j] = problem.x[j] - problem.x_tilde[j];
        lo[j] = problem.step_lower(j);
        hi[j] = problem.step_upper(j);
        b[j] = problem.b[j];
        cand[j] = lattice(lo[j], hi[j], radius, spec.resolution, d[j]);
    }

    Solution best;
    best.objective = kInf;
    best.feasible = false;
    std::array<double, 3> delta{};
    const double slack = 1e-12;

    for (std::size_t pivot = 0; pivot < n; ++pivot) {
        if (b[pivot] == 0.0) continue;
        std::array<std::size_t, 2> others{};
        std::size_t m = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != pivot) others[m++] = j;

        auto finish = [&](double partial_dot, double partial_sq) {
            double t = (problem.c - partial_dot) / b[pivot];
            if (t < lo[pivot] - slack || t > hi[pivot] + slack) return;
            t = std::clamp(t, lo[pivot], hi[pivot]);
            if (partial_sq + t * t > problem.r * (1.0 + 1e-12)) return;
            delta[pivot] = t;
            const double obj = objective(problem.norm, d, delta, n);
            if (obj < best.objective) {
                best.objective = obj;
                best.delta.assign(delta.begin(), delta.begin() + static_cast<std::ptrdiff_t>(n));
                best.feasible = true;
            }
        };

        if (m == 0) {
            finish(0.0, 0.0);
        } else if (m == 1) {
            const std::size_t j = others[0];
            for (double v : cand[j]) {
                delta[j] = v;
                finish(b[j] * v, v * v);
            }
        } else {
            const std::size_t j = others[0], k = others[1];
            for (double v : cand[j]) {
                if (v * v > problem.r) continue;
                delta[j] = v;
                for (double w : cand[k]) {
                    const double sq = v * v + w * w;
                    if (sq > problem.r) continue;
                    delta[k] = w;
                    finish(b[j] * v + b[k] * w, sq);
                }
            }
        }
    }
    return best;
}

double linear_minimal_distance(const Vector& w, double offset, const Vector& x, NormKind p) {
    if (w.size() != x.size()) throw DimensionError("linear_minimal_distance: length mismatch");
    if (squared_norm(w) == 0.0) throw std::invalid_argument("linear_minimal_distance: zero weight vector");
    const double gap = std::abs(dot(w, x) + offset);
    switch (p) {
        case NormKind::L2: return gap / lp_norm(w, NormKind::L2);
        case NormKind::Linf: return gap / lp_norm(w, NormKind::L1);
        case NormKind::L1: return gap / lp_norm(w, NormKind::Linf);
        case NormKind::L0: break;
    }
    throw std::invalid_argument("linear_minimal_distance: L0 is not supported, use l0_minimal_linear");
}

std::size_t l0_minimal_linear(const Vector& w, double offset, const Vector& x, BoxBounds bounds) {
    const std::size_t n = x.size();
    if (w.size() != n) throw DimensionError("l0_minimal_linear: length mismatch");
    if (n > 12) throw DimensionError("l0_minimal_linear enumerates subsets only up to n = 12");
    const double base = dot(w, x) + offset;
    if (base > 0.0) return 0;

    // Gain of moving coordinate j to the extreme that increases w . z most.
    Vector gain(n);
    for (std::size_t j = 0; j < n; ++j)
        gain[j] = w[j] > 0.0 ? w[j] * (bounds.upper - x[j]) : w[j] * (bounds.lower - x[j]);

    std::size_t best = n + 1;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        const auto size = static_cast<std::size_t>(__builtin_popcount(mask));
        if (size >= best) continue;
        double value = base;
        for (std::size_t j = 0; j < n; ++j)
            if (mask & (1u << j)) value += gain[j];
        if (value > 0.0) best = size;
    }
    if (best > n) throw UnreachableError("no subset of coordinates crosses the hyperplane");
    return best;
}

}  // namespace boundwalk::oracle
