#include "boundwalk/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace boundwalk {

void AttackConfig::validate() const {
    if (!(trust_radius > 0.0) || !std::isfinite(trust_radius))
        throw std::invalid_argument("trust_radius must be positive");
    if (max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
    if (!(radius_decay > 0.0 && radius_decay <= 1.0)) throw std::invalid_argument("radius_decay must lie in (0, 1]");
    if (binary_search_steps < 0) throw std::invalid_argument("binary_search_steps must be non-negative");
    if (boundary_margin < 0.0) throw std::invalid_argument("boundary_margin must be non-negative");
    if (overshoot < 0.0) throw std::invalid_argument("overshoot must be non-negative");
    if (start_rank < 0) throw std::invalid_argument("start_rank must be non-negative");
    if (!(bounds.lower < bounds.upper)) throw InvalidBoundsError("box lower bound must be below upper bound");
}

namespace {

constexpr int kUniformDraws = 1000;

bool adversarial_at(const Model& model, std::span<const double> z, const Criterion& crit) {
    return is_adversarial(forward(model, z), crit);
}

void check_input(const Model& model, std::span<const double> x, BoxBounds bounds) {
    if (x.size() != model.input_dim())
        throw DimensionError("input has " + std::to_string(x.size()) + " components, model expects " +
                             std::to_string(model.input_dim()));
    for (double v : x)
        if (!(v >= bounds.lower && v <= bounds.upper)) throw PreconditionError("input lies outside the box");
}

}  // namespace

StartingPoint find_starting_point(const Dataset& pool, std::span<const double> x, const Criterion& crit,
                                  const Model& model, std::uint64_t seed, int rank, BoxBounds bounds) {
    StartingPoint out;
    std::vector<double> dist(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool.samples[i].size() != x.size()) throw DimensionError("pool sample dimension differs from input");
        dist[i] = lp_distance(pool.samples[i], x, NormKind::L2);
    }
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

    // Rank k takes the closest sample of the (k+1)-th distinct adversarial
    // class in distance order, so repetitions explore different parts of the
    // boundary. With fewer classes it falls back to the k-th closest.
    std::vector<int> classes_seen;
    std::vector<std::size_t> adversarials;
    for (std::size_t i : order) {
        ++out.queries;
        const Vector logits = forward(model, pool.samples[i]);
        if (!is_adversarial(logits, crit)) continue;
        adversarials.push_back(i);
        const int cls = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
        if (std::find(classes_seen.begin(), classes_seen.end(), cls) != classes_seen.end()) continue;
        classes_seen.push_back(cls);
        if (static_cast<int>(classes_seen.size()) == rank + 1) {
            out.point = pool.samples[i];
            return out;
        }
    }
    if (static_cast<std::size_t>(rank) < adversarials.size()) {
        out.point = pool.samples[adversarials[static_cast<std::size_t>(rank)]];
        return out;
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(bounds.lower, bounds.upper);
    Vector z(x.size());
    for (int draw = 0; draw < kUniformDraws; ++draw) {
        for (double& v : z) v = unit(rng);
        ++out.queries;
        if (adversarial_at(model, z, crit)) {
            out.point = z;
            return out;
        }
    }
    throw StartFailure("no adversarial starting point after pool scan and " + std::to_string(kUniformDraws) +
                       " uniform draws");
}

BoundaryPoint binary_search_to_boundary(const Model& model, const Criterion& crit, std::span<const double> x,
                                        std::span<const double> start, int steps) {
    if (x.size() != start.size()) throw DimensionError("binary search endpoints differ in size");
    BoundaryPoint out;
    if (adversarial_at(model, x, crit)) throw PreconditionError("clean input is already adversarial");
    if (!adversarial_at(model, start, crit)) throw PreconditionError("starting point is not adversarial");
    out.queries = 2;

    Vector lo(x.begin(), x.end());
    Vector hi(start.begin(), start.end());
    Vector mid(x.size());
    for (int s = 0; s < steps; ++s) {
        for (std::size_t j = 0; j < mid.size(); ++j) mid[j] = 0.5 * (lo[j] + hi[j]);
        ++out.queries;
        if (adversarial_at(model, mid, crit)) hi = mid;
        else lo = mid;
    }
    out.point = std::move(hi);
    return out;
}

AttackResult run_attack(const Model& model, std::span<const double> x, const Criterion& crit,
                        const AttackConfig& config, const Dataset& pool) {
    config.validate();
    check_input(model, x, config.bounds);

    const auto start = find_starting_point(pool, x, crit, model, config.seed, config.start_rank, config.bounds);
    const auto boundary = binary_search_to_boundary(model, crit, x, start.point, config.binary_search_steps);

    AttackState state;
    state.queries = boundary.queries;
    state.x_tilde = boundary.point;
    state.best = boundary.point;
    state.best_distance = lp_distance(x, boundary.point, config.norm);
    state.trace.push_back({state.queries, state.best_distance});

    const auto out_of_budget = [&] { return config.max_queries > 0 && state.queries >= config.max_queries; };
    // Returns true when the iterate improved on the best adversarial.
    const auto offer = [&](double adv) {
        if (!(adv < 0.0)) return false;
        const double d = lp_distance(x, state.x_tilde, config.norm);
        if (!(d < state.best_distance)) return false;
        state.best = state.x_tilde;
        state.best_distance = d;
        state.trace.push_back({state.queries, d});
        return true;
    };

    TrustRegionProblem problem;
    problem.x.assign(x.begin(), x.end());
    problem.bounds = config.bounds;
    problem.norm = config.norm;
    double radius = config.trust_radius;
    double last_step = radius;

    for (state.k = 0; state.k < config.max_steps && !out_of_budget(); ++state.k) {
        const auto eval = adv_value_and_grad(model, state.x_tilde, crit);
        ++state.queries;
        // A step that did not help shrinks the region below its own length,
        // so an unconstrained step that overshot cannot simply repeat.
        if (state.k > 0 && !offer(eval.value)) radius = config.radius_decay * (last_step > 0.0 ? std::min(radius, last_step) : radius);

        problem.x_tilde = state.x_tilde;
        problem.b = eval.normal;
        // Aim at adv = -margin ||b||, and past the linearised boundary by a
        // fraction of adv when the iterate has drifted out of the region.
        problem.c = -eval.value - config.boundary_margin * std::sqrt(squared_norm(eval.normal));
        if (eval.value > 0.0) problem.c -= config.overshoot * eval.value;
        problem.r = radius;
        const Solution step = solve(problem, config.solver);
        last_step = squared_norm(step.delta);
        for (std::size_t j = 0; j < state.x_tilde.size(); ++j)
            state.x_tilde[j] = std::clamp(state.x_tilde[j] + step.delta[j], config.bounds.lower, config.bounds.upper);
    }
    if (!out_of_budget()) {
        ++state.queries;
        offer(adv_value(forward(model, state.x_tilde), crit));
    }

    AttackResult result;
    result.success = true;
    result.adversarial = std::move(state.best);
    result.distance = state.best_distance;
    result.queries_used = state.queries;
    result.start_queries = start.queries;
    result.trace = std::move(state.trace);
    return result;
}

namespace {

// Gradient of the loss PGD ascends: CE(y) untargeted, -CE(t) targeted.
Vector loss_gradient(const Model& model, std::span<const double> z, std::span<const double> logits,
                     const Criterion& crit) {
    const double top = *std::max_element(logits.begin(), logits.end());
    Vector coeffs(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) total += coeffs[i] = std::exp(logits[i] - top);
    for (double& v : coeffs) v /= total;
    const auto label = static_cast<std::size_t>(crit.target().value_or(crit.true_class()));
    // p_label - 1 as minus the other probabilities: on confident inputs
    // p_label rounds to 1 and the direct difference would vanish.
    double rest = 0.0;
    for (std::size_t i = 0; i < coeffs.size(); ++i)
        if (i != label) rest += coeffs[i];
    coeffs[label] = -rest;
    if (crit.is_targeted())
        for (double& v : coeffs) v = -v;
    return grad_scalar(model, z, coeffs).grad;
}

template <class Update>
AttackResult projected_ascent(const Model& model, std::span<const double> x, const Criterion& crit,
                              const PgdConfig& config, Update&& update) {
    if (!(config.epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (config.stepsize < 0.0) throw std::invalid_argument("stepsize must be non-negative");
    if (config.iterations < 0) throw std::invalid_argument("iterations must be non-negative");
    check_input(model, x, config.bounds);

    const std::size_t n = x.size();
    Vector lo(n), hi(n);
    for (std::size_t j = 0; j < n; ++j) {
        lo[j] = std::max(config.bounds.lower, x[j] - config.epsilon);
        hi[j] = std::min(config.bounds.upper, x[j] + config.epsilon);
        // Rounding may leave the ball edge a few ulps outside epsilon.
        while (x[j] - lo[j] > config.epsilon) lo[j] = std::nextafter(lo[j], x[j]);
        while (hi[j] - x[j] > config.epsilon) hi[j] = std::nextafter(hi[j], x[j]);
    }
    std::mt19937_64 rng(config.seed);
    Vector z(n);
    for (std::size_t j = 0; j < n; ++j) z[j] = std::uniform_real_distribution<double>(lo[j], hi[j])(rng);

    AttackResult result;
    for (int it = 0;; ++it) {
        const Vector logits = forward(model, z);
        ++result.queries_used;
        if (is_adversarial(logits, crit)) {
            result.success = true;
            result.distance = lp_distance(x, z, NormKind::Linf);
            result.adversarial = z;
            result.trace.push_back({result.queries_used, result.distance});
            break;
        }
        if (it == config.iterations) break;
        const Vector g = loss_gradient(model, z, logits, crit);
        update(z, g);
        for (std::size_t j = 0; j < n; ++j) z[j] = std::clamp(z[j], lo[j], hi[j]);
    }
    return result;
}

}  // namespace

AttackResult run_pgd(const Model& model, std::span<const double> x, const Criterion& crit, const PgdConfig& config) {
    return projected_ascent(model, x, crit, config, [&](Vector& z, const Vector& g) {
        for (std::size_t j = 0; j < z.size(); ++j) z[j] += config.stepsize * static_cast<double>((g[j] > 0) - (g[j] < 0));
    });
}

AttackResult run_adam_pgd(const Model& model, std::span<const double> x, const Criterion& crit,
                          const PgdConfig& config) {
    constexpr double beta1 = 0.9, beta2 = 0.999, stabilizer = 1e-8;
    Vector m(x.size(), 0.0), v(x.size(), 0.0);
    double p1 = 1.0, p2 = 1.0;
    return projected_ascent(model, x, crit, config, [&](Vector& z, const Vector& g) {
        p1 *= beta1;
        p2 *= beta2;
        for (std::size_t j = 0; j < z.size(); ++j) {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            const double mhat = m[j] / (1.0 - p1);
            const double vhat = v[j] / (1.0 - p2);
            z[j] += config.stepsize * mhat / (std::sqrt(vhat) + stabilizer);
        }
    });
}

}  // namespace boundwalk
