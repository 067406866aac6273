#include "boundwalk/verify.hpp"

#include "boundwalk/attack.hpp"
#include "boundwalk/criterion.hpp"
#include "boundwalk/oracle.hpp"
#include "boundwalk/trust_region.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

namespace boundwalk::verify {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

constexpr NormKind kNorms[] = {NormKind::L0, NormKind::L1, NormKind::L2, NormKind::Linf};

}  // namespace

TrustRegionProblem random_problem(std::mt19937_64& rng, std::size_t n, NormKind norm, double reach_factor) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    TrustRegionProblem p;
    p.norm = norm;
    p.bounds = {0.0, 1.0};
    p.x.resize(n);
    p.x_tilde.resize(n);
    p.b.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        p.x[j] = unit(rng);
        p.x_tilde[j] = unit(rng);
        p.b[j] = gauss(rng);
    }
    if (squared_norm(p.b) == 0.0) p.b[0] = 1.0;
    p.r = std::exp(std::log(0.005) + unit(rng) * (std::log(0.1) - std::log(0.005)));

    Vector dir(n);
    for (auto& e : dir) e = gauss(rng);
    const double len = std::sqrt(squared_norm(dir));
    const double radius = unit(rng) * std::sqrt(p.r) * 0.95;
    double c = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double step = len > 0 ? dir[j] / len * radius : 0.0;
        step = std::clamp(step, p.step_lower(j), p.step_upper(j));
        c += p.b[j] * step;
    }
    p.c = (unit(rng) < 0.05) ? 0.0 : c * (reach_factor == 1.0 ? 1.0 : unit(rng) * reach_factor);
    return p;
}

Model random_tanh_mlp(std::mt19937_64& rng, std::size_t in, std::size_t hidden, std::size_t classes) {
    std::normal_distribution<double> g(0.0, 1.0);
    DenseLayer a{hidden, in, std::vector<double>(hidden * in), Vector(hidden)};
    DenseLayer b{classes, hidden, std::vector<double>(classes * hidden), Vector(classes)};
    for (auto* v : {&a.weights, &a.bias, &b.weights, &b.bias})
        for (auto& e : *v) e = g(rng);
    return Model({a, b}, Activation::Tanh);
}

std::vector<SuiteResult> solver_suites(std::uint64_t seed, int instances) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(seed);
    constexpr double resolution = 1e-3;

    SuiteResult oracle_cmp{"solver matches the lattice oracle", true, "", 0.0};
    SuiteResult feas{"solutions satisfy the constraints", true, "", 0.0};
    int feasible_count = 0, violations = 0;
    for (NormKind norm : kNorms) {
        int l0_within = 0, l0_below = 0, l0_total = 0;
        double worst_excess = -1.0;
        for (int i = 0; i < instances; ++i) {
            const auto p = random_problem(rng, 1 + static_cast<std::size_t>(i) % 3, norm);
            const auto s = solve(p);
            const auto grid = oracle::grid_solve(p, {resolution, 3});
            if (norm == NormKind::L0) {
                if (!grid.feasible) continue;
                const double n = static_cast<double>(p.size());
                const double mine = s.feasible ? s.objective * n : n + 1.0;
                const double ref = grid.objective * n;
                ++l0_total;
                l0_below += mine < ref - 1e-9;
                l0_within += mine <= ref + 1.0 + 1e-9;
            } else {
                const double excess = (s.feasible ? s.objective : INFINITY) - grid.objective;
                worst_excess = std::max(worst_excess, excess);
            }

            if (!s.feasible) continue;
            ++feasible_count;
            bool ok = squared_norm(s.delta) <= p.r + 1e-9;
            for (std::size_t j = 0; j < p.size(); ++j) {
                const double z = p.x_tilde[j] + s.delta[j];
                ok = ok && z >= p.bounds.lower - 1e-12 && z <= p.bounds.upper + 1e-12;
            }
            ok = ok && std::abs(dot(p.b, s.delta) - p.c) <= 1e-3 * std::max(1.0, std::abs(p.c));
            violations += !ok;
        }
        if (norm == NormKind::L0) {
            const bool pass = l0_below == 0 && l0_within * 10 >= l0_total * 9;
            oracle_cmp.passed = oracle_cmp.passed && pass;
            oracle_cmp.detail += fmt("L0 within+1 %d/%d below %d; ", l0_within, l0_total, l0_below);
        } else {
            oracle_cmp.passed = oracle_cmp.passed && worst_excess <= resolution;
            oracle_cmp.detail += fmt("%s worst excess %.2e; ", std::string(to_string(norm)).c_str(), worst_excess);
        }
    }
    oracle_cmp.detail += fmt("tolerance %.0e", resolution);
    feas.passed = violations == 0 && feasible_count > 0;
    feas.detail = fmt("%d feasible solutions, %d violations", feasible_count, violations);
    oracle_cmp.seconds = feas.seconds = since(t0);
    return {oracle_cmp, feas};
}

SuiteResult strong_duality_suite(std::uint64_t seed, int instances) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    int infeasible = 0;
    for (int i = 0; i < instances; ++i) {
        const auto p = random_problem(rng, 1 + static_cast<std::size_t>(i) % 5, NormKind::L2);
        const auto s = solve(p);
        if (!s.feasible) {
            ++infeasible;
            continue;
        }
        const auto d = maximize_dual(p);
        worst = std::max(worst, std::abs(s.objective * s.objective - d.value));
    }
    return {"L2 strong duality", worst <= 1e-4 && infeasible == 0,
            fmt("worst primal-dual gap %.2e over %d problems, %d infeasible", worst, instances, infeasible),
            since(t0)};
}

SuiteResult linear_convergence_suite() {
    const auto t0 = Clock::now();
    const Vector w{3, 4};
    const double offset = -2;
    const Vector x{0.1, 0.1};
    const Model model({DenseLayer{2, 2, {0.0, 0.0, w[0], w[1]}, {0.0, offset}}}, Activation::Identity);
    const auto crit = Criterion::untargeted(0);
    // The corner that crosses the boundary first.
    Dataset pool;
    pool.num_classes = 2;
    pool.samples = {{1.0, 1.0}};
    pool.labels = {1};

    bool passed = true;
    std::string detail;
    for (NormKind norm : kNorms) {
        const double exact = norm == NormKind::L0
                                 ? static_cast<double>(oracle::l0_minimal_linear(w, offset, x)) / 2.0
                                 : oracle::linear_minimal_distance(w, offset, x, norm);
        long worst_queries = 0;
        for (double r : {1e-3, 1e-2, 1e-1, 1.0}) {
            AttackConfig cfg;
            cfg.norm = norm;
            cfg.trust_radius = r;
            cfg.max_queries = 50;
            const auto res = run_attack(model, x, crit, cfg, pool);
            long reached = -1;
            for (const auto& tp : res.trace) {
                const bool close = norm == NormKind::L0 ? std::abs(tp.distance - exact) <= 1e-12
                                                        : tp.distance <= exact * 1.01;
                if (close) {
                    reached = tp.queries;
                    break;
                }
            }
            const bool ok = res.success && reached >= 0 && reached <= 50 && res.distance >= exact * (1 - 1e-9);
            passed = passed && ok;
            worst_queries = reached < 0 ? 9999 : std::max(worst_queries, reached);
        }
        detail += fmt("%s exact %.4f by %ld queries; ", std::string(to_string(norm)).c_str(), exact, worst_queries);
    }
    return {"linear-model convergence", passed, detail, since(t0)};
}

SuiteResult gradient_suite(std::uint64_t seed, int instances) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double h = 1e-5;
    double worst = 0.0;
    for (int i = 0; i < instances; ++i) {
        const std::size_t n = 2 + static_cast<std::size_t>(i) % 7;
        const int classes = 2 + i % 4;
        const Model m = random_tanh_mlp(rng, n, 3 + static_cast<std::size_t>(i) % 9, static_cast<std::size_t>(classes));
        Vector x(n);
        for (auto& e : x) e = unit(rng);
        const int y = i % classes;
        const auto crit = i % 2 ? Criterion::untargeted(y) : Criterion::targeted(y, (y + 1) % classes);
        const auto ev = adv_value_and_grad(m, x, crit);
        double err = 0.0, scale = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            Vector xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const double fd = (adv_value(forward(m, xp), crit) - adv_value(forward(m, xm), crit)) / (2 * h);
            err += (fd - ev.normal[j]) * (fd - ev.normal[j]);
            scale += fd * fd;
        }
        worst = std::max(worst, std::sqrt(err) / std::max(std::sqrt(scale), 1e-8));
    }
    return {"criterion gradient", worst <= 1e-4,
            fmt("worst relative error %.2e over %d tanh MLPs", worst, instances), since(t0)};
}

std::vector<SuiteResult> run_all(std::uint64_t seed) {
    auto out = solver_suites(seed);
    out.push_back(strong_duality_suite(seed + 1));
    out.push_back(linear_convergence_suite());
    out.push_back(gradient_suite(seed + 2));
    return out;
}

}  // namespace boundwalk::verify
