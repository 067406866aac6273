#include "doctest.h"

#include "boundwalk/attack.hpp"
#include "boundwalk/oracle.hpp"

#include <cmath>
#include <random>

using namespace boundwalk;

namespace {

// Class 1 wins where w.x > -offset.
Model linear_model(const Vector& w, double offset) {
    Vector weights(2 * w.size(), 0.0);
    std::copy(w.begin(), w.end(), weights.begin() + static_cast<long>(w.size()));
    return Model({DenseLayer{2, w.size(), weights, {0.0, offset}}}, Activation::Identity);
}

// adv(z) = boundary - z for the true class 0.
Model ramp_model(double boundary) {
    return Model({DenseLayer{2, 1, {-1.0, 0.0}, {boundary, 0.0}}}, Activation::Identity);
}

Dataset pool_of(std::vector<Vector> samples) {
    Dataset d;
    d.num_classes = 2;
    d.labels.assign(samples.size(), 0);
    d.samples = std::move(samples);
    return d;
}

void check_result_invariants(const Model& model, const Vector& x, const Criterion& crit, NormKind norm,
                             const AttackResult& res) {
    REQUIRE(res.success == res.adversarial.has_value());
    if (!res.success) return;
    const Vector& a = *res.adversarial;
    CHECK(is_adversarial(forward(model, a), crit));
    for (double v : a) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(res.distance == lp_distance(x, a, norm));
    for (std::size_t i = 1; i < res.trace.size(); ++i) {
        CHECK(res.trace[i].queries >= res.trace[i - 1].queries);
        CHECK(res.trace[i].distance <= res.trace[i - 1].distance);
    }
    CHECK(res.trace.back().distance == res.distance);
    CHECK(res.trace.back().queries <= res.queries_used);
}

const Vector kX{0.1, 0.1};

}  // namespace

TEST_CASE("starting point from the pool") {
    const Model m = ramp_model(0.5);
    const auto crit = Criterion::untargeted(0);
    const Vector x{0.0};

    auto one = find_starting_point(pool_of({{0.2}, {0.9}, {0.3}}), x, crit, m);
    CHECK(one.point == Vector{0.9});
    CHECK(one.queries == 3);

    const auto two = pool_of({{0.8}, {0.6}, {0.1}});
    CHECK(find_starting_point(two, x, crit, m).point == Vector{0.6});
    CHECK(find_starting_point(two, x, crit, m, 0, 1).point == Vector{0.8});
}

TEST_CASE("starting point falls back to uniform draws") {
    const Model m = linear_model({3, 4}, -2);
    const auto crit = Criterion::untargeted(0);
    const auto a = find_starting_point(Dataset{}, kX, crit, m, 42);
    CHECK(is_adversarial(forward(m, a.point), crit));
    CHECK(a.queries >= 1);
    CHECK(find_starting_point(Dataset{}, kX, crit, m, 42).point == a.point);

    // Class 0 wins everywhere in the box.
    const Model never = ramp_model(5.0);
    CHECK_THROWS_AS(find_starting_point(Dataset{}, Vector{0.0}, crit, never, 1), StartFailure);
}

TEST_CASE("binary search to the boundary") {
    const Model m = ramp_model(0.5);
    const auto crit = Criterion::untargeted(0);

    auto b = binary_search_to_boundary(m, crit, Vector{0.0}, Vector{1.0}, 10);
    CHECK(b.point[0] > 0.5);
    CHECK(b.point[0] <= 0.5 + std::ldexp(1.0, -10));
    CHECK(b.queries == 12);

    // The midpoint sits exactly on the boundary, which is not adversarial.
    CHECK(binary_search_to_boundary(m, crit, Vector{0.0}, Vector{1.0}, 1).point == Vector{1.0});
    CHECK(binary_search_to_boundary(ramp_model(0.4), crit, Vector{0.0}, Vector{1.0}, 1).point == Vector{0.5});

    const double near = 0.5 + 1e-12;
    CHECK(binary_search_to_boundary(m, crit, Vector{0.0}, Vector{near}, 10).point == Vector{near});

    CHECK_THROWS_AS(binary_search_to_boundary(m, crit, Vector{0.7}, Vector{1.0}), PreconditionError);
    CHECK_THROWS_AS(binary_search_to_boundary(m, crit, Vector{0.0}, Vector{0.2}), PreconditionError);
}

TEST_CASE("attack converges on the linear model within 50 queries") {
    const Model m = linear_model({3, 4}, -2);
    const auto crit = Criterion::untargeted(0);
    const struct {
        NormKind norm;
        double expected;
    } cases[] = {{NormKind::L2, 0.26}, {NormKind::Linf, 1.3 / 7.0}, {NormKind::L1, 0.325}};
    for (const auto& c : cases) {
        for (double r : {1e-3, 1e-2, 1e-1, 1.0}) {
            AttackConfig cfg;
            cfg.norm = c.norm;
            cfg.trust_radius = r;
            cfg.max_queries = 50;
            const auto res = run_attack(m, kX, crit, cfg, Dataset{});
            CHECK(res.queries_used <= 50);
            CHECK(res.distance == doctest::Approx(c.expected).epsilon(0.01));
            check_result_invariants(m, kX, crit, c.norm, res);
        }
    }

    AttackConfig cfg;
    cfg.norm = NormKind::L0;
    cfg.max_queries = 50;
    const auto res = run_attack(m, kX, crit, cfg, Dataset{});
    CHECK(res.distance == doctest::Approx(oracle::l0_minimal_linear({3, 4}, -2, kX) / 2.0));
    check_result_invariants(m, kX, crit, NormKind::L0, res);
}

TEST_CASE("one feasible step lands on an exactly linear boundary") {
    const Model m = linear_model({3, 4}, -2);
    const auto crit = Criterion::untargeted(0);
    AttackConfig cfg;
    cfg.trust_radius = 1.0;
    cfg.max_steps = 1;
    const auto res = run_attack(m, kX, crit, cfg, Dataset{});
    const double adv = adv_value(forward(m, *res.adversarial), crit);
    CHECK(adv < 0.0);
    CHECK(std::abs(adv) <= 1e-6 * 5.0);
    CHECK(res.distance == doctest::Approx(0.26).epsilon(1e-6));
}

TEST_CASE("attack matches the analytic optimum on random linear models") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    int compared = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial) % 6;
        Vector w(n), x(n);
        for (auto& e : w) e = g(rng);
        for (auto& e : x) e = 0.3 + 0.4 * unit(rng);
        const double offset = -dot(w, x) - 0.05 - 0.2 * unit(rng);
        const Model m = linear_model(w, offset);
        const auto crit = Criterion::untargeted(0);
        for (NormKind norm : {NormKind::L1, NormKind::L2, NormKind::Linf}) {
            const double expected = oracle::linear_minimal_distance(w, offset, x, norm);
            // The analytic witness must lie in the box for the comparison.
            Vector witness = x;
            const double gap = -(dot(w, x) + offset);
            if (norm == NormKind::L2) {
                for (std::size_t j = 0; j < n; ++j) witness[j] += gap * w[j] / squared_norm(w);
            } else if (norm == NormKind::Linf) {
                for (std::size_t j = 0; j < n; ++j) witness[j] += expected * (w[j] > 0 ? 1.0 : -1.0);
            } else {
                std::size_t k = 0;
                for (std::size_t j = 1; j < n; ++j)
                    if (std::abs(w[j]) > std::abs(w[k])) k = j;
                witness[k] += gap / w[k];
            }
            bool interior = true;
            for (double v : witness) interior = interior && v > 0.0 && v < 1.0;
            if (!interior) continue;

            AttackConfig cfg;
            cfg.norm = norm;
            cfg.trust_radius = 0.1;
            cfg.max_steps = 100;
            const auto res = run_attack(m, x, crit, cfg, Dataset{});
            CHECK(res.distance >= expected * (1.0 - 1e-9));
            CHECK(res.distance <= expected * 1.01);
            check_result_invariants(m, x, crit, norm, res);
            ++compared;
        }
    }
    CHECK(compared > 60);
}

TEST_CASE("L0 attack on linear models never beats the exact count") {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    int within_one = 0, total = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial) % 7;
        Vector w(n), x(n);
        for (auto& e : w) e = g(rng);
        for (auto& e : x) e = unit(rng);
        const double offset = -dot(w, x) - 0.1 - 0.5 * unit(rng);
        std::size_t exact = 0;
        try {
            exact = oracle::l0_minimal_linear(w, offset, x);
        } catch (const oracle::UnreachableError&) {
            continue;
        }
        const Model m = linear_model(w, offset);
        AttackConfig cfg;
        cfg.norm = NormKind::L0;
        cfg.trust_radius = 1.0;
        cfg.max_steps = 50;
        // The corner maximising w.z crosses whenever anything does.
        Vector corner(n);
        for (std::size_t j = 0; j < n; ++j) corner[j] = w[j] > 0 ? 1.0 : 0.0;
        const auto res = run_attack(m, x, Criterion::untargeted(0), cfg, pool_of({corner}));
        const double count = res.distance * static_cast<double>(n);
        CHECK(count >= static_cast<double>(exact) - 1e-9);
        within_one += count <= static_cast<double>(exact) + 1.0 + 1e-9;
        ++total;
    }
    CHECK(within_one >= total * 9 / 10);
}

TEST_CASE("attack preconditions and errors") {
    const Model m = linear_model({3, 4}, -2);
    const auto crit = Criterion::untargeted(0);
    CHECK_THROWS_AS(run_attack(m, Vector{0.9, 0.9}, crit, AttackConfig{}, Dataset{}), PreconditionError);
    CHECK_THROWS_AS(run_attack(m, Vector{0.1}, crit, AttackConfig{}, Dataset{}), DimensionError);
    AttackConfig bad;
    bad.trust_radius = 0.0;
    CHECK_THROWS(run_attack(m, kX, crit, bad, Dataset{}));
    bad = AttackConfig{};
    bad.max_steps = 0;
    CHECK_THROWS(run_attack(m, kX, crit, bad, Dataset{}));

    // Logit 1 saturates for z >= 0.6, so the gradient vanishes at the start.
    const Model flat({DenseLayer{2, 1, {1.0, 1.0}, {-0.5, -0.6}}, DenseLayer{2, 2, {0, 0, 10, -10}, {0.1, 0.0}}},
                     Activation::Relu);
    AttackConfig cfg;
    cfg.binary_search_steps = 0;
    CHECK_THROWS_AS(run_attack(flat, Vector{0.0}, crit, cfg, pool_of({{1.0}})), GradientMaskingError);
}

TEST_CASE("attack is deterministic") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 1.0);
    DenseLayer a{6, 4, std::vector<double>(24), Vector(6)};
    DenseLayer b{3, 6, std::vector<double>(18), Vector(3)};
    for (auto* v : {&a.weights, &a.bias, &b.weights, &b.bias})
        for (auto& e : *v) e = g(rng);
    const Model m({a, b}, Activation::Tanh);
    const Vector x{0.4, 0.5, 0.6, 0.3};
    const auto crit = Criterion::untargeted(predict(m, x));
    for (NormKind norm : {NormKind::L0, NormKind::L1, NormKind::L2, NormKind::Linf}) {
        AttackConfig cfg;
        cfg.norm = norm;
        cfg.max_steps = 40;
        cfg.seed = 3;
        const auto r1 = run_attack(m, x, crit, cfg, Dataset{});
        const auto r2 = run_attack(m, x, crit, cfg, Dataset{});
        CHECK(r1.adversarial == r2.adversarial);
        CHECK(r1.trace == r2.trace);
        CHECK(r1.queries_used == r2.queries_used);
        check_result_invariants(m, x, crit, norm, r1);
    }
}

TEST_CASE("PGD on the linear model") {
    const Model m = linear_model({3, 4}, -2);
    const auto crit = Criterion::untargeted(0);
    PgdConfig cfg;
    cfg.epsilon = 0.2;
    cfg.stepsize = 0.01;
    cfg.iterations = 100;
    const auto hit = run_pgd(m, kX, crit, cfg);
    CHECK(hit.success);
    CHECK(hit.distance <= 0.2 + 1e-12);
    check_result_invariants(m, kX, crit, NormKind::Linf, hit);

    cfg.epsilon = 0.1;
    const auto miss = run_pgd(m, kX, crit, cfg);
    CHECK_FALSE(miss.success);
    CHECK(miss.queries_used == 101);

    cfg.epsilon = 0.2;
    cfg.stepsize = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        cfg.seed = seed;
        const auto still = run_pgd(m, kX, crit, cfg);
        // Without movement only the random start can succeed, on the first query.
        if (still.success) CHECK(still.queries_used == 1);
        else CHECK(still.queries_used == 101);
    }

    PgdConfig same;
    same.seed = 9;
    same.epsilon = 0.19;
    same.stepsize = 0.003;
    CHECK(run_pgd(m, kX, crit, same).adversarial == run_pgd(m, kX, crit, same).adversarial);
}

TEST_CASE("PGD targeted descent") {
    // Three classes; class 2 is reachable from x by raising both inputs.
    const Model m({DenseLayer{3, 2, {0, 0, -1, 0, 1, 1}, {0.3, 0.0, -0.8}}}, Activation::Identity);
    const Vector x{0.1, 0.1};
    const auto crit = Criterion::targeted(0, 2);
    PgdConfig cfg;
    cfg.epsilon = 0.5;
    cfg.stepsize = 0.02;
    cfg.iterations = 200;
    const auto res = run_pgd(m, x, crit, cfg);
    REQUIRE(res.success);
    CHECK(competitor(forward(m, *res.adversarial), crit) == 2);
    CHECK(run_adam_pgd(m, x, crit, cfg).success);
}

TEST_CASE("Adam PGD") {
    const Model m = linear_model({3, 4}, -2);
    const auto crit = Criterion::untargeted(0);
    PgdConfig cfg;
    cfg.epsilon = 0.2;
    cfg.stepsize = 0.01;
    cfg.iterations = 100;
    const auto hit = run_adam_pgd(m, kX, crit, cfg);
    CHECK(hit.success);
    check_result_invariants(m, kX, crit, NormKind::Linf, hit);
    cfg.epsilon = 0.1;
    CHECK_FALSE(run_adam_pgd(m, kX, crit, cfg).success);

    cfg.iterations = 0;
    cfg.stepsize = 1e-9;
    CHECK(run_adam_pgd(m, kX, crit, cfg).queries_used == 1);

    // Zero weights: no gradient, so the iterate never moves from the start.
    const Model flat({DenseLayer{2, 2, {0, 0, 0, 0}, {0.0, -1.0}}}, Activation::Identity);
    cfg.epsilon = 0.3;
    cfg.iterations = 50;
    cfg.stepsize = 0.1;
    const auto res = run_adam_pgd(flat, kX, crit, cfg);
    CHECK_FALSE(res.success);
    CHECK(res.queries_used == 51);
}

TEST_CASE("PGD iterates never leave the epsilon ball, even by rounding") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Vector x{unit(rng), unit(rng)};
        // Boundary at adv = 0 just past x so every run succeeds on the ball edge.
        const double eps = 0.01 + 0.3 * unit(rng);
        const Model m = linear_model({1.0, 1.0}, -(x[0] + x[1]) - 1.5 * eps);
        PgdConfig cfg;
        cfg.epsilon = eps;
        cfg.stepsize = 1.0;
        cfg.iterations = 5;
        cfg.seed = static_cast<std::uint64_t>(trial);
        const auto res = run_pgd(m, x, Criterion::untargeted(0), cfg);
        if (!res.success) continue;
        CHECK(res.distance <= eps);
    }
}
