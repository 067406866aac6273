#include "doctest.h"

#include "boundwalk/oracle.hpp"
#include "instances.hpp"

using namespace boundwalk;
using namespace boundwalk::oracle;

TEST_CASE("grid_solve reproduces the hand-solved step examples") {
    const GridSpec grid{1e-3, 3};
    const auto l2 = grid_solve({{1, 0}, {0, 0}, {0, 1}, 0.0, 0.04, {}, NormKind::L2}, grid);
    CHECK(l2.feasible);
    CHECK(l2.objective == doctest::Approx(0.8).epsilon(1e-3));
    const auto linf = grid_solve({{1, 1}, {0, 0}, {1, -1}, 0.0, 0.08, {}, NormKind::Linf}, grid);
    CHECK(linf.objective == doctest::Approx(0.8).epsilon(1e-3));
    const auto l0 = grid_solve({{1, 1}, {0, 0.5}, {1, 0}, 0.0, 0.25, {}, NormKind::L0}, grid);
    CHECK(l0.objective == doctest::Approx(0.5));
}

TEST_CASE("grid_solve reports unreachable constraints") {
    const auto s = grid_solve({{0.5, 0.5}, {0.5, 0.5}, {1, 1}, 2.0, 0.01, {}, NormKind::L2});
    CHECK_FALSE(s.feasible);
    CHECK(std::isinf(s.objective));
}

TEST_CASE("grid_solve refuses large dimensions") {
    TrustRegionProblem p{Vector(4, 0.5), Vector(4, 0.5), Vector(4, 1.0), 0.0, 0.1, {}, NormKind::L2};
    CHECK_THROWS_AS(grid_solve(p), DimensionError);
}

TEST_CASE("grid_solve never gets worse under refinement") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        for (NormKind norm : {NormKind::L0, NormKind::L1, NormKind::L2, NormKind::Linf}) {
            const auto p = testing::random_problem(rng, 1 + trial % 3, norm);
            const auto coarse = grid_solve(p, {0.02, 3});
            const auto fine = grid_solve(p, {0.01, 3});
            CHECK(fine.objective <= coarse.objective);
            if (fine.feasible) {
                CHECK(std::abs(dot(p.b, fine.delta) - p.c) <= 1e-9);
                CHECK(squared_norm(fine.delta) <= p.r * (1 + 1e-12));
            }
        }
    }
}

TEST_CASE("linear_minimal_distance examples") {
    const Vector w{3, 4}, x{0.1, 0.1};
    CHECK(linear_minimal_distance(w, -2, x, NormKind::L2) == doctest::Approx(0.26));
    CHECK(linear_minimal_distance(w, -2, x, NormKind::Linf) == doctest::Approx(1.3 / 7));
    CHECK(linear_minimal_distance(w, -2, x, NormKind::L1) == doctest::Approx(0.325));
    CHECK(linear_minimal_distance(w, -2, Vector{0.4, 0.2}, NormKind::L2) == doctest::Approx(0.0));
    CHECK_THROWS(linear_minimal_distance(w, -2, x, NormKind::L0));
}

TEST_CASE("l0_minimal_linear examples") {
    CHECK(l0_minimal_linear({3, 4}, -2, {0.1, 0.1}) == 1);
    CHECK(l0_minimal_linear({3, 4}, -2, {0.9, 0.9}) == 0);
    CHECK_THROWS_AS(l0_minimal_linear({0, 0}, -2, {0.1, 0.1}), UnreachableError);
    // Two coordinates land exactly on the plane, which does not cross it.
    CHECK(l0_minimal_linear({1, 1, 1}, -2.05, {0.05, 0.05, 0.05}) == 3);
    CHECK(l0_minimal_linear({1, 1}, -1.5, {0.1, 0.1}) == 2);
}
