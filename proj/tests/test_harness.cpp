#include "doctest.h"

#include "boundwalk/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

using namespace boundwalk;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

RunRecord rec(std::size_t sample, double distance, double h = 1e-2, int rep = 0) {
    RunRecord r;
    r.sample_id = sample;
    r.rep = rep;
    r.hyperparameter = h;
    r.success = std::isfinite(distance);
    r.distance = distance;
    if (r.success) r.trace = {{10, distance}};
    r.queries = 10;
    return r;
}

// Class 1 wins where 3 z0 + 4 z1 > 2.
Model plane_model() {
    return Model({DenseLayer{2, 2, {0.0, 0.0, 3.0, 4.0}, {0.0, -2.0}}}, Activation::Identity);
}

ExperimentData plane_data() {
    ExperimentData d{plane_model(), {}, {}};
    d.eval.num_classes = d.pool.num_classes = 2;
    d.eval.samples = {{0.1, 0.1}, {0.2, 0.1}, {0.05, 0.3}, {0.3, 0.2}};
    d.eval.labels = {0, 0, 0, 0};
    d.pool.samples = {{1.0, 1.0}, {0.9, 0.8}};
    d.pool.labels = {1, 1};
    return d;
}

ExperimentSpec plane_spec() {
    ExperimentSpec s;
    s.attack = AttackKind::OursL2;
    s.samples = 4;
    s.grid = {1e-3, 1e-2, 1e-1};
    s.max_steps = 40;
    s.seed = 7;
    return s;
}

std::vector<RunRecord> random_records(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<RunRecord> out;
    const int samples = 1 + static_cast<int>(rng() % 6);
    for (int s = 0; s < samples; ++s)
        for (double h : {1e-3, 1e-2, 1e-1}) {
            RunRecord r = rec(static_cast<std::size_t>(s), kInf, h);
            r.trace.clear();
            if (unit(rng) < 0.8) {
                long q = 1 + static_cast<long>(rng() % 5);
                double d = 1.0 + unit(rng);
                for (int k = 0; k < 6; ++k) {
                    r.trace.push_back({q, d});
                    q += 1 + static_cast<long>(rng() % 20);
                    d *= unit(rng);
                }
                r.success = true;
                r.distance = d;
                r.queries = q;
            }
            out.push_back(r);
        }
    return out;
}

}  // namespace

TEST_CASE("attack kinds round-trip through their names") {
    for (auto k : {AttackKind::OursL0, AttackKind::OursL1, AttackKind::OursL2, AttackKind::OursLinf, AttackKind::Pgd,
                   AttackKind::AdamPgd})
        CHECK(parse_attack_kind(to_string(k)) == k);
    CHECK(parse_attack_kind("OURS-linf") == AttackKind::OursLinf);
    CHECK_THROWS_AS(parse_attack_kind("cw"), std::invalid_argument);
    CHECK(attack_norm(AttackKind::Pgd) == NormKind::Linf);
    CHECK(default_grid(AttackKind::OursL2) == std::vector<double>{3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1});
    CHECK(default_grid(AttackKind::AdamPgd).size() == 8);
}

TEST_CASE("median takes per-sample minima and the lower middle") {
    CHECK(median_perturbation({rec(0, 3), rec(1, 1), rec(2, 2)}) == 2);
    CHECK(median_perturbation({rec(0, 1), rec(1, 2), rec(2, kInf)}) == 2);
    CHECK(median_perturbation({rec(0, kInf), rec(1, kInf)}) == kInf);
    // Minimum over hyperparameters and reps of one sample.
    CHECK(median_perturbation({rec(0, 5), rec(0, 0.5, 0.1), rec(0, kInf, 1e-3, 1)}) == 0.5);
    // Even count uses the lower of the two middle values.
    CHECK(median_perturbation({rec(0, 4), rec(1, 1), rec(2, 3), rec(3, 2)}) == 2);
    CHECK_THROWS_AS(median_perturbation({}), std::invalid_argument);
}

TEST_CASE("median is invariant to record order") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
        auto records = random_records(rng);
        const double m = median_perturbation(records);
        std::shuffle(records.begin(), records.end(), rng);
        CHECK(median_perturbation(records) == m);
    }
}

TEST_CASE("success rate counts surviving samples") {
    CHECK(success_rate_at_eps({rec(0, 0.1), rec(1, 0.3)}, 0.2) == 0.5);
    CHECK(success_rate_at_eps({rec(0, 0.1), rec(1, 0.2)}, 0.2) == 0.0);
    CHECK(success_rate_at_eps({rec(0, 0.1), rec(1, 0.3)}, 0.0) == 1.0);
    CHECK(success_rate_at_eps({rec(0, kInf)}, 0.5) == 1.0);
    CHECK_THROWS_AS(success_rate_at_eps({}, 0.1), std::invalid_argument);
}

TEST_CASE("curve reads the trace as a step function") {
    RunRecord r = rec(0, 0.5);
    r.trace = {{5, 1.0}, {20, 0.5}};
    const auto curve = query_distortion_curve({r}, {3, 10, 25});
    REQUIRE(curve.size() == 3);
    CHECK(curve[0].metric == kInf);
    CHECK(curve[1].metric == 1.0);
    CHECK(curve[2].metric == 0.5);
    CHECK(curve[2].budget == 25);

    const auto acc = query_distortion_curve({r}, {3, 10, 25}, 0.7);
    CHECK(acc[0].metric == 1.0);
    CHECK(acc[1].metric == 1.0);
    CHECK(acc[2].metric == 0.0);
    CHECK(query_distortion_curve({}, {1, 2}).empty());
}

TEST_CASE("curve takes the best hyperparameter per budget") {
    RunRecord fast = rec(0, 0.8, 1e-1);
    fast.trace = {{2, 0.9}, {4, 0.8}};
    RunRecord slow = rec(0, 0.1, 1e-3);
    slow.trace = {{2, 2.0}, {50, 0.1}};
    const auto curve = query_distortion_curve({fast, slow}, {2, 10, 50});
    CHECK(curve[0].metric == 0.9);
    CHECK(curve[1].metric == 0.8);
    CHECK(curve[2].metric == 0.1);
}

TEST_CASE("curves are non-increasing on random record sets") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 100; ++t) {
        const auto records = random_records(rng);
        const auto budgets = default_budgets(records);
        for (auto eps : {std::optional<double>{}, std::optional<double>{0.3}}) {
            const auto curve = query_distortion_curve(records, budgets, eps);
            for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].metric <= curve[i - 1].metric);
        }
    }
}

TEST_CASE("default budgets cover 1 to the largest query count") {
    RunRecord r = rec(0, 1.0);
    r.queries = 130;
    CHECK(default_budgets({r}) == std::vector<long>{1, 2, 5, 10, 20, 50, 100, 130});
    r.queries = 100;
    CHECK(default_budgets({r}) == std::vector<long>{1, 2, 5, 10, 20, 50, 100});
}

TEST_CASE("sensitivity report") {
    SUBCASE("dominant value has zero degradation") {
        std::vector<RunRecord> records;
        for (std::size_t s = 0; s < 3; ++s) {
            records.push_back(rec(s, 1.0 + static_cast<double>(s), 1e-3));
            records.push_back(rec(s, 2.0 + static_cast<double>(s), 1e-2));
            records.push_back(rec(s, 4.0 + static_cast<double>(s), 1e-1));
        }
        const auto rep = sensitivity_report(records);
        CHECK(rep.best_median == 2.0);
        REQUIRE(rep.rows.size() == 3);
        CHECK(rep.rows[0].hyperparameter == 1e-3);
        CHECK(rep.rows[0].degradation == 0.0);
        CHECK(rep.rows[1].degradation == doctest::Approx(0.5));
        CHECK(rep.rows[2].degradation == doctest::Approx(1.5));
        CHECK(rep.single_rep_degradation == 0.0);
    }
    SUBCASE("identical results give zero everywhere") {
        std::vector<RunRecord> records;
        for (double h : {1e-3, 1e-2, 1e-1, 1.0}) records.push_back(rec(0, 0.4, h));
        const auto rep = sensitivity_report(records);
        for (const auto& row : rep.rows) CHECK(row.degradation == 0.0);
    }
    SUBCASE("repetitions") {
        std::vector<RunRecord> records;
        for (double h : {1e-3, 1e-2, 1e-1}) {
            records.push_back(rec(0, 2.0, h, 0));
            records.push_back(rec(0, 1.0, h, 1));
        }
        CHECK(sensitivity_report(records).single_rep_degradation == doctest::Approx(1.0));
    }
    SUBCASE("degradations are non-negative") {
        std::mt19937_64 rng(5);
        for (int t = 0; t < 50; ++t) {
            const auto rep = sensitivity_report(random_records(rng));
            for (const auto& row : rep.rows) CHECK(row.degradation >= 0.0);
            CHECK(rep.single_rep_degradation >= 0.0);
        }
    }
    SUBCASE("insufficient grids") {
        CHECK_THROWS_AS(sensitivity_report({rec(0, 1, 1e-3), rec(0, 1, 1e-1)}), InsufficientGridError);
        CHECK_THROWS_AS(sensitivity_report({rec(0, 1, 1e-3), rec(0, 1, 1e-2), rec(0, 1, 5e-2)}),
                        InsufficientGridError);
    }
}

TEST_CASE("results round-trip through CSV and traces") {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 20; ++t) {
        auto records = random_records(rng);
        for (auto& r : records) {
            r.attack = AttackKind::OursL1;
            r.norm = NormKind::L1;
            r.hyperparameter *= 1.0 + 1e-13 * static_cast<double>(t);
            r.start_queries = static_cast<long>(rng() % 100);
        }
        std::ostringstream csv, traces;
        write_results_csv(records, csv);
        write_traces_json(records, traces);
        CHECK(parse_results(csv.str(), traces.str()) == records);
    }

    const auto dir = std::filesystem::temp_directory_path() / "boundwalk_results_test";
    std::vector<RunRecord> records{rec(0, 0.25), rec(1, kInf)};
    save_results(records, dir);
    CHECK(load_results(dir) == records);
    std::filesystem::remove_all(dir);

    CHECK_THROWS_AS(parse_results("a,b\n", "{}"), std::invalid_argument);
}

TEST_CASE("CSV layout") {
    const std::string csv = results_csv({rec(3, 0.5, 0.1, 1)});
    CHECK(csv == "sample_id,rep,attack,norm,hyperparameter,success,distance,queries\n"
                 "3,1,ours-L2,l2,0.10000000000000001,1,0.5,10\n");
}

TEST_CASE("spec files") {
    ExperimentSpec s;
    s.model = "m.json";
    s.data.kind = DataSource::Kind::Blobs;
    s.data.classes = 4;
    s.attack = AttackKind::Pgd;
    s.criterion = CriterionMode::Targeted;
    s.grid = {0.1, 1.0};
    s.seed = 42;
    const auto back = spec_from_json(spec_to_json(s));
    CHECK(back.model == s.model);
    CHECK(back.data.kind == DataSource::Kind::Blobs);
    CHECK(back.data.classes == 4);
    CHECK(back.attack == AttackKind::Pgd);
    CHECK(back.criterion == CriterionMode::Targeted);
    CHECK(back.grid == s.grid);
    CHECK(back.seed == std::optional<std::uint64_t>(42));

    const auto defaults = spec_from_json(R"({"attack": "ours-L1"})");
    CHECK(defaults.grid == default_grid(AttackKind::OursL1));
    CHECK(!defaults.seed);
    CHECK_THROWS(spec_from_json(R"({"criterion": "sideways"})"));

    ExperimentSpec bad = plane_spec();
    bad.samples = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = plane_spec();
    bad.grid.clear();
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("experiment on a linear model matches the point-to-plane distance") {
    const auto data = plane_data();
    const auto out = run_experiment(plane_spec(), data);
    REQUIRE(out.sample_ids.size() == 4);
    CHECK(out.records.size() == 4 * 3);
    CHECK(out.aborted == 0);
    for (std::size_t id : out.sample_ids) {
        const Vector& x = data.eval.samples[id];
        const double exact = (2.0 - 3.0 * x[0] - 4.0 * x[1]) / 5.0;
        std::vector<RunRecord> mine;
        for (const auto& r : out.records)
            if (r.sample_id == id) mine.push_back(r);
        CHECK(median_perturbation(mine) == doctest::Approx(exact).epsilon(0.01));
        CHECK(median_perturbation(mine) >= exact * (1 - 1e-9));
    }
    // Exact distances 0.26, 0.2, 0.13, 0.06; lower median 0.13.
    CHECK(median_perturbation(out.records) == doctest::Approx(0.13).epsilon(0.01));
}

TEST_CASE("experiments are deterministic per seed") {
    const auto data = plane_data();
    auto spec = plane_spec();
    spec.repetitions = 2;
    const auto a = run_experiment(spec, data);
    const auto b = run_experiment(spec, data);
    CHECK(a.records == b.records);
    CHECK(results_csv(a.records) == results_csv(b.records));

    spec.attack = AttackKind::Pgd;
    spec.epsilon = 0.3;
    spec.grid = {1e-2, 1e-1};
    CHECK(run_experiment(spec, data).records == run_experiment(spec, data).records);

    spec.seed.reset();
    CHECK_THROWS_AS(run_experiment(spec, data), std::invalid_argument);
}

TEST_CASE("misclassified samples are skipped and start failures recorded") {
    auto data = plane_data();
    data.eval.labels[0] = 1;
    auto spec = plane_spec();
    auto out = run_experiment(spec, data);
    CHECK(out.sample_ids == std::vector<std::size_t>{1, 2, 3});

    // Targeted at a class no pool sample or random draw reaches.
    data = plane_data();
    data.model = Model({DenseLayer{2, 2, {0.0, 0.0, 0.0, 0.0}, {1.0, 0.0}}}, Activation::Identity);
    spec.criterion = CriterionMode::Targeted;
    spec.grid = {1e-2};
    std::ostringstream log;
    out = run_experiment(spec, data, &log);
    CHECK(out.aborted == 4);
    for (const auto& r : out.records) CHECK_FALSE(r.success);
    CHECK(median_perturbation(out.records) == kInf);
    CHECK(log.str().find("starting point") != std::string::npos);
}

TEST_CASE("missing model file is a load error") {
    ExperimentSpec s = plane_spec();
    s.model = "/nonexistent/model.json";
    s.data.kind = DataSource::Kind::Blobs;
    CHECK_THROWS(run_experiment(s));
}

TEST_CASE("svg output") {
    const auto svg = curves_svg({{"a", {{1, 1.0}, {10, 0.5}, {100, 0.2}}}, {"b", {{1, kInf}, {10, 0.7}}}},
                                "median L2");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(svg.find("median L2") != std::string::npos);
    CHECK(svg.find("inf") == std::string::npos);
}
