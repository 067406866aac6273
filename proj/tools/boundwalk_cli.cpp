// boundwalk: train test models, run single attacks and sweeps, and turn
// sweep results into query-distortion curves and sensitivity tables.

#include "boundwalk/harness.hpp"
#include "boundwalk/verify.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace boundwalk;

namespace {

struct DataFlags {
    std::string images, labels, pool_images, pool_labels;
    bool blobs = false;
    std::size_t per_class = 50;
    int classes = 3;
    std::size_t dim = 2;
    double spread = 0.1;
    std::uint64_t data_seed = 0;

    void attach(CLI::App* app) {
        app->add_option("--images", images, "IDX image file");
        app->add_option("--labels", labels, "IDX label file");
        app->add_option("--pool-images", pool_images, "IDX images for starting points");
        app->add_option("--pool-labels", pool_labels, "IDX labels for starting points");
        app->add_flag("--blobs", blobs, "Use synthetic Gaussian blobs instead of IDX files");
        app->add_option("--per-class", per_class, "Blob samples per class");
        app->add_option("--classes", classes, "Blob classes");
        app->add_option("--dim", dim, "Blob dimension");
        app->add_option("--spread", spread, "Blob standard deviation");
        app->add_option("--data-seed", data_seed, "Blob seed");
    }

    DataSource source() const {
        DataSource s;
        s.kind = blobs ? DataSource::Kind::Blobs : DataSource::Kind::MnistIdx;
        s.images = images;
        s.labels = labels;
        s.pool_images = pool_images;
        s.pool_labels = pool_labels;
        s.per_class = per_class;
        s.classes = classes;
        s.dim = dim;
        s.spread = spread;
        s.seed = data_seed;
        return s;
    }
};

Dataset load_training_set(const DataFlags& f) {
    if (f.blobs) return make_blobs(f.per_class, f.classes, f.dim, f.spread, f.data_seed);
    if (f.images.empty() || f.labels.empty()) throw CLI::ValidationError("train", "--images and --labels (or --blobs) are required");
    return load_mnist_idx(f.images, f.labels);
}

void print_summary(const ExperimentSpec& spec, const ExperimentOutcome& out) {
    std::printf("attack      %s\n", std::string(to_string(spec.attack)).c_str());
    std::printf("samples     %zu\n", out.sample_ids.size());
    std::printf("runs        %zu (aborted %d)\n", out.records.size(), out.aborted);
    std::printf("median %-4s %.6g\n", std::string(to_string(attack_norm(spec.attack))).c_str(),
                median_perturbation(out.records));
    if (attack_norm(spec.attack) == NormKind::Linf)
        std::printf("accuracy at eps=%g: %.4f\n", spec.epsilon, success_rate_at_eps(out.records, spec.epsilon));
}

int run(int argc, char** argv) {
    CLI::App app{"Boundary-walking minimal adversarial attacks and their evaluation harness"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "Train a small MLP and save it as JSON");
    DataFlags train_data;
    train_data.attach(train);
    TrainOptions topt;
    topt.hidden = {100};
    std::string activation = "relu", model_out;
    std::size_t limit = 0;
    train->add_option("--hidden", topt.hidden, "Hidden layer widths")->expected(0, -1);
    train->add_option("--activation", activation, "relu, tanh or identity");
    train->add_option("--epochs", topt.epochs);
    train->add_option("--lr", topt.learning_rate);
    train->add_option("--batch", topt.batch_size);
    train->add_option("--seed", topt.seed);
    train->add_option("--limit", limit, "Use only the first N samples");
    train->add_option("-o,--out", model_out, "Model file")->required();

    // attack
    auto* attack = app.add_subcommand("attack", "Attack one sample and print the result");
    DataFlags attack_data;
    attack_data.attach(attack);
    std::string model_path, attack_name = "ours-L2", adv_out;
    std::size_t index = 0;
    double hp = 1e-2, epsilon = 0.1;
    int max_steps = 1000, rep = 0;
    bool targeted = false;
    std::uint64_t seed = 0;
    attack->add_option("--model", model_path)->required();
    attack->add_option("--index", index, "Sample index in the evaluation set");
    attack->add_option("--attack", attack_name, "ours-L0|ours-L1|ours-L2|ours-Linf|pgd|adam-pgd");
    attack->add_option("--hp", hp, "Trust radius (ours) or stepsize (PGD)");
    attack->add_option("--epsilon", epsilon, "PGD ball radius");
    attack->add_option("--max-steps", max_steps);
    attack->add_option("--rep", rep, "Repetition: start from the (rep+1)-th closest adversarial");
    attack->add_flag("--targeted", targeted, "Target class (y + 1) mod K");
    attack->add_option("--seed", seed);
    attack->add_option("--adversarial-out", adv_out, "Write the adversarial input as JSON");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Run a full experiment spec");
    std::string spec_path, out_dir = "results", sweep_model, sweep_attack, criterion;
    DataFlags sweep_data;
    sweep_data.attach(sweep);
    std::optional<std::size_t> samples;
    std::optional<int> reps, sweep_steps;
    std::optional<double> sweep_eps;
    std::optional<std::uint64_t> sweep_seed;
    std::vector<double> grid;
    sweep->add_option("--spec", spec_path, "JSON spec file");
    sweep->add_option("--model", sweep_model);
    sweep->add_option("--attack", sweep_attack);
    sweep->add_option("--criterion", criterion, "untargeted or targeted");
    sweep->add_option("--samples", samples);
    sweep->add_option("--repetitions", reps);
    sweep->add_option("--grid", grid, "Hyperparameter values");
    sweep->add_option("--epsilon", sweep_eps);
    sweep->add_option("--max-steps", sweep_steps);
    sweep->add_option("--seed", sweep_seed, "Required here or in the spec");
    sweep->add_option("-o,--out", out_dir, "Directory for results.csv and traces.json");

    // curve
    auto* curve = app.add_subcommand("curve", "Query-distortion curves from sweep results");
    std::vector<std::string> result_dirs;
    std::vector<long> budgets;
    std::optional<double> curve_eps;
    std::string svg_out;
    curve->add_option("results", result_dirs, "Result directories")->required();
    curve->add_option("--budgets", budgets, "Query budgets (default 1, 2, 5, 10, ...)");
    curve->add_option("--epsilon", curve_eps, "Report accuracy at epsilon instead of the median");
    curve->add_option("--svg", svg_out, "Write an SVG plot");

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "Run the oracle self-checks");
    std::uint64_t verify_seed = 1;
    verify_cmd->add_option("--seed", verify_seed);

    // sensitivity
    auto* sens = app.add_subcommand("sensitivity", "Degradation of single hyperparameters and single repetitions");
    std::string sens_dir;
    sens->add_option("results", sens_dir, "Result directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (*train) {
        Dataset data = load_training_set(train_data);
        if (limit > 0) data = data.head(limit);
        topt.activation = parse_activation(activation);
        const auto res = train_mlp(data, topt);
        save_model(res.model, model_out);
        std::printf("trained on %zu samples, training accuracy %.4f\n", data.size(), res.train_accuracy);
        return 0;
    }

    if (*attack) {
        ExperimentSpec spec;
        spec.model = model_path;
        spec.data = attack_data.source();
        const auto data = load_experiment_data(spec);
        if (index >= data.eval.size()) throw std::out_of_range("--index beyond the evaluation set");
        const Vector& x = data.eval.samples[index];
        const int y = data.eval.labels[index];
        const int classes = static_cast<int>(data.model.num_classes());
        const Criterion crit = targeted ? Criterion::targeted(y, (y + 1) % classes) : Criterion::untargeted(y);
        const AttackKind kind = parse_attack_kind(attack_name);
        AttackResult res;
        if (is_ours(kind)) {
            AttackConfig cfg;
            cfg.norm = attack_norm(kind);
            cfg.trust_radius = hp;
            cfg.max_steps = max_steps;
            cfg.start_rank = rep;
            cfg.seed = seed;
            res = run_attack(data.model, x, crit, cfg, data.pool);
        } else {
            PgdConfig cfg;
            cfg.epsilon = epsilon;
            cfg.stepsize = hp;
            cfg.iterations = max_steps;
            cfg.seed = seed;
            res = kind == AttackKind::Pgd ? run_pgd(data.model, x, crit, cfg) : run_adam_pgd(data.model, x, crit, cfg);
        }
        nlohmann::json j{{"sample", index},
                         {"label", y},
                         {"attack", std::string(to_string(kind))},
                         {"success", res.success},
                         {"distance", res.success ? res.distance : -1.0},
                         {"queries", res.queries_used},
                         {"start_queries", res.start_queries},
                         {"trace_points", res.trace.size()}};
        std::cout << j.dump(2) << '\n';
        if (!adv_out.empty() && res.adversarial) {
            std::ofstream f(adv_out);
            f << nlohmann::json(*res.adversarial).dump() << '\n';
        }
        return res.success ? 0 : 2;
    }

    if (*sweep) {
        ExperimentSpec spec = spec_path.empty() ? spec_from_json("{}") : load_spec(spec_path);
        if (!sweep_attack.empty()) {
            const AttackKind kind = parse_attack_kind(sweep_attack);
            // A different attack family needs its own grid unless one is given.
            if (kind != spec.attack && is_ours(kind) != is_ours(spec.attack)) spec.grid = default_grid(kind);
            spec.attack = kind;
        }
        if (!sweep_model.empty()) spec.model = sweep_model;
        if (!sweep_data.images.empty() || sweep_data.blobs) spec.data = sweep_data.source();
        if (criterion == "targeted") spec.criterion = CriterionMode::Targeted;
        else if (criterion == "untargeted") spec.criterion = CriterionMode::Untargeted;
        else if (!criterion.empty()) throw CLI::ValidationError("--criterion", "must be untargeted or targeted");
        if (samples) spec.samples = *samples;
        if (reps) spec.repetitions = *reps;
        if (!grid.empty()) spec.grid = grid;
        if (sweep_eps) spec.epsilon = *sweep_eps;
        if (sweep_steps) spec.max_steps = *sweep_steps;
        if (sweep_seed) spec.seed = *sweep_seed;
        if (!spec.seed) throw CLI::ValidationError("sweep", "a seed is required (--seed or \"seed\" in the spec)");

        const auto out = run_experiment(spec, &std::cerr);
        save_results(out.records, out_dir);
        std::ofstream(std::filesystem::path(out_dir) / "spec.json") << spec_to_json(spec) << '\n';
        print_summary(spec, out);
        return 0;
    }

    if (*curve) {
        std::vector<NamedCurve> curves;
        std::printf("label,budget,%s\n", curve_eps ? "accuracy" : "median");
        for (const auto& dir : result_dirs) {
            const auto records = load_results(dir);
            const auto b = budgets.empty() ? default_budgets(records) : budgets;
            NamedCurve c{std::filesystem::path(dir).filename().string(), query_distortion_curve(records, b, curve_eps)};
            for (const auto& p : c.points) std::printf("%s,%ld,%.17g\n", c.label.c_str(), p.budget, p.metric);
            curves.push_back(std::move(c));
        }
        if (!svg_out.empty()) {
            std::ofstream f(svg_out);
            f << curves_svg(curves, curve_eps ? "accuracy" : "median distance");
            if (!f) throw std::runtime_error("cannot write " + svg_out);
        }
        return 0;
    }

    if (*verify_cmd) {
        bool all = true;
        for (const auto& r : verify::run_all(verify_seed)) {
            std::printf("%s  %-36s %6.2fs  %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds,
                        r.detail.c_str());
            all = all && r.passed;
        }
        return all ? 0 : 1;
    }

    if (*sens) {
        const auto rep_out = sensitivity_report(load_results(sens_dir));
        std::printf("best median %.6g\n", rep_out.best_median);
        std::printf("hyperparameter,median,degradation\n");
        for (const auto& row : rep_out.rows)
            std::printf("%.6g,%.6g,%.4f\n", row.hyperparameter, row.median, row.degradation);
        std::printf("single repetition: median %.6g, degradation %.4f\n", rep_out.single_rep_median,
                    rep_out.single_rep_degradation);
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "boundwalk: %s\n", e.what());
        return 1;
    }
}
