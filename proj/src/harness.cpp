#include "boundwalk/harness.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace boundwalk {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct KindName {
    AttackKind kind;
    std::string_view name;
};

constexpr KindName kKindNames[] = {{AttackKind::OursL0, "ours-L0"},     {AttackKind::OursL1, "ours-L1"},
                                   {AttackKind::OursL2, "ours-L2"},     {AttackKind::OursLinf, "ours-Linf"},
                                   {AttackKind::Pgd, "pgd"},            {AttackKind::AdamPgd, "adam-pgd"}};

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    // splitmix64 finaliser over a simple combination.
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double lower_median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of an empty record set");
    const auto mid = values.begin() + static_cast<long>((values.size() - 1) / 2);
    std::nth_element(values.begin(), mid, values.end());
    return *mid;
}

// Best distance per sample, failures as +inf.
std::map<std::size_t, double> best_per_sample(const std::vector<RunRecord>& records) {
    std::map<std::size_t, double> best;
    for (const auto& r : records) {
        auto [it, fresh] = best.try_emplace(r.sample_id, kInf);
        if (r.success) it->second = std::min(it->second, r.distance);
    }
    return best;
}

std::vector<double> values_of(const std::map<std::size_t, double>& m) {
    std::vector<double> out;
    out.reserve(m.size());
    for (const auto& [id, v] : m) out.push_back(v);
    return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("bad number '" + s + "'");
    return v;
}

}  // namespace

std::string_view to_string(AttackKind kind) {
    for (const auto& kn : kKindNames)
        if (kn.kind == kind) return kn.name;
    throw std::logic_error("unhandled attack kind");
}

AttackKind parse_attack_kind(std::string_view text) {
    const std::string t = lower(text);
    for (const auto& kn : kKindNames)
        if (lower(kn.name) == t) return kn.kind;
    throw std::invalid_argument("unknown attack '" + std::string(text) + "'");
}

NormKind attack_norm(AttackKind kind) {
    switch (kind) {
        case AttackKind::OursL0: return NormKind::L0;
        case AttackKind::OursL1: return NormKind::L1;
        case AttackKind::OursL2: return NormKind::L2;
        default: return NormKind::Linf;
    }
}

bool is_ours(AttackKind kind) { return kind != AttackKind::Pgd && kind != AttackKind::AdamPgd; }

std::vector<double> default_grid(AttackKind kind) {
    if (is_ours(kind)) return {3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1};
    return {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 2.0};
}

void ExperimentSpec::validate() const {
    if (samples < 1) throw std::invalid_argument("sample count must be at least 1");
    if (repetitions < 1) throw std::invalid_argument("repetitions must be at least 1");
    if (grid.empty()) throw std::invalid_argument("hyperparameter grid is empty");
    for (double h : grid)
        if (!(h > 0.0) && !(h == 0.0 && !is_ours(attack)))
            throw std::invalid_argument("hyperparameter values must be positive");
    if (max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
    if (!is_ours(attack) && !(epsilon > 0.0)) throw std::invalid_argument("PGD needs epsilon > 0");
}

ExperimentSpec spec_from_json(const std::string& text) {
    const json j = json::parse(text);
    ExperimentSpec s;
    if (j.contains("attack")) s.attack = parse_attack_kind(j.at("attack").get<std::string>());
    s.grid = default_grid(s.attack);
    if (j.contains("model")) s.model = j.at("model").get<std::string>();
    if (j.contains("criterion")) {
        const auto c = lower(j.at("criterion").get<std::string>());
        if (c == "untargeted") s.criterion = CriterionMode::Untargeted;
        else if (c == "targeted") s.criterion = CriterionMode::Targeted;
        else throw std::invalid_argument("criterion must be 'untargeted' or 'targeted'");
    }
    if (j.contains("samples")) s.samples = j.at("samples").get<std::size_t>();
    if (j.contains("repetitions")) s.repetitions = j.at("repetitions").get<int>();
    if (j.contains("grid")) s.grid = j.at("grid").get<std::vector<double>>();
    if (j.contains("epsilon")) s.epsilon = j.at("epsilon").get<double>();
    if (j.contains("max_steps")) s.max_steps = j.at("max_steps").get<int>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("data")) {
        const json& d = j.at("data");
        const auto kind = lower(d.value("kind", std::string("mnist-idx")));
        if (kind == "mnist-idx") s.data.kind = DataSource::Kind::MnistIdx;
        else if (kind == "blobs") s.data.kind = DataSource::Kind::Blobs;
        else throw std::invalid_argument("data.kind must be 'mnist-idx' or 'blobs'");
        s.data.images = d.value("images", std::string());
        s.data.labels = d.value("labels", std::string());
        s.data.pool_images = d.value("pool_images", std::string());
        s.data.pool_labels = d.value("pool_labels", std::string());
        s.data.per_class = d.value("per_class", s.data.per_class);
        s.data.classes = d.value("classes", s.data.classes);
        s.data.dim = d.value("dim", s.data.dim);
        s.data.spread = d.value("spread", s.data.spread);
        s.data.seed = d.value("seed", s.data.seed);
    }
    return s;
}

std::string spec_to_json(const ExperimentSpec& s) {
    json d;
    d["kind"] = s.data.kind == DataSource::Kind::MnistIdx ? "mnist-idx" : "blobs";
    if (s.data.kind == DataSource::Kind::MnistIdx) {
        d["images"] = s.data.images.string();
        d["labels"] = s.data.labels.string();
        d["pool_images"] = s.data.pool_images.string();
        d["pool_labels"] = s.data.pool_labels.string();
    } else {
        d["per_class"] = s.data.per_class;
        d["classes"] = s.data.classes;
        d["dim"] = s.data.dim;
        d["spread"] = s.data.spread;
        d["seed"] = s.data.seed;
    }
    json j;
    j["model"] = s.model.string();
    j["data"] = d;
    j["attack"] = std::string(to_string(s.attack));
    j["criterion"] = s.criterion == CriterionMode::Untargeted ? "untargeted" : "targeted";
    j["samples"] = s.samples;
    j["repetitions"] = s.repetitions;
    j["grid"] = s.grid;
    j["epsilon"] = s.epsilon;
    j["max_steps"] = s.max_steps;
    if (s.seed) j["seed"] = *s.seed;
    return j.dump(2);
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
    ExperimentSpec s;
    try {
        s = spec_from_json(read_file(path));
    } catch (const json::exception& e) {
        throw std::invalid_argument("spec " + path.string() + ": " + e.what());
    }
    // Relative paths are taken relative to the spec file.
    const auto base = path.parent_path();
    for (auto* p : {&s.model, &s.data.images, &s.data.labels, &s.data.pool_images, &s.data.pool_labels})
        if (!p->empty() && p->is_relative()) *p = base / *p;
    return s;
}

RunRecord make_record(std::size_t sample_id, int rep, AttackKind attack, double hyperparameter,
                      const AttackResult& result) {
    RunRecord r;
    r.sample_id = sample_id;
    r.rep = rep;
    r.attack = attack;
    r.norm = attack_norm(attack);
    r.hyperparameter = hyperparameter;
    r.success = result.success;
    r.distance = result.success ? result.distance : kInf;
    r.queries = result.queries_used;
    r.start_queries = result.start_queries;
    r.trace = result.trace;
    return r;
}

double median_perturbation(const std::vector<RunRecord>& records) {
    return lower_median(values_of(best_per_sample(records)));
}

double success_rate_at_eps(const std::vector<RunRecord>& records, double epsilon) {
    if (records.empty()) throw std::invalid_argument("success rate of an empty record set");
    const auto best = best_per_sample(records);
    std::size_t survived = 0;
    for (const auto& [id, d] : best) survived += d > epsilon;
    return static_cast<double>(survived) / static_cast<double>(best.size());
}

std::vector<CurvePoint> query_distortion_curve(const std::vector<RunRecord>& records, const std::vector<long>& budgets,
                                               std::optional<double> epsilon) {
    std::vector<CurvePoint> out;
    if (records.empty()) return out;
    std::vector<long> sorted = budgets;
    std::sort(sorted.begin(), sorted.end());
    std::map<std::size_t, double> best;
    for (const auto& r : records) best.try_emplace(r.sample_id, kInf);
    for (long budget : sorted) {
        for (const auto& r : records) {
            double& b = best[r.sample_id];
            for (const auto& tp : r.trace)
                if (tp.queries <= budget) b = std::min(b, tp.distance);
        }
        CurvePoint cp{budget, 0.0};
        const auto values = values_of(best);
        if (epsilon) {
            std::size_t survived = 0;
            for (double v : values) survived += v > *epsilon;
            cp.metric = static_cast<double>(survived) / static_cast<double>(values.size());
        } else {
            cp.metric = lower_median(values);
        }
        out.push_back(cp);
    }
    return out;
}

std::vector<long> default_budgets(const std::vector<RunRecord>& records) {
    long top = 1;
    for (const auto& r : records) top = std::max(top, r.queries);
    std::vector<long> out;
    for (long decade = 1; decade <= top; decade *= 10)
        for (long m : {1L, 2L, 5L})
            if (m * decade <= top) out.push_back(m * decade);
    if (out.back() != top) out.push_back(top);
    return out;
}

double degradation(double value, double best) {
    if (std::isinf(best)) return 0.0;
    if (best == 0.0) return value == 0.0 ? 0.0 : kInf;
    return (value - best) / best;
}

SensitivityReport sensitivity_report(const std::vector<RunRecord>& records) {
    std::vector<double> values;
    for (const auto& r : records) values.push_back(r.hyperparameter);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    if (values.size() < 3) throw InsufficientGridError("sensitivity needs at least three hyperparameter values");
    if (!(values.front() > 0.0) || values.back() / values.front() < 100.0 * (1.0 - 1e-12))
        throw InsufficientGridError("sensitivity grid must span at least two orders of magnitude");

    SensitivityReport rep;
    rep.best_median = median_perturbation(records);
    for (double h : values) {
        std::vector<RunRecord> column;
        for (const auto& r : records)
            if (r.hyperparameter == h) column.push_back(r);
        const double m = median_perturbation(column);
        rep.rows.push_back({h, m, degradation(m, rep.best_median)});
    }
    std::vector<RunRecord> first;
    for (const auto& r : records)
        if (r.rep == 0) first.push_back(r);
    rep.single_rep_median = first.empty() ? kInf : median_perturbation(first);
    rep.single_rep_degradation = degradation(rep.single_rep_median, rep.best_median);
    return rep;
}

ExperimentData load_experiment_data(const ExperimentSpec& spec) {
    if (spec.model.empty()) throw std::invalid_argument("experiment spec has no model path");
    ExperimentData data{load_model(spec.model), {}, {}};
    const auto& src = spec.data;
    if (src.kind == DataSource::Kind::MnistIdx) {
        if (src.images.empty() || src.labels.empty())
            throw std::invalid_argument("mnist-idx data source needs images and labels");
        data.eval = load_mnist_idx(src.images, src.labels);
        if (!src.pool_images.empty()) data.pool = load_mnist_idx(src.pool_images, src.pool_labels);
        else data.pool = data.eval;
    } else {
        data.eval = make_blobs(src.per_class, src.classes, src.dim, src.spread, src.seed);
        data.pool = make_blobs(src.per_class, src.classes, src.dim, src.spread, src.seed + 1);
    }
    if (!data.eval.empty() && data.eval.samples.front().size() != data.model.input_dim())
        throw DimensionError("model expects " + std::to_string(data.model.input_dim()) + " inputs, data has " +
                             std::to_string(data.eval.samples.front().size()));
    return data;
}

ExperimentOutcome run_experiment(const ExperimentSpec& spec, const ExperimentData& data, std::ostream* log) {
    spec.validate();
    if (!spec.seed) throw std::invalid_argument("experiment spec needs a seed");
    const std::uint64_t seed = *spec.seed;

    ExperimentOutcome out;
    for (std::size_t i = 0; i < data.eval.size() && out.sample_ids.size() < spec.samples; ++i)
        if (predict(data.model, data.eval.samples[i]) == data.eval.labels[i]) out.sample_ids.push_back(i);
    if (out.sample_ids.empty()) throw std::runtime_error("no correctly classified evaluation sample");
    if (log && out.sample_ids.size() < spec.samples)
        *log << "only " << out.sample_ids.size() << " correctly classified samples available\n";

    const int classes = static_cast<int>(data.model.num_classes());
    for (std::size_t id : out.sample_ids) {
        const Vector& x = data.eval.samples[id];
        const int y = data.eval.labels[id];
        const Criterion crit = spec.criterion == CriterionMode::Untargeted ? Criterion::untargeted(y)
                                                                           : Criterion::targeted(y, (y + 1) % classes);
        for (int rep = 0; rep < spec.repetitions; ++rep) {
            const std::uint64_t run_seed = mix_seed(seed, id, static_cast<std::uint64_t>(rep));
            for (double h : spec.grid) {
                AttackResult res;
                try {
                    if (is_ours(spec.attack)) {
                        AttackConfig cfg;
                        cfg.norm = attack_norm(spec.attack);
                        cfg.trust_radius = h;
                        cfg.max_steps = spec.max_steps;
                        cfg.start_rank = rep;
                        cfg.seed = run_seed;
                        res = run_attack(data.model, x, crit, cfg, data.pool);
                    } else {
                        PgdConfig cfg;
                        cfg.epsilon = spec.epsilon;
                        cfg.stepsize = h;
                        cfg.iterations = spec.max_steps;
                        cfg.seed = run_seed;
                        res = spec.attack == AttackKind::Pgd ? run_pgd(data.model, x, crit, cfg)
                                                             : run_adam_pgd(data.model, x, crit, cfg);
                    }
                } catch (const StartFailure& e) {
                    ++out.aborted;
                    if (log) *log << "sample " << id << " rep " << rep << ": " << e.what() << "\n";
                } catch (const GradientMaskingError& e) {
                    ++out.aborted;
                    if (log) *log << "sample " << id << " rep " << rep << " h=" << h << ": " << e.what() << "\n";
                }
                out.records.push_back(make_record(id, rep, spec.attack, h, res));
            }
        }
    }
    return out;
}

ExperimentOutcome run_experiment(const ExperimentSpec& spec, std::ostream* log) {
    return run_experiment(spec, load_experiment_data(spec), log);
}

void write_results_csv(const std::vector<RunRecord>& records, std::ostream& out) {
    out << "sample_id,rep,attack,norm,hyperparameter,success,distance,queries\n";
    for (const auto& r : records) {
        out << r.sample_id << ',' << r.rep << ',' << to_string(r.attack) << ',' << to_string(r.norm) << ','
            << format_double(r.hyperparameter) << ',' << (r.success ? 1 : 0) << ',' << format_double(r.distance)
            << ',' << r.queries << '\n';
    }
}

std::string results_csv(const std::vector<RunRecord>& records) {
    std::ostringstream ss;
    write_results_csv(records, ss);
    return ss.str();
}

void write_traces_json(const std::vector<RunRecord>& records, std::ostream& out) {
    json runs = json::array();
    for (const auto& r : records) {
        json trace = json::array();
        for (const auto& tp : r.trace) trace.push_back({tp.queries, tp.distance});
        runs.push_back({{"sample_id", r.sample_id},
                        {"rep", r.rep},
                        {"hyperparameter", r.hyperparameter},
                        {"start_queries", r.start_queries},
                        {"trace", trace}});
    }
    out << json{{"version", 1}, {"runs", runs}}.dump() << '\n';
}

void save_results(const std::vector<RunRecord>& records, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir / "results.csv", std::ios::binary);
    std::ofstream traces(dir / "traces.json", std::ios::binary);
    if (!csv || !traces) throw std::runtime_error("cannot write results into " + dir.string());
    write_results_csv(records, csv);
    write_traces_json(records, traces);
    if (!csv || !traces) throw std::runtime_error("write failed in " + dir.string());
}

std::vector<RunRecord> parse_results(const std::string& csv, const std::string& traces_json) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != "sample_id,rep,attack,norm,hyperparameter,success,distance,queries")
        throw std::invalid_argument("results CSV has an unexpected header");
    std::vector<RunRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 8) throw std::invalid_argument("results CSV row has " + std::to_string(f.size()) + " fields");
        RunRecord r;
        r.sample_id = std::stoull(f[0]);
        r.rep = std::stoi(f[1]);
        r.attack = parse_attack_kind(f[2]);
        r.norm = parse_norm(f[3]);
        r.hyperparameter = parse_double(f[4]);
        r.success = f[5] == "1";
        r.distance = parse_double(f[6]);
        r.queries = std::stol(f[7]);
        records.push_back(std::move(r));
    }

    const json j = json::parse(traces_json);
    const json& runs = j.at("runs");
    if (runs.size() != records.size()) throw std::invalid_argument("traces and results disagree on the run count");
    for (std::size_t i = 0; i < records.size(); ++i) {
        const json& run = runs[i];
        auto& r = records[i];
        if (run.at("sample_id").get<std::size_t>() != r.sample_id || run.at("rep").get<int>() != r.rep ||
            run.at("hyperparameter").get<double>() != r.hyperparameter)
            throw std::invalid_argument("traces entry " + std::to_string(i) + " does not match results row");
        r.start_queries = run.at("start_queries").get<long>();
        for (const auto& tp : run.at("trace")) r.trace.push_back({tp.at(0).get<long>(), tp.at(1).get<double>()});
    }
    return records;
}

std::vector<RunRecord> load_results(const std::filesystem::path& dir) {
    return parse_results(read_file(dir / "results.csv"), read_file(dir / "traces.json"));
}

std::string curves_svg(const std::vector<NamedCurve>& curves, const std::string& y_label) {
    constexpr double W = 640, H = 420, left = 70, right = 160, top = 20, bottom = 50;
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    double bmin = kInf, bmax = 0, ymin = kInf, ymax = -kInf;
    for (const auto& c : curves)
        for (const auto& p : c.points) {
            if (p.budget < 1 || !std::isfinite(p.metric)) continue;
            bmin = std::min(bmin, static_cast<double>(p.budget));
            bmax = std::max(bmax, static_cast<double>(p.budget));
            ymin = std::min(ymin, p.metric);
            ymax = std::max(ymax, p.metric);
        }
    if (!std::isfinite(ymin)) bmin = bmax = 1, ymin = 0, ymax = 1;
    if (bmax <= bmin) bmax = bmin * 10;
    if (ymax <= ymin) ymax = ymin + 1;
    ymin = std::min(ymin, 0.0);
    const auto px = [&](double b) { return left + (std::log10(b) - std::log10(bmin)) / (std::log10(bmax) - std::log10(bmin)) * (W - left - right); };
    const auto py = [&](double y) { return H - bottom - (y - ymin) / (ymax - ymin) * (H - top - bottom); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
      << "\" stroke=\"black\"/>\n";
    for (double b = std::pow(10.0, std::floor(std::log10(bmin))); b <= bmax * 1.0001; b *= 10) {
        if (b < bmin * 0.9999) continue;
        s << "<text x=\"" << px(b) << "\" y=\"" << H - bottom + 18 << "\" text-anchor=\"middle\">" << b << "</text>\n";
    }
    for (int k = 0; k <= 4; ++k) {
        const double y = ymin + (ymax - ymin) * k / 4.0;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", y);
        s << "<text x=\"" << left - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << buf << "</text>\n";
    }
    s << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">queries</text>\n";
    s << "<text transform=\"translate(16," << (top + H - bottom) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << y_label << "</text>\n";
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const char* color = colors[i % std::size(colors)];
        s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& p : curves[i].points)
            if (p.budget >= 1 && std::isfinite(p.metric)) s << px(static_cast<double>(p.budget)) << ',' << py(p.metric) << ' ';
        s << "\"/>\n";
        const double ly = top + 16.0 * static_cast<double>(i + 1);
        s << "<line x1=\"" << W - right + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - right + 30 << "\" y2=\"" << ly
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        s << "<text x=\"" << W - right + 35 << "\" y=\"" << ly + 4 << "\">" << curves[i].label << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace boundwalk
