#pragma once

#include "boundwalk/attack.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace boundwalk {

enum class AttackKind { OursL0, OursL1, OursL2, OursLinf, Pgd, AdamPgd };

/// "ours-L0", "ours-L1", "ours-L2", "ours-Linf", "pgd", "adam-pgd".
std::string_view to_string(AttackKind kind);
AttackKind parse_attack_kind(std::string_view text);
/// Norm the attack's distances are measured in (L-infinity for PGD).
NormKind attack_norm(AttackKind kind);
bool is_ours(AttackKind kind);

/// Trust-radius grid for our attacks and stepsize grid for PGD variants.
std::vector<double> default_grid(AttackKind kind);

struct DataSource {
    enum class Kind { MnistIdx, Blobs };
    Kind kind = Kind::MnistIdx;
    // MnistIdx: evaluation split and (optional) starting-point pool.
    std::filesystem::path images;
    std::filesystem::path labels;
    std::filesystem::path pool_images;
    std::filesystem::path pool_labels;
    // Blobs: evaluation set from `seed`, pool from `seed + 1`.
    std::size_t per_class = 50;
    int classes = 3;
    std::size_t dim = 2;
    double spread = 0.1;
    std::uint64_t seed = 0;
};

enum class CriterionMode { Untargeted, Targeted };

struct ExperimentSpec {
    std::filesystem::path model;
    DataSource data;
    AttackKind attack = AttackKind::OursL2;
    /// Targeted runs aim at class (y + 1) mod K.
    CriterionMode criterion = CriterionMode::Untargeted;
    std::size_t samples = 10;
    int repetitions = 1;
    std::vector<double> grid;
    /// For success_rate_at_eps; also the PGD ball radius.
    double epsilon = 0.1;
    int max_steps = 1000;
    std::optional<std::uint64_t> seed;

    void validate() const;
};

/// Reads the JSON key-value spec file; missing keys keep their defaults.
ExperimentSpec load_spec(const std::filesystem::path& path);
ExperimentSpec spec_from_json(const std::string& text);
std::string spec_to_json(const ExperimentSpec& spec);

/// Outcome of one (sample, repetition, hyperparameter) run. The adversarial
/// input itself is not retained.
struct RunRecord {
    std::size_t sample_id = 0;
    int rep = 0;
    AttackKind attack = AttackKind::OursL2;
    NormKind norm = NormKind::L2;
    double hyperparameter = 0.0;
    bool success = false;
    double distance = 0.0;
    long queries = 0;
    long start_queries = 0;
    std::vector<TracePoint> trace;

    bool operator==(const RunRecord&) const = default;
};

RunRecord make_record(std::size_t sample_id, int rep, AttackKind attack, double hyperparameter,
                      const AttackResult& result);

/// Lower median over samples of the best distance per sample; failures
/// count as +inf.
double median_perturbation(const std::vector<RunRecord>& records);

/// Fraction of samples whose best distance exceeds epsilon (accuracy
/// under attack).
double success_rate_at_eps(const std::vector<RunRecord>& records, double epsilon);

struct CurvePoint {
    long budget = 0;
    double metric = 0.0;
};

/// Per budget, the best distance per sample within that many queries over
/// all runs, aggregated by median or, when `epsilon` is set, by accuracy.
std::vector<CurvePoint> query_distortion_curve(const std::vector<RunRecord>& records, const std::vector<long>& budgets,
                                               std::optional<double> epsilon = std::nullopt);

/// Budgets 1, 2, 5, 10, ... up to the largest query count in the records.
std::vector<long> default_budgets(const std::vector<RunRecord>& records);

struct InsufficientGridError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SensitivityRow {
    double hyperparameter = 0.0;
    double median = 0.0;
    double degradation = 0.0;
};

struct SensitivityReport {
    double best_median = 0.0;
    std::vector<SensitivityRow> rows;
    double single_rep_median = 0.0;
    double single_rep_degradation = 0.0;
};

/// Relative median-distance degradation of each single hyperparameter and of
/// repetition 0 alone against the best over everything. Needs at least three
/// grid values spanning two orders of magnitude.
SensitivityReport sensitivity_report(const std::vector<RunRecord>& records);

/// Relative increase of `value` over `best`; 0 when both are infinite.
double degradation(double value, double best);

struct ExperimentData {
    Model model;
    Dataset eval;
    Dataset pool;
};

ExperimentData load_experiment_data(const ExperimentSpec& spec);

struct ExperimentOutcome {
    std::vector<RunRecord> records;
    std::vector<std::size_t> sample_ids;
    /// Runs that aborted (start failure, gradient masking); recorded as failures.
    int aborted = 0;
};

/// Runs every (sample, rep, hyperparameter) combination on the first
/// `samples` correctly classified evaluation inputs.
ExperimentOutcome run_experiment(const ExperimentSpec& spec, const ExperimentData& data,
                                 std::ostream* log = nullptr);
ExperimentOutcome run_experiment(const ExperimentSpec& spec, std::ostream* log = nullptr);

void write_results_csv(const std::vector<RunRecord>& records, std::ostream& out);
std::string results_csv(const std::vector<RunRecord>& records);
void write_traces_json(const std::vector<RunRecord>& records, std::ostream& out);

/// Writes results.csv and traces.json into `dir`.
void save_results(const std::vector<RunRecord>& records, const std::filesystem::path& dir);
std::vector<RunRecord> load_results(const std::filesystem::path& dir);
std::vector<RunRecord> parse_results(const std::string& csv, const std::string& traces_json);

struct NamedCurve {
    std::string label;
    std::vector<CurvePoint> points;
};

/// Static SVG of the curves on a log-scaled budget axis.
std::string curves_svg(const std::vector<NamedCurve>& curves, const std::string& y_label);

}  // namespace boundwalk
