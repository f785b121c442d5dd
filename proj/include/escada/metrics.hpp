#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace escada {

/// One bandit round. Violation flags come from the noiseless response.
struct RoundRecord {
    std::string run_id;
    std::string scenario;
    std::string policy;
    std::uint64_t seed = 0;
    int patient = 0;
    int round = 0;  // 1-based within the run
    int context_id = 0;
    double cho = 0.0;
    double fasting_glucose = 0.0;
    double dose = 0.0;
    double y = 0.0;
    double f = 0.0;
    double regret = 0.0;  // |f - T|
    bool hypo = false;    // f < T_min
    bool hyper = false;   // f > T_max
    std::string branch;
    std::size_t candidates = 0;
    double safe_measure = -1.0;  // -1 for policies without a safe set
    double info_gain_increment = 0.0;
    double sqrt_beta = 0.0;
    int coverage = -1;  // 1 covered, 0 violated, -1 not audited
    double optimal_dose = 0.0;
};

/// Column order of records.csv.
const std::vector<std::string>& round_record_columns();
std::string round_record_csv_header();
std::string to_csv_row(const RoundRecord& r);
/// Parses one row written by to_csv_row.
RoundRecord round_record_from_csv(const std::string& line);

/// Shortest round-trip decimal form, used for every number written to disk.
std::string format_number(double value);

struct RunSummary {
    std::string run_id;
    std::string scenario;
    std::string policy;
    std::uint64_t seed = 0;
    int patient = 0;
    std::vector<int> contexts;
    int rounds = 0;
    std::vector<double> cumulative_regret;
    double final_regret = 0.0;
    double regret_per_context = 0.0;  // final regret / number of distinct contexts
    double mean_abs_deviation = 0.0;  // mean |f - T|
    double hypo_rate = 0.0;
    double hyper_rate = 0.0;
    double mean_y = 0.0;
    double mean_f = 0.0;
    double info_gain = 0.0;
    /// First round whose safe set holds the optimal dose; fixed-context runs
    /// of safe-set policies only.
    std::optional<int> rounds_to_safe_optimal;
    /// Coverage of the confidence intervals in every audited round (event E).
    std::optional<bool> coverage_held;
};

/// Prefix sums of the per-round regret. Records must be ordered by round.
std::vector<double> cumulative_regret(const std::vector<RoundRecord>& records);

struct ViolationRates {
    double hypo = 0.0;
    double hyper = 0.0;
};

ViolationRates violation_frequencies(const std::vector<RoundRecord>& records);

/// Fills every record-derived field of a summary.
RunSummary summarize(const std::vector<RoundRecord>& records);

/// Welford accumulator, the streaming side of the aggregation cross-check.
class RunningStats {
public:
    void push(double x);
    [[nodiscard]] std::size_t count() const { return n_; }
    [[nodiscard]] double mean() const { return mean_; }
    /// Sample (n - 1) standard deviation; NaN below two values.
    [[nodiscard]] double sd() const;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
};

/// Two-pass sample mean and (n - 1) standard deviation. Requires >= 2 values.
MeanSd mean_sd(const std::vector<double>& values);

struct RegretCurve {
    std::vector<double> mean;
    std::vector<double> sd;
    std::vector<double> lower;  // mean - 0.25 sd
    std::vector<double> upper;  // mean + 0.25 sd
};

struct AggregateRow {
    std::string scenario;
    std::string policy;
    std::size_t runs = 0;
    MeanSd final_regret;
    MeanSd regret_per_context;
    MeanSd mean_abs_deviation;
    MeanSd hypo_rate;
    MeanSd hyper_rate;
    MeanSd mean_y;
    MeanSd mean_f;
    MeanSd info_gain;
    MeanSd rounds_to_safe_optimal;  // over runs where it is defined and finite
    RegretCurve curve;
};

/// Mean and sample sd of each metric across summaries of one (scenario, policy)
/// group, plus the per-round cumulative regret curve with 0.25 sd bands.
/// Requires >= 2 summaries; trajectories are truncated to the shortest.
AggregateRow aggregate(const std::vector<RunSummary>& summaries);

/// Same as `aggregate` but tolerates a single summary (sd reported as NaN).
AggregateRow aggregate_lenient(const std::vector<RunSummary>& summaries);

std::string aggregate_csv_header();
std::string to_csv_row(const AggregateRow& row);

}  // namespace escada
