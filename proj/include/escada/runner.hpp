#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "escada/bounds.hpp"
#include "escada/config.hpp"
#include "escada/environment.hpp"
#include "escada/metrics.hpp"
#include "escada/safe_set.hpp"

namespace escada {

/// Everything that is fixed per (replicate seed, patient): the truth, the
/// meal events it will see, and the grids derived from its certified L.
struct PatientSetup {
    int index = 0;
    std::uint64_t seed = 0;
    ResponseModel model;
    std::vector<MealEvent> events;
    DoseGrid grid;
    EvalGrid eval;
    SafetyParams safety;
    BetaSchedule beta;
};

PatientSetup build_patient(const ExperimentConfig& config, std::uint64_t seed, int patient);

struct SafeSetSnapshot {
    int round = 0;  // 0 holds the initial set
    int context_id = 0;
    SafeSet set;
};

struct RunResult {
    RunSummary summary;
    std::vector<RoundRecord> records;
    std::vector<SafeSetSnapshot> safe_sets;  // safe-set policies only
};

/// One sequential bandit trajectory for one policy. `contexts` lists event
/// indices visited once per cycle, in order; a single entry is a fixed-context
/// run. Throws ErrorKind::DegenerateSet if an initial safe set cannot be built.
RunResult run_bandit(const ExperimentConfig& config, const PatientSetup& patient, PolicyKind policy,
                     std::uint64_t seed, const std::vector<int>& contexts, int cycles);

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<RunResult> runs;
    std::vector<AggregateRow> aggregate;
    std::vector<std::string> warnings;
    std::vector<std::string> skipped;
};

/// SME: fresh GP per (patient, event, policy), `recommendations` rounds each.
ExperimentResult run_sme(const ExperimentConfig& config);
/// MME: one GP per (patient, policy); events visited round-robin for
/// `recommendations` cycles, with independent per-event safe sets.
ExperimentResult run_mme(const ExperimentConfig& config);
/// A single context per patient (config.fixed_context, else the first sampled
/// event) for `recommendations` rounds.
ExperimentResult run_fixed_context(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config);

std::string records_csv(const ExperimentResult& result);
nlohmann::json summary_json(const ExperimentResult& result);
std::string aggregate_csv(const ExperimentResult& result);
nlohmann::json safe_sets_json(const ExperimentResult& result);

/// Writes records.csv, summary.json, aggregate.csv and safesets.json.
void write_outputs(const ExperimentResult& result, const std::string& dir);

/// Cartesian sweep: `grid` maps dotted config paths to arrays of values.
/// Each combination runs into `<output_dir>/sweep-NNN`; an index is written
/// to `<output_dir>/sweep.csv`. Returns the number of combinations.
int run_sweep(const nlohmann::json& base, const nlohmann::json& grid);

/// Plot-ready series from a finished run directory: regret_curves.csv,
/// boxplot_quantiles.csv and safeset_trajectories.csv.
void export_plots(const std::string& run_dir, const std::string& out_dir);

/// Type-7 (linear interpolation) sample quantile.
double quantile(std::vector<double> values, double q);

}  // namespace escada
