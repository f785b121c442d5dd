#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "escada/bounds.hpp"
#include "escada/environment.hpp"
#include "escada/kernel.hpp"

namespace escada {

enum class Scenario { SME, MME, FixedContext };
Scenario scenario_from_string(const std::string& name);
std::string to_string(Scenario scenario);

enum class PolicyKind { Escada, Taco, Ts, Sts, GpUcbR1, GpUcbR2, GpUcbR3, Calculator, RandomSafe };
PolicyKind policy_from_string(const std::string& name);
std::string to_string(PolicyKind policy);
/// Policies that keep per-context safe sets.
bool uses_safe_set(PolicyKind policy);
bool uses_gp(PolicyKind policy);

struct EnvironmentConfig {
    ResponseFamily family = ResponseFamily::LinearCF;
    int patients = 1;
    PatientRanges patient_ranges;
    MealEventRanges meal_ranges;
    SaturationShape saturation;
    double noise_variance = 25.0;
    std::optional<double> lipschitz;  // certified from the truth when absent
    double lipschitz_margin = 1.25;
    int gp_features = 1000;
    std::string truth_cache;  // directory for gp-sampled truths; empty disables caching
};

struct ExperimentConfig {
    std::string name = "experiment";
    ProblemSpec problem;
    EnvironmentConfig environment;
    KernelSpec kernel;
    double prior_mean = 0.0;  // constant GP prior mean for the response (not for pseudo-rewards)
    std::string metric = "absolute";  // "absolute" or "kernel"
    BetaSchedule beta;
    double lambda = 15.0;
    int eval_resolution = 4;
    bool allow_coarse_grid = false;  // accept lambda >= epsilon with a warning
    Scenario scenario = Scenario::SME;
    std::vector<PolicyKind> policies{PolicyKind::Escada};
    int meal_events = 30;
    int recommendations = 15;
    std::optional<MealEvent> fixed_context;
    InitMode init = InitMode::Calculator;
    double fixed_dose = 0.0;
    std::uint64_t seed = 1;
    int seed_count = 1;
    int threads = 1;
    bool coverage_audit = true;
    std::string output_dir = "out";

    std::vector<std::string> warnings;  // filled by validation

    /// Throws ErrorKind::Config listing every problem found.
    void validate();
    [[nodiscard]] DoseMetric dose_metric() const;
};

ExperimentConfig default_config();
/// Strict parse: unknown keys and wrong types are errors, all reported at once.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& config);

/// Applies `value` at a dotted key path ("beta.sqrt_beta") of a config document.
void set_config_path(nlohmann::json& doc, const std::string& path, const nlohmann::json& value);

}  // namespace escada
