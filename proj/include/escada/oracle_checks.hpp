#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "escada/config.hpp"
#include "escada/gp.hpp"

namespace escada {

struct OracleResult {
    std::string name;
    bool pass = false;
    double worst = 0.0;      // worst discrepancy observed
    double tolerance = 0.0;  // pass threshold for `worst`
    std::string detail;
};

struct OracleReport {
    std::vector<OracleResult> results;
    double worst_factor_drift = 0.0;

    [[nodiscard]] bool all_pass() const;
    [[nodiscard]] std::string to_text() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Prediction under test; the default forwards to GPState::predict. The
/// oracle compares it with an explicit inverse of K + sigma^2 I.
using Predictor = std::function<Prediction(const GPState&, const Eigen::VectorXd&)>;

/// Relative error of incremental predictions against dense inversion, after
/// every update of `trajectories` random trajectories of length `length`.
OracleResult check_dense_inversion(int trajectories, int length, std::uint64_t seed,
                                   const Predictor& predictor = {});
/// Worst relative Frobenius drift of the incremental factor, including one
/// trajectory long enough to cross a scheduled refactorization.
OracleResult check_factor_drift(int trajectories, int length, std::uint64_t seed);
/// Running information-gain sum against 1/2 log det(I + sigma^{-2} K).
OracleResult check_information_gain(int trajectories, int max_length, std::uint64_t seed);
/// sigma^2_n(x) <= sigma^2 / n after n repeated observations at x.
OracleResult check_variance_bound(int points, int max_repeats, std::uint64_t seed);
/// Cached grid posterior against direct GP predictions.
OracleResult check_grid_posterior(int trajectories, int length, std::uint64_t seed);
/// Closed-form metric inverse against bisection for both kernel families.
OracleResult check_inverse_metric(int samples, std::uint64_t seed);
/// Reachability fixpoint on random linear responses against the interval the
/// linear form gives directly.
OracleResult check_reachability_linear(int environments, std::uint64_t seed);
/// Grid-minimized safe-path margin against endpoint evaluation for linear responses.
OracleResult check_safe_path(int cases, std::uint64_t seed);
/// Every patient built from `config` passes its Lipschitz audit.
OracleResult check_lipschitz(const ExperimentConfig& config, int patients, std::uint64_t seed);

/// The full suite at desk-scale sizes.
OracleReport run_oracle_checks(const ExperimentConfig& config);

}  // namespace escada
