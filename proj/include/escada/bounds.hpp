#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "escada/gp.hpp"
#include "escada/kernel.hpp"

namespace escada {

enum class BetaMode { Theoretical, Fixed };

BetaMode beta_mode_from_string(const std::string& name);
std::string to_string(BetaMode mode);

/// Confidence-width multiplier.
///
/// Fixed mode returns a constant sqrt(beta). Theoretical mode evaluates
///   beta_n = 2 L^2 + 300 * gamma_n * log^3(n / delta)
/// where gamma_n is replaced by `info_gain_inflation` times the information
/// gain actually achieved so far. The true gamma_n is a maximum over all
/// designs and is not computed; the proxy is reported in every run summary.
struct BetaSchedule {
    BetaMode mode = BetaMode::Fixed;
    double delta = 0.05;
    double sqrt_beta = 3.0;
    double lipschitz = 0.0;
    double info_gain_inflation = 2.0;

    void validate() const;
    [[nodiscard]] double beta(int round, double achieved_info_gain) const;
    [[nodiscard]] double sqrt_beta_at(int round, double achieved_info_gain) const;
};

/// Anchor doses d_1 = 0 < d_2 < ... < d_k <= max_dose spaced lambda / (2L)
/// apart in the dose metric.
struct DoseGrid {
    std::vector<double> doses;
    double max_dose = 0.0;
    double lambda = 0.0;
    double metric_step = 0.0;  // lambda / (2L)
    double dose_step = 0.0;    // K^{-1}(lambda / (2L)); 0 for a single-point domain
    std::vector<std::string> warnings;
};

/// Throws ErrorKind::InvalidArgument for lambda <= 0 or L <= 0, and
/// ErrorKind::DegenerateSet when lambda / (2L) reaches the metric supremum.
/// Passing epsilon adds a warning when lambda >= epsilon.
DoseGrid build_dose_grid(const DoseMetric& metric, double lipschitz, double max_dose, double lambda,
                         std::optional<double> epsilon = std::nullopt);

/// Finer grid over [0, max_dose] containing every anchor. Each anchor gap is
/// split into `resolution` equal cells; the tail after the last anchor uses
/// cells of at most the same width and ends exactly at max_dose.
struct EvalGrid {
    std::vector<double> doses;
    std::vector<Eigen::Index> nearest_anchor;    // index into DoseGrid::doses
    std::vector<Eigen::Index> anchor_positions;  // eval index of each anchor
    std::vector<bool> is_anchor;
    double cell = 0.0;

    [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(doses.size()); }
    /// Eval index of the point closest to `dose`; ties resolve to the smaller dose.
    [[nodiscard]] Eigen::Index nearest_index(double dose) const;
    /// Points stacked column-wise as (context, dose).
    [[nodiscard]] Eigen::MatrixXd points(const Eigen::VectorXd& context) const;
};

EvalGrid build_eval_grid(const DoseGrid& grid, int resolution);

/// Per-dose raw and Lipschitz-tightened bounds over an eval grid for one round.
struct BoundsTable {
    int round = 0;
    double sqrt_beta = 0.0;
    std::vector<double> doses;
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    Eigen::VectorXd lower_tight;
    Eigen::VectorXd upper_tight;
    Eigen::VectorXd width;  // max(0, upper_tight - lower_tight)
};

/// l = mu - sqrt(beta) sd, u = mu + sqrt(beta) sd, then
///   l_bar(d) = max(l(d), l(d') - L q(d, d')),  u_bar(d) = min(u(d), u(d') + L q(d, d'))
/// with d' the nearest anchor of d.
BoundsTable compute_bounds(const Eigen::VectorXd& mean, const Eigen::VectorXd& variance, double sqrt_beta,
                           const DoseGrid& grid, const EvalGrid& eval, const DoseMetric& metric, double lipschitz,
                           int round);

/// Convenience form that predicts from a GP state at the given context.
BoundsTable compute_bounds(const GPState& gp, const BetaSchedule& schedule, double achieved_info_gain,
                           const Eigen::VectorXd& context, const DoseGrid& grid, const EvalGrid& eval,
                           const DoseMetric& metric, double lipschitz, int round);

std::string bounds_to_csv(const BoundsTable& table);

}  // namespace escada
