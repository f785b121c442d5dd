#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "escada/kernel.hpp"

namespace escada {

struct GPConfig {
    KernelSpec kernel;
    double noise_variance = 1.0;

    void validate() const;
};

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
};

struct BatchPrediction {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
};

/// Exact zero-mean GP posterior over f on X = Z x D.
///
/// Holds the observed inputs, the outcomes and a lower-triangular factor of
/// (K_n + sigma^2 I), extended by one row per observation. The factor is rebuilt
/// from scratch every `kRefactorInterval` updates to bound drift. If an
/// extension breaks down, it is retried once with 1e-10 * signal variance of
/// diagonal jitter; a second failure throws ErrorKind::NumericalFailure.
class GPState {
public:
    static constexpr int kRefactorInterval = 256;

    explicit GPState(GPConfig config);

    [[nodiscard]] const GPConfig& config() const { return config_; }
    [[nodiscard]] Eigen::Index size() const { return n_; }
    [[nodiscard]] Eigen::Index input_dim() const { return config_.kernel.dim(); }

    [[nodiscard]] Eigen::MatrixXd inputs() const { return inputs_.leftCols(n_); }
    [[nodiscard]] Eigen::VectorXd outcomes() const { return outcomes_.head(n_); }
    [[nodiscard]] Eigen::MatrixXd factor() const;
    [[nodiscard]] Eigen::VectorXd diagonal_jitter() const { return jitter_.head(n_); }

    /// In-place rank-one extension. Use `gp_update` for the value-returning form.
    void update(const Eigen::Ref<const Eigen::VectorXd>& x, double y);

    [[nodiscard]] Prediction predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    [[nodiscard]] BatchPrediction predict_batch(const Eigen::Ref<const Eigen::MatrixXd>& points) const;
    [[nodiscard]] Eigen::MatrixXd posterior_covariance(const Eigen::Ref<const Eigen::MatrixXd>& points) const;

    /// Relative Frobenius error of factor * factor^T against K_n + sigma^2 I.
    [[nodiscard]] double factor_drift() const;

    /// Rebuild the factor from the stored inputs.
    void refactorize();

private:
    void reserve(Eigen::Index capacity);
    [[nodiscard]] double clamp_variance(double v) const;

    GPConfig config_;
    Eigen::Index n_ = 0;
    Eigen::MatrixXd inputs_;   // dim x capacity
    Eigen::VectorXd outcomes_;
    Eigen::VectorXd jitter_;
    Eigen::MatrixXd factor_;   // capacity x capacity, lower triangle of the leading n x n block
    Eigen::VectorXd whitened_; // factor^{-1} y
    int updates_since_refactor_ = 0;
};

GPState gp_update(const GPState& state, const Eigen::Ref<const Eigen::VectorXd>& x, double y);
Prediction gp_predict(const GPState& state, const Eigen::Ref<const Eigen::VectorXd>& x);

/// One joint draw from N(mean, cov). Factorizes cov by Cholesky, retrying once
/// with `jitter` on the diagonal before throwing.
Eigen::VectorXd sample_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::uint64_t seed,
                                double jitter);

/// Joint posterior sample at the given points (column-wise); deterministic given seed.
Eigen::VectorXd gp_sample_on_grid(const GPState& state, const Eigen::Ref<const Eigen::MatrixXd>& points,
                                  std::uint64_t seed);

/// Running information gain: 1/2 * sum log(1 + sigma^{-2} sigma_{n-1}^2(x_n)) over
/// predictive variances recorded in selection order.
double information_gain(const std::vector<double>& predictive_variances, double noise_variance);

/// 1/2 log det(I + sigma^{-2} K_N) from a fresh factorization of the stored inputs.
double log_det_information_gain(const GPState& state);

/// Accumulates predictive variances of selected points as a bandit run proceeds.
class InformationGainTracker {
public:
    explicit InformationGainTracker(double noise_variance) : noise_variance_(noise_variance) {}

    /// Records sigma_{n-1}^2(x_n) and returns the increment it contributed.
    double record(double predictive_variance);
    [[nodiscard]] double value() const { return total_; }
    [[nodiscard]] const std::vector<double>& history() const { return history_; }

private:
    double noise_variance_;
    double total_ = 0.0;
    std::vector<double> history_;
};

/// Posterior mean and full covariance cached over a fixed set of points.
/// Observations must land exactly on one of those points; each one is a
/// rank-one covariance update, O(m^2), independent of how many observations
/// came before. Used for fixed-context runs where every recommendation is
/// an evaluation-grid dose.
class GridPosterior {
public:
    GridPosterior(const GPState& state, Eigen::MatrixXd points);

    /// Conditions on y observed at point `index`; returns the predictive
    /// variance at that point before the update.
    double observe(Eigen::Index index, double y);

    [[nodiscard]] const Eigen::MatrixXd& points() const { return points_; }
    [[nodiscard]] const Eigen::VectorXd& mean() const { return mean_; }
    [[nodiscard]] Eigen::VectorXd variance() const;
    [[nodiscard]] Eigen::MatrixXd covariance(const std::vector<Eigen::Index>& indices) const;
    [[nodiscard]] double noise_variance() const { return noise_variance_; }

private:
    Eigen::MatrixXd points_;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
    double noise_variance_;
    double signal_variance_;
};

/// Versioned JSON snapshot: config, inputs and outcomes. The factor is
/// recomputed on restore.
std::string gp_snapshot(const GPState& state);
GPState gp_restore(const std::string& snapshot);

}  // namespace escada
