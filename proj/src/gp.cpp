#include "escada/gp.hpp"

#include <cmath>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <json.hpp>

#include "escada/errors.hpp"
#include "escada/rng.hpp"

namespace escada {

namespace {

constexpr double kNegativeVarianceTolerance = 1e-12;
constexpr int kSnapshotVersion = 1;

}  // namespace

void GPConfig::validate() const {
    kernel.validate();
    if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) {
        throw Error(ErrorKind::InvalidArgument, "noise variance must be positive");
    }
}

GPState::GPState(GPConfig config) : config_(std::move(config)) {
    config_.validate();
    reserve(16);
}

void GPState::reserve(Eigen::Index capacity) {
    if (capacity <= inputs_.cols()) return;
    const Eigen::Index old = inputs_.cols();
    inputs_.conservativeResize(config_.kernel.dim(), capacity);
    outcomes_.conservativeResize(capacity);
    jitter_.conservativeResize(capacity);
    whitened_.conservativeResize(capacity);
    Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(capacity, capacity);
    if (old > 0) grown.topLeftCorner(old, old) = factor_;
    factor_ = std::move(grown);
}

Eigen::MatrixXd GPState::factor() const {
    return factor_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>();
}

void GPState::update(const Eigen::Ref<const Eigen::VectorXd>& x, double y) {
    if (x.size() != input_dim()) {
        throw Error(ErrorKind::DimensionMismatch, "observation point does not match the kernel dimension");
    }
    if (!std::isfinite(y)) {
        throw Error(ErrorKind::InvalidArgument, "observation must be finite");
    }
    if (n_ == inputs_.cols()) reserve(2 * inputs_.cols());

    const double signal = config_.kernel.signal_variance;
    Eigen::VectorXd row(n_);
    for (Eigen::Index i = 0; i < n_; ++i) row(i) = kernel_eval(config_.kernel, inputs_.col(i), x);
    if (n_ > 0) factor_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>().solveInPlace(row);

    double jitter = 0.0;
    double pivot = kernel_eval(config_.kernel, x, x) + config_.noise_variance - (n_ > 0 ? row.squaredNorm() : 0.0);
    if (!(pivot > 0.0) || !std::isfinite(pivot)) {
        jitter = 1e-10 * signal;
        pivot += jitter;
        if (!(pivot > 0.0) || !std::isfinite(pivot)) {
            throw Error(ErrorKind::NumericalFailure, "Cholesky extension broke down after jitter retry");
        }
    }
    const double diag = std::sqrt(pivot);

    inputs_.col(n_) = x;
    outcomes_(n_) = y;
    jitter_(n_) = jitter;
    if (n_ > 0) factor_.row(n_).head(n_) = row.transpose();
    factor_(n_, n_) = diag;
    whitened_(n_) = (y - (n_ > 0 ? row.dot(whitened_.head(n_)) : 0.0)) / diag;
    ++n_;

    if (++updates_since_refactor_ >= kRefactorInterval) refactorize();
}

void GPState::refactorize() {
    updates_since_refactor_ = 0;
    if (n_ == 0) return;
    Eigen::MatrixXd gram = kernel_matrix(config_.kernel, inputs_.leftCols(n_), inputs_.leftCols(n_));
    gram.diagonal().array() += config_.noise_variance;
    gram.diagonal() += jitter_.head(n_);
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
        const double extra = 1e-10 * config_.kernel.signal_variance;
        gram.diagonal().array() += extra;
        jitter_.head(n_).array() += extra;
        llt.compute(gram);
        if (llt.info() != Eigen::Success) {
            throw Error(ErrorKind::NumericalFailure, "kernel matrix refactorization failed after jitter retry");
        }
    }
    factor_.topLeftCorner(n_, n_) = llt.matrixL();
    whitened_.head(n_) = outcomes_.head(n_);
    factor_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>().solveInPlace(whitened_.head(n_));
}

double GPState::clamp_variance(double v) const {
    if (v < 0.0) {
        if (v < -kNegativeVarianceTolerance * config_.kernel.signal_variance) {
            throw Error(ErrorKind::NumericalFailure, "posterior variance is negative beyond tolerance");
        }
        return 0.0;
    }
    return v;
}

Prediction GPState::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != input_dim()) {
        throw Error(ErrorKind::DimensionMismatch, "prediction point does not match the kernel dimension");
    }
    const double prior = kernel_eval(config_.kernel, x, x);
    if (n_ == 0) return {0.0, prior};
    Eigen::VectorXd v(n_);
    for (Eigen::Index i = 0; i < n_; ++i) v(i) = kernel_eval(config_.kernel, inputs_.col(i), x);
    factor_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>().solveInPlace(v);
    return {v.dot(whitened_.head(n_)), clamp_variance(prior - v.squaredNorm())};
}

BatchPrediction GPState::predict_batch(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
    if (points.rows() != input_dim()) {
        throw Error(ErrorKind::DimensionMismatch, "prediction points do not match the kernel dimension");
    }
    const Eigen::Index m = points.cols();
    BatchPrediction out;
    out.mean = Eigen::VectorXd::Zero(m);
    out.variance = Eigen::VectorXd::Constant(m, config_.kernel.signal_variance);
    if (n_ == 0) return out;
    Eigen::MatrixXd v = kernel_matrix(config_.kernel, inputs_.leftCols(n_), points);
    factor_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>().solveInPlace(v);
    out.mean.noalias() = v.transpose() * whitened_.head(n_);
    const Eigen::VectorXd reduction = v.colwise().squaredNorm().transpose();
    for (Eigen::Index j = 0; j < m; ++j) out.variance(j) = clamp_variance(out.variance(j) - reduction(j));
    return out;
}

Eigen::MatrixXd GPState::posterior_covariance(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
    Eigen::MatrixXd cov = kernel_matrix(config_.kernel, points, points);
    if (n_ == 0) return cov;
    Eigen::MatrixXd v = kernel_matrix(config_.kernel, inputs_.leftCols(n_), points);
    factor_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>().solveInPlace(v);
    cov.noalias() -= v.transpose() * v;
    return cov;
}

double GPState::factor_drift() const {
    if (n_ == 0) return 0.0;
    Eigen::MatrixXd gram = kernel_matrix(config_.kernel, inputs_.leftCols(n_), inputs_.leftCols(n_));
    gram.diagonal().array() += config_.noise_variance;
    gram.diagonal() += jitter_.head(n_);
    const Eigen::MatrixXd l = factor();
    return (l * l.transpose() - gram).norm() / gram.norm();
}

GPState gp_update(const GPState& state, const Eigen::Ref<const Eigen::VectorXd>& x, double y) {
    GPState next = state;
    next.update(x, y);
    return next;
}

Prediction gp_predict(const GPState& state, const Eigen::Ref<const Eigen::VectorXd>& x) { return state.predict(x); }

Eigen::VectorXd sample_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::uint64_t seed,
                                double jitter) {
    const Eigen::Index m = mean.size();
    if (m == 0) {
        throw Error(ErrorKind::InvalidArgument, "cannot sample an empty set of points");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        Eigen::MatrixXd jittered = cov;
        jittered.diagonal().array() += jitter;
        llt.compute(jittered);
        if (llt.info() != Eigen::Success) {
            throw Error(ErrorKind::NumericalFailure, "posterior covariance is not positive definite after jitter");
        }
    }
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(m);
    for (Eigen::Index i = 0; i < m; ++i) z(i) = normal(rng);
    Eigen::VectorXd out = mean;
    out.noalias() += llt.matrixL() * z;
    return out;
}

Eigen::VectorXd gp_sample_on_grid(const GPState& state, const Eigen::Ref<const Eigen::MatrixXd>& points,
                                  std::uint64_t seed) {
    if (points.cols() == 0) {
        throw Error(ErrorKind::InvalidArgument, "sampling needs at least one point");
    }
    const BatchPrediction pred = state.predict_batch(points);
    const Eigen::MatrixXd cov = state.posterior_covariance(points);
    return sample_gaussian(pred.mean, cov, seed, 1e-10 * state.config().kernel.signal_variance);
}

double information_gain(const std::vector<double>& predictive_variances, double noise_variance) {
    double total = 0.0;
    for (double v : predictive_variances) total += 0.5 * std::log1p(v / noise_variance);
    return total;
}

double log_det_information_gain(const GPState& state) {
    const Eigen::Index n = state.size();
    if (n == 0) return 0.0;
    const Eigen::MatrixXd x = state.inputs();
    Eigen::MatrixXd a = kernel_matrix(state.config().kernel, x, x) / state.config().noise_variance;
    a.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::NumericalFailure, "I + K / sigma^2 is not positive definite");
    }
    const Eigen::MatrixXd l = llt.matrixL();
    return l.diagonal().array().log().sum();
}

double InformationGainTracker::record(double predictive_variance) {
    const double inc = 0.5 * std::log1p(predictive_variance / noise_variance_);
    history_.push_back(predictive_variance);
    total_ += inc;
    return inc;
}

GridPosterior::GridPosterior(const GPState& state, Eigen::MatrixXd points)
    : points_(std::move(points)),
      noise_variance_(state.config().noise_variance),
      signal_variance_(state.config().kernel.signal_variance) {
    mean_ = state.predict_batch(points_).mean;
    cov_ = state.posterior_covariance(points_);
}

double GridPosterior::observe(Eigen::Index index, double y) {
    if (index < 0 || index >= points_.cols()) {
        throw Error(ErrorKind::OutOfDomain, "grid posterior observation index out of range");
    }
    if (!std::isfinite(y)) {
        throw Error(ErrorKind::InvalidArgument, "observation must be finite");
    }
    const double prior_var = std::max(cov_(index, index), 0.0);
    const double denom = cov_(index, index) + noise_variance_;
    const Eigen::VectorXd s = cov_.col(index);
    mean_ += s * ((y - mean_(index)) / denom);
    cov_.noalias() -= (s / denom) * s.transpose();
    return prior_var;
}

Eigen::VectorXd GridPosterior::variance() const {
    Eigen::VectorXd v = cov_.diagonal();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v(i) < 0.0) {
            if (v(i) < -kNegativeVarianceTolerance * signal_variance_ * 1e3) {
                throw Error(ErrorKind::NumericalFailure, "cached posterior variance is negative beyond tolerance");
            }
            v(i) = 0.0;
        }
    }
    return v;
}

Eigen::MatrixXd GridPosterior::covariance(const std::vector<Eigen::Index>& indices) const {
    const auto m = static_cast<Eigen::Index>(indices.size());
    Eigen::MatrixXd out(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index i = 0; i < m; ++i) out(i, j) = cov_(indices[i], indices[j]);
    }
    return out;
}

std::string gp_snapshot(const GPState& state) {
    using nlohmann::json;
    const auto& cfg = state.config();
    json j;
    j["version"] = kSnapshotVersion;
    j["kernel"] = {{"family", to_string(cfg.kernel.family)},
                   {"lengthscales", std::vector<double>(cfg.kernel.lengthscales.data(),
                                                        cfg.kernel.lengthscales.data() + cfg.kernel.lengthscales.size())},
                   {"signal_variance", cfg.kernel.signal_variance}};
    j["noise_variance"] = cfg.noise_variance;
    json inputs = json::array();
    const Eigen::MatrixXd x = state.inputs();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        inputs.push_back(std::vector<double>(x.col(c).data(), x.col(c).data() + x.rows()));
    }
    j["inputs"] = std::move(inputs);
    const Eigen::VectorXd y = state.outcomes();
    j["outcomes"] = std::vector<double>(y.data(), y.data() + y.size());
    return j.dump();
}

GPState gp_restore(const std::string& snapshot) {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(snapshot);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("malformed GP snapshot: ") + e.what());
    }
    if (j.value("version", 0) != kSnapshotVersion) {
        throw Error(ErrorKind::InvalidArgument, "unsupported GP snapshot version");
    }
    GPConfig cfg;
    cfg.kernel.family = kernel_family_from_string(j.at("kernel").at("family").get<std::string>());
    const auto ls = j.at("kernel").at("lengthscales").get<std::vector<double>>();
    cfg.kernel.lengthscales = Eigen::Map<const Eigen::VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));
    cfg.kernel.signal_variance = j.at("kernel").at("signal_variance").get<double>();
    cfg.noise_variance = j.at("noise_variance").get<double>();
    GPState state(cfg);
    const auto ys = j.at("outcomes").get<std::vector<double>>();
    const auto& inputs = j.at("inputs");
    if (inputs.size() != ys.size()) {
        throw Error(ErrorKind::InvalidArgument, "snapshot inputs and outcomes differ in length");
    }
    for (std::size_t i = 0; i < ys.size(); ++i) {
        const auto p = inputs[i].get<std::vector<double>>();
        state.update(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())), ys[i]);
    }
    return state;
}

}  // namespace escada
