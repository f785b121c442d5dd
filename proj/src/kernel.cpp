#include "escada/kernel.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "escada/errors.hpp"

namespace escada {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid argument";
        case ErrorKind::DimensionMismatch: return "dimension mismatch";
        case ErrorKind::OutOfDomain: return "out of domain";
        case ErrorKind::Saturation: return "metric saturation";
        case ErrorKind::NumericalFailure: return "numerical failure";
        case ErrorKind::DegenerateSet: return "degenerate set";
        case ErrorKind::Config: return "config error";
    }
    return "error";
}

KernelFamily kernel_family_from_string(const std::string& name) {
    if (name == "squared-exponential") return KernelFamily::SquaredExponential;
    if (name == "laplacian") return KernelFamily::Laplacian;
    throw Error(ErrorKind::InvalidArgument, "unknown kernel family '" + name + "'");
}

std::string to_string(KernelFamily family) {
    return family == KernelFamily::SquaredExponential ? "squared-exponential" : "laplacian";
}

void KernelSpec::validate() const {
    if (lengthscales.size() == 0) {
        throw Error(ErrorKind::InvalidArgument, "kernel needs at least one lengthscale");
    }
    for (Eigen::Index i = 0; i < lengthscales.size(); ++i) {
        if (!(lengthscales(i) > 0.0) || !std::isfinite(lengthscales(i))) {
            throw Error(ErrorKind::InvalidArgument, "kernel lengthscales must be positive");
        }
    }
    if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
        throw Error(ErrorKind::InvalidArgument, "kernel signal variance must be positive");
    }
}

LipschitzCertificate::LipschitzCertificate(double value) : L(value) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
        throw Error(ErrorKind::InvalidArgument, "Lipschitz constant must be finite and nonnegative");
    }
}

namespace {

void check_dims(const KernelSpec& spec, Eigen::Index a, Eigen::Index b) {
    if (a != spec.dim() || b != spec.dim()) {
        std::ostringstream os;
        os << "points of dimension " << a << " and " << b << " for a kernel of dimension " << spec.dim();
        throw Error(ErrorKind::DimensionMismatch, os.str());
    }
}

double scaled_distance_term(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& xp) {
    double acc = 0.0;
    if (spec.family == KernelFamily::SquaredExponential) {
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double r = (x(i) - xp(i)) / spec.lengthscales(i);
            acc += r * r;
        }
        return 0.5 * acc;
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        acc += std::abs(x(i) - xp(i)) / spec.lengthscales(i);
    }
    return acc;
}

// 1 - k(delta)/variance along the dose axis, computed without cancellation.
double dose_decay_complement(const KernelSpec& spec, double delta) {
    const double ell = spec.dose_lengthscale();
    const double t = spec.family == KernelFamily::SquaredExponential ? 0.5 * (delta / ell) * (delta / ell)
                                                                    : std::abs(delta) / ell;
    return -std::expm1(-t);
}

}  // namespace

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& xp) {
    check_dims(spec, x.size(), xp.size());
    return spec.signal_variance * std::exp(-scaled_distance_term(spec, x, xp));
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& a,
                              const Eigen::Ref<const Eigen::MatrixXd>& b) {
    check_dims(spec, a.rows(), b.rows());
    Eigen::MatrixXd out(a.cols(), b.cols());
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
        for (Eigen::Index i = 0; i < a.cols(); ++i) {
            out(i, j) = spec.signal_variance * std::exp(-scaled_distance_term(spec, a.col(i), b.col(j)));
        }
    }
    return out;
}

double kernel_metric(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& xp) {
    const double radicand = kernel_eval(spec, x, x) - 2.0 * kernel_eval(spec, x, xp) + kernel_eval(spec, xp, xp);
    if (radicand < 0.0) {
        if (radicand < -1e-12 * spec.signal_variance) {
            throw Error(ErrorKind::NumericalFailure, "negative kernel metric radicand; kernel is not positive definite");
        }
        return 0.0;
    }
    return std::sqrt(radicand);
}

double dose_metric_profile(const KernelSpec& spec, double dose_distance) {
    return std::sqrt(2.0 * spec.signal_variance * dose_decay_complement(spec, dose_distance));
}

double dose_metric_supremum(const KernelSpec& spec) { return std::sqrt(2.0 * spec.signal_variance); }

double inverse_dose_metric(const KernelSpec& spec, double rho) {
    if (!(rho >= 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "metric radius must be nonnegative");
    }
    if (rho >= dose_metric_supremum(spec)) {
        throw Error(ErrorKind::Saturation, "radius at or above the metric supremum");
    }
    // K(delta)^2 / (2 v) = 1 - exp(-t)  =>  t = -log(1 - rho^2 / (2 v))
    const double t = -std::log1p(-rho * rho / (2.0 * spec.signal_variance));
    const double ell = spec.dose_lengthscale();
    if (spec.family == KernelFamily::SquaredExponential) {
        return ell * std::sqrt(2.0 * t);
    }
    return ell * t;
}

double invert_by_bisection(const std::function<double(double)>& forward, double rho, double initial_upper) {
    if (!(rho >= 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "bisection target must be nonnegative");
    }
    if (rho == 0.0) return 0.0;
    double lo = 0.0;
    double hi = initial_upper > 0.0 ? initial_upper : 1.0;
    int grow = 0;
    while (forward(hi) < rho) {
        lo = hi;
        hi *= 2.0;
        if (++grow > 200) {
            throw Error(ErrorKind::Saturation, "bisection bracket could not enclose the target radius");
        }
    }
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (forward(mid) < rho) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

DoseMetric DoseMetric::absolute(double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw Error(ErrorKind::InvalidArgument, "absolute metric scale must be positive");
    }
    DoseMetric m;
    m.absolute_ = true;
    m.scale_ = scale;
    return m;
}

DoseMetric DoseMetric::kernel_induced(KernelSpec spec) {
    spec.validate();
    DoseMetric m;
    m.absolute_ = false;
    m.kernel_ = std::move(spec);
    return m;
}

double DoseMetric::profile(double dose_distance) const {
    if (absolute_) return scale_ * std::abs(dose_distance);
    return dose_metric_profile(kernel_, dose_distance);
}

double DoseMetric::inverse(double rho) const {
    if (absolute_) {
        if (!(rho >= 0.0)) {
            throw Error(ErrorKind::InvalidArgument, "metric radius must be nonnegative");
        }
        return rho / scale_;
    }
    return inverse_dose_metric(kernel_, rho);
}

double DoseMetric::supremum() const {
    return absolute_ ? std::numeric_limits<double>::infinity() : dose_metric_supremum(kernel_);
}

std::string DoseMetric::describe() const {
    std::ostringstream os;
    if (absolute_) {
        os << "absolute(scale=" << scale_ << ")";
    } else {
        os << "kernel(" << to_string(kernel_.family) << ", dose lengthscale=" << kernel_.dose_lengthscale()
           << ", variance=" << kernel_.signal_variance << ")";
    }
    return os.str();
}

}  // namespace escada
