#pragma once

#include <functional>
#include <string>

#include <Eigen/Core>

namespace escada {

/// Input points live in X = Z x D; by convention the dose is the last coordinate.
using Point = Eigen::VectorXd;

enum class KernelFamily { SquaredExponential, Laplacian };

KernelFamily kernel_family_from_string(const std::string& name);
std::string to_string(KernelFamily family);

/// Product kernel over context and dose dimensions with per-dimension
/// lengthscales. Both families are stationary, so k(x,x) is the signal variance.
struct KernelSpec {
    KernelFamily family = KernelFamily::SquaredExponential;
    Eigen::VectorXd lengthscales = Eigen::VectorXd::Ones(1);
    double signal_variance = 1.0;

    [[nodiscard]] Eigen::Index dim() const { return lengthscales.size(); }
    [[nodiscard]] double dose_lengthscale() const { return lengthscales(lengthscales.size() - 1); }
    void validate() const;
};

/// Bound on |f(x) - f(x')| / q(x, x'). The same L is used for tightening,
/// expansion and the theoretical beta schedule.
struct LipschitzCertificate {
    double L = 0.0;

    LipschitzCertificate() = default;
    explicit LipschitzCertificate(double value);
};

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& xp);

/// Cross-covariance matrix; points are stored column-wise.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& a,
                              const Eigen::Ref<const Eigen::MatrixXd>& b);

/// q(x,x') = sqrt(k(x,x) - 2k(x,x') + k(x',x')). A radicand below -1e-12 (scaled
/// by the signal variance) means the kernel is not positive definite and throws.
double kernel_metric(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& xp);

/// K(delta): the metric between two doses at the same context, as a function of
/// their distance. Context factors cancel for product kernels, so the profile
/// does not depend on the context.
double dose_metric_profile(const KernelSpec& spec, double dose_distance);

/// sup over delta of K(delta), i.e. sqrt(2 * signal variance).
double dose_metric_supremum(const KernelSpec& spec);

/// K^{-1}(rho) in closed form. Throws ErrorKind::Saturation when rho is at or
/// above the supremum; callers treat that as an unbounded radius.
double inverse_dose_metric(const KernelSpec& spec, double rho);

/// Inverts a monotonically increasing map on [0, inf) by bisection
/// (tolerance 1e-10, at most 200 iterations). The bracket is grown from
/// `initial_upper` by doubling until it contains rho.
double invert_by_bisection(const std::function<double(double)>& forward, double rho,
                           double initial_upper = 1.0);

/// The dose metric q_z used by tightening and expansion. Either the
/// kernel-induced metric, or an environment-certified scaled absolute
/// difference q_z(d, d') = scale * |d - d'|.
class DoseMetric {
public:
    static DoseMetric absolute(double scale = 1.0);
    static DoseMetric kernel_induced(KernelSpec spec);

    [[nodiscard]] double profile(double dose_distance) const;
    [[nodiscard]] double distance(double d1, double d2) const { return profile(d1 > d2 ? d1 - d2 : d2 - d1); }
    [[nodiscard]] double inverse(double rho) const;
    [[nodiscard]] double supremum() const;
    [[nodiscard]] bool is_absolute() const { return absolute_; }
    [[nodiscard]] std::string describe() const;

private:
    DoseMetric() = default;

    bool absolute_ = true;
    double scale_ = 1.0;
    KernelSpec kernel_{};
};

}  // namespace escada
