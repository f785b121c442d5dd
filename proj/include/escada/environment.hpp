#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "escada/bounds.hpp"
#include "escada/kernel.hpp"
#include "escada/policies.hpp"
#include "escada/safe_set.hpp"

namespace escada {

/// The leveling task: keep f inside [t_min, t_max] and close to `target`.
struct ProblemSpec {
    double max_dose = 15.0;
    double response_ceiling = 600.0;  // responses live in [0, response_ceiling]
    double target = 112.5;
    double t_min = 70.0;
    double t_max = 180.0;
    double alpha = 30.0;    // target margin
    double epsilon = 20.0;  // measurement-uncertainty margin

    void validate() const;
};

struct MealEvent {
    double cho = 50.0;              // g
    double fasting_glucose = 125.0; // mg/dl

    [[nodiscard]] Eigen::VectorXd context() const;
};

using Range = std::pair<double, double>;

struct MealEventRanges {
    Range cho{20.0, 80.0};
    Range fasting_glucose{100.0, 150.0};
};

std::vector<MealEvent> sample_meal_events(int count, std::uint64_t seed, const MealEventRanges& ranges = {});

enum class ResponseFamily { LinearCF, Saturating, GpSampled };

ResponseFamily response_family_from_string(const std::string& name);
std::string to_string(ResponseFamily family);

struct PatientRanges {
    Range cf{25.0, 45.0};
    Range icr{10.0, 16.0};
    Range offset{-10.0, 10.0};
    Range calculator_mismatch{0.7, 1.3};
};

struct PatientParams {
    double cf = 30.0;
    double icr = 12.0;
    double offset = 0.0;              // baseline shift the calculator does not know about
    CalculatorParams calculator;      // untuned: true parameters times a mismatch factor
    CalculatorParams tuned;           // true ICR and CF
};

PatientParams sample_patient(const PatientRanges& ranges, double target, std::uint64_t seed);

/// Soft floor for the saturating family:
/// f = floor + softness * log(1 + exp((linear - floor) / softness)).
struct SaturationShape {
    double floor = 40.0;
    double softness = 15.0;
};

/// A sample path of a zero-mean GP with the given kernel, realized with random
/// Fourier features so it can be evaluated anywhere and regenerated from its seed:
///   g(x) = sqrt(2 v / M) * sum_i w_i cos(omega_i . x + b_i).
class GpTruth {
public:
    static GpTruth sample(const KernelSpec& kernel, int features, double offset, std::uint64_t seed);

    [[nodiscard]] double eval(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    /// Derivative along the last (dose) coordinate.
    [[nodiscard]] double dose_derivative(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    [[nodiscard]] std::string to_json() const;
    static GpTruth from_json(const std::string& text);

    [[nodiscard]] double offset() const { return offset_; }
    [[nodiscard]] Eigen::Index features() const { return phase_.size(); }

private:
    Eigen::MatrixXd omega_;  // dim x M
    Eigen::VectorXd phase_;
    Eigen::VectorXd weights_;
    double amplitude_ = 0.0;
    double offset_ = 0.0;
};

struct ResponseModel {
    ResponseFamily family = ResponseFamily::LinearCF;
    ProblemSpec problem;
    PatientParams patient;
    SaturationShape saturation;
    std::shared_ptr<const GpTruth> gp_truth;
    double noise_variance = 25.0;
    DoseMetric metric = DoseMetric::absolute();
    LipschitzCertificate lipschitz;

    /// Response at zero dose before clipping, g0(z) = G_M + CHO * CF / ICR + offset.
    [[nodiscard]] double baseline(const MealEvent& z) const;
    /// Bound on |df/dd| used to certify L.
    [[nodiscard]] double slope_bound(const std::vector<MealEvent>& contexts) const;
};

/// f(z, d), clipped to [0, response_ceiling]. Throws ErrorKind::OutOfDomain
/// for doses outside [0, max_dose].
double true_response(const ResponseModel& model, const MealEvent& z, double dose);

/// Dose whose response is closest to the target: analytic for the linear and
/// saturating families, a 10^4-point scan for gp-sampled truths.
double optimal_dose(const ResponseModel& model, const MealEvent& z);

/// y = f(z, d) + N(0, sigma^2), deterministic per (seed, counter).
double observe(const ResponseModel& model, const MealEvent& z, double dose, std::uint64_t seed,
               std::uint64_t counter);

/// L = margin * slope bound * sup_{0 < delta <= max_dose} delta / K(delta).
double certify_lipschitz(const ResponseModel& model, const DoseMetric& metric, double margin,
                         const std::vector<MealEvent>& contexts);

struct LipschitzAudit {
    bool pass = false;
    double worst_ratio = 0.0;  // max |f(x) - f(x')| / q(x, x') over sampled pairs
    double excess = 0.0;       // worst_ratio / L
};

/// Samples same-context dose pairs and checks the certified constant.
/// Requires sample_count >= 1000.
LipschitzAudit audit_lipschitz(const ResponseModel& model, const DoseMetric& metric, double lipschitz,
                               int sample_count, std::uint64_t seed);

enum class InitMode { Calculator, TunedCalculator, Oracle, Fixed };

InitMode init_mode_from_string(const std::string& name);
std::string to_string(InitMode mode);

/// Singleton S_0(z) snapped to the nearest anchor of `grid` (ties to the smaller dose).
/// Calculator modes may be truly unsafe; oracle mode draws uniformly among
/// truly safe anchors and throws ErrorKind::DegenerateSet if there are none.
SafeSet initial_safe_set(const ResponseModel& model, const MealEvent& z, InitMode mode, const DoseGrid& grid,
                         std::uint64_t seed, double fixed_dose = 0.0);

}  // namespace escada
