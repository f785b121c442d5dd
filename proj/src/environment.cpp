#include "escada/environment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "escada/errors.hpp"
#include "escada/rng.hpp"

namespace escada {

void ProblemSpec::validate() const {
    std::ostringstream os;
    if (!(max_dose > 0.0)) os << "max_dose must be positive; ";
    if (!(0.0 <= t_min)) os << "t_min must be nonnegative; ";
    if (!(alpha > 0.0)) os << "alpha must be positive; ";
    if (!(epsilon >= 0.0)) os << "epsilon must be nonnegative; ";
    if (!(t_min + alpha < target && target < t_max - alpha)) os << "target must lie in (t_min + alpha, t_max - alpha); ";
    if (!(t_max <= response_ceiling)) os << "t_max must not exceed the response ceiling; ";
    if (!(alpha > epsilon)) os << "alpha must exceed epsilon for a safe path to the optimum to exist; ";
    const std::string msg = os.str();
    if (!msg.empty()) throw Error(ErrorKind::InvalidArgument, msg.substr(0, msg.size() - 2));
}

Eigen::VectorXd MealEvent::context() const {
    Eigen::VectorXd z(2);
    z << cho, fasting_glucose;
    return z;
}

std::vector<MealEvent> sample_meal_events(int count, std::uint64_t seed, const MealEventRanges& ranges) {
    if (count < 1) throw Error(ErrorKind::InvalidArgument, "meal-event count must be at least 1");
    Rng rng(derive_seed(seed, {stream_id("meal-events")}));
    std::uniform_real_distribution<double> cho(ranges.cho.first, ranges.cho.second);
    std::uniform_real_distribution<double> gm(ranges.fasting_glucose.first, ranges.fasting_glucose.second);
    std::vector<MealEvent> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        MealEvent e;
        e.cho = cho(rng);
        e.fasting_glucose = gm(rng);
        out.push_back(e);
    }
    return out;
}

ResponseFamily response_family_from_string(const std::string& name) {
    if (name == "linear-cf") return ResponseFamily::LinearCF;
    if (name == "saturating") return ResponseFamily::Saturating;
    if (name == "gp-sampled") return ResponseFamily::GpSampled;
    throw Error(ErrorKind::InvalidArgument, "unknown response family '" + name + "'");
}

std::string to_string(ResponseFamily family) {
    switch (family) {
        case ResponseFamily::LinearCF: return "linear-cf";
        case ResponseFamily::Saturating: return "saturating";
        case ResponseFamily::GpSampled: return "gp-sampled";
    }
    return "unknown";
}

PatientParams sample_patient(const PatientRanges& ranges, double target, std::uint64_t seed) {
    Rng rng(derive_seed(seed, {stream_id("patient")}));
    const auto draw = [&](const Range& r) { return std::uniform_real_distribution<double>(r.first, r.second)(rng); };
    PatientParams p;
    p.cf = draw(ranges.cf);
    p.icr = draw(ranges.icr);
    p.offset = draw(ranges.offset);
    p.tuned = {p.icr, p.cf, target};
    p.calculator = {p.icr * draw(ranges.calculator_mismatch), p.cf * draw(ranges.calculator_mismatch), target};
    return p;
}

GpTruth GpTruth::sample(const KernelSpec& kernel, int features, double offset, std::uint64_t seed) {
    kernel.validate();
    if (features < 1) throw Error(ErrorKind::InvalidArgument, "gp truth needs at least one feature");
    Rng rng(derive_seed(seed, {stream_id("gp-truth")}));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    GpTruth t;
    const Eigen::Index dim = kernel.dim();
    t.omega_.resize(dim, features);
    t.phase_.resize(features);
    t.weights_.resize(features);
    for (int i = 0; i < features; ++i) {
        for (Eigen::Index d = 0; d < dim; ++d) {
            // Spectral densities: Gaussian for the squared exponential, Cauchy
            // for the (product) Laplacian.
            const double s = kernel.family == KernelFamily::SquaredExponential
                                 ? normal(rng)
                                 : std::tan(std::numbers::pi * (unit(rng) - 0.5));
            t.omega_(d, i) = s / kernel.lengthscales(d);
        }
        t.phase_(i) = 2.0 * std::numbers::pi * unit(rng);
        t.weights_(i) = normal(rng);
    }
    t.amplitude_ = std::sqrt(2.0 * kernel.signal_variance / features);
    t.offset_ = offset;
    return t;
}

double GpTruth::eval(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::VectorXd arg = omega_.transpose() * x + phase_;
    return offset_ + amplitude_ * arg.array().cos().matrix().dot(weights_);
}

double GpTruth::dose_derivative(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::VectorXd arg = omega_.transpose() * x + phase_;
    const Eigen::VectorXd dose_freq = omega_.row(omega_.rows() - 1).transpose();
    return -amplitude_ * (arg.array().sin() * dose_freq.array() * weights_.array()).sum();
}

std::string GpTruth::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["amplitude"] = amplitude_;
    j["offset"] = offset_;
    j["dim"] = omega_.rows();
    j["omega"] = std::vector<double>(omega_.data(), omega_.data() + omega_.size());
    j["phase"] = std::vector<double>(phase_.data(), phase_.data() + phase_.size());
    j["weights"] = std::vector<double>(weights_.data(), weights_.data() + weights_.size());
    return j.dump();
}

GpTruth GpTruth::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != 1) throw Error(ErrorKind::InvalidArgument, "unsupported gp truth version");
    GpTruth t;
    t.amplitude_ = j.at("amplitude").get<double>();
    t.offset_ = j.at("offset").get<double>();
    const auto dim = j.at("dim").get<Eigen::Index>();
    const auto omega = j.at("omega").get<std::vector<double>>();
    const auto phase = j.at("phase").get<std::vector<double>>();
    const auto weights = j.at("weights").get<std::vector<double>>();
    const auto m = static_cast<Eigen::Index>(phase.size());
    if (static_cast<Eigen::Index>(omega.size()) != dim * m || static_cast<Eigen::Index>(weights.size()) != m) {
        throw Error(ErrorKind::InvalidArgument, "inconsistent gp truth cache");
    }
    t.omega_ = Eigen::Map<const Eigen::MatrixXd>(omega.data(), dim, m);
    t.phase_ = Eigen::Map<const Eigen::VectorXd>(phase.data(), m);
    t.weights_ = Eigen::Map<const Eigen::VectorXd>(weights.data(), m);
    return t;
}

double ResponseModel::baseline(const MealEvent& z) const {
    return z.fasting_glucose + z.cho * patient.cf / patient.icr + patient.offset;
}

namespace {

double softplus_floor(double linear, const SaturationShape& s) {
    const double t = (linear - s.floor) / s.softness;
    // log(1 + e^t) without overflow
    const double sp = t > 30.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
    return s.floor + s.softness * sp;
}

double unclipped_response(const ResponseModel& model, const MealEvent& z, double dose) {
    switch (model.family) {
        case ResponseFamily::LinearCF: return model.baseline(z) - model.patient.cf * dose;
        case ResponseFamily::Saturating:
            return softplus_floor(model.baseline(z) - model.patient.cf * dose, model.saturation);
        case ResponseFamily::GpSampled: {
            if (!model.gp_truth) throw Error(ErrorKind::InvalidArgument, "gp-sampled model without a truth");
            Eigen::VectorXd x(3);
            x << z.cho, z.fasting_glucose, dose;
            return model.gp_truth->eval(x);
        }
    }
    return 0.0;
}

void check_dose(const ResponseModel& model, double dose) {
    const double tol = 1e-9 * std::max(1.0, model.problem.max_dose);
    if (!(dose >= -tol && dose <= model.problem.max_dose + tol)) {
        std::ostringstream os;
        os << "dose " << dose << " outside [0, " << model.problem.max_dose << "]";
        throw Error(ErrorKind::OutOfDomain, os.str());
    }
}

}  // namespace

double true_response(const ResponseModel& model, const MealEvent& z, double dose) {
    check_dose(model, dose);
    return std::clamp(unclipped_response(model, z, dose), 0.0, model.problem.response_ceiling);
}

double optimal_dose(const ResponseModel& model, const MealEvent& z) {
    const double target = model.problem.target;
    const double dmax = model.problem.max_dose;
    switch (model.family) {
        case ResponseFamily::LinearCF:
            return std::clamp((model.baseline(z) - target) / model.patient.cf, 0.0, dmax);
        case ResponseFamily::Saturating: {
            const auto& s = model.saturation;
            if (!(target > s.floor)) return dmax;
            const double linear_at_target = s.floor + s.softness * std::log(std::expm1((target - s.floor) / s.softness));
            return std::clamp((model.baseline(z) - linear_at_target) / model.patient.cf, 0.0, dmax);
        }
        case ResponseFamily::GpSampled: {
            double best = 0.0;
            double best_gap = std::numeric_limits<double>::infinity();
            constexpr int kScan = 10000;
            for (int i = 0; i < kScan; ++i) {
                const double d = dmax * static_cast<double>(i) / (kScan - 1);
                const double gap = std::abs(true_response(model, z, d) - target);
                if (gap < best_gap) {
                    best_gap = gap;
                    best = d;
                }
            }
            return best;
        }
    }
    return 0.0;
}

double observe(const ResponseModel& model, const MealEvent& z, double dose, std::uint64_t seed,
               std::uint64_t counter) {
    const double f = true_response(model, z, dose);
    if (model.noise_variance <= 0.0) return f;
    Rng rng(derive_seed(seed, {stream_id("observation"), counter}));
    std::normal_distribution<double> noise(0.0, std::sqrt(model.noise_variance));
    return f + noise(rng);
}

double ResponseModel::slope_bound(const std::vector<MealEvent>& contexts) const {
    if (family != ResponseFamily::GpSampled) return patient.cf;
    if (!gp_truth) throw Error(ErrorKind::InvalidArgument, "gp-sampled model without a truth");
    double worst = 0.0;
    constexpr int kDoses = 2000;
    Eigen::VectorXd x(3);
    for (const auto& z : contexts) {
        x(0) = z.cho;
        x(1) = z.fasting_glucose;
        for (int i = 0; i < kDoses; ++i) {
            x(2) = problem.max_dose * static_cast<double>(i) / (kDoses - 1);
            worst = std::max(worst, std::abs(gp_truth->dose_derivative(x)));
        }
    }
    return worst;
}

double certify_lipschitz(const ResponseModel& model, const DoseMetric& metric, double margin,
                         const std::vector<MealEvent>& contexts) {
    if (!(margin >= 1.0)) throw Error(ErrorKind::InvalidArgument, "Lipschitz margin must be at least 1");
    double stretch = 0.0;
    constexpr int kSteps = 1000;
    for (int i = 1; i <= kSteps; ++i) {
        const double delta = model.problem.max_dose * static_cast<double>(i) / kSteps;
        stretch = std::max(stretch, delta / metric.profile(delta));
    }
    return margin * model.slope_bound(contexts) * stretch;
}

LipschitzAudit audit_lipschitz(const ResponseModel& model, const DoseMetric& metric, double lipschitz,
                               int sample_count, std::uint64_t seed) {
    if (sample_count < 1000) throw Error(ErrorKind::InvalidArgument, "Lipschitz audit needs at least 1000 samples");
    const auto events = sample_meal_events(std::max(1, sample_count / 50), derive_seed(seed, {stream_id("audit")}));
    Rng rng(derive_seed(seed, {stream_id("audit-pairs")}));
    std::uniform_real_distribution<double> dose(0.0, model.problem.max_dose);
    std::uniform_int_distribution<std::size_t> pick(0, events.size() - 1);
    LipschitzAudit audit;
    for (int i = 0; i < sample_count; ++i) {
        const MealEvent& z = events[pick(rng)];
        const double a = dose(rng);
        const double b = dose(rng);
        const double q = metric.distance(a, b);
        if (q < 1e-12) continue;
        audit.worst_ratio = std::max(audit.worst_ratio, std::abs(true_response(model, z, a) - true_response(model, z, b)) / q);
    }
    audit.pass = audit.worst_ratio <= lipschitz;
    audit.excess = lipschitz > 0.0 ? audit.worst_ratio / lipschitz
                                   : (audit.worst_ratio > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    return audit;
}

InitMode init_mode_from_string(const std::string& name) {
    if (name == "calculator") return InitMode::Calculator;
    if (name == "tuned-calculator") return InitMode::TunedCalculator;
    if (name == "oracle") return InitMode::Oracle;
    if (name == "fixed") return InitMode::Fixed;
    throw Error(ErrorKind::InvalidArgument, "unknown initial safe-set mode '" + name + "'");
}

std::string to_string(InitMode mode) {
    switch (mode) {
        case InitMode::Calculator: return "calculator";
        case InitMode::TunedCalculator: return "tuned-calculator";
        case InitMode::Oracle: return "oracle";
        case InitMode::Fixed: return "fixed";
    }
    return "unknown";
}

namespace {

double snap_to_anchor(const DoseGrid& grid, double dose) {
    const auto& a = grid.doses;
    auto it = std::lower_bound(a.begin(), a.end(), dose);
    if (it == a.begin()) return a.front();
    if (it == a.end()) return a.back();
    const double hi = *it;
    const double lo = *(it - 1);
    return (dose - lo <= hi - dose) ? lo : hi;
}

}  // namespace

SafeSet initial_safe_set(const ResponseModel& model, const MealEvent& z, InitMode mode, const DoseGrid& grid,
                         std::uint64_t seed, double fixed_dose) {
    const double dmax = model.problem.max_dose;
    switch (mode) {
        case InitMode::Calculator:
            return SafeSet::singleton(snap_to_anchor(
                grid, std::min(calculator_dose(model.patient.calculator, z.cho, z.fasting_glucose), dmax)));
        case InitMode::TunedCalculator:
            return SafeSet::singleton(
                snap_to_anchor(grid, std::min(calculator_dose(model.patient.tuned, z.cho, z.fasting_glucose), dmax)));
        case InitMode::Fixed: return SafeSet::singleton(snap_to_anchor(grid, std::clamp(fixed_dose, 0.0, dmax)));
        case InitMode::Oracle: {
            std::vector<double> safe;
            for (double d : grid.doses) {
                const double f = true_response(model, z, d);
                if (f >= model.problem.t_min && f <= model.problem.t_max) safe.push_back(d);
            }
            if (safe.empty()) throw Error(ErrorKind::DegenerateSet, "no truly safe anchor dose exists for this context");
            Rng rng(derive_seed(seed, {stream_id("oracle-init")}));
            std::uniform_int_distribution<std::size_t> pick(0, safe.size() - 1);
            return SafeSet::singleton(safe[pick(rng)]);
        }
    }
    return {};
}

}  // namespace escada
