#include "escada/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "escada/errors.hpp"

namespace escada {

BetaMode beta_mode_from_string(const std::string& name) {
    if (name == "fixed") return BetaMode::Fixed;
    if (name == "theoretical") return BetaMode::Theoretical;
    throw Error(ErrorKind::InvalidArgument, "unknown beta mode '" + name + "'");
}

std::string to_string(BetaMode mode) { return mode == BetaMode::Fixed ? "fixed" : "theoretical"; }

void BetaSchedule::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "beta delta must lie in (0, 1)");
    }
    if (mode == BetaMode::Fixed && !(sqrt_beta > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "fixed sqrt(beta) must be positive");
    }
    if (mode == BetaMode::Theoretical && (!(lipschitz >= 0.0) || !(info_gain_inflation > 0.0))) {
        throw Error(ErrorKind::InvalidArgument, "theoretical beta needs L >= 0 and a positive inflation factor");
    }
}

double BetaSchedule::beta(int round, double achieved_info_gain) const {
    if (mode == BetaMode::Fixed) return sqrt_beta * sqrt_beta;
    if (round < 1) {
        throw Error(ErrorKind::InvalidArgument, "beta schedule rounds start at 1");
    }
    const double gamma = info_gain_inflation * std::max(achieved_info_gain, 0.0);
    const double lg = std::log(static_cast<double>(round) / delta);
    return 2.0 * lipschitz * lipschitz + 300.0 * gamma * lg * lg * lg;
}

double BetaSchedule::sqrt_beta_at(int round, double achieved_info_gain) const {
    return std::sqrt(beta(round, achieved_info_gain));
}

DoseGrid build_dose_grid(const DoseMetric& metric, double lipschitz, double max_dose, double lambda,
                         std::optional<double> epsilon) {
    if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "discretization lambda must be positive");
    if (!(lipschitz > 0.0)) throw Error(ErrorKind::InvalidArgument, "Lipschitz constant must be positive");
    if (!(max_dose >= 0.0)) throw Error(ErrorKind::InvalidArgument, "maximum dose must be nonnegative");

    DoseGrid grid;
    grid.max_dose = max_dose;
    grid.lambda = lambda;
    grid.metric_step = lambda / (2.0 * lipschitz);
    if (epsilon && lambda >= *epsilon) {
        std::ostringstream os;
        os << "lambda = " << lambda << " is not below epsilon = " << *epsilon
           << "; convergence of the safe set to the reachable set is not guaranteed";
        grid.warnings.push_back(os.str());
    }
    if (grid.metric_step >= metric.supremum()) {
        throw Error(ErrorKind::DegenerateSet, "lambda / 2L reaches the metric supremum; grid is degenerate");
    }
    grid.doses.push_back(0.0);
    if (max_dose == 0.0) return grid;

    // The metric depends on doses only through |d - d'|, so repeated steps of
    // radius lambda / 2L are uniform in dose.
    grid.dose_step = metric.inverse(grid.metric_step);
    const double tol = 1e-12 * std::max(1.0, max_dose);
    for (int i = 1;; ++i) {
        const double d = static_cast<double>(i) * grid.dose_step;
        if (d > max_dose + tol) break;
        grid.doses.push_back(std::min(d, max_dose));
    }
    return grid;
}

Eigen::Index EvalGrid::nearest_index(double dose) const {
    auto it = std::lower_bound(doses.begin(), doses.end(), dose);
    if (it == doses.begin()) return 0;
    if (it == doses.end()) return size() - 1;
    const auto hi = static_cast<Eigen::Index>(it - doses.begin());
    const Eigen::Index lo = hi - 1;
    return (dose - doses[lo] <= doses[hi] - dose) ? lo : hi;
}

Eigen::MatrixXd EvalGrid::points(const Eigen::VectorXd& context) const {
    const Eigen::Index p = context.size() + 1;
    Eigen::MatrixXd out(p, size());
    for (Eigen::Index j = 0; j < size(); ++j) {
        out.col(j).head(context.size()) = context;
        out(p - 1, j) = doses[j];
    }
    return out;
}

EvalGrid build_eval_grid(const DoseGrid& grid, int resolution) {
    if (resolution < 1) throw Error(ErrorKind::InvalidArgument, "eval-grid resolution must be at least 1");
    EvalGrid eval;
    const auto& a = grid.doses;
    const auto push = [&](double d, bool anchor) {
        eval.doses.push_back(d);
        eval.is_anchor.push_back(anchor);
        if (anchor) eval.anchor_positions.push_back(static_cast<Eigen::Index>(eval.doses.size()) - 1);
    };
    push(a.front(), true);
    for (std::size_t i = 1; i < a.size(); ++i) {
        for (int s = 1; s < resolution; ++s) {
            push(a[i - 1] + (a[i] - a[i - 1]) * static_cast<double>(s) / resolution, false);
        }
        push(a[i], true);
    }
    const double tail = grid.max_dose - a.back();
    if (tail > 1e-12 * std::max(1.0, grid.max_dose)) {
        const double target_cell = grid.dose_step > 0.0 ? grid.dose_step / resolution : tail;
        const int cells = std::max(1, static_cast<int>(std::ceil(tail / target_cell - 1e-9)));
        for (int s = 1; s <= cells; ++s) {
            push(s == cells ? grid.max_dose : a.back() + tail * static_cast<double>(s) / cells, false);
        }
    }
    eval.cell = 0.0;
    for (std::size_t i = 1; i < eval.doses.size(); ++i) {
        eval.cell = std::max(eval.cell, eval.doses[i] - eval.doses[i - 1]);
    }

    // Nearest anchor by dose distance (the metric is monotone in it); ties go
    // to the smaller anchor.
    eval.nearest_anchor.resize(eval.doses.size());
    std::size_t k = 0;
    for (std::size_t j = 0; j < eval.doses.size(); ++j) {
        const double d = eval.doses[j];
        while (k + 1 < a.size() && a[k + 1] <= d) ++k;
        Eigen::Index best = static_cast<Eigen::Index>(k);
        if (k + 1 < a.size() && (a[k + 1] - d) < (d - a[k])) best = static_cast<Eigen::Index>(k + 1);
        eval.nearest_anchor[j] = best;
    }
    return eval;
}

BoundsTable compute_bounds(const Eigen::VectorXd& mean, const Eigen::VectorXd& variance, double sqrt_beta,
                           const DoseGrid& grid, const EvalGrid& eval, const DoseMetric& metric, double lipschitz,
                           int round) {
    if (round < 1) throw Error(ErrorKind::InvalidArgument, "bounds are defined from round 1");
    const Eigen::Index m = eval.size();
    if (mean.size() != m || variance.size() != m) {
        throw Error(ErrorKind::DimensionMismatch, "posterior vectors do not match the eval grid");
    }
    BoundsTable t;
    t.round = round;
    t.sqrt_beta = sqrt_beta;
    t.doses = eval.doses;
    t.mean = mean;
    t.sd = variance.cwiseMax(0.0).cwiseSqrt();
    t.lower = mean - sqrt_beta * t.sd;
    t.upper = mean + sqrt_beta * t.sd;
    t.lower_tight.resize(m);
    t.upper_tight.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const Eigen::Index anchor = eval.anchor_positions[static_cast<std::size_t>(eval.nearest_anchor[j])];
        const double lq = lipschitz * metric.distance(eval.doses[j], grid.doses[eval.nearest_anchor[j]]);
        t.lower_tight(j) = std::max(t.lower(j), t.lower(anchor) - lq);
        t.upper_tight(j) = std::min(t.upper(j), t.upper(anchor) + lq);
    }
    t.width = (t.upper_tight - t.lower_tight).cwiseMax(0.0);
    return t;
}

BoundsTable compute_bounds(const GPState& gp, const BetaSchedule& schedule, double achieved_info_gain,
                           const Eigen::VectorXd& context, const DoseGrid& grid, const EvalGrid& eval,
                           const DoseMetric& metric, double lipschitz, int round) {
    const BatchPrediction pred = gp.predict_batch(eval.points(context));
    return compute_bounds(pred.mean, pred.variance, schedule.sqrt_beta_at(round, achieved_info_gain), grid, eval,
                          metric, lipschitz, round);
}

std::string bounds_to_csv(const BoundsTable& t) {
    std::ostringstream os;
    os.precision(10);
    os << "round,dose,mean,sd,lower,upper,lower_tight,upper_tight,width\n";
    for (std::size_t j = 0; j < t.doses.size(); ++j) {
        const auto i = static_cast<Eigen::Index>(j);
        os << t.round << ',' << t.doses[j] << ',' << t.mean(i) << ',' << t.sd(i) << ',' << t.lower(i) << ','
           << t.upper(i) << ',' << t.lower_tight(i) << ',' << t.upper_tight(i) << ',' << t.width(i) << '\n';
    }
    return os.str();
}

}  // namespace escada
