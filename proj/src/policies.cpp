#include "escada/policies.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "escada/errors.hpp"
#include "escada/rng.hpp"

namespace escada {

std::string to_string(Branch branch) {
    switch (branch) {
        case Branch::TargetFeasible: return "target-feasible";
        case Branch::WidthExploration: return "width-exploration";
        case Branch::Sampled: return "sampled";
        case Branch::UcbArgmax: return "ucb-argmax";
        case Branch::Calculator: return "calculator";
        case Branch::RandomSafe: return "random-safe";
    }
    return "unknown";
}

namespace {

void require_admissible(const std::vector<Eigen::Index>& admissible) {
    if (admissible.empty()) throw Error(ErrorKind::DegenerateSet, "admissible dose set is empty");
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

}  // namespace

Recommendation taco_select(const BoundsTable& bounds, const EvalGrid& eval,
                           const std::vector<Eigen::Index>& admissible, double target) {
    require_admissible(admissible);
    Recommendation rec;

    // Admissible indices are ascending, so strict comparisons keep the smaller dose on ties.
    Eigen::Index best = -1;
    double best_gap = std::numeric_limits<double>::infinity();
    std::size_t feasible = 0;
    for (Eigen::Index j : admissible) {
        if (bounds.lower_tight(j) <= target && target <= bounds.upper_tight(j)) {
            ++feasible;
            const double gap = std::abs(bounds.mean(j) - target);
            if (gap < best_gap) {
                best_gap = gap;
                best = j;
            }
        }
    }
    if (best >= 0) {
        rec.dose = eval.doses[static_cast<std::size_t>(best)];
        rec.eval_index = best;
        rec.branch = Branch::TargetFeasible;
        rec.candidate_count = feasible;
        rec.score = best_gap;
        rec.explanation = "target inside the confidence interval of " + std::to_string(feasible) +
                          " admissible doses; chose the one whose mean response is closest to the target (|mu-T|=" +
                          fmt(best_gap) + ")";
        return rec;
    }

    double best_width = -1.0;
    for (Eigen::Index j : admissible) {
        if (!eval.is_anchor[static_cast<std::size_t>(j)]) continue;
        if (bounds.width(j) > best_width) {
            best_width = bounds.width(j);
            best = j;
        }
    }
    if (best < 0) {
        throw Error(ErrorKind::DegenerateSet, "no admissible anchor dose for width exploration");
    }
    rec.dose = eval.doses[static_cast<std::size_t>(best)];
    rec.eval_index = best;
    rec.branch = Branch::WidthExploration;
    rec.candidate_count = 0;
    rec.score = best_width;
    rec.explanation = "no admissible dose has the target inside its confidence interval; explored the widest interval (w=" +
                      fmt(best_width) + ")";
    return rec;
}

EscadaStep escada_step(const BoundsTable& bounds, const SafeSet& prev, const EvalGrid& eval,
                       const SafetyParams& params, double target) {
    if (prev.empty()) throw Error(ErrorKind::DegenerateSet, "ESCADA needs a nonempty safe set");
    EscadaStep step;
    step.safe_set = expand_safe_set(prev, bounds, eval, params);
    step.recommendation = taco_select(bounds, eval, step.safe_set.grid_members(eval), target);
    return step;
}

EscadaStep escada_step(const GPState& gp, const BetaSchedule& schedule, double achieved_info_gain, int round,
                       const Eigen::VectorXd& context, const SafeSet& prev, const DoseGrid& grid,
                       const EvalGrid& eval, const SafetyParams& params, double target) {
    const BoundsTable bounds =
        compute_bounds(gp, schedule, achieved_info_gain, context, grid, eval, params.metric, params.lipschitz, round);
    return escada_step(bounds, prev, eval, params, target);
}

Recommendation thompson_select(const Eigen::VectorXd& sample, const EvalGrid& eval,
                               const std::vector<Eigen::Index>& admissible, double target) {
    require_admissible(admissible);
    if (sample.size() != static_cast<Eigen::Index>(admissible.size())) {
        throw Error(ErrorKind::DimensionMismatch, "sample does not match the admissible set");
    }
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < sample.size(); ++i) {
        if (std::abs(sample(i) - target) < std::abs(sample(best) - target)) best = i;
    }
    Recommendation rec;
    rec.eval_index = admissible[static_cast<std::size_t>(best)];
    rec.dose = eval.doses[static_cast<std::size_t>(rec.eval_index)];
    rec.branch = Branch::Sampled;
    rec.candidate_count = admissible.size();
    rec.score = std::abs(sample(best) - target);
    rec.explanation = "posterior sample closest to the target (|sample-T|=" + fmt(rec.score) + ")";
    return rec;
}

Recommendation thompson_select(const GPState& gp, const Eigen::VectorXd& context, const EvalGrid& eval,
                               const std::vector<Eigen::Index>& admissible, double target, std::uint64_t seed) {
    require_admissible(admissible);
    const Eigen::MatrixXd all = eval.points(context);
    Eigen::MatrixXd pts(all.rows(), static_cast<Eigen::Index>(admissible.size()));
    for (std::size_t i = 0; i < admissible.size(); ++i) pts.col(static_cast<Eigen::Index>(i)) = all.col(admissible[i]);
    return thompson_select(gp_sample_on_grid(gp, pts, seed), eval, admissible, target);
}

double reward(Reward kind, double y, double target) {
    const double gap = std::abs(y - target);
    switch (kind) {
        case Reward::R1: return -std::log(gap + 1.0);
        case Reward::R2: return 1.0 - std::exp(gap / 20.0);
        case Reward::R3: return -gap;
    }
    return 0.0;
}

Recommendation gp_ucb_select(const Eigen::VectorXd& reward_mean, const Eigen::VectorXd& reward_variance,
                             const EvalGrid& eval, const std::vector<Eigen::Index>& admissible, double sqrt_beta) {
    require_admissible(admissible);
    Eigen::Index best = -1;
    double best_ucb = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j : admissible) {
        const double ucb = reward_mean(j) + sqrt_beta * std::sqrt(std::max(reward_variance(j), 0.0));
        if (ucb > best_ucb) {
            best_ucb = ucb;
            best = j;
        }
    }
    Recommendation rec;
    rec.eval_index = best;
    rec.dose = eval.doses[static_cast<std::size_t>(best)];
    rec.branch = Branch::UcbArgmax;
    rec.candidate_count = admissible.size();
    rec.score = best_ucb;
    rec.explanation = "largest upper confidence bound on the pseudo-reward (" + fmt(best_ucb) + ")";
    return rec;
}

void CalculatorParams::validate() const {
    if (!(icr > 0.0) || !(cf > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "calculator ICR and CF must be positive");
    }
}

double calculator_dose(const CalculatorParams& params, double cho, double fasting_glucose) {
    params.validate();
    if (!(cho >= 0.0)) throw Error(ErrorKind::InvalidArgument, "carbohydrate intake must be nonnegative");
    const double dose = cho / params.icr + (fasting_glucose - params.target) / params.cf;
    return dose > 0.0 ? dose : 0.0;
}

Recommendation random_safe_select(const SafeSet& safe, const EvalGrid& eval, std::uint64_t seed) {
    const auto members = safe.grid_members(eval);
    require_admissible(members);
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    Recommendation rec;
    rec.eval_index = members[pick(rng)];
    rec.dose = eval.doses[static_cast<std::size_t>(rec.eval_index)];
    rec.branch = Branch::RandomSafe;
    rec.candidate_count = members.size();
    rec.explanation = "uniform draw from the certified safe doses";
    return rec;
}

}  // namespace escada
