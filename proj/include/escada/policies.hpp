#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "escada/bounds.hpp"
#include "escada/gp.hpp"
#include "escada/safe_set.hpp"

namespace escada {

enum class Branch { TargetFeasible, WidthExploration, Sampled, UcbArgmax, Calculator, RandomSafe };

std::string to_string(Branch branch);

struct Recommendation {
    double dose = 0.0;
    Eigen::Index eval_index = -1;  // -1 when the dose is not an eval-grid point
    Branch branch = Branch::TargetFeasible;
    std::size_t candidate_count = 0;  // |C_n| for TACO, admissible size otherwise
    double score = 0.0;               // |mu - T|, width, |sample - T| or UCB value
    std::string explanation;
};

/// TACO. Among admissible eval points, C_n holds those whose tightened
/// interval contains the target. Non-empty C_n: pick argmin |mu - T|.
/// Otherwise pick the widest interval among admissible anchors. Ties go to the
/// smaller dose. Throws ErrorKind::DegenerateSet if exploration is needed and
/// no admissible point is an anchor.
Recommendation taco_select(const BoundsTable& bounds, const EvalGrid& eval,
                           const std::vector<Eigen::Index>& admissible, double target);

struct EscadaStep {
    Recommendation recommendation;
    SafeSet safe_set;
};

/// Expand the context's safe set once, then run TACO on it.
EscadaStep escada_step(const BoundsTable& bounds, const SafeSet& prev, const EvalGrid& eval,
                       const SafetyParams& params, double target);

/// GP-level form: predicts at `context`, builds bounds, then steps.
EscadaStep escada_step(const GPState& gp, const BetaSchedule& schedule, double achieved_info_gain, int round,
                       const Eigen::VectorXd& context, const SafeSet& prev, const DoseGrid& grid,
                       const EvalGrid& eval, const SafetyParams& params, double target);

/// Thompson selection given one joint sample over the admissible points
/// (sample(i) belongs to admissible[i]).
Recommendation thompson_select(const Eigen::VectorXd& sample, const EvalGrid& eval,
                               const std::vector<Eigen::Index>& admissible, double target);

/// Draws the joint posterior sample itself; deterministic given seed.
Recommendation thompson_select(const GPState& gp, const Eigen::VectorXd& context, const EvalGrid& eval,
                               const std::vector<Eigen::Index>& admissible, double target, std::uint64_t seed);

enum class Reward { R1, R2, R3 };

/// r1 = -log(|y - T| + 1), r2 = 1 - exp(|y - T| / 20), r3 = -|y - T|.
double reward(Reward kind, double y, double target);

/// argmax over admissible of mu_r + sqrt(beta) sigma_r on the reward surface.
Recommendation gp_ucb_select(const Eigen::VectorXd& reward_mean, const Eigen::VectorXd& reward_variance,
                             const EvalGrid& eval, const std::vector<Eigen::Index>& admissible, double sqrt_beta);

struct CalculatorParams {
    double icr = 10.0;     // g per unit
    double cf = 30.0;      // mg/dl per unit
    double target = 112.5; // mg/dl

    void validate() const;
};

/// (CHO / ICR + (G_M - G_T) / CF)^+
double calculator_dose(const CalculatorParams& params, double cho, double fasting_glucose);

/// Uniform draw among the eval-grid points of the safe set.
Recommendation random_safe_select(const SafeSet& safe, const EvalGrid& eval, std::uint64_t seed);

}  // namespace escada
