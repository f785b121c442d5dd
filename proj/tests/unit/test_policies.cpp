#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "escada/errors.hpp"
#include "escada/policies.hpp"
#include "escada/rng.hpp"

using namespace escada;

namespace {

// Three anchors at 0, 1, 2 with no intermediate eval points.
struct Tiny {
    DoseGrid grid = build_dose_grid(DoseMetric::absolute(), 0.5, 2.0, 1.0);
    EvalGrid eval = build_eval_grid(grid, 1);

    BoundsTable table(std::vector<double> mean, std::vector<double> lower, std::vector<double> upper) const {
        BoundsTable t;
        const auto m = static_cast<Eigen::Index>(mean.size());
        t.doses = eval.doses;
        t.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), m);
        t.lower = t.lower_tight = Eigen::Map<Eigen::VectorXd>(lower.data(), m);
        t.upper = t.upper_tight = Eigen::Map<Eigen::VectorXd>(upper.data(), m);
        t.sd = Eigen::VectorXd::Zero(m);
        t.width = (t.upper_tight - t.lower_tight).cwiseMax(0.0);
        return t;
    }
};

const std::vector<Eigen::Index> kAll{0, 1, 2};

}  // namespace

TEST_CASE("TACO picks a target-feasible dose whose mean hits the target") {
    Tiny t;
    REQUIRE(t.eval.size() == 3);
    const BoundsTable b = t.table({150.0, 112.5, 60.0}, {140.0, 100.0, 50.0}, {160.0, 130.0, 70.0});
    const Recommendation r = taco_select(b, t.eval, kAll, 112.5);
    CHECK(r.dose == 1.0);
    CHECK(r.branch == Branch::TargetFeasible);
    CHECK(r.candidate_count == 1);
    CHECK(r.score == 0.0);
    CHECK(to_string(r.branch) == "target-feasible");
}

TEST_CASE("TACO explores the widest interval when no interval holds the target") {
    Tiny t;
    const BoundsTable b = t.table({200.0, 200.0, 200.0}, {199.75, 199.0, 199.5}, {200.25, 201.0, 200.5});
    const Recommendation r = taco_select(b, t.eval, kAll, 112.5);
    CHECK(r.dose == 1.0);
    CHECK(r.branch == Branch::WidthExploration);
    CHECK(r.score == doctest::Approx(2.0));
}

TEST_CASE("TACO breaks ties toward the smaller dose") {
    Tiny t;
    const BoundsTable b = t.table({115.5, 109.5, 80.0}, {100.0, 100.0, 70.0}, {130.0, 130.0, 90.0});
    CHECK(taco_select(b, t.eval, kAll, 112.5).dose == 0.0);
    const BoundsTable w = t.table({0.0, 0.0, 0.0}, {0.0, -1.0, -1.0}, {0.0, 1.0, 1.0});
    CHECK(taco_select(w, t.eval, kAll, 112.5).dose == 1.0);
}

TEST_CASE("TACO never picks an interval excluding the target through the feasible branch") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 250.0);
    Tiny t;
    for (int i = 0; i < 2000; ++i) {
        std::vector<double> lo(3), hi(3), mu(3);
        for (int j = 0; j < 3; ++j) {
            lo[j] = u(rng);
            hi[j] = lo[j] + 0.3 * u(rng);
            mu[j] = 0.5 * (lo[j] + hi[j]);
        }
        const BoundsTable b = t.table(mu, lo, hi);
        const Recommendation r = taco_select(b, t.eval, kAll, 112.5);
        if (r.branch == Branch::TargetFeasible) {
            CHECK(b.lower_tight(r.eval_index) <= 112.5);
            CHECK(b.upper_tight(r.eval_index) >= 112.5);
        }
    }
}

TEST_CASE("TACO errors") {
    Tiny t;
    const BoundsTable b = t.table({0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0});
    CHECK_THROWS_AS(taco_select(b, t.eval, {}, 112.5), Error);
    const DoseGrid g = build_dose_grid(DoseMetric::absolute(), 0.5, 2.0, 1.0);
    const EvalGrid fine = build_eval_grid(g, 2);
    BoundsTable f;
    f.mean = Eigen::VectorXd::Zero(fine.size());
    f.lower = f.lower_tight = f.mean;
    f.upper = f.upper_tight = f.mean;
    f.width = f.mean;
    try {
        (void)taco_select(f, fine, {1}, 112.5);  // index 1 is a midpoint, not an anchor
        FAIL("expected a degenerate admissible set");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateSet);
    }
}

namespace {

GPState dose_gp() {
    KernelSpec k;
    k.lengthscales = Eigen::Vector3d(30.0, 30.0, 4.0);
    k.signal_variance = 2500.0;
    return GPState(GPConfig{k, 25.0});
}

}  // namespace

TEST_CASE("ESCADA step keeps its recommendation inside the returned safe set") {
    GPState gp = dose_gp();
    const Eigen::Vector2d z(50.0, 120.0);
    const double lipschitz = 40.0;
    const DoseGrid g = build_dose_grid(DoseMetric::absolute(), lipschitz, 15.0, 15.0);
    const EvalGrid e = build_eval_grid(g, 4);
    const SafetyParams p{lipschitz, 70.0, 180.0, 15.0, DoseMetric::absolute()};
    BetaSchedule beta;
    SafeSet s = SafeSet::singleton(g.doses[20]);
    InformationGainTracker info(25.0);
    for (int n = 1; n <= 30; ++n) {
        const EscadaStep step = escada_step(gp, beta, info.value(), n, z, s, g, e, p, 112.5);
        CHECK(step.safe_set.contains(step.recommendation.dose));
        CHECK(s.subset_of(step.safe_set, 1e-12));
        s = step.safe_set;
        Eigen::Vector3d x(z(0), z(1), step.recommendation.dose);
        info.record(gp.predict(x).variance);
        gp.update(x, 260.0 - 35.0 * step.recommendation.dose);
    }
    CHECK_THROWS_AS(escada_step(gp, beta, 0.0, 1, z, SafeSet(), g, e, p, 112.5), Error);
}

TEST_CASE("TACO and ESCADA are deterministic for a fixed history") {
    GPState gp = dose_gp();
    const Eigen::Vector2d z(40.0, 110.0);
    for (int i = 0; i < 5; ++i) gp.update(Eigen::Vector3d(40.0, 110.0, 2.0 * i), 200.0 - 20.0 * i);
    const DoseGrid g = build_dose_grid(DoseMetric::absolute(), 30.0, 15.0, 15.0);
    const EvalGrid e = build_eval_grid(g, 4);
    const SafetyParams p{30.0, 70.0, 180.0, 15.0, DoseMetric::absolute()};
    BetaSchedule beta;
    const EscadaStep first = escada_step(gp, beta, 1.0, 6, z, SafeSet::singleton(g.doses[10]), g, e, p, 112.5);
    for (int i = 0; i < 20; ++i) {
        const EscadaStep again = escada_step(gp, beta, 1.0, 6, z, SafeSet::singleton(g.doses[10]), g, e, p, 112.5);
        CHECK(again.recommendation.dose == first.recommendation.dose);
        CHECK(again.safe_set == first.safe_set);
    }
}

TEST_CASE("Thompson selection") {
    Tiny t;
    SUBCASE("sample closest to the target wins") {
        const Recommendation r = thompson_select(Eigen::Vector3d(100.0, 113.0, 150.0), t.eval, kAll, 112.5);
        CHECK(r.dose == 1.0);
        CHECK(r.branch == Branch::Sampled);
    }
    SUBCASE("a collapsed posterior reduces to the mean rule") {
        GPState gp(GPConfig{KernelSpec{KernelFamily::SquaredExponential, Eigen::VectorXd::Constant(3, 1.0), 1e4}, 1e-2});
        for (int d = 0; d < 3; ++d) {
            for (int rep = 0; rep < 3; ++rep) gp.update(Eigen::Vector3d(0.0, 0.0, d), 150.0 - 20.0 * d);
        }
        const Recommendation r = thompson_select(gp, Eigen::Vector2d(0.0, 0.0), t.eval, kAll, 112.5, 3);
        CHECK(r.dose == 2.0);  // means 150, 130, 110
    }
    SUBCASE("seeded determinism") {
        GPState gp(GPConfig{KernelSpec{KernelFamily::SquaredExponential, Eigen::VectorXd::Constant(3, 1.0), 100.0}, 1.0});
        const auto a = thompson_select(gp, Eigen::Vector2d(0.0, 0.0), t.eval, kAll, 0.0, 42);
        const auto b = thompson_select(gp, Eigen::Vector2d(0.0, 0.0), t.eval, kAll, 0.0, 42);
        CHECK(a.dose == b.dose);
        CHECK(a.score == b.score);
    }
    CHECK_THROWS_AS(thompson_select(Eigen::Vector2d(1.0, 2.0), t.eval, kAll, 0.0), Error);
}

TEST_CASE("safe Thompson selection stays inside the safe set") {
    const DoseGrid g = build_dose_grid(DoseMetric::absolute(), 10.0, 15.0, 2.0);
    const EvalGrid e = build_eval_grid(g, 2);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 15.0);
    std::normal_distribution<double> n(112.5, 40.0);
    for (int round = 0; round < 100000; ++round) {
        const double a = u(rng);
        const SafeSet s = SafeSet::from_intervals({{a, std::min(15.0, a + 0.3)}});
        const auto members = s.grid_members(e);
        if (members.empty()) continue;
        Eigen::VectorXd sample(static_cast<Eigen::Index>(members.size()));
        for (Eigen::Index i = 0; i < sample.size(); ++i) sample(i) = n(rng);
        const Recommendation r = thompson_select(sample, e, members, 112.5);
        if (!s.contains(r.dose)) FAIL("sampled dose left the safe set");
    }
}

TEST_CASE("pseudo-rewards") {
    CHECK(reward(Reward::R3, 112.5, 112.5) == 0.0);
    CHECK(reward(Reward::R3, 100.0, 112.5) == -12.5);
    CHECK(reward(Reward::R1, 112.5 + std::exp(1.0) - 1.0, 112.5) == doctest::Approx(-1.0));
    CHECK(reward(Reward::R2, 112.5, 112.5) == 0.0);
    CHECK(reward(Reward::R2, 132.5, 112.5) == doctest::Approx(1.0 - std::exp(1.0)));
}

TEST_CASE("GP-UCB selection") {
    Tiny t;
    const Recommendation single = gp_ucb_select(Eigen::Vector3d(-50.0, 0.0, 0.0), Eigen::Vector3d(1.0, 1.0, 1.0), t.eval, {0}, 3.0);
    CHECK(single.dose == 0.0);
    CHECK(single.branch == Branch::UcbArgmax);
    const Recommendation r = gp_ucb_select(Eigen::Vector3d(-10.0, -5.0, -8.0), Eigen::Vector3d(1.0, 1.0, 16.0), t.eval, kAll, 2.0);
    CHECK(r.dose == 2.0);  // -8 + 2 * 4 = 0 beats -5 + 2
}

TEST_CASE("GP-UCB on r3 is invariant to positive rescaling of the rewards") {
    KernelSpec k{KernelFamily::SquaredExponential, Eigen::VectorXd::Constant(1, 1.5), 400.0};
    const DoseGrid g = build_dose_grid(DoseMetric::absolute(), 5.0, 6.0, 2.0);
    const EvalGrid e = build_eval_grid(g, 2);
    std::vector<Eigen::Index> all(static_cast<std::size_t>(e.size()));
    for (Eigen::Index i = 0; i < e.size(); ++i) all[static_cast<std::size_t>(i)] = i;
    Eigen::MatrixXd pts(1, e.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) pts(0, i) = e.doses[static_cast<std::size_t>(i)];
    const double c = 3.7;
    KernelSpec scaled = k;
    scaled.signal_variance *= c * c;
    GPState a(GPConfig{k, 4.0});
    GPState b(GPConfig{scaled, 4.0 * c * c});
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 6.0);
    std::normal_distribution<double> noise(0.0, 2.0);
    for (int n = 0; n < 25; ++n) {
        const BatchPrediction pa = a.predict_batch(pts);
        const BatchPrediction pb = b.predict_batch(pts);
        const Recommendation ra = gp_ucb_select(pa.mean, pa.variance, e, all, 2.0);
        const Recommendation rb = gp_ucb_select(pb.mean, pb.variance, e, all, 2.0);
        CHECK(ra.dose == rb.dose);
        const double d = u(rng);
        const double r3 = reward(Reward::R3, 150.0 - 10.0 * d + noise(rng), 112.5);
        a.update(Eigen::VectorXd::Constant(1, d), r3);
        b.update(Eigen::VectorXd::Constant(1, d), c * r3);
    }
}

TEST_CASE("bolus calculator") {
    CHECK(calculator_dose({10.0, 30.0, 112.5}, 60.0, 150.0) == doctest::Approx(7.25));
    CHECK(calculator_dose({10.0, 30.0, 112.5}, 0.0, 112.5) == 0.0);
    CHECK(calculator_dose({10.0, 30.0, 112.5}, 0.0, 40.0) == 0.0);
    CHECK_THROWS_AS(calculator_dose({0.0, 30.0, 112.5}, 10.0, 100.0), Error);
    CHECK_THROWS_AS(calculator_dose({10.0, 30.0, 112.5}, -1.0, 100.0), Error);
}

TEST_CASE("random-safe selection") {
    const DoseGrid g = build_dose_grid(DoseMetric::absolute(), 10.0, 15.0, 2.0);
    const EvalGrid e = build_eval_grid(g, 2);
    CHECK(random_safe_select(SafeSet::singleton(g.doses[7]), e, 1).dose == g.doses[7]);
    CHECK_THROWS_AS(random_safe_select(SafeSet(), e, 1), Error);

    const SafeSet s = SafeSet::from_intervals({{1.99, 2.46}});  // 10 eval points
    const auto members = s.grid_members(e);
    REQUIRE(members.size() == 10);
    std::vector<int> counts(10, 0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const Recommendation r = random_safe_select(s, e, derive_seed(13, {static_cast<std::uint64_t>(i)}));
        CHECK(s.contains(r.dose));
        const auto pos = std::find(members.begin(), members.end(), r.eval_index) - members.begin();
        ++counts[static_cast<std::size_t>(pos)];
    }
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - draws / 10.0) * (c - draws / 10.0) / (draws / 10.0);
    CHECK(chi2 < 21.67);  // chi-square 0.99 quantile, 9 degrees of freedom
    CHECK(random_safe_select(s, e, 5).dose == random_safe_select(s, e, 5).dose);
}
