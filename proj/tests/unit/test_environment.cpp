#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "escada/environment.hpp"
#include "escada/errors.hpp"

using namespace escada;

namespace {

ResponseModel linear_model(double cf, double icr, double offset = 0.0) {
    ResponseModel m;
    m.patient.cf = cf;
    m.patient.icr = icr;
    m.patient.offset = offset;
    m.patient.tuned = {icr, cf, m.problem.target};
    m.patient.calculator = m.patient.tuned;
    return m;
}

double ks_uniform(std::vector<double> xs, double lo, double hi) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = (xs[i] - lo) / (hi - lo);
        d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
    }
    return d;
}

}  // namespace

TEST_CASE("linear response examples") {
    // CHO * CF / ICR = 0, so the zero-dose response is the fasting level.
    const ResponseModel m = linear_model(10.0, 12.0);
    const MealEvent z{0.0, 160.0};
    CHECK(true_response(m, z, 0.0) == doctest::Approx(160.0));
    CHECK(true_response(m, z, 4.75) == doctest::Approx(112.5));
    CHECK(optimal_dose(m, z) == doctest::Approx(4.75).epsilon(1e-12));
    CHECK(true_response(m, z, 1.0) == true_response(m, z, 1.0));
    CHECK_THROWS_AS(true_response(m, z, 15.5), Error);
    CHECK_THROWS_AS(true_response(m, z, -0.1), Error);

    const MealEvent heavy{60.0, 150.0};
    const ResponseModel p = linear_model(30.0, 10.0, 5.0);
    CHECK(p.baseline(heavy) == doctest::Approx(150.0 + 180.0 + 5.0));
    CHECK(true_response(p, heavy, 15.0) == 0.0);  // clipped at the floor
}

TEST_CASE("analytic optimal doses match a fine scan") {
    for (const ResponseFamily fam : {ResponseFamily::LinearCF, ResponseFamily::Saturating}) {
        for (std::uint64_t s = 0; s < 20; ++s) {
            ResponseModel m = linear_model(0, 0);
            m.family = fam;
            m.patient = sample_patient(PatientRanges{}, m.problem.target, s);
            const auto events = sample_meal_events(3, 100 + s);
            for (const auto& z : events) {
                const double d = optimal_dose(m, z);
                REQUIRE(d >= 0.0);
                REQUIRE(d <= m.problem.max_dose);
                double best = 1e300;
                for (int i = 0; i <= 150000; ++i) {
                    best = std::min(best, std::abs(true_response(m, z, 15.0 * i / 150000.0) - m.problem.target));
                }
                CHECK(std::abs(true_response(m, z, d) - m.problem.target) <= best + 1e-9);
            }
        }
    }
}

TEST_CASE("observations") {
    ResponseModel m = linear_model(30.0, 12.0);
    const MealEvent z{50.0, 120.0};
    m.noise_variance = 0.0;
    CHECK(observe(m, z, 3.0, 7, 0) == true_response(m, z, 3.0));
    m.noise_variance = 25.0;
    CHECK(observe(m, z, 3.0, 7, 4) == observe(m, z, 3.0, 7, 4));
    CHECK(observe(m, z, 3.0, 7, 4) != observe(m, z, 3.0, 7, 5));
    const double f = true_response(m, z, 3.0);
    double sum = 0.0, sq = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double e = observe(m, z, 3.0, 11, static_cast<std::uint64_t>(i)) - f;
        sum += e;
        sq += e * e;
    }
    const double mean = sum / n;
    const double var = (sq - n * mean * mean) / (n - 1);
    CHECK(std::abs(mean) < 0.2);
    CHECK(std::abs(var - 25.0) < 0.05 * 25.0);
}

TEST_CASE("meal events") {
    const MealEventRanges r;
    const auto a = sample_meal_events(2000, 5, r);
    REQUIRE(a.size() == 2000);
    std::vector<double> cho, fg;
    for (const auto& z : a) {
        CHECK(z.cho >= 20.0);
        CHECK(z.cho <= 80.0);
        CHECK(z.fasting_glucose >= 100.0);
        CHECK(z.fasting_glucose <= 150.0);
        cho.push_back(z.cho);
        fg.push_back(z.fasting_glucose);
    }
    // 1.63 / sqrt(n) is the 1% critical value of the KS statistic.
    CHECK(ks_uniform(cho, 20.0, 80.0) < 1.63 / std::sqrt(2000.0));
    CHECK(ks_uniform(fg, 100.0, 150.0) < 1.63 / std::sqrt(2000.0));
    const auto b = sample_meal_events(2000, 5, r);
    CHECK(std::equal(a.begin(), a.end(), b.begin(), [](const MealEvent& x, const MealEvent& y) {
        return x.cho == y.cho && x.fasting_glucose == y.fasting_glucose;
    }));
    CHECK(a[0].context().size() == 2);
    CHECK(a[0].context()(0) == a[0].cho);
}

TEST_CASE("patients") {
    const PatientRanges r;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const PatientParams p = sample_patient(r, 112.5, s);
        CHECK(p.cf >= 25.0);
        CHECK(p.cf <= 45.0);
        CHECK(p.icr >= 10.0);
        CHECK(p.icr <= 16.0);
        CHECK(p.tuned.cf == p.cf);
        CHECK(p.tuned.icr == p.icr);
        for (const double ratio : {p.calculator.cf / p.cf, p.calculator.icr / p.icr}) {
            CHECK(ratio >= 0.7);
            CHECK(ratio <= 1.3);
        }
    }
}

TEST_CASE("Lipschitz certificate and audit") {
    ResponseModel m = linear_model(40.0, 12.0);
    const auto events = sample_meal_events(30, 3);
    CHECK(m.slope_bound(events) == doctest::Approx(40.0));
    const double l = certify_lipschitz(m, DoseMetric::absolute(), 1.25, events);
    CHECK(l == doctest::Approx(50.0));
    const LipschitzAudit ok = audit_lipschitz(m, DoseMetric::absolute(), l, 2000, 1);
    CHECK(ok.pass);
    CHECK(ok.worst_ratio <= 40.0 + 1e-9);

    // Undercertified: a constant of CF / 2 is exceeded about twofold on unclipped pairs.
    ResponseModel gentle = linear_model(8.0, 12.0);
    const LipschitzAudit bad = audit_lipschitz(gentle, DoseMetric::absolute(), 4.0, 2000, 1);
    CHECK_FALSE(bad.pass);
    CHECK(bad.excess == doctest::Approx(2.0).epsilon(1e-6));

    CHECK_THROWS_AS(audit_lipschitz(m, DoseMetric::absolute(), l, 999, 1), Error);

    // A response that never changes passes with any nonnegative constant.
    ResponseModel flat = linear_model(1e-9, 12.0);
    flat.problem.max_dose = 15.0;
    CHECK(audit_lipschitz(flat, DoseMetric::absolute(), 1e-6, 1000, 2).pass);
}

TEST_CASE("gp-sampled truth") {
    KernelSpec k;
    k.lengthscales = Eigen::Vector3d(30.0, 30.0, 4.0);
    k.signal_variance = 900.0;
    const GpTruth g = GpTruth::sample(k, 1000, 112.5, 9);
    const GpTruth h = GpTruth::sample(k, 1000, 112.5, 9);
    const Eigen::Vector3d x(50.0, 120.0, 3.0);
    CHECK(g.eval(x) == h.eval(x));
    CHECK(g.features() == 1000);
    const GpTruth r = GpTruth::from_json(g.to_json());
    CHECK(r.eval(x) == g.eval(x));
    CHECK(r.dose_derivative(x) == g.dose_derivative(x));
    const double step = 1e-5;
    const double fd = (g.eval(Eigen::Vector3d(50.0, 120.0, 3.0 + step)) - g.eval(Eigen::Vector3d(50.0, 120.0, 3.0 - step))) / (2 * step);
    CHECK(g.dose_derivative(x) == doctest::Approx(fd).epsilon(1e-5));
    CHECK_THROWS_AS(GpTruth::from_json("{\"version\": 99}"), Error);

    // The empirical variance of the sample path over many seeds matches the kernel.
    double sq = 0.0;
    for (std::uint64_t s = 0; s < 400; ++s) {
        const double v = GpTruth::sample(k, 1000, 0.0, s).eval(x);
        sq += v * v;
    }
    CHECK(sq / 400.0 == doctest::Approx(900.0).epsilon(0.2));
}

TEST_CASE("initial safe sets") {
    const DoseGrid grid = build_dose_grid(DoseMetric::absolute(), 50.0, 15.0, 15.0);
    SUBCASE("oracle draws are truly safe anchors") {
        for (std::uint64_t s = 0; s < 100; ++s) {
            ResponseModel m = linear_model(0, 0);
            m.patient = sample_patient(PatientRanges{}, 112.5, s);
            const MealEvent z = sample_meal_events(1, s)[0];
            const SafeSet s0 = initial_safe_set(m, z, InitMode::Oracle, grid, s);
            REQUIRE(s0.intervals().size() == 1);
            const double d = s0.lowest();
            CHECK(std::find(grid.doses.begin(), grid.doses.end(), d) != grid.doses.end());
            const double f = true_response(m, z, d);
            CHECK(f >= 70.0);
            CHECK(f <= 180.0);
        }
    }
    SUBCASE("tuned calculator is safe on nearly every context") {
        int safe = 0;
        const int total = 1000;
        for (int s = 0; s < total; ++s) {
            ResponseModel m = linear_model(0, 0);
            m.patient = sample_patient(PatientRanges{}, 112.5, static_cast<std::uint64_t>(s));
            const MealEvent z = sample_meal_events(1, 1000 + s)[0];
            const SafeSet s0 = initial_safe_set(m, z, InitMode::TunedCalculator, grid, 0);
            const double f = true_response(m, z, s0.lowest());
            safe += (f >= 70.0 && f <= 180.0) ? 1 : 0;
        }
        CHECK(safe >= 990);
    }
    SUBCASE("fixed mode snaps to the nearest anchor") {
        const ResponseModel m = linear_model(30.0, 12.0);
        const SafeSet s0 = initial_safe_set(m, MealEvent{}, InitMode::Fixed, grid, 0, 2.0 + 0.4 * grid.dose_step);
        CHECK(s0.lowest() == doctest::Approx(grid.doses[static_cast<std::size_t>(std::llround((2.0 + 0.4 * grid.dose_step) / grid.dose_step))]));
    }
    SUBCASE("no safe anchor") {
        ResponseModel m = linear_model(1.0, 12.0, 400.0);  // always above the band
        CHECK_THROWS_AS(initial_safe_set(m, MealEvent{}, InitMode::Oracle, grid, 0), Error);
    }
    CHECK(init_mode_from_string(to_string(InitMode::TunedCalculator)) == InitMode::TunedCalculator);
    CHECK_THROWS_AS(init_mode_from_string("guess"), Error);
}

TEST_CASE("problem validation") {
    ProblemSpec p;
    CHECK_NOTHROW(p.validate());
    p.t_min = 200.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = ProblemSpec{};
    p.max_dose = 0.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = ProblemSpec{};
    p.epsilon = -1.0;
    CHECK_THROWS_AS(p.validate(), Error);
    CHECK(response_family_from_string(to_string(ResponseFamily::GpSampled)) == ResponseFamily::GpSampled);
    CHECK_THROWS_AS(response_family_from_string("cubic"), Error);
}
