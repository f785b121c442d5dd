#include <doctest.h>

#include <cmath>
#include <random>

#include "escada/errors.hpp"
#include "escada/kernel.hpp"

using namespace escada;

namespace {

KernelSpec unit(KernelFamily family, int dim = 1) {
    KernelSpec k;
    k.family = family;
    k.lengthscales = Eigen::VectorXd::Ones(dim);
    k.signal_variance = 1.0;
    return k;
}

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

}  // namespace

TEST_CASE("kernel_eval at identical points returns the signal variance") {
    for (auto fam : {KernelFamily::SquaredExponential, KernelFamily::Laplacian}) {
        KernelSpec k = unit(fam, 3);
        k.signal_variance = 2.5;
        const Eigen::Vector3d x(0.3, -1.0, 4.0);
        CHECK(kernel_eval(k, x, x) == doctest::Approx(2.5).epsilon(1e-15));
    }
}

TEST_CASE("squared-exponential at unit distance is exp(-1/2)") {
    CHECK(kernel_eval(unit(KernelFamily::SquaredExponential), v1(0.0), v1(1.0)) ==
          doctest::Approx(0.6065306597126334).epsilon(1e-14));
}

TEST_CASE("laplacian at distance two is exp(-2)") {
    CHECK(kernel_eval(unit(KernelFamily::Laplacian), v1(0.0), v1(2.0)) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
}

TEST_CASE("kernel_eval rejects mismatched dimensions") {
    const KernelSpec k = unit(KernelFamily::SquaredExponential, 2);
    try {
        (void)kernel_eval(k, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero());
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DimensionMismatch);
    }
}

TEST_CASE("kernel spec validation") {
    KernelSpec k = unit(KernelFamily::SquaredExponential, 2);
    k.lengthscales(1) = 0.0;
    CHECK_THROWS_AS(k.validate(), Error);
    k = unit(KernelFamily::Laplacian);
    k.signal_variance = -1.0;
    CHECK_THROWS_AS(k.validate(), Error);
    CHECK(kernel_family_from_string("laplacian") == KernelFamily::Laplacian);
    CHECK(to_string(KernelFamily::SquaredExponential) == "squared-exponential");
    CHECK_THROWS_AS(kernel_family_from_string("matern"), Error);
    CHECK_THROWS_AS(LipschitzCertificate(-1.0), Error);
}

TEST_CASE("kernel_metric basics") {
    const KernelSpec se = unit(KernelFamily::SquaredExponential);
    CHECK(kernel_metric(se, v1(3.0), v1(3.0)) == 0.0);
    // With k = exp(-r^2 / 2), the value sqrt(2 - 2/e) is reached at |r| = sqrt(2).
    CHECK(kernel_metric(se, v1(0.0), v1(std::sqrt(2.0))) == doctest::Approx(std::sqrt(2.0 - 2.0 * std::exp(-1.0))).epsilon(1e-14));
    CHECK(kernel_metric(se, v1(0.0), v1(1.0)) == doctest::Approx(std::sqrt(2.0 - 2.0 * std::exp(-0.5))).epsilon(1e-14));
    CHECK(kernel_metric(se, v1(0.0), v1(50.0)) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("kernel metric satisfies the metric axioms on random samples") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (auto fam : {KernelFamily::SquaredExponential, KernelFamily::Laplacian}) {
        KernelSpec k = unit(fam, 3);
        k.lengthscales << 0.7, 1.3, 2.0;
        k.signal_variance = 1.7;
        for (int i = 0; i < 2000; ++i) {
            const Eigen::Vector3d a(u(rng), u(rng), u(rng));
            const Eigen::Vector3d b(u(rng), u(rng), u(rng));
            const Eigen::Vector3d c(u(rng), u(rng), u(rng));
            const double ab = kernel_metric(k, a, b);
            CHECK(kernel_metric(k, a, a) == 0.0);
            CHECK(ab == doctest::Approx(kernel_metric(k, b, a)).epsilon(1e-14));
            CHECK(ab <= kernel_metric(k, a, c) + kernel_metric(k, c, b) + 1e-9);
        }
    }
}

TEST_CASE("dose metric depends only on the dose gap and increases with it") {
    for (auto fam : {KernelFamily::SquaredExponential, KernelFamily::Laplacian}) {
        KernelSpec k = unit(fam, 3);
        k.lengthscales << 30.0, 30.0, 4.0;
        k.signal_variance = 9.0;
        const Eigen::Vector3d z1(40.0, 120.0, 0.0);
        const Eigen::Vector3d z2(70.0, 101.0, 0.0);
        double prev = 0.0;
        for (double gap = 0.05; gap < 15.0; gap += 0.05) {
            Eigen::Vector3d a = z1, b = z1, c = z2, d = z2;
            a(2) = 1.0;
            b(2) = 1.0 + gap;
            c(2) = 7.0;
            d(2) = 7.0 + gap;
            const double q1 = kernel_metric(k, a, b);
            CHECK(q1 == doctest::Approx(kernel_metric(k, c, d)).epsilon(1e-12));
            CHECK(q1 == doctest::Approx(dose_metric_profile(k, gap)).epsilon(1e-12));
            CHECK(q1 > prev);
            prev = q1;
        }
    }
}

TEST_CASE("inverse dose metric") {
    const KernelSpec se = unit(KernelFamily::SquaredExponential);
    CHECK(inverse_dose_metric(se, 0.0) == 0.0);
    CHECK(inverse_dose_metric(se, std::sqrt(2.0 - 2.0 * std::exp(-1.0))) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(inverse_dose_metric(se, std::sqrt(2.0 - 2.0 * std::exp(-0.5))) == doctest::Approx(1.0).epsilon(1e-12));

    SUBCASE("saturation at or above the supremum") {
        try {
            (void)inverse_dose_metric(se, std::sqrt(2.0));
            FAIL("expected saturation");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Saturation);
        }
        CHECK_THROWS_AS(inverse_dose_metric(se, -0.1), Error);
    }

    SUBCASE("round trip and bisection agreement for both families") {
        std::mt19937_64 rng(11);
        for (auto fam : {KernelFamily::SquaredExponential, KernelFamily::Laplacian}) {
            KernelSpec k = unit(fam);
            k.lengthscales(0) = 2.5;
            k.signal_variance = 3.0;
            std::uniform_real_distribution<double> gap(0.0, 12.0);
            for (int i = 0; i < 500; ++i) {
                const double d = gap(rng);
                const double rho = dose_metric_profile(k, d);
                if (rho >= 0.99 * dose_metric_supremum(k)) continue;
                CHECK(dose_metric_profile(k, inverse_dose_metric(k, rho)) == doctest::Approx(rho).epsilon(1e-9));
                CHECK(std::abs(inverse_dose_metric(k, rho) - d) <= 1e-9 * std::max(1.0, d));
                const double b = invert_by_bisection([&](double x) { return dose_metric_profile(k, x); }, rho);
                CHECK(std::abs(b - inverse_dose_metric(k, rho)) <= 1e-9);
            }
        }
    }
}

TEST_CASE("DoseMetric wrappers") {
    const DoseMetric abs = DoseMetric::absolute(2.0);
    CHECK(abs.is_absolute());
    CHECK(abs.distance(1.0, 4.0) == 6.0);
    CHECK(abs.inverse(6.0) == 3.0);
    CHECK(std::isinf(abs.supremum()));

    const KernelSpec se = unit(KernelFamily::SquaredExponential);
    const DoseMetric km = DoseMetric::kernel_induced(se);
    CHECK_FALSE(km.is_absolute());
    CHECK(km.distance(0.0, 1.0) == doctest::Approx(std::sqrt(2.0 - 2.0 * std::exp(-0.5))));
    CHECK(km.supremum() == doctest::Approx(std::sqrt(2.0)));
    CHECK(km.inverse(km.profile(0.8)) == doctest::Approx(0.8).epsilon(1e-12));
}
