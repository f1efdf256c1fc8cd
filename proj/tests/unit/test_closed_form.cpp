#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "execfee/closed_form.hpp"
#include "execfee/errors.hpp"

using namespace execfee;

namespace {

/// Right-hand side of the coefficient ODEs in forward time, y = (h2, h1, h0).
std::array<double, 3> coefficient_rhs(const std::array<double, 3>& y, const MarketParams& p) {
    const double s2g = p.sigma * p.sigma * p.gamma;
    const double k = p.b - 2.0 * y[0];
    const double m = y[1] + p.b * p.N;
    return {-0.5 * s2g + k * k / (4.0 * p.l), s2g * p.N - k * m / (2.0 * p.l),
            -0.5 * s2g * p.N * p.N + m * m / (4.0 * p.l)};
}

/// Classical RK4 from t = T back to t with n steps.
std::array<double, 3> integrate_coefficients(double t, const MarketParams& p, int n = 200000) {
    std::array<double, 3> y{p.alpha, 0.0, 0.0};
    const double h = -(p.T - t) / n;
    auto add = [](const std::array<double, 3>& a, const std::array<double, 3>& b, double c) {
        return std::array<double, 3>{a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]};
    };
    for (int k = 0; k < n; ++k) {
        const auto k1 = coefficient_rhs(y, p);
        const auto k2 = coefficient_rhs(add(y, k1, h / 2), p);
        const auto k3 = coefficient_rhs(add(y, k2, h / 2), p);
        const auto k4 = coefficient_rhs(add(y, k3, h), p);
        for (int c = 0; c < 3; ++c) y[c] += h / 6.0 * (k1[c] + 2 * k2[c] + 2 * k3[c] + k4[c]);
    }
    return y;
}

}  // namespace

TEST_CASE("Riccati constants at baseline") {
    MarketParams p;
    const auto k = RiccatiConstants::make(p);
    CHECK(k.a == doctest::Approx(std::sqrt(0.001 / 2.0 * 25.0 * 0.01)).epsilon(1e-14));
    CHECK(k.xi_in_unit);
    CHECK(k.xi == doctest::Approx((0.1995 - k.a) / (0.1995 + k.a)).epsilon(1e-14));
}

TEST_CASE("riccati_theta examples") {
    MarketParams p;
    CHECK(riccati_theta(p.T, p) == doctest::Approx(p.alpha - p.b / 2).epsilon(1e-14));
    CHECK(riccati_h2(p.T, p) == doctest::Approx(p.alpha).epsilon(1e-14));

    const auto k = RiccatiConstants::make(p);
    const double e = std::exp(-2.0 * k.a / p.l * p.T);
    CHECK(e < 1e-9);
    CHECK(riccati_theta(0.0, p) == doctest::Approx(k.a * (1 + k.xi * e) / (1 - k.xi * e)).epsilon(1e-12));
    CHECK(riccati_theta(0.0, p) == doctest::Approx(k.a).epsilon(1e-8));
}

TEST_CASE("small-sigma limit of theta is alpha' l / (l + alpha' (T - t))") {
    MarketParams p;
    p.sigma = 1e-7;
    const double ae = p.alpha - p.b / 2;
    for (double t : {0.0, 0.3, 0.9, 1.0}) {
        CHECK(riccati_theta(t, p) == doctest::Approx(ae * p.l / (p.l + ae * (p.T - t))).epsilon(1e-6));
    }
}

TEST_CASE("closed-form coefficients agree with RK4 integration of the coefficient ODEs") {
    for (double sigma : {1.0, 5.0}) {
        for (double alpha : {0.002, 0.02, 0.2}) {
            MarketParams p;
            p.sigma = sigma;
            p.alpha = alpha;
            for (double t : {0.0, 0.5, 0.95}) {
                const auto ode = integrate_coefficients(t, p);
                const auto c = trs_coefficients(t, p);
                CAPTURE(sigma);
                CAPTURE(alpha);
                CAPTURE(t);
                CHECK(c.h2 == doctest::Approx(ode[0]).epsilon(1e-9));
                CHECK(std::abs(c.h1 - ode[1]) < 1e-9);
                CHECK(std::abs(c.h0 - ode[2]) < 1e-7);
            }
        }
    }
}

TEST_CASE("finite-difference ODE residuals") {
    MarketParams p;
    const double s2g = p.sigma * p.sigma * p.gamma;
    const double eps = 1e-5;
    for (double t = 0.05; t < 0.96; t += 0.1) {
        const double h2 = riccati_h2(t, p);
        const double dh2 = (riccati_h2(t + eps, p) - riccati_h2(t - eps, p)) / (2 * eps);
        const double k = p.b - 2 * h2;
        CHECK(std::abs(dh2 - (-0.5 * s2g + k * k / (4 * p.l))) < 1e-7);

        const double h1 = trs_h1(t, p);
        const double dh1 = (trs_h1(t + eps, p) - trs_h1(t - eps, p)) / (2 * eps);
        CHECK(std::abs(dh1 - (s2g * p.N - k * (h1 + p.b * p.N) / (2 * p.l))) < 1e-6);

        const double dh0 = (trs_coefficients(t + eps, p).h0 - trs_coefficients(t - eps, p).h0) / (2 * eps);
        const double m = h1 + p.b * p.N;
        CHECK(std::abs(dh0 - (-0.5 * s2g * p.N * p.N + m * m / (4 * p.l))) < 1e-6);
    }
}

TEST_CASE("fee_physical_closed examples") {
    MarketParams p;
    CHECK(std::abs(fee_physical_closed(0.0, 0.5, 45.0, p) - 45.0029) < 5e-4);
    CHECK(fee_physical_closed(p.T, p.N, 37.0, p) == doctest::Approx(p.N * 37.0));
    CHECK(fee_physical_closed(p.T, 0.0, 45.0, p) == doctest::Approx(45.0 + p.alpha * p.N * p.N));
}

TEST_CASE("fee_trs_closed examples") {
    MarketParams p;
    CHECK(std::abs(fee_trs_closed(0.0, 0.5, 45.0, p) - 45.0130) < 5e-4);
    CHECK(fee_trs_closed(p.T, 0.0, 45.0, p) == doctest::Approx(45.0));
    for (double q : {-1.0, 0.3, 2.0}) {
        CHECK(fee_trs_closed(p.T, q, 45.0, p) == doctest::Approx(45.0 + p.alpha * q * q));
    }
}

TEST_CASE("closed fees minus N S do not depend on S") {
    MarketParams p;
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(10.0, 90.0);
    const double ref_phys = fee_physical_closed(0.2, 0.3, 45.0, p) - 45.0;
    const double ref_cash = fee_trs_closed(0.2, 0.3, 45.0, p) - 45.0;
    for (int k = 0; k < 20; ++k) {
        const double S = u(gen);
        CHECK(fee_physical_closed(0.2, 0.3, S, p) - p.N * S == doctest::Approx(ref_phys).epsilon(1e-9));
        CHECK(fee_trs_closed(0.2, 0.3, S, p) - p.N * S == doctest::Approx(ref_cash).epsilon(1e-9));
    }
}

TEST_CASE("control_closed examples") {
    MarketParams p;
    for (double t : {0.0, 0.5, 0.99}) CHECK(control_closed(t, p.N, ContractFamily::LinearPhysical, p) == 0.0);

    // Central finite difference of the closed fee in q as oracle.
    for (auto family : {ContractFamily::LinearPhysical, ContractFamily::LinearCash}) {
        for (double q : {0.0, 0.5}) {
            const double h = 1e-5;
            auto fee = [&](double x) {
                return family == ContractFamily::LinearPhysical ? fee_physical_closed(0.0, x, 45.0, p)
                                                                : fee_trs_closed(0.0, x, 45.0, p);
            };
            const double dq = (fee(q + h) - fee(q - h)) / (2 * h);
            const double v = (p.b * q - p.b * p.N - dq) / (2 * p.l);
            CHECK(v > 0.0);
            CHECK(std::abs(control_closed(0.0, q, family, p) - std::clamp(v, -p.C, p.C)) < 1e-5);
        }
    }
    CHECK(control_closed(0.0, -50.0, ContractFamily::LinearPhysical, p) == p.C);
    CHECK(control_closed(0.0, 50.0, ContractFamily::LinearPhysical, p) == -p.C);
    CHECK(control_closed(0.95, 1.0, ContractFamily::LinearCash, p) == -p.C);
    CHECK_THROWS_AS(control_closed(0.0, 0.5, ContractFamily::CollarCash, p), Error);
}

TEST_CASE("regime guards") {
    MarketParams p;
    p.mu = 0.1;
    CHECK_THROWS_WITH_AS(fee_physical_closed(0, 0.5, 45, p), doctest::Contains("InvalidRegime"), Error);
    p = MarketParams{};
    p.r = 0.01;
    CHECK_THROWS_AS(fee_trs_closed(0, 0.5, 45, p), Error);
    p = MarketParams{};
    p.b = 1.0;
    p.alpha = 0.0;
    try {
        riccati_theta(0.0, p);
        FAIL("expected DegenerateRiccati");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateRiccati);
    }
    // xi < 0 is still a regular solution of the coefficient ODEs.
    p = MarketParams{};
    p.alpha = 0.002;
    CHECK_FALSE(RiccatiConstants::make(p).xi_in_unit);
    const auto ode = integrate_coefficients(0.0, p);
    CHECK(std::abs(fee_trs_closed(0.0, 0.5, 45.0, p) - (45.0 + ode[2] + ode[1] * 0.5 + ode[0] * 0.25)) < 1e-7);
}
