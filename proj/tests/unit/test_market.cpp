#include <doctest.h>

#include <cmath>
#include <random>

#include "execfee/errors.hpp"
#include "execfee/market.hpp"

using namespace execfee;

TEST_CASE("liquidation_cost examples") {
    CHECK(liquidation_cost(1.0, 1.0, 0.2) == 0.0);
    CHECK(liquidation_cost(0.0, 1.0, 0.2) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(liquidation_cost(0.5, 0.0, 0.2) == doctest::Approx(0.05).epsilon(1e-15));
}

TEST_CASE("liquidation_cost is nonnegative, zero at target and symmetric") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int k = 0; k < 1000; ++k) {
        const double target = u(gen), d = u(gen), alpha = std::abs(u(gen));
        CHECK(liquidation_cost(target + d, target, alpha) >= 0.0);
        CHECK(liquidation_cost(target + d, target, alpha) == doctest::Approx(liquidation_cost(target - d, target, alpha)));
        CHECK(liquidation_cost(target, target, alpha) == 0.0);
    }
}

TEST_CASE("payoff_pi examples") {
    MarketParams p;
    CHECK(payoff_pi(ContractSpec::make(ContractFamily::LinearPhysical, p), 45.0, 1.0) == 45.0);
    const auto collar = ContractSpec::make(ContractFamily::CollarCash, p, 40.0, 50.0);
    CHECK(payoff_pi(collar, 45.0, 1.0) == 45.0);
    CHECK(payoff_pi(collar, 55.0, 1.0) == 50.0);
    CHECK(payoff_pi(collar, 35.0, 1.0) == 40.0);
    CHECK(payoff_pi(ContractSpec::make(ContractFamily::TwapCash, p), 45.0, 2.0) == 90.0);
}

TEST_CASE("payoff_pi is Lipschitz with constant N; collar is monotone and flat outside the band") {
    MarketParams p;
    p.N = 1.7;
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (auto f : kAllFamilies) {
        const auto spec = ContractSpec::make(f, p);
        for (int k = 0; k < 500; ++k) {
            const double s1 = u(gen), s2 = u(gen);
            CHECK(std::abs(payoff_pi(spec, s1, p.N) - payoff_pi(spec, s2, p.N)) <= p.N * std::abs(s1 - s2) + 1e-12);
        }
    }
    for (double s = 0.0; s < 100.0; s += 0.5) {
        CHECK(collar_z(s + 0.5, 40.0, 50.0) >= collar_z(s, 40.0, 50.0));
        if (s + 0.5 <= 40.0) CHECK(collar_z(s, 40.0, 50.0) == 40.0);
        if (s >= 50.0) CHECK(collar_z(s, 40.0, 50.0) == 50.0);
    }
}

TEST_CASE("terminal_fee examples") {
    MarketParams p;
    CHECK(terminal_fee(ContractSpec::make(ContractFamily::LinearPhysical, p), 1.0, 45.0, p) == 45.0);
    CHECK(terminal_fee(ContractSpec::make(ContractFamily::LinearCash, p), 0.5, 45.0, p) == doctest::Approx(45.05));
    CHECK(terminal_fee(ContractSpec::make(ContractFamily::CollarPhysical, p), 1.0, 55.0, p) == 50.0);
}

TEST_CASE("validation rejects invalid inputs") {
    MarketParams p;
    CHECK_NOTHROW(p.validate());
    for (auto mutate : {+[](MarketParams& m) { m.l = 0.0; }, +[](MarketParams& m) { m.sigma = -1.0; },
                        +[](MarketParams& m) { m.gamma = 0.0; }, +[](MarketParams& m) { m.alpha = -0.1; },
                        +[](MarketParams& m) { m.C = 0.0; }, +[](MarketParams& m) { m.T = 0.0; },
                        +[](MarketParams& m) { m.N = -1.0; }, +[](MarketParams& m) { m.b = NAN; }}) {
        MarketParams bad = p;
        mutate(bad);
        CHECK_THROWS_AS(bad.validate(), Error);
    }

    auto collar = ContractSpec::make(ContractFamily::CollarCash, p, 50.0, 40.0);
    CHECK_THROWS_AS(collar.validate(p), Error);
    auto cash = ContractSpec::make(ContractFamily::LinearCash, p);
    CHECK(cash.liquidation_target == 0.0);
    cash.liquidation_target = 1.0;
    CHECK_THROWS_AS(cash.validate(p), Error);
    CHECK(ContractSpec::make(ContractFamily::TwapPhysical, p).liquidation_target == p.N);

    GridSpec g;
    CHECK_NOTHROW(g.validate());
    CHECK(g.dS() == doctest::Approx(0.6));
    CHECK(g.dq() == doctest::Approx(0.02));
    CHECK(g.S(50) == doctest::Approx(45.0));
    CHECK(g.q(75) == doctest::Approx(0.5));
    GridSpec bad = g;
    bad.I = 1;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = g;
    bad.q_max = bad.q_min;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = g;
    bad.n_steps = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("family names round-trip") {
    for (auto f : kAllFamilies) CHECK(parse_family(to_string(f)) == f);
    CHECK_THROWS_AS(parse_family("Swap"), Error);
}
