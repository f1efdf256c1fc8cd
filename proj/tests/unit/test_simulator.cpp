#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "execfee/closed_form.hpp"
#include "execfee/errors.hpp"
#include "execfee/simulator.hpp"

using namespace execfee;

namespace {

GridSpec small_grid() {
    GridSpec g;
    g.I = 40;
    g.J = 40;
    g.n_steps = 200;
    return g;
}

/// Control field filled from f(t, q, S) on every layer.
ControlSurface field_from(const GridSpec& g, double C, const std::function<double(double, double, double)>& f) {
    ControlSurface c(g, 1.0);
    c.C = C;
    for (int n = 0; n <= g.n_steps; ++n) {
        std::vector<double> layer(c.layer_size());
        for (int i = 0; i <= g.I; ++i) {
            for (int j = 0; j <= g.J; ++j) layer[c.index(i, j)] = f(c.time(n), g.q(j), g.S(i));
        }
        c.store_layer(n, std::move(layer));
    }
    return c;
}

SimConfig det_config(int n_steps) {
    SimConfig cfg;
    cfg.n_paths = 1;
    cfg.n_steps = n_steps;
    return cfg;
}

}  // namespace

TEST_CASE("zero control, no noise: wealth grows at the risk-free rate") {
    MarketParams p;
    p.sigma = 0.0;
    p.b = 0.0;
    p.r = 0.05;
    const auto g = small_grid();
    const auto c = field_from(g, p.C, [](double, double, double) { return 0.0; });
    const auto cfg = det_config(250);
    const std::vector<double> dw(250, 0.0);
    const auto path = simulate_path(c, p, cfg, dw);
    const double dt = p.T / cfg.n_steps;
    CHECK(path.X.back() == doctest::Approx(cfg.X0 * std::pow(1.0 + p.r * dt, cfg.n_steps)).epsilon(1e-13));
    CHECK(path.S.back() == cfg.S0);
    CHECK(path.Q.back() == cfg.q0);
    CHECK(path.A.back() == doctest::Approx(cfg.S0));
    CHECK(path.times.back() == p.T);
}

TEST_CASE("wealth, inventory and price obey the Euler recursions at r = 0") {
    MarketParams p;
    const auto g = small_grid();
    const auto c = field_from(g, p.C, [](double t, double q, double) { return 0.5 * (0.8 - q) + 0.2 * t; });
    auto cfg = det_config(200);
    const auto dw = NoiseSource(5, cfg.n_steps, p.T / cfg.n_steps).increments(0);
    const auto path = simulate_path(c, p, cfg, dw);
    const double dt = p.T / cfg.n_steps;
    double X = cfg.X0, Q = cfg.q0, S = cfg.S0, sumS = 0.0;
    for (int k = 0; k < cfg.n_steps; ++k) {
        const double v = path.v[k];
        CHECK(v == doctest::Approx(0.5 * (0.8 - Q) + 0.2 * k * dt).epsilon(1e-9));
        X -= v * (S + p.l * v) * dt;
        sumS += S;
        S += p.b * v * dt + p.sigma * dw[k];
        Q += v * dt;
    }
    CHECK(path.X.back() == doctest::Approx(X).epsilon(1e-12));
    CHECK(path.Q.back() == doctest::Approx(Q).epsilon(1e-12));
    CHECK(path.S.back() == doctest::Approx(S).epsilon(1e-12));
    CHECK(path.A.back() == doctest::Approx(sumS / cfg.n_steps).epsilon(1e-12));
    CHECK(path.clamped_steps == 0);
}

TEST_CASE("interpolate_control") {
    const auto g = small_grid();
    auto f = [](double t, double q, double S) { return 1.0 + 0.5 * q + 0.01 * S + 2.0 * t; };
    const auto c = field_from(g, 100.0, f);

    SUBCASE("exact at nodes") {
        for (int n : {0, 17, 200}) {
            for (int i : {0, 13, 40}) {
                for (int j : {0, 21, 40}) CHECK(interpolate_control(c, c.time(n), g.q(j), g.S(i)) == doctest::Approx(f(c.time(n), g.q(j), g.S(i))));
            }
        }
    }
    SUBCASE("exact on a field linear in each coordinate, midpoints included") {
        for (double t : {0.0025, 0.3333, 0.7}) {
            for (double q : {-0.99, -0.025, 0.4}) {
                for (double S : {15.75, 44.9, 71.1}) CHECK(interpolate_control(c, t, q, S) == doctest::Approx(f(t, q, S)).epsilon(1e-12));
            }
        }
    }
    SUBCASE("clamped to the hull and to the speed bound") {
        CHECK(interpolate_control(c, 0.5, 5.0, 45.0) == doctest::Approx(f(0.5, 1.0, 45.0)));
        CHECK(interpolate_control(c, 0.5, 0.0, 500.0) == doctest::Approx(f(0.5, 0.0, 75.0)));
        const auto tight = field_from(g, 1.5, f);
        CHECK(interpolate_control(tight, 0.9, 1.0, 75.0) == 1.5);
    }
}

TEST_CASE("realized_payoff examples") {
    MarketParams p;
    SimPath path;
    path.X = {0.0, 50.0};
    path.Q = {0.5, 0.8};
    path.S = {45.0, 55.0};
    path.A = {45.0, 47.0};
    const double L = p.alpha * 0.2 * 0.2;
    CHECK(realized_payoff(path, ContractSpec::make(ContractFamily::LinearPhysical, p), p) ==
          doctest::Approx(50.0 - 0.2 * 55.0 - L));
    CHECK(realized_payoff(path, ContractSpec::make(ContractFamily::LinearCash, p), p) ==
          doctest::Approx(50.0 - 0.2 * 55.0 - p.alpha * 0.64));
    CHECK(realized_payoff(path, ContractSpec::make(ContractFamily::CollarPhysical, p), p) ==
          doctest::Approx(50.0 - 50.0 + 0.8 * 55.0 - L));
    CHECK(realized_payoff(path, ContractSpec::make(ContractFamily::CollarCash, p), p) ==
          doctest::Approx(50.0 - 50.0 + 0.8 * 55.0 - p.alpha * 0.64));
    CHECK(realized_payoff(path, ContractSpec::make(ContractFamily::TwapPhysical, p), p) ==
          doctest::Approx(50.0 + 0.8 * 55.0 + (47.0 - 55.0) - L));
}

TEST_CASE("noise source") {
    const NoiseSource a(42, 1000, 1e-3), b(42, 1000, 1e-3), c(43, 1000, 1e-3);
    CHECK(a.increments(7) == b.increments(7));
    CHECK(a.increments(7) != a.increments(8));
    CHECK(a.increments(7) != c.increments(7));
    CHECK(path_seed(1, 0) != path_seed(1, 1));
    CHECK(path_seed(1, 0) != path_seed(2, 0));

    const int n = 200000;
    const double dt = 0.01;
    const auto x = NoiseSource(9, n, dt).increments(0);
    double m = 0.0;
    for (double v : x) m += v;
    m /= n;
    double var = 0.0;
    for (double v : x) var += (v - m) * (v - m);
    var /= n - 1;
    CHECK(std::abs(m) < 3.0 * std::sqrt(dt / n));
    CHECK(std::abs(var - dt) < 3.0 * dt * std::sqrt(2.0 / n));
}

TEST_CASE("count_sign_changes") {
    CHECK(count_sign_changes(std::vector<double>{}) == 0);
    CHECK(count_sign_changes(std::vector<double>{1, 2, 3}) == 0);
    CHECK(count_sign_changes(std::vector<double>{1, 0, 0, -1, 0, 2}) == 2);
    CHECK(count_sign_changes(std::vector<double>{0, -1, -2}) == 0);
}

TEST_CASE("zero-noise trajectories of the optimal policies") {
    MarketParams p;
    const GridSpec g;
    const auto cfg = det_config(g.n_steps);
    const std::vector<double> dw(static_cast<std::size_t>(cfg.n_steps), 0.0);

    const auto phys = simulate_path(extract_control(solve_contract(ContractSpec::make(ContractFamily::LinearPhysical, p), p, g)), p, cfg, dw);
    CHECK(std::abs(phys.Q.back() - p.N) < 0.02);
    CHECK(count_sign_changes(phys.v) == 0);

    const auto cash = simulate_path(extract_control(solve_contract(ContractSpec::make(ContractFamily::LinearCash, p), p, g)), p, cfg, dw);
    CHECK(count_sign_changes(cash.v) == 1);

    // Euler path driven by the closed-form feedback control.
    double Q = cfg.q0;
    const double dt = p.T / cfg.n_steps;
    for (int k = 0; k < cfg.n_steps; ++k) Q += control_closed(k * dt, Q, ContractFamily::LinearCash, p) * dt;
    CHECK(std::abs(cash.Q.back() - Q) < 5e-3);
}

TEST_CASE("Monte-Carlo estimate") {
    MarketParams p;
    const auto g = small_grid();
    const auto spec = ContractSpec::make(ContractFamily::LinearCash, p);
    const auto surface = solve_contract(spec, p, g);
    const auto control = extract_control(surface);
    SimConfig cfg;
    cfg.n_paths = 301;
    cfg.n_steps = 200;

    const auto one = evaluate_policy(surface, control, cfg, 1);
    const auto three = evaluate_policy(surface, control, cfg, 3);
    CHECK(one.estimate == three.estimate);
    CHECK(one.stderr_ == three.stderr_);
    CHECK(one.fee == surface.fee(0, cfg.q0, cfg.S0));
    CHECK(one.stderr_ > 0.0);
    CHECK(one.arbitrage == (one.estimate > 2.0 * one.stderr_));

    // Oracle: the same paths simulated one at a time.
    SimConfig start = cfg;
    start.X0 = cfg.X0 - cfg.q0 * cfg.S0 + one.fee;
    const auto noise = common_noise_batch(cfg, p.T);
    double sum = 0.0;
    for (std::int64_t k = 0; k < cfg.n_paths; ++k) {
        sum += realized_payoff(simulate_path(control, p, start, noise.increments(k)), spec, p) - cfg.X0;
    }
    CHECK(one.estimate == doctest::Approx(sum / cfg.n_paths).epsilon(1e-12));

    cfg.n_paths = 1;
    const auto single = evaluate_policy(surface, control, cfg, 4);
    CHECK(std::isnan(single.stderr_));
    CHECK_FALSE(single.arbitrage);

    cfg.n_paths = 0;
    CHECK_THROWS_AS(evaluate_policy(surface, control, cfg), Error);
}

TEST_CASE("paths leaving the grid raise OutOfGrid") {
    MarketParams p;
    const auto g = small_grid();
    const auto c = field_from(g, p.C, [](double, double, double) { return 0.0; });
    auto cfg = det_config(100);
    cfg.S0 = 100.0;
    const std::vector<double> dw(100, 0.0);
    try {
        simulate_path(c, p, cfg, dw);
        FAIL("expected OutOfGrid");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::OutOfGrid);
    }
    CHECK_THROWS_AS(simulate_path(c, p, cfg, std::vector<double>(99, 0.0)), Error);
}
