#include "execfee/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>
#include <fmt/format.h>

#include "execfee/errors.hpp"

namespace execfee {

void SimConfig::validate() const {
    if (n_paths < 1) throw Error(ErrorKind::InvalidArgument, fmt::format("n_paths must be >= 1 (got {})", n_paths));
    if (n_steps < 1) throw Error(ErrorKind::InvalidArgument, fmt::format("n_steps must be >= 1 (got {})", n_steps));
    for (double x : {X0, q0, S0}) {
        if (!std::isfinite(x)) throw Error(ErrorKind::InvalidArgument, "X0, q0 and S0 must be finite");
    }
}

std::uint64_t path_seed(std::uint64_t seed, std::int64_t path) noexcept {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(path) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

NoiseSource::NoiseSource(std::uint64_t seed, int n_steps, double dt) : seed_(seed), n_steps_(n_steps), dt_(dt) {}

void NoiseSource::fill(std::int64_t path, std::span<double> out) const {
    std::mt19937_64 gen(path_seed(seed_, path));
    std::normal_distribution<double> normal(0.0, std::sqrt(dt_));
    for (auto& x : out) x = normal(gen);
}

std::vector<double> NoiseSource::increments(std::int64_t path) const {
    std::vector<double> out(static_cast<std::size_t>(n_steps_));
    fill(path, out);
    return out;
}

NoiseSource common_noise_batch(const SimConfig& cfg, double horizon) {
    cfg.validate();
    return NoiseSource(cfg.seed, cfg.n_steps, horizon / cfg.n_steps);
}

double interpolate_control(const ControlSurface& control, double t, double q, double S) {
    const int n_steps = control.grid().n_steps;
    const double x = std::clamp(t / control.dt(), 0.0, static_cast<double>(n_steps));
    int n0 = static_cast<int>(std::floor(x));
    double w = x - n0;
    if (w < 1e-9) {
        w = 0.0;
    } else if (w > 1.0 - 1e-9) {
        ++n0;
        w = 0.0;
    }
    n0 = std::min(n0, n_steps);
    double v = control.sample(n0, q, S);
    if (w > 0.0) v = (1.0 - w) * v + w * control.sample(n0 + 1, q, S);
    return std::clamp(v, -control.C, control.C);
}

SimPath simulate_path(const ControlSurface& control, const MarketParams& params, const SimConfig& cfg,
                      std::span<const double> increments) {
    const int K = cfg.n_steps;
    if (increments.size() != static_cast<std::size_t>(K)) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("expected {} increments, got {}", K, increments.size()));
    }
    const auto& g = control.grid();
    const double dt = params.T / K;
    SimPath p;
    p.times.resize(K + 1);
    p.S.resize(K + 1);
    p.Q.resize(K + 1);
    p.X.resize(K + 1);
    p.A.resize(K + 1);
    p.v.resize(K);
    p.increments.assign(increments.begin(), increments.end());
    p.S[0] = cfg.S0;
    p.Q[0] = cfg.q0;
    p.X[0] = cfg.X0;
    p.A[0] = cfg.S0;
    double running = 0.0;
    for (int k = 0; k < K; ++k) {
        const double t = k * dt;
        p.times[k] = t;
        const double S = p.S[k];
        const double Q = p.Q[k];
        if (S < g.s_min || S > g.s_max || Q < g.q_min - 1e-12 || Q > g.q_max + 1e-12) ++p.clamped_steps;
        const double v = interpolate_control(control, t, Q, S);
        p.v[k] = v;
        p.S[k + 1] = S + (params.mu + params.b * v) * dt + params.sigma * increments[k];
        p.X[k + 1] = p.X[k] + (params.r * p.X[k] - v * (S + params.l * v)) * dt;
        p.Q[k + 1] = Q + v * dt;
        running += S;
        p.A[k + 1] = running / (k + 1);
    }
    p.times[K] = params.T;
    if (p.clamped_steps * 100 > K) {
        throw Error(ErrorKind::OutOfGrid,
                    fmt::format("path left the grid hull on {} of {} steps", p.clamped_steps, K));
    }
    return p;
}

double realized_payoff(const SimPath& path, const ContractSpec& spec, const MarketParams& params) {
    const double X = path.X.back();
    const double Q = path.Q.back();
    const double S = path.S.back();
    const double L = liquidation_cost(Q, spec.liquidation_target, params.alpha);
    const double N = params.N;
    switch (spec.family) {
        case ContractFamily::LinearPhysical:
        case ContractFamily::LinearCash:
            return X - (N - Q) * S - L;
        case ContractFamily::CollarCash:
        case ContractFamily::CollarPhysical:
            return X - N * collar_z(S, spec.K1, spec.K2) + Q * S - L;
        case ContractFamily::TwapPhysical:
        case ContractFamily::TwapCash:
            return X + Q * S + N * (path.A.back() - S) - L;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

PayoffEstimate evaluate_policy(const FeeSurface& surface, const ControlSurface& control, const SimConfig& cfg,
                               int threads) {
    cfg.validate();
    const auto& params = surface.params;
    const double fee = surface.fee(0, cfg.q0, cfg.S0, cfg.S0);
    SimConfig start = cfg;
    start.X0 = cfg.X0 - cfg.q0 * cfg.S0 + fee;
    const auto noise = common_noise_batch(cfg, params.T);

    std::vector<double> y(static_cast<std::size_t>(cfg.n_paths));
    std::vector<std::string> errors(static_cast<std::size_t>(std::max(threads, 1)));
    auto work = [&](int worker, std::int64_t lo, std::int64_t hi) {
        try {
            std::vector<double> dw(static_cast<std::size_t>(cfg.n_steps));
            for (std::int64_t k = lo; k < hi; ++k) {
                noise.fill(k, dw);
                const auto path = simulate_path(control, params, start, dw);
                y[static_cast<std::size_t>(k)] = realized_payoff(path, surface.spec, params) - cfg.X0;
            }
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(worker)] = e.what();
        }
    };
    const int nt = static_cast<int>(std::clamp<std::int64_t>(threads, 1, cfg.n_paths));
    if (nt == 1) {
        work(0, 0, cfg.n_paths);
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < nt; ++w) {
            pool.emplace_back(work, w, cfg.n_paths * w / nt, cfg.n_paths * (w + 1) / nt);
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) throw Error(ErrorKind::OutOfGrid, e);
    }

    // Fixed summation order keeps the result independent of the thread count.
    double sum = 0.0;
    for (double v : y) sum += v;
    const double n = static_cast<double>(cfg.n_paths);
    const double mean = sum / n;
    PayoffEstimate est;
    est.estimate = mean;
    est.n_paths = cfg.n_paths;
    est.seed = cfg.seed;
    est.fee = fee;
    if (cfg.n_paths > 1) {
        double ss = 0.0;
        for (double v : y) ss += (v - mean) * (v - mean);
        est.stderr_ = std::sqrt(ss / (n - 1.0) / n);
        est.arbitrage = mean > 2.0 * est.stderr_;
    } else {
        est.stderr_ = std::numeric_limits<double>::quiet_NaN();
        est.arbitrage = false;
    }
    return est;
}

PayoffEstimate expected_payoff_metric(const ContractSpec& spec, const MarketParams& params, const GridSpec& grid,
                                      const SimConfig& cfg, int threads) {
    const auto surface = solve_contract(spec, params, grid);
    const auto control = extract_control(surface);
    return evaluate_policy(surface, control, cfg, threads);
}

int count_sign_changes(std::span<const double> v) noexcept {
    int changes = 0;
    int last = 0;
    for (double x : v) {
        const int s = (x > 0.0) - (x < 0.0);
        if (s == 0) continue;
        if (last != 0 && s != last) ++changes;
        last = s;
    }
    return changes;
}

}  // namespace execfee
