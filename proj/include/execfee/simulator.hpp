#pragma once

/**
 * @file simulator.hpp
 * @brief Euler simulation of the controlled price, inventory and wealth.
 *
 *   S_{k+1} = S_k + (mu + b v_k) dt + sigma dW_k
 *   X_{k+1} = X_k + (r X_k - v_k (S_k + l v_k)) dt
 *   Q_{k+1} = Q_k + v_k dt
 */

#include <cstdint>
#include <span>
#include <vector>

#include "execfee/hjb_solver.hpp"
#include "execfee/market.hpp"
#include "execfee/surface.hpp"

namespace execfee {

struct SimConfig {
    std::int64_t n_paths = 100000;
    int n_steps = 1000;
    std::uint64_t seed = 20240101;
    double X0 = 22.5;  ///< Initial wealth, q0 * S0 by convention
    double q0 = 0.5;
    double S0 = 45.0;

    void validate() const;

    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

/// One simulated trajectory; every vector has n_steps + 1 entries except v and increments.
struct SimPath {
    std::vector<double> times;
    std::vector<double> S;
    std::vector<double> Q;
    std::vector<double> X;
    std::vector<double> A;           ///< Left-rectangle running average of S
    std::vector<double> v;           ///< Speed used on [t_k, t_{k+1})
    std::vector<double> increments;  ///< Brownian increments
    int clamped_steps = 0;           ///< Steps whose state lay outside the grid hull
};

/**
 * @brief Seed-reproducible Brownian increments, one independent stream per path.
 *
 * Path p draws from a std::mt19937_64 seeded with a SplitMix64 mix of
 * (seed, p), so any path can be regenerated without the others.
 */
class NoiseSource {
public:
    NoiseSource(std::uint64_t seed, int n_steps, double dt);

    void fill(std::int64_t path, std::span<double> out) const;
    std::vector<double> increments(std::int64_t path) const;

    int n_steps() const noexcept { return n_steps_; }
    double dt() const noexcept { return dt_; }

private:
    std::uint64_t seed_;
    int n_steps_;
    double dt_;
};

std::uint64_t path_seed(std::uint64_t seed, std::int64_t path) noexcept;

/// Shared increments for every contract simulated under this config.
NoiseSource common_noise_batch(const SimConfig& cfg, double horizon);

/// Bilinear in (S, q) on the two bracketing layers, linear in t, clamped to [-C, C].
double interpolate_control(const ControlSurface& control, double t, double q, double S);

SimPath simulate_path(const ControlSurface& control, const MarketParams& params, const SimConfig& cfg,
                      std::span<const double> increments);

/// Terminal payoff of the contract's holder of the hedge (the broker).
double realized_payoff(const SimPath& path, const ContractSpec& spec, const MarketParams& params);

struct PayoffEstimate {
    double estimate = 0.0;  ///< Mean of Y(T) - X0
    double stderr_ = 0.0;   ///< NaN when n_paths = 1
    std::int64_t n_paths = 0;
    std::uint64_t seed = 0;
    double fee = 0.0;       ///< Fee at (0, q0, S0) used to fund the position
    bool arbitrage = false; ///< estimate > 2 standard errors
};

/// Monte-Carlo estimate for an already solved contract.
PayoffEstimate evaluate_policy(const FeeSurface& surface, const ControlSurface& control, const SimConfig& cfg,
                               int threads = 1);

/// Solves the contract and estimates E[Y(T)] - X0 starting from X0 - q0 S0 + fee.
PayoffEstimate expected_payoff_metric(const ContractSpec& spec, const MarketParams& params, const GridSpec& grid,
                                      const SimConfig& cfg, int threads = 1);

/// Sign changes along a speed sequence; exact zeros are skipped.
int count_sign_changes(std::span<const double> v) noexcept;

}  // namespace execfee
