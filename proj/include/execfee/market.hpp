#pragma once

/**
 * @file market.hpp
 * @brief Model constants, contract definitions and terminal conditions.
 *
 * The broker trades at speed v with |v| <= C. The price follows
 *   dS = (mu + b v) dt + sigma dW
 * and wealth follows
 *   dX = r X dt - v (S + l v) dt.
 * At maturity any gap between the inventory and the contract target is closed
 * at a quadratic cost alpha (q - target)^2.
 */

#include <array>
#include <string>
#include <string_view>

namespace execfee {

/**
 * @brief All model constants. Defaults are the baseline calibration.
 */
struct MarketParams {
    double r = 0.0;        ///< Risk-free rate per unit time
    double mu = 0.0;       ///< Price drift per unit time
    double b = 1e-3;       ///< Permanent impact per unit trading speed
    double l = 1e-3;       ///< Temporary impact per unit trading speed
    double gamma = 1e-2;   ///< Absolute risk aversion
    double sigma = 5.0;    ///< Arithmetic price volatility
    double N = 1.0;        ///< Contracted number of shares
    double C = 10.0;       ///< Trading speed bound
    double alpha = 0.2;    ///< Terminal liquidation penalty
    double T = 1.0;        ///< Horizon

    /// Throws Error(InvalidArgument) naming the first offending field.
    void validate() const;

    friend bool operator==(const MarketParams&, const MarketParams&) = default;
};

enum class ContractFamily {
    LinearPhysical,
    LinearCash,
    CollarCash,
    CollarPhysical,
    TwapPhysical,
    TwapCash,
};

inline constexpr std::array<ContractFamily, 6> kAllFamilies = {
    ContractFamily::LinearPhysical, ContractFamily::LinearCash,  ContractFamily::CollarCash,
    ContractFamily::CollarPhysical, ContractFamily::TwapPhysical, ContractFamily::TwapCash,
};

std::string_view to_string(ContractFamily family) noexcept;
/// Accepts the canonical names returned by to_string (case-sensitive).
ContractFamily parse_family(std::string_view name);

constexpr bool is_physical(ContractFamily f) noexcept {
    return f == ContractFamily::LinearPhysical || f == ContractFamily::CollarPhysical ||
           f == ContractFamily::TwapPhysical;
}
constexpr bool is_collar(ContractFamily f) noexcept {
    return f == ContractFamily::CollarCash || f == ContractFamily::CollarPhysical;
}
constexpr bool is_twap(ContractFamily f) noexcept {
    return f == ContractFamily::TwapPhysical || f == ContractFamily::TwapCash;
}

/**
 * @brief One contract: payoff family, collar strikes and terminal inventory target.
 *
 * Physical families must end holding N shares, cash families must end flat.
 */
struct ContractSpec {
    ContractFamily family = ContractFamily::LinearPhysical;
    double K1 = 40.0;                  ///< Lower strike (collars only)
    double K2 = 50.0;                  ///< Upper strike (collars only)
    double liquidation_target = 1.0;   ///< N for physical families, 0 for cash

    /// Builds a spec whose target is consistent with the family.
    static ContractSpec make(ContractFamily family, const MarketParams& params, double K1 = 40.0,
                             double K2 = 50.0);

    void validate(const MarketParams& params) const;

    friend bool operator==(const ContractSpec&, const ContractSpec&) = default;
};

/**
 * @brief Localized (S, q) domain and time discretization.
 *
 * I and J count intervals, so the price axis has I + 1 nodes.
 */
struct GridSpec {
    double s_min = 15.0;
    double s_max = 75.0;
    int I = 100;
    double q_min = -1.0;
    double q_max = 1.0;
    int J = 100;
    int n_steps = 1000;

    void validate() const;

    double dS() const noexcept { return (s_max - s_min) / I; }
    double dq() const noexcept { return (q_max - q_min) / J; }
    double dt(double horizon) const noexcept { return horizon / n_steps; }
    double S(int i) const noexcept { return s_min + i * dS(); }
    double q(int j) const noexcept { return q_min + j * dq(); }
    int price_nodes() const noexcept { return I + 1; }
    int inventory_nodes() const noexcept { return J + 1; }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// alpha (q - target)^2
double liquidation_cost(double q, double target, double alpha) noexcept;

/// Z(S) = S + (K1 - S)^+ - (S - K2)^+
double collar_z(double S, double K1, double K2) noexcept;

/// Contract payoff Pi(S) paid to the counterpart at T.
double payoff_pi(const ContractSpec& spec, double S, double N) noexcept;

/// Pi(S) + L(q); boundary value of the fee at t = T.
double terminal_fee(const ContractSpec& spec, double q, double S, const MarketParams& params) noexcept;

}  // namespace execfee
