#pragma once

/**
 * @file closed_form.hpp
 * @brief Closed-form fees and controls for the linear contracts when mu = r = 0.
 *
 * With mu = r = 0 the fee of a linear contract is N S + h(t, q) where h is a
 * quadratic polynomial in q. Its leading coefficient solves a Riccati equation
 *   h2' = (b - 2 h2)^2 / (4 l) - sigma^2 gamma / 2,   h2(T) = alpha,
 * and the cash-settled contract adds linear and constant coefficients h1, h0.
 */

#include "execfee/market.hpp"

namespace execfee {

/// Constants of the Riccati solution.
struct RiccatiConstants {
    double a = 0.0;          ///< sqrt(l sigma^2 gamma / 2)
    double alpha_eff = 0.0;  ///< alpha - b/2
    double xi = 0.0;         ///< (alpha_eff - a) / (alpha_eff + a)
    bool xi_in_unit = false; ///< xi lies in (0, 1)

    /// Throws InvalidRegime unless mu = r = 0 and DegenerateRiccati if the
    /// solution blows up on [0, T].
    static RiccatiConstants make(const MarketParams& params);
};

/// Quadratic-in-q coefficients of the cash-settled fee at one time.
struct TrsCoefficients {
    double h2 = 0.0;
    double h1 = 0.0;
    double h0 = 0.0;
};

/// theta(t) = a (1 + xi e) / (1 - xi e),  e = exp(-2 a (T - t) / l).
double riccati_theta(double t, const MarketParams& params);

/// h2(t) = theta(t) + b/2, shared by both linear contracts.
double riccati_h2(double t, const MarketParams& params);

/// Linear coefficient of the cash-settled fee.
double trs_h1(double t, const MarketParams& params);

/// Number of trapezoid intervals used for h0.
inline constexpr int kH0QuadratureIntervals = 2048;

TrsCoefficients trs_coefficients(double t, const MarketParams& params);

double fee_physical_closed(double t, double q, double S, const MarketParams& params);
double fee_trs_closed(double t, double q, double S, const MarketParams& params);

/// Clamped optimal speed; family must be LinearPhysical or LinearCash.
double control_closed(double t, double q, ContractFamily family, const MarketParams& params);

}  // namespace execfee
