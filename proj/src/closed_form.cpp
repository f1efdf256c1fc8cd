#include "execfee/closed_form.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fmt/format.h>

#include "execfee/errors.hpp"

namespace execfee {

namespace {

// Denominator shared by theta and the h1 integrating factor:
// (alpha_eff + a) - (alpha_eff - a) e^{-2 a tau / l}, written with expm1 so it
// stays accurate when a is small.
double riccati_den(const RiccatiConstants& k, double tau, double l) {
    const double x = 2.0 * k.a * tau / l;
    return -k.alpha_eff * std::expm1(-x) + k.a * (1.0 + std::exp(-x));
}

}  // namespace

RiccatiConstants RiccatiConstants::make(const MarketParams& params) {
    params.validate();
    if (params.mu != 0.0 || params.r != 0.0) {
        throw Error(ErrorKind::InvalidRegime, "closed forms require mu = 0 and r = 0");
    }
    RiccatiConstants k;
    k.a = std::sqrt(params.l * params.sigma * params.sigma * params.gamma / 2.0);
    k.alpha_eff = params.alpha - params.b / 2.0;
    const double den_xi = k.alpha_eff + k.a;
    k.xi = den_xi != 0.0 ? (k.alpha_eff - k.a) / den_xi : std::numeric_limits<double>::infinity();
    k.xi_in_unit = k.xi > 0.0 && k.xi < 1.0;
    if (!(k.a > 0.0)) {
        throw Error(ErrorKind::DegenerateRiccati, "Riccati scale a vanishes");
    }
    // The denominator is affine in e^{-2 a tau / l}; it is 2a > 0 at tau = 0,
    // so checking tau = T covers the whole horizon.
    if (!(riccati_den(k, params.T, params.l) > 0.0)) {
        throw Error(ErrorKind::DegenerateRiccati,
                    fmt::format("Riccati denominator vanishes on [0, T] (xi = {})", k.xi));
    }
    return k;
}

double riccati_theta(double t, const MarketParams& params) {
    const auto k = RiccatiConstants::make(params);
    const double tau = params.T - t;
    const double x = 2.0 * k.a * tau / params.l;
    const double num = k.alpha_eff * (1.0 + std::exp(-x)) - k.a * std::expm1(-x);
    return k.a * num / riccati_den(k, tau, params.l);
}

double riccati_h2(double t, const MarketParams& params) { return riccati_theta(t, params) + params.b / 2.0; }

double trs_h1(double t, const MarketParams& params) {
    const auto k = RiccatiConstants::make(params);
    const double tau = params.T - t;
    const double kappa = k.a / params.l;
    const double e1 = std::exp(-kappa * tau);
    const double den = riccati_den(k, tau, params.l);
    // Integrating factor A(t) and A(t) * int_t^T 1/A(s) ds, both divided
    // through by e^{kappa tau} to avoid overflow.
    const double A = 2.0 * k.a * e1 / den;
    const double AI = ((k.alpha_eff + k.a) * -std::expm1(-kappa * tau) + (k.alpha_eff - k.a) * e1 * std::expm1(-kappa * tau)) /
                      (kappa * den);
    const double bN = params.b * params.N;
    const double s2g = params.sigma * params.sigma * params.gamma;
    return A * bN - s2g * params.N * AI - bN;
}

TrsCoefficients trs_coefficients(double t, const MarketParams& params) {
    TrsCoefficients c;
    c.h2 = riccati_h2(t, params);
    c.h1 = trs_h1(t, params);
    const int n = kH0QuadratureIntervals;
    const double h = (params.T - t) / n;
    const double bN = params.b * params.N;
    const double half_var = 0.5 * params.sigma * params.sigma * params.gamma * params.N * params.N;
    // h0' = (h1 + bN)^2 / (4l) - sigma^2 gamma N^2 / 2 with h0(T) = 0.
    auto f = [&](double s) {
        const double y = trs_h1(s, params) + bN;
        return half_var - y * y / (4.0 * params.l);
    };
    double sum = 0.5 * (f(t) + f(params.T));
    for (int m = 1; m < n; ++m) sum += f(t + m * h);
    c.h0 = sum * h;
    return c;
}

double fee_physical_closed(double t, double q, double S, const MarketParams& params) {
    const double d = q - params.N;
    return params.N * S + riccati_h2(t, params) * d * d;
}

double fee_trs_closed(double t, double q, double S, const MarketParams& params) {
    const auto c = trs_coefficients(t, params);
    return params.N * S + c.h0 + c.h1 * q + c.h2 * q * q;
}

double control_closed(double t, double q, ContractFamily family, const MarketParams& params) {
    double dq_h = 0.0;
    switch (family) {
        case ContractFamily::LinearPhysical:
            dq_h = 2.0 * riccati_h2(t, params) * (q - params.N);
            break;
        case ContractFamily::LinearCash:
            dq_h = trs_h1(t, params) + 2.0 * riccati_h2(t, params) * q;
            break;
        default:
            throw Error(ErrorKind::InvalidArgument,
                        fmt::format("no closed-form control for {}", to_string(family)));
    }
    const double v = (params.b * q - params.b * params.N - dq_h) / (2.0 * params.l);
    return std::clamp(v, -params.C, params.C);
}

}  // namespace execfee
