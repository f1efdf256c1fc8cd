#include "execfee/market.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "execfee/errors.hpp"

namespace execfee {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::DegenerateRiccati: return "DegenerateRiccati";
        case ErrorKind::InvalidRegime: return "InvalidRegime";
        case ErrorKind::SingularTridiagonal: return "SingularTridiagonal";
        case ErrorKind::NonFinite: return "NonFinite";
        case ErrorKind::Overflow: return "Overflow";
        case ErrorKind::RequiresZeroRate: return "RequiresZeroRate";
        case ErrorKind::OutOfGrid: return "OutOfGrid";
        case ErrorKind::Config: return "Config";
    }
    return "Unknown";
}

namespace {

void require(bool ok, std::string_view field, std::string_view rule, double value) {
    if (!ok) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("{} must satisfy {} (got {})", field, rule, value));
    }
}

}  // namespace

void MarketParams::validate() const {
    const auto finite = [](double x) { return std::isfinite(x); };
    for (auto [name, v] : {std::pair<const char*, double>{"r", r}, {"mu", mu}, {"b", b}, {"l", l}, {"gamma", gamma},
                           {"sigma", sigma}, {"N", N}, {"C", C}, {"alpha", alpha}, {"T", T}}) {
        require(finite(v), name, "finite", v);
    }
    require(l > 0, "l", "l > 0", l);
    require(sigma > 0, "sigma", "sigma > 0", sigma);
    require(gamma > 0, "gamma", "gamma > 0", gamma);
    require(alpha >= 0, "alpha", "alpha >= 0", alpha);
    require(C > 0, "C", "C > 0", C);
    require(T > 0, "T", "T > 0", T);
    require(N >= 0, "N", "N >= 0", N);
}

std::string_view to_string(ContractFamily family) noexcept {
    switch (family) {
        case ContractFamily::LinearPhysical: return "LinearPhysical";
        case ContractFamily::LinearCash: return "LinearCash";
        case ContractFamily::CollarCash: return "CollarCash";
        case ContractFamily::CollarPhysical: return "CollarPhysical";
        case ContractFamily::TwapPhysical: return "TwapPhysical";
        case ContractFamily::TwapCash: return "TwapCash";
    }
    return "Unknown";
}

ContractFamily parse_family(std::string_view name) {
    for (auto f : kAllFamilies) {
        if (to_string(f) == name) return f;
    }
    throw Error(ErrorKind::InvalidArgument, fmt::format("unknown contract family '{}'", name));
}

ContractSpec ContractSpec::make(ContractFamily family, const MarketParams& params, double K1, double K2) {
    ContractSpec spec;
    spec.family = family;
    spec.K1 = K1;
    spec.K2 = K2;
    spec.liquidation_target = is_physical(family) ? params.N : 0.0;
    return spec;
}

void ContractSpec::validate(const MarketParams& params) const {
    if (is_collar(family) && !(K1 < K2)) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("collar strikes need K1 < K2 (got K1={}, K2={})", K1, K2));
    }
    const double expected = is_physical(family) ? params.N : 0.0;
    if (liquidation_target != expected) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("liquidation_target for {} must be {} (got {})", to_string(family), expected,
                                liquidation_target));
    }
}

void GridSpec::validate() const {
    require(std::isfinite(s_min) && std::isfinite(s_max) && s_min < s_max, "s_min/s_max", "s_min < s_max", s_max - s_min);
    require(std::isfinite(q_min) && std::isfinite(q_max) && q_min < q_max, "q_min/q_max", "q_min < q_max", q_max - q_min);
    require(I >= 2, "I", "I >= 2", I);
    require(J >= 2, "J", "J >= 2", J);
    require(n_steps >= 1, "n_steps", "n_steps >= 1", n_steps);
}

double liquidation_cost(double q, double target, double alpha) noexcept {
    const double d = q - target;
    return alpha * d * d;
}

double collar_z(double S, double K1, double K2) noexcept {
    return S + std::max(K1 - S, 0.0) - std::max(S - K2, 0.0);
}

double payoff_pi(const ContractSpec& spec, double S, double N) noexcept {
    if (is_collar(spec.family)) return N * collar_z(S, spec.K1, spec.K2);
    return N * S;
}

double terminal_fee(const ContractSpec& spec, double q, double S, const MarketParams& params) noexcept {
    return payoff_pi(spec, S, params.N) + liquidation_cost(q, spec.liquidation_target, params.alpha);
}

}  // namespace execfee
