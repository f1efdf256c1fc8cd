#include "execfee/hjb_solver.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <fmt/format.h>

#include "execfee/errors.hpp"

namespace execfee {

TridiagonalRow implicit_matrix_row(int /*i*/, const MarketParams& params, const GridSpec& grid) {
    const double dS = grid.dS();
    const double dt = grid.dt(params.T);
    const double diff = params.sigma * params.sigma * dt / (2.0 * dS * dS);
    const double drift = params.mu * dt / (2.0 * dS);
    TridiagonalRow row;
    row.sub = diff - drift;
    row.diag = -(2.0 * diff + 1.0 + params.r * dt);
    row.super = diff + drift;
    return row;
}

HamiltonianNode upwind_hamiltonian(double beta, double d_plus, double d_minus, bool can_buy, bool can_sell,
                                   double l, double C) noexcept {
    // v = 0 is always admissible, so both branches are >= 0.
    double hp = 0.0, vp = 0.0, hm = 0.0, vm = 0.0;
    if (can_buy) {
        const double k = beta - d_plus;
        vp = std::clamp(k / (2.0 * l), 0.0, C);
        hp = -l * vp * vp + k * vp;
    }
    if (can_sell) {
        const double k = beta - d_minus;
        vm = std::clamp(k / (2.0 * l), -C, 0.0);
        hm = -l * vm * vm + k * vm;
    }
    if (hp > hm) return {hp, vp};
    if (hm > hp) return {hm, vm};
    return {hp, 0.0};
}

double hedge_shift(SurfaceKind kind, double t, const MarketParams& params) noexcept {
    return kind == SurfaceKind::TwapTransformed ? params.N * t / params.T : 0.0;
}

namespace {

struct NodeTerms {
    double risk = 0.0;
    HamiltonianNode ham{};
};

/// Walks every node of a layer and hands the nonlinear terms to f(i, j, terms).
template <class F>
void for_each_node(std::span<const double> P, double t, const MarketParams& params, const GridSpec& grid,
                   SurfaceKind kind, int i_begin, int i_end, F&& f) {
    const int I = grid.I;
    const int J = grid.J;
    const std::size_t w = static_cast<std::size_t>(J + 1);
    const double dS = grid.dS();
    const double dq = grid.dq();
    const double shift = hedge_shift(kind, t, params);
    const double risk_coef = 0.5 * params.sigma * params.sigma * params.gamma * std::exp(params.r * (params.T - t));
    for (int i = i_begin; i < i_end; ++i) {
        // P_S is central inside and copied from the neighbour at the price edges.
        const int ic = std::clamp(i, 1, I - 1);
        const double* up = &P[static_cast<std::size_t>(ic + 1) * w];
        const double* dn = &P[static_cast<std::size_t>(ic - 1) * w];
        const double* row = &P[static_cast<std::size_t>(i) * w];
        for (int j = 0; j <= J; ++j) {
            const double ds = (up[j] - dn[j]) / (2.0 * dS);
            const double q = grid.q(j);
            const double hedge = q - shift - ds;
            const double beta = params.b * q - params.b * (ds + shift);
            const double d_plus = j < J ? (row[j + 1] - row[j]) / dq : 0.0;
            const double d_minus = j > 0 ? (row[j] - row[j - 1]) / dq : 0.0;
            NodeTerms terms;
            terms.risk = -risk_coef * hedge * hedge;
            terms.ham = upwind_hamiltonian(beta, d_plus, d_minus, j < J, j > 0, params.l, params.C);
            f(i, j, terms);
        }
    }
}

}  // namespace

std::vector<double> explicit_nonlinear(std::span<const double> next, int n, const MarketParams& params,
                                       const GridSpec& grid, SurfaceKind kind) {
    std::vector<double> out(next.size());
    const double t = params.T * (n + 1) / grid.n_steps;
    const std::size_t w = static_cast<std::size_t>(grid.J + 1);
    for_each_node(next, t, params, grid, kind, 0, grid.I + 1, [&](int i, int j, const NodeTerms& x) {
        out[static_cast<std::size_t>(i) * w + static_cast<std::size_t>(j)] = x.risk + x.ham.value;
    });
    return out;
}

std::vector<double> control_layer(std::span<const double> layer, int n, const MarketParams& params,
                                  const GridSpec& grid, SurfaceKind kind) {
    std::vector<double> out(layer.size());
    const double t = params.T * n / grid.n_steps;
    const std::size_t w = static_cast<std::size_t>(grid.J + 1);
    for_each_node(layer, t, params, grid, kind, 0, grid.I + 1, [&](int i, int j, const NodeTerms& x) {
        out[static_cast<std::size_t>(i) * w + static_cast<std::size_t>(j)] = x.ham.v;
    });
    return out;
}

ImplicitOperator::ImplicitOperator(const MarketParams& params, const GridSpec& grid) : grid_(grid) {
    grid.validate();
    if (grid.I < 3) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("the implicit price operator needs I >= 3 (got {})", grid.I));
    }
    const auto row = implicit_matrix_row(1, params, grid);
    // Unknowns P_1..P_{I-1}; P_0 = 2P_1 - P_2 and P_I = 2P_{I-1} - P_{I-2}
    // are substituted into the first and last rows.
    const int m = grid.I - 1;
    std::vector<double> a(m, row.sub), b(m, row.diag), c(m, row.super);
    b[0] = row.diag + 2.0 * row.sub;
    c[0] = row.super - row.sub;
    a[m - 1] = row.sub - row.super;
    b[m - 1] = row.diag + 2.0 * row.super;
    a[0] = 0.0;
    c[m - 1] = 0.0;

    sub_ = a;
    cprime_.assign(m, 0.0);
    inv_den_.assign(m, 0.0);
    const double scale = std::abs(row.diag) + std::abs(row.sub) + std::abs(row.super);
    for (int k = 0; k < m; ++k) {
        const double den = b[k] - (k > 0 ? a[k] * cprime_[k - 1] : 0.0);
        if (!(std::abs(den) > 1e-14 * scale)) {
            throw Error(ErrorKind::SingularTridiagonal, fmt::format("zero pivot in row {} of the price operator", k + 1));
        }
        inv_den_[k] = 1.0 / den;
        cprime_[k] = c[k] * inv_den_[k];
    }
}

void ImplicitOperator::solve(std::span<const double> rhs, std::span<double> out) const {
    const int I = grid_.I;
    const std::size_t w = static_cast<std::size_t>(grid_.J + 1);
    const int m = I - 1;
    // Forward elimination, vectorised over the inventory slices.
    for (int k = 0; k < m; ++k) {
        const std::size_t row = static_cast<std::size_t>(k + 1) * w;
        double* o = &out[row];
        const double* r = &rhs[row];
        if (k == 0) {
            for (std::size_t j = 0; j < w; ++j) o[j] = r[j] * inv_den_[0];
        } else {
            const double* prev = &out[row - w];
            const double a = sub_[k];
            const double inv = inv_den_[k];
            for (std::size_t j = 0; j < w; ++j) o[j] = (r[j] - a * prev[j]) * inv;
        }
    }
    for (int k = m - 2; k >= 0; --k) {
        const std::size_t row = static_cast<std::size_t>(k + 1) * w;
        double* o = &out[row];
        const double* nxt = &out[row + w];
        const double cp = cprime_[k];
        for (std::size_t j = 0; j < w; ++j) o[j] -= cp * nxt[j];
    }
    double* p0 = &out[0];
    const double* p1 = &out[w];
    const double* p2 = &out[2 * w];
    double* pI = &out[static_cast<std::size_t>(I) * w];
    const double* pI1 = &out[static_cast<std::size_t>(I - 1) * w];
    const double* pI2 = &out[static_cast<std::size_t>(I - 2) * w];
    for (std::size_t j = 0; j < w; ++j) {
        p0[j] = 2.0 * p1[j] - p2[j];
        pI[j] = 2.0 * pI1[j] - pI2[j];
    }
}

namespace {

/// Builds the right-hand side for step n and returns max |dt * nonlinear| over the layer.
double build_rhs(std::span<const double> next, int n, const MarketParams& params, const GridSpec& grid,
                 SurfaceKind kind, std::span<double> rhs) {
    const double dt = grid.dt(params.T);
    const double t = params.T * (n + 1) / grid.n_steps;
    const double shift = hedge_shift(kind, t, params);
    const std::size_t w = static_cast<std::size_t>(grid.J + 1);
    double max_explicit = 0.0;
    for_each_node(next, t, params, grid, kind, 1, grid.I, [&](int i, int j, const NodeTerms& x) {
        const std::size_t k = static_cast<std::size_t>(i) * w + static_cast<std::size_t>(j);
        const double q = grid.q(j);
        const double source = (params.mu - params.r * grid.S(i)) * q - params.mu * shift;
        const double nonlinear = dt * (x.risk + x.ham.value);
        max_explicit = std::max(max_explicit, std::abs(nonlinear));
        rhs[k] = -next[k] + nonlinear + source * dt;
    });
    for (std::size_t j = 0; j < w; ++j) {
        rhs[j] = 0.0;
        rhs[static_cast<std::size_t>(grid.I) * w + j] = 0.0;
    }
    return max_explicit;
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

void step_backward(std::span<const double> next, int n, const MarketParams& params, const GridSpec& grid,
                   const ImplicitOperator& op, std::span<double> out, SurfaceKind kind) {
    std::vector<double> rhs(next.size());
    build_rhs(next, n, params, grid, kind, rhs);
    op.solve(rhs, out);
}

void step_backward(FeeSurface& surface, int n) {
    const ImplicitOperator op(surface.params, surface.grid());
    std::vector<double> out(surface.layer_size());
    step_backward(surface.layer(n + 1), n, surface.params, surface.grid(), op, out, surface.kind);
    surface.store_layer(n, std::move(out));
}

std::vector<double> terminal_layer(const ContractSpec& spec, const MarketParams& params, const GridSpec& grid) {
    std::vector<double> out(static_cast<std::size_t>(grid.I + 1) * static_cast<std::size_t>(grid.J + 1));
    std::size_t k = 0;
    for (int i = 0; i <= grid.I; ++i) {
        for (int j = 0; j <= grid.J; ++j) out[k++] = terminal_fee(spec, grid.q(j), grid.S(i), params);
    }
    return out;
}

FeeSurface solve_backward(std::vector<double> start, int from, int to, SurfaceKind kind, const ContractSpec& spec,
                          const MarketParams& params, const GridSpec& grid, const SolverOptions& options) {
    params.validate();
    grid.validate();
    if (!(0 <= to && to <= from && from <= grid.n_steps)) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("invalid step range [{}, {}]", to, from));
    }
    if (kind == SurfaceKind::TwapTransformed && params.r != 0.0) {
        throw Error(ErrorKind::RequiresZeroRate, "the TWAP transform needs r = 0");
    }
    FeeSurface surface(grid, params.T);
    surface.kind = kind;
    surface.params = params;
    surface.spec = spec;

    const ImplicitOperator op(params, grid);
    const double dt = grid.dt(params.T);
    if (dt * params.C / grid.dq() > 1.0) {
        surface.warnings.push_back(fmt::format(
            "dt*C/dq = {:.3g} exceeds 1; the explicit inventory transport may lose monotonicity", dt * params.C / grid.dq()));
    }
    if (is_collar(spec.family)) {
        for (double K : {spec.K1, spec.K2}) {
            const double x = (K - grid.s_min) / grid.dS();
            if (std::abs(x - std::round(x)) > 1e-9) {
                surface.warnings.push_back(fmt::format("strike {} does not fall on a price node", K));
            }
        }
    }

    std::vector<double> next = std::move(start);
    if (!all_finite(next)) throw Error(ErrorKind::NonFinite, "start layer contains non-finite values");
    surface.store_layer(from, next);
    std::vector<double> rhs(next.size()), cur(next.size());
    bool warned = false;
    for (int n = from - 1; n >= to; --n) {
        const double max_explicit = build_rhs(next, n, params, grid, kind, rhs);
        if (!warned && max_explicit > 0.1 * std::max(max_abs(next), 1e-300)) {
            surface.warnings.push_back(fmt::format(
                "step {}: explicit nonlinear increment {:.3g} exceeds 10% of the layer scale", n, max_explicit));
            warned = true;
        }
        op.solve(rhs, cur);
        if (!all_finite(cur)) throw Error(ErrorKind::NonFinite, fmt::format("non-finite fee at time step {}", n));
        if (options.keep_history || n == to) surface.store_layer(n, cur);
        std::swap(next, cur);
    }
    return surface;
}

FeeSurface solve_fee_surface(const ContractSpec& spec, const MarketParams& params, const GridSpec& grid,
                             const SolverOptions& options) {
    spec.validate(params);
    if (is_twap(spec.family)) {
        throw Error(ErrorKind::InvalidArgument, "TWAP contracts are solved through solve_twap");
    }
    grid.validate();
    return solve_backward(terminal_layer(spec, params, grid), grid.n_steps, 0, SurfaceKind::Fee, spec, params, grid,
                          options);
}

ControlSurface extract_control(const FeeSurface& surface) {
    ControlSurface control(surface.grid(), surface.horizon());
    control.C = surface.params.C;
    for (int n : surface.steps()) {
        control.store_layer(n, control_layer(surface.layer(n), n, surface.params, surface.grid(), surface.kind));
    }
    return control;
}

void RegulatorySpec::validate(const MarketParams& params) const {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, fmt::format("p must lie in [0, 1] (got {})", p));
    if (!(tau > 0.0 && tau < params.T)) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("tau must lie in (0, T) (got {})", tau));
    }
}

int snap_tau(double tau, const MarketParams& params, const GridSpec& grid) {
    const double x = tau / grid.dt(params.T);
    const double k = std::round(x);
    if (std::abs(x - k) > 0.5 || k <= 0 || k >= grid.n_steps) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("tau = {} cannot be placed strictly inside the time grid", tau));
    }
    return static_cast<int>(k);
}

std::vector<double> regulatory_blend(std::span<const double> approved, std::span<const double> rejected, double p,
                                     int tau_step, const MarketParams& params, const GridSpec& grid) {
    if (approved.size() != rejected.size()) throw Error(ErrorKind::InvalidArgument, "branch layers differ in size");
    const double tau = params.T * tau_step / grid.n_steps;
    const double g = params.gamma * std::exp(params.r * (params.T - tau));
    std::vector<double> out(approved.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double m = std::max(approved[k], rejected[k]);
        const double s = p * std::exp(g * (approved[k] - m)) + (1.0 - p) * std::exp(g * (rejected[k] - m));
        out[k] = m + std::log(s) / g;
        if (!std::isfinite(out[k])) {
            throw Error(ErrorKind::Overflow, fmt::format("regulatory blend leaves the representable range at node {}", k));
        }
    }
    return out;
}

RegulatoryResult solve_regulatory_branches(double tau, const MarketParams& params, const GridSpec& grid,
                                           const SolverOptions& options) {
    RegulatorySpec{0.5, tau}.validate(params);
    RegulatoryResult res;
    res.tau_step = snap_tau(tau, params, grid);
    auto branch = [&](ContractFamily f) {
        const auto spec = ContractSpec::make(f, params);
        return solve_backward(terminal_layer(spec, params, grid), grid.n_steps, res.tau_step, SurfaceKind::Fee, spec,
                              params, grid, options);
    };
    if (options.threads > 1) {
        auto fut = std::async(std::launch::async, branch, ContractFamily::LinearCash);
        res.approved = branch(ContractFamily::LinearPhysical);
        res.rejected = fut.get();
    } else {
        res.approved = branch(ContractFamily::LinearPhysical);
        res.rejected = branch(ContractFamily::LinearCash);
    }
    return res;
}

FeeSurface solve_pre_decision(const RegulatoryResult& branches, double p, const MarketParams& params,
                              const GridSpec& grid, const SolverOptions& options) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, fmt::format("p must lie in [0, 1] (got {})", p));
    auto start = regulatory_blend(branches.approved.layer(branches.tau_step), branches.rejected.layer(branches.tau_step),
                                  p, branches.tau_step, params, grid);
    // The pre-decision contract has no terminal payoff of its own; the spec
    // only labels the surface.
    const auto spec = ContractSpec::make(ContractFamily::LinearPhysical, params);
    return solve_backward(std::move(start), branches.tau_step, 0, SurfaceKind::Fee, spec, params, grid, options);
}

RegulatoryResult solve_regulatory(const RegulatorySpec& reg, const MarketParams& params, const GridSpec& grid,
                                  const SolverOptions& options) {
    reg.validate(params);
    auto res = solve_regulatory_branches(reg.tau, params, grid, options);
    res.pre = solve_pre_decision(res, reg.p, params, grid, options);
    return res;
}

FeeSurface solve_twap(ContractFamily family, const MarketParams& params, const GridSpec& grid,
                      const SolverOptions& options) {
    if (!is_twap(family)) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("{} is not a TWAP contract", to_string(family)));
    }
    params.validate();
    if (params.r != 0.0) throw Error(ErrorKind::RequiresZeroRate, "the TWAP transform needs r = 0");
    grid.validate();
    const auto spec = ContractSpec::make(family, params);
    std::vector<double> start(static_cast<std::size_t>(grid.I + 1) * static_cast<std::size_t>(grid.J + 1));
    std::size_t k = 0;
    for (int i = 0; i <= grid.I; ++i) {
        for (int j = 0; j <= grid.J; ++j) {
            start[k++] = liquidation_cost(grid.q(j), spec.liquidation_target, params.alpha);
        }
    }
    return solve_backward(std::move(start), grid.n_steps, 0, SurfaceKind::TwapTransformed, spec, params, grid, options);
}

FeeSurface solve_contract(const ContractSpec& spec, const MarketParams& params, const GridSpec& grid,
                          const SolverOptions& options) {
    if (is_twap(spec.family)) return solve_twap(spec.family, params, grid, options);
    return solve_fee_surface(spec, params, grid, options);
}

}  // namespace execfee
