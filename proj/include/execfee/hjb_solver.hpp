#pragma once

/**
 * @file hjb_solver.hpp
 * @brief Backward finite-difference solver for the indifference fee.
 *
 * The fee P(t, q, S) solves
 *   -P_t + r P + (mu - r S) q - mu P_S - sigma^2/2 P_SS
 *     - sigma^2 gamma e^{r(T-t)} / 2 (q - P_S)^2
 *     + sup_{|v| <= C} { -l v^2 + (b q - b P_S - P_q) v } = 0
 * with P(T) = Pi(S) + L(q).
 *
 * Each step treats the linear S-operator implicitly (one tridiagonal solve per
 * inventory slice, P_SS = 0 at both price edges) and the nonlinear terms
 * explicitly from the later time layer. The Hamiltonian is evaluated with
 * upwind inventory differences: the buy branch v >= 0 uses the forward
 * difference and the sell branch v <= 0 the backward one. Trading out of the
 * inventory domain is not allowed, so the top row only sells and the bottom
 * row only buys.
 *
 * Regulatory switching: with J^tau = p J^1 + (1 - p) J^0 and
 * J = -exp(-gamma e^{r(T-t)} (x - P)) the pre-decision fee at tau is
 *   P_pre = (1/g) ln(p e^{g P1} + (1 - p) e^{g P0}),  g = gamma e^{r(T-tau)}.
 *
 * TWAP contracts: for r = 0, P = N (t/T)(S - A) + U(t, q, S) removes the
 * average A; U solves the same equation with the hedge shifted by N t/T and
 * U(T) = L(q).
 */

#include <span>
#include <vector>

#include "execfee/market.hpp"
#include "execfee/surface.hpp"

namespace execfee {

struct SolverOptions {
    int threads = 1;           ///< Worker threads for independent solves
    bool keep_history = true;  ///< Store every time layer (needed for controls)
};

/// Coefficients of one interior row of the implicit matrix.
struct TridiagonalRow {
    double sub = 0.0;    ///< multiplies P_{i-1}
    double diag = 0.0;   ///< multiplies P_i
    double super = 0.0;  ///< multiplies P_{i+1}
};

TridiagonalRow implicit_matrix_row(int i, const MarketParams& params, const GridSpec& grid);

/// Value and maximiser of the discrete Hamiltonian at one node.
struct HamiltonianNode {
    double value = 0.0;
    double v = 0.0;
};

/**
 * @brief sup over |v| <= C of -l v^2 + (beta - D) v with D upwinded by the sign of v.
 *
 * @param beta   b q - b (P_S + hedge shift)
 * @param d_plus forward inventory difference, ignored when !can_buy
 * @param d_minus backward inventory difference, ignored when !can_sell
 */
HamiltonianNode upwind_hamiltonian(double beta, double d_plus, double d_minus, bool can_buy, bool can_sell,
                                   double l, double C) noexcept;

/// Hedge offset added to P_S: N t / T for the TWAP transform, 0 otherwise.
double hedge_shift(SurfaceKind kind, double t, const MarketParams& params) noexcept;

/**
 * @brief Explicit nonlinear part evaluated from layer n + 1, at every node.
 *
 * Risk term plus upwind Hamiltonian; P_S is central inside and copied from the
 * neighbour at the price edges.
 */
std::vector<double> explicit_nonlinear(std::span<const double> next, int n, const MarketParams& params,
                                       const GridSpec& grid, SurfaceKind kind = SurfaceKind::Fee);

/// Optimal speed at every node of one layer (the maximiser used by the scheme).
std::vector<double> control_layer(std::span<const double> layer, int n, const MarketParams& params,
                                  const GridSpec& grid, SurfaceKind kind = SurfaceKind::Fee);

/**
 * @brief Factorised implicit operator; one instance serves every slice and step.
 */
class ImplicitOperator {
public:
    ImplicitOperator(const MarketParams& params, const GridSpec& grid);

    /// Solves A x = rhs for every inventory slice at once. rhs rows 0 and I are
    /// ignored; the result honours P_SS = 0 at both price edges.
    void solve(std::span<const double> rhs, std::span<double> out) const;

private:
    GridSpec grid_;
    std::vector<double> sub_, cprime_, inv_den_;
};

/// Computes layer n from layer n + 1 into out.
void step_backward(std::span<const double> next, int n, const MarketParams& params, const GridSpec& grid,
                   const ImplicitOperator& op, std::span<double> out, SurfaceKind kind = SurfaceKind::Fee);

/// Convenience form: reads layer n + 1 of the surface and stores layer n.
void step_backward(FeeSurface& surface, int n);

/// Terminal layer Pi(S) + L(q) of a contract.
std::vector<double> terminal_layer(const ContractSpec& spec, const MarketParams& params, const GridSpec& grid);

/**
 * @brief Runs the scheme from a given layer at step `from` down to step `to`.
 *
 * With keep_history false only the layers `from` and `to` are kept.
 */
FeeSurface solve_backward(std::vector<double> start, int from, int to, SurfaceKind kind, const ContractSpec& spec,
                          const MarketParams& params, const GridSpec& grid, const SolverOptions& options = {});

/// Full sweep for a linear or collar contract.
FeeSurface solve_fee_surface(const ContractSpec& spec, const MarketParams& params, const GridSpec& grid,
                             const SolverOptions& options = {});

/// Optimal control on every stored layer of the surface.
ControlSurface extract_control(const FeeSurface& surface);

struct RegulatorySpec {
    double p = 0.5;    ///< Approval probability
    double tau = 0.5;  ///< Decision time

    void validate(const MarketParams& params) const;
};

/// Grid step of tau; throws InvalidArgument if tau is more than half a step off the grid.
int snap_tau(double tau, const MarketParams& params, const GridSpec& grid);

/// Exponential-utility blend of the two post-decision layers at step tau_step.
std::vector<double> regulatory_blend(std::span<const double> approved, std::span<const double> rejected, double p,
                                     int tau_step, const MarketParams& params, const GridSpec& grid);

struct RegulatoryResult {
    int tau_step = 0;
    FeeSurface approved;  ///< Physical delivery on [tau, T]
    FeeSurface rejected;  ///< Cash settlement on [tau, T]
    FeeSurface pre;       ///< Pre-decision fee on [0, tau]
};

/// Post-decision surfaces on [tau, T] for both outcomes.
RegulatoryResult solve_regulatory_branches(double tau, const MarketParams& params, const GridSpec& grid,
                                           const SolverOptions& options = {});

/// Pre-decision surface from already solved branches.
FeeSurface solve_pre_decision(const RegulatoryResult& branches, double p, const MarketParams& params,
                              const GridSpec& grid, const SolverOptions& options = {});

RegulatoryResult solve_regulatory(const RegulatorySpec& reg, const MarketParams& params, const GridSpec& grid,
                                  const SolverOptions& options = {});

/// Transformed TWAP surface U; family must be TwapPhysical or TwapCash.
FeeSurface solve_twap(ContractFamily family, const MarketParams& params, const GridSpec& grid,
                      const SolverOptions& options = {});

/// Solves any family: TWAP families go through the transform.
FeeSurface solve_contract(const ContractSpec& spec, const MarketParams& params, const GridSpec& grid,
                          const SolverOptions& options = {});

}  // namespace execfee
