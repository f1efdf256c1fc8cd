#pragma once

#include <span>
#include <string>
#include <vector>

#include "execfee/market.hpp"

namespace execfee {

/**
 * @brief Values on the (time step, price, inventory) grid.
 *
 * Each time layer is a flat array of (I + 1) x (J + 1) values, price-major:
 * node (i, j) sits at i * (J + 1) + j. Layers may be absent when a solve only
 * keeps the ones it was asked for.
 */
class LayeredField {
public:
    LayeredField() = default;
    LayeredField(const GridSpec& grid, double horizon);

    const GridSpec& grid() const noexcept { return grid_; }
    double horizon() const noexcept { return horizon_; }
    double dt() const noexcept { return horizon_ / grid_.n_steps; }
    double time(int n) const noexcept { return horizon_ * n / grid_.n_steps; }

    std::size_t layer_size() const noexcept {
        return static_cast<std::size_t>(grid_.I + 1) * static_cast<std::size_t>(grid_.J + 1);
    }
    std::size_t index(int i, int j) const noexcept {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(grid_.J + 1) + static_cast<std::size_t>(j);
    }

    bool has_layer(int n) const noexcept;
    /// Throws OutOfGrid if layer n is not stored.
    std::span<const double> layer(int n) const;
    std::span<double> layer(int n);
    void store_layer(int n, std::vector<double> values);
    void drop_layer(int n);
    /// Stored steps in increasing order.
    std::vector<int> steps() const;

    double value(int n, int i, int j) const { return layer(n)[index(i, j)]; }

    /// Bilinear interpolation in (S, q) on layer n; the point is clamped to the grid hull.
    double sample(int n, double q, double S) const;

private:
    GridSpec grid_{};
    double horizon_ = 1.0;
    std::vector<std::vector<double>> layers_;
};

/// Bilinear interpolation on one layer, clamping (q, S) to the hull.
double sample_layer(std::span<const double> layer, const GridSpec& grid, double q, double S);

enum class SurfaceKind {
    Fee,              ///< The indifference fee itself
    TwapTransformed,  ///< U with fee = N (t/T)(S - A) + U
};

struct FeeSurface : LayeredField {
    using LayeredField::LayeredField;

    SurfaceKind kind = SurfaceKind::Fee;
    MarketParams params{};
    ContractSpec spec{};
    std::vector<std::string> warnings;

    /// Fee at node-free coordinates; TWAP surfaces need the running average A.
    double fee(int n, double q, double S, double A = 0.0) const;
};

struct ControlSurface : LayeredField {
    using LayeredField::LayeredField;

    double C = 0.0;  ///< Speed bound all entries respect
};

}  // namespace execfee
