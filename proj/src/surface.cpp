#include "execfee/surface.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "execfee/errors.hpp"

namespace execfee {

LayeredField::LayeredField(const GridSpec& grid, double horizon) : grid_(grid), horizon_(horizon) {
    grid_.validate();
    layers_.resize(static_cast<std::size_t>(grid_.n_steps) + 1);
}

bool LayeredField::has_layer(int n) const noexcept {
    return n >= 0 && n <= grid_.n_steps && !layers_[static_cast<std::size_t>(n)].empty();
}

std::span<const double> LayeredField::layer(int n) const {
    if (!has_layer(n)) throw Error(ErrorKind::OutOfGrid, fmt::format("time layer {} is not stored", n));
    return layers_[static_cast<std::size_t>(n)];
}

std::span<double> LayeredField::layer(int n) {
    if (!has_layer(n)) throw Error(ErrorKind::OutOfGrid, fmt::format("time layer {} is not stored", n));
    return layers_[static_cast<std::size_t>(n)];
}

void LayeredField::store_layer(int n, std::vector<double> values) {
    if (n < 0 || n > grid_.n_steps) throw Error(ErrorKind::OutOfGrid, fmt::format("time step {} outside grid", n));
    if (values.size() != layer_size()) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("layer has {} values, grid needs {}", values.size(), layer_size()));
    }
    layers_[static_cast<std::size_t>(n)] = std::move(values);
}

void LayeredField::drop_layer(int n) {
    if (n >= 0 && n <= grid_.n_steps) {
        layers_[static_cast<std::size_t>(n)].clear();
        layers_[static_cast<std::size_t>(n)].shrink_to_fit();
    }
}

std::vector<int> LayeredField::steps() const {
    std::vector<int> out;
    for (int n = 0; n <= grid_.n_steps; ++n) {
        if (has_layer(n)) out.push_back(n);
    }
    return out;
}

double sample_layer(std::span<const double> layer, const GridSpec& grid, double q, double S) {
    const double x = std::clamp((S - grid.s_min) / grid.dS(), 0.0, static_cast<double>(grid.I));
    const double y = std::clamp((q - grid.q_min) / grid.dq(), 0.0, static_cast<double>(grid.J));
    const int i = std::min(static_cast<int>(x), grid.I - 1);
    const int j = std::min(static_cast<int>(y), grid.J - 1);
    const double fx = x - i;
    const double fy = y - j;
    const std::size_t w = static_cast<std::size_t>(grid.J + 1);
    const std::size_t k = static_cast<std::size_t>(i) * w + static_cast<std::size_t>(j);
    const double v00 = layer[k];
    const double v01 = layer[k + 1];
    const double v10 = layer[k + w];
    const double v11 = layer[k + w + 1];
    return (1.0 - fx) * ((1.0 - fy) * v00 + fy * v01) + fx * ((1.0 - fy) * v10 + fy * v11);
}

double LayeredField::sample(int n, double q, double S) const { return sample_layer(layer(n), grid_, q, S); }

double FeeSurface::fee(int n, double q, double S, double A) const {
    const double u = sample(n, q, S);
    if (kind == SurfaceKind::Fee) return u;
    return params.N * (time(n) / horizon()) * (S - A) + u;
}

}  // namespace execfee
