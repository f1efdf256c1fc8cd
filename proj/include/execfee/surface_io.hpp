#pragma once

/**
 * @file surface_io.hpp
 * @brief Flat dumps of fee and control surfaces with a JSON sidecar.
 *
 * Values are written time-major, then price, then inventory, for the stored
 * layers only. The binary form is raw little-endian float64; the sidecar
 * (`<file>.json`) records the grid, parameters, contract and stored steps.
 */

#include <filesystem>
#include <string>

#include <json.hpp>

#include "execfee/surface.hpp"

namespace execfee {

enum class DumpFormat { Binary, Csv };

nlohmann::json surface_sidecar(const LayeredField& field, const std::string& what, const MarketParams& params,
                               const ContractSpec* spec, SurfaceKind kind);

void write_fee_surface(const FeeSurface& surface, const std::filesystem::path& path, DumpFormat format);
void write_control_surface(const ControlSurface& control, const FeeSurface& source, const std::filesystem::path& path,
                           DumpFormat format);

/// Reads a binary fee dump back using its sidecar.
FeeSurface read_fee_surface(const std::filesystem::path& path);
/// Reads a binary control dump back using its sidecar.
ControlSurface read_control_surface(const std::filesystem::path& path);

}  // namespace execfee
