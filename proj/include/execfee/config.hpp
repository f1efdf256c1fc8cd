#pragma once

/**
 * @file config.hpp
 * @brief Experiment configuration (JSON) and content hashes.
 *
 * Every field is optional; an empty object reproduces the baseline
 * calibration and grid.
 */

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "execfee/hjb_solver.hpp"
#include "execfee/market.hpp"
#include "execfee/simulator.hpp"

namespace execfee {

/// Regulatory p-sweep: fees over p_values for every sigma in sigmas.
struct RegulatoryConfig {
    double tau = 0.5;
    std::vector<double> p_values{0.0, 0.2, 0.5, 0.8, 1.0};
    std::vector<double> sigmas{1.0, 5.0};
};

/// One-parameter sweep; `grid` overrides the experiment grid for this sweep only.
struct SweepConfig {
    std::string parameter;
    std::vector<double> values;
    std::vector<ContractFamily> families;
    std::optional<GridSpec> grid;
};

/// Trajectory export settings.
struct PathsConfig {
    std::int64_t n_paths = 3;
    bool deterministic = true;  ///< Also export the zero-noise path
    std::vector<ContractFamily> families{ContractFamily::LinearPhysical, ContractFamily::LinearCash,
                                         ContractFamily::CollarPhysical, ContractFamily::CollarCash};
    std::vector<double> sigmas;  ///< Extra sigma values (one file set per value)
};

struct ExperimentConfig {
    MarketParams params{};
    GridSpec grid{};
    std::vector<ContractSpec> contracts;
    std::vector<ContractSpec> twap_contracts;
    std::optional<RegulatoryConfig> regulatory;
    std::optional<SimConfig> sim;
    std::vector<SweepConfig> sweeps;
    PathsConfig paths{};
    std::string output_dir = "out";
    int threads = 1;
};

/// Baseline experiment: the four standard contracts, both TWAP contracts,
/// the regulatory table, Monte-Carlo settings and the sensitivity sweeps.
ExperimentConfig default_config();

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

nlohmann::json params_to_json(const MarketParams& p);
nlohmann::json grid_to_json(const GridSpec& g);
nlohmann::json sim_to_json(const SimConfig& s);
nlohmann::json contract_to_json(const ContractSpec& c);

/// Sets a named MarketParams field (or tau / p); throws Config for unknown names.
void set_parameter(MarketParams& params, const std::string& name, double value);
bool is_sweepable(const std::string& name);

/// FNV-1a 64 over the bytes.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
/// Hash of the canonical (sorted-key, compact) JSON dump, as 16 hex digits.
std::string json_hash(const nlohmann::json& j);

void validate(const ExperimentConfig& cfg);

}  // namespace execfee
