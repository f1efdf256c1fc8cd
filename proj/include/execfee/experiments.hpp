#pragma once

/**
 * @file experiments.hpp
 * @brief Table and trajectory pipelines behind the command-line tool.
 *
 * compute_* functions return rows; run_* functions also write CSV files via
 * an ArtifactWriter. Every CSV starts with a `# config_hash=<hex>` line.
 */

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "execfee/config.hpp"

namespace execfee {

/**
 * @brief Stages files in a hidden directory and moves them into place on commit.
 *
 * If the writer is destroyed without commit() the staged files are removed and
 * the output directory is left untouched.
 */
class ArtifactWriter {
public:
    ArtifactWriter(std::filesystem::path out_dir, std::string config_hash);
    ~ArtifactWriter();
    ArtifactWriter(const ArtifactWriter&) = delete;
    ArtifactWriter& operator=(const ArtifactWriter&) = delete;

    /// Staging path for a file; the name is recorded for commit.
    std::filesystem::path stage(const std::string& name);
    void write_text(const std::string& name, const std::string& content);
    /// Prepends the config-hash comment line.
    void write_csv(const std::string& name, const std::string& header, const std::vector<std::string>& rows);

    const std::string& config_hash() const noexcept { return hash_; }
    const std::vector<std::string>& files() const noexcept { return files_; }
    const std::filesystem::path& out_dir() const noexcept { return out_; }

    /// Renames every staged file into the output directory.
    void commit();

private:
    std::filesystem::path out_;
    std::filesystem::path staging_;
    std::string hash_;
    std::vector<std::string> files_;
    bool committed_ = false;
};

struct FeeRow {
    ContractFamily family{};
    double fee = 0.0;
    std::string grid_hash;
    std::string params_hash;
    std::vector<std::string> warnings;
};

struct StatRow {
    ContractFamily family{};
    PayoffEstimate est{};
};

struct RegulatoryRow {
    double sigma = 0.0;
    double tau = 0.0;
    double p = 0.0;
    double fee = 0.0;
};

struct SweepRow {
    std::string parameter;
    double value = 0.0;
    std::string contract;  ///< Family name, or "Regulatory" for tau / p sweeps
    double fee = 0.0;
};

/// Runs fn(k) for k in [0, n) on up to `threads` workers; exceptions propagate.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

std::vector<FeeRow> compute_fees(const std::vector<ContractSpec>& contracts, const MarketParams& params,
                                 const GridSpec& grid, double q0, double S0, int threads);
std::vector<StatRow> compute_statarb(const std::vector<ContractSpec>& contracts, const MarketParams& params,
                                     const GridSpec& grid, const SimConfig& sim, int threads);
std::vector<RegulatoryRow> compute_regulatory(const RegulatoryConfig& reg, const MarketParams& params,
                                              const GridSpec& grid, double q0, double S0, int threads);
std::vector<SweepRow> compute_sweep(const SweepConfig& sweep, const MarketParams& params, const GridSpec& grid,
                                    double tau, double q0, double S0, int threads);

std::vector<FeeRow> run_fees(const ExperimentConfig& cfg, ArtifactWriter& out);
std::vector<FeeRow> run_twap(const ExperimentConfig& cfg, ArtifactWriter& out);
std::vector<StatRow> run_statarb(const ExperimentConfig& cfg, ArtifactWriter& out);
std::vector<RegulatoryRow> run_regulatory(const ExperimentConfig& cfg, ArtifactWriter& out);
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, ArtifactWriter& out);
void run_paths(const ExperimentConfig& cfg, ArtifactWriter& out);
/// Fees, TWAP fees, expected payoffs, regulatory table and sweeps, plus manifest.json.
void reproduce_all(const ExperimentConfig& cfg, ArtifactWriter& out);

/// Writes fee and control dumps (binary + sidecar) for every configured contract.
void dump_surfaces(const ExperimentConfig& cfg, ArtifactWriter& out);

/// Number formatting shared by all tables.
std::string format_value(double x);

}  // namespace execfee
