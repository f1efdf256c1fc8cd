#include "execfee/experiments.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <fmt/format.h>
#include <unistd.h>

#include "execfee/errors.hpp"
#include "execfee/hjb_solver.hpp"
#include "execfee/surface_io.hpp"

namespace execfee {

namespace fs = std::filesystem;
using nlohmann::json;

ArtifactWriter::ArtifactWriter(fs::path out_dir, std::string config_hash)
    : out_(std::move(out_dir)), hash_(std::move(config_hash)) {
    fs::create_directories(out_);
    staging_ = out_ / fmt::format(".staging-{}-{}", hash_, static_cast<long>(::getpid()));
    fs::remove_all(staging_);
    fs::create_directories(staging_);
}

ArtifactWriter::~ArtifactWriter() {
    std::error_code ec;
    fs::remove_all(staging_, ec);
}

fs::path ArtifactWriter::stage(const std::string& name) {
    if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
    return staging_ / name;
}

void ArtifactWriter::write_text(const std::string& name, const std::string& content) {
    std::ofstream out(stage(name), std::ios::binary);
    if (!out) throw Error(ErrorKind::InvalidArgument, fmt::format("cannot write '{}'", name));
    out << content;
}

void ArtifactWriter::write_csv(const std::string& name, const std::string& header, const std::vector<std::string>& rows) {
    std::string text = fmt::format("# config_hash={}\n{}\n", hash_, header);
    for (const auto& r : rows) {
        text += r;
        text += '\n';
    }
    write_text(name, text);
}

void ArtifactWriter::commit() {
    for (const auto& f : files_) fs::rename(staging_ / f, out_ / f);
    committed_ = true;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
    if (workers <= 1) {
        for (std::size_t k = 0; k < n; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first;
    std::mutex mu;
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < n; k = next++) {
                    try {
                        fn(k);
                    } catch (...) {
                        std::lock_guard lock(mu);
                        if (!first) first = std::current_exception();
                    }
                }
            });
        }
    }
    if (first) std::rethrow_exception(first);
}

std::string format_value(double x) {
    if (std::isnan(x)) return "NA";
    return fmt::format("{:.10f}", x);
}

namespace {

SolverOptions endpoints_only() {
    SolverOptions o;
    o.keep_history = false;
    return o;
}

std::string name_of(ContractFamily f) { return std::string(to_string(f)); }

std::string sigma_tag(double sigma) { return fmt::format("sigma{:g}", sigma); }

double q0_of(const ExperimentConfig& cfg) { return cfg.sim ? cfg.sim->q0 : SimConfig{}.q0; }
double S0_of(const ExperimentConfig& cfg) { return cfg.sim ? cfg.sim->S0 : SimConfig{}.S0; }

std::string fee_header() { return "family,fee,grid_hash,params_hash"; }

std::vector<std::string> fee_lines(const std::vector<FeeRow>& rows) {
    std::vector<std::string> out;
    for (const auto& r : rows) {
        out.push_back(fmt::format("{},{},{},{}", name_of(r.family), format_value(r.fee), r.grid_hash, r.params_hash));
    }
    return out;
}

void report_warnings(const std::vector<FeeRow>& rows) {
    for (const auto& r : rows) {
        for (const auto& w : r.warnings) fmt::print(stderr, "warning [{}]: {}\n", name_of(r.family), w);
    }
}

}  // namespace

std::vector<FeeRow> compute_fees(const std::vector<ContractSpec>& contracts, const MarketParams& params,
                                 const GridSpec& grid, double q0, double S0, int threads) {
    std::vector<FeeRow> rows(contracts.size());
    const std::string gh = json_hash(grid_to_json(grid));
    const std::string ph = json_hash(params_to_json(params));
    parallel_for(contracts.size(), threads, [&](std::size_t k) {
        const auto surface = solve_contract(contracts[k], params, grid, endpoints_only());
        rows[k] = {contracts[k].family, surface.fee(0, q0, S0, S0), gh, ph, surface.warnings};
    });
    return rows;
}

std::vector<StatRow> compute_statarb(const std::vector<ContractSpec>& contracts, const MarketParams& params,
                                     const GridSpec& grid, const SimConfig& sim, int threads) {
    std::vector<StatRow> rows;
    // Surfaces are solved one at a time: each full history is large.
    for (const auto& spec : contracts) {
        const auto surface = solve_contract(spec, params, grid);
        const auto control = extract_control(surface);
        rows.push_back({spec.family, evaluate_policy(surface, control, sim, threads)});
    }
    return rows;
}

std::vector<RegulatoryRow> compute_regulatory(const RegulatoryConfig& reg, const MarketParams& params,
                                              const GridSpec& grid, double q0, double S0, int threads) {
    std::vector<RegulatoryRow> rows(reg.sigmas.size() * reg.p_values.size());
    std::vector<MarketParams> ps(reg.sigmas.size(), params);
    std::vector<RegulatoryResult> branches(reg.sigmas.size());
    parallel_for(reg.sigmas.size(), threads, [&](std::size_t s) {
        ps[s].sigma = reg.sigmas[s];
        branches[s] = solve_regulatory_branches(reg.tau, ps[s], grid, endpoints_only());
    });
    parallel_for(rows.size(), threads, [&](std::size_t k) {
        const std::size_t s = k / reg.p_values.size();
        const double p = reg.p_values[k % reg.p_values.size()];
        const auto pre = solve_pre_decision(branches[s], p, ps[s], grid, endpoints_only());
        rows[k] = {reg.sigmas[s], reg.tau, p, pre.fee(0, q0, S0)};
    });
    return rows;
}

std::vector<SweepRow> compute_sweep(const SweepConfig& sweep, const MarketParams& params, const GridSpec& grid,
                                    double tau, double q0, double S0, int threads) {
    const GridSpec& g = sweep.grid ? *sweep.grid : grid;
    if (sweep.parameter == "tau" || sweep.parameter == "p") {
        std::vector<SweepRow> rows(sweep.values.size());
        parallel_for(rows.size(), threads, [&](std::size_t k) {
            RegulatorySpec reg{0.5, tau};
            if (sweep.parameter == "tau") reg.tau = sweep.values[k];
            else reg.p = sweep.values[k];
            const auto res = solve_regulatory(reg, params, g, endpoints_only());
            rows[k] = {sweep.parameter, sweep.values[k], "Regulatory", res.pre.fee(0, q0, S0)};
        });
        return rows;
    }
    const std::size_t nf = sweep.families.size();
    std::vector<SweepRow> rows(sweep.values.size() * nf);
    parallel_for(rows.size(), threads, [&](std::size_t k) {
        MarketParams p = params;
        set_parameter(p, sweep.parameter, sweep.values[k / nf]);
        const auto spec = ContractSpec::make(sweep.families[k % nf], p);
        const auto surface = solve_contract(spec, p, g, endpoints_only());
        rows[k] = {sweep.parameter, sweep.values[k / nf], name_of(spec.family), surface.fee(0, q0, S0, S0)};
    });
    return rows;
}

std::vector<FeeRow> run_fees(const ExperimentConfig& cfg, ArtifactWriter& out) {
    auto rows = compute_fees(cfg.contracts, cfg.params, cfg.grid, q0_of(cfg), S0_of(cfg), cfg.threads);
    report_warnings(rows);
    out.write_csv("fees.csv", fee_header(), fee_lines(rows));
    return rows;
}

std::vector<FeeRow> run_twap(const ExperimentConfig& cfg, ArtifactWriter& out) {
    auto rows = compute_fees(cfg.twap_contracts, cfg.params, cfg.grid, q0_of(cfg), S0_of(cfg), cfg.threads);
    report_warnings(rows);
    out.write_csv("twap_fees.csv", fee_header(), fee_lines(rows));
    return rows;
}

std::vector<StatRow> run_statarb(const ExperimentConfig& cfg, ArtifactWriter& out) {
    if (!cfg.sim) throw Error(ErrorKind::Config, "sim: statarb needs Monte-Carlo settings");
    auto contracts = cfg.contracts;
    contracts.insert(contracts.end(), cfg.twap_contracts.begin(), cfg.twap_contracts.end());
    auto rows = compute_statarb(contracts, cfg.params, cfg.grid, *cfg.sim, cfg.threads);
    std::vector<std::string> lines;
    json summary = {{"config_hash", out.config_hash()}, {"n_paths", cfg.sim->n_paths}, {"seed", cfg.sim->seed},
                    {"rows", json::array()}};
    for (const auto& r : rows) {
        lines.push_back(fmt::format("{},{},{},{},{},{},{}", name_of(r.family), format_value(r.est.estimate),
                                    format_value(r.est.stderr_), r.est.arbitrage ? 1 : 0, r.est.n_paths, r.est.seed,
                                    format_value(r.est.fee)));
        summary["rows"].push_back({{"family", name_of(r.family)},
                                   {"estimate", format_value(r.est.estimate)},
                                   {"stderr", format_value(r.est.stderr_)},
                                   {"arbitrage", r.est.arbitrage},
                                   {"fee", format_value(r.est.fee)}});
    }
    out.write_csv("statarb.csv", "family,estimate,stderr,arbitrage,n_paths,seed,fee", lines);
    out.write_text("statarb.json", summary.dump(2) + "\n");
    return rows;
}

std::vector<RegulatoryRow> run_regulatory(const ExperimentConfig& cfg, ArtifactWriter& out) {
    if (!cfg.regulatory) throw Error(ErrorKind::Config, "regulatory: section missing");
    auto rows = compute_regulatory(*cfg.regulatory, cfg.params, cfg.grid, q0_of(cfg), S0_of(cfg), cfg.threads);
    std::vector<std::string> lines;
    for (const auto& r : rows) {
        lines.push_back(fmt::format("{:g},{:g},{:g},{}", r.sigma, r.tau, r.p, format_value(r.fee)));
    }
    out.write_csv("regulatory.csv", "sigma,tau,p,fee", lines);
    return rows;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, ArtifactWriter& out) {
    const double tau = cfg.regulatory ? cfg.regulatory->tau : RegulatoryConfig{}.tau;
    std::vector<SweepRow> all;
    std::vector<std::string> lines;
    for (const auto& s : cfg.sweeps) {
        auto rows = compute_sweep(s, cfg.params, cfg.grid, tau, q0_of(cfg), S0_of(cfg), cfg.threads);
        const std::string gh = json_hash(grid_to_json(s.grid ? *s.grid : cfg.grid));
        for (const auto& r : rows) {
            lines.push_back(fmt::format("{},{:g},{},{},{}", r.parameter, r.value, r.contract, format_value(r.fee), gh));
        }
        all.insert(all.end(), rows.begin(), rows.end());
    }
    out.write_csv("sweep.csv", "parameter,value,family,fee,grid_hash", lines);
    return all;
}

void run_paths(const ExperimentConfig& cfg, ArtifactWriter& out) {
    const SimConfig sim = cfg.sim ? *cfg.sim : SimConfig{};
    std::vector<double> sigmas{cfg.params.sigma};
    for (double s : cfg.paths.sigmas) {
        if (s != cfg.params.sigma) sigmas.push_back(s);
    }
    const bool tagged = !cfg.paths.sigmas.empty();
    for (double sigma : sigmas) {
        MarketParams params = cfg.params;
        params.sigma = sigma;
        const std::string suffix = tagged ? "_" + sigma_tag(sigma) : "";
        const auto noise = common_noise_batch(sim, params.T);
        std::vector<SimPath> reference;  // one path per family for the comparison file
        for (auto family : cfg.paths.families) {
            const auto spec = ContractSpec::make(family, params);
            const auto surface = solve_contract(spec, params, cfg.grid);
            const auto control = extract_control(surface);
            SimConfig start = sim;
            start.X0 = sim.X0 - sim.q0 * sim.S0 + surface.fee(0, sim.q0, sim.S0, sim.S0);
            auto emit = [&](const SimPath& p, const std::string& name) {
                std::vector<std::string> lines;
                for (std::size_t k = 0; k < p.times.size(); ++k) {
                    lines.push_back(fmt::format("{},{},{},{},{},{}", format_value(p.times[k]), format_value(p.S[k]),
                                                format_value(p.Q[k]), format_value(p.X[k]),
                                                k < p.v.size() ? format_value(p.v[k]) : std::string("NA"),
                                                format_value(p.A[k])));
                }
                out.write_csv(name, "t,S,Q,X,v,A", lines);
            };
            const std::string base = "paths_" + name_of(family) + suffix;
            std::optional<SimPath> first;
            if (cfg.paths.deterministic) {
                const std::vector<double> zero(static_cast<std::size_t>(sim.n_steps), 0.0);
                auto p = simulate_path(control, params, start, zero);
                emit(p, base + "_det.csv");
                first = std::move(p);
            }
            for (std::int64_t k = 0; k < cfg.paths.n_paths; ++k) {
                auto p = simulate_path(control, params, start, noise.increments(k));
                emit(p, fmt::format("{}_{}.csv", base, k));
                if (k == 0) first = std::move(p);
            }
            if (first) reference.push_back(std::move(*first));
        }
        if (reference.empty()) continue;
        std::string header = "t";
        for (auto f : cfg.paths.families) header += fmt::format(",S_{0},Q_{0},v_{0}", name_of(f));
        std::vector<std::string> lines;
        for (std::size_t k = 0; k < reference.front().times.size(); ++k) {
            std::string line = format_value(reference.front().times[k]);
            for (const auto& p : reference) {
                line += fmt::format(",{},{},{}", format_value(p.S[k]), format_value(p.Q[k]),
                                    k < p.v.size() ? format_value(p.v[k]) : std::string("NA"));
            }
            lines.push_back(line);
        }
        out.write_csv("paths_comparison" + suffix + ".csv", header, lines);
    }
}

void dump_surfaces(const ExperimentConfig& cfg, ArtifactWriter& out) {
    auto contracts = cfg.contracts;
    contracts.insert(contracts.end(), cfg.twap_contracts.begin(), cfg.twap_contracts.end());
    for (const auto& spec : contracts) {
        const auto surface = solve_contract(spec, cfg.params, cfg.grid);
        const auto control = extract_control(surface);
        const std::string base = "surface_" + name_of(spec.family);
        write_fee_surface(surface, out.stage(base + "_fee.bin"), DumpFormat::Binary);
        out.stage(base + "_fee.bin.json");
        write_control_surface(control, surface, out.stage(base + "_control.bin"), DumpFormat::Binary);
        out.stage(base + "_control.bin.json");
    }
}

void reproduce_all(const ExperimentConfig& cfg, ArtifactWriter& out) {
    run_fees(cfg, out);
    run_twap(cfg, out);
    if (cfg.sim) run_statarb(cfg, out);
    if (cfg.regulatory) run_regulatory(cfg, out);
    if (!cfg.sweeps.empty()) run_sweep(cfg, out);
    out.write_text("config.resolved.json", to_json(cfg).dump(2) + "\n");

    json manifest = {{"config_hash", out.config_hash()}, {"files", json::array()}};
    if (cfg.sim) manifest["seed"] = cfg.sim->seed;
    const auto names = out.files();
    for (const auto& name : names) {
        std::ifstream in(out.stage(name), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        const std::string bytes = ss.str();
        manifest["files"].push_back({{"name", name}, {"bytes", bytes.size()}, {"fnv1a64", fmt::format("{:016x}", fnv1a64(bytes))}});
    }
    out.write_text("manifest.json", manifest.dump(2) + "\n");
}

}  // namespace execfee
