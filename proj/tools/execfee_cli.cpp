// Command-line driver for the fee tables, expected payoffs and trajectories.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "execfee/config.hpp"
#include "execfee/errors.hpp"
#include "execfee/experiments.hpp"

namespace {

using namespace execfee;

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool dump = false;
};

ExperimentConfig resolve(const Options& o) {
    ExperimentConfig cfg = o.config.empty() ? default_config() : load_config(o.config);
    if (o.seed) {
        if (!cfg.sim) cfg.sim = SimConfig{};
        cfg.sim->seed = *o.seed;
    }
    if (o.threads) cfg.threads = *o.threads;
    if (!o.out.empty()) {
        cfg.output_dir = o.out;
    } else if (const char* env = std::getenv("EXECFEE_OUT"); env && *env) {
        cfg.output_dir = env;
    }
    validate(cfg);
    return cfg;
}

void print_fees(const std::vector<FeeRow>& rows) {
    for (const auto& r : rows) fmt::print("{:<16} {}\n", to_string(r.family), format_value(r.fee));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Indifference fees and optimal execution for M&A execution contracts"};
    app.require_subcommand(1);
    app.fallthrough();
    Options opt;
    app.add_option("--config", opt.config, "JSON experiment config (defaults reproduce the baseline)");
    app.add_option("--out", opt.out, "Output directory (overrides EXECFEE_OUT and the config)");
    app.add_option("--seed", opt.seed, "Monte-Carlo seed");
    app.add_option("--threads", opt.threads, "Worker threads")->check(CLI::PositiveNumber);

    auto* fees = app.add_subcommand("fees", "Fee of every configured contract at (0, q0, S0)");
    fees->add_flag("--dump-surfaces", opt.dump, "Also write binary fee/control surfaces with JSON sidecars");
    app.add_subcommand("paths", "Simulated and zero-noise trajectories");
    app.add_subcommand("statarb", "Expected payoff E[Y(T)] - X0 per contract");
    app.add_subcommand("regulatory", "Fee table over approval probabilities");
    app.add_subcommand("twap", "TWAP contract fees");
    app.add_subcommand("sweep", "One-parameter fee sweeps");
    app.add_subcommand("reproduce-all", "All tables plus a manifest");

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = resolve(opt);
        ArtifactWriter out(cfg.output_dir, json_hash(to_json(cfg)));
        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "fees") {
            print_fees(run_fees(cfg, out));
            if (opt.dump) dump_surfaces(cfg, out);
        } else if (cmd == "twap") {
            print_fees(run_twap(cfg, out));
        } else if (cmd == "statarb") {
            for (const auto& r : run_statarb(cfg, out)) {
                fmt::print("{:<16} {} +- {}{}\n", to_string(r.family), format_value(r.est.estimate),
                           format_value(r.est.stderr_), r.est.arbitrage ? "  arbitrage" : "");
            }
        } else if (cmd == "regulatory") {
            for (const auto& r : run_regulatory(cfg, out)) {
                fmt::print("sigma={:g} tau={:g} p={:g} {}\n", r.sigma, r.tau, r.p, format_value(r.fee));
            }
        } else if (cmd == "sweep") {
            for (const auto& r : run_sweep(cfg, out)) {
                fmt::print("{}={:g} {:<16} {}\n", r.parameter, r.value, r.contract, format_value(r.fee));
            }
        } else if (cmd == "paths") {
            run_paths(cfg, out);
        } else if (cmd == "reproduce-all") {
            reproduce_all(cfg, out);
        }
        out.commit();
        for (const auto& f : out.files()) fmt::print(stderr, "wrote {}\n", (out.out_dir() / f).string());
    } catch (const Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
