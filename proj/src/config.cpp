#include "execfee/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <fmt/format.h>

#include "execfee/errors.hpp"

namespace execfee {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
    throw Error(ErrorKind::Config, fmt::format("{}: {}", where, what));
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) config_error(where, "expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!ok.count(it.key())) config_error(where + "." + it.key(), "unknown field");
    }
}

double get_number(const json& j, const std::string& where) {
    if (!j.is_number()) config_error(where, "expected a number");
    return j.get<double>();
}

template <class T>
T get_integer(const json& j, const std::string& where) {
    if (!j.is_number_integer() && !j.is_number_unsigned()) config_error(where, "expected an integer");
    return j.get<T>();
}

void read_number(const json& j, const char* key, double& out, const std::string& where) {
    if (j.contains(key)) out = get_number(j.at(key), where + "." + key);
}

std::vector<double> get_number_list(const json& j, const std::string& where) {
    if (!j.is_array()) config_error(where, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(get_number(j[k], fmt::format("{}[{}]", where, k)));
    return out;
}

ContractFamily get_family(const json& j, const std::string& where) {
    if (!j.is_string()) config_error(where, "expected a contract family name");
    try {
        return parse_family(j.get<std::string>());
    } catch (const Error& e) {
        config_error(where, e.what());
    }
}

std::vector<ContractFamily> get_family_list(const json& j, const std::string& where) {
    if (!j.is_array()) config_error(where, "expected an array of family names");
    std::vector<ContractFamily> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(get_family(j[k], fmt::format("{}[{}]", where, k)));
    return out;
}

MarketParams parse_params(const json& j, MarketParams p) {
    const std::string w = "params";
    check_keys(j, w, {"r", "mu", "b", "l", "gamma", "sigma", "N", "C", "alpha", "T"});
    read_number(j, "r", p.r, w);
    read_number(j, "mu", p.mu, w);
    read_number(j, "b", p.b, w);
    read_number(j, "l", p.l, w);
    read_number(j, "gamma", p.gamma, w);
    read_number(j, "sigma", p.sigma, w);
    read_number(j, "N", p.N, w);
    read_number(j, "C", p.C, w);
    read_number(j, "alpha", p.alpha, w);
    read_number(j, "T", p.T, w);
    return p;
}

GridSpec parse_grid(const json& j, GridSpec g, const std::string& w) {
    check_keys(j, w, {"s_min", "s_max", "I", "q_min", "q_max", "J", "n_steps"});
    read_number(j, "s_min", g.s_min, w);
    read_number(j, "s_max", g.s_max, w);
    read_number(j, "q_min", g.q_min, w);
    read_number(j, "q_max", g.q_max, w);
    if (j.contains("I")) g.I = get_integer<int>(j.at("I"), w + ".I");
    if (j.contains("J")) g.J = get_integer<int>(j.at("J"), w + ".J");
    if (j.contains("n_steps")) g.n_steps = get_integer<int>(j.at("n_steps"), w + ".n_steps");
    return g;
}

SimConfig parse_sim(const json& j, SimConfig s) {
    const std::string w = "sim";
    check_keys(j, w, {"n_paths", "n_steps", "seed", "X0", "q0", "S0"});
    if (j.contains("n_paths")) s.n_paths = get_integer<std::int64_t>(j.at("n_paths"), w + ".n_paths");
    if (j.contains("n_steps")) s.n_steps = get_integer<int>(j.at("n_steps"), w + ".n_steps");
    if (j.contains("seed")) s.seed = get_integer<std::uint64_t>(j.at("seed"), w + ".seed");
    read_number(j, "X0", s.X0, w);
    read_number(j, "q0", s.q0, w);
    read_number(j, "S0", s.S0, w);
    return s;
}

std::vector<ContractSpec> parse_contracts(const json& j, const MarketParams& p, const std::string& w) {
    if (!j.is_array()) config_error(w, "expected an array of contracts");
    std::vector<ContractSpec> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        const std::string wk = fmt::format("{}[{}]", w, k);
        const json& c = j[k];
        if (c.is_string()) {
            out.push_back(ContractSpec::make(get_family(c, wk), p));
            continue;
        }
        check_keys(c, wk, {"family", "K1", "K2"});
        if (!c.contains("family")) config_error(wk + ".family", "missing");
        ContractSpec spec = ContractSpec::make(get_family(c.at("family"), wk + ".family"), p);
        read_number(c, "K1", spec.K1, wk);
        read_number(c, "K2", spec.K2, wk);
        out.push_back(spec);
    }
    return out;
}

const std::vector<std::string>& param_names() {
    static const std::vector<std::string> names{"r", "mu", "b", "l", "gamma", "sigma", "N", "C", "alpha", "T"};
    return names;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string json_hash(const json& j) { return fmt::format("{:016x}", fnv1a64(j.dump())); }

bool is_sweepable(const std::string& name) {
    for (const auto& n : param_names()) {
        if (n == name) return true;
    }
    return name == "tau" || name == "p";
}

void set_parameter(MarketParams& params, const std::string& name, double value) {
    if (name == "r") params.r = value;
    else if (name == "mu") params.mu = value;
    else if (name == "b") params.b = value;
    else if (name == "l") params.l = value;
    else if (name == "gamma") params.gamma = value;
    else if (name == "sigma") params.sigma = value;
    else if (name == "N") params.N = value;
    else if (name == "C") params.C = value;
    else if (name == "alpha") params.alpha = value;
    else if (name == "T") params.T = value;
    else throw Error(ErrorKind::Config, fmt::format("'{}' is not a market parameter", name));
}

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    for (auto f : {ContractFamily::LinearPhysical, ContractFamily::LinearCash, ContractFamily::CollarPhysical,
                   ContractFamily::CollarCash}) {
        cfg.contracts.push_back(ContractSpec::make(f, cfg.params));
    }
    for (auto f : {ContractFamily::TwapPhysical, ContractFamily::TwapCash}) {
        cfg.twap_contracts.push_back(ContractSpec::make(f, cfg.params));
    }
    cfg.regulatory = RegulatoryConfig{};
    cfg.sim = SimConfig{};
    const std::vector<ContractFamily> four{ContractFamily::LinearPhysical, ContractFamily::LinearCash,
                                           ContractFamily::CollarPhysical, ContractFamily::CollarCash};
    GridSpec wide = cfg.grid;
    wide.q_max = 3.0;
    wide.J = 200;
    cfg.sweeps = {
        {"r", {0.01}, four, std::nullopt},
        {"sigma", {6.0, 7.0}, four, std::nullopt},
        {"mu", {-0.5}, four, std::nullopt},
        // A positive drift pushes the optimal inventory above N.
        {"mu", {0.5}, four, wide},
        {"gamma", {0.001, 0.005}, four, std::nullopt},
        {"l", {0.002, 0.003}, four, std::nullopt},
        {"alpha", {0.002, 0.02}, four, std::nullopt},
    };
    return cfg;
}

ExperimentConfig config_from_json(const json& j) {
    check_keys(j, "config",
               {"params", "grid", "contracts", "twap_contracts", "regulatory", "sim", "sweeps", "paths", "output_dir",
                "threads"});
    ExperimentConfig cfg = default_config();
    if (j.contains("params")) cfg.params = parse_params(j.at("params"), cfg.params);
    if (j.contains("grid")) cfg.grid = parse_grid(j.at("grid"), cfg.grid, "grid");
    // Targets depend on N, so contracts are rebuilt after params are known.
    cfg.contracts = parse_contracts(
        j.value("contracts", json::array({"LinearPhysical", "LinearCash", "CollarPhysical", "CollarCash"})), cfg.params,
        "contracts");
    cfg.twap_contracts =
        parse_contracts(j.value("twap_contracts", json::array({"TwapPhysical", "TwapCash"})), cfg.params, "twap_contracts");
    if (j.contains("regulatory")) {
        const json& r = j.at("regulatory");
        if (r.is_null()) {
            cfg.regulatory.reset();
        } else {
            check_keys(r, "regulatory", {"tau", "p", "sigma"});
            RegulatoryConfig rc;
            read_number(r, "tau", rc.tau, "regulatory");
            if (r.contains("p")) rc.p_values = get_number_list(r.at("p"), "regulatory.p");
            if (r.contains("sigma")) rc.sigmas = get_number_list(r.at("sigma"), "regulatory.sigma");
            cfg.regulatory = rc;
        }
    }
    if (j.contains("sim")) {
        if (j.at("sim").is_null()) cfg.sim.reset();
        else cfg.sim = parse_sim(j.at("sim"), SimConfig{});
    }
    if (j.contains("sweeps")) {
        const json& s = j.at("sweeps");
        if (!s.is_array()) config_error("sweeps", "expected an array");
        cfg.sweeps.clear();
        for (std::size_t k = 0; k < s.size(); ++k) {
            const std::string w = fmt::format("sweeps[{}]", k);
            check_keys(s[k], w, {"parameter", "values", "families", "grid"});
            SweepConfig sc;
            if (!s[k].contains("parameter") || !s[k].at("parameter").is_string()) {
                config_error(w + ".parameter", "expected a parameter name");
            }
            sc.parameter = s[k].at("parameter").get<std::string>();
            if (!s[k].contains("values")) config_error(w + ".values", "missing");
            sc.values = get_number_list(s[k].at("values"), w + ".values");
            sc.families = s[k].contains("families") ? get_family_list(s[k].at("families"), w + ".families")
                                                    : std::vector<ContractFamily>{ContractFamily::LinearPhysical,
                                                                                  ContractFamily::LinearCash,
                                                                                  ContractFamily::CollarPhysical,
                                                                                  ContractFamily::CollarCash};
            if (s[k].contains("grid")) sc.grid = parse_grid(s[k].at("grid"), cfg.grid, w + ".grid");
            cfg.sweeps.push_back(sc);
        }
    }
    if (j.contains("paths")) {
        const json& p = j.at("paths");
        check_keys(p, "paths", {"n_paths", "deterministic", "families", "sigma"});
        if (p.contains("n_paths")) cfg.paths.n_paths = get_integer<std::int64_t>(p.at("n_paths"), "paths.n_paths");
        if (p.contains("deterministic")) {
            if (!p.at("deterministic").is_boolean()) config_error("paths.deterministic", "expected a boolean");
            cfg.paths.deterministic = p.at("deterministic").get<bool>();
        }
        if (p.contains("families")) cfg.paths.families = get_family_list(p.at("families"), "paths.families");
        if (p.contains("sigma")) cfg.paths.sigmas = get_number_list(p.at("sigma"), "paths.sigma");
    }
    if (j.contains("output_dir")) {
        if (!j.at("output_dir").is_string()) config_error("output_dir", "expected a string");
        cfg.output_dir = j.at("output_dir").get<std::string>();
    }
    if (j.contains("threads")) cfg.threads = get_integer<int>(j.at("threads"), "threads");
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, fmt::format("cannot open config file '{}'", path.string()));
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Config, fmt::format("{}: {}", path.string(), e.what()));
    }
    return config_from_json(j);
}

void validate(const ExperimentConfig& cfg) {
    auto wrap = [](const std::string& where, auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            config_error(where, e.what());
        }
    };
    wrap("params", [&] { cfg.params.validate(); });
    wrap("grid", [&] { cfg.grid.validate(); });
    for (std::size_t k = 0; k < cfg.contracts.size(); ++k) {
        wrap(fmt::format("contracts[{}]", k), [&] { cfg.contracts[k].validate(cfg.params); });
    }
    for (std::size_t k = 0; k < cfg.twap_contracts.size(); ++k) {
        if (!is_twap(cfg.twap_contracts[k].family)) config_error(fmt::format("twap_contracts[{}]", k), "not a TWAP family");
    }
    if (cfg.regulatory) {
        if (!(cfg.regulatory->tau > 0 && cfg.regulatory->tau < cfg.params.T)) config_error("regulatory.tau", "must lie in (0, T)");
        for (double p : cfg.regulatory->p_values) {
            if (!(p >= 0 && p <= 1)) config_error("regulatory.p", fmt::format("{} is outside [0, 1]", p));
        }
        for (double s : cfg.regulatory->sigmas) {
            if (!(s > 0)) config_error("regulatory.sigma", fmt::format("{} is not positive", s));
        }
    }
    if (cfg.sim) wrap("sim", [&] { cfg.sim->validate(); });
    for (std::size_t k = 0; k < cfg.sweeps.size(); ++k) {
        const auto& s = cfg.sweeps[k];
        if (!is_sweepable(s.parameter)) {
            config_error(fmt::format("sweeps[{}].parameter", k),
                         fmt::format("'{}' is not a MarketParams or regulatory field", s.parameter));
        }
        if (s.grid) wrap(fmt::format("sweeps[{}].grid", k), [&] { s.grid->validate(); });
    }
    if (cfg.paths.n_paths < 0) config_error("paths.n_paths", "must be >= 0");
    if (cfg.threads < 1) config_error("threads", "must be >= 1");
}

json params_to_json(const MarketParams& p) {
    return {{"r", p.r},         {"mu", p.mu}, {"b", p.b}, {"l", p.l},         {"gamma", p.gamma},
            {"sigma", p.sigma}, {"N", p.N},   {"C", p.C}, {"alpha", p.alpha}, {"T", p.T}};
}

json grid_to_json(const GridSpec& g) {
    return {{"s_min", g.s_min}, {"s_max", g.s_max}, {"I", g.I},          {"q_min", g.q_min},
            {"q_max", g.q_max}, {"J", g.J},         {"n_steps", g.n_steps}};
}

json sim_to_json(const SimConfig& s) {
    return {{"n_paths", s.n_paths}, {"n_steps", s.n_steps}, {"seed", s.seed},
            {"X0", s.X0},           {"q0", s.q0},           {"S0", s.S0}};
}

json contract_to_json(const ContractSpec& c) {
    return {{"family", std::string(to_string(c.family))}, {"K1", c.K1}, {"K2", c.K2},
            {"liquidation_target", c.liquidation_target}};
}

json to_json(const ExperimentConfig& cfg) {
    json j;
    j["params"] = params_to_json(cfg.params);
    j["grid"] = grid_to_json(cfg.grid);
    j["contracts"] = json::array();
    for (const auto& c : cfg.contracts) j["contracts"].push_back(contract_to_json(c));
    j["twap_contracts"] = json::array();
    for (const auto& c : cfg.twap_contracts) j["twap_contracts"].push_back(contract_to_json(c));
    if (cfg.regulatory) {
        j["regulatory"] = {{"tau", cfg.regulatory->tau}, {"p", cfg.regulatory->p_values}, {"sigma", cfg.regulatory->sigmas}};
    } else {
        j["regulatory"] = nullptr;
    }
    j["sim"] = cfg.sim ? sim_to_json(*cfg.sim) : json(nullptr);
    j["sweeps"] = json::array();
    for (const auto& s : cfg.sweeps) {
        json e = {{"parameter", s.parameter}, {"values", s.values}, {"families", json::array()}};
        for (auto f : s.families) e["families"].push_back(std::string(to_string(f)));
        if (s.grid) e["grid"] = grid_to_json(*s.grid);
        j["sweeps"].push_back(e);
    }
    json pf = json::array();
    for (auto f : cfg.paths.families) pf.push_back(std::string(to_string(f)));
    j["paths"] = {{"n_paths", cfg.paths.n_paths},
                  {"deterministic", cfg.paths.deterministic},
                  {"families", pf},
                  {"sigma", cfg.paths.sigmas}};
    // output_dir and threads do not change results and stay out of the hash.
    return j;
}

}  // namespace execfee
