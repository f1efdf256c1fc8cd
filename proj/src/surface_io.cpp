#include "execfee/surface_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <fmt/format.h>

#include "execfee/config.hpp"
#include "execfee/errors.hpp"

namespace execfee {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "binary dumps assume a little-endian host");

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".json");
}

void write_values(const LayeredField& field, const std::filesystem::path& path, DumpFormat format) {
    const auto& g = field.grid();
    if (format == DumpFormat::Binary) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(ErrorKind::InvalidArgument, fmt::format("cannot write '{}'", path.string()));
        for (int n : field.steps()) {
            const auto layer = field.layer(n);
            out.write(reinterpret_cast<const char*>(layer.data()), static_cast<std::streamsize>(layer.size_bytes()));
        }
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::InvalidArgument, fmt::format("cannot write '{}'", path.string()));
    out << "n,t,i,S,j,q,value\n";
    for (int n : field.steps()) {
        const auto layer = field.layer(n);
        for (int i = 0; i <= g.I; ++i) {
            for (int j = 0; j <= g.J; ++j) {
                out << fmt::format("{},{:.10g},{},{:.10g},{},{:.10g},{:.17g}\n", n, field.time(n), i, g.S(i), j, g.q(j),
                                   layer[field.index(i, j)]);
            }
        }
    }
}

void write_sidecar(const json& meta, const std::filesystem::path& path) {
    std::ofstream out(sidecar_path(path));
    if (!out) throw Error(ErrorKind::InvalidArgument, fmt::format("cannot write sidecar for '{}'", path.string()));
    out << meta.dump(2) << '\n';
}

json read_sidecar(const std::filesystem::path& path) {
    std::ifstream in(sidecar_path(path));
    if (!in) throw Error(ErrorKind::Config, fmt::format("missing sidecar for '{}'", path.string()));
    return json::parse(in);
}

GridSpec grid_from(const json& j) {
    GridSpec g;
    g.s_min = j.at("s_min");
    g.s_max = j.at("s_max");
    g.I = j.at("I");
    g.q_min = j.at("q_min");
    g.q_max = j.at("q_max");
    g.J = j.at("J");
    g.n_steps = j.at("n_steps");
    return g;
}

MarketParams params_from(const json& j) {
    MarketParams p;
    p.r = j.at("r");
    p.mu = j.at("mu");
    p.b = j.at("b");
    p.l = j.at("l");
    p.gamma = j.at("gamma");
    p.sigma = j.at("sigma");
    p.N = j.at("N");
    p.C = j.at("C");
    p.alpha = j.at("alpha");
    p.T = j.at("T");
    return p;
}

template <class Field>
void read_layers(Field& field, const json& meta, const std::filesystem::path& path) {
    if (meta.at("format") != "binary") {
        throw Error(ErrorKind::Config, fmt::format("'{}' is not a binary dump", path.string()));
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Config, fmt::format("cannot open '{}'", path.string()));
    for (int n : meta.at("steps").get<std::vector<int>>()) {
        std::vector<double> layer(field.layer_size());
        in.read(reinterpret_cast<char*>(layer.data()), static_cast<std::streamsize>(layer.size() * sizeof(double)));
        if (!in) throw Error(ErrorKind::Config, fmt::format("'{}' is truncated", path.string()));
        field.store_layer(n, std::move(layer));
    }
}

}  // namespace

json surface_sidecar(const LayeredField& field, const std::string& what, const MarketParams& params,
                     const ContractSpec* spec, SurfaceKind kind) {
    json j;
    j["content"] = what;
    j["kind"] = kind == SurfaceKind::Fee ? "fee" : "twap_transformed";
    j["layout"] = "time-major, then price index i, then inventory index j";
    j["grid"] = grid_to_json(field.grid());
    j["params"] = params_to_json(params);
    if (spec) j["contract"] = contract_to_json(*spec);
    j["steps"] = field.steps();
    return j;
}

void write_fee_surface(const FeeSurface& surface, const std::filesystem::path& path, DumpFormat format) {
    write_values(surface, path, format);
    auto meta = surface_sidecar(surface, "fee", surface.params, &surface.spec, surface.kind);
    meta["format"] = format == DumpFormat::Binary ? "binary" : "csv";
    meta["warnings"] = surface.warnings;
    write_sidecar(meta, path);
}

void write_control_surface(const ControlSurface& control, const FeeSurface& source, const std::filesystem::path& path,
                           DumpFormat format) {
    write_values(control, path, format);
    auto meta = surface_sidecar(control, "control", source.params, &source.spec, source.kind);
    meta["format"] = format == DumpFormat::Binary ? "binary" : "csv";
    write_sidecar(meta, path);
}

FeeSurface read_fee_surface(const std::filesystem::path& path) {
    const json meta = read_sidecar(path);
    const auto params = params_from(meta.at("params"));
    FeeSurface s(grid_from(meta.at("grid")), params.T);
    s.params = params;
    s.kind = meta.at("kind") == "fee" ? SurfaceKind::Fee : SurfaceKind::TwapTransformed;
    if (meta.contains("contract")) {
        const auto& c = meta.at("contract");
        s.spec.family = parse_family(c.at("family").get<std::string>());
        s.spec.K1 = c.at("K1");
        s.spec.K2 = c.at("K2");
        s.spec.liquidation_target = c.at("liquidation_target");
    }
    if (meta.contains("warnings")) s.warnings = meta.at("warnings").get<std::vector<std::string>>();
    read_layers(s, meta, path);
    return s;
}

ControlSurface read_control_surface(const std::filesystem::path& path) {
    const json meta = read_sidecar(path);
    const auto params = params_from(meta.at("params"));
    ControlSurface c(grid_from(meta.at("grid")), params.T);
    c.C = params.C;
    read_layers(c, meta, path);
    return c;
}

}  // namespace execfee
