#include "lab/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace kpzlab {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
}

std::vector<double> number_array(const json& j, const char* key, const std::string& origin) {
    if (!j.contains(key)) throw ConfigError(origin + ": missing \"" + key + "\"");
    const json& a = j.at(key);
    if (!a.is_array()) throw ConfigError(origin + ": \"" + std::string(key) + "\" must be an array");
    std::vector<double> out;
    for (const auto& v : a) {
        if (!v.is_number()) throw ConfigError(origin + ": \"" + std::string(key) + "\" holds a non-number");
        out.push_back(v.get<double>());
    }
    return out;
}

GridSpec grid_from_json(const json& j, const std::string& origin) {
    if (!j.is_object()) throw ConfigError(origin + ": grid must be an object with taus, xs, hs");
    GridSpec g;
    g.taus = number_array(j, "taus", origin);
    g.xs = j.contains("xs") ? number_array(j, "xs", origin) : std::vector<double>(g.taus.size(), 0.0);
    g.hs = j.contains("hs") ? number_array(j, "hs", origin) : std::vector<double>(g.taus.size(), 0.0);
    return g;
}

kpzcond::bridge::Condition parse_condition(const std::string& s) {
    if (s == "step") return kpzcond::bridge::Condition::Step;
    if (s == "flat") return kpzcond::bridge::Condition::Flat;
    throw ConfigError("condition must be step or flat, got \"" + s + "\"");
}

Format parse_format(const std::string& s) {
    if (s == "csv") return Format::Csv;
    if (s == "json") return Format::Json;
    throw ConfigError("format must be csv or json, got \"" + s + "\"");
}

const json* find_key(const json& j, std::initializer_list<const char*> names) {
    for (const char* n : names)
        if (j.contains(n)) return &j.at(n);
    return nullptr;
}

template <class T>
T get_as(const json& v, const char* key) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key \"") + key + "\" has the wrong type");
    }
}

void apply_file(ExperimentConfig& cfg, const std::string& path) {
    const json j = parse_json(slurp(path), path);
    if (!j.is_object()) throw ConfigError(path + ": config must be a JSON object");
    static const std::vector<std::string> known = {"grid",       "condition",  "L",    "nodes", "radius",
                                                   "z-radius",   "z_radius",   "seed", "out",   "format",
                                                   "mc-samples", "mc_samples", "timing"};
    for (const auto& item : j.items())
        if (std::find(known.begin(), known.end(), item.key()) == known.end())
            throw ConfigError(path + ": unknown key \"" + item.key() + "\"");

    if (const json* v = find_key(j, {"grid"})) {
        if (v->is_string()) {
            fs::path p = v->get<std::string>();
            if (p.is_relative()) p = fs::path(path).parent_path() / p;
            cfg.grid = load_grid_file(p.string());
        } else {
            cfg.grid = grid_from_json(*v, path);
        }
    }
    if (const json* v = find_key(j, {"condition"})) cfg.condition = parse_condition(get_as<std::string>(*v, "condition"));
    if (const json* v = find_key(j, {"L"})) {
        if (v->is_string())
            cfg.Ls = parse_L_list(v->get<std::string>());
        else
            cfg.Ls = get_as<std::vector<double>>(*v, "L");
    }
    if (const json* v = find_key(j, {"nodes"})) cfg.nodes = get_as<int>(*v, "nodes");
    if (const json* v = find_key(j, {"radius"})) cfg.radius = get_as<double>(*v, "radius");
    if (const json* v = find_key(j, {"z-radius", "z_radius"})) cfg.z_radius = get_as<double>(*v, "z-radius");
    if (const json* v = find_key(j, {"mc-samples", "mc_samples"}))
        cfg.mc_samples = get_as<std::uint64_t>(*v, "mc-samples");
    if (const json* v = find_key(j, {"seed"})) cfg.seed = get_as<std::uint64_t>(*v, "seed");
    if (const json* v = find_key(j, {"out"})) cfg.out = get_as<std::string>(*v, "out");
    if (const json* v = find_key(j, {"format"})) cfg.format = parse_format(get_as<std::string>(*v, "format"));
    if (const json* v = find_key(j, {"timing"})) cfg.timing = get_as<bool>(*v, "timing");
}

void require_cfg(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

bool finite_all(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void check_grid_shape(const GridSpec& g) {
    require_cfg(!g.taus.empty(), "grid: taus is empty");
    require_cfg(g.xs.size() == g.taus.size() && g.hs.size() == g.taus.size(),
                "grid: taus, xs and hs must have equal length");
    require_cfg(finite_all(g.taus) && finite_all(g.xs) && finite_all(g.hs), "grid: values must be finite");
    for (double t : g.taus) require_cfg(t > 0.0 && t < 1.0, "grid: taus must lie in (0, 1)");
}

void check_strict(const GridSpec& g) {
    for (std::size_t j = 1; j < g.taus.size(); ++j)
        require_cfg(g.taus[j] > g.taus[j - 1], "grid: taus must be strictly increasing for this command");
}

}  // namespace

GridSpec parse_grid_text(const std::string& text, const std::string& origin) {
    return grid_from_json(parse_json(text, origin), origin);
}

GridSpec load_grid_file(const std::string& path) { return parse_grid_text(slurp(path), path); }

std::vector<double> parse_L_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw ConfigError("--L: cannot parse \"" + item + "\"");
        }
        while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
        if (used != item.size()) throw ConfigError("--L: cannot parse \"" + item + "\"");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("--L: empty list");
    return out;
}

ExperimentConfig build_config(const std::string& command, const std::optional<std::string>& config_file,
                              const FlagValues& flags) {
    ExperimentConfig cfg;
    cfg.command = command;
    if (config_file) apply_file(cfg, *config_file);
    if (flags.grid_file) cfg.grid = load_grid_file(*flags.grid_file);
    if (flags.condition) cfg.condition = parse_condition(*flags.condition);
    if (flags.Ls) cfg.Ls = parse_L_list(*flags.Ls);
    if (flags.nodes) cfg.nodes = flags.nodes;
    if (flags.radius) cfg.radius = flags.radius;
    if (flags.z_radius) cfg.z_radius = *flags.z_radius;
    if (flags.mc_samples) cfg.mc_samples = flags.mc_samples;
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out) cfg.out = *flags.out;
    if (flags.format) cfg.format = parse_format(*flags.format);
    if (flags.timing) cfg.timing = true;
    validate(cfg);
    return cfg;
}

void validate(const ExperimentConfig& cfg) {
    const std::string& c = cfg.command;
    require_cfg(c == "tw" || c == "limit" || c == "converge" || c == "smalln" || c == "sample",
                "unknown command \"" + c + "\"");
    if (cfg.Ls) {
        require_cfg(!cfg.Ls->empty() && finite_all(*cfg.Ls), "L values must be finite");
        if (c != "tw")
            for (double L : *cfg.Ls) require_cfg(L > 0.0, "L values must be positive");
    }
    if (cfg.nodes) require_cfg(*cfg.nodes >= 8 && *cfg.nodes <= 1024, "nodes must lie in [8, 1024]");
    if (cfg.radius) require_cfg(std::isfinite(*cfg.radius) && *cfg.radius >= 0.0, "radius must be >= 0 (0 = auto)");
    require_cfg(std::isfinite(cfg.z_radius) && cfg.z_radius > 1.0, "z-radius must exceed 1");
    if (cfg.mc_samples)
        require_cfg(*cfg.mc_samples >= 2 && *cfg.mc_samples <= 100000000ULL, "mc-samples must lie in [2, 1e8]");

    if (!cfg.out.empty()) {
        const fs::path parent = fs::path(cfg.out).parent_path();
        require_cfg(parent.empty() || fs::is_directory(parent), "out: directory " + parent.string() + " does not exist");
    }

    if (c == "limit") {
        check_grid_shape(cfg.grid);
    } else if (c == "converge") {
        check_grid_shape(cfg.grid);
        check_strict(cfg.grid);
        require_cfg(cfg.grid.taus.size() + 1 <= 3, "converge: at most 2 interior grid points");
    } else if (c == "smalln") {
        check_grid_shape(cfg.grid);
        require_cfg(cfg.grid.taus.size() == 1, "smalln: the grid must have exactly one interior point");
        require_cfg(cfg.condition == kpzcond::bridge::Condition::Step, "smalln: only the step condition is supported");
    } else if (c == "sample") {
        check_grid_shape(cfg.grid);
        check_strict(cfg.grid);
    } else if (c == "tw" && cfg.Ls) {
        for (double L : *cfg.Ls)
            require_cfg(L >= kTwMinL && L <= kTwMaxL, "tw: L = " + std::to_string(L) + " outside [" +
                                                          std::to_string(kTwMinL) + ", " + std::to_string(kTwMaxL) +
                                                          "]");
    }
}

}  // namespace kpzlab
