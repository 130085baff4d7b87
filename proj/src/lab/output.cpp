#include "lab/output.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace kpzlab {

namespace {

std::string json_string(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
        switch (ch) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(ch) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", ch);
                    out += buf;
                } else {
                    out += ch;
                }
        }
    }
    return out + "\"";
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::string cell_csv(const Cell& c) {
    if (const double* d = std::get_if<double>(&c)) return format_double(*d);
    if (const std::int64_t* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    return csv_field(std::get<std::string>(c));
}

std::string cell_json(const Cell& c) {
    if (const double* d = std::get_if<double>(&c)) return std::isfinite(*d) ? format_double(*d) : "null";
    if (const std::int64_t* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    return json_string(std::get<std::string>(c));
}

const char* condition_name(kpzcond::bridge::Condition c) {
    return c == kpzcond::bridge::Condition::Step ? "step" : "flat";
}

std::string number_list(const std::vector<double>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
    return out + "]";
}

std::string config_json(const ExperimentConfig& cfg) {
    std::string s = "{";
    s += "\"command\": " + json_string(cfg.command);
    s += ", \"grid\": {\"taus\": " + number_list(cfg.grid.taus) + ", \"xs\": " + number_list(cfg.grid.xs) +
         ", \"hs\": " + number_list(cfg.grid.hs) + "}";
    s += ", \"condition\": " + json_string(condition_name(cfg.condition));
    if (cfg.Ls) s += ", \"L\": " + number_list(*cfg.Ls);
    if (cfg.nodes) s += ", \"nodes\": " + std::to_string(*cfg.nodes);
    if (cfg.radius) s += ", \"radius\": " + format_double(*cfg.radius);
    s += ", \"z-radius\": " + format_double(cfg.z_radius);
    if (cfg.mc_samples) s += ", \"mc-samples\": " + std::to_string(*cfg.mc_samples);
    s += ", \"seed\": " + std::to_string(cfg.seed);
    return s + "}";
}

std::string extra_path(const std::string& out, const std::string& name) {
    const std::filesystem::path p(out);
    std::filesystem::path q = p.parent_path() / (p.stem().string() + "." + name + p.extension().string());
    return q.string();
}

}  // namespace

void Table::add_row(std::vector<Cell> row) {
    if (row.size() != columns.size())
        throw std::logic_error("table " + name + ": row width " + std::to_string(row.size()) + " != " +
                               std::to_string(columns.size()));
    rows.push_back(std::move(row));
}

std::size_t Table::column(const std::string& col) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == col) return i;
    throw std::out_of_range("table " + name + " has no column " + col);
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) v = 0.0;  // drop the sign of -0
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

void write_csv(std::ostream& os, const Table& t, const std::string& command) {
    os << "# kpzlab schema_version=" << kSchemaVersion << " command=" << command << " table=" << t.name << '\n';
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << cell_csv(row[i]);
        os << '\n';
    }
}

void write_json(std::ostream& os, const std::vector<Table>& tables, const ExperimentConfig& cfg) {
    os << "{\n  \"schema_version\": " << kSchemaVersion << ",\n  \"command\": " << json_string(cfg.command)
       << ",\n  \"config\": " << config_json(cfg) << ",\n  \"tables\": [";
    for (std::size_t k = 0; k < tables.size(); ++k) {
        const Table& t = tables[k];
        os << (k ? ",\n" : "\n") << "    {\n      \"name\": " << json_string(t.name) << ",\n      \"columns\": [";
        for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? ", " : "") << json_string(t.columns[i]);
        os << "],\n      \"rows\": [";
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            os << (r ? ",\n" : "\n") << "        {";
            for (std::size_t i = 0; i < t.columns.size(); ++i)
                os << (i ? ", " : "") << json_string(t.columns[i]) << ": " << cell_json(t.rows[r][i]);
            os << "}";
        }
        os << (t.rows.empty() ? "]\n    }" : "\n      ]\n    }");
    }
    os << "\n  ]\n}\n";
}

std::vector<std::string> output_paths(const std::vector<Table>& tables, const ExperimentConfig& cfg) {
    if (cfg.out.empty()) return {};
    if (cfg.format == Format::Json) return {cfg.out};
    std::vector<std::string> paths;
    for (std::size_t k = 0; k < tables.size(); ++k)
        paths.push_back(k == 0 ? cfg.out : extra_path(cfg.out, tables[k].name));
    return paths;
}

void emit(const std::vector<Table>& tables, const ExperimentConfig& cfg) {
    if (cfg.out.empty()) {
        if (cfg.format == Format::Json) {
            write_json(std::cout, tables, cfg);
        } else {
            for (std::size_t k = 0; k < tables.size(); ++k) {
                if (k) std::cout << '\n';
                write_csv(std::cout, tables[k], cfg.command);
            }
        }
        std::cout.flush();
        return;
    }
    const auto paths = output_paths(tables, cfg);
    auto open = [](const std::string& p) {
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        if (!f) throw ConfigError("cannot open output file " + p);
        return f;
    };
    if (cfg.format == Format::Json) {
        auto f = open(paths[0]);
        write_json(f, tables, cfg);
        return;
    }
    for (std::size_t k = 0; k < tables.size(); ++k) {
        auto f = open(paths[k]);
        write_csv(f, tables[k], cfg.command);
    }
}

}  // namespace kpzlab
