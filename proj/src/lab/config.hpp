#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kpzcond/bridge_laws.hpp"

namespace kpzlab {

enum class Format { Csv, Json };

/// tw table range: the flat columns need 2^{2/3} L inside the Painleve mesh.
inline constexpr double kTwMinL = -6.25;
inline constexpr double kTwMaxL = 40.0;

/// Interior grid points; the terminal point (1, 0, 0) is implied.
struct GridSpec {
    std::vector<double> taus{0.5};
    std::vector<double> xs{0.0};
    std::vector<double> hs{0.0};
};

/// Settings shared by all subcommands. Unset optionals fall back to a
/// per-command default.
struct ExperimentConfig {
    std::string command;
    GridSpec grid;
    kpzcond::bridge::Condition condition = kpzcond::bridge::Condition::Step;
    std::optional<std::vector<double>> Ls;
    std::optional<int> nodes;
    std::optional<double> radius;
    double z_radius = 2.0;
    std::optional<std::uint64_t> mc_samples;
    std::uint64_t seed = 20240601;
    std::string out;
    Format format = Format::Csv;
    bool timing = false;
};

/// Raised for rejected configurations; maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Overrides collected from command-line flags.
struct FlagValues {
    std::optional<std::string> grid_file;
    std::optional<std::string> condition;
    std::optional<std::string> Ls;
    std::optional<int> nodes;
    std::optional<double> radius;
    std::optional<double> z_radius;
    std::optional<std::uint64_t> mc_samples;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> format;
    bool timing = false;
};

GridSpec parse_grid_text(const std::string& text, const std::string& origin);
GridSpec load_grid_file(const std::string& path);
std::vector<double> parse_L_list(const std::string& text);

/// Reads the JSON config (if any), then applies flags on top, then validates.
ExperimentConfig build_config(const std::string& command, const std::optional<std::string>& config_file,
                              const FlagValues& flags);

/// Checks command-specific preconditions before any computation.
void validate(const ExperimentConfig& cfg);

}  // namespace kpzlab
