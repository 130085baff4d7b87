#pragma once

#include <cstdint>
#include <vector>

#include "kpzcond/kpz_core.hpp"
#include "lab/config.hpp"
#include "lab/output.hpp"

namespace kpzlab {

enum ExitCode : int {
    kExitOk = 0,
    kExitValidation = 2,
    kExitNumerical = 3,
    kExitNotMonotone = 4,
};

struct CommandOutput {
    std::vector<Table> tables;
    int exit_code = kExitOk;
};

/// One point of an L-sweep.
struct SweepRecord {
    double L = 0.0;
    double finite_L_value = 0.0;
    double est_error = 0.0;
    double limit_value = 0.0;
    double limit_est_error = 0.0;
    double abs_gap = 0.0;  ///< |finite_L_value - limit_value|
    double imag_residual = 0.0;
    double magnitude = 0.0;
    double max_radius = 0.0;
    int nodes_per_leg = 0;
    double wall_time_ms = 0.0;
};

kpzcond::kpz::Grid to_grid(const GridSpec& g);

/// Finite-L ratio against the limit law at each L, in the given order.
std::vector<SweepRecord> run_sweep(const kpzcond::kpz::Grid& g, kpzcond::bridge::Condition condition,
                                   const std::vector<double>& Ls, const kpzcond::kpz::KpzOptions& opts);

/// Index of the first record whose gap exceeds the previous one by more
/// than the two quadrature errors combined, or -1 if the gaps shrink.
int first_gap_increase(const std::vector<SweepRecord>& records);

/// Seed of sample i in cmd_sample (splitmix64 of seed and index).
std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index);

CommandOutput cmd_tw(const ExperimentConfig& cfg);
CommandOutput cmd_limit(const ExperimentConfig& cfg);
CommandOutput cmd_converge(const ExperimentConfig& cfg);
CommandOutput cmd_smalln(const ExperimentConfig& cfg);
CommandOutput cmd_sample(const ExperimentConfig& cfg);

CommandOutput run_command(const ExperimentConfig& cfg);

}  // namespace kpzlab
