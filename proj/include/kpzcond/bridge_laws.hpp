#pragma once

// Brownian-bridge objects: joint densities, joint tail probabilities by
// closed form, contour integral and Monte Carlo, the step/flat limit laws
// and sampling of the limit field with its vertex process.

#include <cstdint>
#include <span>
#include <vector>

#include "kpzcond/contour_quad.hpp"
#include "kpzcond/law_result.hpp"

namespace kpzcond::bridge {

/// 0 = a_0 < a_1 < ... < a_m = 1.
class TimePartition {
public:
    explicit TimePartition(std::vector<double> a);
    /// Partition 0 < interior... < 1 built from the interior times.
    static TimePartition from_interior(std::span<const double> interior);

    const std::vector<double>& times() const noexcept { return a_; }
    /// number of increments m; there are m - 1 interior times
    std::size_t increments() const noexcept { return a_.size() - 1; }

private:
    std::vector<double> a_;
};

/// sqrt(2 pi) prod_j phi_{a_j - a_{j-1}}(b_j - b_{j-1}) with b_0 = b_m = 0;
/// b holds the m - 1 interior levels.
double bridge_joint_density(const TimePartition& p, std::span<const double> b);

/// 1 - Phi(b / sqrt(tau (1 - tau))).
double bridge_tail_closed(double tau, double b);

inline constexpr std::size_t kMaxBridgeIncrements = 5;

struct BridgeContourOptions {
    double abscissa = 0.0;  ///< real part of the leftmost line when saddle placement is off
    double spacing = 1.0;   ///< minimal distance between consecutive lines
    /// Place line j near the saddle -db_j/da_j of its Gaussian factor, keeping
    /// the lines ordered (weighted isotonic fit).
    bool saddle_placement = true;
    quad::QuadSpec quad = [] {
        quad::QuadSpec q;
        q.scheme = quad::Scheme::Trapezoid;
        q.nodes_per_leg = 128;
        return q;
    }();
    double residual_threshold = 1e-8;
};

/// P(B(a_j) > b_j for all interior j) from the bridge contour formula on
/// vertical lines. The chain structure of the integrand is contracted one
/// line at a time, which gives the same lattice sum as the full tensor rule.
/// Throws DimensionTooLarge for m > 5, ResidualTooLarge if the imaginary
/// part exceeds the threshold.
LawResult bridge_tail_contour(const TimePartition& p, std::span<const double> b, const BridgeContourOptions& opts = {});

struct McEstimate {
    double probability = 0.0;
    double std_error = 0.0;
    std::uint64_t samples = 0;
    std::uint64_t hits = 0;
};

/// Exact sequential sampling at the partition times. Samples are drawn in
/// fixed shards of 65536 with per-shard seeds derived from (seed, shard),
/// so results do not depend on the thread count.
McEstimate bridge_tail_mc(const TimePartition& p, std::span<const double> b, std::uint64_t samples,
                          std::uint64_t seed, int threads = 1);

enum class Condition { Step, Flat };

struct LimitQuery {
    std::vector<double> taus;  ///< in (0, 1), ties allowed
    std::vector<double> xs;
    std::vector<double> hs;
    Condition condition = Condition::Step;

    void validate() const;
};

/// Interior times and levels for one side after sorting and merging ties
/// (the larger level wins at a tied time).
struct MergedSide {
    std::vector<double> times;
    std::vector<double> levels;
};
MergedSide merge_ties(std::span<const double> taus, std::span<const double> levels);

/// P(B1(tau_j) > h_j - x_j, all j) * P(B2(tau_j) > h_j + x_j, all j).
LawResult limit_tail_step(const LimitQuery& q, const BridgeContourOptions& opts = {});

struct MixtureRule {
    int order = 64;  ///< Gauss-Hermite order; 1 collapses Z to 0
};

/// E_Z[P(B1 > h - x - (1 - tau) Z / sqrt 2) P(B2 > h + x + (1 - tau) Z / sqrt 2)].
/// Gauss-Hermite nodes of weight below 1e-18 are skipped and their weight is
/// added to est_error.
LawResult limit_tail_flat(const LimitQuery& q, const MixtureRule& mix = {}, const BridgeContourOptions& opts = {});

/// Dispatches on q.condition.
LawResult limit_tail(const LimitQuery& q, const BridgeContourOptions& opts = {});

/// Joint Monte Carlo of the limit field event {field(x_j, tau_j) > h_j, all j}.
McEstimate limit_tail_mc(const LimitQuery& q, std::uint64_t samples, std::uint64_t seed, int threads = 1);

struct FieldSample {
    std::uint64_t seed = 0;
    Condition condition = Condition::Step;
    std::vector<double> taus;
    std::vector<double> bridge1;
    std::vector<double> bridge2;
    double z = 0.0;

    /// (1 - tau) z / sqrt 2 at grid node j (0 for step).
    double shift(std::size_t j) const;
    /// min{B1 + x + shift, B2 - x - shift} at grid node j.
    double value(std::size_t j, double x) const;
    double vertex1(std::size_t j) const;
    double vertex2(std::size_t j) const;
};

/// taus must be strictly increasing in (0, 1).
FieldSample sample_limit_field(std::span<const double> taus, Condition condition, std::uint64_t seed);

}  // namespace kpzcond::bridge
