#pragma once

// Finite-L conditional tail formulas of the KPZ fixed point in the scaled
// variables xi = -sqrt(L) + s u, eta = sqrt(L) + s v, s = 2^{-1/2} L^{-1/4}.
// Exponential prefactors e^{+-(2/3) L^{3/2}} are cancelled analytically.

#include <array>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "kpzcond/bridge_laws.hpp"
#include "kpzcond/contour_quad.hpp"
#include "kpzcond/law_result.hpp"

namespace kpzcond::kpz {

using quad::cplx;

/// 0 < tau_1 < ... < tau_m = 1 with x_m = h_m = 0.
struct Grid {
    std::vector<double> taus;
    std::vector<double> xs;
    std::vector<double> hs;

    std::size_t m() const noexcept { return taus.size(); }
    /// Appends tau_m = 1, x_m = h_m = 0 to the interior values.
    static Grid from_interior(std::span<const double> taus, std::span<const double> xs, std::span<const double> hs);
    /// Rejects m < 2, ties, unsorted times and a nonzero last x or h.
    void validate() const;
    bridge::LimitQuery limit_query(bridge::Condition condition) const;
};

struct ScaledGrid {
    double L = 0.0;
    std::vector<double> h_L;      ///< tau_j L + h_j sqrt(2) L^{1/4}
    std::vector<double> x_L;      ///< x_j / (sqrt(2) L^{1/4})
    std::vector<double> tau_inc;  ///< tau_j - tau_{j-1}
    std::vector<double> x_inc;    ///< x_j - x_{j-1}
    std::vector<double> h_inc;    ///< h_j - h_{j-1}
    std::vector<double> x_L_inc;
    std::vector<double> h_L_inc;
};

ScaledGrid scale_grid(const Grid& g, double L);

/// 2^{-1/2} L^{-1/4}
double scale_s(double L);
/// 2^{-3/2} L^{-3/4}
double scale_c(double L);

/// exp(-tau z^3 / 3 + x z^2 + h z)
cplx kernel_f(cplx zeta, double x, double tau, double h);
cplx log_kernel_f(cplx zeta, double x, double tau, double h);
/// exp(a u^2 / 2 + b u)
cplx kernel_quad(cplx u, double a, double b);
/// exp((-tau w^3 / (6 sqrt 2) + x w^2 / (2 sqrt 2)) L^{-3/4})
cplx g_factor(cplx w, double tau, double x, double L);
cplx log_g_factor(cplx w, double tau, double x, double L);
/// Correction product J_L; u and v have equal length m >= 2.
cplx j_factor(std::span<const cplx> u, std::span<const cplx> v, double L);

/// How the single-variable weights are formed.
enum class ExponentForm {
    Scaled,          ///< kernel_quad * g_factor in the scaled variables
    LogSubtraction,  ///< raw kernel_f exponent minus its analytic leading part
};

struct KpzOptions {
    quad::QuadSpec quad = [] {
        quad::QuadSpec q;
        q.nodes_per_leg = 64;
        return q;
    }();
    /// Angle of the upper leg of the u contours; v contours use pi - angle.
    /// pi/2 gives vertical lines, 2 pi / 3 the classical Sigma family.
    double leg_angle = std::numbers::pi / 2.0;
    /// Contour vertices sit at +-j * vertex_scale.
    double vertex_scale = 1.0;
    int threads = 1;
    double residual_threshold = 1e-6;
    ExponentForm exponent_form = ExponentForm::Scaled;
};

inline constexpr std::size_t kMaxGridPoints = 3;

/// Q^(1)_step / ((8 pi L)^{-1} e^{-(4/3) L^{3/2}}).
LawResult qhat1_ratio_step(const Grid& g, double L, const KpzOptions& opts = {});

/// Q^(1)_flat / ((8 pi sqrt L)^{-1/2} e^{-(4/3) L^{3/2}}), keeping the exact
/// factor 2 + sqrt(2) L^{-3/4} v_1.
LawResult qhat1_ratio_flat(const Grid& g, double L, const KpzOptions& opts = {});

using MultiIndex = std::array<int, 2>;

/// Projected multiply-add count of the branch contractions (both resolutions).
inline constexpr double kSmallnCostLimit = 1e9;

/// Trapezoid rule, 28 nodes per leg, vertex_scale 1.5: keeps n = (2, 1)
/// below the cost limit with (1, 1) accurate to about 1e-7.
KpzOptions smalln_options();

/// Q^(n)_step at m = 2 in the normalization of qhat1_ratio_step. The value
/// excludes the series weight 1/(n!)^2, reported as the "series_weight"
/// diagnostic. Requires n_1 + n_2 <= 3 and z_radius > 1.
LawResult qhatn_step_smalln(const Grid& g, const MultiIndex& n, double L, const KpzOptions& opts = {},
                            double z_radius = 2.0);

struct RemainderBound {
    double log_combinatorial = 0.0;  ///< log of the n^{n/2} products
    double log_bound = 0.0;          ///< log of the full bound for this n
    /// log_bound minus log((8 pi L)^{-1} e^{-(4/3) L^{3/2}})
    double log_normalized_bound = 0.0;
};

/// n_1^{n_1/2} prod (n_j + n_{j+1})^{(n_j + n_{j+1})/2} n_m^{n_m/2} C^{|n|} / (n!)^2
/// * exp(-(4(1 - 2 eps)/3) sum tau_inc_j n_j L^{3/2}).
RemainderBound remainder_bound(std::span<const int> n, std::span<const double> tau_inc, double L, double C,
                               double eps = 0.05);

struct RemainderSum {
    double log_partial_sum = 0.0;  ///< over n in {1..cutoff}^m minus the all-ones index
    double log_tail_estimate = 0.0;
    double log_total = 0.0;
    double shell_ratio = 0.0;  ///< ratio of the last two shell sums
    int cutoff = 0;
};

/// Sums the bound over n != (1, ..., 1) with entries in [1, cutoff] and
/// closes the remainder with a geometric tail from the last two shells.
RemainderSum remainder_bound_sum(std::span<const double> tau_inc, double L, double C, double eps = 0.05,
                                 int cutoff = 12);

}  // namespace kpzcond::kpz
