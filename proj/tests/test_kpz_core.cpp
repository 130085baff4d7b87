#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "kpzcond/bridge_laws.hpp"
#include "kpzcond/errors.hpp"
#include "kpzcond/kpz_core.hpp"
#include "kpz_oracles.hpp"

using namespace kpzcond;
using kpz::cplx;

namespace {

kpz::Grid one_point(double tau, double x, double h) {
    const std::vector<double> t{tau}, xs{x}, hs{h};
    return kpz::Grid::from_interior(t, xs, hs);
}

}  // namespace

TEST(Grid, Validation) {
    EXPECT_NO_THROW(one_point(0.5, 0.0, 0.0).validate());
    kpz::Grid g = one_point(0.5, 0.0, 0.0);
    g.hs.back() = 0.1;
    EXPECT_THROW(g.validate(), Error);
    const std::vector<double> tied{0.4, 0.4}, z2{0.0, 0.0};
    EXPECT_THROW(kpz::Grid::from_interior(tied, z2, z2).validate(), Error);
    const std::vector<double> three{0.2, 0.4, 0.6}, z3{0.0, 0.0, 0.0};
    EXPECT_THROW(kpz::qhat1_ratio_step(kpz::Grid::from_interior(three, z3, z3), 10.0), Error);
}

TEST(ScaledGrid, ConstraintIdentities) {
    const std::vector<double> t{0.3, 0.55}, xs{0.2, -0.4}, hs{0.1, 0.3};
    const auto sg = kpz::scale_grid(kpz::Grid::from_interior(t, xs, hs), 37.0);
    double st = 0.0, sx = 0.0, sh = 0.0;
    for (std::size_t j = 0; j < sg.tau_inc.size(); ++j) {
        st += sg.tau_inc[j];
        sx += sg.x_inc[j];
        sh += sg.h_inc[j];
    }
    EXPECT_DOUBLE_EQ(st, 1.0);
    EXPECT_NEAR(sx, 0.0, 1e-15);
    EXPECT_NEAR(sh, 0.0, 1e-15);
    EXPECT_NEAR(sg.h_L[0], 0.3 * 37.0 + 0.1 * std::numbers::sqrt2 * std::pow(37.0, 0.25), 1e-12);
    EXPECT_NEAR(sg.x_L[1], -0.4 / (std::numbers::sqrt2 * std::pow(37.0, 0.25)), 1e-15);
    EXPECT_DOUBLE_EQ(sg.h_L.back(), 37.0);
}

TEST(Kernels, Reductions) {
    EXPECT_EQ(kpz::kernel_f(cplx(0.0), 0.3, 0.7, -1.2), cplx(1.0));
    const cplx z(0.4, -1.1);
    EXPECT_NEAR(std::abs(kpz::kernel_f(z, 0.0, 0.0, 0.6) - std::exp(0.6 * z)), 0.0, 1e-15);
    EXPECT_EQ(kpz::kernel_quad(cplx(0.0), 2.0, 3.0), cplx(1.0));
    EXPECT_NEAR(std::abs(kpz::kernel_quad(z, 0.0, -0.5) - std::exp(-0.5 * z)), 0.0, 1e-15);
    EXPECT_EQ(kpz::g_factor(cplx(0.0), 0.5, 0.2, 10.0), cplx(1.0));
}

TEST(Kernels, ExponentDecompositionAtScaledPoint) {
    // log f(-sqrt L + s u) = -(2/3) tau L^{3/2} + (x/sqrt2 - sqrt2 h) L^{3/4}
    //   + tau u^2 / 2 + (h - x) u + (-tau u^3 / (6 sqrt2) + x u^2 / (2 sqrt2)) L^{-3/4}
    const double L = 100.0, tau = 0.35, x = 0.4, h = -0.3;
    const double s = 1.0 / (std::numbers::sqrt2 * std::pow(L, 0.25));
    const double xL = x / (std::numbers::sqrt2 * std::pow(L, 0.25));
    const double hL = tau * L + h * std::numbers::sqrt2 * std::pow(L, 0.25);
    for (cplx u : {cplx(0.5, 0.0), cplx(-1.0, 2.0), cplx(2.0, -3.5)}) {
        const cplx lhs = kpz::log_kernel_f(-std::sqrt(L) + s * u, xL, tau, hL);
        const double r2 = std::numbers::sqrt2;
        const cplx rhs = -2.0 / 3.0 * tau * L * std::sqrt(L) + (x / r2 - r2 * h) * std::pow(L, 0.75) +
                         tau * u * u / 2.0 + (h - x) * u +
                         (-tau * u * u * u / (6.0 * r2) + x * u * u / (2.0 * r2)) * std::pow(L, -0.75);
        EXPECT_NEAR(std::abs(lhs - rhs), 0.0, 1e-11 * L * std::sqrt(L));
        const cplx factored = std::log(kpz::kernel_quad(u, tau, h - x)) + kpz::log_g_factor(u, tau, x, L);
        EXPECT_NEAR(std::abs(std::exp(lhs - rhs + factored) - std::exp(factored)) / std::abs(std::exp(factored)), 0.0,
                    1e-9);
    }
}

TEST(Kernels, GFactorTendsToOne) {
    const cplx w(1.0, 2.0);
    double prev = 1.0;
    for (double L : {1e2, 1e4, 1e6}) {
        const double d = std::abs(kpz::g_factor(w, 0.5, 0.3, L) - 1.0);
        EXPECT_LT(d, prev);
        EXPECT_LT(d, 5.0 * std::pow(L, -0.75));
        prev = d;
    }
}

TEST(Kernels, JFactorLimitAndSymmetry) {
    const std::vector<cplx> u{cplx(0.0, 1.0), cplx(1.0, 1.0)}, v{cplx(0.0, -1.0), cplx(1.0, -1.0)};
    const cplx limit = 1.0 / ((u[0] - u[1]) * (v[0] - v[1]));
    EXPECT_LT(std::abs(kpz::j_factor(u, v, 1e6) - limit), 1e-3);
    const std::vector<cplx> uc{std::conj(u[0]), std::conj(u[1])}, vc{std::conj(v[0]), std::conj(v[1])};
    EXPECT_NEAR(std::abs(kpz::j_factor(uc, vc, 50.0) - std::conj(kpz::j_factor(u, v, 50.0))), 0.0, 1e-15);
}

TEST(Kernels, JFactorMatchesExpandedProduct) {
    // m = 2 written out from the unscaled Cauchy factors
    const double L = 30.0;
    const double c = 1.0 / (2.0 * std::numbers::sqrt2 * std::pow(L, 0.75));
    const std::vector<cplx> u{cplx(0.5, 0.3), cplx(2.0, -1.0)}, v{cplx(-0.7, 0.2), cplx(-1.5, 0.9)};
    const cplx expected = (1.0 - c * (u[0] - v[1])) * (1.0 + c * (v[0] - u[1])) /
                          ((u[0] - u[1]) * (v[0] - v[1]) * std::pow(1.0 - c * (u[0] - v[0]), 2) *
                           (1.0 - c * (u[1] - v[1])));
    EXPECT_NEAR(std::abs(kpz::j_factor(u, v, L) - expected) / std::abs(expected), 0.0, 1e-13);
}

TEST(QhatOne, MatchesRawOracle) {
    for (auto [x, h] : {std::pair{0.0, 0.0}, std::pair{0.3, -0.2}}) {
        const auto r = kpz::qhat1_ratio_step(one_point(0.5, x, h), 10.0);
        const double o = oracle::qhat_raw(0.5, x, h, 10.0, 1, 1);
        EXPECT_NEAR(r.value / o, 1.0, 1e-4) << x << " " << h;
    }
    const auto r = kpz::qhat1_ratio_step(one_point(0.3, 0.2, 0.1), 25.0);
    EXPECT_NEAR(r.value / oracle::qhat_raw(0.3, 0.2, 0.1, 25.0, 1, 1), 1.0, 1e-4);
}

TEST(QhatOne, TwoResolutionsAgree) {
    const auto r = kpz::qhat1_ratio_step(one_point(0.5, 0.0, 0.0), 100.0);
    EXPECT_LT(r.est_error, 1e-5);
    EXPECT_LT(r.imag_residual, 1e-6);
    kpz::KpzOptions fine;
    fine.quad.nodes_per_leg = 96;
    EXPECT_NEAR(kpz::qhat1_ratio_step(one_point(0.5, 0.0, 0.0), 100.0, fine).value, r.value, 1e-6);
}

TEST(QhatOne, ExponentFormsAgree) {
    kpz::KpzOptions a, b;
    b.exponent_form = kpz::ExponentForm::LogSubtraction;
    for (double L : {10.0, 1000.0}) {
        const auto g = one_point(0.4, 0.3, 0.1);
        EXPECT_NEAR(kpz::qhat1_ratio_step(g, L, a).value, kpz::qhat1_ratio_step(g, L, b).value, 1e-10) << L;
        EXPECT_NEAR(kpz::qhat1_ratio_flat(g, L, a).value, kpz::qhat1_ratio_flat(g, L, b).value, 1e-10) << L;
    }
}

TEST(QhatOne, ContourFamilyInvariance) {
    const auto g = one_point(0.5, 0.3, 0.1);
    kpz::KpzOptions base;
    base.quad.nodes_per_leg = 128;
    const double ref = kpz::qhat1_ratio_step(g, 100.0, base).value;
    for (double scale : {0.5, 1.5, 2.0}) {
        kpz::KpzOptions o = base;
        o.vertex_scale = scale;
        EXPECT_NEAR(kpz::qhat1_ratio_step(g, 100.0, o).value, ref, 1e-6) << scale;
    }
    kpz::KpzOptions sigma = base;
    sigma.leg_angle = 2.0 * std::numbers::pi / 3.0;
    EXPECT_NEAR(kpz::qhat1_ratio_step(g, 100.0, sigma).value, ref, 1e-6);
}

TEST(QhatOne, StepSweepApproachesQuarter) {
    const auto g = one_point(0.5, 0.0, 0.0);
    double prev = 1.0;
    for (double L : {10.0, 1e2, 1e3, 1e4}) {
        const double gap = std::abs(kpz::qhat1_ratio_step(g, L).value - 0.25);
        EXPECT_LT(gap, prev) << L;
        prev = gap;
    }
    EXPECT_LT(prev, 0.01);
}

TEST(QhatOne, ThreePointGridApproachesLimit) {
    const std::vector<double> t{0.3, 0.6}, xs{0.1, -0.2}, hs{-0.1, 0.05};
    const auto g = kpz::Grid::from_interior(t, xs, hs);
    const double lim = bridge::limit_tail_step(g.limit_query(bridge::Condition::Step)).value;
    const double near = kpz::qhat1_ratio_step(g, 1e4).value;
    const double far = kpz::qhat1_ratio_step(g, 1e2).value;
    EXPECT_LT(std::abs(near - lim), std::abs(far - lim));
    EXPECT_LT(std::abs(near - lim), 0.02);
}

TEST(QhatOne, FlatApproachesMixtureLimit) {
    const auto g = one_point(0.5, 0.0, 0.0);
    const double lim = bridge::limit_tail_flat(g.limit_query(bridge::Condition::Flat)).value;
    double prev = 1.0;
    for (double L : {10.0, 1e2, 1e3, 1e4}) {
        const auto r = kpz::qhat1_ratio_flat(g, L);
        EXPECT_LT(r.imag_residual, 1e-6);
        const double gap = std::abs(r.value - lim);
        EXPECT_LT(gap, prev) << L;
        prev = gap;
    }
    EXPECT_LT(prev, 0.02);
}

TEST(Smalln, VanishingIndices) {
    const auto g = one_point(0.5, 0.0, 0.0);
    for (kpz::MultiIndex n : {kpz::MultiIndex{0, 1}, kpz::MultiIndex{1, 0}, kpz::MultiIndex{0, 2}}) {
        const auto r = kpz::qhatn_step_smalln(g, n, 20.0, kpz::smalln_options());
        EXPECT_LT(std::abs(r.value), 1e-6);
    }
}

TEST(Smalln, OneOneIsTheLeadingTerm) {
    const auto g = one_point(0.5, 0.3, -0.2);
    const auto r = kpz::qhatn_step_smalln(g, {1, 1}, 10.0, kpz::smalln_options());
    EXPECT_NEAR(r.value, kpz::qhat1_ratio_step(g, 10.0).value, 1e-6);
    EXPECT_DOUBLE_EQ(r.diagnostic("series_weight"), 1.0);
}

TEST(Smalln, MatchesRawOracle) {
    oracle::RawLayout lay;
    lay.nodes = 16;
    const auto g0 = one_point(0.5, 0.0, 0.0);
    const double lib21 = kpz::qhatn_step_smalln(g0, {2, 1}, 10.0, kpz::smalln_options()).value;
    EXPECT_NEAR(lib21 / oracle::qhat_raw(0.5, 0.0, 0.0, 10.0, 2, 1, lay), 1.0, 1e-3);
    const auto g1 = one_point(0.5, 0.3, -0.2);
    const double lib12 = kpz::qhatn_step_smalln(g1, {1, 2}, 10.0, kpz::smalln_options()).value;
    EXPECT_NEAR(lib12 / oracle::qhat_raw(0.5, 0.3, -0.2, 10.0, 1, 2, lay), 1.0, 1e-3);
}

TEST(Smalln, ZRadiusInvariance) {
    const auto g = one_point(0.5, 0.0, 0.0);
    const double a = kpz::qhatn_step_smalln(g, {1, 2}, 10.0, kpz::smalln_options(), 1.5).value;
    const double b = kpz::qhatn_step_smalln(g, {1, 2}, 10.0, kpz::smalln_options(), 4.0).value;
    EXPECT_NEAR(a / b, 1.0, 1e-8);
}

TEST(Smalln, SuppressionGrowsWithL) {
    const auto g = one_point(0.5, 0.0, 0.0);
    const auto opts = kpz::smalln_options();
    auto ratio = [&](double L) {
        return std::abs(kpz::qhatn_step_smalln(g, {2, 1}, L, opts).value) /
               std::abs(kpz::qhatn_step_smalln(g, {1, 1}, L, opts).value);
    };
    const double r10 = ratio(10.0), r20 = ratio(20.0);
    EXPECT_LT(r10, 1.0);
    EXPECT_LT(r20, r10);
    // bound of the (2,1) term relative to (1,1) with eps' = min tau_inc (1 - 2 eps)
    const double eps_prime = 0.5 * (1.0 - 2.0 * 0.05);
    EXPECT_LT(std::log(r20), -4.0 / 3.0 * eps_prime * 20.0 * std::sqrt(20.0) + 5.0);
}

TEST(Smalln, Guards) {
    const auto g = one_point(0.5, 0.0, 0.0);
    EXPECT_THROW(kpz::qhatn_step_smalln(g, {2, 2}, 10.0), Error);
    EXPECT_THROW(kpz::qhatn_step_smalln(g, {1, 1}, 10.0, kpz::smalln_options(), 1.0), Error);
    auto heavy = kpz::smalln_options();
    heavy.quad.nodes_per_leg = 40;
    try {
        kpz::qhatn_step_smalln(g, {2, 1}, 10.0, heavy);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CostGuard);
    }
}

TEST(Remainder, BoundDecreasesInL) {
    const std::vector<int> n{2, 1};
    const std::vector<double> tau{0.5, 0.5};
    double prev = 1e300;
    for (double L : {1.0, 5.0, 10.0, 50.0}) {
        const double b = kpz::remainder_bound(n, tau, L, 3.0).log_bound;
        EXPECT_LT(b, prev);
        prev = b;
    }
}

TEST(Remainder, CombinatorialFactorAtOnes) {
    const std::vector<double> t2{0.5, 0.5}, t3{0.2, 0.3, 0.5};
    EXPECT_NEAR(kpz::remainder_bound(std::vector<int>{1, 1}, t2, 4.0, 2.0).log_combinatorial, std::log(2.0), 1e-15);
    EXPECT_NEAR(kpz::remainder_bound(std::vector<int>{1, 1, 1}, t3, 4.0, 2.0).log_combinatorial, std::log(4.0), 1e-15);
    // n = (2, 3): 2^1 * 5^{5/2} * 3^{3/2}
    EXPECT_NEAR(kpz::remainder_bound(std::vector<int>{2, 3}, t2, 4.0, 2.0).log_combinatorial,
                std::log(2.0) + 2.5 * std::log(5.0) + 1.5 * std::log(3.0), 1e-13);
    const auto b = kpz::remainder_bound(std::vector<int>{2, 3}, t2, 4.0, 2.0, 0.1);
    const double expected = b.log_combinatorial + 5.0 * std::log(2.0) - 2.0 * (std::log(2.0) + std::log(6.0)) -
                            4.0 * 0.8 / 3.0 * (0.5 * 2 + 0.5 * 3) * 8.0;
    EXPECT_NEAR(b.log_bound, expected, 1e-12);
}

TEST(Remainder, PartialSumsAreCauchy) {
    const std::vector<double> tau{0.5, 0.5};
    const auto a = kpz::remainder_bound_sum(tau, 2.0, 5.0, 0.05, 12);
    const auto b = kpz::remainder_bound_sum(tau, 2.0, 5.0, 0.05, 20);
    const auto c = kpz::remainder_bound_sum(tau, 2.0, 5.0, 0.05, 28);
    EXPECT_LT(a.shell_ratio, 1.0);
    EXPECT_LE(a.log_partial_sum, b.log_partial_sum);
    EXPECT_LE(b.log_partial_sum, c.log_partial_sum);
    EXPECT_LT(std::exp(c.log_partial_sum) - std::exp(b.log_partial_sum),
              std::exp(b.log_partial_sum) - std::exp(a.log_partial_sum));
    EXPECT_NEAR(c.log_total, b.log_total, 1e-6);
}
