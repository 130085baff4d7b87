#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "kpzcond/bridge_laws.hpp"
#include "kpzcond/errors.hpp"
#include "oracles.hpp"

using namespace kpzcond;
using bridge::Condition;
using bridge::TimePartition;

TEST(TimePartition, Validation) {
    EXPECT_NO_THROW(TimePartition({0.0, 0.4, 1.0}));
    EXPECT_THROW(TimePartition({0.0, 0.4, 0.4, 1.0}), Error);
    EXPECT_THROW(TimePartition({0.1, 0.4, 1.0}), Error);
    EXPECT_THROW(TimePartition({0.0, 0.4, 0.9}), Error);
    const std::vector<double> interior = {0.3, 0.7};
    EXPECT_EQ(TimePartition::from_interior(interior).increments(), 3u);
}

TEST(JointDensity, MarginalAtHalf) {
    const auto p = TimePartition::from_interior(std::vector<double>{0.5});
    const std::vector<double> b = {0.0};
    EXPECT_NEAR(bridge::bridge_joint_density(p, b), std::sqrt(2.0 / std::numbers::pi), 1e-14);
}

TEST(JointDensity, NormalizedInOneLevel) {
    for (double a : {0.2, 0.5, 0.9}) {
        const auto p = TimePartition::from_interior(std::vector<double>{a});
        const double mass = oracle::simpson(
            [&](double b) {
                const std::vector<double> v = {b};
                return bridge::bridge_joint_density(p, v);
            },
            -5.0, 5.0, 2000);
        EXPECT_NEAR(mass, 1.0, 1e-10) << a;
    }
}

TEST(JointDensity, ThreeTimesMatchesTransitionKernels) {
    const auto p = TimePartition::from_interior(std::vector<double>{0.3, 0.7});
    const std::vector<double> b = {0.2, -0.4};
    // density of B(0.3) times density of B(0.7) given B(0.3)
    const double v1 = 0.3 * 0.7;
    const double mean = b[0] * (1.0 - 0.7) / (1.0 - 0.3);
    const double v2 = (0.7 - 0.3) * (1.0 - 0.7) / (1.0 - 0.3);
    const double expected = oracle::gaussian(v1, b[0]) * oracle::gaussian(v2, b[1] - mean);
    EXPECT_NEAR(bridge::bridge_joint_density(p, b), expected, 1e-14);
}

TEST(TailClosed, Values) {
    EXPECT_DOUBLE_EQ(bridge::bridge_tail_closed(0.5, 0.0), 0.5);
    EXPECT_LT(bridge::bridge_tail_closed(0.5, 8.0), 1e-30);
    const auto mc = bridge::bridge_tail_mc(TimePartition::from_interior(std::vector<double>{0.3}),
                                           std::vector<double>{-0.2}, 1000000, 7);
    EXPECT_NEAR(mc.probability, bridge::bridge_tail_closed(0.3, -0.2), 3.0 * mc.std_error);
}

TEST(TailContour, MatchesClosedFormAtTwoIncrements) {
    for (double b : {-0.5, 0.0, 0.7}) {
        const auto p = TimePartition::from_interior(std::vector<double>{0.5});
        const auto r = bridge::bridge_tail_contour(p, std::vector<double>{b});
        EXPECT_NEAR(r.value, bridge::bridge_tail_closed(0.5, b), 1e-8) << b;
        EXPECT_LT(r.imag_residual, 1e-8);
    }
    for (double a : {0.1, 0.35, 0.8})
        for (double b : {-0.9, 0.25}) {
            const auto p = TimePartition::from_interior(std::vector<double>{a});
            EXPECT_NEAR(bridge::bridge_tail_contour(p, std::vector<double>{b}).value, bridge::bridge_tail_closed(a, b),
                        1e-8);
        }
}

TEST(TailContour, MatchesOrthantOracleAtThreeIncrements) {
    const auto p = TimePartition::from_interior(std::vector<double>{0.3, 0.7});
    for (auto b : {std::vector<double>{0.1, -0.1}, std::vector<double>{-0.4, 0.3}, std::vector<double>{0.2, 0.2}}) {
        const auto r = bridge::bridge_tail_contour(p, b);
        EXPECT_NEAR(r.value, oracle::bridge_orthant2(0.3, b[0], 0.7, b[1]), 1e-8);
    }
}

TEST(TailContour, MatchesMonteCarloAtThreeIncrements) {
    const auto p = TimePartition::from_interior(std::vector<double>{0.3, 0.7});
    const std::vector<double> b = {0.1, -0.1};
    const auto r = bridge::bridge_tail_contour(p, b);
    const auto mc = bridge::bridge_tail_mc(p, b, 1000000, 11);
    EXPECT_NEAR(r.value, mc.probability, 3.0 * mc.std_error);
}

TEST(TailContour, HighLevelsGoToZero) {
    const auto p = TimePartition::from_interior(std::vector<double>{0.3, 0.7});
    EXPECT_LT(bridge::bridge_tail_contour(p, std::vector<double>{6.0, 6.0}).value, 1e-12);
}

TEST(TailContour, AbscissaAndSpacingInvariance) {
    const auto p = TimePartition::from_interior(std::vector<double>{0.25, 0.5, 0.8});
    const std::vector<double> b = {0.1, -0.2, 0.15};
    const double ref = bridge::bridge_tail_contour(p, b).value;
    for (double shift : {-1.0, 0.5})
        for (double spacing : {0.3, 1.0, 2.0}) {
            bridge::BridgeContourOptions o;
            o.saddle_placement = false;
            o.abscissa = shift;
            o.spacing = spacing;
            // the pole between close lines needs a finer step
            if (spacing < 0.5) o.quad.nodes_per_leg = 320;
            EXPECT_NEAR(bridge::bridge_tail_contour(p, b, o).value, ref, 1e-8) << shift << " " << spacing;
        }
}

TEST(TailContour, Reversibility) {
    const auto p = TimePartition::from_interior(std::vector<double>{0.2, 0.6});
    const auto q = TimePartition::from_interior(std::vector<double>{0.4, 0.8});
    const double fwd = bridge::bridge_tail_contour(p, std::vector<double>{0.3, -0.1}).value;
    const double rev = bridge::bridge_tail_contour(q, std::vector<double>{-0.1, 0.3}).value;
    EXPECT_NEAR(fwd, rev, 1e-8);
}

TEST(TailContour, DimensionGuard) {
    const auto p = TimePartition::from_interior(std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5});
    try {
        bridge::bridge_tail_contour(p, std::vector<double>(5, 0.0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimensionTooLarge);
    }
}

TEST(TailMc, Reproducible) {
    const auto p = TimePartition::from_interior(std::vector<double>{0.5});
    const auto a = bridge::bridge_tail_mc(p, std::vector<double>{0.0}, 200000, 42);
    const auto b = bridge::bridge_tail_mc(p, std::vector<double>{0.0}, 200000, 42, 3);
    EXPECT_EQ(a.hits, b.hits);
    EXPECT_EQ(a.probability, b.probability);
    EXPECT_NEAR(a.probability, 0.5, 3.0 * a.std_error);
}

namespace {

bridge::LimitQuery one_point(double tau, double x, double h, Condition c) {
    bridge::LimitQuery q;
    q.taus = {tau};
    q.xs = {x};
    q.hs = {h};
    q.condition = c;
    return q;
}

}  // namespace

TEST(LimitStep, SymmetricQuery) {
    EXPECT_NEAR(bridge::limit_tail_step(one_point(0.5, 0.0, 0.0, Condition::Step)).value, 0.25, 1e-9);
}

TEST(LimitStep, ClosedFormMarginals) {
    EXPECT_NEAR(bridge::limit_tail_step(one_point(0.5, 0.3, 0.0, Condition::Step)).value,
                oracle::normal_sf(-0.6) * oracle::normal_sf(0.6), 1e-9);
    for (double tau : {0.2, 0.5, 0.75})
        EXPECT_NEAR(bridge::limit_tail_step(one_point(tau, 0.3, 0.1, Condition::Step)).value,
                    oracle::limit_step_one(tau, 0.3, 0.1), 1e-9);
}

TEST(LimitStep, TiedTimesMerge) {
    bridge::LimitQuery q;
    q.taus = {0.5, 0.5};
    q.xs = {0.0, 0.0};
    q.hs = {0.1, 0.2};
    EXPECT_NEAR(bridge::limit_tail_step(q).value, bridge::limit_tail_step(one_point(0.5, 0.0, 0.2, Condition::Step)).value,
                1e-12);
    const auto m = bridge::merge_ties(q.taus, q.hs);
    ASSERT_EQ(m.times.size(), 1u);
    EXPECT_EQ(m.levels[0], 0.2);
}

TEST(LimitStep, MatchesJointMonteCarlo) {
    bridge::LimitQuery q;
    q.taus = {0.3, 0.6};
    q.xs = {0.1, -0.2};
    q.hs = {-0.1, 0.05};
    const auto r = bridge::limit_tail_step(q);
    const auto mc = bridge::limit_tail_mc(q, 1000000, 5);
    EXPECT_NEAR(r.value, mc.probability, 3.0 * mc.std_error);
}

TEST(LimitStep, RejectsEndpoints) {
    EXPECT_THROW(bridge::limit_tail_step(one_point(1.0, 0.0, 0.0, Condition::Step)), Error);
    EXPECT_THROW(bridge::limit_tail_step(one_point(0.0, 0.0, 0.0, Condition::Step)), Error);
}

TEST(LimitFlat, MatchesScalarOracle) {
    for (double tau : {0.3, 0.5})
        for (double x : {0.0, 0.3})
            for (double h : {0.0, 0.1}) {
                const auto r = bridge::limit_tail_flat(one_point(tau, x, h, Condition::Flat));
                EXPECT_NEAR(r.value, oracle::limit_flat_one(tau, x, h), 1e-8) << tau << " " << x << " " << h;
            }
}

TEST(LimitFlat, DegenerateMixtureIsStep) {
    const auto q = one_point(0.4, 0.2, -0.1, Condition::Flat);
    auto qs = q;
    qs.condition = Condition::Step;
    EXPECT_NEAR(bridge::limit_tail_flat(q, bridge::MixtureRule{1}).value, bridge::limit_tail_step(qs).value, 1e-12);
}

TEST(LimitFlat, BelowStepAtZeroLevels) {
    for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const double flat = bridge::limit_tail_flat(one_point(tau, 0.0, 0.0, Condition::Flat)).value;
        const double step = bridge::limit_tail_step(one_point(tau, 0.0, 0.0, Condition::Step)).value;
        EXPECT_LT(flat, step) << tau;
    }
}

TEST(LimitFlat, MatchesJointMonteCarlo) {
    bridge::LimitQuery q;
    q.taus = {0.3, 0.6};
    q.xs = {0.1, -0.2};
    q.hs = {-0.1, 0.05};
    q.condition = Condition::Flat;
    const auto r = bridge::limit_tail(q);
    const auto mc = bridge::limit_tail_mc(q, 1000000, 9);
    EXPECT_NEAR(r.value, mc.probability, 3.0 * mc.std_error);
}

TEST(FieldSample, GraphAndVertexIdentities) {
    const std::vector<double> taus = {0.1, 0.25, 0.5, 0.75, 0.9};
    for (auto c : {Condition::Step, Condition::Flat})
        for (std::uint64_t seed = 1; seed <= 200; ++seed) {
            const auto s = bridge::sample_limit_field(taus, c, seed);
            for (std::size_t j = 0; j < taus.size(); ++j) {
                const double sh = s.shift(j);
                EXPECT_NEAR(s.vertex2(j), 0.5 * (s.bridge1[j] + s.bridge2[j]), 1e-15);
                EXPECT_NEAR(s.vertex1(j), 0.5 * (s.bridge2[j] - s.bridge1[j]) - sh, 1e-15);
                EXPECT_NEAR(s.value(j, s.vertex1(j)), s.vertex2(j), 4e-16);
                for (double x : {-1.0, 0.0, 0.7}) EXPECT_LE(s.value(j, x), s.bridge1[j] + x + sh);
            }
            if (c == Condition::Step) EXPECT_EQ(s.z, 0.0);
        }
}

TEST(FieldSample, VertexCovariance) {
    const std::vector<double> taus = {0.25, 0.75};
    const int n = 40000;
    double sa = 0.0, sb = 0.0, sab = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto s = bridge::sample_limit_field(taus, Condition::Step, 1000 + i);
        const double a = s.vertex2(0), b = s.vertex2(1);
        sa += a;
        sb += b;
        sab += a * b;
    }
    const double cov = sab / n - (sa / n) * (sb / n);
    // Var of the product is about (var_a var_b + cov^2) / n
    const double se = std::sqrt((0.09375 * 0.09375 + 0.03125 * 0.03125) / n);
    EXPECT_NEAR(cov, 0.25 * (1.0 - 0.75) / 2.0, 4.0 * se);
}
