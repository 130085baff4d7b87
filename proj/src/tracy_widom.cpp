#include "kpzcond/tracy_widom.hpp"

#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <numbers>
#include <string>

#include "kpzcond/airy.hpp"
#include "kpzcond/errors.hpp"

namespace kpzcond::tw {
namespace {

namespace odeint = boost::numeric::odeint;

// u, u', int u^2, int (t - x) u^2, int u  (integrals from x to x_match)
using State = std::array<double, 5>;

void painleve_rhs(const State& s, State& ds, double x) {
    ds[0] = s[1];
    ds[1] = 2.0 * s[0] * s[0] * s[0] + x * s[0];
    ds[2] = -s[0] * s[0];
    ds[3] = -s[2];
    ds[4] = -s[0];
}

constexpr double kBlowUp = 1e6;
constexpr double kTolerance = 1e-14;
const double kTwoThirdsPow = std::cbrt(4.0);  // 2^{2/3}

// Relative error of the Airy tail closure, since u = Ai (1 + O(Ai^2)).
void check_tail(const PainleveSolution& sol, double tail_part, double total) {
    const double ai = airy(sol.x_match);
    if (total > 0.0 && 2.0 * ai * ai * tail_part > 1e-12 * total)
        fail(ErrorCode::InsufficientRange,
             "Airy tail closure at x_match = " + std::to_string(sol.x_match) + " is too coarse");
}

struct TailOnly {
    double int_u2, int_xu2, int_u, u;
};

// Beyond the mesh u is replaced by Ai.
TailOnly airy_region(double L) {
    TailOnly t;
    t.int_u2 = std::exp(log_airy_tail_integral(L, 2, 0));
    t.int_xu2 = std::exp(log_airy_tail_integral(L, 2, 1));
    t.int_u = std::exp(log_airy_tail_integral(L, 1, 0));
    const ScaledAiry a = airy_scaled(L);
    t.u = a.ai * std::exp(-a.zeta);
    return t;
}

}  // namespace

PainleveSolution hastings_mcleod(double x_min, double x_max, int mesh) {
    require(x_max >= 8.0 && x_max <= kAiryMax, "hastings_mcleod: x_max must lie in [8, 30]");
    require(x_min >= -10.0 && x_min < x_max, "hastings_mcleod: x_min must lie in [-10, x_max)");
    require(mesh >= 16, "hastings_mcleod: mesh must be at least 16");

    PainleveSolution sol;
    sol.x_match = x_max;
    sol.x_min = x_min;
    const double h = (x_max - x_min) / mesh;
    sol.grid.resize(mesh + 1);
    for (int k = 0; k <= mesh; ++k) sol.grid[k] = x_max - k * h;
    sol.grid.back() = x_min;

    State s{airy(x_max), airy_prime(x_max), 0.0, 0.0, 0.0};
    auto stepper = odeint::make_controlled(kTolerance, kTolerance, odeint::runge_kutta_fehlberg78<State>());
    auto observer = [&sol](const State& st, double x) {
        if (!(std::abs(st[0]) <= kBlowUp))
            fail(ErrorCode::BlowUp, "hastings_mcleod: |u| exceeded 1e6 near x = " + std::to_string(x) +
                                        "; move the shooting point right");
        sol.u_values.push_back(st[0]);
        sol.u_prime_values.push_back(st[1]);
        sol.int_u2.push_back(st[2]);
        sol.int_xu2.push_back(st[3]);
        sol.int_u.push_back(st[4]);
    };
    odeint::integrate_times(stepper, painleve_rhs, s, sol.grid.begin(), sol.grid.end(), -h / 8.0, observer);

    sol.tail_u2 = std::exp(log_airy_tail_integral(x_max, 2, 0));
    sol.tail_xu2 = std::exp(log_airy_tail_integral(x_max, 2, 1));
    sol.tail_u = std::exp(log_airy_tail_integral(x_max, 1, 0));
    return sol;
}

const PainleveSolution& default_solution() {
    static const PainleveSolution sol = hastings_mcleod();
    return sol;
}

PainleveState evaluate(const PainleveSolution& sol, double x) {
    if (!(x >= sol.x_min && x <= sol.x_max()))
        fail(ErrorCode::InsufficientRange, "x = " + std::to_string(x) + " outside the solution range [" +
                                               std::to_string(sol.x_min) + ", " + std::to_string(sol.x_max()) + "]");
    const double h = sol.step();
    const std::size_t last = sol.grid.size() - 1;
    std::size_t k = static_cast<std::size_t>(std::lround((sol.x_max() - x) / h));
    k = std::min(k, last);
    State s{sol.u_values[k], sol.u_prime_values[k], sol.int_u2[k], sol.int_xu2[k], sol.int_u[k]};
    const double dx = x - sol.grid[k];
    if (dx != 0.0) {
        odeint::runge_kutta_fehlberg78<State> rk;
        rk.do_step(painleve_rhs, s, sol.grid[k], dx);
    }
    const double to_match = sol.x_match - x;
    PainleveState out;
    out.u = s[0];
    out.u_prime = s[1];
    out.int_u2 = s[2] + sol.tail_u2;
    out.int_xu2 = s[3] + sol.tail_xu2 + to_match * sol.tail_u2;
    out.int_u = s[4] + sol.tail_u;
    check_tail(sol, sol.tail_xu2 + to_match * sol.tail_u2, out.int_xu2);
    return out;
}

double f_gue(double L, const PainleveSolution& sol) {
    if (L > sol.x_max()) return std::exp(-airy_region(L).int_xu2);
    return std::exp(-evaluate(sol, L).int_xu2);
}

double p_gue(double L, const PainleveSolution& sol) {
    if (L > sol.x_max()) return std::exp(log_p_gue(L, sol));
    const PainleveState st = evaluate(sol, L);
    return std::exp(-st.int_xu2) * st.int_u2;
}

double f_goe(double L, const PainleveSolution& sol) {
    if (L > sol.x_max()) {
        const TailOnly t = airy_region(L);
        return std::exp(-0.5 * t.int_xu2 - 0.5 * t.int_u);
    }
    const PainleveState st = evaluate(sol, L);
    return std::exp(-0.5 * st.int_xu2 - 0.5 * st.int_u);
}

double p_goe(double L, const PainleveSolution& sol) {
    if (L > sol.x_max()) return std::exp(log_p_goe(L, sol));
    const PainleveState st = evaluate(sol, L);
    return std::exp(-0.5 * st.int_xu2 - 0.5 * st.int_u) * 0.5 * (st.int_u2 + st.u);
}

double f_flat(double L, const PainleveSolution& sol) { return f_goe(kTwoThirdsPow * L, sol); }

double p_flat(double L, const PainleveSolution& sol) { return kTwoThirdsPow * p_goe(kTwoThirdsPow * L, sol); }

double log_p_gue(double L, const PainleveSolution& sol) {
    if (L <= sol.x_max()) return std::log(p_gue(L, sol));
    const double log_u2 = log_airy_tail_integral(L, 2, 0);
    const double xu2 = std::exp(log_airy_tail_integral(L, 2, 1));
    return -xu2 + log_u2;
}

double log_p_goe(double L, const PainleveSolution& sol) {
    if (L <= sol.x_max()) return std::log(p_goe(L, sol));
    const ScaledAiry a = airy_scaled(L);
    const double log_u2 = log_airy_tail_integral(L, 2, 0);
    const double xu2 = std::exp(log_airy_tail_integral(L, 2, 1));
    const double iu = std::exp(log_airy_tail_integral(L, 1, 0));
    // log(Ai(L) + int Ai^2) with Ai(L) = ai e^{-zeta}
    const double log_sum = -a.zeta + std::log(a.ai + std::exp(log_u2 + a.zeta));
    return -0.5 * xu2 - 0.5 * iu + std::log(0.5) + log_sum;
}

double log_p_flat(double L, const PainleveSolution& sol) {
    return std::log(kTwoThirdsPow) + log_p_goe(kTwoThirdsPow * L, sol);
}

TailAsymptote tail_asymptote(TailFamily family, double L) {
    require(L > 0.0 && std::isfinite(L), "tail_asymptote: L must be positive");
    const double l32 = L * std::sqrt(L);
    TailAsymptote t{};
    switch (family) {
        case TailFamily::GUE_density:
            t.prefactor = 1.0 / (8.0 * std::numbers::pi * L);
            t.exponent = -4.0 / 3.0 * l32;
            break;
        case TailFamily::flat_density:
            t.prefactor = 1.0 / std::sqrt(8.0 * std::numbers::pi * std::sqrt(L));
            t.exponent = -4.0 / 3.0 * l32;
            break;
        case TailFamily::GOE_density:
            t.prefactor = 1.0 / (4.0 * std::sqrt(std::numbers::pi) * std::pow(L, 0.25));
            t.exponent = -2.0 / 3.0 * l32;
            break;
    }
    t.log_value = std::log(t.prefactor) + t.exponent;
    t.value = std::exp(t.log_value);
    return t;
}

}  // namespace kpzcond::tw
