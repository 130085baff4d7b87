#pragma once

// Reference implementations used only by the tests. None of them call into
// the library code they are compared against.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/airy.hpp>
#include <Eigen/Dense>

namespace oracle {

using cplx = std::complex<double>;
constexpr double kPi = std::numbers::pi;

/// N(0, a) density at b.
inline double gaussian(double a, double b) { return std::exp(-b * b / (2.0 * a)) / std::sqrt(2.0 * kPi * a); }

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

/// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

/// Ai by its Maclaurin series; accurate for |x| <= 5.
inline double airy_series(double x) {
    const double c1 = 0.355028053887817239260;
    const double c2 = 0.258819403792806798405;
    double f = 1.0, g = x, tf = 1.0, tg = x;
    const double x3 = x * x * x;
    for (int k = 1; k < 200; ++k) {
        tf *= x3 / ((3.0 * k - 1.0) * (3.0 * k));
        tg *= x3 / ((3.0 * k) * (3.0 * k + 1.0));
        f += tf;
        g += tg;
        if (std::abs(tf) + std::abs(tg) < 1e-18 * (std::abs(f) + std::abs(g))) break;
    }
    return c1 * f - c2 * g;
}

/// F_GUE(s) = det(I - K_Ai) on L^2(s, inf), Nystrom with Gauss-Legendre nodes
/// on [s, s + 16].
inline double fredholm_f_gue(double s, int n = 60) {
    Eigen::VectorXd x(n), w(n);
    // Golub-Welsch for Legendre
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = k / std::sqrt(4.0 * k * k - 1.0);
        J(k, k - 1) = J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    const double len = 16.0;
    for (int k = 0; k < n; ++k) {
        x(k) = s + 0.5 * len * (es.eigenvalues()(k) + 1.0);
        w(k) = len * es.eigenvectors()(0, k) * es.eigenvectors()(0, k);
    }
    Eigen::VectorXd ai(n), aip(n);
    for (int k = 0; k < n; ++k) {
        ai(k) = boost::math::airy_ai(x(k));
        aip(k) = boost::math::airy_ai_prime(x(k));
    }
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double k;
            if (i == j)
                k = aip(i) * aip(i) - x(i) * ai(i) * ai(i);
            else
                k = (ai(i) * aip(j) - aip(i) * ai(j)) / (x(i) - x(j));
            A(i, j) = (i == j ? 1.0 : 0.0) - std::sqrt(w(i)) * k * std::sqrt(w(j));
        }
    return A.determinant();
}

/// Hastings-McLeod solution on [a, b] by Newton iteration on the centred
/// finite-difference system, with u(b) = Ai(b) and u(a) = sqrt(-a/2)
/// corrected by the first asymptotic term. Returns u on the uniform mesh.
struct BvpSolution {
    double a, b, h;
    std::vector<double> u;
    double at(double x) const {
        const double t = (x - a) / h;
        const std::size_t k = static_cast<std::size_t>(std::floor(t));
        if (k + 1 >= u.size()) return u.back();
        const double f = t - k;
        return (1.0 - f) * u[k] + f * u[k + 1];
    }
};

inline BvpSolution hastings_mcleod_bvp(double a, double b, int n) {
    BvpSolution s{a, b, (b - a) / n, std::vector<double>(n + 1)};
    const double ua = std::sqrt(-a / 2.0) * (1.0 + 1.0 / (8.0 * a * a * a));
    const double ub = boost::math::airy_ai(b);
    for (int k = 0; k <= n; ++k) {
        const double x = a + k * s.h;
        s.u[k] = x < 0 ? std::max(std::sqrt(-x / 2.0), boost::math::airy_ai(x)) : boost::math::airy_ai(x);
    }
    s.u[0] = ua;
    s.u[n] = ub;
    const int m = n - 1;
    std::vector<double> lo(m), di(m), up(m), rhs(m);
    for (int it = 0; it < 50; ++it) {
        double norm = 0.0;
        for (int i = 0; i < m; ++i) {
            const int k = i + 1;
            const double x = a + k * s.h;
            const double u = s.u[k];
            rhs[i] = -((s.u[k - 1] - 2.0 * u + s.u[k + 1]) / (s.h * s.h) - 2.0 * u * u * u - x * u);
            lo[i] = up[i] = 1.0 / (s.h * s.h);
            di[i] = -2.0 / (s.h * s.h) - 6.0 * u * u - x;
            norm = std::max(norm, std::abs(rhs[i]));
        }
        // Thomas algorithm
        for (int i = 1; i < m; ++i) {
            const double f = lo[i] / di[i - 1];
            di[i] -= f * up[i - 1];
            rhs[i] -= f * rhs[i - 1];
        }
        std::vector<double> d(m);
        d[m - 1] = rhs[m - 1] / di[m - 1];
        for (int i = m - 2; i >= 0; --i) d[i] = (rhs[i] - up[i] * d[i + 1]) / di[i];
        double step = 0.0;
        for (int i = 0; i < m; ++i) {
            s.u[i + 1] += d[i];
            step = std::max(step, std::abs(d[i]));
        }
        if (step < 1e-14 && norm < 1e-9) break;
    }
    return s;
}

/// P(B(a1) > b1, B(a2) > b2) for a standard Brownian bridge on [0, 1],
/// 0 < a1 < a2 < 1, by conditioning on B(a1).
inline double bridge_orthant2(double a1, double b1, double a2, double b2) {
    const double s1 = std::sqrt(a1 * (1.0 - a1));
    const double cond_sd = std::sqrt((a2 - a1) * (1.0 - a2) / (1.0 - a1));
    auto f = [&](double x) {
        const double mean = x * (1.0 - a2) / (1.0 - a1);
        return gaussian(s1 * s1, x) * normal_sf((b2 - mean) / cond_sd);
    };
    return simpson(f, b1, std::max(b1, 0.0) + 12.0 * s1, 20000);
}

/// Single-time limit law of the conditional field (m = 2 grid, one interior
/// point): step and flat by direct integration over Z.
inline double limit_step_one(double tau, double x, double h) {
    const double sd = std::sqrt(tau * (1.0 - tau));
    return normal_sf((h - x) / sd) * normal_sf((h + x) / sd);
}

inline double limit_flat_one(double tau, double x, double h) {
    const double sd = std::sqrt(tau * (1.0 - tau));
    auto f = [&](double z) {
        const double sh = (1.0 - tau) * z / std::numbers::sqrt2;
        return gaussian(1.0, z) * normal_sf((h - x - sh) / sd) * normal_sf((h + x + sh) / sd);
    };
    return simpson(f, -12.0, 12.0, 4000);
}

}  // namespace oracle
