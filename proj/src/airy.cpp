#include "kpzcond/airy.hpp"

#include <boost/math/special_functions/airy.hpp>
#include <cmath>
#include <numbers>
#include <string>

#include "kpzcond/errors.hpp"
#include "kpzcond/gauss_rules.hpp"

namespace kpzcond::tw {
namespace {

constexpr double kSeriesSwitch = 20.0;

void check_window(double x) {
    if (!(x >= kAiryMin && x <= kAiryMax))
        fail(ErrorCode::OutOfRange, "airy: x = " + std::to_string(x) + " outside [-15, 30]");
}

// Asymptotic series for large positive x, both sums in 1/zeta.
ScaledAiry asymptotic(double x) {
    const double zeta = 2.0 / 3.0 * x * std::sqrt(x);
    double u = 1.0, sa = 1.0, sp = 1.0;
    for (int k = 1; k < 40; ++k) {
        u *= (6.0 * k - 5.0) * (6.0 * k - 3.0) * (6.0 * k - 1.0) / ((2.0 * k - 1.0) * 216.0 * k);
        const double v = -(6.0 * k + 1.0) / (6.0 * k - 1.0) * u;
        const double p = std::pow(-zeta, -k);
        const double ta = u * p, tp = v * p;
        sa += ta;
        sp += tp;
        if (std::abs(ta) < 1e-18 && std::abs(tp) < 1e-18) break;
    }
    const double q = std::pow(x, 0.25);
    const double c = 0.5 / std::sqrt(std::numbers::pi);
    return {c / q * sa, -c * q * sp, zeta};
}

}  // namespace

double airy(double x) {
    check_window(x);
    return boost::math::airy_ai(x);
}

double airy_prime(double x) {
    check_window(x);
    return boost::math::airy_ai_prime(x);
}

ScaledAiry airy_scaled(double x) {
    require(x >= 0.0 && std::isfinite(x), "airy_scaled: x must be nonnegative");
    if (x > kSeriesSwitch) return asymptotic(x);
    const double zeta = 2.0 / 3.0 * x * std::sqrt(x);
    const double e = std::exp(zeta);
    return {boost::math::airy_ai(x) * e, boost::math::airy_ai_prime(x) * e, zeta};
}

double log_airy_tail_integral(double X, int k, int p) {
    require(X >= 0.0, "log_airy_tail_integral: X must be nonnegative");
    require((k == 1 || k == 2) && (p == 0 || p == 1), "log_airy_tail_integral: unsupported (k, p)");
    const ScaledAiry base = airy_scaled(X);
    // integrand ~ exp(-k sqrt(X) s) near s = 0; cover ~45 e-foldings
    const double rate = k * std::max(std::sqrt(X), 0.6);
    const double span = 45.0 / rate;
    const quad::Rule rule = quad::gauss_legendre(24);
    constexpr int kPanels = 12;
    double sum = 0.0;
    for (int q = 0; q < kPanels; ++q) {
        // panels widen geometrically away from X
        const double a = span * (std::pow(2.0, q) - 1.0) / (std::pow(2.0, kPanels) - 1.0) * 8.0;
        const double b = span * (std::pow(2.0, q + 1) - 1.0) / (std::pow(2.0, kPanels) - 1.0) * 8.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double s = 0.5 * (a + b) + 0.5 * (b - a) * rule.nodes[i];
            const ScaledAiry t = airy_scaled(X + s);
            const double val = std::pow(t.ai, k) * std::exp(-k * (t.zeta - base.zeta)) * (p == 1 ? s : 1.0);
            sum += 0.5 * (b - a) * rule.weights[i] * val;
        }
    }
    return std::log(sum) - k * base.zeta;
}

}  // namespace kpzcond::tw
