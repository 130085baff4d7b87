#pragma once

namespace kpzcond::tw {

inline constexpr double kAiryMin = -15.0;
inline constexpr double kAiryMax = 30.0;

/// Ai(x) on [-15, 30]; throws OutOfRange outside.
double airy(double x);
/// Ai'(x) on [-15, 30].
double airy_prime(double x);

/// Exponentially scaled Airy pair for x >= 0:
/// Ai(x) = ai * exp(-zeta), Ai'(x) = aip * exp(-zeta), zeta = (2/3) x^{3/2}.
/// Valid for every x >= 0 (large x uses the asymptotic series).
struct ScaledAiry {
    double ai;
    double aip;
    double zeta;
};
ScaledAiry airy_scaled(double x);

/// log of int_X^inf (t - X)^p Ai(t)^k dt for X >= 0, p in {0, 1}, k in {1, 2}.
double log_airy_tail_integral(double X, int k, int p);

}  // namespace kpzcond::tw
