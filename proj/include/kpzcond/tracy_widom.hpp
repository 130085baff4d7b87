#pragma once

// Hastings-McLeod solution of Painleve II and the GUE/GOE Tracy-Widom
// distributions built from it.

#include <vector>

namespace kpzcond::tw {

/// Dense representation of u'' = 2u^3 + xu, u ~ Ai at +inf, on a uniform
/// mesh. Alongside u and u' the integrals from each node to x_match are
/// stored, together with the closed Airy tails beyond x_match.
struct PainleveSolution {
    std::vector<double> grid;  ///< descending, grid.front() == x_match
    std::vector<double> u_values;
    std::vector<double> u_prime_values;
    std::vector<double> int_u2;   ///< int_x^{x_match} u^2
    std::vector<double> int_xu2;  ///< int_x^{x_match} (t - x) u^2 dt
    std::vector<double> int_u;    ///< int_x^{x_match} u
    double x_match = 12.0;
    double x_min = -10.0;
    double tail_u2 = 0.0;   ///< int_{x_match}^inf Ai^2
    double tail_xu2 = 0.0;  ///< int_{x_match}^inf (t - x_match) Ai^2
    double tail_u = 0.0;    ///< int_{x_match}^inf Ai

    double x_max() const { return grid.front(); }
    double step() const { return grid[0] - grid[1]; }
};

/// Solves backward from x_match = x_max with u = Ai, u' = Ai' using an
/// adaptive Runge-Kutta-Fehlberg 7(8) integrator (tolerance 1e-14). mesh is
/// the number of mesh intervals. Throws BlowUp if |u| exceeds 1e6.
PainleveSolution hastings_mcleod(double x_min = -10.0, double x_max = 12.0, int mesh = 4400);

/// Shared default solution on [-10, 12], built on first use.
const PainleveSolution& default_solution();

/// State of the augmented system at an arbitrary point of the mesh range.
struct PainleveState {
    double u;
    double u_prime;
    double int_u2;   ///< int_x^inf u^2
    double int_xu2;  ///< int_x^inf (t - x) u^2 dt
    double int_u;    ///< int_x^inf u
};
/// Throws InsufficientRange outside [x_min, x_max].
PainleveState evaluate(const PainleveSolution& sol, double x);

double f_gue(double L, const PainleveSolution& sol = default_solution());
double p_gue(double L, const PainleveSolution& sol = default_solution());
double f_goe(double L, const PainleveSolution& sol = default_solution());
double p_goe(double L, const PainleveSolution& sol = default_solution());
/// P(H_flat(0,1) <= L) = F_GOE(2^{2/3} L).
double f_flat(double L, const PainleveSolution& sol = default_solution());
/// p_flat(L) = 2^{2/3} p_GOE(2^{2/3} L).
double p_flat(double L, const PainleveSolution& sol = default_solution());

/// Log-space densities. Beyond the mesh the Airy tail is used directly, so
/// these extend to L = 60 without underflow.
double log_p_gue(double L, const PainleveSolution& sol = default_solution());
double log_p_goe(double L, const PainleveSolution& sol = default_solution());
double log_p_flat(double L, const PainleveSolution& sol = default_solution());

enum class TailFamily { GUE_density, flat_density, GOE_density };

struct TailAsymptote {
    double prefactor;
    double exponent;
    double value;      ///< prefactor * exp(exponent), may underflow to 0
    double log_value;  ///< log(prefactor) + exponent
};

/// (8 pi L)^{-1} e^{-4/3 L^{3/2}}, (8 pi sqrt L)^{-1/2} e^{-4/3 L^{3/2}} and
/// (4 sqrt(pi) L^{1/4})^{-1} e^{-2/3 L^{3/2}}. Requires L > 0.
TailAsymptote tail_asymptote(TailFamily family, double L);

}  // namespace kpzcond::tw
