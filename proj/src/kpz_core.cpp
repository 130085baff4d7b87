#include "kpzcond/kpz_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "kpzcond/errors.hpp"

namespace kpzcond::kpz {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSqrt2 = std::numbers::sqrt2;

void check_L(double L) { require(std::isfinite(L) && L > 0.0, "L must be positive and finite"); }

double log_sum_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Single-variable weight of a u (left) or v (right) variable at level j.
class Weights {
public:
    Weights(const ScaledGrid& sg, ExponentForm form) : sg_(sg), form_(form) {}

    cplx u(std::size_t j, cplx z) const {
        const double t = sg_.tau_inc[j], x = sg_.x_inc[j], h = sg_.h_inc[j];
        if (form_ == ExponentForm::Scaled)
            return std::exp(0.5 * t * z * z + (h - x) * z + log_g_factor(z, t, x, sg_.L));
        const double L = sg_.L, l34 = std::pow(L, 0.75);
        const cplx xi = -std::sqrt(L) + scale_s(L) * z;
        const double lead = -2.0 / 3.0 * t * L * std::sqrt(L) + (x / kSqrt2 - kSqrt2 * h) * l34;
        return std::exp(log_kernel_f(xi, sg_.x_L_inc[j], t, sg_.h_L_inc[j]) - lead);
    }

    cplx v(std::size_t j, cplx z) const {
        const double t = sg_.tau_inc[j], x = sg_.x_inc[j], h = sg_.h_inc[j];
        if (form_ == ExponentForm::Scaled)
            return std::exp(0.5 * t * z * z + (-h - x) * z - log_g_factor(z, t, x, sg_.L));
        const double L = sg_.L, l34 = std::pow(L, 0.75);
        const cplx eta = std::sqrt(L) + scale_s(L) * z;
        const double lead = 2.0 / 3.0 * t * L * std::sqrt(L) + (x / kSqrt2 + kSqrt2 * h) * l34;
        return std::exp(lead - log_kernel_f(eta, sg_.x_L_inc[j], t, sg_.h_L_inc[j]));
    }

private:
    const ScaledGrid& sg_;
    ExponentForm form_;
};

struct Layout {
    double angle;
    double scale;
};

quad::Contour u_contour(const Layout& lay, double vertex) {
    return quad::Contour::ray_pair(cplx(vertex * lay.scale, 0.0), lay.angle);
}

quad::Contour v_contour(const Layout& lay, double vertex) {
    return quad::Contour::ray_pair(cplx(-vertex * lay.scale, 0.0), kPi - lay.angle);
}

// Rejects layouts whose contours cross a pole of J_L or lose decay.
// max_vertex[j] is the largest vertex index used at level j.
void check_layout(const ScaledGrid& sg, const KpzOptions& opts, std::span<const double> max_vertex) {
    constexpr double kTol = 1e-12;
    require(opts.leg_angle >= kPi / 2.0 - kTol && opts.leg_angle <= 2.0 * kPi / 3.0 + kTol,
            "leg_angle must lie in [pi/2, 2 pi/3]");
    require(std::isfinite(opts.vertex_scale) && opts.vertex_scale > 0.0, "vertex_scale must be positive");
    const double c = scale_c(sg.L);
    const double top = *std::max_element(max_vertex.begin(), max_vertex.end());
    if (!(2.0 * top * opts.vertex_scale * c < 1.0))
        fail(ErrorCode::OutOfRange, "L = " + std::to_string(sg.L) +
                                        " is too small for the contour layout (need 2 j c vertex_scale < 1)");
    if (std::abs(opts.leg_angle - kPi / 2.0) <= kTol) {
        for (std::size_t j = 0; j < sg.tau_inc.size(); ++j) {
            const double margin = sg.tau_inc[j] * (0.5 - max_vertex[j] * opts.vertex_scale * c);
            if (!(margin > std::abs(sg.x_inc[j]) * c))
                fail(ErrorCode::OutOfRange, "vertical contours do not decay at level " + std::to_string(j + 1) +
                                                " for L = " + std::to_string(sg.L));
        }
    }
}

double probe(const quad::Contour& c, const KpzOptions& opts, const std::function<cplx(cplx)>& w) {
    if (opts.quad.truncation_radius > 0.0) return opts.quad.truncation_radius;
    return quad::probe_radius(c, w, opts.quad.probe_decay);
}

quad::NodeSet weighted(const quad::Contour& c, const KpzOptions& opts, double radius, quad::Resolution res,
                       const std::function<cplx(cplx)>& w) {
    quad::NodeSet s = quad::discretize(c, opts.quad, radius, res);
    for (std::size_t i = 0; i < s.size(); ++i) s.weights[i] *= w(s.points[i]);
    return s;
}

// Dense pair state over (u_j, v_j) node indices, row-major in u.
struct PairState {
    std::size_t nu = 0, nv = 0;
    std::vector<cplx> val;
    std::vector<double> mag;
};

cplx pair_factor(double c, cplx u, cplx v, bool last) {
    const cplx d = 1.0 - c * (u - v);
    return last ? 1.0 / d : 1.0 / (d * d);
}

// Advances the chain by one level using
//   (1 - c(u - v')) / (u - u') = -c + d' / (u - u'),
//   (1 + c(v - u')) / (v - v') =  c + d' / (v - v'),  d' = 1 - c(u' - v'),
// which reduces each link to matrix products.
PairState link(const PairState& s, const quad::NodeSet& up, const quad::NodeSet& vp, const quad::NodeSet& un,
               const quad::NodeSet& vn, double c, bool last) {
    const std::size_t n = s.nu, m = s.nv, nu = un.size(), nv = vn.size();
    cplx tot = 0.0;
    double atot = 0.0;
    std::vector<cplx> rs(m, 0.0), cs(n, 0.0);
    std::vector<double> ars(m, 0.0), acs(n, 0.0);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < m; ++b) {
            const cplx x = s.val[a * m + b];
            const double ax = s.mag[a * m + b];
            rs[b] += x;
            cs[a] += x;
            ars[b] += ax;
            acs[a] += ax;
        }
    for (std::size_t a = 0; a < n; ++a) {
        tot += cs[a];
        atot += acs[a];
    }
    std::vector<cplx> kv(m * nv), ku(n * nu);
    for (std::size_t b = 0; b < m; ++b)
        for (std::size_t k = 0; k < nv; ++k) kv[b * nv + k] = 1.0 / (vp.points[b] - vn.points[k]);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t k = 0; k < nu; ++k) ku[a * nu + k] = 1.0 / (up.points[a] - un.points[k]);

    std::vector<cplx> X(nv, 0.0), Y(nu, 0.0);
    std::vector<double> aX(nv, 0.0), aY(nu, 0.0);
    for (std::size_t b = 0; b < m; ++b)
        for (std::size_t k = 0; k < nv; ++k) {
            X[k] += rs[b] * kv[b * nv + k];
            aX[k] += ars[b] * std::abs(kv[b * nv + k]);
        }
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t k = 0; k < nu; ++k) {
            Y[k] += cs[a] * ku[a * nu + k];
            aY[k] += acs[a] * std::abs(ku[a * nu + k]);
        }
    // T(a, k) = sum_b S(a, b) / (v_b - v'_k)
    std::vector<cplx> T(n * nv, 0.0);
    std::vector<double> aT(n * nv, 0.0);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < m; ++b) {
            const cplx x = s.val[a * m + b];
            const double ax = s.mag[a * m + b];
            for (std::size_t k = 0; k < nv; ++k) {
                T[a * nv + k] += x * kv[b * nv + k];
                aT[a * nv + k] += ax * std::abs(kv[b * nv + k]);
            }
        }
    PairState out;
    out.nu = nu;
    out.nv = nv;
    out.val.assign(nu * nv, 0.0);
    out.mag.assign(nu * nv, 0.0);
    // Z(i, k) = sum_a T(a, k) / (u_a - u'_i), accumulated into out.val
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t i = 0; i < nu; ++i) {
            const cplx kk = ku[a * nu + i];
            const double akk = std::abs(kk);
            for (std::size_t k = 0; k < nv; ++k) {
                out.val[i * nv + k] += T[a * nv + k] * kk;
                out.mag[i * nv + k] += aT[a * nv + k] * akk;
            }
        }
    for (std::size_t i = 0; i < nu; ++i)
        for (std::size_t k = 0; k < nv; ++k) {
            const cplx u = un.points[i], v = vn.points[k];
            const cplx d = 1.0 - c * (u - v);
            const double ad = std::abs(d);
            const cplx sum = -c * c * tot - c * d * X[k] + c * d * Y[i] + d * d * out.val[i * nv + k];
            const double asum = c * c * atot + c * ad * aX[k] + c * ad * aY[i] + ad * ad * out.mag[i * nv + k];
            const cplx w = un.weights[i] * vn.weights[k] * pair_factor(c, u, v, last);
            out.val[i * nv + k] = w * sum;
            out.mag[i * nv + k] = std::abs(w) * asum;
        }
    return out;
}

quad::TensorSum close_chain(const PairState& s, double evaluations) {
    quad::TensorSum out;
    out.value = quad::detail::pairwise_sum(s.val);
    out.magnitude = quad::detail::pairwise_sum(s.mag);
    out.evaluations = static_cast<std::size_t>(evaluations);
    if (!std::isfinite(out.value.real()) || !std::isfinite(out.value.imag()))
        fail(ErrorCode::NonFinite, "chain contraction produced a non-finite value");
    return out;
}

void check_grid_size(const Grid& g) {
    g.validate();
    if (g.m() > kMaxGridPoints)
        fail(ErrorCode::DimensionTooLarge, "grids with more than 3 time points are not supported, got " +
                                               std::to_string(g.m()));
}

struct LevelContours {
    std::vector<quad::Contour> u, v;
    std::vector<double> ru, rv;
};

double min_distance(const std::vector<quad::Contour>& cs) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < cs.size(); ++i) best = std::min(best, quad::contour_distance(cs[i], cs[i + 1]));
    return best;
}

LawResult package(const quad::ComplexResult& cr, double factor, const KpzOptions& opts, const std::string& method) {
    LawResult r;
    r.value = factor * cr.value.real();
    r.imag_residual = std::abs(factor * cr.value.imag());
    r.est_error = std::abs(factor) * cr.est_error;
    r.method = method;
    if (r.imag_residual > opts.residual_threshold)
        fail(ErrorCode::ResidualTooLarge, method + ": imaginary residual " + std::to_string(r.imag_residual) +
                                              " exceeds the threshold");
    return r;
}

}  // namespace

Grid Grid::from_interior(std::span<const double> taus, std::span<const double> xs, std::span<const double> hs) {
    Grid g;
    g.taus.assign(taus.begin(), taus.end());
    g.xs.assign(xs.begin(), xs.end());
    g.hs.assign(hs.begin(), hs.end());
    g.taus.push_back(1.0);
    g.xs.push_back(0.0);
    g.hs.push_back(0.0);
    return g;
}

void Grid::validate() const {
    require(taus.size() >= 2, "Grid: at least two time points are required (m >= 2)");
    require(xs.size() == taus.size() && hs.size() == taus.size(), "Grid: taus, xs and hs must have equal length");
    require(taus.back() == 1.0 && xs.back() == 0.0 && hs.back() == 0.0, "Grid: the last point must be (x, tau, h) = (0, 1, 0)");
    double prev = 0.0;
    for (std::size_t j = 0; j < taus.size(); ++j) {
        require(std::isfinite(taus[j]) && std::isfinite(xs[j]) && std::isfinite(hs[j]), "Grid: values must be finite");
        require(taus[j] > prev, taus[j] == prev ? "Grid: tied times are not supported here; use the limit law"
                                                : "Grid: times must be strictly increasing in (0, 1]");
        prev = taus[j];
    }
}

bridge::LimitQuery Grid::limit_query(bridge::Condition condition) const {
    validate();
    bridge::LimitQuery q;
    q.taus.assign(taus.begin(), taus.end() - 1);
    q.xs.assign(xs.begin(), xs.end() - 1);
    q.hs.assign(hs.begin(), hs.end() - 1);
    q.condition = condition;
    return q;
}

double scale_s(double L) { return 1.0 / (kSqrt2 * std::pow(L, 0.25)); }

double scale_c(double L) { return 1.0 / (2.0 * kSqrt2 * std::pow(L, 0.75)); }

ScaledGrid scale_grid(const Grid& g, double L) {
    g.validate();
    check_L(L);
    ScaledGrid sg;
    sg.L = L;
    const double l14 = std::pow(L, 0.25);
    double pt = 0.0, px = 0.0, ph = 0.0, pxl = 0.0, phl = 0.0;
    for (std::size_t j = 0; j < g.m(); ++j) {
        const double hl = g.taus[j] * L + g.hs[j] * kSqrt2 * l14;
        const double xl = g.xs[j] / (kSqrt2 * l14);
        sg.h_L.push_back(hl);
        sg.x_L.push_back(xl);
        sg.tau_inc.push_back(g.taus[j] - pt);
        sg.x_inc.push_back(g.xs[j] - px);
        sg.h_inc.push_back(g.hs[j] - ph);
        sg.x_L_inc.push_back(xl - pxl);
        sg.h_L_inc.push_back(hl - phl);
        pt = g.taus[j];
        px = g.xs[j];
        ph = g.hs[j];
        pxl = xl;
        phl = hl;
    }
    return sg;
}

cplx log_kernel_f(cplx zeta, double x, double tau, double h) {
    return zeta * (h + zeta * (x - tau * zeta / 3.0));
}

cplx kernel_f(cplx zeta, double x, double tau, double h) {
    const cplx e = log_kernel_f(zeta, x, tau, h);
    if (e.real() > 700.0)
        fail(ErrorCode::NonFinite, "kernel_f overflows; use the scaled or log form");
    return std::exp(e);
}

cplx kernel_quad(cplx u, double a, double b) { return std::exp(u * (0.5 * a * u + b)); }

cplx log_g_factor(cplx w, double tau, double x, double L) {
    const double k = std::pow(L, -0.75) / kSqrt2;
    return k * w * w * (-tau * w / 6.0 + 0.5 * x);
}

cplx g_factor(cplx w, double tau, double x, double L) { return std::exp(log_g_factor(w, tau, x, L)); }

cplx j_factor(std::span<const cplx> u, std::span<const cplx> v, double L) {
    require(u.size() == v.size() && u.size() >= 2, "j_factor: u and v must have equal length >= 2");
    check_L(L);
    const double c = scale_c(L);
    const std::size_t m = u.size();
    cplx out = 1.0 / (1.0 - c * (u[m - 1] - v[m - 1]));
    for (std::size_t j = 0; j + 1 < m; ++j) {
        const cplx d = 1.0 - c * (u[j] - v[j]);
        out *= (1.0 - c * (u[j] - v[j + 1])) * (1.0 + c * (v[j] - u[j + 1])) /
               ((u[j] - u[j + 1]) * (v[j] - v[j + 1]) * d * d);
    }
    return out;
}

LawResult qhat1_ratio_step(const Grid& g, double L, const KpzOptions& opts) {
    check_grid_size(g);
    opts.quad.validate();
    const ScaledGrid sg = scale_grid(g, L);
    const std::size_t m = g.m();
    std::vector<double> top(m);
    for (std::size_t j = 0; j < m; ++j) top[j] = static_cast<double>(j + 1);
    check_layout(sg, opts, top);
    const Weights w(sg, opts.exponent_form);
    const Layout lay{opts.leg_angle, opts.vertex_scale};
    const double c = scale_c(L);

    LevelContours lc;
    for (std::size_t j = 0; j < m; ++j) {
        lc.u.push_back(u_contour(lay, j + 1.0));
        lc.v.push_back(v_contour(lay, j + 1.0));
        lc.ru.push_back(probe(lc.u[j], opts, [&, j](cplx z) { return w.u(j, z); }));
        lc.rv.push_back(probe(lc.v[j], opts, [&, j](cplx z) { return w.v(j, z); }));
    }
    auto run = [&](quad::Resolution res) {
        std::vector<quad::NodeSet> U, V;
        for (std::size_t j = 0; j < m; ++j) {
            U.push_back(weighted(lc.u[j], opts, lc.ru[j], res, [&, j](cplx z) { return w.u(j, z); }));
            V.push_back(weighted(lc.v[j], opts, lc.rv[j], res, [&, j](cplx z) { return w.v(j, z); }));
        }
        PairState s;
        s.nu = U[0].size();
        s.nv = V[0].size();
        double evals = 1.0;
        for (std::size_t a = 0; a < s.nu; ++a)
            for (std::size_t b = 0; b < s.nv; ++b) {
                const cplx x = U[0].weights[a] * V[0].weights[b] * pair_factor(c, U[0].points[a], V[0].points[b], m == 1);
                s.val.push_back(x);
                s.mag.push_back(std::abs(x));
            }
        for (std::size_t j = 0; j < m; ++j) evals *= static_cast<double>(U[j].size() * V[j].size());
        for (std::size_t j = 1; j < m; ++j) s = link(s, U[j - 1], V[j - 1], U[j], V[j], c, j + 1 == m);
        return close_chain(s, evals);
    };
    const auto cr = quad::finish_result(run(quad::Resolution::Full), run(quad::Resolution::Half), opts.quad);
    const double sign = (m % 2 == 1) ? 1.0 : -1.0;
    LawResult r = package(cr, sign * 2.0 * kPi, opts, "contour_chain");
    r.diagnostics = {{"L", L},
                     {"c", c},
                     {"nodes_per_leg", static_cast<double>(opts.quad.nodes_per_leg)},
                     {"max_radius", std::max(*std::max_element(lc.ru.begin(), lc.ru.end()),
                                             *std::max_element(lc.rv.begin(), lc.rv.end()))},
                     {"min_contour_distance", min_distance(lc.u)},
                     {"magnitude", 2.0 * kPi * cr.magnitude}};
    return r;
}

LawResult qhat1_ratio_flat(const Grid& g, double L, const KpzOptions& opts) {
    check_grid_size(g);
    opts.quad.validate();
    const ScaledGrid sg = scale_grid(g, L);
    const std::size_t m = g.m();
    std::vector<double> top(m);
    for (std::size_t j = 0; j < m; ++j) top[j] = static_cast<double>(j + 1);
    check_layout(sg, opts, top);
    const Weights w(sg, opts.exponent_form);
    const Layout lay{opts.leg_angle, opts.vertex_scale};
    const double c = scale_c(L);
    const double lift = kSqrt2 * std::pow(L, -0.75);

    // v_1 carries u_1 = -v_1, the pairing factor and 2 + sqrt(2) L^{-3/4} v_1.
    auto first = [&](cplx v) {
        const cplx d = 1.0 + 2.0 * c * v;
        return w.v(0, v) * w.u(0, -v) * (2.0 + lift * v) / (d * d);
    };
    LevelContours lc;
    for (std::size_t j = 0; j < m; ++j) {
        lc.u.push_back(u_contour(lay, j + 1.0));
        lc.v.push_back(v_contour(lay, j + 1.0));
        lc.ru.push_back(j == 0 ? 0.0 : probe(lc.u[j], opts, [&, j](cplx z) { return w.u(j, z); }));
        lc.rv.push_back(j == 0 ? probe(lc.v[0], opts, first)
                               : probe(lc.v[j], opts, [&, j](cplx z) { return w.v(j, z); }));
    }
    auto run = [&](quad::Resolution res) {
        const quad::NodeSet V0 = weighted(lc.v[0], opts, lc.rv[0], res, first);
        std::vector<quad::NodeSet> U(m), V(m);
        for (std::size_t j = 1; j < m; ++j) {
            U[j] = weighted(lc.u[j], opts, lc.ru[j], res, [&, j](cplx z) { return w.u(j, z); });
            V[j] = weighted(lc.v[j], opts, lc.rv[j], res, [&, j](cplx z) { return w.v(j, z); });
        }
        const quad::NodeSet& un = U[1];
        const quad::NodeSet& vn = V[1];
        PairState s;
        s.nu = un.size();
        s.nv = vn.size();
        s.val.assign(s.nu * s.nv, 0.0);
        s.mag.assign(s.nu * s.nv, 0.0);
        for (std::size_t b = 0; b < V0.size(); ++b) {
            const cplx v1 = V0.points[b], u1 = -v1;
            const cplx x = V0.weights[b];
            const double ax = std::abs(x);
            for (std::size_t i = 0; i < s.nu; ++i) {
                const cplx ui = un.points[i];
                for (std::size_t k = 0; k < s.nv; ++k) {
                    const cplx vk = vn.points[k];
                    const cplx ab = (1.0 - c * (u1 - vk)) * (1.0 + c * (v1 - ui)) / ((u1 - ui) * (v1 - vk));
                    s.val[i * s.nv + k] += x * ab;
                    s.mag[i * s.nv + k] += ax * std::abs(ab);
                }
            }
        }
        for (std::size_t i = 0; i < s.nu; ++i)
            for (std::size_t k = 0; k < s.nv; ++k) {
                const cplx wt = un.weights[i] * vn.weights[k] * pair_factor(c, un.points[i], vn.points[k], m == 2);
                s.val[i * s.nv + k] *= wt;
                s.mag[i * s.nv + k] *= std::abs(wt);
            }
        double evals = static_cast<double>(V0.size());
        for (std::size_t j = 1; j < m; ++j) evals *= static_cast<double>(U[j].size() * V[j].size());
        for (std::size_t j = 2; j < m; ++j) s = link(s, U[j - 1], V[j - 1], U[j], V[j], c, j + 1 == m);
        return close_chain(s, evals);
    };
    const auto cr = quad::finish_result(run(quad::Resolution::Full), run(quad::Resolution::Half), opts.quad);
    const double sign = (m % 2 == 1) ? 1.0 : -1.0;
    const double factor = sign * std::sqrt(kPi);
    LawResult r = package(cr, factor, opts, "contour_chain_flat");
    r.diagnostics = {{"L", L},
                     {"c", c},
                     {"nodes_per_leg", static_cast<double>(opts.quad.nodes_per_leg)},
                     {"max_radius", std::max(*std::max_element(lc.ru.begin(), lc.ru.end()),
                                             *std::max_element(lc.rv.begin(), lc.rv.end()))},
                     {"min_contour_distance", min_distance(lc.v)},
                     {"magnitude", std::sqrt(kPi) * cr.magnitude}};
    return r;
}

namespace {

using CMat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;

// Symmetrized states of one side of one level: every variable sits on one of
// a few contours, variables on the same contour use strictly increasing node
// indices. The weight carries the node weights, the Vandermonde square and
// the count! of each contour block.
struct SideStates {
    std::size_t size = 0;
    std::size_t arity = 0;
    std::vector<cplx> points;  ///< size * arity, row-major
    std::vector<cplx> weight;
};

SideStates build_states(const std::vector<std::pair<const quad::NodeSet*, int>>& blocks) {
    SideStates out;
    for (const auto& b : blocks) out.arity += static_cast<std::size_t>(b.second);
    double perm = 1.0;
    for (const auto& b : blocks)
        for (int k = 2; k <= b.second; ++k) perm *= k;
    std::vector<std::size_t> idx;
    std::vector<std::size_t> bounds;  // start index of each block's slots
    for (const auto& b : blocks) {
        bounds.push_back(idx.size());
        for (int k = 0; k < b.second; ++k) idx.push_back(static_cast<std::size_t>(k));
    }
    bounds.push_back(idx.size());
    auto valid = [&] {
        for (std::size_t bi = 0; bi < blocks.size(); ++bi)
            if (bounds[bi + 1] > bounds[bi] && idx[bounds[bi + 1] - 1] >= blocks[bi].first->size()) return false;
        return true;
    };
    // odometer over strictly increasing tuples within each block
    auto advance = [&]() -> bool {
        for (std::size_t bi = blocks.size(); bi-- > 0;) {
            const std::size_t lo = bounds[bi], hi = bounds[bi + 1], n = blocks[bi].first->size();
            for (std::size_t s = hi; s-- > lo;) {
                if (idx[s] + (hi - s) < n) {
                    ++idx[s];
                    for (std::size_t t = s + 1; t < hi; ++t) idx[t] = idx[t - 1] + 1;
                    return true;
                }
            }
            for (std::size_t t = lo; t < hi; ++t) idx[t] = t - lo;
        }
        return false;
    };
    if (out.arity == 0 || !valid()) return out;
    std::vector<cplx> pts(out.arity);
    do {
        cplx w = perm;
        std::size_t slot = 0;
        for (std::size_t bi = 0; bi < blocks.size(); ++bi)
            for (std::size_t s = bounds[bi]; s < bounds[bi + 1]; ++s, ++slot) {
                pts[slot] = blocks[bi].first->points[idx[s]];
                w *= blocks[bi].first->weights[idx[s]];
            }
        for (std::size_t a = 0; a < out.arity; ++a)
            for (std::size_t b = a + 1; b < out.arity; ++b) w *= (pts[b] - pts[a]) * (pts[b] - pts[a]);
        out.points.insert(out.points.end(), pts.begin(), pts.end());
        out.weight.push_back(w);
        ++out.size;
    } while (advance());
    return out;
}

// e_k of {kernel(p_a, x)} over the members of each state, for every x node.
void symmetric_features(const SideStates& st, const quad::NodeSet& xs, bool state_minus_x, std::vector<CMat>& e,
                        std::vector<RMat>& ea) {
    const std::size_t K = st.arity;
    e.assign(K + 1, CMat(xs.size(), st.size));
    ea.assign(K + 1, RMat(xs.size(), st.size));
    std::vector<cplx> ek(K + 1);
    std::vector<double> eka(K + 1);
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t p = 0; p < st.size; ++p) {
            std::fill(ek.begin(), ek.end(), cplx(0.0));
            std::fill(eka.begin(), eka.end(), 0.0);
            ek[0] = 1.0;
            eka[0] = 1.0;
            for (std::size_t a = 0; a < K; ++a) {
                const cplx diff = st.points[p * K + a] - xs.points[i];
                const cplx kk = state_minus_x ? 1.0 / diff : -1.0 / diff;
                const double ak = std::abs(kk);
                for (std::size_t k = a + 1; k >= 1; --k) {
                    ek[k] += ek[k - 1] * kk;
                    eka[k] += eka[k - 1] * ak;
                }
            }
            for (std::size_t k = 0; k <= K; ++k) {
                e[k](i, p) = ek[k];
                ea[k](i, p) = eka[k];
            }
        }
}

struct SmallnBranch {
    // single-variable level
    const quad::NodeSet* x = nullptr;  ///< u side
    const quad::NodeSet* y = nullptr;  ///< v side
    bool single_is_level2 = true;
    // multi-variable level
    SideStates P, Q;
    double n2 = 0.0;
};

double branch_cost(const SmallnBranch& b) {
    const double K = static_cast<double>(b.P.arity);
    const double M = static_cast<double>(b.P.size), MQ = static_cast<double>(b.Q.size);
    if (!b.x) return M * MQ;
    const double nx = static_cast<double>(b.x->size()), ny = static_cast<double>(b.y->size());
    return M * MQ * (1.0 + (K + 1.0) * nx) + (K + 1.0) * (K + 1.0) * nx * MQ * ny;
}

// Sum over one branch of the scaled Pi_n integrand at m = 2.
quad::TensorSum contract_branch(const SmallnBranch& b, double c) {
    const std::size_t K = b.P.arity, M = b.P.size, MQ = b.Q.size;
    // coupling inside the multi-variable level
    CMat T(M, MQ);
    RMat Ta(M, MQ);
    for (std::size_t p = 0; p < M; ++p)
        for (std::size_t q = 0; q < MQ; ++q) {
            cplx prod = b.P.weight[p] * b.Q.weight[q];
            cplx sum_term = b.n2;
            for (std::size_t a = 0; a < K; ++a)
                for (std::size_t bb = 0; bb < K; ++bb) {
                    const cplx d = 1.0 - c * (b.P.points[p * K + a] - b.Q.points[q * K + bb]);
                    prod /= d * d;
                }
            if (!b.single_is_level2) {
                for (std::size_t a = 0; a < K; ++a) sum_term += -c * b.P.points[p * K + a] + c * b.Q.points[q * K + a];
                prod *= sum_term;
            }
            T(p, q) = prod;
            Ta(p, q) = std::abs(prod);
        }
    quad::TensorSum out;
    if (!b.x) {
        out.value = T.sum();
        out.magnitude = Ta.sum();
        out.evaluations = M * MQ;
        return out;
    }
    // cross factors: prod_a (gamma + d K(u_a, x)) prod_b (delta + d K'(v_b, y))
    const double gamma = b.single_is_level2 ? -c : c;
    const double delta = -gamma;
    std::vector<CMat> E, F;
    std::vector<RMat> Ea, Fa;
    symmetric_features(b.P, *b.x, b.single_is_level2, E, Ea);
    symmetric_features(b.Q, *b.y, b.single_is_level2, F, Fa);
    const std::size_t nx = b.x->size(), ny = b.y->size();
    std::vector<std::vector<CMat>> H(K + 1, std::vector<CMat>(K + 1));
    std::vector<std::vector<RMat>> Ha(K + 1, std::vector<RMat>(K + 1));
    for (std::size_t k = 0; k <= K; ++k) {
        const CMat G = E[k] * T;
        const RMat Ga = Ea[k] * Ta;
        for (std::size_t l = 0; l <= K; ++l) {
            H[k][l] = G * F[l].transpose();
            Ha[k][l] = Ga * Fa[l].transpose();
        }
    }
    std::vector<cplx> rows(nx);
    std::vector<double> rows_a(nx);
    for (std::size_t i = 0; i < nx; ++i) {
        cplx acc = 0.0;
        double acc_a = 0.0;
        const cplx xv = b.x->points[i];
        for (std::size_t j = 0; j < ny; ++j) {
            const cplx yv = b.y->points[j];
            const cplx d = 1.0 - c * (xv - yv);
            cplx s = b.x->weights[i] * b.y->weights[j] / (d * d);
            if (b.single_is_level2) s *= d;  // sum term of a single pair
            cplx inner = 0.0;
            double inner_a = 0.0;
            for (std::size_t k = 0; k <= K; ++k)
                for (std::size_t l = 0; l <= K; ++l) {
                    const cplx coef = std::pow(gamma, double(K - k)) * std::pow(delta, double(K - l)) *
                                      std::pow(d, double(k + l));
                    inner += coef * H[k][l](i, j);
                    inner_a += std::abs(coef) * Ha[k][l](i, j);
                }
            acc += s * inner;
            acc_a += std::abs(s) * inner_a;
        }
        rows[i] = acc;
        rows_a[i] = acc_a;
    }
    out.value = quad::detail::pairwise_sum(rows);
    out.magnitude = quad::detail::pairwise_sum(rows_a);
    out.evaluations = M * MQ * nx * ny;
    if (!std::isfinite(out.value.real()) || !std::isfinite(out.value.imag()))
        fail(ErrorCode::NonFinite, "qhatn_step_smalln: non-finite branch sum");
    return out;
}

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

KpzOptions smalln_options() {
    KpzOptions o;
    o.quad.scheme = quad::Scheme::Trapezoid;
    o.quad.nodes_per_leg = 28;
    o.vertex_scale = 1.5;
    return o;
}

LawResult qhatn_step_smalln(const Grid& g, const MultiIndex& n, double L, const KpzOptions& opts, double z_radius) {
    g.validate();
    require(g.m() == 2, "qhatn_step_smalln: only m = 2 grids are supported");
    require(n[0] >= 0 && n[1] >= 0 && n[0] + n[1] <= 3, "qhatn_step_smalln: need n_1, n_2 >= 0 and n_1 + n_2 <= 3");
    require(std::isfinite(z_radius) && z_radius > 1.0, "qhatn_step_smalln: z_radius must exceed 1");
    opts.quad.validate();
    const ScaledGrid sg = scale_grid(g, L);
    const double top[2] = {1.0, 2.0};
    check_layout(sg, opts, top);
    const int n1 = n[0], n2 = n[1], N = n1 + n2;

    LawResult r;
    r.method = "contour_branch_sum";
    const double log_fact = std::lgamma(n1 + 1.0) + std::lgamma(n2 + 1.0);
    r.diagnostics = {{"n1", double(n1)}, {"n2", double(n2)}, {"series_weight", std::exp(-2.0 * log_fact)}};
    if (n2 == 0) {
        // Pi_n carries the empty sum over the last level.
        r.method = "vanishing";
        r.diagnostics.emplace_back("log_abs_value", -std::numeric_limits<double>::infinity());
        r.diagnostics.emplace_back("branches_evaluated", 0.0);
        r.diagnostics.emplace_back("branches_skipped", 0.0);
        return r;
    }

    // Branch coefficients depend only on the number of "in" choices (k for u, l for v).
    quad::QuadSpec zspec;
    zspec.nodes_per_leg = 64;
    const int nb = n2 + 1;
    std::vector<double> coef(nb * nb, 0.0);
    int skipped = 0;
    double max_coef_residual = 0.0;
    for (int k = 0; k <= n2; ++k)
        for (int l = 0; l <= n2; ++l) {
            const int ins = k + l, outs = 2 * n2 - ins;
            const auto cr = quad::circle_integrate(z_radius, zspec, [&](cplx z) {
                return std::pow(1.0 - z, n1) * std::pow(1.0 - 1.0 / z, n2) * std::pow(1.0 / (1.0 - z), ins) *
                       std::pow(-z / (1.0 - z), outs) / (z * (1.0 - z));
            });
            const double v = cr.value.real();
            max_coef_residual = std::max(max_coef_residual, std::abs(cr.value.imag()));
            if (std::abs(v) < 1e-13) {
                skipped += static_cast<int>(binomial(n2, k) * binomial(n2, l));
                continue;
            }
            coef[k * nb + l] = v;
        }

    const Weights w(sg, opts.exponent_form);
    const Layout lay{opts.leg_angle, opts.vertex_scale};
    const double c = scale_c(L);
    // left to right: C2_in (0), C1 (1), C2_out (2); the right side mirrors this
    enum Slot { U1, U2in, U2out, V1, V2in, V2out };
    const quad::Contour contours[6] = {u_contour(lay, 1.0), u_contour(lay, 0.0), u_contour(lay, 2.0),
                                       v_contour(lay, 1.0), v_contour(lay, 0.0), v_contour(lay, 2.0)};
    const std::function<cplx(cplx)> wfn[6] = {
        [&](cplx z) { return w.u(0, z); }, [&](cplx z) { return w.u(1, z); }, [&](cplx z) { return w.u(1, z); },
        [&](cplx z) { return w.v(0, z); }, [&](cplx z) { return w.v(1, z); }, [&](cplx z) { return w.v(1, z); }};
    double radii[6];
    for (int i = 0; i < 6; ++i) radii[i] = probe(contours[i], opts, wfn[i]);

    auto make_branch = [&](int k, int l, const std::vector<quad::NodeSet>& sets) {
        SmallnBranch b;
        b.n2 = n2;
        if (n1 == 0) {
            b.P = build_states({{&sets[U2in], k}, {&sets[U2out], n2 - k}});
            b.Q = build_states({{&sets[V2in], l}, {&sets[V2out], n2 - l}});
            b.single_is_level2 = false;
        } else if (n2 == 1) {
            b.x = &sets[k == 1 ? U2in : U2out];
            b.y = &sets[l == 1 ? V2in : V2out];
            b.P = build_states({{&sets[U1], n1}});
            b.Q = build_states({{&sets[V1], n1}});
            b.single_is_level2 = true;
        } else {
            b.x = &sets[U1];
            b.y = &sets[V1];
            b.P = build_states({{&sets[U2in], k}, {&sets[U2out], n2 - k}});
            b.Q = build_states({{&sets[V2in], l}, {&sets[V2out], n2 - l}});
            b.single_is_level2 = false;
        }
        return b;
    };
    auto node_sets = [&](quad::Resolution res) {
        std::vector<quad::NodeSet> sets;
        for (int i = 0; i < 6; ++i) sets.push_back(weighted(contours[i], opts, radii[i], res, wfn[i]));
        return sets;
    };
    const std::vector<quad::NodeSet> full_sets = node_sets(quad::Resolution::Full);
    const std::vector<quad::NodeSet> half_sets = node_sets(quad::Resolution::Half);

    // projected multiply-adds of all branch contractions at both resolutions
    double projected = 0.0;
    int evaluated = 0;
    auto arity_cost = [&](int k, int l, const std::vector<quad::NodeSet>& sets) {
        const auto choose = [](double nn, int kk) {
            double r2 = 1.0;
            for (int i = 1; i <= kk; ++i) r2 *= (nn - kk + i) / i;
            return r2;
        };
        SmallnBranch b;
        auto states = [&](int slot_a, int ka, int slot_b, int kb) {
            SideStates s;
            s.arity = static_cast<std::size_t>(ka + kb);
            s.size = static_cast<std::size_t>(choose(double(sets[slot_a].size()), ka) *
                                              choose(double(sets[slot_b].size()), kb));
            return s;
        };
        if (n1 == 0) {
            b.P = states(U2in, k, U2out, n2 - k);
            b.Q = states(V2in, l, V2out, n2 - l);
        } else if (n2 == 1) {
            b.x = &sets[k == 1 ? U2in : U2out];
            b.y = &sets[l == 1 ? V2in : V2out];
            b.P = states(U1, n1, U1, 0);
            b.Q = states(V1, n1, V1, 0);
        } else {
            b.x = &sets[U1];
            b.y = &sets[V1];
            b.P = states(U2in, k, U2out, n2 - k);
            b.Q = states(V2in, l, V2out, n2 - l);
        }
        return branch_cost(b);
    };
    for (int k = 0; k <= n2; ++k)
        for (int l = 0; l <= n2; ++l) {
            if (coef[k * nb + l] == 0.0) continue;
            projected += arity_cost(k, l, full_sets) + arity_cost(k, l, half_sets);
            ++evaluated;
        }
    if (projected > kSmallnCostLimit)
        fail(ErrorCode::CostGuard, "qhatn_step_smalln: projected node count " + std::to_string(projected) +
                                       " exceeds 1e9; lower nodes_per_leg");

    cplx total = 0.0;
    double total_err = 0.0, magnitude = 0.0, evals = 0.0;
    for (int k = 0; k <= n2; ++k)
        for (int l = 0; l <= n2; ++l) {
            const double cf = coef[k * nb + l];
            if (cf == 0.0) continue;
            const quad::TensorSum full = contract_branch(make_branch(k, l, full_sets), c);
            const quad::TensorSum half = contract_branch(make_branch(k, l, half_sets), c);
            const auto cr = quad::finish_result(full, half, opts.quad);
            const double mult = binomial(n2, k) * binomial(n2, l) * cf;
            total += mult * cr.value;
            total_err += std::abs(mult) * cr.est_error;
            magnitude += std::abs(mult) * cr.magnitude;
            evals += static_cast<double>(full.evaluations + half.evaluations);
        }

    // Prefactor -(8 pi L) P s^{2N} exp(E_n + (4/3) L^{3/2}), kept in log form.
    const double s = scale_s(L), l32 = L * std::sqrt(L), two_root = 2.0 * std::sqrt(L);
    const double sum_sq = double(n1) * n1 + double(n2) * n2;
    const double sum_nn1 = double(n1) * (n1 - 1) + double(n2) * (n2 - 1);
    const double log_abs_p = n1 * n2 * std::log(4.0 * L) + (2.0 * sum_nn1 - 2.0 * n1 * n2) * std::log(s) -
                             2.0 * sum_sq * std::log(two_root) + std::log(two_root);
    double e_n = 0.0;
    for (int j = 0; j < 2; ++j)
        e_n += n[j] * (-4.0 / 3.0 * sg.tau_inc[j] * l32 - 2.0 * kSqrt2 * sg.h_inc[j] * std::pow(L, 0.75));
    const double log_pref = std::log(8.0 * kPi * L) + log_abs_p + 2.0 * N * std::log(s) + e_n + 4.0 / 3.0 * l32;
    const int p_sign_exp = N + n1 * n2 + 1;
    const double sign = (p_sign_exp % 2 == 0) ? -1.0 : 1.0;
    const double factor = sign * std::exp(log_pref);

    r.value = factor * total.real();
    r.imag_residual = std::abs(factor * total.imag());
    r.est_error = std::abs(factor) * total_err;
    const double log_abs = total.real() != 0.0 ? log_pref + std::log(std::abs(total.real()))
                                               : -std::numeric_limits<double>::infinity();
    r.diagnostics.emplace_back("log_prefactor", log_pref);
    r.diagnostics.emplace_back("log_abs_value", log_abs);
    r.diagnostics.emplace_back("branches_evaluated", double(evaluated));
    r.diagnostics.emplace_back("branches_skipped", double(skipped));
    r.diagnostics.emplace_back("z_coefficient_residual", max_coef_residual);
    r.diagnostics.emplace_back("projected_cost", projected);
    r.diagnostics.emplace_back("evaluations", evals);
    r.diagnostics.emplace_back("magnitude", std::abs(factor) * magnitude);
    r.diagnostics.emplace_back("z_radius", z_radius);
    if (r.imag_residual > opts.residual_threshold * std::max(1.0, std::abs(factor) * magnitude))
        fail(ErrorCode::ResidualTooLarge, "qhatn_step_smalln: imaginary residual " + std::to_string(r.imag_residual));
    return r;
}

RemainderBound remainder_bound(std::span<const int> n, std::span<const double> tau_inc, double L, double C, double eps) {
    require(!n.empty() && n.size() == tau_inc.size(), "remainder_bound: n and tau increments must match");
    check_L(L);
    require(std::isfinite(C) && C > 0.0, "remainder_bound: C must be positive");
    require(eps > 0.0 && eps < 0.5, "remainder_bound: eps must lie in (0, 1/2)");
    auto xlogx_half = [](double k) { return k > 0.0 ? 0.5 * k * std::log(k) : 0.0; };
    RemainderBound b;
    const std::size_t m = n.size();
    double total = 0.0, lfact = 0.0, weighted = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        require(n[j] >= 0, "remainder_bound: n entries must be nonnegative");
        require(tau_inc[j] > 0.0, "remainder_bound: tau increments must be positive");
        total += n[j];
        lfact += std::lgamma(n[j] + 1.0);
        weighted += tau_inc[j] * n[j];
    }
    b.log_combinatorial = xlogx_half(n[0]) + xlogx_half(n[m - 1]);
    for (std::size_t j = 0; j + 1 < m; ++j) b.log_combinatorial += xlogx_half(double(n[j]) + n[j + 1]);
    const double l32 = L * std::sqrt(L);
    b.log_bound = b.log_combinatorial + total * std::log(C) - 2.0 * lfact - 4.0 * (1.0 - 2.0 * eps) / 3.0 * weighted * l32;
    b.log_normalized_bound = b.log_bound + std::log(8.0 * kPi * L) + 4.0 / 3.0 * l32;
    return b;
}

RemainderSum remainder_bound_sum(std::span<const double> tau_inc, double L, double C, double eps, int cutoff) {
    const std::size_t m = tau_inc.size();
    require(m >= 1, "remainder_bound_sum: at least one level is required");
    require(cutoff >= 3, "remainder_bound_sum: cutoff must be at least 3");
    require(std::pow(double(cutoff), double(m)) <= 1e7, "remainder_bound_sum: cutoff^m exceeds 1e7");
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    std::vector<double> shell(cutoff + 1, kNegInf);
    std::vector<int> idx(m, 1);
    while (true) {
        const bool ones = std::all_of(idx.begin(), idx.end(), [](int k) { return k == 1; });
        if (!ones) {
            const int top = *std::max_element(idx.begin(), idx.end());
            shell[top] = log_sum_exp(shell[top], remainder_bound(idx, tau_inc, L, C, eps).log_bound);
        }
        std::size_t d = 0;
        while (d < m && idx[d] == cutoff) idx[d++] = 1;
        if (d == m) break;
        ++idx[d];
    }
    RemainderSum out;
    out.cutoff = cutoff;
    out.log_partial_sum = kNegInf;
    for (double v : shell) out.log_partial_sum = log_sum_exp(out.log_partial_sum, v);
    const double log_ratio = shell[cutoff] - shell[cutoff - 1];
    out.shell_ratio = std::exp(log_ratio);
    if (out.shell_ratio < 1.0) {
        out.log_tail_estimate = shell[cutoff] + log_ratio - std::log1p(-out.shell_ratio);
    } else {
        out.log_tail_estimate = std::numeric_limits<double>::infinity();
    }
    out.log_total = log_sum_exp(out.log_partial_sum, out.log_tail_estimate);
    return out;
}

}  // namespace kpzcond::kpz
