#include "kpzcond/contour_quad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "kpzcond/gauss_rules.hpp"

namespace kpzcond::quad {
namespace {

constexpr double kPi = std::numbers::pi;
const cplx kInv2PiI = 1.0 / cplx(0.0, 2.0 * kPi);

double cross(cplx a, cplx b) { return a.real() * b.imag() - a.imag() * b.real(); }
double dot(cplx a, cplx b) { return a.real() * b.real() + a.imag() * b.imag(); }

double point_ray_distance(cplx x, cplx origin, cplx dir) {
    const double t = std::max(0.0, dot(x - origin, dir));
    return std::abs(x - origin - t * dir);
}

double ray_ray_distance(cplx p, cplx d, cplx q, cplx e) {
    const double c = cross(d, e);
    if (std::abs(c) > 1e-14) {
        const double s = cross(q - p, e) / c;
        const double t = cross(q - p, d) / c;
        if (s >= 0.0 && t >= 0.0) return 0.0;
    }
    return std::min(point_ray_distance(p, q, e), point_ray_distance(q, p, d));
}

// Nodes and weights on [0, radius] for one leg.
void leg_rule(const QuadSpec& spec, double radius, Resolution res, std::vector<double>& r, std::vector<double>& w) {
    r.clear();
    w.clear();
    const int total = res == Resolution::Full ? spec.nodes_per_leg : std::max(2, spec.nodes_per_leg / 2);
    if (spec.scheme == Scheme::ClenshawCurtis) {
        const Rule rule = clenshaw_curtis(std::max(2, total));
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            r.push_back(0.5 * radius * (rule.nodes[i] + 1.0));
            w.push_back(0.5 * radius * rule.weights[i]);
        }
        return;
    }
    if (spec.scheme == Scheme::Trapezoid) {
        // midpoint nodes; the two legs of a straight line form one uniform lattice
        const double h = radius / total;
        for (int k = 0; k < total; ++k) {
            r.push_back((k + 0.5) * h);
            w.push_back(h);
        }
        return;
    }
    // drop panels before the order falls below 2, so the half rule stays coarser
    const int panels = std::min(spec.panel_count, std::max(1, total / 2));
    const int order = std::max(2, total / panels);
    const Rule rule = gauss_legendre(order);
    double unit = 0.0;
    for (int k = 0; k < panels; ++k) unit += std::pow(spec.panel_ratio, k);
    double a = 0.0;
    for (int k = 0; k < panels; ++k) {
        const double width = radius * std::pow(spec.panel_ratio, k) / unit;
        const double b = k + 1 == panels ? radius : a + width;
        for (int i = 0; i < order; ++i) {
            r.push_back(0.5 * (a + b) + 0.5 * (b - a) * rule.nodes[i]);
            w.push_back(0.5 * (b - a) * rule.weights[i]);
        }
        a = b;
    }
}

}  // namespace

Contour::Contour(ContourKind kind, cplx vertex, double angle, Orientation orientation)
    : kind_(kind), vertex_(vertex), angle_(angle), orientation_(orientation) {}

Contour Contour::ray_pair(cplx vertex, double angle, Orientation orientation) {
    require(angle > 0.0 && angle < kPi, "ray_pair: angle must lie in (0, pi)");
    require(std::isfinite(vertex.real()) && std::isfinite(vertex.imag()), "ray_pair: vertex must be finite");
    return Contour(ContourKind::RayPair, vertex, angle, orientation);
}

Contour Contour::vertical_line(double abscissa, Orientation orientation) {
    require(std::isfinite(abscissa), "vertical_line: abscissa must be finite");
    return Contour(ContourKind::VerticalLine, cplx(abscissa, 0.0), kPi / 2.0, orientation);
}

Contour Contour::sigma_left(double j, double angle) {
    require(angle > kPi / 2.0 && angle < kPi, "sigma_left: angle must lie in (pi/2, pi)");
    return ray_pair(cplx(j, 0.0), angle, Orientation::Upward);
}

Contour Contour::sigma_right(double j, double angle) {
    return scale_contour(sigma_left(j, angle), 0.0, 1.0, true);
}

Contour scale_contour(const Contour& c, cplx center, double factor, bool reflect) {
    require(factor > 0.0 && std::isfinite(factor), "scale_contour: factor must be positive");
    const cplx v = reflect ? -c.vertex() : c.vertex();
    const cplx vertex = center + factor * v;
    if (c.kind() == ContourKind::VerticalLine) {
        require(std::abs(vertex.imag()) == 0.0, "scale_contour: vertical line must stay on a real abscissa");
        return Contour::vertical_line(vertex.real(), c.orientation());
    }
    // Negation sends the upper direction e^{i a} to -e^{-i a} = e^{i(pi - a)} on the
    // upper side once the legs are relabelled.
    const double angle = reflect ? kPi - c.angle() : c.angle();
    return Contour::ray_pair(vertex, angle, c.orientation());
}

double contour_distance(const Contour& a, const Contour& b) {
    const cplx pa = a.vertex(), pb = b.vertex();
    const cplx da[2] = {a.upper_direction(), a.lower_direction()};
    const cplx db[2] = {b.upper_direction(), b.lower_direction()};
    double best = std::numeric_limits<double>::infinity();
    for (const cplx d : da)
        for (const cplx e : db) best = std::min(best, ray_ray_distance(pa, d, pb, e));
    return best;
}

void QuadSpec::validate() const {
    require(nodes_per_leg >= 4, "QuadSpec: nodes_per_leg must be at least 4");
    require(std::isfinite(truncation_radius) && truncation_radius >= 0.0,
            "QuadSpec: truncation_radius must be positive (or 0 for the automatic probe)");
    require(panel_count >= 1, "QuadSpec: panel_count must be positive");
    require(scheme == Scheme::ClenshawCurtis || nodes_per_leg >= 2 * panel_count,
            "QuadSpec: need at least 2 nodes per panel");
    require(panel_ratio >= 1.0 && std::isfinite(panel_ratio), "QuadSpec: panel_ratio must be >= 1");
    require(relative_tolerance > 0.0, "QuadSpec: relative_tolerance must be positive");
    require(probe_decay > 0.0 && probe_decay < 1.0, "QuadSpec: probe_decay must lie in (0, 1)");
}

NodeSet discretize(const Contour& c, const QuadSpec& spec, double radius, Resolution res) {
    spec.validate();
    require(radius > 0.0 && std::isfinite(radius), "discretize: radius must be positive");
    std::vector<double> r, w;
    leg_rule(spec, radius, res, r, w);
    const cplx du = c.upper_direction(), dl = c.lower_direction();
    const double sign = c.orientation() == Orientation::Upward ? 1.0 : -1.0;
    NodeSet out;
    const std::size_t n = r.size();
    out.points.reserve(2 * n);
    out.weights.reserve(2 * n);
    // lower leg, from far to near
    for (std::size_t i = n; i-- > 0;) {
        out.points.push_back(c.vertex() + r[i] * dl);
        out.weights.push_back(-sign * w[i] * dl * kInv2PiI);
    }
    std::size_t first_upper = 0;
    if (r.front() == 0.0) {
        // Clenshaw-Curtis puts a node on the vertex of both legs; merge them.
        out.weights.back() += sign * w.front() * du * kInv2PiI;
        first_upper = 1;
    }
    for (std::size_t i = first_upper; i < n; ++i) {
        out.points.push_back(c.vertex() + r[i] * du);
        out.weights.push_back(sign * w[i] * du * kInv2PiI);
    }
    return out;
}

double probe_radius(const Contour& c, const std::function<cplx(cplx)>& g, double decay) {
    constexpr double kMaxRadius = 2000.0;
    double ref = 0.0;
    double last_above = 0.0;
    std::vector<std::pair<double, double>> samples;
    double r = 0.0;
    while (true) {
        const double m = std::max(std::abs(g(c.upper_point(r))), std::abs(g(c.lower_point(r))));
        const bool finite = std::isfinite(m);
        if (finite) ref = std::max(ref, m);
        samples.emplace_back(r, finite ? m : std::numeric_limits<double>::infinity());
        if (!finite || m >= decay * ref) last_above = r;
        if (r > 2.0 * last_above + 10.0) break;
        if (r > kMaxRadius) fail(ErrorCode::Divergent, "probe_radius: integrand does not decay along the contour");
        r += 0.05 * std::max(1.0, r / 5.0);
    }
    if (ref == 0.0) return 1.0;
    // ref may have grown after early samples were classified; re-scan.
    double cut = 0.0;
    for (const auto& [rr, m] : samples)
        if (m >= decay * ref) cut = rr;
    return std::max(cut + 0.05 * std::max(1.0, cut / 5.0), 0.5);
}

ComplexResult finish_result(const TensorSum& full, const TensorSum& half, const QuadSpec& spec) {
    ComplexResult out;
    out.value = full.value;
    out.est_error = std::abs(full.value - half.value);
    out.magnitude = full.magnitude;
    const double scale = std::max(std::abs(full.value), full.magnitude);
    if (out.est_error > 1e3 * spec.relative_tolerance * scale)
        fail(ErrorCode::Divergent, "full and half resolution disagree: |difference| = " +
                                       std::to_string(out.est_error) + ", scale = " + std::to_string(scale));
    return out;
}

ComplexResult integrate(const Contour& c, const QuadSpec& spec, const std::function<cplx(cplx)>& f) {
    spec.validate();
    const double radius = spec.truncation_radius > 0.0 ? spec.truncation_radius : probe_radius(c, f, spec.probe_decay);
    auto g = [&f](std::span<const std::size_t>, std::span<const cplx> z) { return f(z[0]); };
    const TensorSum full = tensor_sum({discretize(c, spec, radius, Resolution::Full)}, g);
    const TensorSum half = tensor_sum({discretize(c, spec, radius, Resolution::Half)}, g);
    return finish_result(full, half, spec);
}

ComplexResult circle_integrate(double radius, const QuadSpec& spec, const std::function<cplx(cplx)>& f) {
    require(radius > 1.0 && std::isfinite(radius), "circle_integrate: radius must exceed 1");
    spec.validate();
    const int n = std::max(64, 2 * spec.nodes_per_leg);
    const int nn = n % 2 == 0 ? n : n + 1;
    std::vector<cplx> terms(nn);
    for (int k = 0; k < nn; ++k) {
        const cplx z = std::polar(radius, 2.0 * kPi * k / nn);
        terms[k] = f(z) * z;
        if (!std::isfinite(terms[k].real()) || !std::isfinite(terms[k].imag()))
            fail(ErrorCode::NonFinite, "circle_integrate: integrand not finite at node " + std::to_string(k));
    }
    std::vector<cplx> even;
    even.reserve(nn / 2);
    for (int k = 0; k < nn; k += 2) even.push_back(terms[k]);
    TensorSum full, half;
    full.value = detail::pairwise_sum(terms) / static_cast<double>(nn);
    half.value = detail::pairwise_sum(even) / static_cast<double>(nn / 2);
    for (const auto& t : terms) full.magnitude += (std::abs(t.real()) + std::abs(t.imag())) / nn;
    return finish_result(full, half, spec);
}

double lattice_size(std::span<const std::size_t> sizes, const std::vector<SymmetricGroup>& groups) {
    std::vector<bool> grouped(sizes.size(), false);
    double total = 1.0;
    for (const auto& g : groups) {
        const double n = static_cast<double>(sizes[g.first]);
        double choose = 1.0;
        for (std::size_t k = 0; k < g.count; ++k) choose *= (n - k) / (k + 1.0);
        total *= std::max(0.0, choose);
        for (std::size_t d = g.first; d < g.first + g.count; ++d) grouped[d] = true;
    }
    for (std::size_t d = 0; d < sizes.size(); ++d)
        if (!grouped[d]) total *= static_cast<double>(sizes[d]);
    return total;
}

namespace detail {

cplx pairwise_sum(std::span<const cplx> xs) {
    if (xs.size() <= 8) {
        cplx s = 0.0;
        for (const auto& x : xs) s += x;
        return s;
    }
    const std::size_t mid = xs.size() / 2;
    return pairwise_sum(xs.subspan(0, mid)) + pairwise_sum(xs.subspan(mid));
}

double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t mid = xs.size() / 2;
    return pairwise_sum(xs.subspan(0, mid)) + pairwise_sum(xs.subspan(mid));
}

void check_groups(std::size_t dim, const std::vector<NodeSet>& sets, const std::vector<SymmetricGroup>& groups) {
    std::vector<bool> used(dim, false);
    for (const auto& g : groups) {
        require(g.count >= 1 && g.first + g.count <= dim, "symmetric group out of range");
        for (std::size_t d = g.first; d < g.first + g.count; ++d) {
            require(!used[d], "symmetric groups overlap");
            used[d] = true;
            require(sets[d].points == sets[g.first].points && sets[d].weights == sets[g.first].weights,
                    "dimensions in a symmetric group must share one node set");
        }
    }
}

}  // namespace detail

ComplexResult integrate_tensor(std::span<const Contour> contours, const QuadSpec& spec, const TensorIntegrand& f,
                               const TensorOptions& opts) {
    const std::size_t dim = contours.size();
    if (dim == 0 || dim > kMaxTensorDimension)
        fail(ErrorCode::DimensionTooLarge, "integrate_tensor: dimension must be in [1, 8], got " + std::to_string(dim));
    spec.validate();
    std::vector<double> radii(dim, spec.truncation_radius);
    if (spec.truncation_radius <= 0.0) {
        std::vector<cplx> base(dim);
        for (std::size_t d = 0; d < dim; ++d) base[d] = contours[d].vertex();
        for (std::size_t d = 0; d < dim; ++d) {
            auto slice = [&](cplx z) {
                std::vector<cplx> p = base;
                p[d] = z;
                return f(p);
            };
            radii[d] = probe_radius(contours[d], slice, spec.probe_decay);
        }
        // dimensions sharing a node set must share the radius too
        for (const auto& g : opts.symmetric_groups) {
            double r = 0.0;
            for (std::size_t d = g.first; d < g.first + g.count && d < dim; ++d) r = std::max(r, radii[d]);
            for (std::size_t d = g.first; d < g.first + g.count && d < dim; ++d) radii[d] = r;
        }
    }
    auto g = [&f](std::span<const std::size_t>, std::span<const cplx> z) { return f(z); };
    std::vector<NodeSet> full_sets, half_sets;
    for (std::size_t d = 0; d < dim; ++d) {
        full_sets.push_back(discretize(contours[d], spec, radii[d], Resolution::Full));
        half_sets.push_back(discretize(contours[d], spec, radii[d], Resolution::Half));
    }
    const TensorSum full = tensor_sum(full_sets, g, opts);
    const TensorSum half = tensor_sum(half_sets, g, opts);
    return finish_result(full, half, spec);
}

}  // namespace kpzcond::quad
