#pragma once

// Contours in the complex plane and deterministic quadrature over them.
//
// A contour is a pair of straight rays leaving a common vertex, symmetric
// about the horizontal line through that vertex. The upper leg points along
// e^{i*angle}, the lower leg along e^{-i*angle}. angle > pi/2 gives a
// "left" contour (legs run to Re -> -inf), angle < pi/2 a "right" one, and
// angle == pi/2 is a vertical line. All integrals carry the 1/(2*pi*i)
// normalisation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "kpzcond/errors.hpp"

namespace kpzcond::quad {

using cplx = std::complex<double>;

enum class ContourKind { RayPair, VerticalLine };
enum class Orientation { Upward, Downward };

class Contour {
public:
    static Contour ray_pair(cplx vertex, double angle, Orientation orientation = Orientation::Upward);
    static Contour vertical_line(double abscissa, Orientation orientation = Orientation::Upward);

    /// {j + r e^{+-i angle}: r > 0}, traversed upward.
    static Contour sigma_left(double j, double angle = 2.0 * std::numbers::pi / 3.0);
    /// The set -sigma_left(j, angle), traversed upward.
    static Contour sigma_right(double j, double angle = 2.0 * std::numbers::pi / 3.0);

    ContourKind kind() const noexcept { return kind_; }
    cplx vertex() const noexcept { return vertex_; }
    double angle() const noexcept { return angle_; }
    Orientation orientation() const noexcept { return orientation_; }

    cplx upper_direction() const noexcept { return std::polar(1.0, angle_); }
    cplx lower_direction() const noexcept { return std::polar(1.0, -angle_); }

    bool opens_left() const noexcept { return angle_ > std::numbers::pi / 2.0; }
    bool opens_right() const noexcept { return angle_ < std::numbers::pi / 2.0; }

    cplx upper_point(double r) const noexcept { return vertex_ + r * upper_direction(); }
    cplx lower_point(double r) const noexcept { return vertex_ + r * lower_direction(); }

private:
    Contour(ContourKind kind, cplx vertex, double angle, Orientation orientation);

    ContourKind kind_;
    cplx vertex_;
    double angle_;
    Orientation orientation_;
};

/// Affine image center + factor * c (or center - factor * c when reflect is
/// set). The orientation label is kept, so reflecting an upward left contour
/// gives an upward right contour.
Contour scale_contour(const Contour& c, cplx center, double factor, bool reflect = false);

/// Minimal Euclidean distance between two contours (0 if they intersect).
double contour_distance(const Contour& a, const Contour& b);

/// Trapezoid uses midpoint nodes on each leg. On a vertical line this is the
/// uniform trapezoidal rule, which converges geometrically for integrands
/// analytic in a strip around the line.
enum class Scheme { GaussLegendrePanels, ClenshawCurtis, Trapezoid };

struct QuadSpec {
    /// Maximal r along each leg. A value <= 0 requests the automatic probe.
    double truncation_radius = 0.0;
    /// Total number of nodes per leg at full resolution.
    int nodes_per_leg = 64;
    Scheme scheme = Scheme::GaussLegendrePanels;
    int panel_count = 4;
    /// Width ratio between consecutive panels, >= 1. Values above 1 refine
    /// toward the vertex.
    double panel_ratio = 1.0;
    double relative_tolerance = 1e-6;
    /// Probe threshold relative to the integrand's vertex-region magnitude.
    double probe_decay = 1e-16;

    void validate() const;
};

struct ComplexResult {
    cplx value{};
    double est_error = 0.0;
    /// sum of |weight * integrand| over the full-resolution nodes
    double magnitude = 0.0;
};

enum class Resolution { Full, Half };

/// Quadrature nodes on one contour; weights include the direction factor,
/// the orientation sign and 1/(2*pi*i).
struct NodeSet {
    std::vector<cplx> points;
    std::vector<cplx> weights;
    std::size_t size() const noexcept { return points.size(); }
};

NodeSet discretize(const Contour& c, const QuadSpec& spec, double radius, Resolution res);

/// Smallest leg radius beyond which |g| stays below decay * (vertex-region
/// magnitude of g) on both legs. Throws Divergent if no such radius <= 2000.
double probe_radius(const Contour& c, const std::function<cplx(cplx)>& g, double decay);

ComplexResult integrate(const Contour& c, const QuadSpec& spec, const std::function<cplx(cplx)>& f);

/// Counter-clockwise trapezoidal rule for the integral of f(z) dz/(2*pi*i)
/// over |z| = radius. Uses 2*nodes_per_leg points (at least 64).
ComplexResult circle_integrate(double radius, const QuadSpec& spec, const std::function<cplx(cplx)>& f);

inline constexpr std::size_t kMaxTensorDimension = 8;

/// Dimensions [first, first + count) share one node set, and the integrand
/// is symmetric under permuting them and vanishes when two of them sit on
/// the same node. The lattice walk then visits strictly increasing index
/// tuples only and multiplies by count!.
struct SymmetricGroup {
    std::size_t first = 0;
    std::size_t count = 1;
};

struct TensorOptions {
    int threads = 1;
    std::vector<SymmetricGroup> symmetric_groups;
};

struct TensorSum {
    cplx value{};
    double magnitude = 0.0;
    std::size_t evaluations = 0;
};

/// Number of lattice points visited by tensor_sum for the given sizes.
double lattice_size(std::span<const std::size_t> sizes, const std::vector<SymmetricGroup>& groups);

namespace detail {

cplx pairwise_sum(std::span<const cplx> xs);
double pairwise_sum(std::span<const double> xs);
void check_groups(std::size_t dim, const std::vector<NodeSet>& sets, const std::vector<SymmetricGroup>& groups);

template <class F>
class LatticeWalker {
public:
    LatticeWalker(const std::vector<NodeSet>& sets, const std::vector<SymmetricGroup>& groups, F& f)
        : sets_(sets), f_(f), idx_(sets.size()), z_(sets.size()), chained_(sets.size(), false) {
        for (const auto& g : groups)
            for (std::size_t d = g.first + 1; d < g.first + g.count; ++d) chained_[d] = true;
    }

    void run_outer(std::size_t i0, cplx& sum, double& mag, std::size_t& evals) {
        sum = 0.0;
        mag = 0.0;
        evals = 0;
        idx_[0] = i0;
        z_[0] = sets_[0].points[i0];
        const cplx w0 = sets_[0].weights[i0];
        if (sets_.size() == 1) {
            const cplx v = w0 * f_(std::span<const std::size_t>(idx_), std::span<const cplx>(z_));
            sum += v;
            mag += std::abs(v.real()) + std::abs(v.imag());
            ++evals;
            return;
        }
        recurse(1, w0, sum, mag, evals);
    }

private:
    void recurse(std::size_t d, cplx wp, cplx& sum, double& mag, std::size_t& evals) {
        const NodeSet& s = sets_[d];
        const std::size_t start = chained_[d] ? idx_[d - 1] + 1 : 0;
        const std::size_t n = s.size();
        if (d + 1 == sets_.size()) {
            cplx local = 0.0;
            double lmag = 0.0;
            for (std::size_t i = start; i < n; ++i) {
                idx_[d] = i;
                z_[d] = s.points[i];
                const cplx v = (wp * s.weights[i]) *
                               f_(std::span<const std::size_t>(idx_), std::span<const cplx>(z_));
                local += v;
                lmag += std::abs(v.real()) + std::abs(v.imag());
            }
            sum += local;
            mag += lmag;
            evals += n > start ? n - start : 0;
            return;
        }
        for (std::size_t i = start; i < n; ++i) {
            idx_[d] = i;
            z_[d] = s.points[i];
            recurse(d + 1, wp * s.weights[i], sum, mag, evals);
        }
    }

    const std::vector<NodeSet>& sets_;
    F& f_;
    std::vector<std::size_t> idx_;
    std::vector<cplx> z_;
    std::vector<bool> chained_;
};

}  // namespace detail

/// Weighted sum of f over the tensor lattice of the node sets.
///
/// f is called as f(indices, points) with one entry per dimension. The sum
/// is split by the index of dimension 0; each slice is accumulated in a
/// fixed order and the slices are combined by pairwise summation in index
/// order, so the result does not depend on the thread count. Each thread
/// gets its own copy of f.
template <class F>
TensorSum tensor_sum(const std::vector<NodeSet>& sets, const F& f, const TensorOptions& opts = {}) {
    const std::size_t dim = sets.size();
    if (dim == 0 || dim > kMaxTensorDimension)
        fail(ErrorCode::DimensionTooLarge, "tensor dimension must be in [1, 8], got " + std::to_string(dim));
    detail::check_groups(dim, sets, opts.symmetric_groups);

    const std::size_t n0 = sets[0].size();
    std::vector<cplx> partial(n0);
    std::vector<double> partial_mag(n0);
    std::vector<std::size_t> partial_evals(n0);

    auto work = [&](std::size_t begin, std::size_t stride) {
        F local = f;
        detail::LatticeWalker<F> walker(sets, opts.symmetric_groups, local);
        for (std::size_t i = begin; i < n0; i += stride)
            walker.run_outer(i, partial[i], partial_mag[i], partial_evals[i]);
    };

    const int threads = std::max(1, std::min<int>(opts.threads, static_cast<int>(n0)));
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work, static_cast<std::size_t>(t), threads);
    }

    TensorSum out;
    out.value = detail::pairwise_sum(partial);
    out.magnitude = detail::pairwise_sum(partial_mag);
    for (auto e : partial_evals) out.evaluations += e;
    double perm = 1.0;
    for (const auto& g : opts.symmetric_groups)
        for (std::size_t k = 2; k <= g.count; ++k) perm *= static_cast<double>(k);
    out.value *= perm;
    out.magnitude *= perm;
    if (!std::isfinite(out.value.real()) || !std::isfinite(out.value.imag()))
        fail(ErrorCode::NonFinite, "integrand produced a non-finite value on the node lattice");
    return out;
}

using TensorIntegrand = std::function<cplx(std::span<const cplx>)>;

/// Tensor-product quadrature over the product of the given contours, one
/// 1/(2*pi*i) per dimension. Automatic radii probe each dimension with the
/// other coordinates held at their contour vertices.
ComplexResult integrate_tensor(std::span<const Contour> contours, const QuadSpec& spec, const TensorIntegrand& f,
                               const TensorOptions& opts = {});

/// Shared full/half-resolution bookkeeping: est_error and the Divergent check.
ComplexResult finish_result(const TensorSum& full, const TensorSum& half, const QuadSpec& spec);

}  // namespace kpzcond::quad
