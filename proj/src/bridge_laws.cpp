#include "kpzcond/bridge_laws.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "kpzcond/errors.hpp"
#include "kpzcond/gauss_rules.hpp"

namespace kpzcond::bridge {
namespace {

using quad::cplx;

constexpr double kSqrt2Pi = 2.5066282746310002;  // sqrt(2 pi)
constexpr std::uint64_t kShardSize = 65536;

double normal_density(double variance, double x) {
    return std::exp(-0.5 * x * x / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

cplx kernel(cplx u, double a, double b) { return std::exp(0.5 * a * u * u + b * u); }

std::mt19937_64 shard_engine(std::uint64_t seed, std::uint64_t shard) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(shard), static_cast<std::uint32_t>(shard >> 32)};
    return std::mt19937_64(seq);
}

// Draws a bridge at the increasing interior times `times` into `out`.
template <class Engine>
void draw_bridge(Engine& eng, std::normal_distribution<double>& nd, std::span<const double> times,
                 std::vector<double>& out) {
    out.resize(times.size());
    double prev_t = 0.0, prev_x = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
        const double t = times[j];
        const double mean = prev_x * (1.0 - t) / (1.0 - prev_t);
        const double var = (t - prev_t) * (1.0 - t) / (1.0 - prev_t);
        prev_x = mean + std::sqrt(var) * nd(eng);
        prev_t = t;
        out[j] = prev_x;
    }
}

// Counts hits over fixed shards; the per-shard counts are added in order.
template <class Trial>
McEstimate run_shards(std::uint64_t samples, std::uint64_t seed, int threads, const Trial& trial) {
    require(samples >= 1, "Monte Carlo sample count must be positive");
    const std::uint64_t shards = (samples + kShardSize - 1) / kShardSize;
    std::vector<std::uint64_t> hits(shards, 0);
    auto work = [&](std::uint64_t begin, std::uint64_t stride) {
        for (std::uint64_t s = begin; s < shards; s += stride) {
            auto eng = shard_engine(seed, s);
            const std::uint64_t n = std::min(kShardSize, samples - s * kShardSize);
            std::uint64_t h = 0;
            for (std::uint64_t i = 0; i < n; ++i) h += trial(eng) ? 1 : 0;
            hits[s] = h;
        }
    };
    const int t = std::max(1, std::min<int>(threads, static_cast<int>(shards)));
    if (t == 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < t; ++i) pool.emplace_back(work, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t));
    }
    McEstimate est;
    est.samples = samples;
    est.hits = std::accumulate(hits.begin(), hits.end(), std::uint64_t{0});
    est.probability = static_cast<double>(est.hits) / static_cast<double>(samples);
    est.std_error = std::sqrt(est.probability * (1.0 - est.probability) / static_cast<double>(samples));
    return est;
}

quad::TensorSum contract_chain(const std::vector<quad::NodeSet>& sets) {
    std::vector<cplx> v(sets[0].weights.begin(), sets[0].weights.end());
    std::vector<double> mag(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) mag[i] = std::abs(v[i].real()) + std::abs(v[i].imag());
    for (std::size_t j = 1; j < sets.size(); ++j) {
        const auto& prev = sets[j - 1];
        const auto& cur = sets[j];
        std::vector<cplx> nv(cur.size());
        std::vector<double> nm(cur.size());
        for (std::size_t k = 0; k < cur.size(); ++k) {
            cplx acc = 0.0;
            double macc = 0.0;
            for (std::size_t i = 0; i < prev.size(); ++i) {
                const cplx inv = 1.0 / (cur.points[k] - prev.points[i]);
                acc += v[i] * inv;
                macc += mag[i] * std::abs(inv);
            }
            nv[k] = cur.weights[k] * acc;
            nm[k] = std::abs(cur.weights[k]) * macc;
        }
        v = std::move(nv);
        mag = std::move(nm);
    }
    quad::TensorSum out;
    out.value = quad::detail::pairwise_sum(v);
    out.magnitude = quad::detail::pairwise_sum(mag);
    out.evaluations = 1;
    for (const auto& s : sets) out.evaluations *= s.size();
    if (!std::isfinite(out.value.real()) || !std::isfinite(out.value.imag()))
        fail(ErrorCode::NonFinite, "bridge contour integrand produced a non-finite value");
    return out;
}

// Weighted least-squares nondecreasing fit (pool adjacent violators).
std::vector<double> isotonic_fit(const std::vector<double>& y, const std::vector<double>& w) {
    struct Pool {
        double mean, weight;
        std::size_t count;
    };
    std::vector<Pool> pools;
    for (std::size_t i = 0; i < y.size(); ++i) {
        pools.push_back({y[i], w[i], 1});
        while (pools.size() > 1 && pools[pools.size() - 2].mean > pools.back().mean) {
            const Pool b = pools.back();
            pools.pop_back();
            Pool& a = pools.back();
            a.mean = (a.mean * a.weight + b.mean * b.weight) / (a.weight + b.weight);
            a.weight += b.weight;
            a.count += b.count;
        }
    }
    std::vector<double> out;
    for (const auto& p : pools) out.insert(out.end(), p.count, p.mean);
    return out;
}

void check_levels(std::span<const double> b, std::size_t expected) {
    require(b.size() == expected, "expected " + std::to_string(expected) + " interior levels, got " +
                                      std::to_string(b.size()));
    for (double x : b) require(std::isfinite(x), "levels must be finite");
}

LawResult side_tail(std::span<const double> times, std::span<const double> levels, const BridgeContourOptions& opts) {
    if (times.empty()) {
        LawResult r;
        r.value = 1.0;
        r.method = "contour";
        return r;
    }
    return bridge_tail_contour(TimePartition::from_interior(times), levels, opts);
}

}  // namespace

TimePartition::TimePartition(std::vector<double> a) : a_(std::move(a)) {
    require(a_.size() >= 2, "TimePartition needs at least the endpoints 0 and 1");
    require(a_.front() == 0.0 && a_.back() == 1.0, "TimePartition must start at 0 and end at 1");
    for (std::size_t j = 1; j < a_.size(); ++j)
        require(a_[j] > a_[j - 1], "TimePartition must be strictly increasing");
}

TimePartition TimePartition::from_interior(std::span<const double> interior) {
    std::vector<double> a{0.0};
    a.insert(a.end(), interior.begin(), interior.end());
    a.push_back(1.0);
    return TimePartition(std::move(a));
}

double bridge_joint_density(const TimePartition& p, std::span<const double> b) {
    const std::size_t m = p.increments();
    check_levels(b, m - 1);
    const auto& a = p.times();
    double prod = kSqrt2Pi;
    double prev = 0.0;
    for (std::size_t j = 1; j <= m; ++j) {
        const double cur = j < m ? b[j - 1] : 0.0;
        prod *= normal_density(a[j] - a[j - 1], cur - prev);
        prev = cur;
    }
    return prod;
}

double bridge_tail_closed(double tau, double b) {
    require(tau > 0.0 && tau < 1.0, "bridge_tail_closed: tau must lie in (0, 1)");
    return 0.5 * std::erfc(b / std::sqrt(2.0 * tau * (1.0 - tau)));
}

LawResult bridge_tail_contour(const TimePartition& p, std::span<const double> b, const BridgeContourOptions& opts) {
    const std::size_t m = p.increments();
    if (m > kMaxBridgeIncrements)
        fail(ErrorCode::DimensionTooLarge, "bridge_tail_contour supports at most 5 increments, got " + std::to_string(m));
    check_levels(b, m - 1);
    require(opts.spacing > 0.0, "bridge_tail_contour: line spacing must be positive");
    opts.quad.validate();
    const auto& a = p.times();

    std::vector<quad::Contour> lines;
    std::vector<double> da(m), db(m), radii(m), shifted(m);
    double prev = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double cur = j + 1 < m ? b[j] : 0.0;
        da[j] = a[j + 1] - a[j];
        db[j] = cur - prev;
        prev = cur;
        shifted[j] = -db[j] / da[j] - j * opts.spacing;
    }
    std::vector<double> xs(m);
    if (opts.saddle_placement) {
        xs = isotonic_fit(shifted, da);
        for (std::size_t j = 0; j < m; ++j) xs[j] += j * opts.spacing;
    } else {
        for (std::size_t j = 0; j < m; ++j) xs[j] = opts.abscissa + j * opts.spacing;
    }
    for (std::size_t j = 0; j < m; ++j) {
        lines.push_back(quad::Contour::vertical_line(xs[j]));
        radii[j] = opts.quad.truncation_radius > 0.0
                       ? opts.quad.truncation_radius
                       : quad::probe_radius(lines[j], [&, j](cplx u) { return kernel(u, da[j], db[j]); },
                                            opts.quad.probe_decay);
    }
    auto build = [&](quad::Resolution res) {
        std::vector<quad::NodeSet> sets;
        for (std::size_t j = 0; j < m; ++j) {
            quad::NodeSet s = quad::discretize(lines[j], opts.quad, radii[j], res);
            for (std::size_t i = 0; i < s.size(); ++i) s.weights[i] *= kernel(s.points[i], da[j], db[j]);
            sets.push_back(std::move(s));
        }
        return contract_chain(sets);
    };
    const quad::ComplexResult cr = quad::finish_result(build(quad::Resolution::Full), build(quad::Resolution::Half), opts.quad);

    LawResult r;
    r.value = kSqrt2Pi * cr.value.real();
    r.imag_residual = kSqrt2Pi * std::abs(cr.value.imag());
    r.est_error = kSqrt2Pi * cr.est_error;
    r.method = "contour";
    r.diagnostics = {{"dimension", static_cast<double>(m)},
                     {"nodes_per_line", static_cast<double>(2 * opts.quad.nodes_per_leg)},
                     {"max_radius", *std::max_element(radii.begin(), radii.end())},
                     {"leftmost_abscissa", xs.front()}};
    if (r.imag_residual > opts.residual_threshold)
        fail(ErrorCode::ResidualTooLarge, "bridge_tail_contour: imaginary residual " + std::to_string(r.imag_residual));
    return r;
}

McEstimate bridge_tail_mc(const TimePartition& p, std::span<const double> b, std::uint64_t samples,
                          std::uint64_t seed, int threads) {
    const std::size_t m = p.increments();
    check_levels(b, m - 1);
    const std::vector<double> interior(p.times().begin() + 1, p.times().end() - 1);
    const std::vector<double> levels(b.begin(), b.end());
    return run_shards(samples, seed, threads, [&](std::mt19937_64& eng) {
        std::normal_distribution<double> nd;
        thread_local std::vector<double> path;
        draw_bridge(eng, nd, interior, path);
        for (std::size_t j = 0; j < path.size(); ++j)
            if (!(path[j] > levels[j])) return false;
        return true;
    });
}

void LimitQuery::validate() const {
    require(!taus.empty(), "LimitQuery: at least one time point is required");
    require(xs.size() == taus.size() && hs.size() == taus.size(), "LimitQuery: taus, xs and hs must have equal length");
    for (double t : taus) require(t > 0.0 && t < 1.0, "LimitQuery: every tau must lie strictly inside (0, 1)");
    for (double x : xs) require(std::isfinite(x), "LimitQuery: xs must be finite");
    for (double h : hs) require(std::isfinite(h), "LimitQuery: hs must be finite");
}

MergedSide merge_ties(std::span<const double> taus, std::span<const double> levels) {
    std::vector<std::size_t> idx(taus.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t k) { return taus[i] < taus[k]; });
    MergedSide out;
    for (std::size_t i : idx) {
        if (!out.times.empty() && out.times.back() == taus[i]) {
            out.levels.back() = std::max(out.levels.back(), levels[i]);
        } else {
            out.times.push_back(taus[i]);
            out.levels.push_back(levels[i]);
        }
    }
    return out;
}

LawResult limit_tail_step(const LimitQuery& q, const BridgeContourOptions& opts) {
    q.validate();
    require(q.condition == Condition::Step, "limit_tail_step: query condition must be step");
    const std::size_t n = q.taus.size();
    std::vector<double> l1(n), l2(n);
    for (std::size_t j = 0; j < n; ++j) {
        l1[j] = q.hs[j] - q.xs[j];
        l2[j] = q.hs[j] + q.xs[j];
    }
    const MergedSide s1 = merge_ties(q.taus, l1), s2 = merge_ties(q.taus, l2);
    const LawResult p1 = side_tail(s1.times, s1.levels, opts);
    const LawResult p2 = side_tail(s2.times, s2.levels, opts);
    LawResult r;
    r.value = p1.value * p2.value;
    r.est_error = std::abs(p1.value) * p2.est_error + std::abs(p2.value) * p1.est_error;
    r.imag_residual = std::max(p1.imag_residual, p2.imag_residual);
    r.method = "contour";
    r.diagnostics = {{"side1", p1.value}, {"side2", p2.value}, {"distinct_times", static_cast<double>(s1.times.size())}};
    return r;
}

constexpr double kNegligibleMixtureWeight = 1e-18;

LawResult limit_tail_flat(const LimitQuery& q, const MixtureRule& mix, const BridgeContourOptions& opts) {
    q.validate();
    require(q.condition == Condition::Flat, "limit_tail_flat: query condition must be flat");
    require(mix.order >= 1 && mix.order <= 200, "limit_tail_flat: mixture order must lie in [1, 200]");
    const std::size_t n = q.taus.size();
    auto mixture = [&](int order, double& err, double& imag) {
        const quad::Rule rule = quad::gauss_hermite_normal(order);
        double total = 0.0;
        err = 0.0;
        imag = 0.0;
        std::vector<double> l1(n), l2(n);
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
            // the inner product is a probability, so a node this light cannot matter
            if (rule.weights[k] < kNegligibleMixtureWeight) {
                err += rule.weights[k];
                continue;
            }
            const double z = rule.nodes[k];
            for (std::size_t j = 0; j < n; ++j) {
                const double shift = (1.0 - q.taus[j]) * z / std::numbers::sqrt2;
                l1[j] = q.hs[j] - q.xs[j] - shift;
                l2[j] = q.hs[j] + q.xs[j] + shift;
            }
            const MergedSide s1 = merge_ties(q.taus, l1), s2 = merge_ties(q.taus, l2);
            const LawResult p1 = side_tail(s1.times, s1.levels, opts);
            const LawResult p2 = side_tail(s2.times, s2.levels, opts);
            total += rule.weights[k] * p1.value * p2.value;
            err += rule.weights[k] * (std::abs(p1.value) * p2.est_error + std::abs(p2.value) * p1.est_error);
            imag = std::max({imag, p1.imag_residual, p2.imag_residual});
        }
        return total;
    };
    double err = 0.0, imag = 0.0;
    const double value = mixture(mix.order, err, imag);
    double err_half = 0.0, imag_half = 0.0;
    const int coarse = std::max(1, mix.order / 2);
    const double value_half = mix.order > 1 ? mixture(coarse, err_half, imag_half) : value;
    LawResult r;
    r.value = value;
    r.est_error = err + std::abs(value - value_half);
    r.imag_residual = imag;
    r.method = "contour_gauss_hermite";
    r.diagnostics = {{"mixture_order", static_cast<double>(mix.order)}, {"mixture_half_order_value", value_half}};
    return r;
}

LawResult limit_tail(const LimitQuery& q, const BridgeContourOptions& opts) {
    return q.condition == Condition::Step ? limit_tail_step(q, opts) : limit_tail_flat(q, MixtureRule{}, opts);
}

McEstimate limit_tail_mc(const LimitQuery& q, std::uint64_t samples, std::uint64_t seed, int threads) {
    q.validate();
    std::vector<double> grid(q.taus);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    std::vector<std::size_t> slot(q.taus.size());
    for (std::size_t j = 0; j < q.taus.size(); ++j)
        slot[j] = static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), q.taus[j]) - grid.begin());
    const bool flat = q.condition == Condition::Flat;
    return run_shards(samples, seed, threads, [&](std::mt19937_64& eng) {
        std::normal_distribution<double> nd;
        thread_local std::vector<double> b1, b2;
        const double z = flat ? nd(eng) : 0.0;
        draw_bridge(eng, nd, grid, b1);
        draw_bridge(eng, nd, grid, b2);
        for (std::size_t j = 0; j < q.taus.size(); ++j) {
            const double s = (1.0 - q.taus[j]) * z / std::numbers::sqrt2;
            const double field = std::min(b1[slot[j]] + q.xs[j] + s, b2[slot[j]] - q.xs[j] - s);
            if (!(field > q.hs[j])) return false;
        }
        return true;
    });
}

double FieldSample::shift(std::size_t j) const { return (1.0 - taus.at(j)) * z / std::numbers::sqrt2; }

double FieldSample::value(std::size_t j, double x) const {
    const double s = shift(j);
    return std::min(bridge1.at(j) + x + s, bridge2.at(j) - x - s);
}

double FieldSample::vertex1(std::size_t j) const { return 0.5 * (bridge2.at(j) - bridge1.at(j)) - shift(j); }

double FieldSample::vertex2(std::size_t j) const { return 0.5 * (bridge1.at(j) + bridge2.at(j)); }

FieldSample sample_limit_field(std::span<const double> taus, Condition condition, std::uint64_t seed) {
    require(!taus.empty(), "sample_limit_field: the tau grid is empty");
    for (std::size_t j = 0; j < taus.size(); ++j) {
        require(taus[j] > 0.0 && taus[j] < 1.0, "sample_limit_field: taus must lie in (0, 1)");
        require(j == 0 || taus[j] > taus[j - 1], "sample_limit_field: taus must be strictly increasing");
    }
    FieldSample fs;
    fs.seed = seed;
    fs.condition = condition;
    fs.taus.assign(taus.begin(), taus.end());
    auto eng = shard_engine(seed, 0);
    std::normal_distribution<double> nd;
    fs.z = condition == Condition::Flat ? nd(eng) : 0.0;
    draw_bridge(eng, nd, taus, fs.bridge1);
    draw_bridge(eng, nd, taus, fs.bridge2);
    return fs;
}

}  // namespace kpzcond::bridge
