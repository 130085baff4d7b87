#include "lab/commands.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "kpzcond/bridge_laws.hpp"
#include "kpzcond/errors.hpp"
#include "kpzcond/tracy_widom.hpp"

namespace kpzlab {

namespace kb = kpzcond::bridge;
namespace kk = kpzcond::kpz;
namespace tw = kpzcond::tw;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kVanishTolerance = 1e-6;

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

const char* condition_name(kb::Condition c) { return c == kb::Condition::Step ? "step" : "flat"; }

std::int64_t as_int(std::size_t v) { return static_cast<std::int64_t>(v); }

/// |a| / |b| with first-order error propagation.
std::pair<double, double> abs_ratio(double a, double ea, double b, double eb) {
    const double r = std::abs(a) / std::abs(b);
    const double rel = (a != 0.0 ? ea / std::abs(a) : 0.0) + eb / std::abs(b);
    return {r, a != 0.0 ? r * rel : ea / std::abs(b)};
}

kb::LimitQuery to_query(const GridSpec& g, kb::Condition c) {
    kb::LimitQuery q;
    q.taus = g.taus;
    q.xs = g.xs;
    q.hs = g.hs;
    q.condition = c;
    return q;
}

kk::KpzOptions sweep_options(const ExperimentConfig& cfg) {
    kk::KpzOptions o;
    if (cfg.nodes) o.quad.nodes_per_leg = *cfg.nodes;
    if (cfg.radius) o.quad.truncation_radius = *cfg.radius;
    return o;
}

// Painleve solution at half the mesh; differences against the default
// solution serve as error estimates of the tw table.
const tw::PainleveSolution& coarse_solution() {
    static const tw::PainleveSolution sol = tw::hastings_mcleod(-10.0, 12.0, 2200);
    return sol;
}

}  // namespace

kk::Grid to_grid(const GridSpec& g) { return kk::Grid::from_interior(g.taus, g.xs, g.hs); }

std::vector<SweepRecord> run_sweep(const kk::Grid& g, kb::Condition condition, const std::vector<double>& Ls,
                                   const kk::KpzOptions& opts) {
    const kpzcond::LawResult limit = kb::limit_tail(g.limit_query(condition));
    std::vector<SweepRecord> out;
    for (double L : Ls) {
        const auto t0 = Clock::now();
        const kpzcond::LawResult r =
            condition == kb::Condition::Step ? kk::qhat1_ratio_step(g, L, opts) : kk::qhat1_ratio_flat(g, L, opts);
        SweepRecord rec;
        rec.wall_time_ms = ms_since(t0);
        rec.L = L;
        rec.finite_L_value = r.value;
        rec.est_error = r.est_error;
        rec.limit_value = limit.value;
        rec.limit_est_error = limit.est_error;
        rec.abs_gap = std::abs(r.value - limit.value);
        rec.imag_residual = r.imag_residual;
        rec.magnitude = r.diagnostic("magnitude");
        rec.max_radius = r.diagnostic("max_radius");
        rec.nodes_per_leg = static_cast<int>(r.diagnostic("nodes_per_leg"));
        out.push_back(rec);
    }
    return out;
}

int first_gap_increase(const std::vector<SweepRecord>& records) {
    for (std::size_t i = 1; i < records.size(); ++i) {
        const double slack = records[i].est_error + records[i - 1].est_error;
        if (records[i].abs_gap > records[i - 1].abs_gap + slack) return static_cast<int>(i);
    }
    return -1;
}

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

CommandOutput cmd_tw(const ExperimentConfig& cfg) {
    const std::vector<double> Ls = cfg.Ls.value_or(std::vector<double>{-2.0, 0.0, 2.0});
    const tw::PainleveSolution& fine = tw::default_solution();
    const tw::PainleveSolution& coarse = coarse_solution();

    Table t;
    t.name = "tw";
    const std::vector<std::string> values = {"F_GUE", "p_GUE", "log_p_GUE", "F_GOE", "p_flat", "log_p_flat"};
    t.columns.push_back("L");
    for (const auto& v : values) {
        t.columns.push_back(v);
        t.columns.push_back(v + "_est_error");
    }
    for (const char* v : {"tail_GUE", "log_tail_GUE", "tail_ratio_GUE", "tail_flat", "log_tail_flat",
                          "tail_ratio_flat"}) {
        t.columns.push_back(v);
        t.columns.push_back(std::string(v) + "_est_error");
    }

    for (double L : Ls) {
        auto both = [&](double (*f)(double, const tw::PainleveSolution&)) {
            const double a = f(L, fine);
            return std::pair<double, double>{a, std::abs(a - f(L, coarse))};
        };
        const auto F = both(tw::f_gue);
        const auto p = both(tw::p_gue);
        const auto lp = both(tw::log_p_gue);
        const auto G = both(tw::f_goe);
        const auto pf = both(tw::p_flat);
        const auto lpf = both(tw::log_p_flat);
        std::vector<Cell> row{L, F.first, F.second, p.first, p.second, lp.first, lp.second,
                              G.first, G.second, pf.first, pf.second, lpf.first, lpf.second};
        if (L > 0.0) {
            const auto tg = tw::tail_asymptote(tw::TailFamily::GUE_density, L);
            const auto tf = tw::tail_asymptote(tw::TailFamily::flat_density, L);
            // ratios in log space so that they survive underflow of the density
            const double rg = std::exp(lp.first - tg.log_value);
            const double rf = std::exp(lpf.first - tf.log_value);
            row.insert(row.end(), {tg.value, 0.0, tg.log_value, 0.0, rg, rg * lp.second, tf.value, 0.0,
                                   tf.log_value, 0.0, rf, rf * lpf.second});
        } else {
            for (int k = 0; k < 12; ++k) row.emplace_back(kNaN);
        }
        t.add_row(std::move(row));
    }
    return {{t}, kExitOk};
}

CommandOutput cmd_limit(const ExperimentConfig& cfg) {
    const std::uint64_t samples = cfg.mc_samples.value_or(1000000);
    const kb::Condition other = cfg.condition == kb::Condition::Step ? kb::Condition::Flat : kb::Condition::Step;
    const kb::LimitQuery q = to_query(cfg.grid, cfg.condition);
    q.validate();

    const kpzcond::LawResult contour = kb::limit_tail(q);
    const kb::McEstimate mc = kb::limit_tail_mc(q, samples, cfg.seed);
    const kpzcond::LawResult contour_other = kb::limit_tail(to_query(cfg.grid, other));

    Table t;
    t.name = "limit";
    t.columns = {"condition", "method", "value", "est_error", "std_error", "samples"};
    t.add_row({condition_name(cfg.condition), "contour", contour.value, contour.est_error, kNaN, std::int64_t{0}});
    t.add_row({condition_name(cfg.condition), "monte_carlo", mc.probability, kNaN, mc.std_error,
               static_cast<std::int64_t>(mc.samples)});
    t.add_row({condition_name(other), "contour", contour_other.value, contour_other.est_error, kNaN,
               std::int64_t{0}});

    Table c;
    c.name = "checks";
    c.columns = {"quantity", "value", "est_error"};
    const double diff = mc.probability - contour.value;
    const double sigma = std::hypot(mc.std_error, contour.est_error);
    c.add_row({"mc_minus_contour", diff, sigma});
    c.add_row({"mc_z_score", sigma > 0.0 ? diff / sigma : 0.0, sigma > 0.0 ? 1.0 : 0.0});
    const double fs = cfg.condition == kb::Condition::Flat ? contour.value - contour_other.value
                                                            : contour_other.value - contour.value;
    c.add_row({"flat_minus_step", fs, contour.est_error + contour_other.est_error});
    return {{t, c}, kExitOk};
}

CommandOutput cmd_converge(const ExperimentConfig& cfg) {
    const std::vector<double> Ls = cfg.Ls.value_or(std::vector<double>{10.0, 100.0, 1000.0, 10000.0});
    const kk::Grid g = to_grid(cfg.grid);
    const auto records = run_sweep(g, cfg.condition, Ls, sweep_options(cfg));
    const int bad = first_gap_increase(records);

    Table t;
    t.name = "sweep";
    t.columns = {"L",           "condition",      "finite_L_value",    "finite_L_est_error", "limit_value",
                 "limit_est_error", "abs_gap",    "abs_gap_est_error", "gap_shrinking",     "imag_residual",
                 "magnitude",   "max_radius",     "nodes_per_leg"};
    if (cfg.timing) t.columns.push_back("wall_time_ms");
    for (std::size_t i = 0; i < records.size(); ++i) {
        const SweepRecord& r = records[i];
        const bool shrinking = i == 0 || r.abs_gap <= records[i - 1].abs_gap + r.est_error + records[i - 1].est_error;
        std::vector<Cell> row{r.L,           condition_name(cfg.condition),
                              r.finite_L_value, r.est_error,
                              r.limit_value,    r.limit_est_error,
                              r.abs_gap,        r.est_error + r.limit_est_error,
                              std::int64_t{shrinking ? 1 : 0},
                              r.imag_residual,  r.magnitude,
                              r.max_radius,     std::int64_t{r.nodes_per_leg}};
        if (cfg.timing) row.emplace_back(r.wall_time_ms);
        t.add_row(std::move(row));
    }
    return {{t}, bad >= 0 ? kExitNotMonotone : kExitOk};
}

CommandOutput cmd_smalln(const ExperimentConfig& cfg) {
    const std::vector<double> Ls = cfg.Ls.value_or(std::vector<double>{10.0, 20.0});
    const kk::Grid g = to_grid(cfg.grid);
    kk::KpzOptions opts = kk::smalln_options();
    if (cfg.nodes) opts.quad.nodes_per_leg = *cfg.nodes;
    if (cfg.radius) opts.quad.truncation_radius = *cfg.radius;
    const std::vector<kk::MultiIndex> ns = {{0, 1}, {1, 0}, {1, 1}, {2, 1}, {1, 2}};

    Table t;
    t.name = "smalln";
    t.columns = {"L",           "n1",          "n2",           "value",         "est_error",
                 "series_weight", "weighted_value", "weighted_value_est_error", "log_abs_value",
                 "ratio_to_11", "ratio_to_11_est_error", "vanishes", "imag_residual", "branches_evaluated",
                 "branches_skipped"};
    if (cfg.timing) t.columns.push_back("wall_time_ms");

    Table c;
    c.name = "checks";
    c.columns = {"L", "quantity", "value", "est_error"};

    std::vector<double> prev_suppression;
    for (double L : Ls) {
        std::vector<kpzcond::LawResult> rs;
        std::vector<double> times;
        for (const auto& n : ns) {
            const auto t0 = Clock::now();
            rs.push_back(kk::qhatn_step_smalln(g, n, L, opts, cfg.z_radius));
            times.push_back(ms_since(t0));
        }
        const kpzcond::LawResult& r11 = rs[2];
        std::vector<double> suppression;
        for (std::size_t k = 0; k < ns.size(); ++k) {
            const kpzcond::LawResult& r = rs[k];
            const double w = r.diagnostic("series_weight", 1.0);
            const auto [ratio, ratio_err] = abs_ratio(r.value, r.est_error, r11.value, r11.est_error);
            const bool has_zero = ns[k][0] == 0 || ns[k][1] == 0;
            std::vector<Cell> row{L,
                                  std::int64_t{ns[k][0]},
                                  std::int64_t{ns[k][1]},
                                  r.value,
                                  r.est_error,
                                  w,
                                  w * r.value,
                                  w * r.est_error,
                                  r.diagnostic("log_abs_value"),
                                  ratio,
                                  ratio_err,
                                  std::int64_t{has_zero && std::abs(r.value) < kVanishTolerance ? 1 : 0},
                                  r.imag_residual,
                                  std::int64_t{static_cast<std::int64_t>(r.diagnostic("branches_evaluated"))},
                                  std::int64_t{static_cast<std::int64_t>(r.diagnostic("branches_skipped"))}};
            if (cfg.timing) row.emplace_back(times[k]);
            t.add_row(std::move(row));
            if (ns[k][0] >= 1 && ns[k][1] >= 1 && ns[k] != kk::MultiIndex{1, 1}) suppression.push_back(ratio);
        }
        const kpzcond::LawResult q1 = kk::qhat1_ratio_step(g, L, {});
        c.add_row({L, "qhat1_ratio_step", q1.value, q1.est_error});
        c.add_row({L, "n11_minus_qhat1", r11.value - q1.value, r11.est_error + q1.est_error});
        const auto s21 = abs_ratio(rs[3].value, rs[3].est_error, r11.value, r11.est_error);
        const auto s12 = abs_ratio(rs[4].value, rs[4].est_error, r11.value, r11.est_error);
        c.add_row({L, "suppression_21", s21.first, s21.second});
        c.add_row({L, "suppression_12", s12.first, s12.second});
        if (!prev_suppression.empty()) {
            for (std::size_t k = 0; k < suppression.size(); ++k) {
                const double shrink = suppression[k] < prev_suppression[k] ? 1.0 : 0.0;
                c.add_row({L, k == 0 ? "suppression_21_shrinking" : "suppression_12_shrinking", shrink, 0.0});
            }
        }
        prev_suppression = suppression;
    }
    return {{t, c}, kExitOk};
}

CommandOutput cmd_sample(const ExperimentConfig& cfg) {
    const std::uint64_t count = cfg.mc_samples.value_or(10000);
    const std::vector<double>& taus = cfg.grid.taus;
    const std::size_t m = taus.size();

    Table t;
    t.name = "paths";
    t.columns = {"sample", "seed",    "tau",     "x",           "z",         "bridge1",
                 "bridge2", "vertex1", "vertex2", "field_at_x", "graph_residual"};

    std::vector<std::vector<double>> v1(m), v2(m);
    double max_residual = 0.0;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t seed = sample_seed(cfg.seed, i);
        const kb::FieldSample fs = kb::sample_limit_field(taus, cfg.condition, seed);
        for (std::size_t j = 0; j < m; ++j) {
            const double a = fs.vertex1(j), b = fs.vertex2(j);
            const double residual = fs.value(j, a) - b;
            max_residual = std::max(max_residual, std::abs(residual));
            v1[j].push_back(a);
            v2[j].push_back(b);
            t.add_row({static_cast<std::int64_t>(i), std::to_string(seed), taus[j], cfg.grid.xs[j], fs.z,
                       fs.bridge1[j], fs.bridge2[j], a, b, fs.value(j, cfg.grid.xs[j]), residual});
        }
    }

    auto cov = [](const std::vector<double>& x, const std::vector<double>& y) {
        const double n = static_cast<double>(x.size());
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            mx += x[i];
            my += y[i];
        }
        mx /= n;
        my /= n;
        double s = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double p = (x[i] - mx) * (y[i] - my);
            s += p;
            s2 += p * p;
        }
        const double c = s / (n - 1.0);
        const double var_p = std::max(0.0, s2 / n - (s / n) * (s / n));
        return std::pair<double, double>{c, std::sqrt(var_p / n)};
    };

    Table c;
    c.name = "covariance";
    c.columns = {"process", "tau_s", "tau_t", "cov", "std_error", "theory", "theory_est_error", "z_score"};
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a; b < m; ++b) {
            const double s = taus[a], u = taus[b];
            const double bridge = s * (1.0 - u) / 2.0;
            const double shift = cfg.condition == kb::Condition::Flat ? (1.0 - s) * (1.0 - u) / 2.0 : 0.0;
            for (int k = 0; k < 2; ++k) {
                const auto [cv, se] = k == 0 ? cov(v1[a], v1[b]) : cov(v2[a], v2[b]);
                const double theory = k == 0 ? bridge + shift : bridge;
                c.add_row({k == 0 ? "v1" : "v2", s, u, cv, se, theory, 0.0, se > 0.0 ? (cv - theory) / se : 0.0});
            }
        }

    Table chk;
    chk.name = "checks";
    chk.columns = {"quantity", "value", "est_error"};
    chk.add_row({"max_graph_residual", max_residual, 0.0});
    chk.add_row({"samples", static_cast<double>(count), 0.0});
    return {{t, c, chk}, kExitOk};
}

CommandOutput run_command(const ExperimentConfig& cfg) {
    if (cfg.command == "tw") return cmd_tw(cfg);
    if (cfg.command == "limit") return cmd_limit(cfg);
    if (cfg.command == "converge") return cmd_converge(cfg);
    if (cfg.command == "smalln") return cmd_smalln(cfg);
    if (cfg.command == "sample") return cmd_sample(cfg);
    throw ConfigError("unknown command \"" + cfg.command + "\"");
}

}  // namespace kpzlab
