#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>
#include <vector>

#include "kpzcond/airy.hpp"
#include "kpzcond/bridge_laws.hpp"
#include "kpzcond/errors.hpp"
#include "kpzcond/kpz_core.hpp"
#include "kpzcond/tracy_widom.hpp"

namespace py = pybind11;
using namespace kpzcond;

namespace {

bridge::Condition parse_condition(const std::string& name) {
    if (name == "step") return bridge::Condition::Step;
    if (name == "flat") return bridge::Condition::Flat;
    throw Error(ErrorCode::InvalidArgument, "condition must be 'step' or 'flat', got '" + name + "'");
}

kpz::KpzOptions kpz_options(int nodes, double radius, int threads) {
    kpz::KpzOptions o;
    o.quad.nodes_per_leg = nodes;
    o.quad.truncation_radius = radius;
    o.threads = threads;
    return o;
}

kpz::Grid make_grid(const std::vector<double>& taus, const std::vector<double>& xs, const std::vector<double>& hs) {
    return kpz::Grid::from_interior(taus, xs, hs);
}

bridge::LimitQuery make_query(const std::vector<double>& taus, const std::vector<double>& xs,
                              const std::vector<double>& hs, const std::string& condition) {
    bridge::LimitQuery q;
    q.taus = taus;
    q.xs = xs;
    q.hs = hs;
    q.condition = parse_condition(condition);
    return q;
}

}  // namespace

PYBIND11_MODULE(_kpzcond, m) {
    m.doc() = "Conditional KPZ fixed point laws and their large-L limits";

    static py::exception<Error> numerical(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            if (is_validation_error(e.code())) {
                PyErr_SetString(PyExc_ValueError, e.what());
            } else {
                py::set_error(numerical, e.what());
            }
        }
    });

    py::class_<LawResult>(m, "LawResult")
        .def_readonly("value", &LawResult::value)
        .def_readonly("est_error", &LawResult::est_error)
        .def_readonly("imag_residual", &LawResult::imag_residual)
        .def_readonly("method", &LawResult::method)
        .def_property_readonly("diagnostics",
                               [](const LawResult& r) {
                                   std::map<std::string, double> d(r.diagnostics.begin(), r.diagnostics.end());
                                   return d;
                               })
        .def("__repr__", [](const LawResult& r) {
            return "LawResult(value=" + std::to_string(r.value) + ", est_error=" + std::to_string(r.est_error) +
                   ", method='" + r.method + "')";
        });

    py::class_<bridge::McEstimate>(m, "McEstimate")
        .def_readonly("probability", &bridge::McEstimate::probability)
        .def_readonly("std_error", &bridge::McEstimate::std_error)
        .def_readonly("samples", &bridge::McEstimate::samples)
        .def_readonly("hits", &bridge::McEstimate::hits);

    m.def("airy", [](double x) { return tw::airy(x); }, py::arg("x"));
    m.def("f_gue", [](double L) { return tw::f_gue(L); }, py::arg("L"));
    m.def("p_gue", [](double L) { return tw::p_gue(L); }, py::arg("L"));
    m.def("log_p_gue", [](double L) { return tw::log_p_gue(L); }, py::arg("L"));
    m.def("f_goe", [](double L) { return tw::f_goe(L); }, py::arg("L"));
    m.def("p_goe", [](double L) { return tw::p_goe(L); }, py::arg("L"));
    m.def("log_p_goe", [](double L) { return tw::log_p_goe(L); }, py::arg("L"));
    m.def("f_flat", [](double L) { return tw::f_flat(L); }, py::arg("L"));
    m.def("p_flat", [](double L) { return tw::p_flat(L); }, py::arg("L"));
    m.def("log_p_flat", [](double L) { return tw::log_p_flat(L); }, py::arg("L"));

    m.def("bridge_tail_closed", &bridge::bridge_tail_closed, py::arg("tau"), py::arg("b"),
          "P(B(tau) > b) for a standard Brownian bridge on [0, 1].");
    m.def(
        "bridge_tail_contour",
        [](const std::vector<double>& times, const std::vector<double>& levels) {
            return bridge::bridge_tail_contour(bridge::TimePartition::from_interior(times), levels);
        },
        py::arg("times"), py::arg("levels"), "P(B(t_j) > b_j for all j) through the contour representation.");
    m.def(
        "bridge_tail_mc",
        [](const std::vector<double>& times, const std::vector<double>& levels, std::uint64_t samples,
           std::uint64_t seed, int threads) {
            return bridge::bridge_tail_mc(bridge::TimePartition::from_interior(times), levels, samples, seed, threads);
        },
        py::arg("times"), py::arg("levels"), py::arg("samples"), py::arg("seed"), py::arg("threads") = 1);

    m.def(
        "limit_tail",
        [](const std::vector<double>& taus, const std::vector<double>& xs, const std::vector<double>& hs,
           const std::string& condition) { return bridge::limit_tail(make_query(taus, xs, hs, condition)); },
        py::arg("taus"), py::arg("xs"), py::arg("hs"), py::arg("condition") = "step",
        "Large-L limit of the conditional probability that the height exceeds h_j at (x_j, tau_j).");
    m.def(
        "limit_tail_mc",
        [](const std::vector<double>& taus, const std::vector<double>& xs, const std::vector<double>& hs,
           const std::string& condition, std::uint64_t samples, std::uint64_t seed, int threads) {
            return bridge::limit_tail_mc(make_query(taus, xs, hs, condition), samples, seed, threads);
        },
        py::arg("taus"), py::arg("xs"), py::arg("hs"), py::arg("condition"), py::arg("samples"), py::arg("seed"),
        py::arg("threads") = 1);

    m.def(
        "qhat1_ratio",
        [](const std::vector<double>& taus, const std::vector<double>& xs, const std::vector<double>& hs, double L,
           const std::string& condition, int nodes, double radius, int threads) {
            const kpz::Grid g = make_grid(taus, xs, hs);
            const kpz::KpzOptions o = kpz_options(nodes, radius, threads);
            return parse_condition(condition) == bridge::Condition::Step ? kpz::qhat1_ratio_step(g, L, o)
                                                                         : kpz::qhat1_ratio_flat(g, L, o);
        },
        py::arg("taus"), py::arg("xs"), py::arg("hs"), py::arg("L"), py::arg("condition") = "step",
        py::arg("nodes") = 64, py::arg("radius") = 0.0, py::arg("threads") = 1,
        "Leading term of the finite-L conditional probability, interior grid points only.");
    m.def(
        "qhatn_smalln",
        [](const std::vector<double>& taus, const std::vector<double>& xs, const std::vector<double>& hs,
           std::array<int, 2> n, double L, int nodes, double z_radius) {
            kpz::KpzOptions o = kpz::smalln_options();
            if (nodes > 0) o.quad.nodes_per_leg = nodes;
            return kpz::qhatn_step_smalln(make_grid(taus, xs, hs), n, L, o, z_radius);
        },
        py::arg("taus"), py::arg("xs"), py::arg("hs"), py::arg("n"), py::arg("L"), py::arg("nodes") = 0,
        py::arg("z_radius") = 2.0);

    m.def(
        "sample_limit_field",
        [](const std::vector<double>& taus, const std::string& condition, std::uint64_t seed) {
            const auto s = bridge::sample_limit_field(taus, parse_condition(condition), seed);
            std::vector<double> v1, v2;
            for (std::size_t j = 0; j < s.taus.size(); ++j) {
                v1.push_back(s.vertex1(j));
                v2.push_back(s.vertex2(j));
            }
            py::dict d;
            d["taus"] = s.taus;
            d["bridge1"] = s.bridge1;
            d["bridge2"] = s.bridge2;
            d["z"] = s.z;
            d["vertex1"] = v1;
            d["vertex2"] = v2;
            return d;
        },
        py::arg("taus"), py::arg("condition") = "step", py::arg("seed") = 0);
}
