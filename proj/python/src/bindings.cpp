#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <thread>

#include "polaron/bundle.hpp"
#include "polaron/config.hpp"
#include "polaron/experiment.hpp"
#include "polaron/quasiparticle.hpp"
#include "polaron/singleshot.hpp"

namespace py = pybind11;
using namespace polaron;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) {
    return py::array_t<double>(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())}, v.data());
}

std::vector<double> to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 1) throw py::value_error("expected a one-dimensional array");
    return {a.data(), a.data() + a.size()};
}

TimeSeries<double> to_series(const std::vector<double>& t, const std::vector<double>& v) {
    if (t.size() != v.size()) throw py::value_error("times and values differ in length");
    TimeSeries<double> s;
    for (std::size_t i = 0; i < t.size(); ++i) s.push_back(t[i], v[i]);
    return s;
}

py::dict series_dict(const TimeSeries<double>& s) {
    py::dict d;
    d["t"] = to_array(s.times);
    d["values"] = to_array(s.values);
    return d;
}

std::size_t default_threads(std::size_t threads) {
    return threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
}

ExperimentConfig with_overrides(const std::string& text, std::optional<std::uint64_t> seed) {
    ExperimentConfig c = parse_config(text);
    if (seed) c.seed = *seed;
    return c;
}

}  // namespace

PYBIND11_MODULE(_polaron, m) {
    m.doc() = "Bose polaron quench simulator";

    // Later registrations are tried first, so the derived type goes last.
    py::register_exception<Error>(m, "PolaronError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def("config_keys", &config_keys);
    m.def(
        "normalize_config", [](const std::string& text) { return serialize_config(parse_config(text)); },
        py::arg("text"), "Parse, validate and reserialize a config with every key.");

    m.def(
        "ground_state",
        [](const std::string& text) {
            const ExperimentConfig c = parse_config(text);
            const MeanFieldState s = prepare_initial_state(c.mixture, c.grid.build());
            py::dict d;
            d["x"] = to_array(s.grid().points());
            d["bath_density"] = to_array(one_body_density(s, Species::bath));
            d["impurity_density"] = to_array(one_body_density(s, Species::impurity));
            d["thomas_fermi_mu"] = thomas_fermi_mu(c.mixture);
            return d;
        },
        py::arg("config") = "");

    m.def(
        "run_mean_field",
        [](const std::string& text) {
            const ExperimentConfig c = parse_config(text);
            std::optional<MeanFieldRun> result;
            {
                py::gil_scoped_release release;
                result = run_mean_field(c);
            }
            const MeanFieldRun& run = *result;
            py::dict d;
            d["x_imp"] = series_dict(run.x_imp);
            d["p_imp"] = series_dict(run.p_imp);
            d["x_bath"] = series_dict(run.x_bath);
            d["total_energy"] = series_dict(run.total_energy);
            return d;
        },
        py::arg("config"));

    m.def(
        "run_ci",
        [](const std::string& text) {
            const ExperimentConfig c = parse_config(text);
            CIRun run;
            {
                py::gil_scoped_release release;
                run = run_ci(c);
            }
            py::dict d;
            d["x_imp"] = series_dict(run.x_imp);
            d["p_imp"] = series_dict(run.p_imp);
            d["entropy"] = series_dict(run.entropy);
            d["energy"] = series_dict(run.energy);
            d["norm"] = series_dict(run.norm);
            return d;
        },
        py::arg("config"));

    m.def(
        "run_verb",
        [](const std::string& verb, const std::string& text, const std::string& out,
           std::optional<std::uint64_t> seed, std::size_t threads) {
            const ExperimentConfig c = with_overrides(text, seed);
            const Bundle bundle(out);
            const std::size_t n = default_threads(threads);
            py::gil_scoped_release release;
            if (verb == "prepare") {
                prepare_bundle(c, bundle);
            } else if (verb == "run") {
                run_bundle(c, bundle, n);
            } else if (verb == "image") {
                image_bundle(c, bundle, n);
            } else if (verb == "fit") {
                fit_bundle(c, bundle);
            } else if (verb == "converge") {
                converge_bundle(c, bundle, n);
            } else if (verb == "frohlich") {
                frohlich_bundle(c, bundle, n);
            } else {
                throw ConfigError(Errc::invalid_value, "verb", "unknown verb " + verb);
            }
        },
        py::arg("verb"), py::arg("config"), py::arg("out"), py::arg("seed") = py::none(),
        py::arg("threads") = 0);

    m.def(
        "damped_trajectory",
        [](double m_eff, double omega_eff, double gamma_eff, double x0, double p0,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& times) {
            const DampedModel model{m_eff, omega_eff, gamma_eff, x0, p0};
            std::vector<double> xs, ps;
            for (double t : to_vector(times)) {
                const PhasePoint pt = damped_trajectory(model, t);
                xs.push_back(pt.x);
                ps.push_back(pt.p);
            }
            return py::make_tuple(to_array(xs), to_array(ps));
        },
        py::arg("m_eff"), py::arg("omega_eff"), py::arg("gamma_eff"), py::arg("x0"), py::arg("p0"),
        py::arg("times"));

    m.def(
        "fit_effective_parameters",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& times,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& p, double x0,
           double p0, double m_imp, double omega_trap) {
            const auto t = to_vector(times);
            const FitResult r = fit_effective_parameters(to_series(t, to_vector(x)),
                                                         to_series(t, to_vector(p)), x0, p0, m_imp,
                                                         omega_trap);
            py::dict d;
            d["status"] = to_string(r.status);
            d["m_eff"] = r.model.m_eff;
            d["omega_eff"] = r.model.omega_eff;
            d["gamma_eff"] = r.model.gamma_eff;
            d["uncertainties"] = r.uncertainties;
            d["residual_rms"] = r.residual_rms;
            return d;
        },
        py::arg("times"), py::arg("x"), py::arg("p"), py::arg("x0"), py::arg("p0"),
        py::arg("m_imp") = 1.0, py::arg("omega_trap") = 0.1);

    m.def(
        "frohlich_mass",
        [](double g_bi, double n0, double g_bb, double mass_bath, double mass_imp) {
            FrohlichParams p;
            p.g_bi = g_bi;
            p.n0 = n0;
            p.g_bb = g_bb;
            p.mass_bath = mass_bath;
            p.mass_imp = mass_imp;
            const FrohlichResult r = frohlich_mass(p);
            py::dict d;
            d["m_eff"] = r.m_eff;
            d["a_integral"] = r.a_integral;
            d["k_max"] = r.k_max;
            d["relative_tail"] = r.relative_tail;
            return d;
        },
        py::arg("g_bi"), py::arg("n0") = 3.04, py::arg("g_bb") = 1.0, py::arg("mass_bath") = 1.0,
        py::arg("mass_imp") = 1.0);

    m.def(
        "bec_scales",
        [](double n0, double g_bb, double mass_bath) {
            const BecScales s = bec_scales(n0, g_bb, mass_bath);
            return py::make_tuple(s.healing_length, s.sound_speed);
        },
        py::arg("n0"), py::arg("g_bb") = 1.0, py::arg("mass_bath") = 1.0);

    m.def(
        "mean_field_shots",
        [](const std::string& text, std::size_t n_shots, std::uint64_t seed, std::size_t threads) {
            const ExperimentConfig c = parse_config(text);
            const MeanFieldState s = prepare_initial_state(c.mixture, c.grid.build());
            const auto psf = PointSpreadFunction::make(c.imaging.psf_width);
            std::vector<Shot> shots;
            {
                py::gil_scoped_release release;
                shots = sample_shots(s, psf, seed, n_shots, default_threads(threads));
            }
            const ShotImage avg = average_images(bath_images(shots));
            py::dict d;
            d["x"] = to_array(s.grid().points());
            d["average_bath"] = to_array(avg.intensity);
            d["expected_bath"] =
                to_array(psf_convolve(one_body_density(s, Species::bath), s.grid(), psf));
            d["impurity_centroids"] = to_array(impurity_centroids(shots));
            return d;
        },
        py::arg("config"), py::arg("n_shots"), py::arg("seed") = 0, py::arg("threads") = 0);

    m.def("sha256_hex", py::overload_cast<const std::string&>(&sha256_hex), py::arg("text"));
}
