#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "photonstat/core.hpp"
#include "photonstat/fit.hpp"
#include "photonstat/io.hpp"
#include "photonstat/models.hpp"
#include "photonstat/simulate.hpp"
#include "photonstat/stats.hpp"

namespace py = pybind11;
using namespace photonstat;

namespace {

py::array_t<std::uint64_t> to_array(const std::vector<time_ps>& v) {
    py::array_t<std::uint64_t> out(py::ssize_t(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

TimestampSeries series_from(py::array_t<std::uint64_t, py::array::c_style> times,
                            time_ps duration_ps) {
    TimestampSeries s;
    s.duration_ps = duration_ps;
    s.times.assign(times.data(), times.data() + times.size());
    return s;
}

py::dict fit_result_dict(const FitResult& fr) {
    py::dict d;
    py::dict params;
    for (const auto& p : fr.params) {
        py::dict e;
        e["value"] = p.value;
        e["unit"] = p.unit;
        e["std_error"] = p.std_error_ok ? py::object(py::float_(p.std_error)) : py::none();
        params[p.name.c_str()] = e;
    }
    d["parameters"] = params;
    d["rss"] = fr.rss;
    d["initial_rss"] = fr.initial_rss;
    d["converged"] = fr.converged;
    d["iterations"] = fr.iterations;
    return d;
}

CorrelationHistogram hist_from(py::array_t<double> edges, py::array_t<std::uint64_t> counts,
                               bool folded, std::uint64_t n_a, std::uint64_t n_b,
                               time_ps duration_ps) {
    CorrelationHistogram h;
    h.edges_ps.assign(edges.data(), edges.data() + edges.size());
    h.counts.assign(counts.data(), counts.data() + counts.size());
    h.folded = folded;
    h.n_a = n_a;
    h.n_b = n_b;
    h.duration_ps = duration_ps;
    return h;
}

}  // namespace

PYBIND11_MODULE(_photonstat, m) {
    m.doc() = "Photon statistics toolkit: timestamp simulation and analysis";
    m.attr("__version__") = PHOTONSTAT_VERSION;

    py::register_exception<config_error>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<data_error>(m, "DataError", PyExc_RuntimeError);

    py::class_<TimestampSeries>(m, "TimestampSeries")
        .def(py::init([](py::array_t<std::uint64_t, py::array::c_style> times,
                         time_ps duration_ps) { return series_from(times, duration_ps); }),
             py::arg("times"), py::arg("duration_ps"))
        .def_readonly("duration_ps", &TimestampSeries::duration_ps)
        .def_property_readonly("times",
                               [](const TimestampSeries& s) { return to_array(s.times); })
        .def("__len__", [](const TimestampSeries& s) { return s.size(); });

    py::class_<Acquisition>(m, "Acquisition")
        .def_readonly("duration_ps", &Acquisition::duration_ps)
        .def_property_readonly("seed",
                               [](const Acquisition& a) -> py::object {
                                   return a.seed ? py::object(py::int_(*a.seed)) : py::none();
                               })
        .def_property_readonly("is_pulsed",
                               [](const Acquisition& a) { return a.mode.is_pulsed(); })
        .def_property_readonly("tau_rep_ps",
                               [](const Acquisition& a) { return a.mode.tau_rep_ps; })
        .def_property_readonly("times",
                               [](const Acquisition& a) {
                                   std::vector<time_ps> t;
                                   t.reserve(a.records.size());
                                   for (const auto& r : a.records) t.push_back(r.time);
                                   return to_array(t);
                               })
        .def_property_readonly("channels",
                               [](const Acquisition& a) {
                                   py::array_t<std::uint8_t> out(py::ssize_t(a.records.size()));
                                   auto* p = out.mutable_data();
                                   for (std::size_t i = 0; i < a.records.size(); ++i)
                                       p[i] = a.records[i].channel;
                                   return out;
                               })
        .def("__len__", [](const Acquisition& a) { return a.records.size(); });

    m.def(
        "simulate",
        [](const std::string& mode, time_ps duration_ps, std::uint64_t seed, double tau12_ps,
           double tau21_ps, std::optional<double> tau23_ps, std::optional<double> tau31_ps,
           double efficiency, time_ps deadtime_ps, double split_ratio, double background_hz,
           time_ps tau_rep_ps, double power_uw) {
            SimulationConfig cfg;
            cfg.duration_ps = duration_ps;
            cfg.seed = seed;
            cfg.rates = {tau12_ps, tau21_ps, tau23_ps, tau31_ps};
            cfg.chain = {efficiency, deadtime_ps, split_ratio, background_hz};
            if (mode == "pulsed")
                cfg.mode = ExcitationMode::pulsed(tau_rep_ps);
            else if (mode == "cw")
                cfg.mode = ExcitationMode::cw(power_uw);
            else
                throw config_error("mode must be 'cw' or 'pulsed'");
            return simulate_acquisition(cfg);
        },
        py::arg("mode"), py::arg("duration_ps"), py::arg("seed"), py::arg("tau12_ps"),
        py::arg("tau21_ps"), py::arg("tau23_ps") = py::none(),
        py::arg("tau31_ps") = py::none(), py::arg("efficiency") = 1.0,
        py::arg("deadtime_ps") = 0, py::arg("split_ratio") = 0.5,
        py::arg("background_hz") = 0.0, py::arg("tau_rep_ps") = 0,
        py::arg("power_uw") = 0.0,
        "Run the kinetic Monte Carlo emitter and detection chain.");

    m.def("load_acquisition",
          [](const std::string& path) { return load_acquisition(path); });
    m.def("save_acquisition", [](const Acquisition& acq, const std::string& path) {
        save_acquisition(acq, path);
    });

    m.def(
        "merge_channels",
        [](const Acquisition& acq, std::optional<std::vector<int>> channels) {
            if (!channels) return merge_channels(acq);
            std::set<std::uint8_t> set;
            for (int ch : *channels) set.insert(std::uint8_t(ch));
            return merge_channels(acq, set);
        },
        py::arg("acquisition"), py::arg("channels") = py::none());

    m.def(
        "partition_windows",
        [](const TimestampSeries& s, time_ps window, std::uint64_t k_max, time_ps origin) {
            return partition_windows(s, window, k_max, origin);
        },
        py::arg("series"), py::arg("window_ps"), py::arg("k_max") = kMaxWindows,
        py::arg("origin_ps") = 0);

    m.def(
        "mandel_q",
        [](const TimestampSeries& s, time_ps window, std::uint64_t k_max, time_ps origin) {
            const auto q = mandel_q(s, window, k_max, origin);
            py::dict d;
            d["q"] = q.q;
            d["mean"] = q.mean;
            d["n_windows"] = q.n_windows;
            return d;
        },
        py::arg("series"), py::arg("window_ps"), py::arg("k_max") = kMaxWindows,
        py::arg("origin_ps") = 0);

    m.def(
        "photon_number_distribution",
        [](const TimestampSeries& s, time_ps window) {
            const auto p = photon_number_distribution(s, window);
            py::dict d;
            d["probabilities"] = p.probabilities;
            d["mean"] = p.mean;
            d["stddev"] = p.stddev;
            d["poisson_stddev"] = p.poisson_stddev;
            d["n_windows"] = p.n_windows;
            return d;
        },
        py::arg("series"), py::arg("window_ps"));

    m.def(
        "g2_histogram",
        [](const TimestampSeries& a, const TimestampSeries& b, time_ps max_lag_ps,
           std::optional<time_ps> bin_width_ps, std::optional<time_ps> min_lag_ps,
           std::optional<std::size_t> log_bins) {
            BinningSpec spec =
                log_bins ? BinningSpec::logspaced(min_lag_ps.value_or(100), max_lag_ps,
                                                  *log_bins)
                         : BinningSpec::linear(max_lag_ps, bin_width_ps.value_or(1'000));
            const auto h = g2_histogram_cw(a, b, spec);
            py::dict d;
            d["edges_ps"] = h.edges_ps;
            d["counts"] = h.counts;
            d["normalized"] = h.normalized();
            d["folded"] = h.folded;
            d["n_a"] = h.n_a;
            d["n_b"] = h.n_b;
            d["duration_ps"] = h.duration_ps;
            return d;
        },
        py::arg("ch_a"), py::arg("ch_b"), py::arg("max_lag_ps"),
        py::arg("bin_width_ps") = py::none(), py::arg("min_lag_ps") = py::none(),
        py::arg("log_bins") = py::none());

    m.def(
        "g2_zero_pulsed",
        [](const TimestampSeries& a, const TimestampSeries& b, const TimestampSeries& trig,
           time_ps tau_rep_ps, time_ps half_width_ps, std::size_t n_side) {
            const auto g = g2_zero_pulsed(a, b, trig, tau_rep_ps, half_width_ps, n_side);
            py::dict d;
            d["g2_zero"] = g.value;
            d["uncertainty"] = g.uncertainty;
            d["zero_peak_area"] = g.zero_peak_area;
            d["mean_side_area"] = g.mean_side_area;
            return d;
        },
        py::arg("ch_a"), py::arg("ch_b"), py::arg("triggers"), py::arg("tau_rep_ps"),
        py::arg("half_width_ps"), py::arg("n_side_peaks") = 18);

    m.def("trigger_filter", &trigger_filter, py::arg("acquisition"),
          py::arg("window_start_ps"), py::arg("window_width_ps"));

    m.def(
        "lifetime_histogram",
        [](const Acquisition& acq, time_ps bin_width_ps) {
            const auto h = lifetime_histogram(acq, bin_width_ps);
            py::dict d;
            d["bin_width_ps"] = h.bin_width_ps;
            d["counts"] = h.counts;
            d["n_triggers"] = h.n_triggers;
            d["n_detections"] = h.n_detections;
            return d;
        },
        py::arg("acquisition"), py::arg("bin_width_ps"));

    m.def(
        "estimate_deadtime",
        [](const TimestampSeries& s, time_ps bin_width_ps) {
            const auto e = estimate_deadtime(s, bin_width_ps);
            py::dict d;
            d["deadtime_ps"] = e.deadtime_ps;
            d["uncertainty_ps"] = e.uncertainty_ps;
            return d;
        },
        py::arg("series"), py::arg("bin_width_ps") = 100);

    // Closed-form models.
    m.def(
        "saturation_rate",
        [](double power_uw, double i_inf_hz, double p_sat_uw, double b, double c) {
            return saturation_rate(power_uw, {i_inf_hz, p_sat_uw, b, c});
        },
        py::arg("power_uw"), py::arg("i_inf_hz"), py::arg("p_sat_uw"),
        py::arg("b_hz_per_uw") = 0.0, py::arg("c_hz") = 0.0);
    m.def(
        "g2_two_exp",
        [](double tau_ps, double a, double b, double tau1_ps, double tau2_ps) {
            return g2_two_exp(tau_ps, {a, b, tau1_ps, tau2_ps});
        },
        py::arg("tau_ps"), py::arg("a"), py::arg("b"), py::arg("tau1_ps"),
        py::arg("tau2_ps"));
    m.def("background_correct", &background_correct, py::arg("g2_raw"), py::arg("sigma"));
    m.def("background_uncorrect", &background_uncorrect, py::arg("g2_corrected"),
          py::arg("sigma"));
    m.def(
        "rate_model_g2",
        [](double tau_ps, double tau12_ps, double tau21_ps, std::optional<double> tau23_ps,
           std::optional<double> tau31_ps) {
            return rate_model_g2(tau_ps, {tau12_ps, tau21_ps, tau23_ps, tau31_ps});
        },
        py::arg("tau_ps"), py::arg("tau12_ps"), py::arg("tau21_ps"),
        py::arg("tau23_ps") = py::none(), py::arg("tau31_ps") = py::none());
    m.def("pulsed_q0", &pulsed_q0, py::arg("eta"), py::arg("g2_zero"));
    m.def(
        "pulsed_q_model",
        [](std::uint64_t k, double eta, double tau23_eff_ps, double tau31_eff_ps,
           double tau_rep_ps) {
            return pulsed_q_model(k, {eta, tau23_eff_ps, tau31_eff_ps, tau_rep_ps});
        },
        py::arg("k"), py::arg("eta"), py::arg("tau23_eff_ps"), py::arg("tau31_eff_ps"),
        py::arg("tau_rep_ps"));
    m.def(
        "analytic_cw_q",
        [](double window_ps, double a, double t1_ps, double t2_ps, double mean_rate_hz) {
            return analytic_cw_q(window_ps, {a, t1_ps, t2_ps, mean_rate_hz});
        },
        py::arg("window_ps"), py::arg("a"), py::arg("t1_ps"), py::arg("t2_ps"),
        py::arg("mean_rate_hz"));

    // Fit drivers.
    m.def(
        "fit_lifetime",
        [](py::array_t<std::uint64_t> counts, time_ps bin_width_ps, std::uint64_t n_triggers) {
            DelayHistogram h;
            h.bin_width_ps = bin_width_ps;
            h.counts.assign(counts.data(), counts.data() + counts.size());
            h.n_triggers = n_triggers;
            const auto f = fit_lifetime(h);
            auto d = fit_result_dict(f.fit);
            d["tau_ps"] = f.tau_ps;
            d["background_per_bin"] = f.background_per_bin;
            d["background_rate_hz"] = f.background_rate_hz;
            return d;
        },
        py::arg("counts"), py::arg("bin_width_ps"), py::arg("n_triggers") = 0);

    m.def(
        "fit_g2_two_exp",
        [](py::array_t<double> edges, py::array_t<std::uint64_t> counts, bool folded,
           std::uint64_t n_a, std::uint64_t n_b, time_ps duration_ps,
           const ExcludedLags& excluded) {
            const auto f =
                fit_g2_two_exp(hist_from(edges, counts, folded, n_a, n_b, duration_ps),
                               excluded);
            auto d = fit_result_dict(f.fit);
            d["g2_zero"] = f.g2_zero;
            return d;
        },
        py::arg("edges_ps"), py::arg("counts"), py::arg("folded"), py::arg("n_a"),
        py::arg("n_b"), py::arg("duration_ps"),
        py::arg("excluded_lags") = ExcludedLags{});

    m.def(
        "fit_pulsed_q",
        [](py::array_t<std::uint64_t> windows_ps, py::array_t<double> q_means,
           time_ps tau_rep_ps) {
            QSeries qs;
            for (py::ssize_t i = 0; i < windows_ps.size(); ++i) {
                QSeriesEntry e;
                e.window_ps = windows_ps.data()[i];
                e.q_mean = q_means.data()[i];
                qs.entries.push_back(e);
            }
            const auto f = fit_pulsed_q(qs, tau_rep_ps);
            auto d = fit_result_dict(f.fit);
            d["eta"] = f.params.eta;
            d["tau23_eff_ps"] = f.params.tau23_eff_ps;
            d["tau31_eff_ps"] = f.params.tau31_eff_ps;
            d["beta"] = f.params.beta();
            return d;
        },
        py::arg("windows_ps"), py::arg("q_means"), py::arg("tau_rep_ps"));

    m.def(
        "fit_saturation",
        [](const std::vector<double>& powers_uw, const std::vector<double>& rates_hz) {
            const auto f = fit_saturation(powers_uw, rates_hz);
            auto d = fit_result_dict(f.fit);
            d["i_inf_hz"] = f.params.i_inf_hz;
            d["p_sat_uw"] = f.params.p_sat_uw;
            return d;
        },
        py::arg("powers_uw"), py::arg("rates_hz"));
}
