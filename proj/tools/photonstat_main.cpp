// photonstat: simulate and analyse single-photon-emitter timestamp streams.
//
// Subcommands: simulate, q, pnd, g2, g2zero, lifetime, filter, deadtime,
// fit, model, sweep-filter, convert. All analysis outputs are CSV with the
// resolved configuration in '#' header lines; fit outputs are JSON plus a
// fitted-curve CSV. Exit codes: 0 success, 1 usage, 2 data error,
// 3 non-convergence.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "photonstat/core.hpp"
#include "photonstat/fit.hpp"
#include "photonstat/io.hpp"
#include "photonstat/models.hpp"
#include "photonstat/simulate.hpp"
#include "photonstat/stats.hpp"

namespace fs = std::filesystem;
using namespace photonstat;

namespace {

// ---------------------------------------------------------------------------
// Unit-suffixed durations: 100ps, 5ns, 10us, 1ms, 10s (canonical unit: ps).

double parse_duration_value(const std::string& text) {
    static const std::map<std::string, double> scale = {
        {"ps", 1.0}, {"ns", 1e3}, {"us", 1e6}, {"ms", 1e9}, {"s", 1e12}};
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(text, &pos);
    } catch (const std::exception&) {
        throw config_error("cannot parse duration '" + text + "'");
    }
    std::string unit = text.substr(pos);
    if (unit.empty()) unit = "ps";
    const auto it = scale.find(unit);
    if (it == scale.end()) throw config_error("unknown time unit '" + unit + "' in '" + text + "'");
    const double ps = v * it->second;
    if (ps < 0) throw config_error("negative duration '" + text + "'");
    return ps;
}

time_ps parse_duration_ps(const std::string& text) {
    return time_ps(std::llround(parse_duration_value(text)));
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<time_ps> parse_duration_list(const std::string& text) {
    std::vector<time_ps> out;
    for (const auto& item : split(text, ',')) out.push_back(parse_duration_ps(item));
    return out;
}

// "7:12ns" or "7ns:12ns" -> [start, end) in ps.
std::pair<time_ps, time_ps> parse_window(const std::string& text) {
    const auto parts = split(text, ':');
    if (parts.size() != 2) throw config_error("window must be start:end, got '" + text + "'");
    std::string first = parts[0];
    // A bare number inherits the unit of the second part.
    if (!first.empty() && (std::isdigit(first.back()) || first.back() == '.')) {
        std::size_t pos = 0;
        std::stod(parts[1], &pos);
        first += parts[1].substr(pos);
    }
    const time_ps a = parse_duration_ps(first);
    const time_ps b = parse_duration_ps(parts[1]);
    if (b < a) throw config_error("window end precedes start in '" + text + "'");
    return {a, b};
}

struct Grid {
    std::vector<double> points;
};

// "min:max:lin|log:n", durations with unit suffixes.
Grid parse_grid(const std::string& text) {
    const auto parts = split(text, ':');
    if (parts.size() != 4) throw config_error("grid must be min:max:lin|log:n");
    const double lo = parse_duration_value(parts[0]);
    const double hi = parse_duration_value(parts[1]);
    const bool log_spaced = parts[2] == "log";
    if (!log_spaced && parts[2] != "lin") throw config_error("grid spacing must be lin or log");
    const int n = std::stoi(parts[3]);
    if (n < 2 || hi <= lo || (log_spaced && lo <= 0))
        throw config_error("bad grid '" + text + "'");
    Grid g;
    for (int i = 0; i < n; ++i) {
        const double f = double(i) / double(n - 1);
        g.points.push_back(log_spaced ? lo * std::pow(hi / lo, f) : lo + f * (hi - lo));
    }
    return g;
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> read_config_file(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw data_error("cannot open config file " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line.erase(0, line.find_first_not_of(" \t"));
        line.erase(line.find_last_not_of(" \t") + 1);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw data_error(path.string() + " line " + std::to_string(lineno) +
                             ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        key.erase(key.find_last_not_of(" \t") + 1);
        val.erase(0, val.find_first_not_of(" \t"));
        kv[key] = val;
    }
    return kv;
}

HeaderKV base_header(const std::string& command) {
    return {{"photonstat_version", PHOTONSTAT_VERSION}, {"command", command}};
}

void emit_json(const std::string& json, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << json << "\n";
    } else {
        write_file_atomic(out_path, [&](std::ostream& os) { os << json << "\n"; });
    }
}

std::string join_paths(const std::vector<std::string>& paths) {
    std::string s;
    for (const auto& p : paths) {
        if (!s.empty()) s += ";";
        s += p;
    }
    return s;
}

// Multi-file subcommands process inputs in sorted order for determinism.
std::vector<std::string> sorted_inputs(std::vector<std::string> inputs) {
    std::sort(inputs.begin(), inputs.end());
    return inputs;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOpts {
    std::string config_path;
    std::string out_path;
    std::string mode;  // cw | pulsed
    std::string duration, tau_rep, tau12, tau21, tau23, tau31, deadtime;
    double efficiency = -1, split_ratio = -1, background_hz = -1, power_uw = -1;
    std::uint64_t seed = std::uint64_t(-1);
    bool two_level = false;
};

int cmd_simulate(const SimulateOpts& o) {
    std::map<std::string, std::string> kv;
    if (!o.config_path.empty()) kv = read_config_file(o.config_path);

    auto num = [&](const std::string& key, double fallback, bool required = false) {
        auto it = kv.find(key);
        if (it != kv.end()) return std::stod(it->second);
        if (required) throw config_error("missing required simulation key '" + key + "'");
        return fallback;
    };
    auto dur_override = [&](const std::string& flag, const std::string& key) {
        if (!flag.empty()) kv[key] = std::to_string(parse_duration_ps(flag));
    };
    dur_override(o.duration, "duration_ps");
    dur_override(o.tau_rep, "tau_rep_ps");
    dur_override(o.tau12, "tau12_ps");
    dur_override(o.tau21, "tau21_ps");
    dur_override(o.tau23, "tau23_ps");
    dur_override(o.tau31, "tau31_ps");
    dur_override(o.deadtime, "deadtime_ps");
    if (!o.mode.empty()) kv["mode"] = o.mode;
    if (o.efficiency >= 0) kv["efficiency"] = format_real(o.efficiency);
    if (o.split_ratio >= 0) kv["split_ratio"] = format_real(o.split_ratio);
    if (o.background_hz >= 0) kv["background_hz"] = format_real(o.background_hz);
    if (o.power_uw >= 0) kv["power_uw"] = format_real(o.power_uw);
    if (o.seed != std::uint64_t(-1)) kv["seed"] = std::to_string(o.seed);
    if (o.two_level) {
        kv.erase("tau23_ps");
        kv.erase("tau31_ps");
    }

    SimulationConfig cfg;
    cfg.duration_ps = time_ps(num("duration_ps", 0, true));
    cfg.seed = std::uint64_t(num("seed", 0));
    cfg.rates.tau12_ps = num("tau12_ps", 0, true);
    cfg.rates.tau21_ps = num("tau21_ps", 0, true);
    if (kv.count("tau23_ps") != kv.count("tau31_ps"))
        throw config_error("tau23_ps and tau31_ps must be given together");
    if (kv.count("tau23_ps")) {
        cfg.rates.tau23_ps = num("tau23_ps", 0);
        cfg.rates.tau31_ps = num("tau31_ps", 0);
    }
    cfg.chain.efficiency = num("efficiency", 1.0);
    cfg.chain.deadtime_ps = time_ps(num("deadtime_ps", 0));
    cfg.chain.split_ratio = num("split_ratio", 0.5);
    cfg.chain.background_hz = num("background_hz", 0.0);
    const std::string mode = kv.count("mode") ? kv["mode"] : "cw";
    if (mode == "pulsed") {
        cfg.mode = ExcitationMode::pulsed(
            time_ps(num("tau_rep_ps", 0, true)),
            std::uint8_t(num("trigger_channel", kTriggerChannel)));
    } else if (mode == "cw") {
        cfg.mode = ExcitationMode::cw(num("power_uw", 0.0));
    } else {
        throw config_error("mode must be cw or pulsed, got '" + mode + "'");
    }

    const Acquisition acq = simulate_acquisition(cfg);

    HeaderKV prov = base_header("simulate");
    prov.emplace_back("duration_ps", std::to_string(cfg.duration_ps));
    prov.emplace_back("seed", std::to_string(cfg.seed));
    prov.emplace_back("mode", mode);
    prov.emplace_back("tau12_ps", format_real(cfg.rates.tau12_ps));
    prov.emplace_back("tau21_ps", format_real(cfg.rates.tau21_ps));
    if (cfg.rates.three_level()) {
        prov.emplace_back("tau23_ps", format_real(*cfg.rates.tau23_ps));
        prov.emplace_back("tau31_ps", format_real(*cfg.rates.tau31_ps));
    }
    if (cfg.mode.is_pulsed()) prov.emplace_back("tau_rep_ps", std::to_string(cfg.mode.tau_rep_ps));
    prov.emplace_back("efficiency", format_real(cfg.chain.efficiency));
    prov.emplace_back("deadtime_ps", std::to_string(cfg.chain.deadtime_ps));
    prov.emplace_back("split_ratio", format_real(cfg.chain.split_ratio));
    prov.emplace_back("background_hz", format_real(cfg.chain.background_hz));

    const auto fmt = format_for_path(o.out_path);
    write_file_atomic(o.out_path, [&](std::ostream& os) {
        if (fmt == AcquisitionFormat::binary) {
            write_acquisition_binary(acq, os);
        } else {
            for (const auto& [k, v] : prov) os << "# cfg." << k << '=' << v << '\n';
            write_acquisition_text(acq, os);
        }
    });
    std::cout << "wrote " << o.out_path << " (" << acq.records.size() << " records)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// q

struct QOpts {
    std::vector<std::string> inputs;
    std::string windows;
    std::string out_path;
    bool pulsed_align = false;
    std::uint64_t k_max = kMaxWindows;
    bool json = false;
};

int cmd_q(const QOpts& o) {
    const auto windows = parse_duration_list(o.windows);
    std::vector<Acquisition> acqs;
    for (const auto& p : sorted_inputs(o.inputs)) acqs.push_back(load_acquisition(p));
    const QSeries qs = mandel_q_series(acqs, windows, o.pulsed_align, o.k_max);

    auto header = base_header("q");
    header.emplace_back("inputs", join_paths(sorted_inputs(o.inputs)));
    header.emplace_back("T_ps", o.windows);
    header.emplace_back("pulsed_align", o.pulsed_align ? "1" : "0");
    header.emplace_back("k_max", std::to_string(o.k_max));
    if (o.json) {
        emit_json(to_json_string(qs), o.out_path);
    } else {
        write_file_atomic(o.out_path,
                          [&](std::ostream& os) { write_qseries_csv(qs, os, header); });
    }
    return 0;
}

// ---------------------------------------------------------------------------
// pnd

struct PndOpts {
    std::string input, window, out_path;
    bool json = false;
};

int cmd_pnd(const PndOpts& o) {
    const auto acq = load_acquisition(o.input);
    const auto series = merge_channels(acq);
    const auto pnd = photon_number_distribution(series, parse_duration_ps(o.window));
    auto header = base_header("pnd");
    header.emplace_back("input", o.input);
    header.emplace_back("T_ps", std::to_string(parse_duration_ps(o.window)));
    if (o.json) {
        emit_json(to_json_string(pnd), o.out_path);
    } else {
        write_file_atomic(o.out_path,
                          [&](std::ostream& os) { write_pnd_csv(pnd, os, header); });
    }
    return 0;
}

// ---------------------------------------------------------------------------
// g2

struct G2Opts {
    std::string input, out_path;
    int ch_a = 1, ch_b = 2;
    std::string max_lag, bin_width, min_lag;
    std::size_t log_bins = 0;
};

int cmd_g2(const G2Opts& o) {
    if (!o.bin_width.empty() && o.log_bins > 0)
        throw config_error("--bin-width and --log-bins are mutually exclusive");
    if (o.bin_width.empty() && o.log_bins == 0)
        throw config_error("give either --bin-width (linear) or --log-bins (log-spaced)");

    const auto acq = load_acquisition(o.input);
    const auto a = merge_channels(acq, {std::uint8_t(o.ch_a)});
    const auto b = merge_channels(acq, {std::uint8_t(o.ch_b)});
    BinningSpec spec =
        o.log_bins > 0
            ? BinningSpec::logspaced(parse_duration_ps(o.min_lag.empty() ? "100ps" : o.min_lag),
                                     parse_duration_ps(o.max_lag), o.log_bins)
            : BinningSpec::linear(parse_duration_ps(o.max_lag), parse_duration_ps(o.bin_width));
    const auto hist = g2_histogram_cw(a, b, spec);

    auto header = base_header("g2");
    header.emplace_back("input", o.input);
    header.emplace_back("ch_a", std::to_string(o.ch_a));
    header.emplace_back("ch_b", std::to_string(o.ch_b));
    header.emplace_back("max_lag_ps", std::to_string(spec.max_lag_ps));
    if (o.log_bins > 0) {
        header.emplace_back("min_lag_ps", std::to_string(spec.min_lag_ps));
        header.emplace_back("log_bins", std::to_string(spec.n_bins));
    } else {
        header.emplace_back("bin_width_ps", std::to_string(spec.bin_width_ps));
    }
    write_file_atomic(o.out_path,
                      [&](std::ostream& os) { write_histogram_csv(hist, os, header); });
    return 0;
}

// ---------------------------------------------------------------------------
// g2zero

struct G2ZeroOpts {
    std::string input, half_width, out_path;
    std::size_t n_side = 18;
    int ch_a = 1, ch_b = 2;
};

int cmd_g2zero(const G2ZeroOpts& o) {
    const auto acq = load_acquisition(o.input);
    if (!acq.mode.is_pulsed()) throw config_error("g2zero needs a pulsed acquisition");
    const auto a = merge_channels(acq, {std::uint8_t(o.ch_a)});
    const auto b = merge_channels(acq, {std::uint8_t(o.ch_b)});
    const auto trig = merge_channels(acq, {acq.mode.trigger_channel});
    const auto g = g2_zero_pulsed(a, b, trig, acq.mode.tau_rep_ps,
                                  parse_duration_ps(o.half_width), o.n_side);
    std::ostringstream js;
    js << "{\n  \"g2_zero\": " << format_real(g.value)
       << ",\n  \"uncertainty\": " << format_real(g.uncertainty)
       << ",\n  \"zero_peak_area\": " << g.zero_peak_area
       << ",\n  \"mean_side_area\": " << format_real(g.mean_side_area)
       << ",\n  \"n_side_peaks\": " << g.n_side_peaks << "\n}";
    emit_json(js.str(), o.out_path);
    return 0;
}

// ---------------------------------------------------------------------------
// lifetime

struct LifetimeOpts {
    std::string input, bin_width, out_path;
};

int cmd_lifetime(const LifetimeOpts& o) {
    const auto acq = load_acquisition(o.input);
    const auto hist = lifetime_histogram(acq, parse_duration_ps(o.bin_width));
    auto header = base_header("lifetime");
    header.emplace_back("input", o.input);
    write_file_atomic(o.out_path,
                      [&](std::ostream& os) { write_delay_histogram_csv(hist, os, header); });
    return 0;
}

// ---------------------------------------------------------------------------
// filter

struct FilterOpts {
    std::string input, window, out_path;
};

int cmd_filter(const FilterOpts& o) {
    const auto acq = load_acquisition(o.input);
    const auto [start, end] = parse_window(o.window);
    const auto kept = trigger_filter(acq, start, end - start);
    save_acquisition(kept, o.out_path);
    std::cout << "kept " << kept.records.size() << " of " << acq.records.size()
              << " records\n";
    return 0;
}

// ---------------------------------------------------------------------------
// deadtime

struct DeadtimeOpts {
    std::string input, bin_width, out_path;
    int channel = 1;
};

int cmd_deadtime(const DeadtimeOpts& o) {
    const auto acq = load_acquisition(o.input);
    const auto s = merge_channels(acq, {std::uint8_t(o.channel)});
    const auto est = estimate_deadtime(s, parse_duration_ps(o.bin_width));
    std::ostringstream js;
    js << "{\n  \"deadtime_ps\": " << format_real(est.deadtime_ps)
       << ",\n  \"uncertainty_ps\": " << format_real(est.uncertainty_ps)
       << ",\n  \"plateau_level\": " << format_real(est.plateau_level) << "\n}";
    emit_json(js.str(), o.out_path);
    return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitOpts {
    std::string driver;
    std::vector<std::string> inputs;
    std::string out_json, out_curve;
    std::string tau21, tau_rep;
    std::string powers;  // comma separated
    std::vector<std::string> exclude;  // lag windows start:end
};

ExcludedLags parse_excluded(const std::vector<std::string>& items) {
    ExcludedLags out;
    for (const auto& item : items) {
        const auto [a, b] = parse_window(item);
        out.emplace_back(double(a), double(b));
    }
    return out;
}

void write_curve(const std::string& path, const std::vector<double>& x,
                 const std::vector<double>& y, const char* x_name, const HeaderKV& header) {
    if (path.empty()) return;
    write_file_atomic(path, [&](std::ostream& os) {
        for (const auto& [k, v] : header) os << "# " << k << '=' << v << '\n';
        os << x_name << ",model\n";
        for (std::size_t i = 0; i < x.size(); ++i)
            os << format_real(x[i]) << ',' << format_real(y[i]) << '\n';
    });
}

int cmd_fit(const FitOpts& o) {
    auto header = base_header("fit " + o.driver);
    header.emplace_back("inputs", join_paths(o.inputs));
    const auto excluded = parse_excluded(o.exclude);

    FitResult result;
    std::vector<double> cx, cy;
    const char* x_name = "x";

    if (o.driver == "lifetime") {
        std::ifstream is(o.inputs.at(0));
        if (!is) throw data_error("cannot open " + o.inputs.at(0));
        const auto hist = read_delay_histogram_csv(is);
        const auto f = fit_lifetime(hist);
        result = f.fit;
        x_name = "delay_ps";
        for (std::size_t i = 0; i < hist.counts.size(); ++i) {
            const double t = (double(i) + 0.5) * double(hist.bin_width_ps);
            cx.push_back(t);
        }
        const double peak_center =
            cx.at(std::size_t(std::max_element(hist.counts.begin(), hist.counts.end()) -
                              hist.counts.begin()));
        for (double t : cx)
            cy.push_back(t < peak_center
                             ? 0.0
                             : f.amplitude * std::exp(-(t - peak_center) / f.tau_ps) +
                                   f.background_per_bin);
    } else if (o.driver == "g2") {
        std::ifstream is(o.inputs.at(0));
        if (!is) throw data_error("cannot open " + o.inputs.at(0));
        const auto hist = read_histogram_csv(is);
        const auto f = fit_g2_two_exp(hist, excluded);
        result = f.fit;
        x_name = "lag_ps";
        for (std::size_t i = 0; i < hist.counts.size(); ++i) {
            const double c = hist.folded
                                 ? std::sqrt(hist.edges_ps[i] * hist.edges_ps[i + 1])
                                 : 0.5 * (hist.edges_ps[i] + hist.edges_ps[i + 1]);
            cx.push_back(c);
            cy.push_back(g2_two_exp(c, f.params));
        }
    } else if (o.driver == "rate-model") {
        std::vector<CorrelationHistogram> hists;
        for (const auto& p : o.inputs) {
            std::ifstream is(p);
            if (!is) throw data_error("cannot open " + p);
            hists.push_back(read_histogram_csv(is));
        }
        std::vector<double> powers;
        for (const auto& s : split(o.powers, ',')) powers.push_back(std::stod(s));
        const auto f = fit_rate_model(hists, powers, parse_duration_value(o.tau21), excluded);
        result = f.fit;
        x_name = "lag_ps";
        const auto sol = solve_rate_model(f.rates.at(0));
        for (std::size_t i = 0; i < hists[0].counts.size(); ++i) {
            const double c = std::sqrt(hists[0].edges_ps[i] * hists[0].edges_ps[i + 1]);
            cx.push_back(c);
            cy.push_back(background_uncorrect(sol.g2(c), f.sigma.at(0)));
        }
    } else if (o.driver == "pulsed-q") {
        std::ifstream is(o.inputs.at(0));
        if (!is) throw data_error("cannot open " + o.inputs.at(0));
        const auto qs = read_qseries_csv(is);
        const time_ps tau_rep = parse_duration_ps(o.tau_rep);
        const auto f = fit_pulsed_q(qs, tau_rep);
        result = f.fit;
        x_name = "T_ps";
        for (const auto& e : qs.entries) {
            cx.push_back(double(e.window_ps));
            cy.push_back(pulsed_q_model(e.window_ps / tau_rep, f.params));
        }
        if (f.params.beta_alternating())
            std::cerr << "warning: beta = " << f.params.beta()
                      << " >= 2; (1-beta)^k alternates and the model is dubious\n";
    } else if (o.driver == "saturation") {
        std::ifstream is(o.inputs.at(0));
        if (!is) throw data_error("cannot open " + o.inputs.at(0));
        const auto xy = read_xy_csv(is);
        std::vector<double> powers, rates;
        for (const auto& [p, r] : xy) {
            powers.push_back(p);
            rates.push_back(r);
        }
        const auto f = fit_saturation(powers, rates);
        result = f.fit;
        x_name = "power_uw";
        for (double p : powers) {
            cx.push_back(p);
            cy.push_back(saturation_rate(p, f.params));
        }
    } else {
        throw config_error("unknown fit driver '" + o.driver +
                           "' (lifetime, g2, rate-model, pulsed-q, saturation)");
    }

    emit_json(to_json_string(result), o.out_json);
    write_curve(o.out_curve, cx, cy, x_name, header);
    if (!result.converged) {
        std::cerr << "fit did not converge after " << result.iterations << " iterations\n";
        return 3;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// model eval

struct ModelOpts {
    std::string name, params_path, grid, out_path;
};

int cmd_model(const ModelOpts& o) {
    const auto kv = read_config_file(o.params_path);
    auto num = [&](const std::string& key) {
        const auto it = kv.find(key);
        if (it == kv.end()) throw config_error("model params missing '" + key + "'");
        return std::stod(it->second);
    };
    auto num_or = [&](const std::string& key, double fallback) {
        const auto it = kv.find(key);
        return it == kv.end() ? fallback : std::stod(it->second);
    };

    std::function<double(double)> eval;
    const char* x_name = "x";
    if (o.name == "two-exp-g2") {
        TwoExpG2Params p{num("A"), num("B"), num("tau1_ps"), num("tau2_ps")};
        x_name = "lag_ps";
        eval = [p](double x) { return g2_two_exp(x, p); };
    } else if (o.name == "rate-g2") {
        EmitterRates r;
        r.tau12_ps = num("tau12_ps");
        r.tau21_ps = num("tau21_ps");
        if (kv.count("tau23_ps")) {
            r.tau23_ps = num("tau23_ps");
            r.tau31_ps = num("tau31_ps");
        }
        const auto sol = solve_rate_model(r);
        x_name = "lag_ps";
        eval = [sol](double x) { return sol.g2(x); };
    } else if (o.name == "pulsed-q") {
        PulsedQModelParams p{num("eta"), num("tau23_eff_ps"), num("tau31_eff_ps"),
                             num("tau_rep_ps")};
        if (p.beta_alternating())
            std::cerr << "warning: beta = " << p.beta() << " >= 2; model validity dubious\n";
        x_name = "T_ps";
        eval = [p](double x) {
            const auto k = std::uint64_t(std::llround(x / p.tau_rep_ps));
            return pulsed_q_model(std::max<std::uint64_t>(k, 1), p);
        };
    } else if (o.name == "analytic-cw-q") {
        AnalyticCwQParams p{num("a"), num("t1_ps"), num("t2_ps"), num("mean_rate_hz")};
        x_name = "T_ps";
        eval = [p](double x) { return analytic_cw_q(x, p); };
    } else if (o.name == "saturation") {
        SaturationParams p{num("i_inf_hz"), num("p_sat_uw"), num_or("b_hz_per_uw", 0),
                           num_or("c_hz", 0)};
        x_name = "power_uw";
        eval = [p](double x) { return saturation_rate(x, p); };
    } else {
        throw config_error("unknown model '" + o.name +
                           "' (two-exp-g2, rate-g2, pulsed-q, analytic-cw-q, saturation)");
    }

    const Grid grid = parse_grid(o.grid);
    auto header = base_header("model " + o.name);
    header.emplace_back("params", o.params_path);
    header.emplace_back("grid", o.grid);
    write_file_atomic(o.out_path, [&](std::ostream& os) {
        for (const auto& [k, v] : header) os << "# " << k << '=' << v << '\n';
        os << x_name << ",value\n";
        for (double x : grid.points)
            os << format_real(x) << ',' << format_real(eval(x)) << '\n';
    });
    return 0;
}

// ---------------------------------------------------------------------------
// sweep-filter

struct SweepOpts {
    std::vector<std::string> inputs;
    std::string widths;       // comma separated durations
    std::string start;        // filter start delay
    std::string window;       // integration time T (default tau_rep)
    std::string out_path;
    bool include_raw = false;
};

int cmd_sweep_filter(const SweepOpts& o) {
    std::vector<Acquisition> acqs;
    for (const auto& p : sorted_inputs(o.inputs)) acqs.push_back(load_acquisition(p));
    for (const auto& acq : acqs)
        if (!acq.mode.is_pulsed()) throw config_error("sweep-filter needs pulsed acquisitions");

    const time_ps tau_rep = acqs.front().mode.tau_rep_ps;
    const time_ps start = o.start.empty() ? 0 : parse_duration_ps(o.start);
    const time_ps T = o.window.empty() ? tau_rep : parse_duration_ps(o.window);
    const auto widths = parse_duration_list(o.widths);

    struct Row {
        double width_ps;
        double q_mean, q_std;
        std::uint32_t n;
    };
    std::vector<Row> rows;
    auto q_stats = [&](const std::vector<Acquisition>& set) {
        const auto qs = mandel_q_series(set, {T}, true);
        return Row{0.0, qs.entries[0].q_mean, qs.entries[0].q_std,
                   qs.entries[0].n_acquisitions};
    };
    for (const time_ps w : widths) {
        std::vector<Acquisition> filtered;
        filtered.reserve(acqs.size());
        for (const auto& acq : acqs) filtered.push_back(trigger_filter(acq, start, w));
        Row row = q_stats(filtered);
        row.width_ps = double(w);
        rows.push_back(row);
    }
    if (o.include_raw) {
        Row row = q_stats(acqs);
        row.width_ps = double(tau_rep);  // raw data plotted at the full period
        rows.push_back(row);
    }

    auto header = base_header("sweep-filter");
    header.emplace_back("inputs", join_paths(sorted_inputs(o.inputs)));
    header.emplace_back("T_ps", std::to_string(T));
    header.emplace_back("start_ps", std::to_string(start));
    header.emplace_back("include_raw", o.include_raw ? "1" : "0");
    write_file_atomic(o.out_path, [&](std::ostream& os) {
        for (const auto& [k, v] : header) os << "# " << k << '=' << v << '\n';
        os << "filter_width_ps,q_mean,q_std,n_acquisitions\n";
        for (const auto& r : rows)
            os << format_real(r.width_ps) << ',' << format_real(r.q_mean) << ','
               << format_real(r.q_std) << ',' << r.n << '\n';
    });
    return 0;
}

// ---------------------------------------------------------------------------
// convert

struct ConvertOpts {
    std::string input, output;
    std::string in_format, out_format;
};

int cmd_convert(const ConvertOpts& o) {
    auto pick = [](const std::string& forced, const fs::path& path) {
        if (forced == "text") return AcquisitionFormat::text;
        if (forced == "binary") return AcquisitionFormat::binary;
        if (!forced.empty()) throw config_error("format must be text or binary");
        return format_for_path(path);
    };
    const auto acq = load_acquisition(o.input, pick(o.in_format, o.input));
    save_acquisition(acq, o.output, pick(o.out_format, o.output));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"photon statistics toolkit: timestamp simulation and analysis"};
    app.require_subcommand(1);
    std::function<int()> run;

    SimulateOpts sim;
    auto* s = app.add_subcommand("simulate", "generate a simulated acquisition");
    s->add_option("--config", sim.config_path, "flat key=value config file (units: ps, Hz)");
    s->add_option("--out", sim.out_path, "output acquisition path (.txt or .bin)")->required();
    s->add_option("--mode", sim.mode, "cw or pulsed");
    s->add_option("--duration", sim.duration, "acquisition duration (e.g. 10s)");
    s->add_option("--tau-rep", sim.tau_rep, "pulse period (pulsed mode)");
    s->add_option("--tau12", sim.tau12, "excitation lifetime");
    s->add_option("--tau21", sim.tau21, "radiative lifetime");
    s->add_option("--tau23", sim.tau23, "shelving lifetime");
    s->add_option("--tau31", sim.tau31, "deshelving lifetime");
    s->add_option("--deadtime", sim.deadtime, "per-channel detector deadtime");
    s->add_option("--efficiency", sim.efficiency, "total detection efficiency eta");
    s->add_option("--split-ratio", sim.split_ratio, "beamsplitter ratio to channel 1");
    s->add_option("--background", sim.background_hz, "per-channel background rate (Hz)");
    s->add_option("--power", sim.power_uw, "CW power label (uW)");
    s->add_option("--seed", sim.seed, "RNG seed");
    s->add_flag("--two-level", sim.two_level, "disable the shelving branch");
    s->callback([&] { run = [&] { return cmd_simulate(sim); }; });

    QOpts qo;
    auto* q = app.add_subcommand("q", "Mandel Q(T) over one or more acquisitions");
    q->add_option("--input", qo.inputs, "acquisition files")->required()->expected(-1);
    q->add_option("--T", qo.windows, "comma-separated integration times")->required();
    q->add_option("--out", qo.out_path, "output CSV path")->required();
    q->add_flag("--pulsed-align", qo.pulsed_align,
                "require pulsed acquisitions, align windows to the first trigger");
    q->add_option("--k-max", qo.k_max, "cap on the number of windows");
    q->add_flag("--json", qo.json, "emit JSON instead of CSV");
    q->callback([&] { run = [&] { return cmd_q(qo); }; });

    PndOpts po;
    auto* pd = app.add_subcommand("pnd", "photon number distribution at one T");
    pd->add_option("--input", po.input)->required();
    pd->add_option("--T", po.window, "integration time")->required();
    pd->add_option("--out", po.out_path)->required();
    pd->add_flag("--json", po.json);
    pd->callback([&] { run = [&] { return cmd_pnd(po); }; });

    G2Opts go;
    auto* g = app.add_subcommand("g2", "cross-correlation histogram between two channels");
    g->add_option("--input", go.input)->required();
    g->add_option("--out", go.out_path)->required();
    g->add_option("--ch-a", go.ch_a);
    g->add_option("--ch-b", go.ch_b);
    g->add_option("--max-lag", go.max_lag)->required();
    g->add_option("--bin-width", go.bin_width, "linear bin width");
    g->add_option("--min-lag", go.min_lag, "smallest lag for log binning");
    g->add_option("--log-bins", go.log_bins, "number of log-spaced |tau| bins");
    g->callback([&] { run = [&] { return cmd_g2(go); }; });

    G2ZeroOpts zo;
    auto* z = app.add_subcommand("g2zero", "pulsed g2(0) from coincidence peak areas");
    z->add_option("--input", zo.input)->required();
    z->add_option("--half-width", zo.half_width, "peak integration half-width")->required();
    z->add_option("--n-side", zo.n_side, "number of side peaks");
    z->add_option("--ch-a", zo.ch_a);
    z->add_option("--ch-b", zo.ch_b);
    z->add_option("--out", zo.out_path, "JSON output path (default: stdout)");
    z->callback([&] { run = [&] { return cmd_g2zero(zo); }; });

    LifetimeOpts lo;
    auto* lt = app.add_subcommand("lifetime", "delay-after-trigger histogram");
    lt->add_option("--input", lo.input)->required();
    lt->add_option("--bin-width", lo.bin_width)->required();
    lt->add_option("--out", lo.out_path)->required();
    lt->callback([&] { run = [&] { return cmd_lifetime(lo); }; });

    FilterOpts fo;
    auto* fl = app.add_subcommand("filter", "keep detections in a delay window after triggers");
    fl->add_option("--input", fo.input)->required();
    fl->add_option("--window", fo.window, "delay window, e.g. 7:12ns")->required();
    fl->add_option("--out", fo.out_path)->required();
    fl->callback([&] { run = [&] { return cmd_filter(fo); }; });

    DeadtimeOpts dto;
    auto* dt = app.add_subcommand("deadtime", "estimate detector deadtime from gap statistics");
    dt->add_option("--input", dto.input)->required();
    dt->add_option("--channel", dto.channel);
    dt->add_option("--bin-width", dto.bin_width)->default_val("100ps");
    dt->add_option("--out", dto.out_path, "JSON output path (default: stdout)");
    dt->callback([&] { run = [&] { return cmd_deadtime(dto); }; });

    FitOpts fit;
    auto* f = app.add_subcommand("fit", "model fits to analysis outputs");
    f->add_option("driver", fit.driver, "lifetime | g2 | rate-model | pulsed-q | saturation")
        ->required();
    f->add_option("--input", fit.inputs, "input CSV file(s)")->required()->expected(-1);
    f->add_option("--out-json", fit.out_json, "fit result JSON (default: stdout)");
    f->add_option("--out-curve", fit.out_curve, "fitted-curve CSV");
    f->add_option("--tau21", fit.tau21, "fixed radiative lifetime (rate-model)");
    f->add_option("--tau-rep", fit.tau_rep, "pulse period (pulsed-q)");
    f->add_option("--powers", fit.powers, "comma-separated powers in uW (rate-model)");
    f->add_option("--exclude", fit.exclude, "lag windows to exclude, e.g. 17ns:19ns")
        ->expected(-1);
    f->callback([&] { run = [&] { return cmd_fit(fit); }; });

    ModelOpts mo;
    auto* m = app.add_subcommand("model", "evaluate a closed-form model over a grid");
    m->add_option("--name", mo.name,
                  "two-exp-g2 | rate-g2 | pulsed-q | analytic-cw-q | saturation")
        ->required();
    m->add_option("--params", mo.params_path, "flat key=value parameter file")->required();
    m->add_option("--grid", mo.grid, "min:max:lin|log:n")->required();
    m->add_option("--out", mo.out_path)->required();
    m->callback([&] { run = [&] { return cmd_model(mo); }; });

    SweepOpts sw;
    auto* sf = app.add_subcommand("sweep-filter", "Q(T = tau_rep) versus trigger-filter width");
    sf->add_option("--input", sw.inputs, "pulsed acquisition files")->required()->expected(-1);
    sf->add_option("--widths", sw.widths, "comma-separated filter widths")->required();
    sf->add_option("--start", sw.start, "filter start delay (default 0)");
    sf->add_option("--T", sw.window, "integration time (default tau_rep)");
    sf->add_option("--out", sw.out_path)->required();
    sf->add_flag("--include-raw", sw.include_raw, "append an unfiltered reference row");
    sf->callback([&] { run = [&] { return cmd_sweep_filter(sw); }; });

    ConvertOpts co;
    auto* cv = app.add_subcommand("convert", "convert between text and binary timestamps");
    cv->add_option("--input", co.input)->required();
    cv->add_option("--output", co.output)->required();
    cv->add_option("--in-format", co.in_format, "text | binary (default: by extension)");
    cv->add_option("--out-format", co.out_format, "text | binary (default: by extension)");
    cv->callback([&] { run = [&] { return cmd_convert(co); }; });

    try {
        app.parse(argc, argv);
        return run ? run() : 1;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
