#include "photonstat/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace photonstat {

const FitParam& FitResult::param(const std::string& name) const {
    for (const auto& p : params)
        if (p.name == name) return p;
    throw config_error("no fit parameter named " + name);
}

namespace {

double weighted_rss(const std::vector<double>& y, const std::vector<double>& f,
                    const std::vector<double>& w) {
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - f[i];
        s += (w.empty() ? 1.0 : w[i]) * r * r;
    }
    return s;
}

// Gaussian elimination with partial pivoting for the small normal systems.
bool solve_dense(std::vector<double> a, std::vector<double> b, std::size_t p,
                 std::vector<double>& x) {
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < p; ++r)
            if (std::fabs(a[r * p + col]) > std::fabs(a[pivot * p + col])) pivot = r;
        if (std::fabs(a[pivot * p + col]) < 1e-300) return false;
        if (pivot != col) {
            for (std::size_t c = 0; c < p; ++c) std::swap(a[col * p + c], a[pivot * p + c]);
            std::swap(b[col], b[pivot]);
        }
        for (std::size_t r = col + 1; r < p; ++r) {
            const double f = a[r * p + col] / a[col * p + col];
            for (std::size_t c = col; c < p; ++c) a[r * p + c] -= f * a[col * p + c];
            b[r] -= f * b[col];
        }
    }
    x.assign(p, 0.0);
    for (std::size_t r = p; r-- > 0;) {
        double s = b[r];
        for (std::size_t c = r + 1; c < p; ++c) s -= a[r * p + c] * x[c];
        x[r] = s / (a[r * p + r] + (a[r * p + r] == 0 ? 1e-300 : 0));
    }
    return true;
}

void clamp_to_bounds(std::vector<double>& theta, const FitOptions& opts) {
    for (std::size_t j = 0; j < theta.size(); ++j) {
        if (!opts.lower.empty()) theta[j] = std::max(theta[j], opts.lower[j]);
        if (!opts.upper.empty()) theta[j] = std::min(theta[j], opts.upper[j]);
    }
}

std::vector<std::vector<double>> jacobian(const ModelFn& model, const std::vector<double>& theta,
                                          std::size_t n, const FitOptions& opts) {
    const std::size_t p = theta.size();
    std::vector<std::vector<double>> cols(p);
    for (std::size_t j = 0; j < p; ++j) {
        const double h = opts.fd_rel_step * std::max(std::fabs(theta[j]), 1.0);
        auto lo = theta, hi = theta;
        hi[j] += h;
        lo[j] -= h;
        const auto fh = model(hi);
        const auto fl = model(lo);
        cols[j].resize(n);
        for (std::size_t i = 0; i < n; ++i) cols[j][i] = (fh[i] - fl[i]) / (2.0 * h);
    }
    return cols;
}

}  // namespace

LeastSquares least_squares(const ModelFn& model, const std::vector<double>& y,
                           const std::vector<double>& weights, std::vector<double> initial,
                           const FitOptions& opts) {
    const std::size_t n = y.size();
    const std::size_t p = initial.size();
    if (p == 0) throw config_error("least_squares: no parameters");
    std::size_t n_used = n;
    if (!weights.empty()) {
        if (weights.size() != n) throw config_error("least_squares: weight size mismatch");
        n_used = std::size_t(std::count_if(weights.begin(), weights.end(),
                                           [](double w) { return w > 0; }));
    }
    if (n_used < p) throw config_error("least_squares: fewer usable points than parameters");
    if (!opts.lower.empty() || !opts.upper.empty()) {
        auto check = initial;
        clamp_to_bounds(check, opts);
        if (check != initial) throw config_error("least_squares: initial guess violates bounds");
    }

    LeastSquares out;
    auto theta = std::move(initial);
    auto f = model(theta);
    if (f.size() != n) throw config_error("least_squares: model output size mismatch");
    double rss = weighted_rss(y, f, weights);
    out.initial_rss = rss;

    double damping = opts.damping_init;
    bool converged = false;
    int iter = 0;
    for (; iter < opts.max_iterations && !converged; ++iter) {
        const auto J = jacobian(model, theta, n, opts);

        // Normal equations A = J^T W J, g = J^T W r.
        std::vector<double> A(p * p, 0.0), g(p, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double w = weights.empty() ? 1.0 : weights[i];
            if (w == 0) continue;
            const double r = y[i] - f[i];
            for (std::size_t j = 0; j < p; ++j) {
                g[j] += w * J[j][i] * r;
                for (std::size_t k = j; k < p; ++k) A[j * p + k] += w * J[j][i] * J[k][i];
            }
        }
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t k = 0; k < j; ++k) A[j * p + k] = A[k * p + j];

        bool accepted = false;
        while (!accepted) {
            auto Ad = A;
            for (std::size_t j = 0; j < p; ++j)
                Ad[j * p + j] += damping * std::max(A[j * p + j], 1e-30);
            std::vector<double> step;
            if (!solve_dense(Ad, g, p, step)) {
                damping *= 10.0;
                if (damping > 1e14) break;
                continue;
            }
            auto trial = theta;
            for (std::size_t j = 0; j < p; ++j) trial[j] += step[j];
            clamp_to_bounds(trial, opts);
            const auto ft = model(trial);
            const double trial_rss = weighted_rss(y, ft, weights);
            if (trial_rss <= rss) {
                accepted = true;
                damping = std::max(damping / 10.0, 1e-15);

                double max_rel_step = 0;
                for (std::size_t j = 0; j < p; ++j)
                    max_rel_step = std::max(
                        max_rel_step,
                        std::fabs(trial[j] - theta[j]) / std::max(std::fabs(theta[j]), 1.0));
                const double rel_impr = (rss - trial_rss) / std::max(rss, 1e-300);
                theta = std::move(trial);
                f = ft;
                rss = trial_rss;
                if (rel_impr < opts.tol_residual || max_rel_step < opts.tol_params)
                    converged = true;
            } else {
                damping *= 10.0;
                if (damping > 1e14) break;
            }
        }
        if (!accepted) break;  // stalled: no descent direction at max damping
    }

    out.params = theta;
    out.rss = rss;
    out.converged = converged;
    out.iterations = iter;

    // Standard errors from the local quadratic approximation at the solution.
    out.std_errors.assign(p, 0.0);
    out.std_errors_ok = false;
    if (n_used > p) {
        const auto J = jacobian(model, theta, n, opts);
        std::vector<double> A(p * p, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double w = weights.empty() ? 1.0 : weights[i];
            if (w == 0) continue;
            for (std::size_t j = 0; j < p; ++j)
                for (std::size_t k = 0; k < p; ++k) A[j * p + k] += w * J[j][i] * J[k][i];
        }
        const double sigma2 = rss / double(n_used - p);
        bool ok = true;
        for (std::size_t j = 0; j < p && ok; ++j) {
            std::vector<double> e(p, 0.0), col;
            e[j] = 1.0;
            if (!solve_dense(A, e, p, col) || col[j] < 0) {
                ok = false;
                break;
            }
            out.std_errors[j] = std::sqrt(sigma2 * col[j]);
        }
        out.std_errors_ok = ok;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parameter transforms shared by the drivers: lifetimes and rates are fitted
// in log-space (positivity without bounds handling), fractions via a logistic.

namespace {

enum class Xf { lin, log, logit };

struct ParamSpec {
    std::string name;
    std::string unit;
    double init = 0;  // external (physical) value
    Xf xf = Xf::lin;
};

double to_internal(double v, Xf x) {
    switch (x) {
        case Xf::lin: return v;
        case Xf::log: return std::log(v);
        case Xf::logit: return std::log(v / (1.0 - v));
    }
    return v;
}

double to_external(double t, Xf x) {
    switch (x) {
        case Xf::lin: return t;
        case Xf::log: return std::exp(t);
        case Xf::logit: return 1.0 / (1.0 + std::exp(-t));
    }
    return t;
}

double dext_dint(double t, Xf x) {
    switch (x) {
        case Xf::lin: return 1.0;
        case Xf::log: return std::exp(t);
        case Xf::logit: {
            const double s = 1.0 / (1.0 + std::exp(-t));
            return s * (1.0 - s);
        }
    }
    return 1.0;
}

using ExternalModel = std::function<std::vector<double>(const std::vector<double>&)>;

FitResult run_fit(const std::vector<ParamSpec>& specs, const ExternalModel& model,
                  const std::vector<double>& y, const std::vector<double>& w,
                  const FitOptions& opts = {}) {
    std::vector<double> init;
    init.reserve(specs.size());
    for (const auto& s : specs) init.push_back(to_internal(s.init, s.xf));

    ModelFn wrapped = [&](const std::vector<double>& theta) {
        std::vector<double> ext(theta.size());
        for (std::size_t j = 0; j < theta.size(); ++j) ext[j] = to_external(theta[j], specs[j].xf);
        return model(ext);
    };
    const LeastSquares ls = least_squares(wrapped, y, w, init, opts);

    FitResult fr;
    fr.rss = ls.rss;
    fr.initial_rss = ls.initial_rss;
    fr.converged = ls.converged;
    fr.iterations = ls.iterations;
    fr.params.resize(specs.size());
    for (std::size_t j = 0; j < specs.size(); ++j) {
        auto& p = fr.params[j];
        p.name = specs[j].name;
        p.unit = specs[j].unit;
        p.value = to_external(ls.params[j], specs[j].xf);
        p.std_error_ok = ls.std_errors_ok;
        p.std_error = ls.std_errors_ok
                          ? std::fabs(dext_dint(ls.params[j], specs[j].xf)) * ls.std_errors[j]
                          : 0.0;
    }
    return fr;
}

bool lag_excluded(double abs_lag_ps, const ExcludedLags& excluded) {
    for (const auto& [lo, hi] : excluded)
        if (abs_lag_ps >= lo && abs_lag_ps <= hi) return true;
    return false;
}

// Bin centers and fit weights in normalised-g2 units. Poisson counting noise:
// var(normalised) = counts / denom^2, so weight = denom^2 / max(counts, 1).
struct HistData {
    std::vector<double> centers_ps;  // |tau|, folded
    std::vector<double> values;
    std::vector<double> weights;
};

HistData histogram_fit_data(const CorrelationHistogram& h, const ExcludedLags& excluded) {
    HistData d;
    const auto norm = h.normalized();
    const double pair_density = double(h.n_a) * double(h.n_b) / double(h.duration_ps);
    const double fold = h.folded ? 2.0 : 1.0;
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        double center;
        if (h.folded) {
            center = std::sqrt(h.edges_ps[i] * h.edges_ps[i + 1]);
        } else {
            center = std::fabs(0.5 * (h.edges_ps[i] + h.edges_ps[i + 1]));
        }
        const double denom = pair_density * fold * (h.edges_ps[i + 1] - h.edges_ps[i]);
        d.centers_ps.push_back(center);
        d.values.push_back(norm[i]);
        d.weights.push_back(lag_excluded(center, excluded)
                                ? 0.0
                                : denom * denom / double(std::max<std::uint64_t>(h.counts[i], 1)));
    }
    return d;
}

}  // namespace

// ---------------------------------------------------------------------------

LifetimeFit fit_lifetime(const DelayHistogram& hist) {
    if (hist.counts.empty()) throw data_error("lifetime fit: empty histogram");
    const auto peak_it = std::max_element(hist.counts.begin(), hist.counts.end());
    if (*peak_it == 0) throw data_error("lifetime fit: peak not identifiable");
    const std::size_t i0 = std::size_t(peak_it - hist.counts.begin());
    const std::size_t n = hist.counts.size() - i0;
    if (n < 4) throw data_error("lifetime fit: too few post-peak bins");

    std::vector<double> x(n), y(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = double(i) * double(hist.bin_width_ps);
        y[i] = double(hist.counts[i0 + i]);
        w[i] = 1.0 / std::max(y[i], 1.0);
    }

    // Seed tau from the 1/e drop, the background from the tail.
    double tau0 = double(hist.bin_width_ps) * double(n) / 4.0;
    const double peak = y[0];
    for (std::size_t i = 1; i < n; ++i) {
        if (y[i] < peak / std::exp(1.0)) {
            tau0 = std::max(x[i], double(hist.bin_width_ps));
            break;
        }
    }
    double bg0 = 0;
    const std::size_t tail = std::max<std::size_t>(n / 10, 1);
    for (std::size_t i = n - tail; i < n; ++i) bg0 += y[i];
    bg0 /= double(tail);

    const std::vector<ParamSpec> specs = {
        {"amplitude", "counts", std::max(peak - bg0, 1.0), Xf::log},
        {"tau", "ps", tau0, Xf::log},
        {"background", "counts", bg0, Xf::lin},
    };
    auto model = [&](const std::vector<double>& q) {
        std::vector<double> f(n);
        for (std::size_t i = 0; i < n; ++i) f[i] = q[0] * std::exp(-x[i] / q[1]) + q[2];
        return f;
    };

    LifetimeFit out;
    out.fit = run_fit(specs, model, y, w);
    out.tau_ps = out.fit.value("tau");
    out.amplitude = out.fit.value("amplitude");
    out.background_per_bin = out.fit.value("background");
    if (hist.n_triggers > 0)
        out.background_rate_hz = out.background_per_bin /
                                 (double(hist.bin_width_ps) * 1e-12 * double(hist.n_triggers));
    return out;
}

TwoExpG2Fit fit_g2_two_exp(const CorrelationHistogram& hist, const ExcludedLags& excluded) {
    HistData d = histogram_fit_data(hist, excluded);
    const std::size_t usable =
        std::size_t(std::count_if(d.weights.begin(), d.weights.end(),
                                  [](double w) { return w > 0; }));
    if (usable < 8) throw data_error("g2 fit: fewer than 8 usable bins");

    // Order by |tau| so the seed scans are well-defined for linear binning too.
    std::vector<std::size_t> order(d.centers_ps.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return d.centers_ps[a] < d.centers_ps[b]; });

    double ymin = 1e300, ymax = -1e300;
    for (std::size_t i : order) {
        if (d.weights[i] == 0) continue;
        ymin = std::min(ymin, d.values[i]);
        ymax = std::max(ymax, d.values[i]);
    }
    const double a0 = std::clamp(1.0 - ymin, 0.05, 3.0);
    const double b0 = std::clamp(ymax - 1.0, 0.02, 5.0);

    // tau1 from the half-recovery lag of the antibunching dip.
    double tau1_0 = 0;
    for (std::size_t i : order) {
        if (d.weights[i] == 0) continue;
        if (d.values[i] >= 1.0 - a0 / 2.0) {
            tau1_0 = d.centers_ps[i] / std::log(2.0);
            break;
        }
    }
    if (tau1_0 <= 0) tau1_0 = d.centers_ps[order[order.size() / 4]];

    // tau2 from the tail decay of the bunching excess.
    double tau2_0 = 0;
    double peak_lag = 0, peak_excess = 0;
    for (std::size_t i : order) {
        if (d.weights[i] == 0 || d.centers_ps[i] < 3.0 * tau1_0) continue;
        if (d.values[i] - 1.0 > peak_excess) {
            peak_excess = d.values[i] - 1.0;
            peak_lag = d.centers_ps[i];
        }
    }
    if (peak_excess > 0) {
        for (std::size_t i : order) {
            if (d.weights[i] == 0 || d.centers_ps[i] <= peak_lag) continue;
            if (d.values[i] - 1.0 <= peak_excess / 2.0) {
                tau2_0 = (d.centers_ps[i] - peak_lag) / std::log(2.0) + peak_lag;
                break;
            }
        }
    }
    if (tau2_0 <= tau1_0) tau2_0 = 30.0 * tau1_0;

    const std::vector<ParamSpec> specs = {
        {"A", "", a0, Xf::lin},
        {"B", "", b0, Xf::lin},
        {"tau1", "ps", tau1_0, Xf::log},
        {"tau2", "ps", tau2_0, Xf::log},
    };
    auto model = [&](const std::vector<double>& q) {
        TwoExpG2Params p{q[0], q[1], q[2], q[3]};
        std::vector<double> f(d.centers_ps.size());
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = g2_two_exp(d.centers_ps[i], p);
        return f;
    };

    TwoExpG2Fit out;
    out.fit = run_fit(specs, model, d.values, d.weights);
    out.params = {out.fit.value("A"), out.fit.value("B"), out.fit.value("tau1"),
                  out.fit.value("tau2")};
    out.g2_zero = out.params.at_zero();
    return out;
}

RateModelFit fit_rate_model(const std::vector<CorrelationHistogram>& hists,
                            const std::vector<double>& powers_uw, double tau21_ps,
                            const ExcludedLags& excluded) {
    if (hists.empty() || hists.size() != powers_uw.size())
        throw config_error("rate-model fit: need one histogram per power");
    if (!(tau21_ps > 0)) throw config_error("rate-model fit: tau21 must be positive");

    const std::size_t np = hists.size();
    std::vector<HistData> data;
    std::vector<double> y, w;
    std::vector<std::size_t> offsets;
    for (const auto& h : hists) {
        offsets.push_back(y.size());
        data.push_back(histogram_fit_data(h, excluded));
        y.insert(y.end(), data.back().values.begin(), data.back().values.end());
        w.insert(w.end(), data.back().weights.begin(), data.back().weights.end());
    }

    double mean_power = 0;
    for (double p : powers_uw) mean_power += p;
    mean_power /= double(np);

    std::vector<ParamSpec> specs = {
        {"alpha", "1/(ps uW)", 1.0 / (mean_power * 150.0 * tau21_ps), Xf::log}};
    for (std::size_t p = 0; p < np; ++p) {
        const std::string tag = "_" + std::to_string(p);
        specs.push_back({"tau23" + tag, "ps", tau21_ps, Xf::log});
        specs.push_back({"tau31" + tag, "ps", 100.0 * tau21_ps, Xf::log});
        specs.push_back({"sigma" + tag, "", 0.9, Xf::logit});
    }

    auto model = [&](const std::vector<double>& q) {
        std::vector<double> f(y.size());
        for (std::size_t p = 0; p < np; ++p) {
            const double alpha = q[0];
            EmitterRates r = EmitterRates::three_levels(1.0 / (alpha * powers_uw[p]), tau21_ps,
                                                        q[1 + 3 * p], q[2 + 3 * p]);
            const double sigma = q[3 + 3 * p];
            const RateModelSolution sol = solve_rate_model(r);
            for (std::size_t i = 0; i < data[p].centers_ps.size(); ++i)
                f[offsets[p] + i] =
                    background_uncorrect(sol.g2(data[p].centers_ps[i]), sigma);
        }
        return f;
    };

    RateModelFit out;
    out.fit = run_fit(specs, model, y, w);
    out.alpha_per_uw_ps = out.fit.value("alpha");
    out.alpha_error_available = np > 1 && out.fit.param("alpha").std_error_ok;
    if (np == 1)
        for (auto& p : out.fit.params)
            if (p.name == "alpha") p.std_error_ok = false;
    for (std::size_t p = 0; p < np; ++p) {
        const std::string tag = "_" + std::to_string(p);
        out.rates.push_back(EmitterRates::three_levels(
            1.0 / (out.alpha_per_uw_ps * powers_uw[p]), tau21_ps,
            out.fit.value("tau23" + tag), out.fit.value("tau31" + tag)));
        out.sigma.push_back(out.fit.value("sigma" + tag));
    }
    return out;
}

PulsedQFit fit_pulsed_q(const QSeries& series, time_ps tau_rep_ps) {
    if (tau_rep_ps == 0) throw config_error("pulsed-q fit: tau_rep must be positive");
    std::vector<double> ks, y;
    for (const auto& e : series.entries) {
        if (e.window_ps % tau_rep_ps != 0)
            throw config_error("pulsed-q fit: T = " + std::to_string(e.window_ps) +
                               " ps is not a multiple of tau_rep");
        ks.push_back(double(e.window_ps / tau_rep_ps));
        y.push_back(e.q_mean);
    }
    if (y.size() < 3) throw data_error("pulsed-q fit: need at least 3 Q points");

    double q1 = y.front();
    double qmin = *std::min_element(y.begin(), y.end());
    const double eta0 = std::clamp(6.0 * std::fabs(std::min(q1, qmin)), 1e-9, 0.5);

    const std::vector<ParamSpec> specs = {
        {"eta", "", eta0, Xf::log},
        {"tau23_eff", "ps", double(tau_rep_ps), Xf::log},
        {"tau31_eff", "ps", 5.0 * double(tau_rep_ps), Xf::log},
    };
    auto model = [&](const std::vector<double>& q) {
        PulsedQModelParams p{q[0], q[1], q[2], double(tau_rep_ps)};
        std::vector<double> f(ks.size());
        for (std::size_t i = 0; i < ks.size(); ++i)
            f[i] = pulsed_q_model(std::uint64_t(ks[i]), p);
        return f;
    };

    PulsedQFit out;
    out.fit = run_fit(specs, model, y, {});
    // The shelving model cannot produce all-positive Q: Q(tau_rep) < 0 always.
    if (*std::min_element(y.begin(), y.end()) >= 0) out.fit.converged = false;
    out.params = {out.fit.value("eta"), out.fit.value("tau23_eff"), out.fit.value("tau31_eff"),
                  double(tau_rep_ps)};
    return out;
}

SaturationFit fit_saturation(const std::vector<double>& powers_uw,
                             const std::vector<double>& rates_hz) {
    if (powers_uw.size() != rates_hz.size())
        throw config_error("saturation fit: size mismatch");
    if (powers_uw.size() < 4) throw config_error("saturation fit: need at least 4 points");
    const auto [rmin, rmax] = std::minmax_element(rates_hz.begin(), rates_hz.end());
    if (*rmax - *rmin <= 1e-12 * std::max(std::fabs(*rmax), 1.0))
        throw data_error("degenerate data: all rates equal");

    auto sorted_p = powers_uw;
    std::sort(sorted_p.begin(), sorted_p.end());
    const double psat0 = std::max(sorted_p[sorted_p.size() / 2], 1e-6);

    const std::vector<ParamSpec> specs = {
        {"I_inf", "Hz", 2.0 * *rmax, Xf::log},
        {"P_sat", "uW", psat0, Xf::log},
        {"b", "Hz/uW", 0.0, Xf::lin},
        {"c", "Hz", 0.0, Xf::lin},
    };
    auto model = [&](const std::vector<double>& q) {
        std::vector<double> f(powers_uw.size());
        for (std::size_t i = 0; i < f.size(); ++i)
            f[i] = q[0] * powers_uw[i] / (powers_uw[i] + q[1]) + q[2] * powers_uw[i] + q[3];
        return f;
    };

    SaturationFit out;
    out.fit = run_fit(specs, model, rates_hz, {});
    out.params = {out.fit.value("I_inf"), out.fit.value("P_sat"), out.fit.value("b"),
                  out.fit.value("c")};
    return out;
}

}  // namespace photonstat
