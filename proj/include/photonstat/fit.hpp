#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "photonstat/models.hpp"
#include "photonstat/stats.hpp"
#include "photonstat/types.hpp"

namespace photonstat {

struct FitParam {
    std::string name;
    double value = 0;
    std::string unit;
    double std_error = 0;
    bool std_error_ok = false;
};

struct FitResult {
    std::vector<FitParam> params;
    double rss = 0;  // weighted residual sum of squares at the solution
    double initial_rss = 0;
    bool converged = false;
    int iterations = 0;

    const FitParam& param(const std::string& name) const;
    double value(const std::string& name) const { return param(name).value; }
};

struct FitOptions {
    int max_iterations = 500;
    double damping_init = 1e-3;   // x10 on rejected step, /10 on accepted step
    double tol_residual = 1e-10;  // relative residual change
    double tol_params = 1e-8;     // relative parameter change
    double fd_rel_step = 1e-6;    // central-difference relative step
    std::vector<double> lower, upper;  // optional box bounds (empty = none)
};

// model(theta) returns the predicted value for every data point.
using ModelFn = std::function<std::vector<double>(const std::vector<double>&)>;

struct LeastSquares {
    std::vector<double> params;
    std::vector<double> std_errors;  // valid only when std_errors_ok
    bool std_errors_ok = false;
    double rss = 0;
    double initial_rss = 0;
    bool converged = false;
    int iterations = 0;
};

// Damped Gauss-Newton minimiser of sum_i w_i (y_i - model_i(theta))^2.
// Deterministic; an empty weight vector means uniform weights. Non-convergence
// is reported through the flag, with the best point found still returned.
LeastSquares least_squares(const ModelFn& model, const std::vector<double>& y,
                           const std::vector<double>& weights, std::vector<double> initial,
                           const FitOptions& opts = {});

// Lag windows (in ps, folded onto |tau|) whose bins get zero weight.
using ExcludedLags = std::vector<std::pair<double, double>>;

// ---------------------------------------------------------------------------
// Fit drivers

struct LifetimeFit {
    FitResult fit;
    double tau_ps = 0;
    double amplitude = 0;           // counts per bin at the peak
    double background_per_bin = 0;  // flat floor, counts per bin
    double background_rate_hz = 0;  // same floor as a rate over the whole stream
};

// Single exponential + flat background over the post-peak region of a
// delay-after-trigger histogram.
LifetimeFit fit_lifetime(const DelayHistogram& hist);

struct TwoExpG2Fit {
    FitResult fit;
    TwoExpG2Params params;
    double g2_zero = 0;  // B - A
};

TwoExpG2Fit fit_g2_two_exp(const CorrelationHistogram& hist,
                           const ExcludedLags& excluded = {});

struct RateModelFit {
    FitResult fit;
    std::vector<EmitterRates> rates;  // one per power, tau12 = 1/(alpha P)
    std::vector<double> sigma;        // per-power background fraction
    double alpha_per_uw_ps = 0;       // shared k12 = alpha * P coefficient
    bool alpha_error_available = false;
};

// Constrained multi-power fit of the three-level rate model to log-binned
// normalised g2 histograms: tau21 fixed, k12 = alpha * P shared across powers,
// per-power tau23/tau31/sigma free. The model is the rate-equation g2 pushed
// back through the background correction with sigma a fit parameter.
RateModelFit fit_rate_model(const std::vector<CorrelationHistogram>& hists,
                            const std::vector<double>& powers_uw, double tau21_ps,
                            const ExcludedLags& excluded = {});

struct PulsedQFit {
    FitResult fit;
    PulsedQModelParams params;
};

// Shelving-model fit to pulsed Q(T) sampled at T = k tau_rep.
PulsedQFit fit_pulsed_q(const QSeries& series, time_ps tau_rep_ps);

struct SaturationFit {
    FitResult fit;
    SaturationParams params;
};

// Saturation-curve fit to (power, rate) points; needs >= 4 points.
SaturationFit fit_saturation(const std::vector<double>& powers_uw,
                             const std::vector<double>& rates_hz);

}  // namespace photonstat
