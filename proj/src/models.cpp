#include "photonstat/models.hpp"

#include <cmath>

namespace photonstat {

void SaturationParams::validate() const {
    if (!(i_inf_hz > 0)) throw config_error("I_inf must be positive");
    if (!(p_sat_uw > 0)) throw config_error("P_sat must be positive");
}

double saturation_rate(double power_uw, const SaturationParams& p) {
    p.validate();
    if (power_uw < 0) throw config_error("power must be non-negative");
    return p.i_inf_hz * power_uw / (power_uw + p.p_sat_uw) + p.b_hz_per_uw * power_uw + p.c_hz;
}

void TwoExpG2Params::validate() const {
    if (!(tau1_ps > 0) || !(tau2_ps > 0)) throw config_error("tau1 and tau2 must be positive");
}

double g2_two_exp(double tau_ps, const TwoExpG2Params& p) {
    const double at = std::fabs(tau_ps);
    return 1.0 - (1.0 + p.a) * std::exp(-at / p.tau1_ps) + p.b * std::exp(-at / p.tau2_ps);
}

double background_correct(double g2_raw, double sigma) {
    if (!(sigma > 0.0) || sigma > 1.0)
        throw config_error("sigma must be in (0, 1]; sigma = 0 means pure background");
    return (g2_raw + sigma * sigma - 1.0) / (sigma * sigma);
}

double background_uncorrect(double g2_corrected, double sigma) {
    if (!(sigma > 0.0) || sigma > 1.0) throw config_error("sigma must be in (0, 1]");
    return sigma * sigma * g2_corrected + 1.0 - sigma * sigma;
}

double RateModelSolution::rho2(double tau_ps) const {
    std::complex<double> bracket;
    if (degenerate) {
        bracket = (c_plus + c_minus * tau_ps) * std::exp(lambda_plus * tau_ps);
    } else {
        bracket = c_plus * std::exp(lambda_plus * tau_ps) +
                  c_minus * std::exp(lambda_minus * tau_ps);
    }
    return rho2_inf * (1.0 + bracket.real());
}

RateModelSolution solve_rate_model(const EmitterRates& rates) {
    rates.validate();
    RateModelSolution s;

    const double k12 = rates.k12(), k21 = rates.k21();
    if (!rates.three_level()) {
        // rho3 stays empty; rho2 relaxes with the single rate k12 + k21.
        const double r = k12 + k21;
        s.lambda_plus = s.lambda_minus = -r;
        s.c_plus = -1.0;
        s.c_minus = 0.0;
        s.rho2_inf = k12 / r;
        s.rho1_inf = 1.0 - s.rho2_inf;
        s.rho3_inf = 0.0;
        return s;
    }

    const double k23 = rates.k23(), k31 = rates.k31();
    // Reduced system for x = (rho2, rho3) using rho1 = 1 - rho2 - rho3:
    //   x' = M x + (k12, 0),  M = [[-a, -b], [c, -d]]
    const double a = k12 + k21 + k23, b = k12, c = k23, d = k31;
    const double det = a * d + b * c;
    s.rho2_inf = k12 * d / det;
    s.rho3_inf = (c / d) * s.rho2_inf;
    s.rho1_inf = 1.0 - s.rho2_inf - s.rho3_inf;

    const double tr = -(a + d);
    const double disc = tr * tr - 4.0 * det;
    const std::complex<double> root = std::sqrt(std::complex<double>(disc, 0.0));
    s.lambda_plus = 0.5 * (tr + root);
    s.lambda_minus = 0.5 * (tr - root);

    // Deviation u = rho2 - rho2_inf obeys u(0) = -rho2_inf, u'(0) = k12.
    const double u0 = -s.rho2_inf;
    const double v0 = k12;
    const double gap = std::abs(s.lambda_plus - s.lambda_minus);
    if (gap < 1e-9 * std::abs(s.lambda_plus)) {
        // Double-root limit: u(t) = (A + B t) e^{lambda t}.
        s.degenerate = true;
        s.lambda_plus = s.lambda_minus = 0.5 * tr;
        s.c_plus = u0 / s.rho2_inf;
        s.c_minus = (v0 - s.lambda_plus.real() * u0) / s.rho2_inf;
    } else {
        const std::complex<double> alpha =
            (v0 - s.lambda_minus * u0) / (s.lambda_plus - s.lambda_minus);
        const std::complex<double> beta = u0 - alpha;
        s.c_plus = alpha / s.rho2_inf;
        s.c_minus = beta / s.rho2_inf;
    }
    return s;
}

double rate_model_g2(double tau_ps, const EmitterRates& rates) {
    return solve_rate_model(rates).g2(tau_ps);
}

double pulsed_q0(double eta, double g2_0) {
    if (!(eta > 0.0) || eta > 1.0) throw config_error("eta must be in (0, 1]");
    if (g2_0 < 0) throw config_error("g2(0) must be non-negative");
    return eta * (g2_0 / 2.0 - 1.0);
}

void PulsedQModelParams::validate() const {
    if (!(eta > 0.0) || eta > 1.0) throw config_error("eta must be in (0, 1]");
    if (!(tau23_eff_ps > 0) || !(tau31_eff_ps > 0))
        throw config_error("effective lifetimes must be positive");
    if (!(tau_rep_ps > 0)) throw config_error("tau_rep must be positive");
}

double ipow(double base, std::uint64_t exponent) {
    double result = 1.0;
    double acc = base;
    while (exponent) {
        if (exponent & 1) result *= acc;
        acc *= acc;
        exponent >>= 1;
    }
    return result;
}

double pulsed_q_model(std::uint64_t k, const PulsedQModelParams& p) {
    p.validate();
    if (k < 1) throw config_error("k must be >= 1");
    const double beta = p.beta();
    if (!(beta > 0)) throw config_error("beta must be positive");
    const double shelf_weight = p.tau31_eff_ps / (p.tau23_eff_ps + p.tau31_eff_ps);
    const double pw = ipow(1.0 - beta, k);
    const double bracket =
        (2.0 - beta) / beta - (2.0 * (1.0 - beta) / double(k)) * (1.0 - pw) / (beta * beta);
    return p.eta * (shelf_weight * bracket - 1.0);
}

double pulsed_q_model_limit(const PulsedQModelParams& p) {
    p.validate();
    const double beta = p.beta();
    const double shelf_weight = p.tau31_eff_ps / (p.tau23_eff_ps + p.tau31_eff_ps);
    return p.eta * (shelf_weight * (2.0 - beta) / beta - 1.0);
}

void AnalyticCwQParams::validate() const {
    if (!(t1_ps > 0) || !(t2_ps > 0)) throw config_error("t1 and t2 must be positive");
    if (!(mean_rate_hz > 0)) throw config_error("mean rate must be positive");
}

double analytic_cw_q(double window_ps, const AnalyticCwQParams& p) {
    p.validate();
    if (!(window_ps > 0)) throw config_error("T must be positive");
    const double rate_per_ps = p.mean_rate_hz * 1e-12;
    const double t1 = p.t1_ps, t2 = p.t2_ps, a = p.a, T = window_ps;
    const double bracket = t1 * t1 * (1.0 + a) - t2 * t2 * a -
                           (t1 * (1.0 + a) - t2 * a) * T -
                           t1 * t1 * (1.0 + a) * std::exp(-T / t1) +
                           t2 * t2 * a * std::exp(-T / t2);
    return 2.0 * rate_per_ps / T * bracket;
}

}  // namespace photonstat
