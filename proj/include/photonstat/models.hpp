#pragma once

#include <complex>
#include <cstdint>

#include "photonstat/types.hpp"

namespace photonstat {

// ---------------------------------------------------------------------------
// Saturation curve I(P) = I_inf * P / (P + P_sat) + b*P + c

struct SaturationParams {
    double i_inf_hz = 0;
    double p_sat_uw = 0;
    double b_hz_per_uw = 0;
    double c_hz = 0;
    void validate() const;
};

double saturation_rate(double power_uw, const SaturationParams& p);

// ---------------------------------------------------------------------------
// Two-exponential g2: 1 - (1+A) exp(-|tau|/tau1) + B exp(-|tau|/tau2)

struct TwoExpG2Params {
    double a = 0;  // antibunching amplitude
    double b = 0;  // bunching amplitude
    double tau1_ps = 0;
    double tau2_ps = 0;
    double at_zero() const { return b - a; }
    void validate() const;
};

double g2_two_exp(double tau_ps, const TwoExpG2Params& p);

// ---------------------------------------------------------------------------
// Poissonian-background correction of a raw g2 value

struct BackgroundRatio {
    double sbr = 0;  // signal-to-background ratio
    double sigma() const { return sbr / (1.0 + sbr); }
};

// corrected = (raw + sigma^2 - 1) / sigma^2; sigma in (0, 1].
double background_correct(double g2_raw, double sigma);
// raw = sigma^2 * corrected + 1 - sigma^2; composes with the above to identity.
double background_uncorrect(double g2_corrected, double sigma);

// ---------------------------------------------------------------------------
// Three-level rate-equation g2 (population rho2 normalised by steady state)

struct RateModelSolution {
    // rho2(tau) = rho2_inf * (1 + Re[c_plus e^{l+ tau} + c_minus e^{l- tau}]);
    // when degenerate, the bracket is (c_plus + c_minus * tau) e^{l+ tau}.
    std::complex<double> lambda_plus, lambda_minus;  // per ps, Re < 0
    std::complex<double> c_plus, c_minus;
    double rho1_inf = 0, rho2_inf = 0, rho3_inf = 0;
    bool degenerate = false;  // double-root limiting form in use

    double rho2(double tau_ps) const;
    double g2(double tau_ps) const { return rho2(tau_ps) / rho2_inf; }
};

// Eigen-analysis of the conservation-reduced 2x2 system with rho1(0) = 1.
RateModelSolution solve_rate_model(const EmitterRates& rates);

double rate_model_g2(double tau_ps, const EmitterRates& rates);

// ---------------------------------------------------------------------------
// Pulsed Mandel Q

// Q over one pulse period: eta * (g2_0 / 2 - 1).
double pulsed_q0(double eta, double g2_0);

// Shelving model for pulsed Q at integration time T = k * tau_rep.
struct PulsedQModelParams {
    double eta = 0;            // total detection efficiency, (0, 1]
    double tau23_eff_ps = 0;   // effective shelving lifetime
    double tau31_eff_ps = 0;   // effective deshelving lifetime
    double tau_rep_ps = 0;

    double beta() const { return tau_rep_ps * (1.0 / tau23_eff_ps + 1.0 / tau31_eff_ps); }
    // beta >= 2 makes (1-beta)^k alternate; the model value is still defined.
    bool beta_alternating() const { return beta() >= 2.0; }
    void validate() const;
};

double pulsed_q_model(std::uint64_t k, const PulsedQModelParams& p);
double pulsed_q_model_limit(const PulsedQModelParams& p);  // k -> infinity

// ---------------------------------------------------------------------------
// Analytic CW Q(T) for an ideal antibunched emitter with one bunching term

struct AnalyticCwQParams {
    double a = 0;  // bunching amplitude (g2(0) = 0 by construction)
    double t1_ps = 0;
    double t2_ps = 0;
    double mean_rate_hz = 0;
    void validate() const;
};

double analytic_cw_q(double window_ps, const AnalyticCwQParams& p);

// Integer power by squaring; exact for negative bases (no log shortcut).
double ipow(double base, std::uint64_t exponent);

}  // namespace photonstat
