#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "photonstat/fit.hpp"

using namespace photonstat;

namespace {

constexpr double kNs = 1'000.0;

// Synthetic folded log-binned histogram whose normalised values follow the
// given g2 model; counts are scaled so Poisson weights behave sensibly.
CorrelationHistogram synthetic_g2_histogram(const std::function<double(double)>& g2,
                                            double min_lag_ps, double max_lag_ps,
                                            std::size_t n_bins, double counts_scale,
                                            double noise_frac, std::uint64_t noise_seed) {
    CorrelationHistogram h;
    h.folded = true;
    h.duration_ps = 100'000'000'000ULL;  // 100 s
    h.n_a = 500'000;
    h.n_b = 500'000;
    const double ratio = std::log(max_lag_ps / min_lag_ps) / double(n_bins);
    h.edges_ps.resize(n_bins + 1);
    for (std::size_t i = 0; i <= n_bins; ++i)
        h.edges_ps[i] = min_lag_ps * std::exp(double(i) * ratio);
    const double pair_density = double(h.n_a) * double(h.n_b) / double(h.duration_ps);
    oracles::Noise noise(noise_seed);
    for (std::size_t i = 0; i < n_bins; ++i) {
        const double center = std::sqrt(h.edges_ps[i] * h.edges_ps[i + 1]);
        const double denom = pair_density * 2.0 * (h.edges_ps[i + 1] - h.edges_ps[i]);
        double v = g2(center) * counts_scale * denom;
        if (noise_frac > 0) v *= 1.0 + noise.gaussian(noise_frac);
        h.counts.push_back(std::uint64_t(std::llround(std::max(v, 0.0))));
    }
    // Rescale the pair metadata so the plateau normalises back to ~1.
    h.n_a = std::uint64_t(double(h.n_a) * counts_scale);
    return h;
}

}  // namespace

TEST_CASE("least squares solves an exact line in closed form") {
    const std::vector<double> x{0, 1, 2, 3, 4};
    std::vector<double> y;
    for (double xi : x) y.push_back(2.0 * xi + 1.0);
    auto model = [&](const std::vector<double>& q) {
        std::vector<double> f;
        for (double xi : x) f.push_back(q[0] * xi + q[1]);
        return f;
    };
    const auto r = least_squares(model, y, {}, {0.5, 0.0});
    CHECK(r.converged);
    CHECK(r.params[0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(r.params[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.rss < 1e-16);
    CHECK(r.rss <= r.initial_rss);
}

TEST_CASE("least squares matches the normal-equations oracle on a quadratic") {
    // y = a x^2 + b x + c is linear in its parameters, so the weighted normal
    // equations solved directly are an exact oracle.
    const std::size_t n = 40;
    std::vector<double> x(n), y(n), w(n);
    oracles::Noise noise(12);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = -2.0 + 4.0 * double(i) / double(n - 1);
        y[i] = 1.3 * x[i] * x[i] - 0.7 * x[i] + 0.25 + noise.gaussian(0.05);
        w[i] = 0.5 + noise.uniform();
    }

    double ata[9] = {0}, atb[3] = {0};
    for (std::size_t i = 0; i < n; ++i) {
        const double phi[3] = {x[i] * x[i], x[i], 1.0};
        for (int r = 0; r < 3; ++r) {
            atb[r] += w[i] * phi[r] * y[i];
            for (int c = 0; c < 3; ++c) ata[3 * r + c] += w[i] * phi[r] * phi[c];
        }
    }
    // Gaussian elimination on the 3x3 system.
    double m[3][4];
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m[r][c] = ata[3 * r + c];
        m[r][3] = atb[r];
    }
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(m[r][col]) > std::fabs(m[piv][col])) piv = r;
        std::swap(m[col], m[piv]);
        for (int r = col + 1; r < 3; ++r) {
            const double f = m[r][col] / m[col][col];
            for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
        }
    }
    double oracle[3];
    for (int r = 2; r >= 0; --r) {
        double s = m[r][3];
        for (int c = r + 1; c < 3; ++c) s -= m[r][c] * oracle[c];
        oracle[r] = s / m[r][r];
    }

    auto model = [&](const std::vector<double>& q) {
        std::vector<double> f(n);
        for (std::size_t i = 0; i < n; ++i) f[i] = q[0] * x[i] * x[i] + q[1] * x[i] + q[2];
        return f;
    };
    const auto r = least_squares(model, y, w, {1.0, 0.0, 0.0});
    for (int j = 0; j < 3; ++j) CHECK(r.params[j] == doctest::Approx(oracle[j]).epsilon(1e-8));
}

TEST_CASE("descent contract: the returned residual never exceeds the initial one") {
    oracles::Noise noise(3);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> x, y;
        for (int i = 0; i < 30; ++i) {
            x.push_back(0.1 * i);
            y.push_back(std::exp(-0.4 * x.back()) + noise.gaussian(0.2));
        }
        auto model = [&](const std::vector<double>& q) {
            std::vector<double> f;
            for (double xi : x) f.push_back(q[0] * std::exp(-q[1] * xi));
            return f;
        };
        const auto r = least_squares(model, y, {},
                                     {0.2 + noise.uniform(), 0.1 + noise.uniform()});
        CHECK(r.rss <= r.initial_rss);
    }
}

TEST_CASE("lifetime fit recovers tau and background from sampled decays") {
    // 1e5 exponential delays with tau = 2.7 ns plus a flat background floor.
    DelayHistogram h;
    h.bin_width_ps = 100;
    h.duration_ps = 10'000'000'000ULL;
    h.n_triggers = 100'000;
    h.counts.assign(1'000, 0);  // one 100 ns period
    oracles::Noise noise(21);
    for (int i = 0; i < 100'000; ++i) {
        const double d = noise.exponential(2.7 * kNs);
        const auto bin = std::size_t(d / double(h.bin_width_ps));
        if (bin < h.counts.size()) ++h.counts[bin];
    }
    for (auto& c : h.counts) c += 40;  // flat background, 40 counts per bin
    h.n_detections = 0;
    for (auto c : h.counts) h.n_detections += c;

    const auto f = fit_lifetime(h);
    CHECK(f.fit.converged);
    CHECK(f.tau_ps == doctest::Approx(2.7 * kNs).epsilon(0.05));
    CHECK(f.background_per_bin == doctest::Approx(40.0).epsilon(0.15));
    CHECK(f.fit.rss <= f.fit.initial_rss);
    // Background floor as a rate: 40 counts / (100 ps * 1e5 sweeps).
    CHECK(f.background_rate_hz ==
          doctest::Approx(40.0 / (100e-12 * 1e5)).epsilon(0.15));
}

TEST_CASE("lifetime fit: zero-background data stays consistent with zero") {
    DelayHistogram h;
    h.bin_width_ps = 100;
    h.counts.assign(1'000, 0);
    oracles::Noise noise(22);
    for (int i = 0; i < 200'000; ++i) {
        const double d = noise.exponential(2.7 * kNs);
        const auto bin = std::size_t(d / double(h.bin_width_ps));
        if (bin < h.counts.size()) ++h.counts[bin];
    }
    const auto f = fit_lifetime(h);
    const auto& bg = f.fit.param("background");
    REQUIRE(bg.std_error_ok);
    CHECK(std::fabs(bg.value) <= 2.0 * bg.std_error);

    DelayHistogram empty;
    empty.bin_width_ps = 100;
    empty.counts.assign(100, 0);
    CHECK_THROWS_AS(fit_lifetime(empty), data_error);
}

TEST_CASE("two-exponential g2 fit recovers its own generator") {
    const TwoExpG2Params truth{0.7, 0.3, 2.7 * kNs, 200 * kNs};
    auto g2 = [&](double tau) { return g2_two_exp(tau, truth); };

    SUBCASE("1 percent noise, parameters within 5 percent") {
        const auto h = synthetic_g2_histogram(g2, 100.0, 10'000'000.0, 120, 1.0, 0.01, 5);
        const auto f = fit_g2_two_exp(h);
        CHECK(f.params.a == doctest::Approx(truth.a).epsilon(0.05));
        CHECK(f.params.b == doctest::Approx(truth.b).epsilon(0.05));
        CHECK(f.params.tau1_ps == doctest::Approx(truth.tau1_ps).epsilon(0.05));
        CHECK(f.params.tau2_ps == doctest::Approx(truth.tau2_ps).epsilon(0.05));
        CHECK(f.g2_zero == doctest::Approx(truth.b - truth.a).epsilon(0.2));
    }
    SUBCASE("an empty exclusion mask changes nothing") {
        const auto h = synthetic_g2_histogram(g2, 100.0, 10'000'000.0, 120, 1.0, 0.01, 5);
        const auto f1 = fit_g2_two_exp(h);
        const auto f2 = fit_g2_two_exp(h, ExcludedLags{});
        CHECK(f1.params.a == f2.params.a);
        CHECK(f1.params.tau2_ps == f2.params.tau2_ps);
    }
    SUBCASE("excluding a lag window ignores poisoned bins") {
        auto h = synthetic_g2_histogram(g2, 100.0, 10'000'000.0, 120, 1.0, 0.005, 6);
        // Poison the bins around 18 ns with a spurious noise peak.
        for (std::size_t i = 0; i < h.counts.size(); ++i) {
            const double c = std::sqrt(h.edges_ps[i] * h.edges_ps[i + 1]);
            if (c > 17'000.0 && c < 19'000.0) h.counts[i] *= 3;
        }
        const auto f = fit_g2_two_exp(h, {{17'000.0, 19'000.0}});
        CHECK(f.params.tau1_ps == doctest::Approx(truth.tau1_ps).epsilon(0.05));
        CHECK(f.params.tau2_ps == doctest::Approx(truth.tau2_ps).epsilon(0.05));
    }
    SUBCASE("B = 0 generator keeps the fitted B consistent with zero") {
        const TwoExpG2Params flat{0.7, 0.0, 2.7 * kNs, 200 * kNs};
        const auto h = synthetic_g2_histogram(
            [&](double tau) { return g2_two_exp(tau, flat); }, 100.0, 10'000'000.0, 120, 1.0,
            0.005, 7);
        const auto f = fit_g2_two_exp(h);
        const auto& b = f.fit.param("B");
        REQUIRE(b.std_error_ok);
        CHECK(std::fabs(b.value) <= 2.0 * b.std_error);
    }
    SUBCASE("too few usable bins") {
        const auto h = synthetic_g2_histogram(g2, 100.0, 1'000.0, 6, 1.0, 0.0, 8);
        CHECK_THROWS_WITH_AS(fit_g2_two_exp(h), doctest::Contains("8 usable bins"), data_error);
    }
}

TEST_CASE("rate-model fit") {
    // Synthetic three-power data generated from the Table-1 250 uW row, with
    // k12 proportional to power via a shared alpha.
    const double tau21 = 2.70 * kNs;
    const double tau23 = 1.93 * kNs, tau31 = 204 * kNs, sigma = 0.962;
    const std::vector<double> powers{250.0, 540.0, 760.0};
    const double alpha = 1.0 / (415 * kNs * 250.0);

    std::vector<CorrelationHistogram> hists;
    for (std::size_t p = 0; p < powers.size(); ++p) {
        const auto rates =
            EmitterRates::three_levels(1.0 / (alpha * powers[p]), tau21, tau23, tau31);
        const auto sol = solve_rate_model(rates);
        hists.push_back(synthetic_g2_histogram(
            [&](double tau) { return background_uncorrect(sol.g2(tau), sigma); }, 100.0,
            10'000'000.0, 100, 1.0, 0.02, 31 + p));
    }

    const auto f = fit_rate_model(hists, powers, tau21);
    REQUIRE(f.rates.size() == 3);
    for (std::size_t p = 0; p < 3; ++p) {
        CHECK(*f.rates[p].tau23_ps == doctest::Approx(tau23).epsilon(0.15));
        CHECK(*f.rates[p].tau31_ps == doctest::Approx(tau31).epsilon(0.15));
        CHECK(f.sigma[p] == doctest::Approx(sigma).epsilon(0.05));
    }
    // The shared-alpha constraint holds exactly by construction.
    const double k12_a = f.rates[0].k12() / powers[0];
    const double k12_b = f.rates[1].k12() / powers[1];
    const double k12_c = f.rates[2].k12() / powers[2];
    CHECK(k12_a == doctest::Approx(k12_b).epsilon(1e-12));
    CHECK(k12_a == doctest::Approx(k12_c).epsilon(1e-12));
    CHECK(f.alpha_error_available);

    SUBCASE("Table-1 consistency: tau12 x P is nearly constant") {
        const double products[] = {415.0 * 250.0, 189.0 * 540.0, 135.0 * 760.0};
        for (double pr : products)
            for (double qr : products)
                CHECK(std::fabs(pr - qr) / std::max(pr, qr) < 0.02);
    }
}

TEST_CASE("rate-model fit flags alpha for single-power input") {
    const double tau21 = 2.70 * kNs;
    const auto rates = EmitterRates::three_levels(415 * kNs, tau21, 1.93 * kNs, 204 * kNs);
    const auto sol = solve_rate_model(rates);
    std::vector<CorrelationHistogram> hists{synthetic_g2_histogram(
        [&](double tau) { return background_uncorrect(sol.g2(tau), 0.962); }, 100.0,
        10'000'000.0, 100, 1.0, 0.01, 40)};
    const auto f = fit_rate_model(hists, {250.0}, tau21);
    CHECK(!f.alpha_error_available);
    CHECK(!f.fit.param("alpha").std_error_ok);
}

TEST_CASE("rate-model fit on two-level data keeps k23 consistent with zero") {
    const double tau21 = 2.70 * kNs;
    const auto two = EmitterRates::two_level(415 * kNs, tau21);
    std::vector<CorrelationHistogram> hists{synthetic_g2_histogram(
        [&](double tau) { return background_uncorrect(rate_model_g2(tau, two), 0.98); }, 100.0,
        10'000'000.0, 100, 1.0, 0.01, 41)};
    const auto f = fit_rate_model(hists, {250.0}, tau21);
    const auto& t23 = f.fit.param("tau23_0");
    // k23 = 1/tau23; its delta-method error is se(tau23)/tau23^2.
    const double k23 = 1.0 / t23.value;
    if (t23.std_error_ok) {
        const double se_k23 = t23.std_error / (t23.value * t23.value);
        CHECK(k23 <= 2.0 * se_k23 + 1e-9);
    } else {
        CHECK(k23 < 1e-7);  // pushed to an unresolvably slow shelving rate
    }
}

TEST_CASE("pulsed Q fit") {
    const PulsedQModelParams truth{7.5e-4, 153 * kNs, 665 * kNs, 100 * kNs};

    auto make_series = [&](double noise_frac, std::uint64_t seed) {
        QSeries qs;
        oracles::Noise noise(seed);
        for (std::uint64_t k = 1; k <= 40; ++k) {
            QSeriesEntry e;
            e.window_ps = k * 100'000;
            e.q_mean = pulsed_q_model(k, truth);
            if (noise_frac > 0) e.q_mean *= 1.0 + noise.gaussian(noise_frac);
            e.n_windows = 1'000'000;
            e.n_acquisitions = 20;
            qs.entries.push_back(e);
        }
        return qs;
    };

    SUBCASE("noiseless data is recovered to optimizer tolerance") {
        const auto f = fit_pulsed_q(make_series(0.0, 0), 100'000);
        CHECK(f.fit.converged);
        CHECK(f.params.eta == doctest::Approx(truth.eta).epsilon(1e-4));
        CHECK(f.params.tau23_eff_ps == doctest::Approx(truth.tau23_eff_ps).epsilon(1e-4));
        CHECK(f.params.tau31_eff_ps == doctest::Approx(truth.tau31_eff_ps).epsilon(1e-4));
    }
    SUBCASE("10 percent noise keeps lifetimes within 20 percent") {
        const auto f = fit_pulsed_q(make_series(0.10, 51), 100'000);
        CHECK(f.params.tau23_eff_ps == doctest::Approx(truth.tau23_eff_ps).epsilon(0.20));
        CHECK(f.params.tau31_eff_ps == doctest::Approx(truth.tau31_eff_ps).epsilon(0.20));
    }
    SUBCASE("the fitted curve obeys the k = 1 identity") {
        const auto f = fit_pulsed_q(make_series(0.05, 52), 100'000);
        const double expected =
            -f.params.eta * f.params.tau23_eff_ps /
            (f.params.tau23_eff_ps + f.params.tau31_eff_ps);
        CHECK(pulsed_q_model(1, f.params) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("all-positive Q flags non-convergence") {
        QSeries qs;
        for (std::uint64_t k = 1; k <= 10; ++k)
            qs.entries.push_back({k * 100'000, 1e-4, 0.0, 1'000, 1});
        const auto f = fit_pulsed_q(qs, 100'000);
        CHECK(!f.fit.converged);
    }
    SUBCASE("T not a multiple of tau_rep is rejected") {
        QSeries qs;
        qs.entries.push_back({150'000, -1e-4, 0.0, 1'000, 1});
        CHECK_THROWS_AS(fit_pulsed_q(qs, 100'000), config_error);
    }
}

TEST_CASE("saturation fit") {
    const SaturationParams truth{120'000.0, 240.0, 15.0, 400.0};
    std::vector<double> powers, rates;
    for (double p = 20.0; p <= 1'000.0; p *= 1.35) powers.push_back(p);

    SUBCASE("2 percent noise recovers P_sat within 10 percent") {
        oracles::Noise noise(61);
        rates.clear();
        for (double p : powers)
            rates.push_back(saturation_rate(p, truth) * (1.0 + noise.gaussian(0.02)));
        const auto f = fit_saturation(powers, rates);
        CHECK(f.params.p_sat_uw == doctest::Approx(240.0).epsilon(0.10));
    }
    SUBCASE("noiseless data leaves a vanishing residual") {
        rates.clear();
        for (double p : powers) rates.push_back(saturation_rate(p, truth));
        const auto f = fit_saturation(powers, rates);
        CHECK(f.fit.converged);
        double scale = 0;
        for (double r : rates) scale += r * r;
        CHECK(f.fit.rss / scale < 1e-12);
        CHECK(f.params.i_inf_hz == doctest::Approx(truth.i_inf_hz).epsilon(1e-3));
    }
    SUBCASE("b = c = 0 data keeps both consistent with zero") {
        const SaturationParams clean{120'000.0, 240.0, 0.0, 0.0};
        oracles::Noise noise(62);
        rates.clear();
        for (double p : powers)
            rates.push_back(saturation_rate(p, clean) * (1.0 + noise.gaussian(0.01)));
        const auto f = fit_saturation(powers, rates);
        const auto& b = f.fit.param("b");
        const auto& c = f.fit.param("c");
        REQUIRE(b.std_error_ok);
        CHECK(std::fabs(b.value) <= 2.0 * b.std_error);
        CHECK(std::fabs(c.value) <= 2.0 * c.std_error);
    }
    SUBCASE("degenerate data is rejected") {
        CHECK_THROWS_WITH_AS(fit_saturation({1, 2, 3, 4}, {5, 5, 5, 5}),
                             doctest::Contains("degenerate"), data_error);
        CHECK_THROWS_AS(fit_saturation({1, 2, 3}, {5, 6, 7}), config_error);
    }
}
