#include "photonstat/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace photonstat {

MandelQ mandel_q(const TimestampSeries& series, time_ps window, std::uint64_t k_max,
                 time_ps origin) {
    const WindowMoments m = window_moments(series, window, k_max, origin);
    if (m.n_windows < 2) throw data_error("mandel_q needs at least 2 complete windows");
    if (m.total == 0) throw data_error("insufficient counts: no photons in any window");

    // Q = (K*SS - S^2 - K*S) / (K*S), exact in 128-bit integers.
    using i128 = __int128;
    const i128 K = m.n_windows;
    const i128 S = m.total;
    const i128 num = K * i128(m.total_sq) - S * S - K * S;
    const i128 den = K * S;

    MandelQ out;
    out.q = double(num) / double(den);
    out.mean = double(m.total) / double(m.n_windows);
    out.n_windows = m.n_windows;
    return out;
}

namespace {

time_ps first_trigger_time(const Acquisition& acq) {
    for (const auto& r : acq.records)
        if (r.channel == acq.mode.trigger_channel) return r.time;
    throw data_error("no trigger events in pulsed acquisition");
}

}  // namespace

QSeries mandel_q_series(const std::vector<Acquisition>& acquisitions,
                        const std::vector<time_ps>& windows, bool pulsed_aligned,
                        std::uint64_t k_max) {
    if (acquisitions.empty()) throw config_error("mandel_q_series: no acquisitions");
    if (windows.empty()) throw config_error("mandel_q_series: no window lengths");
    for (std::size_t i = 1; i < windows.size(); ++i)
        if (windows[i] <= windows[i - 1])
            throw config_error("mandel_q_series: window lengths must be strictly increasing");

    struct PerAcq {
        TimestampSeries merged;
        time_ps origin;
    };
    std::vector<PerAcq> prepared;
    prepared.reserve(acquisitions.size());
    for (const auto& acq : acquisitions) {
        PerAcq p;
        p.origin = 0;
        if (pulsed_aligned) {
            if (!acq.mode.is_pulsed())
                throw config_error("pulsed alignment requested on a CW acquisition");
            p.origin = first_trigger_time(acq);
        }
        p.merged = merge_channels(acq);
        prepared.push_back(std::move(p));
    }

    QSeries out;
    out.entries.reserve(windows.size());
    for (time_ps T : windows) {
        if (pulsed_aligned) {
            for (const auto& acq : acquisitions)
                if (T % acq.mode.tau_rep_ps != 0)
                    throw config_error("pulsed T = " + std::to_string(T) +
                                       " ps is not a multiple of tau_rep = " +
                                       std::to_string(acq.mode.tau_rep_ps) + " ps");
        }
        QSeriesEntry e;
        e.window_ps = T;
        e.n_acquisitions = std::uint32_t(acquisitions.size());
        e.n_windows = ~std::uint64_t(0);
        double sum = 0, sumsq = 0;
        for (const auto& p : prepared) {
            const MandelQ q = mandel_q(p.merged, T, k_max, p.origin);
            sum += q.q;
            sumsq += q.q * q.q;
            e.n_windows = std::min(e.n_windows, q.n_windows);
        }
        const double n = double(acquisitions.size());
        e.q_mean = sum / n;
        e.q_std = n > 1 ? std::sqrt(std::max(0.0, (sumsq - sum * sum / n) / (n - 1))) : 0.0;
        out.entries.push_back(e);
    }
    return out;
}

PhotonNumberDistribution photon_number_distribution(const TimestampSeries& series, time_ps window,
                                                    std::uint64_t k_max, time_ps origin) {
    const WindowMoments m = window_moments(series, window, k_max, origin);

    // Second pass builds the histogram over N; empty windows land in bin 0.
    std::vector<std::uint64_t> hist(1, 0);
    std::uint64_t occupied = 0;
    std::uint64_t current = 0, count = 0;
    auto flush = [&]() {
        if (count == 0) return;
        if (count >= hist.size()) hist.resize(count + 1, 0);
        ++hist[count];
        ++occupied;
        count = 0;
    };
    for (time_ps t : series.times) {
        if (t < origin) continue;
        const std::uint64_t idx = (t - origin) / window;
        if (idx >= m.n_windows) break;
        if (idx != current) {
            flush();
            current = idx;
        }
        ++count;
    }
    flush();
    hist[0] = m.n_windows - occupied;

    PhotonNumberDistribution out;
    out.window_ps = window;
    out.n_windows = m.n_windows;
    out.mean = double(m.total) / double(m.n_windows);
    const double var =
        double(m.total_sq) / double(m.n_windows) - out.mean * out.mean;
    out.stddev = std::sqrt(std::max(0.0, var));
    out.poisson_stddev = std::sqrt(out.mean);
    out.probabilities.resize(hist.size());
    for (std::size_t i = 0; i < hist.size(); ++i)
        out.probabilities[i] = double(hist[i]) / double(m.n_windows);
    return out;
}

// ---------------------------------------------------------------------------

BinningSpec BinningSpec::linear(time_ps max_lag_ps, time_ps bin_width_ps) {
    BinningSpec b;
    b.kind = Kind::linear;
    b.max_lag_ps = max_lag_ps;
    b.bin_width_ps = bin_width_ps;
    b.validate();
    return b;
}

BinningSpec BinningSpec::logspaced(time_ps min_lag_ps, time_ps max_lag_ps, std::size_t n_bins) {
    BinningSpec b;
    b.kind = Kind::logspaced;
    b.min_lag_ps = min_lag_ps;
    b.max_lag_ps = max_lag_ps;
    b.n_bins = n_bins;
    b.validate();
    return b;
}

void BinningSpec::validate() const {
    if (max_lag_ps == 0) throw config_error("max_lag must be positive");
    if (kind == Kind::linear) {
        if (bin_width_ps == 0) throw config_error("bin_width must be positive");
        if (bin_width_ps > max_lag_ps) throw config_error("bin_width exceeds max_lag");
    } else {
        if (min_lag_ps == 0) throw config_error("log binning needs min_lag > 0");
        if (min_lag_ps >= max_lag_ps) throw config_error("min_lag must be below max_lag");
        if (n_bins == 0) throw config_error("n_bins must be positive");
    }
}

std::vector<double> CorrelationHistogram::normalized() const {
    std::vector<double> out(counts.size());
    const double pair_density = double(n_a) * double(n_b) / double(duration_ps);
    const double fold = folded ? 2.0 : 1.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double measure = fold * (edges_ps[i + 1] - edges_ps[i]);
        out[i] = double(counts[i]) / (pair_density * measure);
    }
    return out;
}

std::vector<double> CorrelationHistogram::normalized_sigma() const {
    std::vector<double> out(counts.size());
    const double pair_density = double(n_a) * double(n_b) / double(duration_ps);
    const double fold = folded ? 2.0 : 1.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double measure = fold * (edges_ps[i + 1] - edges_ps[i]);
        out[i] = std::sqrt(double(std::max<std::uint64_t>(counts[i], 1))) /
                 (pair_density * measure);
    }
    return out;
}

CorrelationHistogram g2_histogram_cw(const TimestampSeries& ch_a, const TimestampSeries& ch_b,
                                     const BinningSpec& binning) {
    binning.validate();
    if (ch_a.empty() || ch_b.empty()) throw data_error("g2 histogram: empty channel");
    if (ch_a.duration_ps != ch_b.duration_ps)
        throw config_error("g2 histogram: channel durations differ");

    CorrelationHistogram h;
    h.n_a = ch_a.size();
    h.n_b = ch_b.size();
    h.duration_ps = ch_a.duration_ps;
    h.folded = binning.kind == BinningSpec::Kind::logspaced;

    const auto L = lag_ps(binning.max_lag_ps);
    std::size_t n_bins;
    if (!h.folded) {
        n_bins = std::size_t(2 * binning.max_lag_ps / binning.bin_width_ps);
        h.edges_ps.resize(n_bins + 1);
        for (std::size_t i = 0; i <= n_bins; ++i)
            h.edges_ps[i] = -double(L) + double(i) * double(binning.bin_width_ps);
    } else {
        n_bins = binning.n_bins;
        h.edges_ps.resize(n_bins + 1);
        const double ratio = std::log(double(binning.max_lag_ps) / double(binning.min_lag_ps)) /
                             double(n_bins);
        for (std::size_t i = 0; i <= n_bins; ++i)
            h.edges_ps[i] = double(binning.min_lag_ps) * std::exp(double(i) * ratio);
        h.edges_ps.front() = double(binning.min_lag_ps);
        h.edges_ps.back() = double(binning.max_lag_ps);
    }
    h.counts.assign(n_bins, 0);

    auto bin_of = [&](lag_ps tau) -> std::ptrdiff_t {
        if (!h.folded) {
            if (tau < -L || tau > L) return -1;
            if (tau == L) return std::ptrdiff_t(n_bins) - 1;
            return (tau + L) / lag_ps(binning.bin_width_ps);
        }
        const double a = double(tau < 0 ? -tau : tau);
        if (a < h.edges_ps.front() || a > h.edges_ps.back()) return -1;
        auto it = std::upper_bound(h.edges_ps.begin(), h.edges_ps.end(), a);
        auto idx = std::ptrdiff_t(it - h.edges_ps.begin()) - 1;
        if (idx == std::ptrdiff_t(n_bins)) --idx;  // tau exactly at the last edge
        return idx;
    };

    // Two-pointer sweep: for every a, visit the b window within +-max_lag.
    std::size_t lo = 0;
    for (time_ps a : ch_a.times) {
        while (lo < ch_b.times.size() &&
               lag_ps(ch_b.times[lo]) < lag_ps(a) - L)
            ++lo;
        for (std::size_t j = lo; j < ch_b.times.size(); ++j) {
            const lag_ps tau = lag_ps(ch_b.times[j]) - lag_ps(a);
            if (tau > L) break;
            const auto bin = bin_of(tau);
            if (bin >= 0) ++h.counts[std::size_t(bin)];
        }
    }
    return h;
}

G2Zero g2_zero_pulsed(const TimestampSeries& ch_a, const TimestampSeries& ch_b,
                      const TimestampSeries& triggers, time_ps tau_rep_ps,
                      time_ps peak_half_width_ps, std::size_t n_side_peaks) {
    if (tau_rep_ps == 0) throw config_error("tau_rep must be positive");
    if (peak_half_width_ps >= tau_rep_ps / 2)
        throw config_error("peak half-width must be below tau_rep/2");
    if (n_side_peaks < 2) throw config_error("need at least 2 side peaks");
    if (triggers.empty()) throw data_error("no trigger events");
    if (ch_a.empty() || ch_b.empty()) throw data_error("g2_zero_pulsed: empty channel");

    const std::uint64_t k_max = (n_side_peaks + 1) / 2;
    const time_ps reach = k_max * tau_rep_ps + peak_half_width_ps;
    if (ch_a.duration_ps <= reach)
        throw data_error("fewer than " + std::to_string(n_side_peaks) +
                         " resolvable side peaks in this acquisition");

    // area[k + k_max] = coincidences within +-w of lag k*tau_rep.
    std::vector<std::uint64_t> area(2 * k_max + 1, 0);
    const lag_ps L = lag_ps(reach);
    std::size_t lo = 0;
    for (time_ps a : ch_a.times) {
        while (lo < ch_b.times.size() && lag_ps(ch_b.times[lo]) < lag_ps(a) - L) ++lo;
        for (std::size_t j = lo; j < ch_b.times.size(); ++j) {
            const lag_ps tau = lag_ps(ch_b.times[j]) - lag_ps(a);
            if (tau > L) break;
            const double kf = double(tau) / double(tau_rep_ps);
            const auto k = std::llround(kf);
            if (std::llabs(k) > std::int64_t(k_max)) continue;
            if (std::llabs(tau - k * lag_ps(tau_rep_ps)) <= lag_ps(peak_half_width_ps))
                ++area[std::size_t(k + std::int64_t(k_max))];
        }
    }

    // Side peaks in nearest-first order: +1, -1, +2, -2, ...
    std::vector<double> sides;
    sides.reserve(n_side_peaks);
    for (std::uint64_t k = 1; sides.size() < n_side_peaks && k <= k_max; ++k) {
        sides.push_back(double(area[k_max + k]));
        if (sides.size() < n_side_peaks) sides.push_back(double(area[k_max - k]));
    }

    double sum = 0, sumsq = 0;
    for (double s : sides) {
        sum += s;
        sumsq += s * s;
    }
    const double n = double(sides.size());
    const double mean = sum / n;
    if (mean <= 0) throw data_error("no side-peak coincidences; cannot normalise g2(0)");
    const double sd = std::sqrt(std::max(0.0, (sumsq - sum * sum / n) / (n - 1)));

    G2Zero out;
    out.zero_peak_area = area[k_max];
    out.mean_side_area = mean;
    out.n_side_peaks = sides.size();
    out.value = double(area[k_max]) / mean;
    out.uncertainty = sd / mean;
    return out;
}

Acquisition trigger_filter(const Acquisition& acq, time_ps window_start_ps,
                           time_ps window_width_ps) {
    if (!acq.mode.is_pulsed()) throw config_error("trigger_filter needs a pulsed acquisition");
    if (window_start_ps + window_width_ps > acq.mode.tau_rep_ps)
        throw config_error("filter window does not fit within tau_rep");

    const std::uint8_t trig = acq.mode.trigger_channel;
    Acquisition out = acq;
    out.records.clear();
    bool seen_trigger = false;
    time_ps last_trigger = 0;
    for (const auto& r : acq.records) {
        if (r.channel == trig) {
            seen_trigger = true;
            last_trigger = r.time;
            out.records.push_back(r);
            continue;
        }
        if (!seen_trigger) continue;
        const time_ps delay = r.time - last_trigger;
        if (delay >= window_start_ps && delay < window_start_ps + window_width_ps)
            out.records.push_back(r);
    }
    if (!seen_trigger) throw data_error("no trigger events in acquisition");
    return out;
}

DelayHistogram lifetime_histogram(const Acquisition& acq, time_ps bin_width_ps) {
    if (!acq.mode.is_pulsed()) throw config_error("lifetime_histogram needs a pulsed acquisition");
    if (bin_width_ps == 0) throw config_error("bin_width must be positive");

    DelayHistogram h;
    h.bin_width_ps = bin_width_ps;
    h.duration_ps = acq.duration_ps;
    const std::size_t n_bins =
        std::size_t((acq.mode.tau_rep_ps + bin_width_ps - 1) / bin_width_ps);
    h.counts.assign(n_bins, 0);

    const std::uint8_t trig = acq.mode.trigger_channel;
    bool seen_trigger = false;
    time_ps last_trigger = 0;
    for (const auto& r : acq.records) {
        if (r.channel == trig) {
            seen_trigger = true;
            last_trigger = r.time;
            ++h.n_triggers;
            continue;
        }
        if (!seen_trigger) continue;
        const std::size_t bin = std::size_t((r.time - last_trigger) / bin_width_ps);
        if (bin < n_bins) {
            ++h.counts[bin];
            ++h.n_detections;
        }
    }
    if (h.n_triggers == 0) throw data_error("no trigger events in acquisition");
    return h;
}

DeadtimeEstimate estimate_deadtime(const TimestampSeries& channel, time_ps bin_width_ps) {
    if (bin_width_ps == 0) throw config_error("bin_width must be positive");
    if (channel.size() < 10'000)
        throw data_error("insufficient statistics: need at least 1e4 events");

    std::vector<time_ps> gaps(channel.size() - 1);
    double mean_gap = 0;
    for (std::size_t i = 0; i + 1 < channel.times.size(); ++i) {
        gaps[i] = channel.times[i + 1] - channel.times[i];
        mean_gap += double(gaps[i]);
    }
    mean_gap /= double(gaps.size());

    const time_ps cap = time_ps(5.0 * mean_gap) + bin_width_ps;
    const std::size_t n_bins = std::size_t(cap / bin_width_ps) + 1;
    std::vector<double> hist(n_bins, 0.0);
    for (time_ps g : gaps)
        if (g < cap) hist[std::size_t(g / bin_width_ps)] += 1.0;

    // 5-bin moving average stabilises the plateau and the half-rise point.
    std::vector<double> smooth(n_bins, 0.0);
    for (std::size_t i = 0; i < n_bins; ++i) {
        const std::size_t a = i >= 2 ? i - 2 : 0;
        const std::size_t b = std::min(i + 2, n_bins - 1);
        double s = 0;
        for (std::size_t j = a; j <= b; ++j) s += hist[j];
        smooth[i] = s / double(b - a + 1);
    }

    const double plateau = *std::max_element(smooth.begin(), smooth.end());
    if (plateau <= 0) throw data_error("empty gap histogram");
    const double half = plateau / 2.0;

    for (std::size_t i = 1; i < n_bins; ++i) {
        if (smooth[i - 1] < half && smooth[i] >= half) {
            const double c0 = (double(i - 1) + 0.5) * double(bin_width_ps);
            const double c1 = (double(i) + 0.5) * double(bin_width_ps);
            const double f = (half - smooth[i - 1]) / (smooth[i] - smooth[i - 1]);
            DeadtimeEstimate out;
            out.deadtime_ps = c0 + f * (c1 - c0);
            out.uncertainty_ps = double(bin_width_ps);
            out.plateau_level = plateau;
            return out;
        }
    }
    throw data_error("no half-rise found in the gap histogram");
}

}  // namespace photonstat
