#pragma once

#include <cstdint>
#include <vector>

#include "photonstat/core.hpp"
#include "photonstat/types.hpp"

namespace photonstat {

// ---------------------------------------------------------------------------
// Mandel Q

struct MandelQ {
    double q = 0;
    double mean = 0;  // mean photon number per window
    std::uint64_t n_windows = 0;
};

// Q = population-variance(counts) / mean(counts) - 1 over the complete
// windows of length `window`. Exact integer moment arithmetic; the only
// rounding is the final division. Throws data_error with fewer than 2
// complete windows or when no photon falls in any window.
MandelQ mandel_q(const TimestampSeries& series, time_ps window,
                 std::uint64_t k_max = kMaxWindows, time_ps origin = 0);

struct QSeriesEntry {
    time_ps window_ps = 0;
    double q_mean = 0;
    double q_std = 0;               // scatter across acquisitions; 0 when n_acquisitions = 1
    std::uint64_t n_windows = 0;    // smallest window count among the acquisitions
    std::uint32_t n_acquisitions = 0;
};

struct QSeries {
    std::vector<QSeriesEntry> entries;  // strictly increasing in window_ps
};

// Q(T) over a set of integration times, aggregated across acquisitions
// (mean and standard deviation of the per-acquisition Q values). With
// pulsed_aligned set, every T must be an integer multiple of tau_rep and the
// window origin is the first trigger event of each acquisition.
QSeries mandel_q_series(const std::vector<Acquisition>& acquisitions,
                        const std::vector<time_ps>& windows, bool pulsed_aligned = false,
                        std::uint64_t k_max = kMaxWindows);

// ---------------------------------------------------------------------------
// Photon number distribution

struct PhotonNumberDistribution {
    time_ps window_ps = 0;
    std::vector<double> probabilities;  // index = photon number, sums to 1
    double mean = 0;
    double stddev = 0;          // population standard deviation of the counts
    double poisson_stddev = 0;  // sqrt(mean), for comparison
    std::uint64_t n_windows = 0;
};

PhotonNumberDistribution photon_number_distribution(const TimestampSeries& series, time_ps window,
                                                    std::uint64_t k_max = kMaxWindows,
                                                    time_ps origin = 0);

// ---------------------------------------------------------------------------
// Correlation histograms

struct BinningSpec {
    enum class Kind { linear, logspaced };
    Kind kind = Kind::linear;
    time_ps max_lag_ps = 0;
    time_ps bin_width_ps = 0;  // linear only
    time_ps min_lag_ps = 0;    // log only, > 0
    std::size_t n_bins = 0;    // log only

    static BinningSpec linear(time_ps max_lag_ps, time_ps bin_width_ps);
    static BinningSpec logspaced(time_ps min_lag_ps, time_ps max_lag_ps, std::size_t n_bins);
    void validate() const;
};

struct CorrelationHistogram {
    std::vector<double> edges_ps;  // n_bins + 1, strictly increasing
    std::vector<std::uint64_t> counts;
    bool folded = false;  // log binning folds negative lags onto |tau|
    std::uint64_t n_a = 0, n_b = 0;
    time_ps duration_ps = 0;

    // counts / (N_A * N_B * lag-measure / duration); the plateau of two
    // uncorrelated streams sits at 1. A folded bin covers the lag measure
    // twice (once per sign).
    std::vector<double> normalized() const;
    // 1-sigma Poisson uncertainty of the normalized values.
    std::vector<double> normalized_sigma() const;
};

// Pair-count cross-correlation g2 histogram between two channels via a
// sliding two-pointer sweep: exact counts, arbitrary bin edges.
CorrelationHistogram g2_histogram_cw(const TimestampSeries& ch_a, const TimestampSeries& ch_b,
                                     const BinningSpec& binning);

// ---------------------------------------------------------------------------
// Pulsed g2(0) by peak areas

struct G2Zero {
    double value = 0;
    double uncertainty = 0;
    std::uint64_t zero_peak_area = 0;
    double mean_side_area = 0;
    std::size_t n_side_peaks = 0;
};

// g2(0) = area of the zero-delay coincidence peak over the mean area of the
// n_side nearest side peaks (+-1, +-2, ...); the uncertainty is the side-peak
// area scatter divided by the mean side-peak area.
G2Zero g2_zero_pulsed(const TimestampSeries& ch_a, const TimestampSeries& ch_b,
                      const TimestampSeries& triggers, time_ps tau_rep_ps,
                      time_ps peak_half_width_ps, std::size_t n_side_peaks = 18);

// ---------------------------------------------------------------------------
// Trigger filtering and lifetime

// Keep detections whose delay after the most recent trigger lies in
// [window_start, window_start + window_width); trigger records are preserved.
Acquisition trigger_filter(const Acquisition& acq, time_ps window_start_ps,
                           time_ps window_width_ps);

struct DelayHistogram {
    time_ps bin_width_ps = 0;
    std::vector<std::uint64_t> counts;  // bin i covers [i*w, (i+1)*w) after the trigger
    std::uint64_t n_triggers = 0;
    std::uint64_t n_detections = 0;
    time_ps duration_ps = 0;
};

// Histogram of detection delays after the most recent trigger, over one pulse
// period.
DelayHistogram lifetime_histogram(const Acquisition& acq, time_ps bin_width_ps);

// ---------------------------------------------------------------------------
// Deadtime estimation

struct DeadtimeEstimate {
    double deadtime_ps = 0;
    double uncertainty_ps = 0;  // resolution-limited: one bin width
    double plateau_level = 0;
};

// Deadtime from the histogram of nearest-neighbour forward gaps: the gap at
// half the plateau level, located on a 5-bin moving average of the histogram
// and linearly interpolated. Needs a dense stream (>= 1e4 events).
DeadtimeEstimate estimate_deadtime(const TimestampSeries& channel, time_ps bin_width_ps = 100);

}  // namespace photonstat
