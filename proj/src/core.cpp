#include "photonstat/core.hpp"

#include <algorithm>
#include <string>

namespace photonstat {

void ExcitationMode::validate() const {
    if (kind == Excitation::pulsed && tau_rep_ps == 0)
        throw config_error("pulsed mode requires tau_rep_ps > 0");
}

void Acquisition::validate() const {
    mode.validate();
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.time >= duration_ps)
            throw data_error("record " + std::to_string(i) + " at " + std::to_string(r.time) +
                             " ps is not before the acquisition duration " +
                             std::to_string(duration_ps) + " ps");
        if (!channels.count(r.channel))
            throw data_error("record " + std::to_string(i) + " uses undeclared channel " +
                             std::to_string(int(r.channel)));
        if (i > 0 && record_less(r, records[i - 1]))
            throw data_error("records not sorted at index " + std::to_string(i));
    }
}

void EmitterRates::validate() const {
    if (!(tau12_ps > 0) || !(tau21_ps > 0))
        throw config_error("tau12 and tau21 must be positive");
    if (tau23_ps.has_value() != tau31_ps.has_value())
        throw config_error("tau23 and tau31 must both be present (three-level) or both absent");
    if (tau23_ps && !(*tau23_ps > 0))
        throw config_error("tau23 must be positive");
    if (tau31_ps && !(*tau31_ps > 0))
        throw config_error("tau31 must be positive");
}

void DetectionChainParams::validate() const {
    if (!(efficiency >= 0.0 && efficiency <= 1.0))
        throw config_error("efficiency must be in [0, 1]");
    if (!(split_ratio > 0.0 && split_ratio < 1.0))
        throw config_error("split_ratio must be in (0, 1)");
    if (!(background_hz >= 0.0))
        throw config_error("background_hz must be non-negative");
}

void SimulationConfig::validate() const {
    rates.validate();
    chain.validate();
    mode.validate();
    if (duration_ps == 0) throw config_error("duration_ps must be positive");
}

TimestampSeries merge_channels(const Acquisition& acq, const std::set<std::uint8_t>& channels) {
    if (channels.empty()) throw config_error("merge_channels: empty channel set");
    for (auto ch : channels)
        if (!acq.channels.count(ch))
            throw config_error("merge_channels: unknown channel " + std::to_string(int(ch)));

    TimestampSeries out;
    out.duration_ps = acq.duration_ps;
    // Records are already sorted by (time, channel), so a filtering pass
    // preserves the sorted order and the stable channel-id tie-break.
    for (const auto& r : acq.records)
        if (channels.count(r.channel)) out.times.push_back(r.time);
    return out;
}

TimestampSeries merge_channels(const Acquisition& acq) {
    std::set<std::uint8_t> detectors;
    const std::uint8_t trigger =
        acq.mode.is_pulsed() ? acq.mode.trigger_channel : kTriggerChannel;
    for (auto ch : acq.channels)
        if (ch != trigger) detectors.insert(ch);
    if (detectors.empty()) throw config_error("merge_channels: no detector channels declared");
    return merge_channels(acq, detectors);
}

namespace {

std::uint64_t complete_window_count(const TimestampSeries& series, time_ps window,
                                    std::uint64_t k_max, time_ps origin) {
    if (window == 0) throw config_error("window length must be positive");
    if (origin >= series.duration_ps)
        throw data_error("insufficient duration: origin beyond acquisition end");
    std::uint64_t n = (series.duration_ps - origin) / window;
    n = std::min(n, k_max);
    if (n == 0) throw data_error("insufficient duration: no complete window fits");
    return n;
}

}  // namespace

std::vector<std::uint64_t> partition_windows(const TimestampSeries& series, time_ps window,
                                             std::uint64_t k_max, time_ps origin) {
    const std::uint64_t n = complete_window_count(series, window, k_max, origin);
    std::vector<std::uint64_t> counts(n, 0);
    for (time_ps t : series.times) {
        if (t < origin) continue;
        const std::uint64_t idx = (t - origin) / window;
        if (idx >= n) break;  // times are sorted; everything after is out of range too
        ++counts[idx];
    }
    return counts;
}

WindowMoments window_moments(const TimestampSeries& series, time_ps window,
                             std::uint64_t k_max, time_ps origin) {
    WindowMoments m;
    m.n_windows = complete_window_count(series, window, k_max, origin);

    std::uint64_t current = 0;  // window index of the open run
    std::uint64_t count = 0;
    auto flush = [&]() {
        m.total += count;
        m.total_sq += static_cast<unsigned __int128>(count) * count;
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
    return m;
}

}  // namespace photonstat
