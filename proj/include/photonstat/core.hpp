#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "photonstat/types.hpp"

namespace photonstat {

// Cap on the number of windows per acquisition: K = 1e8, or the maximum the
// acquisition allows for a given T. When the cap binds, the first 1e8 windows
// are used.
inline constexpr std::uint64_t kMaxWindows = 100'000'000;

// Merge the requested channels into one sorted time series. The trigger
// channel is excluded from the default overload; ask for it explicitly if
// needed. Throws config_error naming any channel not declared by `acq`.
TimestampSeries merge_channels(const Acquisition& acq, const std::set<std::uint8_t>& channels);
TimestampSeries merge_channels(const Acquisition& acq);

// Event count in each of the windows [origin + i*T, origin + (i+1)*T),
// i = 0 .. n-1 with n = min(k_max, floor((duration - origin) / T)).
// The trailing partial window is discarded. Throws config_error for T = 0 and
// data_error ("insufficient duration") when no complete window fits.
std::vector<std::uint64_t> partition_windows(const TimestampSeries& series, time_ps window,
                                             std::uint64_t k_max = kMaxWindows,
                                             time_ps origin = 0);

// First two moments of the per-window counts, accumulated in exact integer
// arithmetic without materialising the (possibly 1e8-long) count vector.
struct WindowMoments {
    std::uint64_t n_windows = 0;
    std::uint64_t total = 0;             // sum of counts
    unsigned __int128 total_sq = 0;      // sum of squared counts
};

WindowMoments window_moments(const TimestampSeries& series, time_ps window,
                             std::uint64_t k_max = kMaxWindows, time_ps origin = 0);

}  // namespace photonstat
