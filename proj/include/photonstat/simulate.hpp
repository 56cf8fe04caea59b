#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "photonstat/types.hpp"

namespace photonstat {

// Stable seed derivation for the per-stage RNG sub-streams. Each simulation
// stage (emission, thinning, splitting, per-channel background) draws from its
// own engine, so toggling one stage never shifts another stage's draws.
namespace rng {

enum class Stream : std::uint64_t {
    emission = 1,
    thinning = 2,
    splitting = 3,
    background = 4,
};

std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t sub = 0);

}  // namespace rng

// Kinetic Monte Carlo emission times for CW excitation: excitation delay
// Exp(tau12) from ground, then the radiative Exp(tau21) and shelving Exp(tau23)
// clocks compete; losing to the shelf costs an extra Exp(tau31) before the
// next cycle. Times are strictly increasing and < duration.
TimestampSeries simulate_emission_cw(const EmitterRates& rates, time_ps duration_ps,
                                     std::uint64_t seed);

struct PulsedEmission {
    TimestampSeries emissions;
    TimestampSeries triggers;  // 0, tau_rep, 2*tau_rep, ... < duration
};

// Pulsed excitation: the first pulse at or after the emitter's return to
// ground starts a cycle, with excitation delay Exp(tau12) after that pulse.
// Pulses arriving while the emitter is excited or shelved are skipped.
PulsedEmission simulate_emission_pulsed(const EmitterRates& rates, time_ps tau_rep_ps,
                                        time_ps duration_ps, std::uint64_t seed);

// Detection chain transform, applied in order: (1) Bernoulli(eta) loss,
// (2) 50:50-style beamsplitter assignment, (3) per-channel uniform Poisson
// background, (4) per-channel deadtime sweep dropping any detection closer
// than deadtime_ps to the previously kept one. Trigger times, when given, are
// copied through untouched on the trigger channel.
Acquisition detection_chain(const TimestampSeries& emissions, const DetectionChainParams& chain,
                            std::uint64_t seed, const std::vector<time_ps>& triggers = {},
                            std::uint8_t trigger_channel = kTriggerChannel);

// Deadtime sweep alone (step 4); exposed since it is idempotent and useful on
// its own. Input must be sorted.
std::vector<time_ps> apply_deadtime(const std::vector<time_ps>& times, time_ps deadtime_ps);

// Full pipeline: emission process for cfg.mode, then the detection chain,
// with the acquisition metadata (mode, seed) filled in.
Acquisition simulate_acquisition(const SimulationConfig& cfg);

}  // namespace photonstat
