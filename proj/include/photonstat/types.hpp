#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace photonstat {

// Integer picoseconds since acquisition start. 100 s = 1e14 ps, well inside
// the 64-bit range, so all binning arithmetic is exact.
using time_ps = std::uint64_t;

// Signed lag in picoseconds (correlation delays).
using lag_ps = std::int64_t;

// Invalid parameter values or malformed configuration.
class config_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Structurally valid input that cannot be processed (insufficient data,
// corrupt file contents, ...).
class data_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Channel 0 carries laser trigger events; detectors start at 1.
inline constexpr std::uint8_t kTriggerChannel = 0;

struct DetectionRecord {
    time_ps time = 0;
    std::uint8_t channel = 0;

    friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

// Ordering used everywhere: by time, ties broken by ascending channel id.
inline bool record_less(const DetectionRecord& a, const DetectionRecord& b) {
    if (a.time != b.time) return a.time < b.time;
    return a.channel < b.channel;
}

// A sorted stream of event times from one or more merged channels.
struct TimestampSeries {
    time_ps duration_ps = 0;
    std::vector<time_ps> times;

    std::size_t size() const { return times.size(); }
    bool empty() const { return times.empty(); }
};

enum class Excitation { cw, pulsed };

struct ExcitationMode {
    Excitation kind = Excitation::cw;
    double power_uw = 0.0;                          // CW power label (0 = unlabelled)
    time_ps tau_rep_ps = 0;                         // pulsed repetition period
    std::uint8_t trigger_channel = kTriggerChannel; // pulsed trigger channel id

    static ExcitationMode cw(double power_uw = 0.0) {
        ExcitationMode m;
        m.kind = Excitation::cw;
        m.power_uw = power_uw;
        return m;
    }
    static ExcitationMode pulsed(time_ps tau_rep_ps,
                                 std::uint8_t trigger_channel = kTriggerChannel) {
        ExcitationMode m;
        m.kind = Excitation::pulsed;
        m.tau_rep_ps = tau_rep_ps;
        m.trigger_channel = trigger_channel;
        return m;
    }
    bool is_pulsed() const { return kind == Excitation::pulsed; }
    void validate() const;
};

// One acquisition: a fixed duration plus every channel-tagged event in it.
struct Acquisition {
    time_ps duration_ps = 0;
    std::vector<DetectionRecord> records;  // sorted by (time, channel)
    ExcitationMode mode;
    std::optional<std::uint64_t> seed;     // set for simulated data
    std::set<std::uint8_t> channels{1, 2}; // declared channel set

    // Throws data_error / config_error when an invariant is violated.
    void validate() const;
};

// Three-level emitter transition lifetimes; tau23/tau31 absent = two-level.
struct EmitterRates {
    double tau12_ps = 0;
    double tau21_ps = 0;
    std::optional<double> tau23_ps;
    std::optional<double> tau31_ps;

    bool three_level() const { return tau23_ps.has_value(); }

    double k12() const { return 1.0 / tau12_ps; }
    double k21() const { return 1.0 / tau21_ps; }
    double k23() const { return tau23_ps ? 1.0 / *tau23_ps : 0.0; }
    double k31() const { return tau31_ps ? 1.0 / *tau31_ps : 0.0; }

    static EmitterRates two_level(double tau12_ps, double tau21_ps) {
        return {tau12_ps, tau21_ps, std::nullopt, std::nullopt};
    }
    static EmitterRates three_levels(double tau12_ps, double tau21_ps,
                                     double tau23_ps, double tau31_ps) {
        return {tau12_ps, tau21_ps, tau23_ps, tau31_ps};
    }
    void validate() const;
};

// Detection chain after the emitter: loss, beamsplitter, background, deadtime.
struct DetectionChainParams {
    double efficiency = 1.0;   // eta, probability a photon is detected at all
    time_ps deadtime_ps = 0;   // per-channel detector deadtime
    double split_ratio = 0.5;  // probability a detection lands on channel 1
    double background_hz = 0;  // uniform background rate per channel

    void validate() const;
};

struct SimulationConfig {
    EmitterRates rates;
    DetectionChainParams chain;
    ExcitationMode mode;
    time_ps duration_ps = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

}  // namespace photonstat
