#include "photonstat/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace photonstat {

namespace rng {

namespace {

// splitmix64 finaliser; fixed forever so that seeds stay reproducible.
std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t sub) {
    return mix(mix(seed ^ mix(static_cast<std::uint64_t>(stream))) + sub);
}

}  // namespace rng

namespace {

class UniformStream {
public:
    explicit UniformStream(std::uint64_t seed) : engine_(seed) {}

    // Uniform in (0, 1]; implementation-independent mapping from raw bits.
    double open01() { return (double(engine_() >> 11) + 1.0) * 0x1.0p-53; }

    // Exponential with the given mean; mean = +inf yields +inf.
    double exponential(double mean_ps) { return -mean_ps * std::log(open01()); }

    bool bernoulli(double p) { return open01() <= p; }

private:
    std::mt19937_64 engine_;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

// One excitation cycle always consumes exactly four uniforms, whether or not
// the shelving branch exists or is taken. This keeps the tau12/tau21 draw
// sequence identical between two-level and three-level runs of the same seed.
struct CycleDraws {
    double d12, t21, t23, t31;
};

CycleDraws draw_cycle(UniformStream& u, const EmitterRates& r) {
    CycleDraws d;
    d.d12 = u.exponential(r.tau12_ps);
    d.t21 = u.exponential(r.tau21_ps);
    const double u3 = u.open01();
    const double u4 = u.open01();
    if (r.three_level()) {
        d.t23 = -*r.tau23_ps * std::log(u3);
        d.t31 = -*r.tau31_ps * std::log(u4);
    } else {
        d.t23 = kInf;
        d.t31 = 0.0;
    }
    return d;
}

void push_emission(std::vector<time_ps>& out, double t, time_ps duration_ps) {
    auto tp = static_cast<time_ps>(std::llround(t));
    if (!out.empty() && tp <= out.back()) tp = out.back() + 1;  // keep strictly increasing
    if (tp < duration_ps) out.push_back(tp);
}

}  // namespace

TimestampSeries simulate_emission_cw(const EmitterRates& rates, time_ps duration_ps,
                                     std::uint64_t seed) {
    rates.validate();
    if (duration_ps == 0) throw config_error("duration_ps must be positive");

    UniformStream u(rng::derive_seed(seed, rng::Stream::emission));
    TimestampSeries out;
    out.duration_ps = duration_ps;
    out.times.reserve(std::size_t(duration_ps / (rates.tau12_ps + rates.tau21_ps) * 1.05) + 16);

    double t = 0.0;  // emitter in ground state at time t
    while (t < double(duration_ps)) {
        const CycleDraws d = draw_cycle(u, rates);
        const double excited = t + d.d12;
        if (d.t21 < d.t23) {
            t = excited + d.t21;
            push_emission(out.times, t, duration_ps);
        } else {
            t = excited + d.t23 + d.t31;
        }
    }
    return out;
}

PulsedEmission simulate_emission_pulsed(const EmitterRates& rates, time_ps tau_rep_ps,
                                        time_ps duration_ps, std::uint64_t seed) {
    rates.validate();
    if (tau_rep_ps == 0) throw config_error("tau_rep_ps must be positive");
    if (duration_ps == 0) throw config_error("duration_ps must be positive");

    PulsedEmission out;
    out.emissions.duration_ps = duration_ps;
    out.triggers.duration_ps = duration_ps;
    for (time_ps p = 0; p < duration_ps; p += tau_rep_ps) out.triggers.times.push_back(p);

    UniformStream u(rng::derive_seed(seed, rng::Stream::emission));
    double ready = 0.0;  // emitter back in the ground state at this time
    while (true) {
        std::uint64_t pulse_idx =
            ready <= 0.0 ? 0 : static_cast<std::uint64_t>(std::ceil(ready / double(tau_rep_ps)));
        while (double(pulse_idx) * double(tau_rep_ps) < ready) ++pulse_idx;
        const double pulse = double(pulse_idx) * double(tau_rep_ps);
        if (pulse_idx >= out.triggers.times.size()) break;

        const CycleDraws d = draw_cycle(u, rates);
        const double excited = pulse + d.d12;
        if (d.t21 < d.t23) {
            ready = excited + d.t21;
            push_emission(out.emissions.times, ready, duration_ps);
        } else {
            ready = excited + d.t23 + d.t31;
        }
    }
    return out;
}

std::vector<time_ps> apply_deadtime(const std::vector<time_ps>& times, time_ps deadtime_ps) {
    if (deadtime_ps == 0) return times;
    std::vector<time_ps> kept;
    kept.reserve(times.size());
    bool first = true;
    time_ps last = 0;
    for (time_ps t : times) {
        if (first || t - last >= deadtime_ps) {
            kept.push_back(t);
            last = t;
            first = false;
        }
    }
    return kept;
}

namespace {

std::vector<time_ps> poisson_background(double rate_hz, time_ps duration_ps, std::uint64_t seed) {
    std::vector<time_ps> out;
    if (rate_hz <= 0.0) return out;
    UniformStream u(seed);
    const double mean_gap_ps = 1e12 / rate_hz;
    double t = u.exponential(mean_gap_ps);
    while (t < double(duration_ps)) {
        out.push_back(static_cast<time_ps>(std::llround(t)));
        t += u.exponential(mean_gap_ps);
    }
    return out;
}

}  // namespace

Acquisition detection_chain(const TimestampSeries& emissions, const DetectionChainParams& chain,
                            std::uint64_t seed, const std::vector<time_ps>& triggers,
                            std::uint8_t trigger_channel) {
    chain.validate();

    UniformStream thin(rng::derive_seed(seed, rng::Stream::thinning));
    UniformStream split(rng::derive_seed(seed, rng::Stream::splitting));

    std::vector<time_ps> ch[2];
    for (time_ps t : emissions.times) {
        if (!thin.bernoulli(chain.efficiency)) continue;
        ch[split.bernoulli(chain.split_ratio) ? 0 : 1].push_back(t);
    }

    for (int c = 0; c < 2; ++c) {
        auto bg = poisson_background(
            chain.background_hz, emissions.duration_ps,
            rng::derive_seed(seed, rng::Stream::background, std::uint64_t(c + 1)));
        if (!bg.empty()) {
            std::vector<time_ps> merged;
            merged.reserve(ch[c].size() + bg.size());
            std::merge(ch[c].begin(), ch[c].end(), bg.begin(), bg.end(),
                       std::back_inserter(merged));
            ch[c] = std::move(merged);
        }
        ch[c] = apply_deadtime(ch[c], chain.deadtime_ps);
    }

    Acquisition acq;
    acq.duration_ps = emissions.duration_ps;
    acq.records.reserve(ch[0].size() + ch[1].size() + triggers.size());
    for (int c = 0; c < 2; ++c)
        for (time_ps t : ch[c]) acq.records.push_back({t, std::uint8_t(c + 1)});
    for (time_ps t : triggers) acq.records.push_back({t, trigger_channel});
    std::sort(acq.records.begin(), acq.records.end(), record_less);
    if (!triggers.empty()) acq.channels.insert(trigger_channel);
    return acq;
}

Acquisition simulate_acquisition(const SimulationConfig& cfg) {
    cfg.validate();
    Acquisition acq;
    if (cfg.mode.is_pulsed()) {
        auto em = simulate_emission_pulsed(cfg.rates, cfg.mode.tau_rep_ps, cfg.duration_ps,
                                           cfg.seed);
        acq = detection_chain(em.emissions, cfg.chain, cfg.seed, em.triggers.times,
                              cfg.mode.trigger_channel);
    } else {
        auto em = simulate_emission_cw(cfg.rates, cfg.duration_ps, cfg.seed);
        acq = detection_chain(em, cfg.chain, cfg.seed);
    }
    acq.mode = cfg.mode;
    acq.seed = cfg.seed;
    return acq;
}

}  // namespace photonstat
