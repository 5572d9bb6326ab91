// SPDX-License-Identifier: Apache-2.0
//
// Synthetic experiment: draws detector time-tag streams from the joint
// outcome distribution, the lumped channel/detector losses, timing jitter
// and the dark/fluorescence noise processes.
//
// The pair process is generated as its independently thinned components
// (coincidence streams per outcome class, single-survivor streams, noise
// streams), which is distributionally identical to sampling every emitted
// pair and keeps the per-event cost proportional to the detected rate
// rather than the source rate.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "franson/quantum.hpp"
#include "franson/rng.hpp"
#include "franson/scenario.hpp"

namespace franson {

enum class TagOrigin : std::uint8_t {
    PairLeft = 0,
    PairMiddle = 1,
    PairRight = 2,
    Dark = 3,
    Fluorescence = 4,
};

struct TimeTag {
    std::int64_t timestamp_ps = 0;
    std::uint8_t detector = 1;  // 1 or 2
};

/// One detector's stream, sorted by timestamp. Origin labels are retained
/// for diagnostics only; the analysis pipeline never consults them.
struct DetectorStream {
    std::vector<std::int64_t> timestamps_ps;
    std::vector<TagOrigin> origins;

    std::size_t size() const { return timestamps_ps.size(); }
};

struct SimulationResult {
    DetectorStream detector1;
    DetectorStream detector2;
    double acquisition_time_s = 0.0;
};

struct SimulateOptions {
    int chunks = 1;              // fixed default so outputs are reproducible
    bool allow_invalid = false;  // skip the Franson validity gate
};

namespace detail_mc {

struct Event {
    std::int64_t t = 0;
    TagOrigin origin = TagOrigin::Dark;
};

// Stream ids; the generation order is part of the determinism contract.
enum StreamId : std::uint64_t {
    BothLeft = 0,
    BothMiddle,
    BothRight,
    D1OnlyLeft,
    D1OnlyMiddle,
    D1OnlyRight,
    D2OnlyLeft,
    D2OnlyMiddle,
    D2OnlyRight,
    Dark1,
    Dark2,
    Fluor1,
    Fluor2,
};

inline TagOrigin class_origin(int cls) {
    switch (cls) {
        case 0: return TagOrigin::PairLeft;
        case 1: return TagOrigin::PairMiddle;
        default: return TagOrigin::PairRight;
    }
}

// Emits a homogeneous Poisson process on [t0_ps, t1_ps) via exponential
// gaps, applying `emit` to each event time (double ps).
template <class Emit>
inline void poisson_stream(Rng& rng, double rate_cps, double t0_ps, double t1_ps, Emit&& emit) {
    if (rate_cps <= 0.0) return;
    double rate_per_ps = rate_cps / ps_per_s;
    double t = t0_ps;
    for (;;) {
        t += rng.exponential(rate_per_ps);
        if (t >= t1_ps) break;
        emit(t);
    }
}

inline void push_tag(std::vector<Event>& out, double t_ps, TagOrigin origin) {
    std::int64_t q = static_cast<std::int64_t>(std::llround(t_ps));
    if (q < 0) return;  // jitter pushed the tag before acquisition start
    out.push_back({q, origin});
}

inline void apply_dead_time(std::vector<Event>& events, double dead_time_ps) {
    if (dead_time_ps <= 0.0 || events.empty()) return;
    std::vector<Event> kept;
    kept.reserve(events.size());
    std::int64_t dt = static_cast<std::int64_t>(dead_time_ps);
    std::int64_t last = std::numeric_limits<std::int64_t>::min();
    for (const Event& e : events) {
        if (last == std::numeric_limits<std::int64_t>::min() || e.t - last >= dt) {
            kept.push_back(e);
            last = e.t;
        }
    }
    events.swap(kept);
}

}  // namespace detail_mc

/// Runs the synthetic experiment. Identical (cfg, seed, options) yields a
/// bit-identical result on any platform.
inline SimulationResult simulate(const ScenarioConfig& cfg, std::uint64_t seed,
                                 const SimulateOptions& options = {}) {
    cfg.validate();
    if (!options.allow_invalid) {
        auto report = franson_validity(cfg);
        if (!report.all_pass()) {
            std::string failing;
            for (const auto& c : report.conditions)
                if (!c.pass) failing += (failing.empty() ? "" : ", ") + c.name;
            throw std::runtime_error("simulate: Franson validity failed (" + failing +
                                     "); rerun with the override to proceed");
        }
    }
    if (options.chunks < 1) throw std::domain_error("simulate: chunks must be >= 1");

    using namespace detail_mc;

    const double v = intrinsic_visibility(cfg);
    const auto outcomes = joint_outcomes(total_phase(cfg), 0.0, v);
    const double p_class[3] = {outcomes.p_left, outcomes.p_middle, outcomes.p_right};
    const double k1 = cfg.signal_channel.transmission * cfg.detector1.efficiency;
    const double k2 = cfg.idler_channel.transmission * cfg.detector2.efficiency;
    const double pair = cfg.source.pair_rate_cps;
    const double delay = cfg.mzi1.delay_ps;
    const double sigma1 = cfg.detector1.jitter_sigma_ps();
    const double sigma2 = cfg.detector2.jitter_sigma_ps();
    const double total_ps = cfg.acquisition_time_s * ps_per_s;

    std::vector<Event> ev1, ev2;
    {
        double singles1 = pair * outcomes.p_monitored() * k1 + cfg.detector1.dark_rate_cps +
                          cfg.detector1.fluorescence_rate_cps;
        double singles2 = pair * outcomes.p_monitored() * k2 + cfg.detector2.dark_rate_cps +
                          cfg.detector2.fluorescence_rate_cps;
        ev1.reserve(static_cast<std::size_t>(singles1 * cfg.acquisition_time_s * 1.02) + 64);
        ev2.reserve(static_cast<std::size_t>(singles2 * cfg.acquisition_time_s * 1.02) + 64);
    }

    for (int chunk = 0; chunk < options.chunks; ++chunk) {
        double t0 = total_ps * chunk / options.chunks;
        double t1 = total_ps * (chunk + 1) / options.chunks;
        auto stream_rng = [&](std::uint64_t stream) {
            return Rng(derive_seed(seed, static_cast<std::uint64_t>(chunk), stream));
        };

        // Pairs with both photons detected: the coincidence classes.
        for (int cls = 0; cls < 3; ++cls) {
            Rng rng = stream_rng(BothLeft + cls);
            TagOrigin origin = class_origin(cls);
            poisson_stream(rng, pair * p_class[cls] * k1 * k2, t0, t1, [&](double t) {
                double d1 = 0.0, d2 = 0.0;
                if (cls == 0) {
                    d1 = delay;  // detector-1 photon took the long arm
                } else if (cls == 2) {
                    d2 = delay;
                } else {
                    double both_long = (rng.uniform() < 0.5) ? delay : 0.0;
                    d1 = d2 = both_long;
                }
                push_tag(ev1, t + d1 + rng.normal(sigma1), origin);
                push_tag(ev2, t + d2 + rng.normal(sigma2), origin);
            });
        }

        // Pairs where only one photon survived loss/efficiency: singles.
        for (int cls = 0; cls < 3; ++cls) {
            Rng rng = stream_rng(D1OnlyLeft + cls);
            TagOrigin origin = class_origin(cls);
            poisson_stream(rng, pair * p_class[cls] * k1 * (1.0 - k2), t0, t1, [&](double t) {
                double d = (cls == 0) ? delay : (cls == 1 && rng.uniform() < 0.5 ? delay : 0.0);
                push_tag(ev1, t + d + rng.normal(sigma1), origin);
            });
        }
        for (int cls = 0; cls < 3; ++cls) {
            Rng rng = stream_rng(D2OnlyLeft + cls);
            TagOrigin origin = class_origin(cls);
            poisson_stream(rng, pair * p_class[cls] * (1.0 - k1) * k2, t0, t1, [&](double t) {
                double d = (cls == 2) ? delay : (cls == 1 && rng.uniform() < 0.5 ? delay : 0.0);
                push_tag(ev2, t + d + rng.normal(sigma2), origin);
            });
        }

        // Noise: uniform over the acquisition, no jitter needed.
        {
            Rng rng = stream_rng(Dark1);
            poisson_stream(rng, cfg.detector1.dark_rate_cps, t0, t1,
                           [&](double t) { push_tag(ev1, t, TagOrigin::Dark); });
        }
        {
            Rng rng = stream_rng(Dark2);
            poisson_stream(rng, cfg.detector2.dark_rate_cps, t0, t1,
                           [&](double t) { push_tag(ev2, t, TagOrigin::Dark); });
        }
        {
            Rng rng = stream_rng(Fluor1);
            poisson_stream(rng, cfg.detector1.fluorescence_rate_cps, t0, t1,
                           [&](double t) { push_tag(ev1, t, TagOrigin::Fluorescence); });
        }
        {
            Rng rng = stream_rng(Fluor2);
            poisson_stream(rng, cfg.detector2.fluorescence_rate_cps, t0, t1,
                           [&](double t) { push_tag(ev2, t, TagOrigin::Fluorescence); });
        }
    }

    auto finalize = [&](std::vector<Event>& events, double dead_time_ps) {
        std::sort(events.begin(), events.end(),
                  [](const Event& a, const Event& b) { return a.t < b.t; });
        apply_dead_time(events, dead_time_ps);
        DetectorStream stream;
        stream.timestamps_ps.reserve(events.size());
        stream.origins.reserve(events.size());
        for (const Event& e : events) {
            stream.timestamps_ps.push_back(e.t);
            stream.origins.push_back(e.origin);
        }
        return stream;
    };

    SimulationResult result;
    result.detector1 = finalize(ev1, cfg.detector1.dead_time_ps);
    result.detector2 = finalize(ev2, cfg.detector2.dead_time_ps);
    result.acquisition_time_s = cfg.acquisition_time_s;
    return result;
}

struct SinglesCounts {
    std::size_t count_1 = 0;
    std::size_t count_2 = 0;
    double rate_1_cps = 0.0;
    double rate_2_cps = 0.0;
};

inline SinglesCounts singles_counts(const SimulationResult& result) {
    SinglesCounts s;
    s.count_1 = result.detector1.size();
    s.count_2 = result.detector2.size();
    if (result.acquisition_time_s > 0.0) {
        s.rate_1_cps = static_cast<double>(s.count_1) / result.acquisition_time_s;
        s.rate_2_cps = static_cast<double>(s.count_2) / result.acquisition_time_s;
    }
    return s;
}

}  // namespace franson
