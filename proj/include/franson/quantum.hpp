// SPDX-License-Identifier: Apache-2.0
//
// Closed-form model of the post-selected two-photon state behind the three
// coincidence peaks: joint path-outcome probabilities, intrinsic-visibility
// factors and the expected count-rate budget. Serves as the analytic oracle
// for the Monte Carlo simulator.
#pragma once

#include <cmath>
#include <stdexcept>

#include "franson/scenario.hpp"
#include "franson/stats.hpp"

namespace franson {

/// Probabilities of the post-selected pair outcomes per emitted pair.
/// `left` is the signal-short / idler-long class (arrival difference -dT),
/// `middle` the coherent short-short + long-long class (difference 0),
/// `right` the +dT class. `unmonitored` is the remainder: at least one
/// photon left through a port without a detector.
struct JointOutcomeDistribution {
    double p_left = 0.0;
    double p_middle = 0.0;
    double p_right = 0.0;
    double p_unmonitored = 0.0;

    double p_monitored() const { return p_left + p_middle + p_right; }
};

/// Outcome distribution for applied long-arm phases phi1, phi2 and an
/// intrinsic visibility factor. Each MZI contributes an amplitude of 1/2
/// per coupler; the short-short and long-long paths add coherently with
/// relative phase phi1 + phi2, the cross paths incoherently.
inline JointOutcomeDistribution joint_outcomes(double phi1, double phi2, double v_intrinsic) {
    if (v_intrinsic < 0.0 || v_intrinsic > 1.0)
        throw std::domain_error("joint_outcomes: v_intrinsic must be in [0, 1]");
    JointOutcomeDistribution d;
    d.p_left = 1.0 / 16.0;
    d.p_right = 1.0 / 16.0;
    d.p_middle = (1.0 + v_intrinsic * std::cos(phi1 + phi2)) / 8.0;
    d.p_unmonitored = 1.0 - d.p_left - d.p_middle - d.p_right;
    return d;
}

/// |normalized field autocorrelation| at lag `mismatch_ps` for the Gaussian
/// spectral model: 1 at zero lag, half at one coherence time.
inline double mismatch_visibility(double mismatch_ps, const SourceSpec& source) {
    double tau_c = source.coherence_time_ps();
    double x = mismatch_ps / tau_c;
    return std::exp(-4.0 * std::log(2.0) * x * x);
}

/// Intrinsic fringe visibility: delay-mismatch overlap times the optional
/// source-purity factor.
inline double intrinsic_visibility(const ScenarioConfig& cfg) {
    return mismatch_visibility(cfg.relative_mismatch_ps(), cfg.source) * cfg.source.purity;
}

/// Phase argument of the middle-peak fringe, including the constant offset.
inline double total_phase(const ScenarioConfig& cfg) {
    return cfg.mzi1.phase_rad + cfg.mzi2.phase_rad + cfg.phase_offset_rad;
}

struct RateBudget {
    double singles_rate_1 = 0.0;  // cps: pairs-derived + dark + fluorescence
    double singles_rate_2 = 0.0;
    double true_coincidence_rate_middle_max = 0.0;  // cps at phase sum 0, v = 1
    double accidental_rate = 0.0;                   // cps within the peak window
};

/// Expected count rates from the scenario parameters; `window_ps` is the
/// coincidence peak window width the accidentals are referred to.
inline RateBudget rate_budget(const ScenarioConfig& cfg, double window_ps) {
    if (window_ps <= 0.0) throw std::domain_error("rate_budget: window must be > 0");
    RateBudget b;
    double k1 = cfg.signal_channel.transmission * cfg.detector1.efficiency;
    double k2 = cfg.idler_channel.transmission * cfg.detector2.efficiency;
    double pair = cfg.source.pair_rate_cps;
    b.singles_rate_1 =
        pair * k1 + cfg.detector1.dark_rate_cps + cfg.detector1.fluorescence_rate_cps;
    b.singles_rate_2 =
        pair * k2 + cfg.detector2.dark_rate_cps + cfg.detector2.fluorescence_rate_cps;
    b.true_coincidence_rate_middle_max = pair * k1 * k2 / 4.0;
    b.accidental_rate = b.singles_rate_1 * b.singles_rate_2 * window_ps / ps_per_s;
    return b;
}

/// Raw (no background subtraction) middle-peak fringe visibility predicted
/// from the rate budget: the mean true in-window rate over the fringe,
/// diluted by the accidental rate in the same window, scaled by the
/// intrinsic visibility. Uses the standard 3-bin peak window so the
/// prediction is comparable like-for-like with the simulated analysis.
inline double predicted_raw_visibility(const ScenarioConfig& cfg, int window_bins = 3) {
    double window_ps = window_bins * cfg.tia.bin_width_ps;
    double capture =
        stats::gaussian_window_fraction(window_ps / 2.0, cfg.combined_jitter_sigma_ps());
    double k1 = cfg.signal_channel.transmission * cfg.detector1.efficiency;
    double k2 = cfg.idler_channel.transmission * cfg.detector2.efficiency;
    // Mean of p_middle over the phase sum is 1/8.
    double mean_true = cfg.source.pair_rate_cps * k1 * k2 / 8.0 * capture;
    double accidental = rate_budget(cfg, window_ps).accidental_rate;
    if (mean_true + accidental <= 0.0) return 0.0;
    return intrinsic_visibility(cfg) * mean_true / (mean_true + accidental);
}

}  // namespace franson
