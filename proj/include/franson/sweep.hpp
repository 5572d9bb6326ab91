// SPDX-License-Identifier: Apache-2.0
//
// Fringe-scan driver: one simulated acquisition per phi1 grid point at a
// fixed phi2, correlated and reduced to the three peak counts. Points may
// run in parallel; outputs are ordered by phi1 and depend only on the
// scenario, the master seed and the grid.
#pragma once

#include <future>
#include <vector>

#include "franson/analysis.hpp"
#include "franson/montecarlo.hpp"
#include "franson/timetag.hpp"

namespace franson {

struct SweepOptions {
    int phi1_steps = 18;             // 20 degree spacing resolves one full fringe
    double time_per_point_s = 0.0;   // 0 = use the scenario's acquisition time
    int window_bins = 3;
    int jobs = 1;
    bool allow_invalid = false;
    std::vector<double> phi1_grid;   // explicit phases (rad); overrides phi1_steps
};

/// Seed used for the i-th sweep point; exposed so a standalone simulate run
/// can reproduce a single point of a sweep exactly.
inline std::uint64_t sweep_point_seed(std::uint64_t master_seed, int index) {
    return derive_seed(master_seed, 0x5eedULL, static_cast<std::uint64_t>(index));
}

/// Runs `phi1_steps` simulations with phi1 on a uniform [0, 2pi) grid and
/// the given phi2, and reduces each to peak counts. The per-point seed is
/// derived from (master seed, point index), so the scan is reproducible
/// regardless of the jobs setting.
inline FringeScan run_sweep(const ScenarioConfig& base, double phi2_rad,
                            std::uint64_t master_seed, const SweepOptions& options = {}) {
    const int n = options.phi1_grid.empty() ? options.phi1_steps
                                            : static_cast<int>(options.phi1_grid.size());
    if (n < 1) throw std::domain_error("run_sweep: need at least one phi1 point");
    const double time_s =
        options.time_per_point_s > 0.0 ? options.time_per_point_s : base.acquisition_time_s;

    FringeScan scan;
    scan.phi2_rad = detail::normalize_phase(phi2_rad);
    scan.acquisition_time_per_point_s = time_s;
    scan.samples.resize(static_cast<std::size_t>(n));

    std::vector<double> accidentals(static_cast<std::size_t>(n), 0.0);
    auto run_point = [&](int i) {
        ScenarioConfig cfg = base;
        cfg.mzi1.phase_rad = options.phi1_grid.empty()
                                 ? detail::normalize_phase(two_pi * i / n)
                                 : detail::normalize_phase(options.phi1_grid[static_cast<std::size_t>(i)]);
        cfg.mzi2.phase_rad = scan.phi2_rad;
        cfg.acquisition_time_s = time_s;
        SimulateOptions sim_opts;
        sim_opts.allow_invalid = options.allow_invalid;
        auto result = simulate(cfg, sweep_point_seed(master_seed, i), sim_opts);
        auto histogram = correlate(result, cfg.tia);
        double sigma = cfg.combined_jitter_sigma_ps();
        FringePoint point;
        point.phi1_rad = cfg.mzi1.phase_rad;
        point.peaks = extract_peaks(histogram, cfg.mzi1.delay_ps, sigma, options.window_bins);
        scan.samples[static_cast<std::size_t>(i)] = point;
        accidentals[static_cast<std::size_t>(i)] = estimate_accidental_in_window(
            histogram, cfg.mzi1.delay_ps, sigma, options.window_bins);
    };

    if (options.jobs <= 1) {
        for (int i = 0; i < n; ++i) run_point(i);
    } else {
        std::vector<std::future<void>> inflight;
        for (int i = 0; i < n; ++i) {
            if (static_cast<int>(inflight.size()) >= options.jobs) {
                inflight.front().get();
                inflight.erase(inflight.begin());
            }
            inflight.push_back(std::async(std::launch::async, run_point, i));
        }
        for (auto& f : inflight) f.get();
    }

    double acc = 0.0;
    for (double a : accidentals) acc += a;
    scan.accidental_per_point = acc / n;
    return scan;
}

}  // namespace franson
