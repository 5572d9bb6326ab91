// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance checks. Each test case prints one PASS/FAIL line
// so a log scan shows the verdict per criterion at a glance.

#include <catch2/catch_amalgamated.hpp>
#include <chrono>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "franson/quantum.hpp"
#include "franson/sweep.hpp"
#include "test_util.hpp"

using namespace franson;
using Catch::Approx;

namespace {

constexpr std::uint64_t kSeed = 20250817ull;

void verdict(const char* name, bool ok, const std::string& detail) {
    std::printf("[%s] %s  %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    CHECK(ok);
}

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct SweepResult {
    FringeScan scan;
    FringeFit fit;
    double wall_s = 0.0;
};

SweepResult run_reference_sweep(double phi2_rad) {
    auto cfg = testutil::reference_scenario();
    SweepOptions opts;
    opts.phi1_steps = 18;
    opts.time_per_point_s = 100.0;
    auto t0 = std::chrono::steady_clock::now();
    SweepResult r;
    r.scan = run_sweep(cfg, phi2_rad, kSeed, opts);
    r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.fit = fit_fringe(r.scan);
    return r;
}

const SweepResult& sweep180() {
    static const SweepResult r = run_reference_sweep(stats::pi);
    return r;
}

const SweepResult& sweep90() {
    static const SweepResult r = run_reference_sweep(stats::pi / 2.0);
    return r;
}

FringeFit ideal_fit(double phi2_rad) {
    auto cfg = testutil::ideal_scenario(1e5, 1.0);
    SweepOptions opts;
    opts.phi1_steps = 18;
    return fit_fringe(run_sweep(cfg, phi2_rad, kSeed + 1, opts));
}

}  // namespace

TEST_CASE("criterion 1: raw visibility at phi2 = 180 deg") {
    const auto& r = sweep180();
    bool ok = r.fit.visibility_err <= 0.01 && std::fabs(r.fit.visibility - 0.960) <= 0.025 &&
              r.wall_s <= 120.0;
    verdict("visibility reproduction", ok,
            fmt("V = %.4f +/- %.4f (target 0.960 +/- 0.025), %.1f s", r.fit.visibility,
                r.fit.visibility_err, r.wall_s));
}

TEST_CASE("criterion 2: CHSH violation") {
    auto own = chsh(sweep90().fit, sweep180().fit);
    bool own_ok = own.s_value > 2.0 && own.n_sigma >= 20.0;

    FringeFit v90, v180;
    v90.visibility = 0.943;
    v90.visibility_err = 0.007;
    v180.visibility = 0.960;
    v180.visibility_err = 0.007;
    auto ref = chsh(v90, v180);
    double combined = std::hypot(ref.s_err, 0.013);
    bool ref_ok = std::fabs(ref.s_value - 2.691) < 5e-4 && std::fabs(ref.s_err - 0.014) < 5e-4 &&
                  std::fabs(ref.s_value - 2.687) <= combined;

    verdict("CHSH reproduction", own_ok && ref_ok,
            fmt("own S = %.3f +/- %.3f (%.0f sigma); reference S = %.3f +/- %.3f", own.s_value,
                own.s_err, own.n_sigma, ref.s_value, ref.s_err));
}

TEST_CASE("criterion 3: background subtraction") {
    const auto& r = sweep180();
    auto corrected = background_subtract(r.scan, r.scan.accidental_per_point);
    bool ok = corrected.visibility >= 0.985 && std::fabs(corrected.visibility - 0.99) <= 0.01;
    verdict("background subtraction", ok,
            fmt("V = %.4f +/- %.4f after subtracting %.1f counts/point", corrected.visibility,
                corrected.visibility_err, r.scan.accidental_per_point));
}

TEST_CASE("criterion 4: ideal-limit visibility and Bell parameter") {
    auto f180 = ideal_fit(stats::pi);
    auto f90 = ideal_fit(stats::pi / 2.0);
    auto bell = chsh(f90, f180);
    const double tsirelson = 2.0 * std::sqrt(2.0);
    bool fit_ok = std::fabs(f180.visibility - 1.0) <= 3.0 * f180.visibility_err &&
                  std::fabs(bell.s_value - tsirelson) <= 3.0 * bell.s_err;

    // destructive interference: total phase pi with v = 1 forbids middle counts
    auto cfg = testutil::ideal_scenario(1e4, 10.0);
    cfg.mzi1.phase_rad = stats::pi;
    cfg.mzi2.phase_rad = 0.0;
    cfg.phase_offset_rad = 0.0;
    auto result = simulate(cfg, kSeed + 2);
    auto peaks = extract_peaks(correlate(result, cfg.tia), cfg.mzi1.delay_ps, 0.0);
    bool zero_ok = peaks.middle == 0 && peaks.left > 0 && peaks.right > 0;

    verdict("ideal limit", fit_ok && zero_ok,
            fmt("V = %.4f +/- %.4f, S = %.4f +/- %.4f, middle counts at total phase pi = %lld",
                f180.visibility, f180.visibility_err, bell.s_value, bell.s_err,
                static_cast<long long>(peaks.middle)));
}

TEST_CASE("criterion 5: oracle equivalence") {
    // amplitude-sum oracle for the joint outcome distribution
    auto brute_outcomes = [](double phi1, double phi2, double v) {
        const std::complex<double> a_ss{0.25, 0.0};
        const std::complex<double> a_ll = 0.25 * std::exp(std::complex<double>(0.0, phi1 + phi2));
        JointOutcomeDistribution d;
        d.p_left = std::norm(a_ss);
        d.p_right = std::norm(a_ss);
        d.p_middle = v * std::norm(a_ss + a_ll) + (1.0 - v) * (std::norm(a_ss) + std::norm(a_ll));
        d.p_unmonitored = 1.0 - d.p_left - d.p_middle - d.p_right;
        return d;
    };
    double max_err = 0.0;
    for (int i = 0; i < 100; ++i) {
        double phi1 = 0.177 * i - 3.0;
        double phi2 = 1.91 - 0.23 * i;
        double v = (i % 21) / 20.0;
        auto got = joint_outcomes(phi1, phi2, v);
        auto want = brute_outcomes(phi1, phi2, v);
        max_err = std::max({max_err, std::fabs(got.p_left - want.p_left),
                            std::fabs(got.p_middle - want.p_middle),
                            std::fabs(got.p_right - want.p_right),
                            std::fabs(got.p_unmonitored - want.p_unmonitored)});
    }
    bool outcomes_ok = max_err <= 1e-12;

    // all-pairs oracle for the correlator
    auto cfg = testutil::reference_scenario();
    Rng rng(77);
    int exact_matches = 0;
    for (int trial = 0; trial < 50; ++trial) {
        auto draw = [&](std::size_t n) {
            std::vector<std::int64_t> t(n);
            for (auto& x : t) x = static_cast<std::int64_t>(rng.uniform() * 2e5);
            std::sort(t.begin(), t.end());
            return t;
        };
        auto a = draw(1 + static_cast<std::size_t>(rng.uniform() * 999));
        auto b = draw(1 + static_cast<std::size_t>(rng.uniform() * 999));
        auto fast = correlate(a, b, cfg.tia);
        CoincidenceHistogram slow = fast;
        slow.counts.assign(slow.counts.size(), 0);
        slow.total_coincidences = 0;
        for (auto t1 : a)
            for (auto t2 : b) {
                int k = slow.bin_index(static_cast<double>(t2 - t1));
                if (k < 0) continue;
                ++slow.counts[static_cast<std::size_t>(k)];
                ++slow.total_coincidences;
            }
        if (fast.counts == slow.counts && fast.total_coincidences == slow.total_coincidences)
            ++exact_matches;
    }
    bool correlate_ok = exact_matches == 50;

    verdict("oracle equivalence", outcomes_ok && correlate_ok,
            fmt("outcome max error = %.2e, correlator exact on %d/50 streams", max_err,
                exact_matches));
}

TEST_CASE("criterion 6: side-peak flatness") {
    auto flat = side_peak_flatness(sweep180().scan);
    bool ok = flat.p_value_left > 0.01 && flat.p_value_right > 0.01;
    verdict("side-peak flatness", ok,
            fmt("chi2 constancy p: left = %.3f, right = %.3f", flat.p_value_left,
                flat.p_value_right));
}

TEST_CASE("criterion 7: histogram peak structure") {
    auto cfg = testutil::reference_scenario();
    cfg.acquisition_time_s = 300.0;
    auto h = correlate(simulate(cfg, kSeed + 3), cfg.tia);

    // flat background level away from the peaks
    double background = 0.0;
    int nb = 0;
    for (int i = 0; i < h.bin_count(); ++i) {
        if (std::fabs(h.bin_center_ps(i)) <= 900.0) continue;  // clear of all three peaks
        background += static_cast<double>(h.count_at(i));
        ++nb;
    }
    background /= std::max(nb, 1);

    // peaks: local maxima well above background
    double threshold = background + 8.0 * std::sqrt(background + 1.0);
    auto excess = [&](int k) { return static_cast<double>(h.count_at(k)) - background; };
    std::vector<double> centers;
    std::vector<double> fwhms;
    for (int i = 2; i < h.bin_count() - 2; ++i) {
        double c = static_cast<double>(h.count_at(i));
        if (c <= threshold) continue;
        // maximal within +/- 2 bins; ties resolve to the leftmost bin
        if (!(c > h.count_at(i - 1) && c > h.count_at(i - 2) && c >= h.count_at(i + 1) &&
              c >= h.count_at(i + 2)))
            continue;

        // half-maximum crossings by linear interpolation on the excess profile
        double half = excess(i) / 2.0;
        auto crossing = [&](int step) {
            int k = i;
            while (k + step >= 0 && k + step < h.bin_count() && excess(k + step) >= half)
                k += step;
            if (k + step < 0 || k + step >= h.bin_count()) return h.bin_center_ps(k);
            double inner = excess(k), outer = excess(k + step);
            return h.bin_center_ps(k) +
                   step * h.bin_width_ps * (inner - half) / (inner - outer);
        };
        double left = crossing(-1), right = crossing(+1);
        centers.push_back((left + right) / 2.0);
        // remove the bin-smear contribution (uniform kernel of one bin width)
        double sigma = (right - left) / stats::fwhm_over_sigma;
        double var = sigma * sigma - h.bin_width_ps * h.bin_width_ps / 12.0;
        fwhms.push_back(stats::fwhm_over_sigma * std::sqrt(std::max(var, 0.0)));
    }

    bool ok = centers.size() == 3;
    if (ok) {
        const double expected[3] = {-500.0, 0.0, 500.0};
        for (int p = 0; p < 3; ++p) {
            ok = ok && std::fabs(centers[static_cast<std::size_t>(p)] - expected[p]) < 50.0;
            double fw = fwhms[static_cast<std::size_t>(p)];
            ok = ok && fw > 212.0 * 0.85 && fw < 212.0 * 1.15;
        }
    }
    std::string detail = fmt("%zu peaks", centers.size());
    for (std::size_t p = 0; p < centers.size(); ++p)
        detail += fmt("; dt = %.0f ps, FWHM = %.0f ps", centers[p], fwhms[p]);
    verdict("histogram structure", ok, detail);
}

TEST_CASE("criterion 8: determinism and throughput") {
    auto cfg = testutil::reference_scenario();
    cfg.acquisition_time_s = 5.0;
    auto first = simulate(cfg, kSeed + 4);
    auto second = simulate(cfg, kSeed + 4);
    auto dir = std::filesystem::temp_directory_path();
    auto pa = (dir / "acc_det_a.ftag").string();
    auto pb = (dir / "acc_det_b.ftag").string();
    write_tags(first, pa);
    write_tags(second, pb);
    bool deterministic =
        first.detector1.timestamps_ps == second.detector1.timestamps_ps &&
        first.detector2.timestamps_ps == second.detector2.timestamps_ps &&
        testutil::read_file(pa) == testutil::read_file(pb);
    std::filesystem::remove(pa);
    std::filesystem::remove(pb);

    // 1e7 tags through the correlator
    Rng rng(kSeed + 5);
    auto draw = [&](std::size_t n) {
        std::vector<std::int64_t> t(n);
        std::int64_t now = 0;
        for (auto& x : t) {
            now += static_cast<std::int64_t>(rng.exponential(1.0 / 40000.0));  // 25 MHz
            x = now;
        }
        return t;
    };
    auto a = draw(5'000'000);
    auto b = draw(5'000'000);
    auto t0 = std::chrono::steady_clock::now();
    auto h = correlate(a, b, cfg.tia);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool fast_enough = secs < 5.0 && h.total_coincidences > 0;

    verdict("determinism and throughput", deterministic && fast_enough,
            fmt("repeat run byte-identical = %s; 1e7-tag correlation in %.2f s "
                "(%lld coincidences)",
                deterministic ? "yes" : "no", secs,
                static_cast<long long>(h.total_coincidences)));
}
