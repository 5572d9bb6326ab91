// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <complex>

#include "franson/quantum.hpp"
#include "test_util.hpp"

using namespace franson;
using Catch::Approx;

namespace {

// Independent oracle: enumerate the four path pairs through the two MZIs
// (amplitude 1/4 each), sum short-short and long-long coherently with the
// intrinsic-visibility factor interpolating to the incoherent mixture, and
// take the cross terms incoherently.
JointOutcomeDistribution brute_force_outcomes(double phi1, double phi2, double v) {
    const std::complex<double> a_ss{0.25, 0.0};
    const std::complex<double> a_ll = 0.25 * std::exp(std::complex<double>(0.0, phi1 + phi2));
    double coherent = std::norm(a_ss + a_ll);
    double incoherent = std::norm(a_ss) + std::norm(a_ll);
    JointOutcomeDistribution d;
    d.p_left = std::norm(std::complex<double>(0.25, 0.0));   // short-long
    d.p_right = std::norm(std::complex<double>(0.25, 0.0));  // long-short
    d.p_middle = v * coherent + (1.0 - v) * incoherent;
    d.p_unmonitored = 1.0 - d.p_left - d.p_middle - d.p_right;
    return d;
}

}  // namespace

TEST_CASE("joint outcomes match the amplitude-sum oracle on a phase grid") {
    for (int i = 0; i < 10; ++i) {
        for (int j = 0; j < 10; ++j) {
            double phi1 = two_pi * i / 10.0 + 0.05;
            double phi2 = two_pi * j / 10.0 - 0.35;
            for (double v : {0.0, 0.5, 1.0}) {
                auto got = joint_outcomes(phi1, phi2, v);
                auto want = brute_force_outcomes(phi1, phi2, v);
                CHECK(got.p_left == Approx(want.p_left).margin(1e-12));
                CHECK(got.p_middle == Approx(want.p_middle).margin(1e-12));
                CHECK(got.p_right == Approx(want.p_right).margin(1e-12));
                CHECK(got.p_unmonitored == Approx(want.p_unmonitored).margin(1e-12));
            }
        }
    }
}

TEST_CASE("joint outcome extremes") {
    auto min = joint_outcomes(stats::pi / 2.0, stats::pi / 2.0, 1.0);  // phase sum pi
    CHECK(min.p_middle == Approx(0.0).margin(1e-15));

    auto max = joint_outcomes(two_pi, 0.0, 1.0);
    CHECK(max.p_middle == Approx(0.25).margin(1e-12));
    CHECK(max.p_middle == Approx(4.0 * max.p_left).epsilon(1e-12));

    auto incoherent = joint_outcomes(1.234, 4.321, 0.0);
    CHECK(incoherent.p_middle == Approx(0.125));
    CHECK(incoherent.p_middle == Approx(2.0 * incoherent.p_left));
}

TEST_CASE("joint outcome invariants") {
    for (int i = 0; i < 50; ++i) {
        double phi1 = 0.137 * i;
        double phi2 = 2.03 - 0.09 * i;
        double v = (i % 11) / 10.0;
        auto d = joint_outcomes(phi1, phi2, v);
        // unitarity
        CHECK(d.p_left + d.p_middle + d.p_right + d.p_unmonitored == Approx(1.0).margin(1e-12));
        // side peaks constant, independent of phases
        CHECK(d.p_left == 1.0 / 16.0);
        CHECK(d.p_right == 1.0 / 16.0);
        // the fringe depends only on phi1 + phi2
        auto shifted = joint_outcomes(phi1 + 0.7, phi2 - 0.7, v);
        CHECK(shifted.p_middle == Approx(d.p_middle).margin(1e-12));
    }

    // fringe complementarity: p_middle(phase) + p_middle(phase + pi) = 1/4
    for (double phi = 0.0; phi < two_pi; phi += 0.3) {
        auto a = joint_outcomes(phi, 0.0, 0.83);
        auto b = joint_outcomes(phi + stats::pi, 0.0, 0.83);
        CHECK(a.p_middle + b.p_middle == Approx(0.25).margin(1e-12));
    }
}

TEST_CASE("middle-peak fringe visibility equals the intrinsic factor") {
    for (double v : {0.0, 0.3, 0.77, 1.0}) {
        double pmax = joint_outcomes(0.0, 0.0, v).p_middle;
        double pmin = joint_outcomes(stats::pi, 0.0, v).p_middle;
        if (pmax + pmin > 0.0)
            CHECK((pmax - pmin) / (pmax + pmin) == Approx(v).margin(1e-12));
    }
    CHECK_THROWS_AS(joint_outcomes(0.0, 0.0, 1.5), std::domain_error);
}

TEST_CASE("mismatch visibility from the Gaussian spectral overlap") {
    auto src = testutil::reference_scenario().source;
    CHECK(mismatch_visibility(0.0, src) == 1.0);
    // 50 fs against a ~1 ps coherence time is negligible
    CHECK(mismatch_visibility(0.05, src) >= 0.99);
    CHECK(mismatch_visibility(100.0, src) == Approx(0.0).margin(1e-12));
    // half at one coherence time (FWHM definition), strictly decreasing
    CHECK(mismatch_visibility(src.coherence_time_ps() / 2.0, src) == Approx(0.5));
    double prev = 1.1;
    for (double dt = 0.0; dt < 3.0; dt += 0.1) {
        double v = mismatch_visibility(dt, src);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("rate budget with reference parameters") {
    auto cfg = testutil::reference_scenario();
    auto b = rate_budget(cfg, 192.0);  // 3 x 64 ps window
    CHECK(b.singles_rate_1 == Approx(2.6e4));
    CHECK(b.singles_rate_2 == Approx(2.6e4));
    CHECK(b.true_coincidence_rate_middle_max == Approx(8.0));
    CHECK(b.accidental_rate == Approx(0.13).margin(0.005));
}

TEST_CASE("rate budget edge cases") {
    auto cfg = testutil::reference_scenario();
    cfg.source.pair_rate_cps = 0.0;
    auto b = rate_budget(cfg, 192.0);
    CHECK(b.singles_rate_1 == Approx(1e4));  // dark + fluorescence only
    CHECK(b.true_coincidence_rate_middle_max == 0.0);

    auto base = rate_budget(testutil::reference_scenario(), 192.0);
    auto doubled = rate_budget(testutil::reference_scenario(), 384.0);
    CHECK(doubled.accidental_rate == Approx(2.0 * base.accidental_rate).epsilon(1e-12));
}

TEST_CASE("predicted raw visibility") {
    auto cfg = testutil::reference_scenario();
    double v = predicted_raw_visibility(cfg);
    // accidental-limited model must bracket the observed 96.0 +- 0.7 %
    CHECK(v > 0.93);
    CHECK(v < 0.985);

    // consistency with the rate budget: V = v_int C / (C + B)
    double window = 3.0 * cfg.tia.bin_width_ps;
    auto b = rate_budget(cfg, window);
    double capture = stats::gaussian_window_fraction(window / 2.0, cfg.combined_jitter_sigma_ps());
    double mean_true = b.true_coincidence_rate_middle_max / 2.0 * capture;
    CHECK(v == Approx(intrinsic_visibility(cfg) * mean_true / (mean_true + b.accidental_rate))
                   .epsilon(1e-12));

    // negligible background: visibility approaches the intrinsic factor
    cfg.source.pair_rate_cps = 1e-3;
    for (auto* d : {&cfg.detector1, &cfg.detector2}) {
        d->dark_rate_cps = 0.0;
        d->fluorescence_rate_cps = 0.0;
    }
    cfg.mzi1.delay_mismatch_fs = 0.0;
    cfg.mzi2.delay_mismatch_fs = 0.0;
    CHECK(predicted_raw_visibility(cfg) == Approx(1.0).margin(1e-6));
}
