// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "franson/scenario.hpp"
#include "test_util.hpp"

using namespace franson;
using Catch::Approx;

TEST_CASE("reference scenario loads with derived fields") {
    auto cfg = testutil::reference_scenario();
    CHECK(cfg.signal_channel.transmission == Approx(0.01));
    CHECK(cfg.idler_channel.transmission == Approx(0.01));
    CHECK(cfg.source.coherence_time_ps() == Approx(0.88).margin(0.15));  // "~ 1 ps"
    CHECK(cfg.combined_jitter_fwhm_ps() == Approx(212.13).margin(0.1));
    CHECK(cfg.mzi1.fsr_hz() == Approx(2e9));
}

TEST_CASE("zero loss means unit transmission") {
    CHECK(ChannelSpec::from_loss_db(0.0).transmission == 1.0);
}

TEST_CASE("validation errors name the offending field") {
    auto cfg = testutil::reference_scenario();
    cfg.detector1.efficiency = 1.3;
    try {
        cfg.validate();
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("efficiency") != std::string::npos);
    }

    cfg = testutil::reference_scenario();
    cfg.tia.correlation_window_ps = 800.0;  // < delay + 5 sigma_jitter
    try {
        cfg.validate();
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("correlation_window") != std::string::npos);
    }
}

TEST_CASE("parse errors") {
    CHECK_THROWS_AS(load_scenario("key = 1\n"), ParseError);          // key outside section
    CHECK_THROWS_AS(load_scenario("[source]\nnonsense\n"), ParseError);
    CHECK_THROWS_AS(load_scenario("[source]\n"), ParseError);         // missing keys
    CHECK_THROWS_AS(load_scenario("[source]\npump_wavelength_nm = abc\n"), ParseError);
}

TEST_CASE("serialize round-trips to an equal config") {
    auto cfg = testutil::reference_scenario();
    CHECK(load_scenario(serialize(cfg)) == cfg);

    cfg.mzi1.phase_rad = 1.2345678901234567;
    cfg.detector2.dead_time_ps = 12000.0;
    cfg.source.purity = 0.987654321;
    cfg.phase_offset_rad = 0.333;
    CHECK(load_scenario(serialize(cfg)) == cfg);
}

TEST_CASE("franson validity with reference parameters") {
    auto report = franson_validity(testutil::reference_scenario());
    REQUIRE(report.conditions.size() == 3);
    CHECK(report.all_pass());
    CHECK(report.conditions[0].ratio == Approx(2000.0));       // 2 GHz / 1 MHz
    CHECK(report.conditions[1].ratio > 500.0);                 // ~1.3 THz / 2 GHz
    CHECK(report.conditions[1].ratio < 700.0);
    CHECK(report.conditions[2].ratio == Approx(17.7).margin(5.0));  // tau_c / 50 fs
}

TEST_CASE("broad pump linewidth fails the first condition") {
    auto cfg = testutil::reference_scenario();
    cfg.source.pump_linewidth_hz = 2e9;  // equal to the FSR
    auto report = franson_validity(cfg);
    CHECK_FALSE(report.conditions[0].pass);
    CHECK(report.conditions[1].pass);
}

TEST_CASE("validity is monotone in pump linewidth") {
    auto cfg = testutil::reference_scenario();
    bool was_failing = false;
    for (double lw = 1e6; lw < 1e11; lw *= 3.0) {
        cfg.source.pump_linewidth_hz = lw;
        bool pass = franson_validity(cfg).conditions[0].pass;
        if (was_failing) CHECK_FALSE(pass);
        if (!pass) was_failing = true;
    }
    CHECK(was_failing);
}

TEST_CASE("heater law: phase proportional to voltage squared") {
    CHECK(volts_to_phase(0.0, 1.0) == 0.0);
    CHECK(volts_to_phase(2.0, stats::pi / 4.0) == Approx(stats::pi));
    // doubling the voltage quadruples the pre-modulo phase
    double coeff = 0.01;
    for (double v = 0.1; v < 5.0; v += 0.7)
        CHECK(volts_to_phase(2.0 * v, coeff) == Approx(4.0 * volts_to_phase(v, coeff)));
    // non-decreasing before the modulo reduction
    double prev = -1.0;
    for (double v = 0.0; v < 3.0; v += 0.05) {
        double pre_mod = coeff * v * v;
        CHECK(pre_mod >= prev);
        prev = pre_mod;
    }
    CHECK_THROWS_AS(volts_to_phase(-1.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(volts_to_phase(1.0, 0.0), std::domain_error);
}

TEST_CASE("band centers must straddle the degenerate wavelength") {
    auto cfg = testutil::reference_scenario();
    cfg.source.signal_center_nm = 1530.0;
    cfg.source.idler_center_nm = 1510.0;  // both below 1546
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
