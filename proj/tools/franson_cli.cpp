// SPDX-License-Identifier: Apache-2.0
//
// franson: scenario validation, rate budgets, time-tag simulation,
// coincidence histograms, fringe sweeps and CHSH analysis from the command
// line. Exit codes: 0 success, 1 domain failure, 2 usage/IO failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "franson/analysis.hpp"
#include "franson/montecarlo.hpp"
#include "franson/quantum.hpp"
#include "franson/scenario.hpp"
#include "franson/sweep.hpp"
#include "franson/timetag.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* tool_version = "0.1.0";
constexpr int exit_ok = 0;
constexpr int exit_domain = 1;
constexpr int exit_usage = 2;

// Published reference values the report compares against.
constexpr double ref_v180 = 0.960, ref_v180_err = 0.007;
constexpr double ref_v90 = 0.943, ref_v90_err = 0.007;
constexpr double ref_v0 = 0.940, ref_v0_err = 0.007;
constexpr double ref_s = 2.687, ref_s_err = 0.013;

franson::ScenarioConfig load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw franson::ParseError("cannot open scenario file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return franson::load_scenario(ss.str());
}

std::uint64_t fnv1a64_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw franson::FormatError("cannot open for checksum: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Writes the run manifest; one per output directory.
void write_manifest(const fs::path& dir, const std::string& command,
                    const std::string& scenario_path, std::uint64_t seed,
                    const std::vector<fs::path>& artifacts) {
    json m;
    m["tool_version"] = tool_version;
    m["command"] = command;
    m["scenario"] = scenario_path;
    m["seed"] = seed;
    m["output_directory"] = dir.string();
    json sums = json::object();
    for (const auto& a : artifacts) sums[a.filename().string()] = hex64(fnv1a64_file(a));
    m["artifact_checksums"] = sums;
    std::ofstream out(dir / "manifest.json");
    out << m.dump(2) << "\n";
}

std::string joined_args(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        s += argv[i];
    }
    return s;
}

double deg2rad(double deg) { return deg * franson::stats::pi / 180.0; }
double rad2deg(double rad) { return rad * 180.0 / franson::stats::pi; }

int cmd_validate(const std::string& scenario_path, double margin) {
    auto cfg = load_scenario_file(scenario_path);
    auto report = franson::franson_validity(cfg, margin);
    for (const auto& c : report.conditions) {
        std::printf("%-40s ratio %10.4g  (>= %g)  %s\n", c.name.c_str(), c.ratio, c.threshold,
                    c.pass ? "PASS" : "FAIL");
    }
    std::printf("validity: %s\n", report.all_pass() ? "PASS" : "FAIL");
    return report.all_pass() ? exit_ok : exit_domain;
}

int cmd_rates(const std::string& scenario_path, double window_ps) {
    auto cfg = load_scenario_file(scenario_path);
    if (window_ps <= 0.0) window_ps = 3.0 * cfg.tia.bin_width_ps;
    auto b = franson::rate_budget(cfg, window_ps);
    std::printf("peak window                 %.0f ps\n", window_ps);
    std::printf("singles detector 1          %.4g cps\n", b.singles_rate_1);
    std::printf("singles detector 2          %.4g cps\n", b.singles_rate_2);
    std::printf("true middle-peak max        %.4g cps\n", b.true_coincidence_rate_middle_max);
    std::printf("accidental in window        %.4g cps\n", b.accidental_rate);
    std::printf("intrinsic visibility        %.6f\n", franson::intrinsic_visibility(cfg));
    std::printf("predicted raw visibility    %.6f\n", franson::predicted_raw_visibility(cfg));
    return exit_ok;
}

int cmd_simulate(const std::string& scenario_path, std::uint64_t seed, bool seed_given,
                 const std::string& out_dir, double phi1_deg, double phi2_deg, bool force,
                 const std::string& command) {
    auto cfg = load_scenario_file(scenario_path);
    if (!seed_given) seed = cfg.rng_seed;
    if (phi1_deg >= 0.0) cfg.mzi1.phase_rad = franson::detail::normalize_phase(deg2rad(phi1_deg));
    if (phi2_deg >= 0.0) cfg.mzi2.phase_rad = franson::detail::normalize_phase(deg2rad(phi2_deg));
    franson::SimulateOptions opts;
    opts.allow_invalid = force;
    auto result = franson::simulate(cfg, seed, opts);
    fs::create_directories(out_dir);
    fs::path tag_path = fs::path(out_dir) / "tags.ftag";
    franson::write_tags(result, tag_path.string());
    auto singles = franson::singles_counts(result);
    std::printf("tags: detector1 %zu, detector2 %zu (%.4g / %.4g cps)\n", singles.count_1,
                singles.count_2, singles.rate_1_cps, singles.rate_2_cps);
    std::printf("wrote %s\n", tag_path.string().c_str());
    write_manifest(out_dir, command, scenario_path, seed, {tag_path});
    return exit_ok;
}

int cmd_histogram(const std::string& tag_path, double bin_ps, double window_ps,
                  const std::string& out_path) {
    auto streams = franson::read_tags(tag_path);
    if (streams.sorted_on_read)
        std::fprintf(stderr, "warning: non-monotone timestamps in %s; sorted on read\n",
                     tag_path.c_str());
    franson::TiaSpec tia{bin_ps, window_ps};
    auto h = franson::correlate(streams.detector1, streams.detector2, tia);
    franson::write_histogram_csv(h, out_path);
    std::printf("total coincidences %lld across %d bins; wrote %s\n",
                static_cast<long long>(h.total_coincidences), h.bin_count(), out_path.c_str());
    return exit_ok;
}

int cmd_sweep(const std::string& scenario_path, double phi2_deg, int steps, double time_per_point,
              std::uint64_t seed, bool seed_given, const std::string& out_path, int jobs,
              double volts_max, bool force, const std::string& command) {
    auto cfg = load_scenario_file(scenario_path);
    if (!seed_given) seed = cfg.rng_seed;
    franson::SweepOptions opts;
    opts.phi1_steps = steps;
    opts.time_per_point_s = time_per_point;
    opts.jobs = jobs;
    opts.allow_invalid = force;
    if (volts_max > 0.0) {
        // Heater mode: sweep the drive voltage and convert through the
        // quadratic calibration instead of setting phases directly.
        if (cfg.mzi1.heater_coeff_rad_per_v2 <= 0.0)
            throw franson::ValidationError("mzi.1.heater_coeff_rad_per_v2",
                                           "required for --volts-max");
        for (int i = 0; i < steps; ++i) {
            double v = volts_max * i / steps;
            opts.phi1_grid.push_back(franson::volts_to_phase(v, cfg.mzi1.heater_coeff_rad_per_v2));
        }
    }
    auto scan = franson::run_sweep(cfg, deg2rad(phi2_deg), seed, opts);
    franson::write_scan_csv(scan, out_path);
    std::printf("wrote %s (%d points, %.3g s per point, accidental %.4g per point)\n",
                out_path.c_str(), static_cast<int>(scan.samples.size()),
                scan.acquisition_time_per_point_s, scan.accidental_per_point);
    fs::path dir = fs::path(out_path).parent_path();
    if (dir.empty()) dir = ".";
    write_manifest(dir, command, scenario_path, seed, {out_path});
    return exit_ok;
}

void print_fit_kv(std::ostream& os, const std::string& prefix, const franson::FringeFit& fit) {
    os.precision(10);
    os << prefix << ".visibility = " << fit.visibility << "\n";
    os << prefix << ".visibility_err = " << fit.visibility_err << "\n";
    os << prefix << ".amplitude = " << fit.amplitude << "\n";
    os << prefix << ".phase_offset_deg = " << rad2deg(fit.phase_offset) << "\n";
    os << prefix << ".chi2_per_dof = " << fit.chi2_per_dof << "\n";
    if (fit.clipped) os << prefix << ".clipped = 1\n";
    if (fit.over_subtraction_warning) os << prefix << ".over_subtraction_warning = 1\n";
}

void print_fit_csv(std::ostream& os, const std::string& name, const franson::FringeFit& fit) {
    os.precision(10);
    os << name << "," << fit.visibility << "," << fit.visibility_err << "," << fit.amplitude
       << "," << rad2deg(fit.phase_offset) << "," << fit.chi2_per_dof << "\n";
}

int cmd_analyze(const std::string& scan0, const std::string& scan90, const std::string& scan180,
                const std::string& out_dir, const std::string& format,
                const std::string& command) {
    auto s90 = franson::read_scan_csv(scan90);
    auto s180 = franson::read_scan_csv(scan180);
    auto fit90 = franson::fit_fringe(s90);
    auto fit180 = franson::fit_fringe(s180);
    auto sub90 = franson::background_subtract(s90, s90.accidental_per_point);
    auto sub180 = franson::background_subtract(s180, s180.accidental_per_point);
    auto bell = franson::chsh(fit90, fit180);
    auto flat = franson::side_peak_flatness(s180);

    std::optional<franson::FringeFit> fit0;
    if (!scan0.empty()) fit0 = franson::fit_fringe(franson::read_scan_csv(scan0));

    fs::create_directories(out_dir);
    fs::path report_path = fs::path(out_dir) / (format == "csv" ? "report.csv" : "report.kv");
    std::ofstream out(report_path);
    if (format == "csv") {
        out << "fit,visibility,visibility_err,amplitude,phase_offset_deg,chi2_per_dof\n";
        if (fit0) print_fit_csv(out, "v0", *fit0);
        print_fit_csv(out, "v90", fit90);
        print_fit_csv(out, "v180", fit180);
        print_fit_csv(out, "v90_subtracted", sub90);
        print_fit_csv(out, "v180_subtracted", sub180);
        out.precision(10);
        out << "bell," << bell.s_value << "," << bell.s_err << ",,," << bell.n_sigma << "\n";
    } else {
        if (fit0) print_fit_kv(out, "v0", *fit0);
        print_fit_kv(out, "v90", fit90);
        print_fit_kv(out, "v180", fit180);
        print_fit_kv(out, "v90_subtracted", sub90);
        print_fit_kv(out, "v180_subtracted", sub180);
        out.precision(10);
        out << "bell.s = " << bell.s_value << "\n";
        out << "bell.s_err = " << bell.s_err << "\n";
        out << "bell.n_sigma = " << bell.n_sigma << "\n";
        out << "side_peaks.relative_std_left = " << flat.relative_std_left << "\n";
        out << "side_peaks.relative_std_right = " << flat.relative_std_right << "\n";
        out << "side_peaks.p_value_left = " << flat.p_value_left << "\n";
        out << "side_peaks.p_value_right = " << flat.p_value_right << "\n";
    }
    out.close();

    std::printf("V(90)  = %.4f +- %.4f   (subtracted %.4f)\n", fit90.visibility,
                fit90.visibility_err, sub90.visibility);
    std::printf("V(180) = %.4f +- %.4f   (subtracted %.4f)\n", fit180.visibility,
                fit180.visibility_err, sub180.visibility);
    if (fit0)
        std::printf("V(0)   = %.4f +- %.4f\n", fit0->visibility, fit0->visibility_err);
    std::printf("S = %.4f +- %.4f  (%.1f sigma above 2)\n", bell.s_value, bell.s_err,
                bell.n_sigma);
    std::printf("wrote %s\n", report_path.string().c_str());
    write_manifest(out_dir, command, "", 0, {report_path});
    return exit_ok;
}

std::map<std::string, double> read_kv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw franson::FormatError("cannot open: " + path.string());
    std::map<std::string, double> kv;
    std::string line;
    while (std::getline(in, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[franson::detail::trim(line.substr(0, eq))] = std::stod(line.substr(eq + 1));
    }
    return kv;
}

int cmd_report(const std::string& run_dir) {
    fs::path dir(run_dir);
    fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path))
        throw franson::FormatError("no manifest.json in " + run_dir);
    json manifest;
    {
        std::ifstream in(manifest_path);
        in >> manifest;
    }
    bool sums_ok = true;
    for (auto& [name, sum] : manifest["artifact_checksums"].items()) {
        fs::path p = dir / name;
        bool ok = fs::exists(p) && hex64(fnv1a64_file(p)) == sum.get<std::string>();
        if (!ok) sums_ok = false;
    }
    auto kv = read_kv(dir / "report.kv");
    auto get = [&](const std::string& k) {
        auto it = kv.find(k);
        if (it == kv.end()) throw franson::FormatError("missing key in report.kv: " + k);
        return it->second;
    };

    fs::path out_path = dir / "report.md";
    std::ofstream out(out_path);
    out << "# Franson run report\n\n";
    out << "- tool version: " << manifest["tool_version"].get<std::string>() << "\n";
    out << "- command: `" << manifest["command"].get<std::string>() << "`\n";
    out << "- artifact checksums: " << (sums_ok ? "verified" : "MISMATCH") << "\n\n";
    out << "| quantity | simulated | reference |\n";
    out << "|---|---|---|\n";
    char buf[256];
    auto row = [&](const char* name, double v, double e, double rv, double re) {
        std::snprintf(buf, sizeof buf, "| %s | %.4f +- %.4f | %.3f +- %.3f |\n", name, v, e, rv,
                      re);
        out << buf;
    };
    if (kv.count("v0.visibility"))
        row("V(0)", get("v0.visibility"), get("v0.visibility_err"), ref_v0, ref_v0_err);
    row("V(90)", get("v90.visibility"), get("v90.visibility_err"), ref_v90, ref_v90_err);
    row("V(180)", get("v180.visibility"), get("v180.visibility_err"), ref_v180, ref_v180_err);
    row("S", get("bell.s"), get("bell.s_err"), ref_s, ref_s_err);
    std::snprintf(buf, sizeof buf, "| violation | %.1f sigma | > 52 sigma |\n",
                  get("bell.n_sigma"));
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "| V(180) subtracted | %.4f +- %.4f | ~0.99 |\n",
                  get("v180_subtracted.visibility"), get("v180_subtracted.visibility_err"));
    out << buf;
    out.close();

    std::ifstream echo(out_path);
    std::cout << echo.rdbuf();
    if (!sums_ok) {
        std::fprintf(stderr, "error: artifact checksums do not match the manifest\n");
        return exit_domain;
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Franson interferometry simulator and analysis toolkit"};
    app.set_version_flag("--version", tool_version);
    app.require_subcommand(1);
    std::string command_line = joined_args(argc, argv);

    std::string scenario_path, tag_path, out_path = "out", scan0, scan90, scan180, run_dir;
    std::string format = "kv";
    double margin = 0.0, window_ps = 0.0, bin_ps = 64.0, hist_window_ps = 1500.0;
    double phi1_deg = -1.0, phi2_deg = -1.0, sweep_phi2_deg = 180.0;
    double time_per_point = 0.0, volts_max = 0.0;
    int steps = 18, jobs = 1;
    std::uint64_t seed = 0;
    bool force = false;

    auto* validate = app.add_subcommand("validate", "check the Franson validity hierarchy");
    validate->add_option("scenario", scenario_path)->required();
    validate->add_option("--margin", margin, "required ratio for each 'smaller than'");

    auto* rates = app.add_subcommand("rates", "print the expected count-rate budget");
    rates->add_option("scenario", scenario_path)->required();
    rates->add_option("--window", window_ps, "peak window in ps (default 3 bins)");

    auto* simulate = app.add_subcommand("simulate", "generate a detector time-tag file");
    simulate->add_option("scenario", scenario_path)->required();
    auto* sim_seed = simulate->add_option("--seed", seed, "master seed (default: scenario)");
    simulate->add_option("--out", out_path, "output directory");
    simulate->add_option("--phi1-deg", phi1_deg, "override MZI 1 phase");
    simulate->add_option("--phi2-deg", phi2_deg, "override MZI 2 phase");
    simulate->add_flag("--force", force, "proceed even if the validity check fails");

    auto* histogram = app.add_subcommand("histogram", "coincidence histogram from a tag file");
    histogram->add_option("tags", tag_path)->required();
    histogram->add_option("--bin", bin_ps, "bin width in ps");
    histogram->add_option("--window", hist_window_ps, "half-range in ps");
    histogram->add_option("--out", out_path, "output CSV path")->required();

    auto* sweep = app.add_subcommand("sweep", "fringe scan: one simulation per phi1 point");
    sweep->add_option("scenario", scenario_path)->required();
    sweep->add_option("--phi2", sweep_phi2_deg, "fixed MZI 2 phase in degrees");
    sweep->add_option("--phi1-steps", steps, "number of phi1 grid points");
    sweep->add_option("--time-per-point", time_per_point, "seconds per point");
    auto* sweep_seed = sweep->add_option("--seed", seed, "master seed (default: scenario)");
    sweep->add_option("--out", out_path, "output scan CSV")->required();
    sweep->add_option("--jobs", jobs, "parallel simulations");
    sweep->add_option("--volts-max", volts_max,
                      "sweep heater voltage 0..V instead of phase directly");
    sweep->add_flag("--force", force, "proceed even if the validity check fails");

    auto* analyze = app.add_subcommand("analyze", "fit fringes and compute the CHSH statistic");
    analyze->add_option("--scan0", scan0, "fringe scan CSV at phi2 = 0 (optional)");
    analyze->add_option("--scan90", scan90, "fringe scan CSV at phi2 = 90")->required();
    analyze->add_option("--scan180", scan180, "fringe scan CSV at phi2 = 180")->required();
    analyze->add_option("--out", out_path, "output directory");
    analyze->add_option("--format", format, "report format: kv or csv")
        ->check(CLI::IsMember({"kv", "csv"}));

    auto* report = app.add_subcommand("report", "consolidated comparison report for a run");
    report->add_option("dir", run_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    try {
        if (validate->parsed()) return cmd_validate(scenario_path, margin);
        if (rates->parsed()) return cmd_rates(scenario_path, window_ps);
        if (simulate->parsed())
            return cmd_simulate(scenario_path, seed, sim_seed->count() > 0, out_path, phi1_deg,
                                phi2_deg, force, command_line);
        if (histogram->parsed()) return cmd_histogram(tag_path, bin_ps, hist_window_ps, out_path);
        if (sweep->parsed())
            return cmd_sweep(scenario_path, sweep_phi2_deg, steps, time_per_point, seed,
                             sweep_seed->count() > 0, out_path, jobs, volts_max, force,
                             command_line);
        if (analyze->parsed())
            return cmd_analyze(scan0, scan90, scan180, out_path, format, command_line);
        if (report->parsed()) return cmd_report(run_dir);
    } catch (const franson::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_usage;
    } catch (const franson::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_usage;
    } catch (const franson::FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_usage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_domain;
    }
    return exit_usage;
}
