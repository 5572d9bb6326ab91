// SPDX-License-Identifier: Apache-2.0
//
// Histogram peak extraction, sinusoidal fringe fitting with Poisson
// weights, visibility and background subtraction, and the CHSH statistic
// computed from two fringe visibilities.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "franson/rng.hpp"
#include "franson/stats.hpp"
#include "franson/timetag.hpp"

namespace franson {

/// Counts inside the three peak windows of a coincidence histogram.
struct PeakCounts {
    std::int64_t left = 0;
    std::int64_t middle = 0;
    std::int64_t right = 0;
    int window_bins = 3;
    double capture_fraction = 1.0;  // expected in-window share of a jitter-broadened peak
};

/// Sums `window_bins` bins centered on dt = {-delay, 0, +delay}.
/// `jitter_sigma_ps` is the combined (quadrature) detector jitter of the
/// arrival-time difference; zero means a delta peak and capture fraction 1.
inline PeakCounts extract_peaks(const CoincidenceHistogram& h, double delay_ps,
                                double jitter_sigma_ps, int window_bins = 3) {
    if (window_bins < 1 || window_bins % 2 == 0)
        throw std::domain_error("extract_peaks: window_bins must be odd and >= 1");
    int k_mid = h.bin_index(0.0);
    int k_left = h.bin_index(-delay_ps);
    int k_right = h.bin_index(delay_ps);
    if (k_left < 0 || k_right < 0)
        throw std::domain_error("extract_peaks: delay outside the histogram range");
    if (k_right - k_mid < window_bins)
        throw std::domain_error("extract_peaks: peak windows overlap");
    int half = (window_bins - 1) / 2;
    if (k_left - half < 0 || k_right + half >= h.bin_count())
        throw std::domain_error("extract_peaks: peak window exceeds the histogram range");

    auto window_sum = [&](int center) {
        std::int64_t sum = 0;
        for (int k = center - half; k <= center + half; ++k) sum += h.count_at(k);
        return sum;
    };

    PeakCounts p;
    p.left = window_sum(k_left);
    p.middle = window_sum(k_mid);
    p.right = window_sum(k_right);
    p.window_bins = window_bins;
    p.capture_fraction =
        stats::gaussian_window_fraction(window_bins * h.bin_width_ps / 2.0, jitter_sigma_ps);
    return p;
}

/// Mean per-bin count of the histogram regions away from all three peaks,
/// scaled to a `window_bins`-wide window: the data-driven accidental
/// (flat background) estimate.
inline double estimate_accidental_in_window(const CoincidenceHistogram& h, double delay_ps,
                                            double jitter_sigma_ps, int window_bins = 3) {
    double exclusion = 3.0 * window_bins * h.bin_width_ps / 2.0 + 4.0 * jitter_sigma_ps;
    double sum = 0.0;
    int n = 0;
    for (int i = 0; i < h.bin_count(); ++i) {
        double c = h.bin_center_ps(i);
        if (std::fabs(c) < exclusion || std::fabs(c - delay_ps) < exclusion ||
            std::fabs(c + delay_ps) < exclusion)
            continue;
        sum += static_cast<double>(h.count_at(i));
        ++n;
    }
    if (n == 0) return 0.0;
    return sum / n * window_bins;
}

struct FringePoint {
    double phi1_rad = 0.0;
    PeakCounts peaks;
};

/// Middle/side peak counts sampled over phi1 at a fixed phi2.
struct FringeScan {
    double phi2_rad = 0.0;
    std::vector<FringePoint> samples;
    double acquisition_time_per_point_s = 0.0;
    double accidental_per_point = 0.0;  // estimated flat background per point
};

struct FringeFit {
    double visibility = 0.0;
    double visibility_err = 0.0;
    double amplitude = 0.0;     // mean counts A in C = A (1 + V cos(phi1 + phi0))
    double phase_offset = 0.0;  // phi0, in [0, 2pi)
    double chi2_per_dof = 0.0;
    bool clipped = false;                  // fit exceeded [0, 1] and was clipped
    bool over_subtraction_warning = false; // background subtraction exceeded the fringe minimum
};

namespace detail_fit {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Vec3 = std::array<double, 3>;

inline Mat3 invert(const Mat3& m) {
    Mat3 a = m;
    Mat3 inv{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        if (std::fabs(a[piv][col]) < 1e-300)
            throw std::runtime_error("fit_fringe: singular normal equations (degenerate scan)");
        std::swap(a[piv], a[col]);
        std::swap(inv[piv], inv[col]);
        double d = a[col][col];
        for (int c = 0; c < 3; ++c) {
            a[col][c] /= d;
            inv[col][c] /= d;
        }
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            double f = a[r][col];
            for (int c = 0; c < 3; ++c) {
                a[r][c] -= f * a[col][c];
                inv[r][c] -= f * inv[col][c];
            }
        }
    }
    return inv;
}

inline void check_scan(const FringeScan& scan) {
    std::vector<double> phis;
    for (const auto& s : scan.samples) phis.push_back(s.phi1_rad);
    std::sort(phis.begin(), phis.end());
    phis.erase(std::unique(phis.begin(), phis.end()), phis.end());
    std::size_t n = phis.size();
    if (n < 5) throw std::domain_error("fit_fringe: need >= 5 distinct phi1 values");
    // A uniform grid over the full circle spans 2 pi (n-1)/n; require that.
    double span = phis.back() - phis.front();
    if (span < two_pi * (static_cast<double>(n) - 1.0) / static_cast<double>(n) - 1e-9)
        throw std::domain_error("fit_fringe: phi1 values must span a full fringe period");
}

}  // namespace detail_fit

/// Weighted least squares of C(phi1) = A (1 + V cos(phi1 + phi0)) on the
/// middle-peak counts, with per-point Poisson weight 1/max(C, 1). The model
/// is linear in (A, A V cos phi0, -A V sin phi0); V and its standard error
/// come from the solution and its covariance.
inline FringeFit fit_fringe(const FringeScan& scan,
                            const std::vector<double>* middle_override = nullptr) {
    detail_fit::check_scan(scan);
    const std::size_t n = scan.samples.size();
    bool any_nonzero = false;

    detail_fit::Mat3 ata{};
    detail_fit::Vec3 atb{};
    for (std::size_t i = 0; i < n; ++i) {
        double c = middle_override ? (*middle_override)[i]
                                   : static_cast<double>(scan.samples[i].peaks.middle);
        if (c != 0.0) any_nonzero = true;
        double w = 1.0 / std::max(c, 1.0);
        double phi = scan.samples[i].phi1_rad;
        detail_fit::Vec3 x{1.0, std::cos(phi), std::sin(phi)};
        for (int r = 0; r < 3; ++r) {
            for (int col = 0; col < 3; ++col) ata[r][col] += w * x[r] * x[col];
            atb[r] += w * x[r] * c;
        }
    }
    if (!any_nonzero) throw std::domain_error("fit_fringe: all middle counts are zero");

    detail_fit::Mat3 cov = detail_fit::invert(ata);
    detail_fit::Vec3 beta{};
    for (int r = 0; r < 3; ++r)
        for (int col = 0; col < 3; ++col) beta[r] += cov[r][col] * atb[col];

    const double a0 = beta[0], a1 = beta[1], a2 = beta[2];
    if (a0 <= 0.0) throw std::runtime_error("fit_fringe: non-positive fitted mean");

    FringeFit fit;
    fit.amplitude = a0;
    double r = std::hypot(a1, a2);
    fit.visibility = r / a0;
    fit.phase_offset = detail::normalize_phase(std::atan2(-a2, a1));

    // Delta-method error from the weighted-fit covariance.
    detail_fit::Vec3 g;
    if (r > 1e-12 * a0) {
        g = {-r / (a0 * a0), a1 / (r * a0), a2 / (r * a0)};
    } else {
        g = {0.0, 1.0 / a0, 1.0 / a0};  // direction-free bound at V = 0
    }
    double var = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) var += g[i] * cov[i][j] * g[j];
    fit.visibility_err = std::sqrt(std::max(var, 0.0));
    if (fit.visibility_err <= 0.0) fit.visibility_err = 1e-12;

    double chi2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double c = middle_override ? (*middle_override)[i]
                                   : static_cast<double>(scan.samples[i].peaks.middle);
        double phi = scan.samples[i].phi1_rad;
        double model = a0 + a1 * std::cos(phi) + a2 * std::sin(phi);
        double w = 1.0 / std::max(c, 1.0);
        chi2 += w * (c - model) * (c - model);
    }
    fit.chi2_per_dof = n > 3 ? chi2 / static_cast<double>(n - 3) : 0.0;

    if (fit.visibility > 1.0) {
        fit.visibility = 1.0;
        fit.clipped = true;
    }
    return fit;
}

/// Bootstrap cross-check of the visibility error: refits resampled scans
/// and returns the standard deviation of the visibilities.
inline double bootstrap_visibility_err(const FringeScan& scan, int resamples = 200,
                                       std::uint64_t seed = 1) {
    detail_fit::check_scan(scan);
    Rng rng(seed);
    std::vector<double> vs;
    vs.reserve(static_cast<std::size_t>(resamples));
    for (int b = 0; b < resamples; ++b) {
        FringeScan resampled = scan;
        resampled.samples.clear();
        for (std::size_t i = 0; i < scan.samples.size(); ++i) {
            std::size_t pick =
                static_cast<std::size_t>(rng.uniform() * static_cast<double>(scan.samples.size()));
            resampled.samples.push_back(scan.samples[std::min(pick, scan.samples.size() - 1)]);
        }
        try {
            vs.push_back(fit_fringe(resampled).visibility);
        } catch (const std::exception&) {
            // degenerate resample; skip
        }
    }
    if (vs.size() < 2) return 0.0;
    double mean = 0.0;
    for (double v : vs) mean += v;
    mean /= static_cast<double>(vs.size());
    double var = 0.0;
    for (double v : vs) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(vs.size() - 1));
}

/// Constancy of the side peaks over the sweep: relative standard deviation
/// and a chi-square test against a constant (Poisson) level.
struct FlatnessReport {
    double relative_std_left = 0.0;
    double relative_std_right = 0.0;
    double p_value_left = 1.0;
    double p_value_right = 1.0;
};

inline FlatnessReport side_peak_flatness(const FringeScan& scan) {
    auto stats_for = [&](bool left) {
        std::vector<double> counts;
        for (const auto& s : scan.samples)
            counts.push_back(static_cast<double>(left ? s.peaks.left : s.peaks.right));
        double mean = 0.0;
        for (double c : counts) mean += c;
        mean /= std::max<std::size_t>(counts.size(), 1);
        double var = 0.0;
        for (double c : counts) var += (c - mean) * (c - mean);
        if (counts.size() > 1) var /= static_cast<double>(counts.size() - 1);
        double rel = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
        auto test = stats::chi2_constancy(counts);
        return std::pair<double, double>{rel, test.p_value};
    };
    FlatnessReport r;
    std::tie(r.relative_std_left, r.p_value_left) = stats_for(true);
    std::tie(r.relative_std_right, r.p_value_right) = stats_for(false);
    return r;
}

/// Refits after removing a constant accidental background from every middle
/// count (floored at zero). Flags probable over-subtraction.
inline FringeFit background_subtract(const FringeScan& scan, double accidental_per_point) {
    if (accidental_per_point < 0.0)
        throw std::domain_error("background_subtract: accidental must be >= 0");
    double min_middle = std::numeric_limits<double>::max();
    std::vector<double> corrected;
    corrected.reserve(scan.samples.size());
    for (const auto& s : scan.samples) {
        double c = static_cast<double>(s.peaks.middle);
        min_middle = std::min(min_middle, c);
        corrected.push_back(std::max(0.0, c - accidental_per_point));
    }
    FringeFit fit = fit_fringe(scan, &corrected);
    if (accidental_per_point > min_middle + 3.0 * std::sqrt(std::max(min_middle, 1.0)))
        fit.over_subtraction_warning = true;
    return fit;
}

/// CHSH statistic from the two fringe visibilities: S = sqrt(2) (V90 + V180).
struct BellResult {
    FringeFit v90;
    FringeFit v180;
    double s_value = 0.0;
    double s_err = 0.0;
    double n_sigma = 0.0;  // (S - 2) / sigma_S
};

inline BellResult chsh(const FringeFit& fit90, const FringeFit& fit180) {
    BellResult r;
    r.v90 = fit90;
    r.v180 = fit180;
    r.s_value = std::sqrt(2.0) * (fit90.visibility + fit180.visibility);
    r.s_err = std::sqrt(2.0) * std::hypot(fit90.visibility_err, fit180.visibility_err);
    r.n_sigma = r.s_err > 0.0 ? (r.s_value - 2.0) / r.s_err
                              : std::numeric_limits<double>::infinity();
    return r;
}

// ---------------------------------------------------------------------------
// Fringe scan CSV
// ---------------------------------------------------------------------------

inline void write_scan_csv(const FringeScan& scan, std::ostream& os) {
    os.precision(17);
    os << "# phi2_deg = " << scan.phi2_rad * 180.0 / stats::pi << "\n";
    os << "# acquisition_time_per_point_s = " << scan.acquisition_time_per_point_s << "\n";
    os << "# accidental_per_point = " << scan.accidental_per_point << "\n";
    if (!scan.samples.empty()) {
        os << "# window_bins = " << scan.samples.front().peaks.window_bins << "\n";
        os << "# capture_fraction = " << scan.samples.front().peaks.capture_fraction << "\n";
    }
    os << "phi1_deg,left,middle,right\n";
    for (const auto& s : scan.samples)
        os << s.phi1_rad * 180.0 / stats::pi << "," << s.peaks.left << "," << s.peaks.middle
           << "," << s.peaks.right << "\n";
}

inline void write_scan_csv(const FringeScan& scan, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open for writing: " + path);
    write_scan_csv(scan, out);
}

inline FringeScan read_scan_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open: " + path);
    FringeScan scan;
    std::string line;
    std::size_t lineno = 0;
    int window_bins = 3;
    double capture = 1.0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = detail::trim(line.substr(1, eq - 1));
            double value = std::stod(line.substr(eq + 1));
            if (key == "phi2_deg") scan.phi2_rad = value * stats::pi / 180.0;
            else if (key == "acquisition_time_per_point_s") scan.acquisition_time_per_point_s = value;
            else if (key == "accidental_per_point") scan.accidental_per_point = value;
            else if (key == "window_bins") window_bins = static_cast<int>(value);
            else if (key == "capture_fraction") capture = value;
            continue;
        }
        if (line.find("phi1_deg") != std::string::npos) continue;  // header row
        std::istringstream ls(line);
        FringePoint p;
        char c1 = 0, c2 = 0, c3 = 0;
        double phi1_deg = 0.0;
        if (!(ls >> phi1_deg >> c1 >> p.peaks.left >> c2 >> p.peaks.middle >> c3 >>
              p.peaks.right) ||
            c1 != ',' || c2 != ',' || c3 != ',')
            throw FormatError("bad scan record at line " + std::to_string(lineno) + ": " + path);
        p.phi1_rad = phi1_deg * stats::pi / 180.0;
        p.peaks.window_bins = window_bins;
        p.peaks.capture_fraction = capture;
        scan.samples.push_back(p);
    }
    return scan;
}

}  // namespace franson
