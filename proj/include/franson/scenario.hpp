// SPDX-License-Identifier: Apache-2.0
//
// Apparatus description for a Franson interferometry run: SPDC source,
// per-branch channels, the two unbalanced MZIs, detectors and the time
// interval analyzer. Loaded from a flat sectioned key-value document,
// validated, and immutable afterwards.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "franson/stats.hpp"

namespace franson {

inline constexpr double speed_of_light_m_per_s = 299792458.0;
inline constexpr double two_pi = 2.0 * stats::pi;
inline constexpr double ps_per_s = 1e12;

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& field, const std::string& what)
        : std::runtime_error("invalid field '" + field + "': " + what), field(field) {}
    std::string field;
};

/// Gaussian spectral model: FWHM bandwidth in Hz of a band `width_nm` wide
/// centered at `center_nm`.
inline double bandwidth_hz(double center_nm, double width_nm) {
    double lambda = center_nm * 1e-9;
    return speed_of_light_m_per_s * width_nm * 1e-9 / (lambda * lambda);
}

/// Coherence time (ps), defined as the FWHM of the field autocorrelation
/// envelope of a Gaussian spectrum with FWHM `bw_hz`.
inline double coherence_time_ps_from_bandwidth(double bw_hz) {
    return 4.0 * std::log(2.0) / (stats::pi * bw_hz) * ps_per_s;
}

struct SourceSpec {
    double pump_wavelength_nm = 0.0;
    double pump_linewidth_hz = 0.0;
    double pair_rate_cps = 0.0;          // at waveguide output, within filtered band
    double signal_center_nm = 0.0;
    double idler_center_nm = 0.0;
    double effective_bandwidth_nm = 0.0; // conjugate-overlap band, per photon
    double spectral_extent_nm = 0.0;     // full per-photon extent; 0 = use effective
    double purity = 1.0;                 // extra intrinsic-visibility factor

    bool operator==(const SourceSpec&) const = default;

    double degenerate_wavelength_nm() const { return 2.0 * pump_wavelength_nm; }

    double effective_bandwidth_hz() const {
        double center = 0.5 * (signal_center_nm + idler_center_nm);
        return bandwidth_hz(center, effective_bandwidth_nm);
    }

    double spectral_extent_hz() const {
        double width = spectral_extent_nm > 0.0 ? spectral_extent_nm : effective_bandwidth_nm;
        double center = 0.5 * (signal_center_nm + idler_center_nm);
        return bandwidth_hz(center, width);
    }

    double coherence_time_ps() const {
        return coherence_time_ps_from_bandwidth(effective_bandwidth_hz());
    }

    void validate() const {
        if (pump_wavelength_nm <= 0.0) throw ValidationError("pump_wavelength_nm", "must be > 0");
        if (pump_linewidth_hz <= 0.0) throw ValidationError("pump_linewidth_hz", "must be > 0");
        if (pair_rate_cps < 0.0) throw ValidationError("pair_rate_cps", "must be >= 0");
        if (effective_bandwidth_nm <= 0.0)
            throw ValidationError("effective_bandwidth_nm", "must be > 0");
        if (spectral_extent_nm < 0.0) throw ValidationError("spectral_extent_nm", "must be >= 0");
        if (purity < 0.0 || purity > 1.0) throw ValidationError("purity", "must be in [0, 1]");
        double deg = degenerate_wavelength_nm();
        if ((signal_center_nm - deg) * (idler_center_nm - deg) >= 0.0)
            throw ValidationError("signal_center_nm",
                                  "signal and idler must straddle the degenerate wavelength");
        if (std::fabs(signal_center_nm + idler_center_nm - 2.0 * deg) >
            effective_bandwidth_nm + 1e-9)
            throw ValidationError("idler_center_nm",
                                  "band centers are not frequency-conjugate within the "
                                  "effective bandwidth");
    }
};

struct MziSpec {
    double delay_ps = 0.0;           // long minus short arm
    double delay_mismatch_fs = 0.0;  // this MZI's delay minus the reference value
    double phase_rad = 0.0;          // applied to the long arm, in [0, 2pi)
    double heater_coeff_rad_per_v2 = 0.0;  // 0 = no heater calibration available

    bool operator==(const MziSpec&) const = default;

    double fsr_hz() const { return ps_per_s / delay_ps; }

    void validate(const std::string& prefix) const {
        if (delay_ps <= 0.0) throw ValidationError(prefix + ".delay", "must be > 0");
        if (phase_rad < 0.0 || phase_rad >= two_pi)
            throw ValidationError(prefix + ".phase_deg", "must normalize to [0, 2pi)");
        if (heater_coeff_rad_per_v2 < 0.0)
            throw ValidationError(prefix + ".heater_coeff_rad_per_v2", "must be >= 0");
    }
};

struct DetectorSpec {
    double efficiency = 0.0;
    double jitter_fwhm_ps = 0.0;
    double dark_rate_cps = 0.0;
    double fluorescence_rate_cps = 0.0;
    double dead_time_ps = 0.0;  // 0 = disabled

    bool operator==(const DetectorSpec&) const = default;

    double jitter_sigma_ps() const { return jitter_fwhm_ps / stats::fwhm_over_sigma; }

    void validate(const std::string& prefix) const {
        if (efficiency < 0.0 || efficiency > 1.0)
            throw ValidationError(prefix + ".efficiency", "must be in [0, 1]");
        if (jitter_fwhm_ps < 0.0) throw ValidationError(prefix + ".jitter_fwhm", "must be >= 0");
        if (dark_rate_cps < 0.0) throw ValidationError(prefix + ".dark_rate_cps", "must be >= 0");
        if (fluorescence_rate_cps < 0.0)
            throw ValidationError(prefix + ".fluorescence_rate_cps", "must be >= 0");
        if (dead_time_ps < 0.0) throw ValidationError(prefix + ".dead_time", "must be >= 0");
    }
};

struct ChannelSpec {
    double transmission = 1.0;  // lumped linear transmission, waveguide output to detector

    bool operator==(const ChannelSpec&) const = default;

    static ChannelSpec from_loss_db(double loss_db) {
        return ChannelSpec{std::pow(10.0, -loss_db / 10.0)};
    }

    double loss_db() const { return -10.0 * std::log10(transmission); }

    void validate(const std::string& prefix) const {
        if (!(transmission > 0.0) || transmission > 1.0)
            throw ValidationError(prefix + ".loss_db", "transmission must be in (0, 1]");
    }
};

struct TiaSpec {
    double bin_width_ps = 0.0;
    double correlation_window_ps = 0.0;  // half-width of the histogrammed delta-t range

    bool operator==(const TiaSpec&) const = default;
};

struct ScenarioConfig {
    SourceSpec source;
    ChannelSpec signal_channel;
    ChannelSpec idler_channel;
    MziSpec mzi1;
    MziSpec mzi2;
    DetectorSpec detector1;
    DetectorSpec detector2;
    TiaSpec tia;
    double acquisition_time_s = 0.0;
    std::uint64_t rng_seed = 0;
    double phase_offset_rad = 0.0;  // absorbs the constant pump phase term
    double validity_margin = 10.0;

    bool operator==(const ScenarioConfig&) const = default;

    /// Quadrature-combined detector timing jitter of the arrival-time
    /// difference, as a Gaussian sigma in ps.
    double combined_jitter_sigma_ps() const {
        double s1 = detector1.jitter_sigma_ps();
        double s2 = detector2.jitter_sigma_ps();
        return std::sqrt(s1 * s1 + s2 * s2);
    }

    double combined_jitter_fwhm_ps() const {
        return combined_jitter_sigma_ps() * stats::fwhm_over_sigma;
    }

    /// Long-arm delay mismatch between the two MZIs, in ps.
    double relative_mismatch_ps() const {
        return (mzi1.delay_mismatch_fs - mzi2.delay_mismatch_fs) * 1e-3;
    }

    void validate() const {
        source.validate();
        signal_channel.validate("channel.signal");
        idler_channel.validate("channel.idler");
        mzi1.validate("mzi.1");
        mzi2.validate("mzi.2");
        detector1.validate("detector.1");
        detector2.validate("detector.2");
        if (mzi1.delay_ps != mzi2.delay_ps)
            throw ValidationError("mzi.2.delay", "both MZIs must share the nominal delay");
        if (tia.bin_width_ps <= 0.0) throw ValidationError("tia.bin_width", "must be > 0");
        double min_window = mzi1.delay_ps + 5.0 * combined_jitter_sigma_ps();
        if (tia.correlation_window_ps < min_window) {
            std::ostringstream os;
            os << "must be >= delay + 5 sigma_jitter = " << min_window << " ps";
            throw ValidationError("tia.correlation_window", os.str());
        }
        if (acquisition_time_s <= 0.0)
            throw ValidationError("run.acquisition_time_s", "must be > 0");
        if (validity_margin <= 0.0) throw ValidationError("run.validity_margin", "must be > 0");
    }
};

/// Heater calibration: applied phase grows with the square of the voltage.
inline double volts_to_phase(double volts, double coeff_rad_per_v2) {
    if (volts < 0.0) throw std::domain_error("volts_to_phase: negative voltage");
    if (coeff_rad_per_v2 <= 0.0) throw std::domain_error("volts_to_phase: coeff must be > 0");
    return std::fmod(coeff_rad_per_v2 * volts * volts, two_pi);
}

// ---------------------------------------------------------------------------
// Franson validity hierarchy
// ---------------------------------------------------------------------------

struct ValidityCondition {
    std::string name;
    double ratio = 0.0;      // how strongly the inequality holds
    double threshold = 0.0;  // required margin
    bool pass = false;
};

struct ValidityReport {
    std::vector<ValidityCondition> conditions;
    bool all_pass() const {
        for (const auto& c : conditions)
            if (!c.pass) return false;
        return true;
    }
};

/// Checks pump linewidth << FSR << photon spectral extent, and
/// |delay mismatch| << coherence time. A failing condition is a report
/// entry, never an error.
inline ValidityReport franson_validity(const ScenarioConfig& cfg, double margin = 0.0) {
    if (margin <= 0.0) margin = cfg.validity_margin;
    ValidityReport report;
    double fsr = cfg.mzi1.fsr_hz();

    ValidityCondition a;
    a.name = "pump_linewidth_below_fsr";
    a.ratio = fsr / cfg.source.pump_linewidth_hz;
    a.threshold = margin;
    a.pass = a.ratio >= margin;
    report.conditions.push_back(a);

    ValidityCondition b;
    b.name = "fsr_below_photon_bandwidth";
    b.ratio = cfg.source.spectral_extent_hz() / fsr;
    b.threshold = margin;
    b.pass = b.ratio >= margin;
    report.conditions.push_back(b);

    ValidityCondition c;
    c.name = "delay_mismatch_below_coherence_time";
    double mismatch = std::fabs(cfg.relative_mismatch_ps());
    c.ratio = mismatch > 0.0 ? cfg.source.coherence_time_ps() / mismatch
                             : std::numeric_limits<double>::infinity();
    c.threshold = margin;
    c.pass = c.ratio >= margin;
    report.conditions.push_back(c);

    return report;
}

// ---------------------------------------------------------------------------
// Scenario document parsing
// ---------------------------------------------------------------------------

namespace detail {

using Section = std::map<std::string, std::string>;
using Document = std::map<std::string, Section>;

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, e - b + 1);
}

inline Document parse_document(const std::string& text) {
    Document doc;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError("line " + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ParseError("line " + std::to_string(lineno) + ": empty section name");
            doc[section];
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("line " + std::to_string(lineno) + ": expected key = value");
        if (section.empty())
            throw ParseError("line " + std::to_string(lineno) + ": key outside any section");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ParseError("line " + std::to_string(lineno) + ": empty key or value");
        doc[section][key] = value;
    }
    return doc;
}

class SectionReader {
public:
    SectionReader(const Document& doc, std::string name) : name_(std::move(name)) {
        auto it = doc.find(name_);
        if (it == doc.end()) throw ParseError("missing section [" + name_ + "]");
        section_ = &it->second;
    }

    double number(const std::string& key) const {
        auto v = find(key);
        if (!v) throw ParseError("missing key '" + key + "' in section [" + name_ + "]");
        return to_number(key, *v);
    }

    double number_or(const std::string& key, double fallback) const {
        auto v = find(key);
        return v ? to_number(key, *v) : fallback;
    }

    bool has(const std::string& key) const { return find(key) != nullptr; }

    std::uint64_t integer(const std::string& key) const {
        auto v = find(key);
        if (!v) throw ParseError("missing key '" + key + "' in section [" + name_ + "]");
        try {
            return std::stoull(*v);
        } catch (const std::exception&) {
            throw ParseError("key '" + name_ + "." + key + "': not an integer: " + *v);
        }
    }

private:
    const std::string* find(const std::string& key) const {
        auto it = section_->find(key);
        return it == section_->end() ? nullptr : &it->second;
    }

    double to_number(const std::string& key, const std::string& v) const {
        std::size_t pos = 0;
        double d = 0.0;
        try {
            d = std::stod(v, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != v.size())
            throw ParseError("key '" + name_ + "." + key + "': not a number: " + v);
        return d;
    }

    std::string name_;
    const Section* section_;
};

inline double normalize_phase(double rad) {
    double p = std::fmod(rad, two_pi);
    if (p < 0.0) p += two_pi;
    return p;
}

inline MziSpec read_mzi(const Document& doc, const std::string& section) {
    SectionReader s(doc, section);
    MziSpec m;
    m.delay_ps = s.number("delay");
    m.delay_mismatch_fs = s.number_or("delay_mismatch_fs", 0.0);
    if (s.has("phase_rad"))
        m.phase_rad = normalize_phase(s.number("phase_rad"));
    else
        m.phase_rad = normalize_phase(s.number_or("phase_deg", 0.0) * stats::pi / 180.0);
    m.heater_coeff_rad_per_v2 = s.number_or("heater_coeff_rad_per_v2", 0.0);
    return m;
}

inline DetectorSpec read_detector(const Document& doc, const std::string& section) {
    SectionReader s(doc, section);
    DetectorSpec d;
    d.efficiency = s.number("efficiency");
    d.jitter_fwhm_ps = s.number("jitter_fwhm");
    d.dark_rate_cps = s.number("dark_rate_cps");
    d.fluorescence_rate_cps = s.number("fluorescence_rate_cps");
    d.dead_time_ps = s.number_or("dead_time", 0.0);
    return d;
}

}  // namespace detail

/// Parses and validates a scenario document. Durations are in ps unless the
/// key is suffixed `_fs` or `_s`; wavelengths in nm; rates in Hz or counts/s;
/// losses in dB.
inline ScenarioConfig load_scenario(const std::string& text) {
    auto doc = detail::parse_document(text);

    ScenarioConfig cfg;
    {
        detail::SectionReader s(doc, "source");
        cfg.source.pump_wavelength_nm = s.number("pump_wavelength_nm");
        cfg.source.pump_linewidth_hz = s.number("pump_linewidth_hz");
        cfg.source.pair_rate_cps = s.number("pair_rate_cps");
        cfg.source.signal_center_nm = s.number("signal_center_nm");
        cfg.source.idler_center_nm = s.number("idler_center_nm");
        cfg.source.effective_bandwidth_nm = s.number("effective_bandwidth_nm");
        cfg.source.spectral_extent_nm = s.number_or("spectral_extent_nm", 0.0);
        cfg.source.purity = s.number_or("purity", 1.0);
    }
    auto read_channel = [&](const std::string& section) {
        detail::SectionReader s(doc, section);
        if (s.has("transmission")) return ChannelSpec{s.number("transmission")};
        return ChannelSpec::from_loss_db(s.number("loss_db"));
    };
    cfg.signal_channel = read_channel("channel.signal");
    cfg.idler_channel = read_channel("channel.idler");
    cfg.mzi1 = detail::read_mzi(doc, "mzi.1");
    cfg.mzi2 = detail::read_mzi(doc, "mzi.2");
    cfg.detector1 = detail::read_detector(doc, "detector.1");
    cfg.detector2 = detail::read_detector(doc, "detector.2");
    {
        detail::SectionReader s(doc, "tia");
        cfg.tia.bin_width_ps = s.number("bin_width");
        cfg.tia.correlation_window_ps = s.number("correlation_window");
    }
    {
        detail::SectionReader s(doc, "run");
        cfg.acquisition_time_s = s.number("acquisition_time_s");
        cfg.rng_seed = s.integer("seed");
        if (s.has("phase_offset_rad"))
            cfg.phase_offset_rad = s.number("phase_offset_rad");
        else
            cfg.phase_offset_rad = s.number_or("phase_offset_deg", 0.0) * stats::pi / 180.0;
        cfg.validity_margin = s.number_or("validity_margin", 10.0);
    }
    cfg.validate();
    return cfg;
}

/// Canonical serialization; load_scenario(serialize(cfg)) == cfg.
inline std::string serialize(const ScenarioConfig& cfg) {
    std::ostringstream os;
    os.precision(17);
    auto mzi = [&](const char* name, const MziSpec& m) {
        os << "[" << name << "]\n";
        os << "delay = " << m.delay_ps << "\n";
        os << "delay_mismatch_fs = " << m.delay_mismatch_fs << "\n";
        os << "phase_rad = " << m.phase_rad << "\n";
        if (m.heater_coeff_rad_per_v2 > 0.0)
            os << "heater_coeff_rad_per_v2 = " << m.heater_coeff_rad_per_v2 << "\n";
        os << "\n";
    };
    auto det = [&](const char* name, const DetectorSpec& d) {
        os << "[" << name << "]\n";
        os << "efficiency = " << d.efficiency << "\n";
        os << "jitter_fwhm = " << d.jitter_fwhm_ps << "\n";
        os << "dark_rate_cps = " << d.dark_rate_cps << "\n";
        os << "fluorescence_rate_cps = " << d.fluorescence_rate_cps << "\n";
        if (d.dead_time_ps > 0.0) os << "dead_time = " << d.dead_time_ps << "\n";
        os << "\n";
    };

    os << "[source]\n";
    os << "pump_wavelength_nm = " << cfg.source.pump_wavelength_nm << "\n";
    os << "pump_linewidth_hz = " << cfg.source.pump_linewidth_hz << "\n";
    os << "pair_rate_cps = " << cfg.source.pair_rate_cps << "\n";
    os << "signal_center_nm = " << cfg.source.signal_center_nm << "\n";
    os << "idler_center_nm = " << cfg.source.idler_center_nm << "\n";
    os << "effective_bandwidth_nm = " << cfg.source.effective_bandwidth_nm << "\n";
    if (cfg.source.spectral_extent_nm > 0.0)
        os << "spectral_extent_nm = " << cfg.source.spectral_extent_nm << "\n";
    os << "purity = " << cfg.source.purity << "\n\n";
    os << "[channel.signal]\n";
    os << "transmission = " << cfg.signal_channel.transmission << "\n\n";
    os << "[channel.idler]\n";
    os << "transmission = " << cfg.idler_channel.transmission << "\n\n";
    mzi("mzi.1", cfg.mzi1);
    mzi("mzi.2", cfg.mzi2);
    det("detector.1", cfg.detector1);
    det("detector.2", cfg.detector2);
    os << "[tia]\n";
    os << "bin_width = " << cfg.tia.bin_width_ps << "\n";
    os << "correlation_window = " << cfg.tia.correlation_window_ps << "\n\n";
    os << "[run]\n";
    os << "acquisition_time_s = " << cfg.acquisition_time_s << "\n";
    os << "seed = " << cfg.rng_seed << "\n";
    os << "phase_offset_rad = " << cfg.phase_offset_rad << "\n";
    os << "validity_margin = " << cfg.validity_margin << "\n";
    return os.str();
}

}  // namespace franson
