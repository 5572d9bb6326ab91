// SPDX-License-Identifier: Apache-2.0
//
// TIA emulation: coincidence histogram of arrival-time differences from two
// sorted tag streams, plus the binary/CSV time-tag file formats.
//
// Binary format "FTAG": 16-byte header (magic "FTAG", u32 version, u64
// record count, little-endian) followed by records of (detector: u8,
// timestamp_ps: u64 LE). The CSV variant is `detector,timestamp_ps` with a
// header row, accepted on read by file extension.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "franson/montecarlo.hpp"
#include "franson/scenario.hpp"

namespace franson {

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Binned arrival-time-difference counts. Bin centers sit at integer
/// multiples of the bin width so one bin is centered exactly on dt = 0 and
/// a peak never straddles a bin edge.
struct CoincidenceHistogram {
    double bin_width_ps = 0.0;
    double window_ps = 0.0;  // requested half-range; bins cover at least it
    int side_bins = 0;       // centers at k * bin_width for k in [-side_bins, +side_bins]
    std::vector<std::int64_t> counts;
    std::int64_t total_coincidences = 0;

    int bin_count() const { return 2 * side_bins + 1; }

    double bin_center_ps(int index) const { return (index - side_bins) * bin_width_ps; }

    std::int64_t count_at(int index) const { return counts.at(static_cast<std::size_t>(index)); }

    /// Bin index holding the given delta-t, or -1 if outside the range.
    int bin_index(double delta_t_ps) const {
        int k = static_cast<int>(std::llround(delta_t_ps / bin_width_ps));
        if (k < -side_bins || k > side_bins) return -1;
        return k + side_bins;
    }
};

/// Cross-correlates two sorted tag streams: every pair with |t2 - t1| inside
/// the histogram range increments the bin containing (t2 - t1). Linear-time
/// two-pointer sweep over the full correlation (all pairs, not start-stop).
inline CoincidenceHistogram correlate(std::span<const std::int64_t> tags1,
                                      std::span<const std::int64_t> tags2, const TiaSpec& tia) {
    if (tia.bin_width_ps <= 0.0) throw std::domain_error("correlate: bin width must be > 0");
    if (tia.correlation_window_ps <= 0.0) throw std::domain_error("correlate: window must be > 0");

    auto check_sorted = [](std::span<const std::int64_t> tags, const char* name) {
        for (std::size_t i = 1; i < tags.size(); ++i)
            if (tags[i] < tags[i - 1])
                throw std::invalid_argument(std::string("correlate: ") + name +
                                            " unsorted at index " + std::to_string(i));
    };
    check_sorted(tags1, "tags1");
    check_sorted(tags2, "tags2");

    CoincidenceHistogram h;
    h.bin_width_ps = tia.bin_width_ps;
    h.window_ps = tia.correlation_window_ps;
    h.side_bins = static_cast<int>(
        std::ceil((tia.correlation_window_ps - tia.bin_width_ps / 2.0) / tia.bin_width_ps));
    if (h.side_bins < 0) h.side_bins = 0;
    h.counts.assign(static_cast<std::size_t>(h.bin_count()), 0);

    // Accept exactly the deltas that fall inside a bin: |dt| <= reach.
    const std::int64_t reach =
        static_cast<std::int64_t>(std::floor((h.side_bins + 0.5) * h.bin_width_ps));
    const double inv_bw = 1.0 / h.bin_width_ps;

    std::size_t lo = 0;
    for (std::size_t i = 0; i < tags1.size(); ++i) {
        const std::int64_t t1 = tags1[i];
        while (lo < tags2.size() && tags2[lo] < t1 - reach) ++lo;
        for (std::size_t j = lo; j < tags2.size() && tags2[j] <= t1 + reach; ++j) {
            const std::int64_t dt = tags2[j] - t1;
            int k = static_cast<int>(std::llround(static_cast<double>(dt) * inv_bw));
            if (k < -h.side_bins || k > h.side_bins) continue;  // half-open bin edge case
            ++h.counts[static_cast<std::size_t>(k + h.side_bins)];
            ++h.total_coincidences;
        }
    }
    return h;
}

inline CoincidenceHistogram correlate(const SimulationResult& result, const TiaSpec& tia) {
    return correlate(result.detector1.timestamps_ps, result.detector2.timestamps_ps, tia);
}

// ---------------------------------------------------------------------------
// Tag file I/O
// ---------------------------------------------------------------------------

namespace detail_io {

inline constexpr char magic[4] = {'F', 'T', 'A', 'G'};
inline constexpr std::uint32_t version = 1;

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw FormatError("truncated file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw FormatError("truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace detail_io

struct TagStreams {
    std::vector<std::int64_t> detector1;
    std::vector<std::int64_t> detector2;
    bool sorted_on_read = false;  // input was non-monotone and had to be sorted
};

inline void write_tags_binary(const TagStreams& streams, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out.write(detail_io::magic, 4);
    detail_io::put_u32(out, detail_io::version);
    detail_io::put_u64(out, streams.detector1.size() + streams.detector2.size());
    // Records are written as the time-ordered merge of both detectors.
    std::size_t i = 0, j = 0;
    auto put = [&](std::uint8_t det, std::int64_t t) {
        out.put(static_cast<char>(det));
        detail_io::put_u64(out, static_cast<std::uint64_t>(t));
    };
    while (i < streams.detector1.size() || j < streams.detector2.size()) {
        bool take1 = j >= streams.detector2.size() ||
                     (i < streams.detector1.size() &&
                      streams.detector1[i] <= streams.detector2[j]);
        if (take1)
            put(1, streams.detector1[i++]);
        else
            put(2, streams.detector2[j++]);
    }
    if (!out) throw FormatError("write failed: " + path);
}

inline void write_tags_csv(const TagStreams& streams, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out << "detector,timestamp_ps\n";
    std::size_t i = 0, j = 0;
    while (i < streams.detector1.size() || j < streams.detector2.size()) {
        bool take1 = j >= streams.detector2.size() ||
                     (i < streams.detector1.size() &&
                      streams.detector1[i] <= streams.detector2[j]);
        if (take1)
            out << "1," << streams.detector1[i++] << "\n";
        else
            out << "2," << streams.detector2[j++] << "\n";
    }
    if (!out) throw FormatError("write failed: " + path);
}

/// Writes tag streams; CSV when the path ends in `.csv`, binary otherwise.
inline void write_tags(const TagStreams& streams, const std::string& path) {
    if (detail_io::has_suffix(path, ".csv"))
        write_tags_csv(streams, path);
    else
        write_tags_binary(streams, path);
}

inline void write_tags(const SimulationResult& result, const std::string& path) {
    TagStreams s;
    s.detector1 = result.detector1.timestamps_ps;
    s.detector2 = result.detector2.timestamps_ps;
    write_tags(s, path);
}

namespace detail_io {

inline TagStreams read_tags_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path);
    char m[4];
    in.read(m, 4);
    if (!in || std::memcmp(m, magic, 4) != 0) throw FormatError("bad magic: " + path);
    std::uint32_t ver = get_u32(in);
    if (ver != version)
        throw FormatError("unsupported version " + std::to_string(ver) + ": " + path);
    std::uint64_t n = get_u64(in);
    TagStreams streams;
    for (std::uint64_t r = 0; r < n; ++r) {
        int det = in.get();
        if (det == std::char_traits<char>::eof()) throw FormatError("truncated file: " + path);
        std::int64_t t = static_cast<std::int64_t>(get_u64(in));
        if (det == 1)
            streams.detector1.push_back(t);
        else if (det == 2)
            streams.detector2.push_back(t);
        else
            throw FormatError("bad detector id " + std::to_string(det) + ": " + path);
    }
    return streams;
}

inline TagStreams read_tags_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open: " + path);
    TagStreams streams;
    std::string line;
    bool first = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (first) {
            first = false;
            if (line.find("detector") != std::string::npos) continue;  // header row
        }
        std::istringstream ls(line);
        int det = 0;
        char comma = 0;
        std::int64_t t = 0;
        if (!(ls >> det >> comma >> t) || comma != ',')
            throw FormatError("bad CSV record at line " + std::to_string(lineno) + ": " + path);
        if (det == 1)
            streams.detector1.push_back(t);
        else if (det == 2)
            streams.detector2.push_back(t);
        else
            throw FormatError("bad detector id at line " + std::to_string(lineno) + ": " + path);
    }
    return streams;
}

}  // namespace detail_io

/// Reads a tag file (binary or `.csv`). Non-monotone timestamps are sorted
/// and flagged via `sorted_on_read`.
inline TagStreams read_tags(const std::string& path) {
    TagStreams streams = detail_io::has_suffix(path, ".csv") ? detail_io::read_tags_csv(path)
                                                             : detail_io::read_tags_binary(path);
    for (auto* v : {&streams.detector1, &streams.detector2}) {
        if (!std::is_sorted(v->begin(), v->end())) {
            std::sort(v->begin(), v->end());
            streams.sorted_on_read = true;
        }
    }
    return streams;
}

/// Histogram CSV: comment header with bin width and window, then
/// `delta_t_ps,count` rows.
inline void write_histogram_csv(const CoincidenceHistogram& h, std::ostream& os) {
    os << "# bin_width_ps = " << h.bin_width_ps << ", window_ps = " << h.window_ps
       << ", total = " << h.total_coincidences << "\n";
    os << "delta_t_ps,count\n";
    for (int i = 0; i < h.bin_count(); ++i)
        os << h.bin_center_ps(i) << "," << h.count_at(i) << "\n";
}

inline void write_histogram_csv(const CoincidenceHistogram& h, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open for writing: " + path);
    write_histogram_csv(h, out);
}

}  // namespace franson
