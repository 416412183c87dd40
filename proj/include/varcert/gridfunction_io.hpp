#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "varcert/errors.hpp"
#include "varcert/grid.hpp"

namespace varcert {

// Binary grid-function format "GF01", little-endian:
//   bytes 0..3   magic "GF01"
//   bytes 4..7   dim   (uint32)
//   bytes 8..11  n_per_axis (uint32)
//   then node_count float64 values, row-major.
// All readers validate the header, the payload length, and finiteness.

namespace detail {

inline void put_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw io_error("GF01: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64_le(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64_le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw io_error("GF01: truncated payload");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

} // namespace detail

inline void write_gf01(std::ostream& os, const GridFunction& f) {
    os.write("GF01", 4);
    detail::put_u32_le(os, static_cast<std::uint32_t>(f.grid().dim()));
    detail::put_u32_le(os, static_cast<std::uint32_t>(f.grid().n_per_axis()));
    for (double v : f.values()) detail::put_f64_le(os, v);
    if (!os) throw io_error("GF01: write failed");
}

inline void write_gf01(const std::string& path, const GridFunction& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("GF01: cannot open '" + path + "' for writing");
    write_gf01(os, f);
}

inline GridFunction read_gf01(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "GF01", 4) != 0)
        throw io_error("GF01: bad magic (not a GF01 file)");
    const std::uint32_t dim = detail::get_u32_le(is);
    const std::uint32_t n = detail::get_u32_le(is);
    if (dim != 1 && dim != 2) throw io_error("GF01: header dim must be 1 or 2");
    if (n < 2 || n > 100000) throw io_error("GF01: header n_per_axis out of range");
    Grid g(static_cast<int>(dim), static_cast<int>(n));
    std::vector<double> vals(g.node_count());
    for (auto& v : vals) v = detail::get_f64_le(is);
    // Reject trailing bytes so length mismatches are caught in both directions.
    char extra;
    if (is.read(&extra, 1))
        throw io_error("GF01: payload longer than header-declared node count");
    GridFunction f(g, std::move(vals));
    if (!f.all_finite()) throw io_error("GF01: non-finite entry in payload");
    return f;
}

inline GridFunction read_gf01(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("GF01: cannot open '" + path + "'");
    return read_gf01(is);
}

/// Text alternative: '#'-prefixed header lines, then "index,value" rows in
/// any order; every node index must appear exactly once.
inline GridFunction read_csv_gridfunction(std::istream& is, const Grid& g) {
    std::vector<double> vals(g.node_count());
    std::vector<char> seen(g.node_count(), 0);
    std::string line;
    std::size_t lineno = 0;
    bool first_data_line = true;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        // Tolerate one textual header row like "index,value" at the top.
        if (first_data_line) {
            first_data_line = false;
            const std::size_t p = line.find_first_not_of(" \t");
            if (p != std::string::npos && !std::isdigit(static_cast<unsigned char>(line[p])))
                continue;
        }
        std::istringstream row(line);
        std::string idx_tok, val_tok;
        if (!std::getline(row, idx_tok, ',') || !std::getline(row, val_tok))
            throw io_error("csv: malformed row at line " + std::to_string(lineno));
        std::size_t idx;
        double val;
        try {
            idx = static_cast<std::size_t>(std::stoull(idx_tok));
            val = std::stod(val_tok);
        } catch (const std::exception&) {
            throw io_error("csv: unparsable row at line " + std::to_string(lineno));
        }
        if (idx >= g.node_count())
            throw io_error("csv: index " + std::to_string(idx) + " out of range at line " +
                           std::to_string(lineno));
        if (seen[idx]) throw io_error("csv: duplicate index " + std::to_string(idx));
        if (!std::isfinite(val))
            throw io_error("csv: non-finite value at line " + std::to_string(lineno));
        vals[idx] = val;
        seen[idx] = 1;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) throw io_error("csv: missing index " + std::to_string(i));
    return GridFunction(g, std::move(vals));
}

inline GridFunction read_csv_gridfunction(const std::string& path, const Grid& g) {
    std::ifstream is(path);
    if (!is) throw io_error("csv: cannot open '" + path + "'");
    return read_csv_gridfunction(is, g);
}

/// Fixed-format numeric text used by all CSV artifacts: %.12e keeps outputs
/// byte-identical across runs and platforms.
inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

inline void write_csv_gridfunction(std::ostream& os, const GridFunction& f) {
    os << "index,value\n";
    for (std::size_t i = 0; i < f.size(); ++i)
        os << i << "," << format_number(f[i]) << "\n";
}

inline void write_csv_gridfunction(const std::string& path, const GridFunction& f) {
    std::ofstream os(path, std::ios::binary); // binary: LF line endings everywhere
    if (!os) throw io_error("csv: cannot open '" + path + "' for writing");
    write_csv_gridfunction(os, f);
}

} // namespace varcert
