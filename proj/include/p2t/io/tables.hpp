// SPDX-License-Identifier: Apache-2.0
//
// Small text outputs: fixed-precision CSV tables, method records and PGM
// grayscale images of BEV maps.

#ifndef P2T_IO_TABLES_HPP
#define P2T_IO_TABLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "p2t/common.hpp"
#include "p2t/metrics.hpp"

namespace p2t::io {

/// Fixed 4-decimal formatting; infinities print as `inf` / `-inf`.
inline std::string fixed4(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    // Avoid "-0.0000".
    if (std::string(buf) == "-0.0000") return "0.0000";
    return buf;
}

inline double parse_number(const std::string& s, const std::string& where) {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw DataError(where + ": not a number: '" + s + "'");
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

/// Parses comma-separated text with a header row; blank and `#` lines skip.
inline CsvTable parse_csv(const std::string& text, const std::string& source = "csv") {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos || line[line.find_first_not_of(" \t")] == '#')
            continue;
        auto cells = split_csv_line(line);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size())
            throw DataError(source + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.header.size()) + " fields, got " + std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
    }
    if (!have_header) throw DataError(source + ": missing header row");
    return t;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
    if (!out) throw DataError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Method records

inline constexpr const char* kRecordHeader = "method,hyper,pcd_percent,psnr_db,ssim,psnr_norm,ssim_norm,des";

inline std::string records_to_csv(const std::vector<MethodRecord>& recs) {
    std::ostringstream o;
    o << kRecordHeader << "\n";
    for (const auto& r : recs)
        o << r.method << "," << r.hyper << "," << fixed4(r.pcd_percent) << "," << fixed4(r.psnr_db) << ","
          << fixed4(r.ssim) << "," << fixed4(r.psnr_norm) << "," << fixed4(r.ssim_norm) << "," << fixed4(r.des)
          << "\n";
    return o.str();
}

/// Reads records; only method, hyper, pcd_percent, psnr_db and ssim are
/// required, derived columns are ignored and recomputed downstream.
inline std::vector<MethodRecord> records_from_csv(const std::string& text, const std::string& source = "csv") {
    const CsvTable t = parse_csv(text, source);
    const char* need[] = {"method", "hyper", "pcd_percent", "psnr_db", "ssim"};
    int col[5];
    for (int i = 0; i < 5; ++i) {
        col[i] = t.column(need[i]);
        if (col[i] < 0) throw DataError(source + ": missing column '" + need[i] + "'");
    }
    std::vector<MethodRecord> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::string where = source + " row " + std::to_string(i + 1);
        MethodRecord r;
        r.method = row[col[0]];
        r.hyper = row[col[1]];
        r.pcd_percent = parse_number(row[col[2]], where);
        r.psnr_db = parse_number(row[col[3]], where);
        r.ssim = parse_number(row[col[4]], where);
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// PGM

struct GrayImage {
    int width = 0, height = 0;
    std::vector<int> pixels;  // row-major, 0..255
    bool operator==(const GrayImage&) const = default;
};

/// BEV as an 8-bit image: rows follow the x axis, columns the y axis,
/// pixel = round(255 * clamp(value, 0, 1)).
inline GrayImage bev_to_gray(const BevImage& b) {
    GrayImage g;
    g.height = b.rows;
    g.width = b.cols;
    g.pixels.resize(b.values.size());
    for (std::size_t i = 0; i < b.values.size(); ++i)
        g.pixels[i] = static_cast<int>(std::lround(255.0 * std::clamp(b.values[i], 0.0, 1.0)));
    return g;
}

/// Binary PGM (P5, maxval 255).
inline std::string encode_pgm(const GrayImage& g) {
    std::string s = "P5\n" + std::to_string(g.width) + " " + std::to_string(g.height) + "\n255\n";
    for (int p : g.pixels) s.push_back(static_cast<char>(static_cast<unsigned char>(p)));
    return s;
}

inline GrayImage decode_pgm(const std::string& s) {
    std::istringstream in(s);
    std::string magic;
    int maxval = 0;
    GrayImage g;
    in >> magic >> g.width >> g.height >> maxval;
    if (magic != "P5" || !in || maxval != 255 || g.width < 0 || g.height < 0)
        throw DataError("PGM: unsupported header");
    in.get();
    g.pixels.resize(static_cast<std::size_t>(g.width) * g.height);
    for (auto& p : g.pixels) {
        const int c = in.get();
        if (c == EOF) throw DataError("PGM: truncated pixel data");
        p = c;
    }
    return g;
}

inline void write_pgm(const std::string& path, const GrayImage& g) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    const std::string s = encode_pgm(g);
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return decode_pgm(ss.str());
}

}  // namespace p2t::io

#endif  // P2T_IO_TABLES_HPP
