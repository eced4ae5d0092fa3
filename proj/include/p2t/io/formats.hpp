// SPDX-License-Identifier: Apache-2.0
//
// Binary containers. All integers and floats are little-endian; every file
// ends with a CRC32 (IEEE) of all preceding bytes.
//
//   RPT1  tensor       "RPT1" u32 rank, u32 dims[rank], f32 payload (row-major)
//   RPC1  point cloud  "RPC1" u32 count, count x 7 f32
//                      (x, y, z, power, range_bin, az_bin, el_bin)
//   P2T1  checkpoint   "P2T1" u32 version, u32 meta_len, meta (key = value text),
//                      u32 n_tensors, per tensor: u32 name_len, name, u32 count,
//                      f64 payload

#ifndef P2T_IO_FORMATS_HPP
#define P2T_IO_FORMATS_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <zlib.h>

#include "p2t/common.hpp"
#include "p2t/pointcloud.hpp"

namespace p2t::io {

using Bytes = std::vector<std::uint8_t>;

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
    uLong c = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    while (n > 0) {
        const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        c = ::crc32(c, data, chunk);
        data += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(c);
}

class Writer {
public:
    void magic(const char (&m)[5]) { buf_.insert(buf_.end(), m, m + 4); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    /// Appends the CRC of everything written so far and returns the bytes.
    Bytes finish() {
        u32(crc32_of(buf_.data(), buf_.size()));
        return std::move(buf_);
    }

private:
    Bytes buf_;
};

class Reader {
public:
    /// Validates the trailing CRC and the magic; `what` names the format in errors.
    Reader(const Bytes& b, const char (&magic)[5], std::string what) : b_(b), what_(std::move(what)) {
        if (b_.size() < 8) fail("file too short");
        end_ = b_.size() - 4;
        std::uint32_t stored = 0;
        for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(b_[end_ + i]) << (8 * i);
        if (stored != crc32_of(b_.data(), end_)) fail("CRC mismatch");
        if (std::memcmp(b_.data(), magic, 4) != 0) fail("bad magic");
        pos_ = 4;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(b_.begin() + pos_, b_.begin() + pos_ + n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return end_ - pos_; }
    void expect_end() const {
        if (pos_ != end_) fail("payload length does not match header");
    }
    [[noreturn]] void fail(const std::string& msg) const { throw DataError(what_ + ": " + msg); }

private:
    void need(std::size_t n) const {
        if (n > end_ - pos_) fail("truncated payload");
    }
    const Bytes& b_;
    std::string what_;
    std::size_t pos_ = 0, end_ = 0;
};

// ---------------------------------------------------------------------------
// Files

inline Bytes read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    return Bytes(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::string& path, const Bytes& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    if (!out) throw DataError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// RPT1

struct RawTensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;

    std::size_t expected_size() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
    bool operator==(const RawTensor& o) const {
        // bitwise payload comparison so NaN payloads round-trip as equal
        return dims == o.dims && values.size() == o.values.size() &&
               std::memcmp(values.data(), o.values.data(), values.size() * sizeof(float)) == 0;
    }
};

inline Bytes encode_rpt1(const RawTensor& t) {
    if (t.values.size() != t.expected_size()) throw DataError("RPT1: payload length does not match dims");
    Writer w;
    w.magic("RPT1");
    w.u32(static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) w.u32(d);
    for (float v : t.values) w.f32(v);
    return w.finish();
}

inline RawTensor decode_rpt1(const Bytes& b) {
    Reader r(b, "RPT1", "RPT1");
    RawTensor t;
    const std::uint32_t rank = r.u32();
    if (rank > 16) r.fail("implausible rank " + std::to_string(rank));
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        t.dims.push_back(r.u32());
        n *= t.dims.back();
    }
    if (n * 4 != r.remaining()) r.fail("payload length does not match header");
    t.values.resize(n);
    for (auto& v : t.values) v = r.f32();
    r.expect_end();
    return t;
}

inline RawTensor to_raw(const Array3& a) {
    RawTensor t;
    t.dims = {static_cast<std::uint32_t>(a.dims[0]), static_cast<std::uint32_t>(a.dims[1]),
              static_cast<std::uint32_t>(a.dims[2])};
    t.values.assign(a.data.begin(), a.data.end());
    return t;
}

inline RawTensor to_raw(const PolarTensor4D& p) {
    RawTensor t;
    for (int d : p.dims) t.dims.push_back(static_cast<std::uint32_t>(d));
    t.values.assign(p.power.begin(), p.power.end());
    return t;
}

inline Array3 to_array3(const RawTensor& t) {
    if (t.dims.size() != 3) throw DataError("RPT1: expected a rank-3 tensor, got rank " + std::to_string(t.dims.size()));
    Array3 a(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2]));
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] = t.values[i];
    return a;
}

inline void write_rpt1(const std::string& path, const RawTensor& t) { write_file(path, encode_rpt1(t)); }
inline RawTensor read_rpt1(const std::string& path) {
    try {
        return decode_rpt1(read_file(path));
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// RPC1

/// Stored fields only: the method tag is not part of the format.
inline Bytes encode_rpc1(const RadarPointCloud& c) {
    Writer w;
    w.magic("RPC1");
    w.u32(static_cast<std::uint32_t>(c.points.size()));
    for (const auto& p : c.points) {
        w.f32(static_cast<float>(p.x));
        w.f32(static_cast<float>(p.y));
        w.f32(static_cast<float>(p.z));
        w.f32(static_cast<float>(p.power));
        for (int i : p.polar_index) w.f32(static_cast<float>(i));
    }
    return w.finish();
}

inline RadarPointCloud decode_rpc1(const Bytes& b) {
    Reader r(b, "RPC1", "RPC1");
    const std::uint32_t n = r.u32();
    if (static_cast<std::size_t>(n) * 28 != r.remaining()) r.fail("payload length does not match header");
    RadarPointCloud c;
    c.points.resize(n);
    for (auto& p : c.points) {
        p.x = r.f32();
        p.y = r.f32();
        p.z = r.f32();
        p.power = r.f32();
        for (int& i : p.polar_index) {
            const float f = r.f32();
            if (!(f >= 0.0f) || f != std::floor(f)) r.fail("polar index is not a non-negative integer");
            i = static_cast<int>(f);
        }
    }
    r.expect_end();
    return c;
}

inline void write_rpc1(const std::string& path, const RadarPointCloud& c) { write_file(path, encode_rpc1(c)); }
inline RadarPointCloud read_rpc1(const std::string& path) {
    try {
        return decode_rpc1(read_file(path));
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

/// Rounds a cloud through f32 storage, i.e. what a reader of its RPC1 file sees.
inline RadarPointCloud as_stored(const RadarPointCloud& c) {
    RadarPointCloud out = decode_rpc1(encode_rpc1(c));
    out.source_method = c.source_method;
    return out;
}

// ---------------------------------------------------------------------------
// P2T1

struct NamedArray {
    std::string name;
    std::vector<double> values;
    bool operator==(const NamedArray&) const = default;
};

struct CheckpointData {
    std::string meta;  // key = value lines
    std::vector<NamedArray> arrays;
    bool operator==(const CheckpointData&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline Bytes encode_p2t1(const CheckpointData& c) {
    Writer w;
    w.magic("P2T1");
    w.u32(kCheckpointVersion);
    w.str(c.meta);
    w.u32(static_cast<std::uint32_t>(c.arrays.size()));
    for (const auto& a : c.arrays) {
        w.str(a.name);
        w.u32(static_cast<std::uint32_t>(a.values.size()));
        for (double v : a.values) w.f64(v);
    }
    return w.finish();
}

inline CheckpointData decode_p2t1(const Bytes& b) {
    Reader r(b, "P2T1", "P2T1");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
    CheckpointData c;
    c.meta = r.str();
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        NamedArray a;
        a.name = r.str();
        const std::uint32_t count = r.u32();
        if (static_cast<std::size_t>(count) * 8 > r.remaining()) r.fail("truncated array '" + a.name + "'");
        a.values.resize(count);
        for (auto& v : a.values) v = r.f64();
        c.arrays.push_back(std::move(a));
    }
    r.expect_end();
    return c;
}

}  // namespace p2t::io

#endif  // P2T_IO_FORMATS_HPP
