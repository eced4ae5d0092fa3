// SPDX-License-Identifier: Apache-2.0
//
// Shared types for the point-to-tensor pipeline: error categories, small
// index helpers and a row-major 3D array.

#ifndef P2T_COMMON_HPP
#define P2T_COMMON_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace p2t {

/// Base of all library errors. `exit_code()` maps onto the CLI contract.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual int exit_code() const noexcept { return 1; }
};

/// Invalid configuration or parameters (CLI exit 2).
class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// Malformed, inconsistent or corrupted data (CLI exit 3).
class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Non-finite values or unreachable numeric targets (CLI exit 4).
class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

using Index3 = std::array<int, 3>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Dense row-major 3D array of doubles, last axis fastest.
struct Array3 {
    Index3 dims{0, 0, 0};
    std::vector<double> data;

    Array3() = default;
    Array3(int d0, int d1, int d2, double fill = 0.0)
        : dims{d0, d1, d2}, data(static_cast<std::size_t>(d0) * d1 * d2, fill) {}
    explicit Array3(Index3 d, double fill = 0.0) : Array3(d[0], d[1], d[2], fill) {}

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    std::size_t flat(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k;
    }
    Index3 unflat(std::size_t f) const {
        const int k = static_cast<int>(f % dims[2]);
        f /= dims[2];
        const int j = static_cast<int>(f % dims[1]);
        return {static_cast<int>(f / dims[1]), j, k};
    }
    double& operator()(int i, int j, int k) { return data[flat(i, j, k)]; }
    double operator()(int i, int j, int k) const { return data[flat(i, j, k)]; }

    bool operator==(const Array3&) const = default;
};

/// Number of worker threads allowed for internal parallelism (`P2T_THREADS`).
inline unsigned thread_budget() {
    if (const char* env = std::getenv("P2T_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<unsigned>(n);
    }
    return 1;
}

}  // namespace p2t

#endif  // P2T_COMMON_HPP
