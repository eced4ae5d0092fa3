// SPDX-License-Identifier: Apache-2.0
//
// Region-of-interest grid and the polar <-> Cartesian coordinate map.
//
// Frame: x forward, y left, z up. Azimuth is measured in the x-y plane from
// +x towards +y, elevation from the x-y plane towards +z.

#ifndef P2T_GEOMETRY_HPP
#define P2T_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "p2t/common.hpp"

namespace p2t {

struct Cartesian {
    double x = 0.0, y = 0.0, z = 0.0;
};

struct Polar {
    double range = 0.0, azimuth = 0.0, elevation = 0.0;
};

inline Cartesian to_cartesian(const Polar& p) {
    const double ce = std::cos(p.elevation);
    return {p.range * ce * std::cos(p.azimuth), p.range * ce * std::sin(p.azimuth),
            p.range * std::sin(p.elevation)};
}

inline Polar to_polar(const Cartesian& c) {
    const double r = std::sqrt(c.x * c.x + c.y * c.y + c.z * c.z);
    if (r == 0.0) return {0.0, 0.0, 0.0};
    return {r, std::atan2(c.y, c.x), std::asin(std::clamp(c.z / r, -1.0, 1.0))};
}

/// Axis-aligned half-open box [min, max) per axis, split into cubic voxels.
struct RoiGrid {
    double x_min = 0.0, x_max = 76.8;
    double y_min = -16.0, y_max = 16.0;
    double z_min = -2.0, z_max = 10.8;
    double voxel_size = 0.4;

    void validate() const {
        if (!(voxel_size > 0.0)) throw ConfigError("grid: voxel_size must be > 0");
        const double lo[3] = {x_min, y_min, z_min};
        const double hi[3] = {x_max, y_max, z_max};
        const char* names[3] = {"x", "y", "z"};
        for (int a = 0; a < 3; ++a) {
            if (!(hi[a] > lo[a])) throw ConfigError(std::string("grid: empty ") + names[a] + " range");
            const double n = (hi[a] - lo[a]) / voxel_size;
            if (std::abs(n - std::round(n)) * voxel_size > 1e-9)
                throw ConfigError(std::string("grid: ") + names[a] +
                                  " extent not divisible by voxel_size");
        }
    }

    Index3 dims() const {
        return {static_cast<int>(std::lround((x_max - x_min) / voxel_size)),
                static_cast<int>(std::lround((y_max - y_min) / voxel_size)),
                static_cast<int>(std::lround((z_max - z_min) / voxel_size))};
    }
    std::size_t cell_count() const {
        const auto d = dims();
        return static_cast<std::size_t>(d[0]) * d[1] * d[2];
    }

    bool contains(const Cartesian& c) const {
        return c.x >= x_min && c.x < x_max && c.y >= y_min && c.y < y_max && c.z >= z_min &&
               c.z < z_max;
    }

    /// Voxel holding `c`, or nothing when outside the ROI.
    std::optional<Index3> voxel_of(const Cartesian& c) const {
        if (!contains(c)) return std::nullopt;
        const auto d = dims();
        Index3 i{static_cast<int>(std::floor((c.x - x_min) / voxel_size)),
                 static_cast<int>(std::floor((c.y - y_min) / voxel_size)),
                 static_cast<int>(std::floor((c.z - z_min) / voxel_size))};
        // Guard the last voxel against rounding right at the upper edge.
        for (int a = 0; a < 3; ++a) i[a] = std::min(i[a], d[a] - 1);
        return i;
    }

    Cartesian center(int ix, int iy, int iz) const {
        return {x_min + (ix + 0.5) * voxel_size, y_min + (iy + 0.5) * voxel_size,
                z_min + (iz + 0.5) * voxel_size};
    }
};

}  // namespace p2t

#endif  // P2T_GEOMETRY_HPP
