// SPDX-License-Identifier: Apache-2.0
//
// Conversions between polar tensors, dense Cartesian cubes and sparse
// voxel grids.

#ifndef P2T_TENSORIZE_HPP
#define P2T_TENSORIZE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include "p2t/common.hpp"
#include "p2t/geometry.hpp"
#include "p2t/pointcloud.hpp"
#include "p2t/radar_sim.hpp"

namespace p2t {

/// Dense power grid over the ROI, indexed (ix, iy, iz).
struct CubeTensor {
    Array3 power;
    bool normalized = false;
    // Original range recorded by normalize_power, used by denormalize_power.
    double source_min = 0.0;
    double source_max = 1.0;
};

/// One occupied voxel: mean x, y, z (m) and mean power of its points.
struct Voxel {
    Index3 index{0, 0, 0};
    std::array<double, 4> features{0.0, 0.0, 0.0, 0.0};

    bool operator==(const Voxel&) const = default;
};

/// Occupied voxels sorted by flat index over `dims`.
struct SparseVoxelGrid {
    Index3 dims{0, 0, 0};
    std::vector<Voxel> voxels;
};

namespace detail {

/// Locates `v` on a strictly increasing axis. Returns the lower node and the
/// weight of the upper node, or nothing when outside [front, back].
/// A single-node axis is treated as constant along that direction.
inline std::optional<std::pair<int, double>> locate(const std::vector<double>& axis, double v) {
    const int n = static_cast<int>(axis.size());
    if (n == 0) return std::nullopt;
    if (n == 1) return std::pair{0, 0.0};
    if (v < axis.front() || v > axis.back()) return std::nullopt;
    int hi = static_cast<int>(std::upper_bound(axis.begin(), axis.end(), v) - axis.begin());
    hi = std::clamp(hi, 1, n - 1);
    const int lo = hi - 1;
    const double w = (v - axis[lo]) / (axis[hi] - axis[lo]);
    return std::pair{lo, std::clamp(w, 0.0, 1.0)};
}

}  // namespace detail

/// Samples the polar field at every voxel centre by trilinear interpolation
/// in (range, azimuth, elevation); voxels outside the polar field of view
/// are zero.
inline CubeTensor polar_to_cartesian(const PolarTensor3D& t, const RoiGrid& grid) {
    grid.validate();
    check_axes(t);
    if (t.power.empty()) throw DataError("polar_to_cartesian: empty polar tensor");
    const auto d = grid.dims();
    CubeTensor cube;
    cube.power = Array3(d);
    const auto& ax = t.axes;
    for (int ix = 0; ix < d[0]; ++ix)
        for (int iy = 0; iy < d[1]; ++iy)
            for (int iz = 0; iz < d[2]; ++iz) {
                const Polar p = to_polar(grid.center(ix, iy, iz));
                const auto r = detail::locate(ax.range, p.range);
                const auto a = detail::locate(ax.azimuth, p.azimuth);
                const auto e = detail::locate(ax.elevation, p.elevation);
                if (!r || !a || !e) continue;
                const int nr = t.power.dims[0], na = t.power.dims[1], ne = t.power.dims[2];
                double acc = 0.0;
                for (int cr = 0; cr < 2; ++cr) {
                    const double wr = cr ? r->second : 1.0 - r->second;
                    if (wr == 0.0) continue;
                    const int ir = std::min(r->first + cr, nr - 1);
                    for (int ca = 0; ca < 2; ++ca) {
                        const double wa = ca ? a->second : 1.0 - a->second;
                        if (wa == 0.0) continue;
                        const int ia = std::min(a->first + ca, na - 1);
                        for (int ce = 0; ce < 2; ++ce) {
                            const double we = ce ? e->second : 1.0 - e->second;
                            if (we == 0.0) continue;
                            const int ie = std::min(e->first + ce, ne - 1);
                            acc += wr * wa * we * t.power(ir, ia, ie);
                        }
                    }
                }
                cube.power(ix, iy, iz) = acc;
            }
    return cube;
}

/// Min-max scaling to [0, 1]. Uses the frame's own range unless an explicit
/// (global) range is supplied. A constant frame maps to all zeros.
inline CubeTensor normalize_power(const CubeTensor& c,
                                  std::optional<std::pair<double, double>> range = std::nullopt) {
    CubeTensor out = c;
    double lo = 0.0, hi = 0.0;
    if (range) {
        std::tie(lo, hi) = *range;
    } else if (!c.power.empty()) {
        const auto [mn, mx] = std::minmax_element(c.power.data.begin(), c.power.data.end());
        lo = *mn;
        hi = *mx;
    }
    out.source_min = lo;
    out.source_max = hi;
    out.normalized = true;
    const double span = hi - lo;
    for (auto& v : out.power.data) v = span > 0.0 ? std::clamp((v - lo) / span, 0.0, 1.0) : 0.0;
    return out;
}

/// Inverse of normalize_power using the recorded source range.
inline CubeTensor denormalize_power(const CubeTensor& c) {
    CubeTensor out = c;
    const double span = c.source_max - c.source_min;
    for (auto& v : out.power.data) v = c.source_min + v * span;
    out.normalized = false;
    return out;
}

/// Bins in-ROI points into voxels and averages coordinates and power.
inline SparseVoxelGrid voxelize(const RadarPointCloud& cloud, const RoiGrid& grid) {
    grid.validate();
    SparseVoxelGrid out;
    out.dims = grid.dims();
    // Points are summed in a canonical order so the means do not depend on
    // the input permutation, bit for bit.
    std::map<std::size_t, std::pair<Index3, std::vector<const RadarPoint*>>> bins;
    const auto& d = out.dims;
    for (const auto& p : cloud.points) {
        const auto v = grid.voxel_of({p.x, p.y, p.z});
        if (!v) continue;
        const std::size_t f = (static_cast<std::size_t>((*v)[0]) * d[1] + (*v)[1]) * d[2] + (*v)[2];
        auto& [idx, members] = bins[f];
        idx = *v;
        members.push_back(&p);
    }
    auto key = [](const RadarPoint* p) {
        return std::tuple(p->x, p->y, p->z, p->power, p->polar_index);
    };
    out.voxels.reserve(bins.size());
    for (auto& [f, entry] : bins) {
        auto& [idx, members] = entry;
        std::sort(members.begin(), members.end(),
                  [&](const RadarPoint* a, const RadarPoint* b) { return key(a) < key(b); });
        Voxel v;
        v.index = idx;
        for (const RadarPoint* p : members) {
            v.features[0] += p->x;
            v.features[1] += p->y;
            v.features[2] += p->z;
            v.features[3] += p->power;
        }
        for (auto& x : v.features) x /= static_cast<double>(members.size());
        out.voxels.push_back(v);
    }
    return out;
}

/// Ground-truth cube for one frame: interpolate to the ROI, then normalize.
inline CubeTensor ground_truth_cube(const PolarTensor3D& t, const RoiGrid& grid) {
    return normalize_power(polar_to_cartesian(t, grid));
}

}  // namespace p2t

#endif  // P2T_TENSORIZE_HPP
