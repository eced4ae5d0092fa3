// SPDX-License-Identifier: Apache-2.0
//
// Point-cloud extraction from a Doppler-collapsed polar power tensor:
// top-p percentile selection and 3D cell-averaging CFAR, plus the
// point-cloud density measure over the ROI grid.

#ifndef P2T_POINTCLOUD_HPP
#define P2T_POINTCLOUD_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "p2t/common.hpp"
#include "p2t/geometry.hpp"
#include "p2t/radar_sim.hpp"

namespace p2t {

/// Which extraction produced a cloud.
///   percentile  value = p in percent
///   cfar        value = K1 detection fraction in percent (calibrated alpha)
///   cfar_scale  value = raw CFAR scale factor alpha
struct MethodTag {
    enum class Kind { percentile, cfar, cfar_scale };
    Kind kind = Kind::percentile;
    double value = 1.0;

    bool operator==(const MethodTag&) const = default;

    std::string family() const {
        switch (kind) {
            case Kind::percentile: return "percentile";
            case Kind::cfar: return "cfar";
            case Kind::cfar_scale: return "cfar-scale";
        }
        return "?";
    }
    std::string hyper() const {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%g", value);
        return buf;
    }
    std::string to_string() const { return family() + ":" + hyper(); }

    /// Parses `percentile:P`, `cfar:K1` or `cfar-scale:ALPHA`.
    static MethodTag parse(const std::string& s) {
        const auto colon = s.find(':');
        if (colon == std::string::npos) throw ConfigError("method '" + s + "': expected family:value");
        const std::string fam = s.substr(0, colon);
        double v = 0.0;
        try {
            std::size_t used = 0;
            v = std::stod(s.substr(colon + 1), &used);
            if (used != s.size() - colon - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError("method '" + s + "': bad numeric value");
        }
        MethodTag m;
        if (fam == "percentile") m.kind = Kind::percentile;
        else if (fam == "cfar") m.kind = Kind::cfar;
        else if (fam == "cfar-scale") m.kind = Kind::cfar_scale;
        else throw ConfigError("method '" + s + "': unknown family '" + fam + "'");
        m.value = v;
        if (m.kind != Kind::cfar_scale && !(v > 0.0 && v <= 100.0))
            throw ConfigError("method '" + s + "': percentage must lie in (0, 100]");
        if (m.kind == Kind::cfar_scale && !(v > 0.0))
            throw ConfigError("method '" + s + "': scale factor must be > 0");
        return m;
    }
};

struct RadarPoint {
    double x = 0.0, y = 0.0, z = 0.0;  // m
    double power = 0.0;
    Index3 polar_index{0, 0, 0};  // (range_bin, az_bin, el_bin)

    bool operator==(const RadarPoint&) const = default;
};

struct RadarPointCloud {
    std::vector<RadarPoint> points;
    MethodTag source_method;
};

struct PercentileConfig {
    double p_percent = 1.0;
};

struct CfarConfig {
    Index3 guard_cells{1, 1, 1};
    Index3 training_cells{2, 2, 2};
    double scale_factor = 5.0;
    std::optional<double> k1_percent;

    void validate() const {
        for (int a = 0; a < 3; ++a)
            if (guard_cells[a] < 0 || training_cells[a] < 0)
                throw ConfigError("cfar: guard/training counts must be >= 0");
        if (!(scale_factor > 0.0) || !std::isfinite(scale_factor))
            throw ConfigError("cfar: scale_factor must be finite and > 0");
    }
};

inline RadarPoint make_point(const PolarTensor3D& t, const Index3& idx) {
    const Polar p{t.axes.range[idx[0]], t.axes.azimuth[idx[1]], t.axes.elevation[idx[2]]};
    const Cartesian c = to_cartesian(p);
    return {c.x, c.y, c.z, t.power(idx[0], idx[1], idx[2]), idx};
}

inline void check_axes(const PolarTensor3D& t) {
    const auto& d = t.power.dims;
    if (t.axes.range.size() != static_cast<std::size_t>(d[0]) ||
        t.axes.azimuth.size() != static_cast<std::size_t>(d[1]) ||
        t.axes.elevation.size() != static_cast<std::size_t>(d[2]))
        throw DataError("polar tensor: bin axes do not match tensor dims");
}

/// Keeps the ceil(p/100 * N) strongest cells; ties go to the lower flat
/// index. Output is ordered by flat index.
inline RadarPointCloud percentile_extract(const PolarTensor3D& t, const PercentileConfig& cfg) {
    if (t.power.empty()) throw DataError("percentile_extract: empty tensor");
    if (!(cfg.p_percent > 0.0 && cfg.p_percent <= 100.0))
        throw ConfigError("percentile_extract: p must lie in (0, 100]");
    check_axes(t);
    const std::size_t n = t.power.size();
    const double want = std::ceil(cfg.p_percent * static_cast<double>(n) / 100.0 - 1e-9);
    const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(want, 1.0)), 1, n);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto& v = t.power.data;
    std::nth_element(order.begin(), order.begin() + (k - 1), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] > v[b] || (v[a] == v[b] && a < b); });
    order.resize(k);
    std::sort(order.begin(), order.end());

    RadarPointCloud cloud;
    cloud.source_method = {MethodTag::Kind::percentile, cfg.p_percent};
    cloud.points.reserve(k);
    for (const auto f : order) cloud.points.push_back(make_point(t, t.power.unflat(f)));
    return cloud;
}

namespace detail {

/// Sum of `a` over the box of half-widths `h` around every cell, clamped at
/// the borders. Separable direct summation (no running differences), so
/// small cells next to strong ones keep their precision.
inline Array3 box_sums(const Array3& a, const Index3& h) {
    Array3 cur = a;
    for (int axis = 0; axis < 3; ++axis) {
        Array3 next(a.dims);
        const int n = a.dims[axis];
        for (int i = 0; i < a.dims[0]; ++i)
            for (int j = 0; j < a.dims[1]; ++j)
                for (int k = 0; k < a.dims[2]; ++k) {
                    Index3 c{i, j, k};
                    const int lo = std::max(0, c[axis] - h[axis]);
                    const int hi = std::min(n - 1, c[axis] + h[axis]);
                    double acc = 0.0;
                    for (int t = lo; t <= hi; ++t) {
                        c[axis] = t;
                        acc += cur(c[0], c[1], c[2]);
                    }
                    next(i, j, k) = acc;
                }
        cur = std::move(next);
    }
    return cur;
}

}  // namespace detail

/// Mean training-cell power around every cell, window clamped at borders.
/// Throws when a clamped window holds no training cell.
inline Array3 cfar_training_means(const Array3& power, const CfarConfig& cfg) {
    cfg.validate();
    const auto& d = power.dims;
    Index3 outer_h, guard_h;
    for (int a = 0; a < 3; ++a) {
        guard_h[a] = cfg.guard_cells[a];
        outer_h[a] = cfg.guard_cells[a] + cfg.training_cells[a];
    }
    const Array3 outer_sum = detail::box_sums(power, outer_h);
    const Array3 guard_sum = detail::box_sums(power, guard_h);
    Array3 mean(d);
    for (int i = 0; i < d[0]; ++i)
        for (int j = 0; j < d[1]; ++j)
            for (int k = 0; k < d[2]; ++k) {
                const Index3 c{i, j, k};
                long outer = 1, guard = 1;
                for (int a = 0; a < 3; ++a) {
                    outer *= std::min(d[a] - 1, c[a] + outer_h[a]) - std::max(0, c[a] - outer_h[a]) + 1;
                    guard *= std::min(d[a] - 1, c[a] + guard_h[a]) - std::max(0, c[a] - guard_h[a]) + 1;
                }
                const long n_train = outer - guard;
                if (n_train <= 0)
                    throw ConfigError("ca_cfar: window has no training cells at (" + std::to_string(i) +
                                      "," + std::to_string(j) + "," + std::to_string(k) + ")");
                mean(i, j, k) = std::max(0.0, outer_sum(i, j, k) - guard_sum(i, j, k)) / static_cast<double>(n_train);
            }
    return mean;
}

/// Cell-averaging CFAR over all three axes: detect iff power > alpha * mean(training).
inline RadarPointCloud ca_cfar(const PolarTensor3D& t, const CfarConfig& cfg) {
    check_axes(t);
    const Array3 mean = cfar_training_means(t.power, cfg);
    RadarPointCloud cloud;
    cloud.source_method = cfg.k1_percent ? MethodTag{MethodTag::Kind::cfar, *cfg.k1_percent}
                                         : MethodTag{MethodTag::Kind::cfar_scale, cfg.scale_factor};
    for (std::size_t f = 0; f < t.power.size(); ++f)
        if (t.power.data[f] > cfg.scale_factor * mean.data[f])
            cloud.points.push_back(make_point(t, t.power.unflat(f)));
    return cloud;
}

namespace detail {

inline std::size_t count_detections(const Array3& power, const Array3& mean, double alpha) {
    std::size_t n = 0;
    for (std::size_t f = 0; f < power.size(); ++f) n += power.data[f] > alpha * mean.data[f];
    return n;
}

}  // namespace detail

/// Picks the scale factor whose detection fraction is closest to K1 by
/// bisection in log(alpha) over [1e-3, 1e3]; detection count is
/// non-increasing in alpha.
inline CfarConfig calibrate_cfar_scale(const Array3& power, CfarConfig cfg) {
    if (!cfg.k1_percent) throw ConfigError("calibrate_cfar_scale: k1_percent not set");
    const double k1 = *cfg.k1_percent;
    if (!(k1 > 0.0 && k1 <= 100.0)) throw ConfigError("calibrate_cfar_scale: K1 must lie in (0, 100]");
    const Array3 mean = cfar_training_means(power, cfg);
    const double n = static_cast<double>(power.size());
    const double target = k1 / 100.0 * n;
    constexpr double kMinAlpha = 1e-3, kMaxAlpha = 1e3;
    constexpr double kTolFraction = 0.005;

    auto count = [&](double log_alpha) {
        return static_cast<double>(detail::count_detections(power, mean, std::exp(log_alpha)));
    };
    double lo = std::log(kMinAlpha), hi = std::log(kMaxAlpha);
    const double c_lo = count(lo), c_hi = count(hi);
    if (c_lo < target - kTolFraction * n || c_hi > target + kTolFraction * n)
        throw NumericError("calibrate_cfar_scale: K1 = " + std::to_string(k1) +
                           "% unreachable for scale factor in [1e-3, 1e3] (reachable " +
                           std::to_string(100.0 * c_hi / n) + "% .. " + std::to_string(100.0 * c_lo / n) +
                           "%)");
    double best = lo, best_err = std::abs(c_lo - target);
    if (std::abs(c_hi - target) < best_err) best = hi, best_err = std::abs(c_hi - target);
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double c = count(mid);
        const double err = std::abs(c - target);
        if (err < best_err || (err == best_err && mid < best)) best = mid, best_err = err;
        if (c > target) lo = mid;
        else hi = mid;
    }
    // A step in the count (ties, flat tensors) can leave K1 between two
    // reachable fractions.
    if (best_err > kTolFraction * n)
        throw NumericError("calibrate_cfar_scale: closest reachable fraction misses K1 = " + std::to_string(k1) +
                           "% by " + std::to_string(100.0 * best_err / n) + " percentage points");
    cfg.scale_factor = std::exp(best);
    return cfg;
}

/// Points inside the ROI divided by the grid's voxel count.
inline double pcd(const RadarPointCloud& cloud, const RoiGrid& grid) {
    std::size_t inside = 0;
    for (const auto& p : cloud.points) inside += grid.contains({p.x, p.y, p.z});
    return static_cast<double>(inside) / static_cast<double>(grid.cell_count());
}

/// Dispatches a method tag onto the matching extractor.
inline RadarPointCloud extract(const PolarTensor3D& t, const MethodTag& m, CfarConfig cfar = {}) {
    switch (m.kind) {
        case MethodTag::Kind::percentile: return percentile_extract(t, {m.value});
        case MethodTag::Kind::cfar: {
            cfar.k1_percent = m.value;
            return ca_cfar(t, calibrate_cfar_scale(t.power, cfar));
        }
        case MethodTag::Kind::cfar_scale: {
            cfar.scale_factor = m.value;
            cfar.k1_percent.reset();
            return ca_cfar(t, cfar);
        }
    }
    throw ConfigError("extract: unknown method");
}

}  // namespace p2t

#endif  // P2T_POINTCLOUD_HPP
