// SPDX-License-Identifier: Apache-2.0
//
// BEV image metrics (PSNR, SSIM) and the deep-learning efficiency score:
// min-max normalized PSNR/SSIM per unit point-cloud density.

#ifndef P2T_METRICS_HPP
#define P2T_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "p2t/common.hpp"
#include "p2t/tensorize.hpp"

namespace p2t {

/// Row-major 2D image (x-bins by y-bins).
struct BevImage {
    int rows = 0, cols = 0;
    std::vector<double> values;

    BevImage() = default;
    BevImage(int r, int c, double fill = 0.0)
        : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}
    double& operator()(int i, int j) { return values[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return values[static_cast<std::size_t>(i) * cols + j]; }
};

/// Arithmetic mean over z for each (x, y) column.
inline BevImage mean_pool_height(const CubeTensor& c) {
    const auto& d = c.power.dims;
    BevImage img(d[0], d[1]);
    for (int i = 0; i < d[0]; ++i)
        for (int j = 0; j < d[1]; ++j) {
            double acc = 0.0;
            for (int k = 0; k < d[2]; ++k) acc += c.power(i, j, k);
            img(i, j) = d[2] > 0 ? acc / d[2] : 0.0;
        }
    return img;
}

inline void check_same_dims(const BevImage& a, const BevImage& b, const char* who) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw DataError(std::string(who) + ": image dims differ (" + std::to_string(a.rows) + "x" +
                        std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                        std::to_string(b.cols) + ")");
}

/// 10 log10(peak^2 / MSE); +infinity for identical images.
inline double psnr(const BevImage& a, const BevImage& b, double peak = 1.0) {
    check_same_dims(a, b, "psnr");
    double se = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.values.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

namespace detail {

/// Symmetric ("half-sample") reflection: ... b a | a b c ... c | c b ...
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

inline std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> w(size);
    const double c = (size - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        w[i] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
}

/// Separable Gaussian filtering with symmetric borders.
inline BevImage gaussian_filter(const BevImage& img, const std::vector<double>& w) {
    const int r = static_cast<int>(w.size()) / 2;
    BevImage tmp(img.rows, img.cols), out(img.rows, img.cols);
    for (int i = 0; i < img.rows; ++i)
        for (int j = 0; j < img.cols; ++j) {
            double acc = 0.0;
            for (int t = -r; t <= r; ++t) acc += w[t + r] * img(reflect_index(i + t, img.rows), j);
            tmp(i, j) = acc;
        }
    for (int i = 0; i < img.rows; ++i)
        for (int j = 0; j < img.cols; ++j) {
            double acc = 0.0;
            for (int t = -r; t <= r; ++t) acc += w[t + r] * tmp(i, reflect_index(j + t, img.cols));
            out(i, j) = acc;
        }
    return out;
}

}  // namespace detail

/// Mean local SSIM with a Gaussian window.
inline double ssim(const BevImage& a, const BevImage& b, const SsimParams& prm = {}) {
    check_same_dims(a, b, "ssim");
    if (a.rows < prm.window || a.cols < prm.window)
        throw DataError("ssim: image " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                        " smaller than the " + std::to_string(prm.window) + "x" +
                        std::to_string(prm.window) + " window");
    const auto w = detail::gaussian_kernel(prm.window, prm.sigma);
    BevImage aa(a.rows, a.cols), bb(a.rows, a.cols), ab(a.rows, a.cols);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        aa.values[i] = a.values[i] * a.values[i];
        bb.values[i] = b.values[i] * b.values[i];
        ab.values[i] = a.values[i] * b.values[i];
    }
    const BevImage mu_a = detail::gaussian_filter(a, w), mu_b = detail::gaussian_filter(b, w);
    const BevImage e_aa = detail::gaussian_filter(aa, w), e_bb = detail::gaussian_filter(bb, w);
    const BevImage e_ab = detail::gaussian_filter(ab, w);
    const double c1 = std::pow(prm.k1 * prm.dynamic_range, 2);
    const double c2 = std::pow(prm.k2 * prm.dynamic_range, 2);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double ma = mu_a.values[i], mb = mu_b.values[i];
        const double va = e_aa.values[i] - ma * ma;
        const double vb = e_bb.values[i] - mb * mb;
        const double cov = e_ab.values[i] - ma * mb;
        acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return acc / static_cast<double>(a.values.size());
}

struct FrameScore {
    double psnr_db = 0.0;
    double ssim = 0.0;
};

inline FrameScore evaluate_frame(const CubeTensor& gen, const CubeTensor& gt) {
    if (gen.power.dims != gt.power.dims) throw DataError("evaluate_frame: cube dims differ");
    const BevImage a = mean_pool_height(gen), b = mean_pool_height(gt);
    return {psnr(a, b), ssim(a, b)};
}

// ---------------------------------------------------------------------------
// Efficiency score

struct MethodRecord {
    std::string method;  // "cfar" | "percentile" | ...
    std::string hyper;   // e.g. "2.5"
    double pcd_percent = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    // Filled by normalize_metrics / des.
    double psnr_norm = 0.0;
    double ssim_norm = 0.0;
    double des = 0.0;
};

struct MethodEvalSet {
    std::vector<MethodRecord> records;
    double alpha = 0.5;
    double beta = 0.5;
    std::vector<std::string> warnings;
};

/// Min-max scales PSNR and SSIM across the record set. A metric whose
/// max equals its min is normalized to 0 everywhere and flagged.
inline MethodEvalSet normalize_metrics(MethodEvalSet set) {
    if (set.records.empty()) throw DataError("normalize_metrics: empty record set");
    for (const auto& r : set.records)
        if (!std::isfinite(r.psnr_db) || !std::isfinite(r.ssim))
            throw DataError("normalize_metrics: record " + r.method + ":" + r.hyper +
                            " has a non-finite metric");
    auto scale = [&](double MethodRecord::*raw, double MethodRecord::*norm, const char* name) {
        double lo = set.records.front().*raw, hi = lo;
        for (const auto& r : set.records) {
            lo = std::min(lo, r.*raw);
            hi = std::max(hi, r.*raw);
        }
        if (hi == lo) {
            for (auto& r : set.records) r.*norm = 0.0;
            set.warnings.push_back(std::string("degenerate ") + name +
                                   " column (max == min); normalized values set to 0");
            return;
        }
        for (auto& r : set.records) r.*norm = (r.*raw - lo) / (hi - lo);
    };
    scale(&MethodRecord::psnr_db, &MethodRecord::psnr_norm, "PSNR");
    scale(&MethodRecord::ssim, &MethodRecord::ssim_norm, "SSIM");
    return set;
}

/// M_i = alpha * PSNR_norm_i / D_i + beta * SSIM_norm_i / D_i with D_i the
/// point-cloud density in percent. Expects normalized metrics.
inline MethodEvalSet des(MethodEvalSet set) {
    if (std::abs(set.alpha + set.beta - 1.0) > 1e-12)
        throw ConfigError("des: alpha + beta must equal 1");
    for (auto& r : set.records) {
        if (!(r.pcd_percent > 0.0))
            throw DataError("des: record " + r.method + ":" + r.hyper + " has zero point-cloud density");
        r.des = set.alpha * r.psnr_norm / r.pcd_percent + set.beta * r.ssim_norm / r.pcd_percent;
    }
    return set;
}

/// normalize_metrics followed by des.
inline MethodEvalSet score_methods(MethodEvalSet set) { return des(normalize_metrics(std::move(set))); }

}  // namespace p2t

#endif  // P2T_METRICS_HPP
