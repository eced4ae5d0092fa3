// SPDX-License-Identifier: Apache-2.0
//
// Forward and reverse-mode kernels for the 3x3x3 convolutions used by the
// generator and discriminator, plus activations and pooling.
//
// Weight layout is W[k][c_in][c_out] with kernel offset
// k = (dx * 3 + dy) * 3 + dz, dx, dy, dz in {0, 1, 2}. All convolutions use
// padding 1, so input coordinate = out * stride - 1 + d.

#ifndef P2T_MODEL_LAYERS_HPP
#define P2T_MODEL_LAYERS_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "p2t/model/feature_map.hpp"

namespace p2t::model {

inline constexpr int kKernel = 3;
inline constexpr int kOffsets = 27;

inline Index3 kernel_offset(int k) { return {k / 9, (k / 3) % 3, k % 3}; }

/// Output dims of a stride-s, pad-1, kernel-3 convolution.
inline Index3 conv_out_dims(const Index3& in, int stride) {
    Index3 o;
    for (int a = 0; a < 3; ++a) o[a] = (in[a] - 1) / stride + 1;
    return o;
}

// ---------------------------------------------------------------------------
// Sparse convolutions

struct Rule {
    int k;
    int in;
    int out;
};

enum class SparseKind { submanifold, downsample };

struct SparseConvResult {
    SparseMap out;
    std::vector<Rule> rules;  // ordered by (out, k)
};

/// Active output sites for a layer: the input set for submanifold layers,
/// the sorted set of floor(i / 2) images for stride-2 downsampling.
inline std::vector<Index3> sparse_out_sites(const SparseMap& in, SparseKind kind, Index3& out_dims) {
    if (kind == SparseKind::submanifold) {
        out_dims = in.dims;
        return in.sites;
    }
    out_dims = conv_out_dims(in.dims, 2);
    std::vector<std::size_t> flats;
    flats.reserve(in.size());
    for (const auto& s : in.sites) flats.push_back(flat_index(out_dims, {s[0] / 2, s[1] / 2, s[2] / 2}));
    std::sort(flats.begin(), flats.end());
    flats.erase(std::unique(flats.begin(), flats.end()), flats.end());
    std::vector<Index3> out;
    out.reserve(flats.size());
    for (auto f : flats) {
        const int z = static_cast<int>(f % out_dims[2]);
        f /= out_dims[2];
        out.push_back({static_cast<int>(f / out_dims[1]), static_cast<int>(f % out_dims[1]), z});
    }
    return out;
}

inline SparseConvResult sparse_conv_forward(const SparseMap& in, SparseKind kind, int cout,
                                            std::span<const double> w, std::span<const double> b) {
    const int cin = in.channels;
    if (w.size() != static_cast<std::size_t>(kOffsets) * cin * cout)
        throw DataError("sparse_conv: weight size does not match channels");
    SparseConvResult r;
    r.out.sites = sparse_out_sites(in, kind, r.out.dims);
    r.out.channels = cout;
    r.out.features.assign(r.out.sites.size() * cout, 0.0);
    const int stride = kind == SparseKind::submanifold ? 1 : 2;
    const auto lookup = in.index();
    for (std::size_t o = 0; o < r.out.sites.size(); ++o) {
        const Index3& os = r.out.sites[o];
        auto acc = r.out.row(o);
        if (!b.empty())
            for (int c = 0; c < cout; ++c) acc[c] = b[c];
        for (int k = 0; k < kOffsets; ++k) {
            const Index3 d = kernel_offset(k);
            const Index3 is{os[0] * stride - 1 + d[0], os[1] * stride - 1 + d[1], os[2] * stride - 1 + d[2]};
            if (!in_bounds(in.dims, is)) continue;
            const auto it = lookup.find(flat_index(in.dims, is));
            if (it == lookup.end()) continue;
            r.rules.push_back({k, it->second, static_cast<int>(o)});
            const auto x = in.row(it->second);
            const double* wk = w.data() + static_cast<std::size_t>(k) * cin * cout;
            for (int ci = 0; ci < cin; ++ci) {
                const double v = x[ci];
                if (v == 0.0) continue;
                const double* wr = wk + static_cast<std::size_t>(ci) * cout;
                for (int co = 0; co < cout; ++co) acc[co] += v * wr[co];
            }
        }
    }
    return r;
}

/// Returns d(in); accumulates into dw and db (db may be empty).
inline SparseMap sparse_conv_backward(const SparseMap& in, const std::vector<Rule>& rules,
                                      const SparseMap& gout, std::span<const double> w,
                                      std::span<double> dw, std::span<double> db) {
    const int cin = in.channels, cout = gout.channels;
    SparseMap gin = in;
    std::fill(gin.features.begin(), gin.features.end(), 0.0);
    if (!db.empty())
        for (std::size_t o = 0; o < gout.size(); ++o) {
            const auto g = gout.row(o);
            for (int c = 0; c < cout; ++c) db[c] += g[c];
        }
    for (const Rule& rule : rules) {
        const auto g = gout.row(rule.out);
        const auto x = in.row(rule.in);
        auto gx = gin.row(rule.in);
        const std::size_t base = static_cast<std::size_t>(rule.k) * cin * cout;
        for (int ci = 0; ci < cin; ++ci) {
            const double* wr = w.data() + base + static_cast<std::size_t>(ci) * cout;
            double* dwr = dw.data() + base + static_cast<std::size_t>(ci) * cout;
            const double v = x[ci];
            double s = 0.0;
            for (int co = 0; co < cout; ++co) {
                s += wr[co] * g[co];
                dwr[co] += v * g[co];
            }
            gx[ci] += s;
        }
    }
    return gin;
}

// ---------------------------------------------------------------------------
// Dense convolutions

inline DenseMap conv_forward(const DenseMap& in, int stride, int cout, std::span<const double> w,
                             std::span<const double> b) {
    const int cin = in.channels;
    if (w.size() != static_cast<std::size_t>(kOffsets) * cin * cout)
        throw DataError("conv: weight size does not match channels");
    DenseMap out(conv_out_dims(in.dims, stride), cout);
    const auto& od = out.dims;
    for (int x = 0; x < od[0]; ++x)
        for (int y = 0; y < od[1]; ++y)
            for (int z = 0; z < od[2]; ++z) {
                auto acc = out.at(flat_index(od, {x, y, z}));
                if (!b.empty())
                    for (int c = 0; c < cout; ++c) acc[c] = b[c];
                for (int k = 0; k < kOffsets; ++k) {
                    const Index3 d = kernel_offset(k);
                    const Index3 is{x * stride - 1 + d[0], y * stride - 1 + d[1], z * stride - 1 + d[2]};
                    if (!in_bounds(in.dims, is)) continue;
                    const auto xin = in.at(flat_index(in.dims, is));
                    const double* wk = w.data() + static_cast<std::size_t>(k) * cin * cout;
                    for (int ci = 0; ci < cin; ++ci) {
                        const double v = xin[ci];
                        if (v == 0.0) continue;
                        const double* wr = wk + static_cast<std::size_t>(ci) * cout;
                        for (int co = 0; co < cout; ++co) acc[co] += v * wr[co];
                    }
                }
            }
    return out;
}

inline DenseMap conv_backward(const DenseMap& in, int stride, const DenseMap& gout, std::span<const double> w,
                              std::span<double> dw, std::span<double> db) {
    const int cin = in.channels, cout = gout.channels;
    DenseMap gin(in.dims, cin);
    const auto& od = gout.dims;
    for (int x = 0; x < od[0]; ++x)
        for (int y = 0; y < od[1]; ++y)
            for (int z = 0; z < od[2]; ++z) {
                const auto g = gout.at(flat_index(od, {x, y, z}));
                if (!db.empty())
                    for (int c = 0; c < cout; ++c) db[c] += g[c];
                for (int k = 0; k < kOffsets; ++k) {
                    const Index3 d = kernel_offset(k);
                    const Index3 is{x * stride - 1 + d[0], y * stride - 1 + d[1], z * stride - 1 + d[2]};
                    if (!in_bounds(in.dims, is)) continue;
                    const std::size_t si = flat_index(in.dims, is);
                    const auto xin = in.at(si);
                    auto gx = gin.at(si);
                    const std::size_t base = static_cast<std::size_t>(k) * cin * cout;
                    for (int ci = 0; ci < cin; ++ci) {
                        const double* wr = w.data() + base + static_cast<std::size_t>(ci) * cout;
                        double* dwr = dw.data() + base + static_cast<std::size_t>(ci) * cout;
                        const double v = xin[ci];
                        double s = 0.0;
                        for (int co = 0; co < cout; ++co) {
                            s += wr[co] * g[co];
                            dwr[co] += v * g[co];
                        }
                        gx[ci] += s;
                    }
                }
            }
    return gin;
}

/// Valid transposed-conv output extents for an input extent n at `stride`.
inline bool transposed_dims_ok(const Index3& in, const Index3& out, int stride) {
    for (int a = 0; a < 3; ++a)
        if (out[a] < (in[a] - 1) * stride + 1 || out[a] > in[a] * stride) return false;
    return true;
}

/// Adjoint of conv_forward's input map: out[i * stride - 1 + d] += in[i] W[d].
inline DenseMap transposed_conv_forward(const DenseMap& in, int stride, int cout, const Index3& out_dims,
                                        std::span<const double> w, std::span<const double> b) {
    const int cin = in.channels;
    if (w.size() != static_cast<std::size_t>(kOffsets) * cin * cout)
        throw DataError("transposed_conv: weight size does not match channels");
    DenseMap out(out_dims, cout);
    if (!b.empty())
        for (std::size_t s = 0; s < out.sites(); ++s) {
            auto o = out.at(s);
            for (int c = 0; c < cout; ++c) o[c] = b[c];
        }
    const auto& id = in.dims;
    for (int x = 0; x < id[0]; ++x)
        for (int y = 0; y < id[1]; ++y)
            for (int z = 0; z < id[2]; ++z) {
                const auto xin = in.at(flat_index(id, {x, y, z}));
                for (int k = 0; k < kOffsets; ++k) {
                    const Index3 d = kernel_offset(k);
                    const Index3 os{x * stride - 1 + d[0], y * stride - 1 + d[1], z * stride - 1 + d[2]};
                    if (!in_bounds(out_dims, os)) continue;
                    auto acc = out.at(flat_index(out_dims, os));
                    const double* wk = w.data() + static_cast<std::size_t>(k) * cin * cout;
                    for (int ci = 0; ci < cin; ++ci) {
                        const double v = xin[ci];
                        if (v == 0.0) continue;
                        const double* wr = wk + static_cast<std::size_t>(ci) * cout;
                        for (int co = 0; co < cout; ++co) acc[co] += v * wr[co];
                    }
                }
            }
    return out;
}

inline DenseMap transposed_conv_backward(const DenseMap& in, int stride, const DenseMap& gout,
                                         std::span<const double> w, std::span<double> dw, std::span<double> db) {
    const int cin = in.channels, cout = gout.channels;
    DenseMap gin(in.dims, cin);
    if (!db.empty())
        for (std::size_t s = 0; s < gout.sites(); ++s) {
            const auto g = gout.at(s);
            for (int c = 0; c < cout; ++c) db[c] += g[c];
        }
    const auto& id = in.dims;
    for (int x = 0; x < id[0]; ++x)
        for (int y = 0; y < id[1]; ++y)
            for (int z = 0; z < id[2]; ++z) {
                const std::size_t si = flat_index(id, {x, y, z});
                const auto xin = in.at(si);
                auto gx = gin.at(si);
                for (int k = 0; k < kOffsets; ++k) {
                    const Index3 d = kernel_offset(k);
                    const Index3 os{x * stride - 1 + d[0], y * stride - 1 + d[1], z * stride - 1 + d[2]};
                    if (!in_bounds(gout.dims, os)) continue;
                    const auto g = gout.at(flat_index(gout.dims, os));
                    const std::size_t base = static_cast<std::size_t>(k) * cin * cout;
                    for (int ci = 0; ci < cin; ++ci) {
                        const double* wr = w.data() + base + static_cast<std::size_t>(ci) * cout;
                        double* dwr = dw.data() + base + static_cast<std::size_t>(ci) * cout;
                        const double v = xin[ci];
                        double s = 0.0;
                        for (int co = 0; co < cout; ++co) {
                            s += wr[co] * g[co];
                            dwr[co] += v * g[co];
                        }
                        gx[ci] += s;
                    }
                }
            }
    return gin;
}

// ---------------------------------------------------------------------------
// Activations (elementwise, in place; backward takes the pre-activation)

inline constexpr double kLeakySlope = 0.2;

inline void leaky_relu(std::span<double> v) {
    for (auto& x : v) x = x > 0.0 ? x : kLeakySlope * x;
}
inline void leaky_relu_backward(std::span<const double> pre, std::span<double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= pre[i] > 0.0 ? 1.0 : kLeakySlope;
}
inline void relu(std::span<double> v) {
    for (auto& x : v) x = x > 0.0 ? x : 0.0;
}
inline void relu_backward(std::span<const double> pre, std::span<double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= pre[i] > 0.0 ? 1.0 : 0.0;
}
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}
/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// ---------------------------------------------------------------------------
// 2x average pooling; windows clipped at the upper border average fewer cells.

inline DenseMap avg_pool2(const DenseMap& in) {
    Index3 od;
    for (int a = 0; a < 3; ++a) od[a] = (in.dims[a] + 1) / 2;
    DenseMap out(od, in.channels);
    for (int x = 0; x < od[0]; ++x)
        for (int y = 0; y < od[1]; ++y)
            for (int z = 0; z < od[2]; ++z) {
                auto acc = out.at(flat_index(od, {x, y, z}));
                int n = 0;
                for (int k = 0; k < 8; ++k) {
                    const Index3 is{2 * x + (k >> 2), 2 * y + ((k >> 1) & 1), 2 * z + (k & 1)};
                    if (!in_bounds(in.dims, is)) continue;
                    ++n;
                    const auto v = in.at(flat_index(in.dims, is));
                    for (int c = 0; c < in.channels; ++c) acc[c] += v[c];
                }
                for (auto& a : acc) a /= n;
            }
    return out;
}

inline DenseMap avg_pool2_backward(const Index3& in_dims, const DenseMap& gout) {
    DenseMap gin(in_dims, gout.channels);
    const auto& od = gout.dims;
    for (int x = 0; x < od[0]; ++x)
        for (int y = 0; y < od[1]; ++y)
            for (int z = 0; z < od[2]; ++z) {
                const auto g = gout.at(flat_index(od, {x, y, z}));
                int n = 0;
                for (int k = 0; k < 8; ++k)
                    n += in_bounds(in_dims, {2 * x + (k >> 2), 2 * y + ((k >> 1) & 1), 2 * z + (k & 1)});
                for (int k = 0; k < 8; ++k) {
                    const Index3 is{2 * x + (k >> 2), 2 * y + ((k >> 1) & 1), 2 * z + (k & 1)};
                    if (!in_bounds(in_dims, is)) continue;
                    auto dst = gin.at(flat_index(in_dims, is));
                    for (int c = 0; c < gout.channels; ++c) dst[c] += g[c] / n;
                }
            }
    return gin;
}

}  // namespace p2t::model

#endif  // P2T_MODEL_LAYERS_HPP
