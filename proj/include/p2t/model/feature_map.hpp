// SPDX-License-Identifier: Apache-2.0
//
// Channels-last dense and sparse 3D feature maps.

#ifndef P2T_MODEL_FEATURE_MAP_HPP
#define P2T_MODEL_FEATURE_MAP_HPP

#include <cstddef>
#include <span>
#include <unordered_map>
#include <vector>

#include "p2t/common.hpp"

namespace p2t::model {

inline std::size_t volume(const Index3& d) {
    return static_cast<std::size_t>(d[0]) * d[1] * d[2];
}

inline std::size_t flat_index(const Index3& d, const Index3& i) {
    return (static_cast<std::size_t>(i[0]) * d[1] + i[1]) * d[2] + i[2];
}

inline bool in_bounds(const Index3& d, const Index3& i) {
    return i[0] >= 0 && i[0] < d[0] && i[1] >= 0 && i[1] < d[1] && i[2] >= 0 && i[2] < d[2];
}

/// Dense map, element (site, channel) at `site * channels + channel`.
struct DenseMap {
    Index3 dims{0, 0, 0};
    int channels = 0;
    std::vector<double> data;

    DenseMap() = default;
    DenseMap(Index3 d, int c, double fill = 0.0) : dims(d), channels(c), data(volume(d) * c, fill) {}

    std::size_t sites() const { return volume(dims); }
    std::span<double> at(std::size_t site) { return {data.data() + site * channels, static_cast<std::size_t>(channels)}; }
    std::span<const double> at(std::size_t site) const {
        return {data.data() + site * channels, static_cast<std::size_t>(channels)};
    }
    bool same_shape(const DenseMap& o) const { return dims == o.dims && channels == o.channels; }
};

/// Sparse map: active sites (sorted by flat index) and their feature rows.
struct SparseMap {
    Index3 dims{0, 0, 0};
    int channels = 0;
    std::vector<Index3> sites;
    std::vector<double> features;  // sites.size() x channels

    std::size_t size() const { return sites.size(); }
    std::span<double> row(std::size_t i) { return {features.data() + i * channels, static_cast<std::size_t>(channels)}; }
    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * channels, static_cast<std::size_t>(channels)};
    }

    /// flat index -> row lookup
    std::unordered_map<std::size_t, int> index() const {
        std::unordered_map<std::size_t, int> m;
        m.reserve(sites.size() * 2);
        for (std::size_t i = 0; i < sites.size(); ++i) m.emplace(flat_index(dims, sites[i]), static_cast<int>(i));
        return m;
    }
};

/// Scatter sparse rows into a zero dense map.
inline DenseMap densify(const SparseMap& s) {
    DenseMap d(s.dims, s.channels);
    for (std::size_t i = 0; i < s.size(); ++i) {
        auto dst = d.at(flat_index(s.dims, s.sites[i]));
        const auto src = s.row(i);
        for (int c = 0; c < s.channels; ++c) dst[c] = src[c];
    }
    return d;
}

/// Adjoint of densify: gather the dense gradient at active sites.
inline SparseMap gather_sites(const DenseMap& grad, const SparseMap& like) {
    SparseMap g = like;
    for (std::size_t i = 0; i < like.size(); ++i) {
        const auto src = grad.at(flat_index(grad.dims, like.sites[i]));
        auto dst = g.row(i);
        for (int c = 0; c < like.channels; ++c) dst[c] = src[c];
    }
    return g;
}

/// Channel concatenation [a | b].
inline DenseMap concat_channels(const DenseMap& a, const DenseMap& b) {
    if (a.dims != b.dims) throw DataError("concat_channels: spatial dims differ");
    DenseMap out(a.dims, a.channels + b.channels);
    for (std::size_t s = 0; s < a.sites(); ++s) {
        auto dst = out.at(s);
        const auto x = a.at(s), y = b.at(s);
        for (int c = 0; c < a.channels; ++c) dst[c] = x[c];
        for (int c = 0; c < b.channels; ++c) dst[a.channels + c] = y[c];
    }
    return out;
}

/// Splits a concatenated gradient back into its two parts.
inline void split_channels(const DenseMap& g, int first, DenseMap& ga, DenseMap& gb) {
    ga = DenseMap(g.dims, first);
    gb = DenseMap(g.dims, g.channels - first);
    for (std::size_t s = 0; s < g.sites(); ++s) {
        const auto src = g.at(s);
        auto x = ga.at(s), y = gb.at(s);
        for (int c = 0; c < first; ++c) x[c] = src[c];
        for (int c = first; c < g.channels; ++c) y[c - first] = src[c];
    }
}

}  // namespace p2t::model

#endif  // P2T_MODEL_FEATURE_MAP_HPP
