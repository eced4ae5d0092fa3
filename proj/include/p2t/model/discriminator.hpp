// SPDX-License-Identifier: Apache-2.0
//
// Multi-scale conditional patch discriminator over dense 3D grids.
//
// Input is [condition | candidate] on channels. Scale s sees the input
// average-pooled s times by 2. Each scale runs
//   conv_s2(c_in -> f) lrelu, conv_s2(f -> 2f) lrelu, conv_s1(2f -> 1)
// and returns the logit map plus the hidden activations (for feature
// matching). Realness = sigmoid(logit).

#ifndef P2T_MODEL_DISCRIMINATOR_HPP
#define P2T_MODEL_DISCRIMINATOR_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "p2t/model/feature_map.hpp"
#include "p2t/model/layers.hpp"
#include "p2t/model/params.hpp"

namespace p2t::model {

struct DiscriminatorArch {
    int scales = 2;
    int base_channels = 16;
    int hidden_layers = 2;
};

struct DiscLayer {
    int cin, cout, stride;
    int weight, bias;
};

struct DiscriminatorParams {
    DiscriminatorArch arch;
    int input_channels = 5;
    ParamStore params;
    std::vector<std::vector<DiscLayer>> scales;

    static DiscriminatorParams create(const DiscriminatorArch& arch, int input_channels, std::uint64_t seed) {
        if (arch.scales < 1 || arch.base_channels < 1 || arch.hidden_layers < 1)
            throw ConfigError("discriminator: scales, base_channels and hidden_layers must be >= 1");
        DiscriminatorParams d;
        d.arch = arch;
        d.input_channels = input_channels;
        std::mt19937_64 rng(seed);
        for (int s = 0; s < arch.scales; ++s) {
            std::vector<DiscLayer> layers;
            int cin = input_channels;
            for (int l = 0; l <= arch.hidden_layers; ++l) {
                const bool last = l == arch.hidden_layers;
                const int cout = last ? 1 : arch.base_channels << l;
                const double bound = 1.0 / std::sqrt(static_cast<double>(kOffsets * cin));
                const std::string name = "disc" + std::to_string(s) + ".conv" + std::to_string(l);
                const int w = d.params.add(name + ".weight", static_cast<std::size_t>(kOffsets) * cin * cout, bound, rng);
                const int b = d.params.add(name + ".bias", cout, bound, rng);
                layers.push_back({cin, cout, last ? 1 : 2, w, b});
                cin = cout;
            }
            d.scales.push_back(std::move(layers));
        }
        return d;
    }
};

struct ScaleOutput {
    DenseMap logits;                 // 1 channel realness logits
    std::vector<DenseMap> features;  // hidden activations
};

struct ScaleTrace {
    std::vector<DenseMap> pooled;  // pooled[0] = raw input, pooled[s] = pooled s times
    std::vector<DenseMap> inputs;  // per layer
    std::vector<DenseMap> pre;     // per hidden layer pre-activation
};

struct DiscriminatorTrace {
    std::vector<ScaleTrace> scales;
};

inline std::vector<ScaleOutput> discriminator_forward(const DenseMap& condition, const DenseMap& candidate,
                                                      const DiscriminatorParams& d,
                                                      DiscriminatorTrace* trace = nullptr) {
    if (condition.dims != candidate.dims)
        throw DataError("discriminator_forward: condition and candidate dims differ");
    if (condition.channels + candidate.channels != d.input_channels)
        throw DataError("discriminator_forward: expected " + std::to_string(d.input_channels) +
                        " input channels in total");
    std::vector<ScaleOutput> out;
    DenseMap x = concat_channels(condition, candidate);
    std::vector<DenseMap> pooled{x};
    for (int s = 0; s < d.arch.scales; ++s) {
        if (s > 0) pooled.push_back(avg_pool2(pooled.back()));
        ScaleTrace st;
        ScaleOutput so;
        DenseMap h = pooled[s];
        const auto& layers = d.scales[s];
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& L = layers[l];
            DenseMap pre = conv_forward(h, L.stride, L.cout, d.params[L.weight], d.params[L.bias]);
            if (trace) st.inputs.push_back(h);
            if (l + 1 == layers.size()) {
                so.logits = std::move(pre);
                break;
            }
            DenseMap post = pre;
            leaky_relu(post.data);
            if (trace) st.pre.push_back(std::move(pre));
            so.features.push_back(post);
            h = std::move(post);
        }
        if (trace) {
            st.pooled.assign(pooled.begin(), pooled.begin() + s + 1);
            trace->scales.push_back(std::move(st));
        }
        out.push_back(std::move(so));
    }
    return out;
}

/// Upstream gradients for one scale: d/d(logits) and d/d(each feature map).
/// Feature gradients may be left empty when no feature loss applies.
struct ScaleGrad {
    DenseMap logits;
    std::vector<DenseMap> features;
};

/// Accumulates parameter gradients and returns d(loss)/d(input) over the
/// concatenated [condition | candidate] channels.
inline DenseMap discriminator_backward(const DiscriminatorParams& d, const DiscriminatorTrace& tr,
                                       const std::vector<ScaleGrad>& upstream, Grads& grads) {
    DenseMap total;
    for (int s = d.arch.scales - 1; s >= 0; --s) {
        const auto& layers = d.scales[s];
        const ScaleTrace& st = tr.scales[s];
        const ScaleGrad& ug = upstream[s];
        DenseMap g = ug.logits;
        for (std::size_t ll = layers.size(); ll-- > 0;) {
            const auto& L = layers[ll];
            if (ll + 1 < layers.size()) {
                if (ll < ug.features.size() && !ug.features[ll].data.empty())
                    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += ug.features[ll].data[i];
                leaky_relu_backward(st.pre[ll].data, g.data);
            }
            g = conv_backward(st.inputs[ll], L.stride, g, d.params[L.weight], grads[L.weight], grads[L.bias]);
        }
        // Undo the pooling chain down to the raw input.
        for (int p = s; p > 0; --p) g = avg_pool2_backward(st.pooled[p - 1].dims, g);
        if (total.data.empty()) total = std::move(g);
        else
            for (std::size_t i = 0; i < g.data.size(); ++i) total.data[i] += g.data[i];
    }
    return total;
}

}  // namespace p2t::model

#endif  // P2T_MODEL_DISCRIMINATOR_HPP
