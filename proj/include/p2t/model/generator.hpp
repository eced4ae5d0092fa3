// SPDX-License-Identifier: Apache-2.0
//
// Generator: sparse 3D convolution encoder, dense transposed-convolution
// decoder with U-Net skips, sigmoid output over the ROI grid.
//
//   encoder  stage 0: submanifold(in -> c0)
//            stage s: downsample(c[s-1] -> c[s]), submanifold(c[s] -> c[s])
//            every conv followed by leaky ReLU (0.2)
//   decoder  densify(stage S-1), then for s = S-2 .. 0:
//            relu(tconv_s2(h -> c[s])) ++ densify(stage s)
//            sigmoid(tconv_s1(h -> 1))
//
// Hidden decoder convs carry no bias, so an empty input produces the
// constant sigmoid(final bias) everywhere.

#ifndef P2T_MODEL_GENERATOR_HPP
#define P2T_MODEL_GENERATOR_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "p2t/geometry.hpp"
#include "p2t/model/feature_map.hpp"
#include "p2t/model/layers.hpp"
#include "p2t/model/params.hpp"
#include "p2t/tensorize.hpp"

namespace p2t::model {

inline constexpr int kInputChannels = 4;

struct GeneratorArch {
    std::vector<int> encoder_channels{16, 32, 64, 128};
};

struct EncoderLayer {
    SparseKind kind;
    int cin, cout;
    int weight, bias;
};

struct DecoderLayer {
    int cin, cout, stride;
    int weight;
    int bias;  // -1 when absent
};

struct GeneratorParams {
    GeneratorArch arch;
    RoiGrid roi;
    ParamStore params;
    std::vector<EncoderLayer> encoder;
    std::vector<DecoderLayer> decoder;  // hidden stages (deep to shallow), then the output layer

    int stages() const { return static_cast<int>(arch.encoder_channels.size()); }

    /// Builds the layer graph with weights uniform in +-1/sqrt(fan_in).
    static GeneratorParams create(const GeneratorArch& arch, const RoiGrid& roi, std::uint64_t seed) {
        if (arch.encoder_channels.empty()) throw ConfigError("generator: need at least one encoder stage");
        for (int c : arch.encoder_channels)
            if (c < 1) throw ConfigError("generator: channel counts must be >= 1");
        roi.validate();
        GeneratorParams g;
        g.arch = arch;
        g.roi = roi;
        std::mt19937_64 rng(seed);
        const auto& ch = arch.encoder_channels;
        auto conv = [&](const std::string& name, int cin, int cout, bool bias) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(kOffsets * cin));
            const int w = g.params.add(name + ".weight", static_cast<std::size_t>(kOffsets) * cin * cout, bound, rng);
            const int b = bias ? g.params.add(name + ".bias", cout, bound, rng) : -1;
            return std::pair{w, b};
        };
        for (int s = 0; s < g.stages(); ++s) {
            if (s > 0) {
                auto [w, b] = conv("enc" + std::to_string(s) + ".down", ch[s - 1], ch[s], true);
                g.encoder.push_back({SparseKind::downsample, ch[s - 1], ch[s], w, b});
            }
            const int cin = s == 0 ? kInputChannels : ch[s];
            auto [w, b] = conv("enc" + std::to_string(s) + ".subm", cin, ch[s], true);
            g.encoder.push_back({SparseKind::submanifold, cin, ch[s], w, b});
        }
        int h = ch.back();
        for (int s = g.stages() - 2; s >= 0; --s) {
            auto [w, b] = conv("dec" + std::to_string(s) + ".up", h, ch[s], false);
            g.decoder.push_back({h, ch[s], 2, w, b});
            h = 2 * ch[s];
        }
        auto [w, b] = conv("dec.out", h, 1, true);
        g.decoder.push_back({h, 1, 1, w, b});
        return g;
    }
};

// ---------------------------------------------------------------------------
// Input encoding

/// Sparse 4-channel model input: coordinates mapped to [0, 1] over the ROI,
/// power divided by the frame's peak voxel power.
inline SparseMap encoder_input(const SparseVoxelGrid& x, const RoiGrid& roi) {
    if (x.dims != roi.dims()) throw DataError("encoder_input: voxel grid dims do not match the ROI");
    SparseMap m;
    m.dims = x.dims;
    m.channels = kInputChannels;
    double peak = 0.0;
    for (const auto& v : x.voxels) peak = std::max(peak, v.features[3]);
    const double lo[3] = {roi.x_min, roi.y_min, roi.z_min};
    const double ext[3] = {roi.x_max - roi.x_min, roi.y_max - roi.y_min, roi.z_max - roi.z_min};
    m.sites.reserve(x.voxels.size());
    m.features.reserve(x.voxels.size() * kInputChannels);
    for (const auto& v : x.voxels) {
        if (!in_bounds(m.dims, v.index)) throw DataError("encoder_input: voxel index outside grid");
        m.sites.push_back(v.index);
        for (int a = 0; a < 3; ++a) m.features.push_back((v.features[a] - lo[a]) / ext[a]);
        m.features.push_back(peak > 0.0 ? v.features[3] / peak : 0.0);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Forward

struct EncoderTrace {
    std::vector<SparseMap> inputs;   // per layer
    std::vector<SparseConvResult> conv;  // pre-activation outputs + rulebooks
};

struct EncoderFeatures {
    std::vector<SparseMap> stages;  // post-activation output of every stage
};

inline EncoderFeatures encoder_forward(const SparseMap& x, const GeneratorParams& g, EncoderTrace* trace = nullptr) {
    if (x.channels != kInputChannels) throw DataError("encoder_forward: expected 4 input channels");
    if (x.dims != g.roi.dims()) throw DataError("encoder_forward: input dims do not match the ROI grid");
    EncoderFeatures f;
    SparseMap h = x;
    for (std::size_t i = 0; i < g.encoder.size(); ++i) {
        const auto& L = g.encoder[i];
        auto r = sparse_conv_forward(h, L.kind, L.cout, g.params[L.weight], g.params[L.bias]);
        SparseMap post = r.out;
        leaky_relu(post.features);
        if (trace) {
            trace->inputs.push_back(std::move(h));
            trace->conv.push_back(std::move(r));
        }
        h = std::move(post);
        if (L.kind == SparseKind::submanifold) f.stages.push_back(h);
    }
    return f;
}

inline EncoderFeatures encoder_forward(const SparseVoxelGrid& x, const GeneratorParams& g,
                                       EncoderTrace* trace = nullptr) {
    return encoder_forward(encoder_input(x, g.roi), g, trace);
}

struct DecoderTrace {
    std::vector<DenseMap> inputs;  // per decoder layer
    std::vector<DenseMap> pre;     // per decoder layer, pre-activation
    DenseMap output;               // sigmoid output, 1 channel
};

inline DenseMap decoder_forward_dense(const EncoderFeatures& f, const GeneratorParams& g,
                                      DecoderTrace* trace = nullptr) {
    const int S = g.stages();
    if (static_cast<int>(f.stages.size()) != S)
        throw DataError("decoder_forward: expected " + std::to_string(S) + " encoder stages, got " +
                        std::to_string(f.stages.size()));
    for (int s = 0; s < S; ++s)
        if (f.stages[s].channels != g.arch.encoder_channels[s])
            throw DataError("decoder_forward: stage " + std::to_string(s) + " channel mismatch");
    DenseMap h = densify(f.stages[S - 1]);
    for (std::size_t j = 0; j < g.decoder.size(); ++j) {
        const auto& L = g.decoder[j];
        const bool is_out = j + 1 == g.decoder.size();
        const int target_stage = is_out ? 0 : S - 2 - static_cast<int>(j);
        const Index3 out_dims = f.stages[target_stage].dims;
        if (h.channels != L.cin || !transposed_dims_ok(h.dims, out_dims, L.stride))
            throw DataError("decoder_forward: shape mismatch at decoder stage " + std::to_string(j) + " (" +
                            std::to_string(h.dims[0]) + "x" + std::to_string(h.dims[1]) + "x" +
                            std::to_string(h.dims[2]) + "x" + std::to_string(h.channels) + " -> " +
                            std::to_string(out_dims[0]) + "x" + std::to_string(out_dims[1]) + "x" +
                            std::to_string(out_dims[2]) + ")");
        const std::span<const double> bias =
            L.bias >= 0 ? g.params[L.bias] : std::span<const double>{};
        DenseMap pre = transposed_conv_forward(h, L.stride, L.cout, out_dims, g.params[L.weight], bias);
        DenseMap post = pre;
        if (is_out)
            for (auto& v : post.data) v = sigmoid(v);
        else
            relu(post.data);
        if (trace) {
            trace->inputs.push_back(std::move(h));
            trace->pre.push_back(std::move(pre));
        }
        h = is_out ? std::move(post) : concat_channels(post, densify(f.stages[target_stage]));
    }
    if (h.dims != g.roi.dims()) throw DataError("decoder_forward: output dims differ from the ROI grid");
    if (trace) trace->output = h;
    return h;
}

inline CubeTensor to_cube(const DenseMap& m) {
    CubeTensor c;
    c.power = Array3(m.dims);
    c.power.data = m.data;
    c.normalized = true;
    return c;
}

inline CubeTensor decoder_forward(const EncoderFeatures& f, const GeneratorParams& g) {
    return to_cube(decoder_forward_dense(f, g));
}

/// Inference: encoder then decoder.
inline CubeTensor generate(const SparseVoxelGrid& x, const GeneratorParams& g) {
    return decoder_forward(encoder_forward(x, g), g);
}

// ---------------------------------------------------------------------------
// Reverse mode

/// Backpropagates d(loss)/d(output) (1 channel over the ROI) and
/// accumulates parameter gradients into `grads`.
inline void generator_backward(const GeneratorParams& g, const EncoderTrace& et, const DecoderTrace& dt,
                               const DenseMap& grad_output, Grads& grads) {
    const int S = g.stages();
    const std::size_t nd = g.decoder.size();
    std::vector<DenseMap> stage_grad_dense(S);

    // Decoder, output layer first.
    DenseMap gh = grad_output;
    for (std::size_t i = 0; i < gh.data.size(); ++i) {
        const double y = dt.output.data[i];
        gh.data[i] *= y * (1.0 - y);
    }
    for (std::size_t jj = nd; jj-- > 0;) {
        const auto& L = g.decoder[jj];
        const bool is_out = jj + 1 == nd;
        DenseMap gpre;
        if (is_out) {
            gpre = std::move(gh);
        } else {
            // gh is the gradient of [relu(pre) | skip]
            DenseMap gpost, gskip;
            split_channels(gh, L.cout, gpost, gskip);
            const int target_stage = S - 2 - static_cast<int>(jj);
            stage_grad_dense[target_stage] = std::move(gskip);
            relu_backward(dt.pre[jj].data, gpost.data);
            gpre = std::move(gpost);
        }
        const std::span<double> db = L.bias >= 0 ? grads[L.bias] : std::span<double>{};
        gh = transposed_conv_backward(dt.inputs[jj], L.stride, gpre, g.params[L.weight], grads[L.weight], db);
    }
    stage_grad_dense[S - 1] = std::move(gh);

    // Encoder, last layer first. Stage ends are the submanifold layers.
    SparseMap gpost;
    bool have = false;
    int stage = S - 1;
    for (std::size_t ii = g.encoder.size(); ii-- > 0;) {
        const auto& L = g.encoder[ii];
        const SparseConvResult& r = et.conv[ii];
        if (L.kind == SparseKind::submanifold) {
            const DenseMap& gd = stage_grad_dense[stage];
            SparseMap gs = gather_sites(gd, r.out);
            if (have)
                for (std::size_t k = 0; k < gs.features.size(); ++k) gs.features[k] += gpost.features[k];
            gpost = std::move(gs);
            --stage;
        }
        leaky_relu_backward(r.out.features, gpost.features);
        gpost = sparse_conv_backward(et.inputs[ii], r.rules, gpost, g.params[L.weight], grads[L.weight],
                                     grads[L.bias]);
        have = true;
    }
}

}  // namespace p2t::model

#endif  // P2T_MODEL_GENERATOR_HPP
