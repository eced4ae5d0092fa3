// SPDX-License-Identifier: Apache-2.0
//
// Composite generator objective:
//   L = L_cGAN + lambda_l1 * L_L1 + lambda_perc * L_perc
// with the adversarial term evaluated from discriminator logits in log
// space, and the perceptual term realised as multi-scale discriminator
// feature matching.

#ifndef P2T_MODEL_LOSSES_HPP
#define P2T_MODEL_LOSSES_HPP

#include <cmath>
#include <string>
#include <vector>

#include "p2t/common.hpp"
#include "p2t/model/feature_map.hpp"
#include "p2t/model/layers.hpp"

namespace p2t::model {

enum class GanMode { log, lsgan };

struct LossWeights {
    double lambda_l1 = 100.0;
    double lambda_perc = 10.0;

    void validate() const {
        if (!(lambda_l1 >= 0.0 && std::isfinite(lambda_l1)) || !(lambda_perc >= 0.0 && std::isfinite(lambda_perc)))
            throw ConfigError("loss weights must be finite and non-negative");
    }
};

struct CganTerms {
    double generator = 0.0;
    double discriminator = 0.0;
};

/// Adversarial terms from per-scale realness probabilities in (0, 1):
///   discriminator = -mean log D(x,y) - mean log(1 - D(x,G(x)))
///   generator     = -mean log D(x,G(x))          (non-saturating)
/// Means are taken over map cells, then over scales.
inline CganTerms loss_cgan(const std::vector<std::vector<double>>& d_real,
                           const std::vector<std::vector<double>>& d_fake) {
    if (d_real.size() != d_fake.size() || d_real.empty())
        throw DataError("loss_cgan: real/fake scale counts differ or are zero");
    CganTerms t;
    for (std::size_t s = 0; s < d_real.size(); ++s) {
        double lr = 0.0, lf = 0.0, lg = 0.0;
        for (double p : d_real[s]) lr -= std::log(p);
        for (double p : d_fake[s]) {
            lf -= std::log1p(-p);
            lg -= std::log(p);
        }
        t.discriminator += lr / d_real[s].size() + lf / d_fake[s].size();
        t.generator += lg / d_fake[s].size();
    }
    t.discriminator /= d_real.size();
    t.generator /= d_real.size();
    return t;
}

/// Same terms from logits, overflow-free: -log sigmoid(l) = softplus(-l),
/// -log(1 - sigmoid(l)) = softplus(l). LSGAN mode uses squared errors on
/// the raw outputs instead. Optional outputs receive d/d(logits).
inline double cgan_discriminator_term(const std::vector<DenseMap>& real, const std::vector<DenseMap>& fake,
                                      GanMode mode, std::vector<DenseMap>* g_real = nullptr,
                                      std::vector<DenseMap>* g_fake = nullptr) {
    const double S = static_cast<double>(real.size());
    double total = 0.0;
    if (g_real) g_real->assign(real.begin(), real.end());
    if (g_fake) g_fake->assign(fake.begin(), fake.end());
    for (std::size_t s = 0; s < real.size(); ++s) {
        const double nr = static_cast<double>(real[s].data.size());
        const double nf = static_cast<double>(fake[s].data.size());
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < real[s].data.size(); ++i) {
            const double l = real[s].data[i];
            if (mode == GanMode::log) {
                a += softplus(-l);
                if (g_real) (*g_real)[s].data[i] = -sigmoid(-l) / (nr * S);
            } else {
                a += (l - 1.0) * (l - 1.0);
                if (g_real) (*g_real)[s].data[i] = 2.0 * (l - 1.0) / (nr * S);
            }
        }
        for (std::size_t i = 0; i < fake[s].data.size(); ++i) {
            const double l = fake[s].data[i];
            if (mode == GanMode::log) {
                b += softplus(l);
                if (g_fake) (*g_fake)[s].data[i] = sigmoid(l) / (nf * S);
            } else {
                b += l * l;
                if (g_fake) (*g_fake)[s].data[i] = 2.0 * l / (nf * S);
            }
        }
        total += a / nr + b / nf;
    }
    return total / S;
}

inline double cgan_generator_term(const std::vector<DenseMap>& fake, GanMode mode,
                                  std::vector<DenseMap>* g_fake = nullptr) {
    const double S = static_cast<double>(fake.size());
    double total = 0.0;
    if (g_fake) g_fake->assign(fake.begin(), fake.end());
    for (std::size_t s = 0; s < fake.size(); ++s) {
        const double n = static_cast<double>(fake[s].data.size());
        double a = 0.0;
        for (std::size_t i = 0; i < fake[s].data.size(); ++i) {
            const double l = fake[s].data[i];
            if (mode == GanMode::log) {
                a += softplus(-l);
                if (g_fake) (*g_fake)[s].data[i] = -sigmoid(-l) / (n * S);
            } else {
                a += (l - 1.0) * (l - 1.0);
                if (g_fake) (*g_fake)[s].data[i] = 2.0 * (l - 1.0) / (n * S);
            }
        }
        total += a / n;
    }
    return total / S;
}

/// Mean absolute elementwise difference; optional d/d(gen).
inline double loss_l1(const std::vector<double>& gen, const std::vector<double>& gt,
                      std::vector<double>* g_gen = nullptr) {
    if (gen.size() != gt.size()) throw DataError("loss_l1: size mismatch");
    if (gen.empty()) return 0.0;
    const double n = static_cast<double>(gen.size());
    double acc = 0.0;
    if (g_gen) g_gen->assign(gen.size(), 0.0);
    for (std::size_t i = 0; i < gen.size(); ++i) {
        const double d = gen[i] - gt[i];
        acc += std::abs(d);
        if (g_gen) (*g_gen)[i] = (d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0) / n;
    }
    return acc / n;
}

/// Per scale, per hidden layer feature maps.
using FeatureSet = std::vector<std::vector<DenseMap>>;

/// Mean over scales and layers of the mean absolute feature difference.
/// Optional gradients w.r.t. fake and real features.
inline double loss_perceptual(const FeatureSet& real, const FeatureSet& fake, FeatureSet* g_fake = nullptr,
                              FeatureSet* g_real = nullptr) {
    if (real.size() != fake.size()) throw DataError("loss_perceptual: scale counts differ");
    std::size_t terms = 0;
    for (std::size_t s = 0; s < real.size(); ++s) {
        if (real[s].size() != fake[s].size()) throw DataError("loss_perceptual: layer counts differ");
        terms += real[s].size();
    }
    if (terms == 0) return 0.0;
    if (g_fake) *g_fake = fake;
    if (g_real) *g_real = real;
    double total = 0.0;
    for (std::size_t s = 0; s < real.size(); ++s)
        for (std::size_t l = 0; l < real[s].size(); ++l) {
            const auto& a = real[s][l].data;
            const auto& b = fake[s][l].data;
            if (a.size() != b.size())
                throw DataError("loss_perceptual: feature shape mismatch at scale " + std::to_string(s) +
                                " layer " + std::to_string(l));
            const double n = static_cast<double>(a.size());
            double acc = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double d = b[i] - a[i];
                acc += std::abs(d);
                const double sg = (d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0) / (n * terms);
                if (g_fake) (*g_fake)[s][l].data[i] = sg;
                if (g_real) (*g_real)[s][l].data[i] = -sg;
            }
            total += acc / n;
        }
    return total / static_cast<double>(terms);
}

struct LossParts {
    double cgan = 0.0;  // generator adversarial term
    double l1 = 0.0;
    double perc = 0.0;
};

/// Weighted generator objective.
inline double loss_total(const LossParts& p, const LossWeights& w) {
    return p.cgan + w.lambda_l1 * p.l1 + w.lambda_perc * p.perc;
}

}  // namespace p2t::model

#endif  // P2T_MODEL_LOSSES_HPP
