// SPDX-License-Identifier: Apache-2.0
//
// Alternating adversarial training: one discriminator step on its term,
// then one generator step on the weighted objective, Adam on both.
// Per-sample work may run on several threads; gradients are reduced in
// sample order so results are bit-identical for any thread count.

#ifndef P2T_MODEL_TRAINER_HPP
#define P2T_MODEL_TRAINER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "p2t/model/discriminator.hpp"
#include "p2t/model/generator.hpp"
#include "p2t/model/losses.hpp"
#include "p2t/model/params.hpp"

namespace p2t::model {

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 8;
    int epochs = 20;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    long max_steps = 0;  // 0: no cap
    GanMode gan_mode = GanMode::log;

    void validate() const {
        if (!(learning_rate >= 0.0) || batch_size < 1 || epochs < 1 || !(beta1 >= 0.0 && beta1 < 1.0) ||
            !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0) || max_steps < 0)
            throw ConfigError("train: invalid optimizer settings");
    }
    AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

/// One (point cloud, ground truth) training pair.
struct Sample {
    SparseVoxelGrid input;
    CubeTensor target;
};

/// Model-ready tensors for a sample.
struct Prepared {
    SparseMap input;     // 4-channel sparse encoder input
    DenseMap condition;  // densified input, discriminator condition
    DenseMap target;     // 1 channel
};

inline Prepared prepare(const Sample& s, const GeneratorParams& g) {
    Prepared p;
    p.input = encoder_input(s.input, g.roi);
    p.condition = densify(p.input);
    if (s.target.power.dims != g.roi.dims()) throw DataError("prepare: target cube dims differ from the ROI grid");
    p.target = DenseMap(s.target.power.dims, 1);
    p.target.data = s.target.power.data;
    return p;
}

struct GeneratorPass {
    EncoderTrace enc;
    DecoderTrace dec;
    DenseMap fake;
};

inline GeneratorPass generator_pass(const Prepared& p, const GeneratorParams& g) {
    GeneratorPass r;
    const auto f = encoder_forward(p.input, g, &r.enc);
    r.fake = decoder_forward_dense(f, g, &r.dec);
    return r;
}

namespace detail {

inline FeatureSet features_of(const std::vector<ScaleOutput>& out) {
    FeatureSet f;
    for (const auto& s : out) f.push_back(s.features);
    return f;
}
inline std::vector<DenseMap> logits_of(const std::vector<ScaleOutput>& out) {
    std::vector<DenseMap> l;
    for (const auto& s : out) l.push_back(s.logits);
    return l;
}

/// Runs fn(i) for i in [0, n) on up to thread_budget() threads.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(thread_budget(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline void check_finite(double v, const char* term) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite loss term: ") + term);
}

}  // namespace detail

/// Discriminator term for one sample and its parameter gradients.
inline double discriminator_gradients(const Prepared& p, const DenseMap& fake, const DiscriminatorParams& d,
                                      GanMode mode, Grads& gd) {
    DiscriminatorTrace tr_real, tr_fake;
    const auto out_real = discriminator_forward(p.condition, p.target, d, &tr_real);
    const auto out_fake = discriminator_forward(p.condition, fake, d, &tr_fake);
    std::vector<DenseMap> g_real, g_fake;
    const double loss =
        cgan_discriminator_term(detail::logits_of(out_real), detail::logits_of(out_fake), mode, &g_real, &g_fake);
    std::vector<ScaleGrad> ur, uf;
    for (std::size_t s = 0; s < g_real.size(); ++s) {
        ur.push_back({std::move(g_real[s]), {}});
        uf.push_back({std::move(g_fake[s]), {}});
    }
    discriminator_backward(d, tr_real, ur, gd);
    discriminator_backward(d, tr_fake, uf, gd);
    return loss;
}

/// Generator objective for one sample. Accumulates generator gradients
/// into `gg`; when `gd` is given, also the gradient of the same objective
/// w.r.t. the discriminator parameters (both real and fake paths).
inline LossParts generator_gradients(const Prepared& p, const GeneratorPass& pass, const GeneratorParams& g,
                                     const DiscriminatorParams& d, const LossWeights& w, GanMode mode,
                                     Grads& gg, Grads* gd = nullptr) {
    DiscriminatorTrace tr_real, tr_fake;
    const auto out_real = discriminator_forward(p.condition, p.target, d, gd ? &tr_real : nullptr);
    const auto out_fake = discriminator_forward(p.condition, pass.fake, d, &tr_fake);

    LossParts parts;
    std::vector<DenseMap> g_logits;
    parts.cgan = cgan_generator_term(detail::logits_of(out_fake), mode, &g_logits);
    FeatureSet g_feat_fake, g_feat_real;
    parts.perc = loss_perceptual(detail::features_of(out_real), detail::features_of(out_fake), &g_feat_fake,
                                 gd ? &g_feat_real : nullptr);
    std::vector<double> g_l1;
    parts.l1 = loss_l1(pass.fake.data, p.target.data, &g_l1);

    std::vector<ScaleGrad> uf;
    for (std::size_t s = 0; s < g_logits.size(); ++s) {
        ScaleGrad sg{std::move(g_logits[s]), std::move(g_feat_fake[s])};
        for (auto& f : sg.features)
            for (auto& v : f.data) v *= w.lambda_perc;
        uf.push_back(std::move(sg));
    }
    Grads scratch_d = gd ? Grads() : Grads(d.params);
    Grads& dsink = gd ? *gd : scratch_d;
    const DenseMap g_input = discriminator_backward(d, tr_fake, uf, dsink);
    if (gd) {
        std::vector<ScaleGrad> ur;
        for (std::size_t s = 0; s < g_feat_real.size(); ++s) {
            ScaleGrad sg{DenseMap(out_real[s].logits.dims, 1), std::move(g_feat_real[s])};
            for (auto& f : sg.features)
                for (auto& v : f.data) v *= w.lambda_perc;
            ur.push_back(std::move(sg));
        }
        discriminator_backward(d, tr_real, ur, *gd);
    }

    // Candidate is the last input channel of the discriminator.
    DenseMap g_fake(pass.fake.dims, 1);
    const int cand = g_input.channels - 1;
    for (std::size_t s = 0; s < g_fake.sites(); ++s)
        g_fake.data[s] = g_input.data[s * g_input.channels + cand] + w.lambda_l1 * g_l1[s];
    generator_backward(g, pass.enc, pass.dec, g_fake, gg);
    return parts;
}

struct StepReport {
    double d_loss = 0.0;
    double g_cgan = 0.0;
    double l1 = 0.0;
    double perc = 0.0;
    double g_total = 0.0;
};

struct OptimState {
    Adam gen;
    Adam disc;
};

inline OptimState make_optim_state(const GeneratorParams& g, const DiscriminatorParams& d) {
    return {Adam(g.params), Adam(d.params)};
}

/// One alternating update over a batch (losses are batch means).
inline StepReport backward_and_step(std::span<const Prepared> batch, GeneratorParams& g, DiscriminatorParams& d,
                                    const LossWeights& w, const TrainConfig& cfg, OptimState& opt) {
    if (batch.empty()) throw DataError("backward_and_step: empty batch");
    const std::size_t B = batch.size();
    StepReport rep;

    std::vector<GeneratorPass> passes(B);
    std::vector<Grads> per_d(B);
    std::vector<double> d_losses(B);
    detail::parallel_for(B, [&](std::size_t i) {
        passes[i] = generator_pass(batch[i], g);
        per_d[i] = Grads(d.params);
        d_losses[i] = discriminator_gradients(batch[i], passes[i].fake, d, cfg.gan_mode, per_d[i]);
    });
    Grads gd(d.params);
    for (std::size_t i = 0; i < B; ++i) {
        gd.add(per_d[i]);
        rep.d_loss += d_losses[i];
    }
    rep.d_loss /= static_cast<double>(B);
    detail::check_finite(rep.d_loss, "discriminator cGAN");
    gd.scale(1.0 / static_cast<double>(B));
    opt.disc.step(d.params, gd, cfg.adam());

    std::vector<Grads> per_g(B);
    std::vector<LossParts> parts(B);
    detail::parallel_for(B, [&](std::size_t i) {
        per_g[i] = Grads(g.params);
        parts[i] = generator_gradients(batch[i], passes[i], g, d, w, cfg.gan_mode, per_g[i]);
    });
    Grads gg(g.params);
    for (std::size_t i = 0; i < B; ++i) {
        gg.add(per_g[i]);
        rep.g_cgan += parts[i].cgan;
        rep.l1 += parts[i].l1;
        rep.perc += parts[i].perc;
    }
    rep.g_cgan /= static_cast<double>(B);
    rep.l1 /= static_cast<double>(B);
    rep.perc /= static_cast<double>(B);
    detail::check_finite(rep.g_cgan, "generator cGAN");
    detail::check_finite(rep.l1, "L1");
    detail::check_finite(rep.perc, "perceptual");
    rep.g_total = loss_total({rep.g_cgan, rep.l1, rep.perc}, w);
    detail::check_finite(rep.g_total, "total");
    gg.scale(1.0 / static_cast<double>(B));
    opt.gen.step(g.params, gg, cfg.adam());
    return rep;
}

/// Epoch loop over a prepared dataset; the sample order is reshuffled
/// every epoch from `cfg.seed`. `on_step` sees every report as it lands.
inline std::vector<StepReport> train(std::span<const Prepared> data, GeneratorParams& g, DiscriminatorParams& d,
                                     const LossWeights& w, const TrainConfig& cfg,
                                     const std::function<void(long, const StepReport&)>& on_step = {}) {
    cfg.validate();
    w.validate();
    if (data.empty()) throw DataError("train: empty dataset");
    OptimState opt = make_optim_state(g, d);
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::vector<StepReport> log;
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        // Fisher-Yates with explicit draws: std::shuffle's draw pattern is
        // library-specific.
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            if (cfg.max_steps > 0 && step >= cfg.max_steps) return log;
            std::vector<Prepared> batch;
            for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i)
                batch.push_back(data[order[i]]);
            log.push_back(backward_and_step(batch, g, d, w, cfg, opt));
            if (on_step) on_step(step, log.back());
            ++step;
        }
    }
    return log;
}

}  // namespace p2t::model

#endif  // P2T_MODEL_TRAINER_HPP
