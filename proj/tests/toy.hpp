// SPDX-License-Identifier: Apache-2.0
//
// Small fixtures shared by the unit and acceptance tests: a 4x4x4 toy ROI,
// random sparse inputs, the forward-only training objective and a central
// finite-difference gradient checker.

#ifndef P2T_TESTS_TOY_HPP
#define P2T_TESTS_TOY_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "p2t/model/trainer.hpp"

namespace toy {

using namespace p2t;
using namespace p2t::model;

inline RoiGrid roi(double extent = 4.0) {
    RoiGrid g;
    g.x_min = 0.0;
    g.x_max = extent;
    g.y_min = -extent / 2;
    g.y_max = extent / 2;
    g.z_min = 0.0;
    g.z_max = extent;
    g.voxel_size = 1.0;
    return g;
}

/// `n` distinct random voxels with features inside their voxel.
inline SparseVoxelGrid sparse_grid(std::mt19937_64& rng, const RoiGrid& g, int n) {
    const Index3 d = g.dims();
    std::uniform_int_distribution<int> ux(0, d[0] - 1), uy(0, d[1] - 1), uz(0, d[2] - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::set<std::size_t> seen;
    SparseVoxelGrid out;
    out.dims = d;
    n = std::min<int>(n, static_cast<int>(volume(d)));
    while (static_cast<int>(seen.size()) < n) {
        const Index3 i{ux(rng), uy(rng), uz(rng)};
        if (!seen.insert(flat_index(d, i)).second) continue;
        const Cartesian c = g.center(i[0], i[1], i[2]);
        Voxel v;
        v.index = i;
        v.features = {c.x + (u(rng) - 0.5) * g.voxel_size, c.y + (u(rng) - 0.5) * g.voxel_size,
                      c.z + (u(rng) - 0.5) * g.voxel_size, 0.1 + u(rng)};
        out.voxels.push_back(v);
    }
    std::sort(out.voxels.begin(), out.voxels.end(),
              [&](const Voxel& a, const Voxel& b) { return flat_index(d, a.index) < flat_index(d, b.index); });
    return out;
}

/// Random sparse map with `cin` channels over `dims`.
inline SparseMap sparse_map(std::mt19937_64& rng, Index3 dims, int cin, double density) {
    std::uniform_real_distribution<double> u(-1.0, 1.0), p(0.0, 1.0);
    SparseMap m;
    m.dims = dims;
    m.channels = cin;
    for (int x = 0; x < dims[0]; ++x)
        for (int y = 0; y < dims[1]; ++y)
            for (int z = 0; z < dims[2]; ++z) {
                if (p(rng) >= density) continue;
                m.sites.push_back({x, y, z});
                for (int c = 0; c < cin; ++c) m.features.push_back(u(rng));
            }
    return m;
}

inline std::vector<double> uniform(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

inline CubeTensor target(std::mt19937_64& rng, const RoiGrid& g) {
    CubeTensor c;
    c.power = Array3(g.dims());
    c.power.data = uniform(rng, c.power.size(), 0.0, 1.0);
    c.normalized = true;
    return c;
}

/// Forward-only generator objective cGAN + l1 * L1 + perc * Lperc.
inline double objective(const Prepared& p, const GeneratorParams& g, const DiscriminatorParams& d,
                        const LossWeights& w, GanMode mode) {
    const GeneratorPass pass = generator_pass(p, g);
    const auto real = discriminator_forward(p.condition, p.target, d);
    const auto fake = discriminator_forward(p.condition, pass.fake, d);
    LossParts parts;
    parts.cgan = cgan_generator_term(model::detail::logits_of(fake), mode);
    parts.l1 = loss_l1(pass.fake.data, p.target.data);
    parts.perc = loss_perceptual(model::detail::features_of(real), model::detail::features_of(fake));
    return loss_total(parts, w);
}

/// Forward-only discriminator term.
inline double disc_objective(const Prepared& p, const DenseMap& fake, const DiscriminatorParams& d, GanMode mode) {
    const auto real = discriminator_forward(p.condition, p.target, d);
    const auto f = discriminator_forward(p.condition, fake, d);
    return cgan_discriminator_term(model::detail::logits_of(real), model::detail::logits_of(f), mode);
}

struct FdReport {
    std::size_t checked = 0;
    std::size_t failed = 0;
    double worst_rel = 0.0;
    std::string worst_name;
};

/// Central differences over every scalar of `store`, compared against
/// `analytic`. A gradient passes when its relative error is below `rel` or
/// its absolute error is below `abs_floor` (for gradients near zero).
inline FdReport fd_check(ParamStore& store, const Grads& analytic, const std::function<double()>& f,
                         double h = 1e-4, double rel = 1e-3, double abs_floor = 1e-7) {
    FdReport r;
    for (std::size_t t = 0; t < store.tensors().size(); ++t) {
        auto& vals = store.tensors()[t].value;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double keep = vals[i];
            vals[i] = keep + h;
            const double fp = f();
            vals[i] = keep - h;
            const double fm = f();
            vals[i] = keep;
            const double num = (fp - fm) / (2.0 * h);
            const double ana = analytic.g[t][i];
            const double err = std::abs(num - ana);
            const double scale = std::max(std::abs(num), std::abs(ana));
            const double re = scale > 0.0 ? err / scale : 0.0;
            ++r.checked;
            const bool ok = re < rel || err < abs_floor;
            if (!ok) ++r.failed;
            if (!ok && re > r.worst_rel) {
                r.worst_rel = re;
                r.worst_name = store.tensors()[t].name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return r;
}

/// 2-stage generator and 2-scale discriminator on the 4^3 toy ROI.
struct ToyModel {
    GeneratorParams g;
    DiscriminatorParams d;
    Prepared sample;
};

inline ToyModel toy_model(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const RoiGrid r = roi();
    ToyModel m;
    m.g = GeneratorParams::create(GeneratorArch{{2, 3}}, r, seed);
    m.d = DiscriminatorParams::create(DiscriminatorArch{2, 2, 2}, kInputChannels + 1, seed + 1);
    Sample s{sparse_grid(rng, r, 12), target(rng, r)};
    m.sample = prepare(s, m.g);
    return m;
}

struct GradCheck {
    FdReport generator;     // objective w.r.t. generator parameters
    FdReport disc_obj;      // objective w.r.t. discriminator parameters
    FdReport disc_term;     // discriminator term w.r.t. discriminator parameters
};

inline GradCheck check_gradients(std::uint64_t seed, GanMode mode = GanMode::log) {
    ToyModel m = toy_model(seed);
    const LossWeights w;
    Grads gg(m.g.params), gd(m.d.params), gdd(m.d.params);
    const GeneratorPass pass = generator_pass(m.sample, m.g);
    generator_gradients(m.sample, pass, m.g, m.d, w, mode, gg, &gd);
    discriminator_gradients(m.sample, pass.fake, m.d, mode, gdd);
    GradCheck c;
    auto obj = [&] { return objective(m.sample, m.g, m.d, w, mode); };
    c.generator = fd_check(m.g.params, gg, obj);
    c.disc_obj = fd_check(m.d.params, gd, obj);
    c.disc_term = fd_check(m.d.params, gdd, [&] { return disc_objective(m.sample, pass.fake, m.d, mode); });
    return c;
}

}  // namespace toy

#endif  // P2T_TESTS_TOY_HPP
