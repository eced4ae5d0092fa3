// SPDX-License-Identifier: Apache-2.0
//
// Named parameter storage, gradient buffers and the Adam optimizer.

#ifndef P2T_MODEL_PARAMS_HPP
#define P2T_MODEL_PARAMS_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "p2t/common.hpp"

namespace p2t::model {

struct ParamTensor {
    std::string name;
    std::vector<double> value;
};

class ParamStore {
public:
    /// Registers a tensor initialised uniformly in +-bound; returns its slot.
    int add(std::string name, std::size_t size, double bound, std::mt19937_64& rng) {
        std::uniform_real_distribution<double> u(-bound, bound);
        ParamTensor t{std::move(name), std::vector<double>(size)};
        for (auto& v : t.value) v = u(rng);
        tensors_.push_back(std::move(t));
        return static_cast<int>(tensors_.size()) - 1;
    }

    std::span<double> operator[](int slot) { return tensors_[slot].value; }
    std::span<const double> operator[](int slot) const { return tensors_[slot].value; }

    std::vector<ParamTensor>& tensors() { return tensors_; }
    const std::vector<ParamTensor>& tensors() const { return tensors_; }
    std::size_t count() const {
        std::size_t n = 0;
        for (const auto& t : tensors_) n += t.value.size();
        return n;
    }

    bool operator==(const ParamStore& o) const {
        if (tensors_.size() != o.tensors_.size()) return false;
        for (std::size_t i = 0; i < tensors_.size(); ++i)
            if (tensors_[i].name != o.tensors_[i].name || tensors_[i].value != o.tensors_[i].value) return false;
        return true;
    }

private:
    std::vector<ParamTensor> tensors_;
};

/// Gradient buffers shaped like a ParamStore.
struct Grads {
    std::vector<std::vector<double>> g;

    Grads() = default;
    explicit Grads(const ParamStore& p) {
        g.reserve(p.tensors().size());
        for (const auto& t : p.tensors()) g.emplace_back(t.value.size(), 0.0);
    }
    std::span<double> operator[](int slot) { return g[slot]; }

    void add(const Grads& o) {
        for (std::size_t i = 0; i < g.size(); ++i)
            for (std::size_t j = 0; j < g[i].size(); ++j) g[i][j] += o.g[i][j];
    }
    void scale(double s) {
        for (auto& t : g)
            for (auto& v : t) v *= s;
    }
};

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Adam {
public:
    Adam() = default;
    explicit Adam(const ParamStore& p) : m_(p), v_(p) {}

    void step(ParamStore& p, const Grads& grads, const AdamConfig& cfg) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < grads.g.size(); ++i) {
            auto& value = p.tensors()[i].value;
            auto& m = m_.g[i];
            auto& v = v_.g[i];
            const auto& g = grads.g[i];
            for (std::size_t j = 0; j < g.size(); ++j) {
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
                const double mhat = m[j] / bc1, vhat = v[j] / bc2;
                value[j] -= cfg.learning_rate * (mhat / (std::sqrt(vhat) + cfg.epsilon));
            }
        }
    }
    std::int64_t steps() const { return t_; }

private:
    Grads m_, v_;
    std::int64_t t_ = 0;
};

}  // namespace p2t::model

#endif  // P2T_MODEL_PARAMS_HPP
