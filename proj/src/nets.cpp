#include "ksddpg/nets.hpp"

#include <cmath>

#include "ksddpg/errors.hpp"

namespace ksddpg {

Mlp Mlp::glorot(const std::vector<std::size_t>& dims, std::vector<Activation> acts, Rng& rng) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1) {
        throw ConfigError("mlp: need n+1 dims for n activations");
    }
    Mlp m;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        m.layers.push_back(glorot_dense(dims[i], dims[i + 1], rng));
    }
    m.acts = std::move(acts);
    return m;
}

Matrix Mlp::forward(const Matrix& x, std::vector<DenseCache>* caches) const {
    if (caches) caches->assign(layers.size(), {});
    Matrix h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = dense_forward(h, layers[i], acts[i], caches ? &(*caches)[i] : nullptr);
    }
    return h;
}

Matrix Mlp::backward(const Matrix& grad_out, std::vector<DenseCache>& caches, Mlp& grads) const {
    if (caches.size() != layers.size()) {
        throw UsageError("mlp backward: cache/layer count mismatch");
    }
    Matrix g = grad_out;
    for (std::size_t i = layers.size(); i-- > 0;) {
        DenseGrads dg = dense_backward(g, caches[i], layers[i]);
        add_in_place(grads.layers[i].weight, dg.weight);
        add_in_place(grads.layers[i].bias, dg.bias);
        g = std::move(dg.input);
    }
    return g;
}

std::vector<std::pair<std::string, Matrix*>> Mlp::entries(const std::string& prefix) {
    std::vector<std::pair<std::string, Matrix*>> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        out.emplace_back(prefix + ".l" + std::to_string(i) + ".w", &layers[i].weight);
        out.emplace_back(prefix + ".l" + std::to_string(i) + ".b", &layers[i].bias);
    }
    return out;
}

std::vector<std::pair<std::string, const Matrix*>> Mlp::entries(const std::string& prefix) const {
    std::vector<std::pair<std::string, const Matrix*>> out;
    for (auto& [name, m] : const_cast<Mlp*>(this)->entries(prefix)) out.emplace_back(name, m);
    return out;
}

Mlp zeros_like(const Mlp& like) {
    Mlp z;
    z.acts = like.acts;
    for (const DenseParams& l : like.layers) {
        z.layers.push_back({Matrix(l.weight.rows(), l.weight.cols()), Matrix(1, l.bias.cols())});
    }
    return z;
}

void AdamSet::init(const std::vector<std::pair<std::string, Matrix*>>& params, double lr) {
    states.clear();
    for (auto& [name, m] : params) {
        states.push_back(make_adam(m->rows(), m->cols(), lr));
    }
}

void AdamSet::step(const std::vector<std::pair<std::string, Matrix*>>& params,
                   const std::vector<std::pair<std::string, Matrix*>>& grads) {
    if (params.size() != grads.size() || params.size() != states.size()) {
        throw UsageError("adam set: entry count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        adam_step(*params[i].second, *grads[i].second, states[i]);
    }
}

void soft_update_all(const std::vector<std::pair<std::string, Matrix*>>& target,
                     const std::vector<std::pair<std::string, const Matrix*>>& source,
                     double tau) {
    if (target.size() != source.size()) {
        throw UsageError("soft_update_all: entry count mismatch");
    }
    for (std::size_t i = 0; i < target.size(); ++i) {
        soft_update(*target[i].second, *source[i].second, tau);
    }
}

Matrix softmax_row(const Matrix& logits) {
    Matrix p = logits;
    double best = -1e300;
    for (double v : p.values()) best = std::max(best, v);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p.at(i) = std::exp(p.at(i) - best);
        sum += p.at(i);
    }
    scale_in_place(p, 1.0 / sum);
    return p;
}

Matrix softmax_backward(const Matrix& grad_probs, const Matrix& probs) {
    require_same_shape(grad_probs, probs, "softmax_backward");
    double dot = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) dot += grad_probs.at(i) * probs.at(i);
    Matrix g = probs;
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.at(i) = probs.at(i) * (grad_probs.at(i) - dot);
    }
    return g;
}

int argmax_row(const Matrix& row) {
    int best = 0;
    for (std::size_t i = 1; i < row.size(); ++i) {
        if (row.at(i) > row.at(best)) best = static_cast<int>(i);
    }
    return best;
}

} // namespace ksddpg
