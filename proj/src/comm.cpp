#include "ksddpg/comm.hpp"

#include <cmath>

#include "ksddpg/errors.hpp"

namespace ksddpg {

std::vector<std::pair<std::string, Matrix*>> CommParams::entries() {
    return {
        {"embed.w", &embed.weight}, {"embed.b", &embed.bias},
        {"obtain.w_mz", &w_mz},     {"obtain.w_kz", &w_kz},   {"obtain.b_z", &b_z},
        {"obtain.w_ml", &w_ml},     {"obtain.w_kl", &w_kl},   {"obtain.b_l", &b_l},
        {"obtain.w_mk", &w_mk},     {"obtain.w_kk", &w_kk},   {"obtain.b_k", &b_k},
        {"update.w_mq", &w_mq},     {"update.w_kq", &w_kq},   {"update.b_q", &b_q},
        {"update.w_mp", &w_mp},     {"update.w_kp", &w_kp},   {"update.b_p", &b_p},
        {"update.w_mkh", &w_mkh},   {"update.w_kkh", &w_kkh}, {"update.b_kh", &b_kh},
    };
}

std::vector<std::pair<std::string, const Matrix*>> CommParams::entries() const {
    std::vector<std::pair<std::string, const Matrix*>> out;
    for (auto& [name, m] : const_cast<CommParams*>(this)->entries()) out.emplace_back(name, m);
    return out;
}

CommParams glorot_comm(std::size_t obs_dim, std::size_t embed_dim, std::size_t knowledge_dim,
                       Rng& rng) {
    CommParams p;
    p.embed = glorot_dense(obs_dim, embed_dim, rng);
    auto mk = [&](std::size_t in) { return glorot_dense(in, knowledge_dim, rng).weight; };
    p.w_mz = mk(embed_dim); p.w_kz = mk(knowledge_dim); p.b_z = Matrix(1, knowledge_dim);
    p.w_ml = mk(embed_dim); p.w_kl = mk(knowledge_dim); p.b_l = Matrix(1, knowledge_dim);
    p.w_mk = mk(embed_dim); p.w_kk = mk(knowledge_dim); p.b_k = Matrix(1, knowledge_dim);
    p.w_mq = mk(embed_dim); p.w_kq = mk(knowledge_dim); p.b_q = Matrix(1, knowledge_dim);
    p.w_mp = mk(embed_dim); p.w_kp = mk(knowledge_dim); p.b_p = Matrix(1, knowledge_dim);
    p.w_mkh = mk(embed_dim); p.w_kkh = mk(knowledge_dim); p.b_kh = Matrix(1, knowledge_dim);
    return p;
}

CommParams zeros_like(const CommParams& like) {
    CommParams z;
    z.embed = {Matrix(like.embed.weight.rows(), like.embed.weight.cols()),
               Matrix(1, like.embed.bias.cols())};
    auto zero = [](const Matrix& m) { return Matrix(m.rows(), m.cols()); };
    z.w_mz = zero(like.w_mz); z.w_kz = zero(like.w_kz); z.b_z = zero(like.b_z);
    z.w_ml = zero(like.w_ml); z.w_kl = zero(like.w_kl); z.b_l = zero(like.b_l);
    z.w_mk = zero(like.w_mk); z.w_kk = zero(like.w_kk); z.b_k = zero(like.b_k);
    z.w_mq = zero(like.w_mq); z.w_kq = zero(like.w_kq); z.b_q = zero(like.b_q);
    z.w_mp = zero(like.w_mp); z.w_kp = zero(like.w_kp); z.b_p = zero(like.b_p);
    z.w_mkh = zero(like.w_mkh); z.w_kkh = zero(like.w_kkh); z.b_kh = zero(like.b_kh);
    return z;
}

Matrix embed_forward(const Matrix& obs, const CommParams& p, DenseCache* cache) {
    require_finite(obs, "embed");
    return dense_forward(obs, p.embed, Activation::Relu, cache);
}

namespace {

struct GateWeights {
    const Matrix &wm_u, &wk_u, &b_u;  // update gate
    const Matrix &wm_r, &wk_r, &b_r;  // reset gate
    const Matrix &wm_c, &wk_c, &b_c;  // candidate
};

struct GateGrads {
    Matrix &wm_u, &wk_u, &b_u;
    Matrix &wm_r, &wk_r, &b_r;
    Matrix &wm_c, &wk_c, &b_c;
};

Matrix sigmoid_vec(Matrix z) {
    for (std::size_t i = 0; i < z.size(); ++i) z.at(i) = 1.0 / (1.0 + std::exp(-z.at(i)));
    return z;
}

Matrix tanh_vec(Matrix z) {
    for (std::size_t i = 0; i < z.size(); ++i) z.at(i) = std::tanh(z.at(i));
    return z;
}

Matrix gated_forward(const Matrix& m_enc, const Matrix& k, const GateWeights& w,
                     GateCache* cache, const char* where) {
    if (m_enc.rows() != 1 || m_enc.cols() != w.wm_u.rows()) {
        throw DimensionError(std::string(where) + ": embedding " + m_enc.shape_str() +
                             " vs weight " + w.wm_u.shape_str());
    }
    if (k.rows() != 1 || k.cols() != w.wk_u.rows()) {
        throw DimensionError(std::string(where) + ": knowledge " + k.shape_str() + " vs weight " +
                             w.wk_u.shape_str());
    }
    Matrix update_gate = sigmoid_vec(matmul(m_enc, w.wm_u) + matmul(k, w.wk_u) + w.b_u);
    Matrix reset_gate = sigmoid_vec(matmul(m_enc, w.wm_r) + matmul(k, w.wk_r) + w.b_r);
    Matrix k_proj = matmul(k, w.wk_c);
    Matrix candidate =
        tanh_vec(matmul(m_enc, w.wm_c) + hadamard(reset_gate, k_proj) + w.b_c);
    Matrix out(1, k.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.at(i) = update_gate.at(i) * k.at(i) + (1.0 - update_gate.at(i)) * candidate.at(i);
    }
    if (cache) {
        cache->m_enc = m_enc;
        cache->k = k;
        cache->update_gate = std::move(update_gate);
        cache->reset_gate = std::move(reset_gate);
        cache->k_proj = std::move(k_proj);
        cache->candidate = std::move(candidate);
        cache->valid = true;
    }
    require_finite(out, where);
    return out;
}

std::pair<Matrix, Matrix> gated_backward(const Matrix& grad_out, GateCache& cache,
                                         const GateWeights& w, GateGrads& g,
                                         const char* where) {
    if (!cache.valid) {
        throw UsageError(std::string(where) + "_backward: cache missing or already consumed");
    }
    if (!grad_out.same_shape(cache.k)) {
        throw DimensionError(std::string(where) + "_backward: grad " + grad_out.shape_str() +
                             " vs knowledge " + cache.k.shape_str());
    }
    cache.valid = false;
    const Matrix& u = cache.update_gate;
    const Matrix& r = cache.reset_gate;
    const Matrix& cand = cache.candidate;
    const std::size_t K = cache.k.cols();

    // out = u (*) k + (1-u) (*) cand
    Matrix grad_u(1, K), grad_cand(1, K), grad_k(1, K);
    for (std::size_t i = 0; i < K; ++i) {
        grad_u.at(i) = grad_out.at(i) * (cache.k.at(i) - cand.at(i));
        grad_cand.at(i) = grad_out.at(i) * (1.0 - u.at(i));
        grad_k.at(i) = grad_out.at(i) * u.at(i);
    }

    // candidate = tanh(m W_c + r (*) (k W_c') + b_c)
    Matrix grad_pre_c(1, K), grad_r(1, K), grad_kproj(1, K);
    for (std::size_t i = 0; i < K; ++i) {
        grad_pre_c.at(i) = grad_cand.at(i) * (1.0 - cand.at(i) * cand.at(i));
        grad_r.at(i) = grad_pre_c.at(i) * cache.k_proj.at(i);
        grad_kproj.at(i) = grad_pre_c.at(i) * r.at(i);
    }
    Matrix grad_m = matmul(grad_pre_c, transpose(w.wm_c));
    add_in_place(g.wm_c, matmul(transpose(cache.m_enc), grad_pre_c));
    add_in_place(g.b_c, grad_pre_c);
    add_in_place(grad_k, matmul(grad_kproj, transpose(w.wk_c)));
    add_in_place(g.wk_c, matmul(transpose(cache.k), grad_kproj));

    // gates: sigma'(x) = s(1-s)
    Matrix grad_pre_u(1, K), grad_pre_r(1, K);
    for (std::size_t i = 0; i < K; ++i) {
        grad_pre_u.at(i) = grad_u.at(i) * u.at(i) * (1.0 - u.at(i));
        grad_pre_r.at(i) = grad_r.at(i) * r.at(i) * (1.0 - r.at(i));
    }
    add_in_place(grad_m, matmul(grad_pre_u, transpose(w.wm_u)));
    add_in_place(g.wm_u, matmul(transpose(cache.m_enc), grad_pre_u));
    add_in_place(g.b_u, grad_pre_u);
    add_in_place(grad_k, matmul(grad_pre_u, transpose(w.wk_u)));
    add_in_place(g.wk_u, matmul(transpose(cache.k), grad_pre_u));

    add_in_place(grad_m, matmul(grad_pre_r, transpose(w.wm_r)));
    add_in_place(g.wm_r, matmul(transpose(cache.m_enc), grad_pre_r));
    add_in_place(g.b_r, grad_pre_r);
    add_in_place(grad_k, matmul(grad_pre_r, transpose(w.wk_r)));
    add_in_place(g.wk_r, matmul(transpose(cache.k), grad_pre_r));

    return {std::move(grad_m), std::move(grad_k)};
}

} // namespace

Matrix obtain_forward(const Matrix& m_enc, const Matrix& k, const CommParams& p,
                      GateCache* cache) {
    const GateWeights w{p.w_mz, p.w_kz, p.b_z, p.w_ml, p.w_kl, p.b_l, p.w_mk, p.w_kk, p.b_k};
    return gated_forward(m_enc, k, w, cache, "obtain_knowledge");
}

Matrix update_forward(const Matrix& m_enc, const Matrix& k, const CommParams& p,
                      GateCache* cache) {
    const GateWeights w{p.w_mq, p.w_kq, p.b_q, p.w_mp, p.w_kp, p.b_p, p.w_mkh, p.w_kkh, p.b_kh};
    return gated_forward(m_enc, k, w, cache, "update_knowledge");
}

std::pair<Matrix, Matrix> obtain_backward(const Matrix& grad_r, GateCache& cache,
                                          const CommParams& p, CommParams& grads) {
    const GateWeights w{p.w_mz, p.w_kz, p.b_z, p.w_ml, p.w_kl, p.b_l, p.w_mk, p.w_kk, p.b_k};
    GateGrads g{grads.w_mz, grads.w_kz, grads.b_z, grads.w_ml, grads.w_kl, grads.b_l,
                grads.w_mk, grads.w_kk, grads.b_k};
    return gated_backward(grad_r, cache, w, g, "obtain_knowledge");
}

std::pair<Matrix, Matrix> update_backward(const Matrix& grad_kv, GateCache& cache,
                                          const CommParams& p, CommParams& grads) {
    const GateWeights w{p.w_mq, p.w_kq, p.b_q, p.w_mp, p.w_kp, p.b_p, p.w_mkh, p.w_kkh, p.b_kh};
    GateGrads g{grads.w_mq, grads.w_kq, grads.b_q, grads.w_mp, grads.w_kp, grads.b_p,
                grads.w_mkh, grads.w_kkh, grads.b_kh};
    return gated_backward(grad_kv, cache, w, g, "update_knowledge");
}

} // namespace ksddpg
