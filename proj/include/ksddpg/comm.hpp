#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ksddpg/dense.hpp"
#include "ksddpg/matrix.hpp"

namespace ksddpg {

/// The shared knowledge vector k in R^{1xK}. One container per experiment;
/// agents access it strictly sequentially within a tick and it resets to
/// zeros at every episode start.
struct KnowledgeContainer {
    Matrix k;

    explicit KnowledgeContainer(std::size_t capacity) : k(1, capacity) {}
    std::size_t capacity() const { return k.cols(); }
    void reset() { k.fill(0.0); }
};

/// Agent-specific communication parameters: the observation embedding plus
/// two GRU-style gate blocks. Obtaining reads the container (update gate z,
/// reset gate l, candidate r~); updating writes it back (gates q and p,
/// candidate k^). Every matrix is learnable and private to its agent.
struct CommParams {
    DenseParams embed;  // obs -> m, ReLU

    Matrix w_mz, w_kz, b_z;  // obtain update gate
    Matrix w_ml, w_kl, b_l;  // obtain reset gate
    Matrix w_mk, w_kk, b_k;  // obtain candidate

    Matrix w_mq, w_kq, b_q;     // update-phase update gate
    Matrix w_mp, w_kp, b_p;     // update-phase reset gate
    Matrix w_mkh, w_kkh, b_kh;  // update-phase candidate

    std::size_t obs_dim() const { return embed.in_dim(); }
    std::size_t embed_dim() const { return embed.out_dim(); }
    std::size_t knowledge_dim() const { return b_z.cols(); }

    /// Stable (name, matrix) listing for optimizers, targets and checkpoints.
    std::vector<std::pair<std::string, Matrix*>> entries();
    std::vector<std::pair<std::string, const Matrix*>> entries() const;
};

CommParams glorot_comm(std::size_t obs_dim, std::size_t embed_dim, std::size_t knowledge_dim,
                       Rng& rng);
/// Zero-shaped gradients (or parameters) matching `like`.
CommParams zeros_like(const CommParams& like);

/// Forward state of one gated block; consumed by the matching backward call.
struct GateCache {
    Matrix m_enc, k;
    Matrix update_gate, reset_gate;
    Matrix k_proj;     // k * W_k(candidate)
    Matrix candidate;  // tanh output
    bool valid = false;
};

/// M_enc = ReLU(o * W_oM + b_M)
Matrix embed_forward(const Matrix& obs, const CommParams& p, DenseCache* cache = nullptr);

/// r = z (*) k + (1-z) (*) tanh(M W_mk + l (*) (k W_kk) + b_k)
Matrix obtain_forward(const Matrix& m_enc, const Matrix& k, const CommParams& p,
                      GateCache* cache = nullptr);

/// kv = q (*) k + (1-q) (*) tanh(M W_mkh + p (*) (k W_kkh) + b_kh).
/// The caller stores the result back into the container.
Matrix update_forward(const Matrix& m_enc, const Matrix& k, const CommParams& p,
                      GateCache* cache = nullptr);

/// Exact chain-rule gradients through one gated block. Accumulates the nine
/// weight gradients into `grads` and returns (grad_m_enc, grad_k).
std::pair<Matrix, Matrix> obtain_backward(const Matrix& grad_r, GateCache& cache,
                                          const CommParams& p, CommParams& grads);
std::pair<Matrix, Matrix> update_backward(const Matrix& grad_kv, GateCache& cache,
                                          const CommParams& p, CommParams& grads);

} // namespace ksddpg
