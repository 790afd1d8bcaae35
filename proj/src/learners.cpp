#include "ksddpg/learners.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <utility>
#include <numeric>
#include <thread>

#include "ksddpg/errors.hpp"

namespace ksddpg {

double critic_target(double reward, double gamma, double q_next, bool done) {
    return done ? reward : reward + gamma * q_next;
}

double critic_loss(const std::vector<double>& targets, const std::vector<double>& predictions) {
    if (targets.empty() || targets.size() != predictions.size()) {
        throw UsageError("critic_loss: empty or mismatched batch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double e = targets[i] - predictions[i];
        s += e * e;
    }
    return s / static_cast<double>(targets.size());
}

int worker_threads() {
    const char* env = std::getenv("KSDDPG_THREADS");
    if (!env) return 1;
    const int n = std::atoi(env);
    return std::max(1, n);
}

namespace {

/// Deterministic fan-out: fixed chunk boundaries, per-chunk accumulators
/// reduced in chunk order by the caller.
void run_chunked(std::size_t n, int chunks,
                 const std::function<void(int, std::size_t, std::size_t)>& fn) {
    if (chunks <= 1 || n < 2) {
        fn(0, 0, n);
        return;
    }
    std::vector<std::thread> pool;
    for (int c = 0; c < chunks; ++c) {
        const std::size_t b = n * c / chunks;
        const std::size_t e = n * (c + 1) / chunks;
        pool.emplace_back(fn, c, b, e);
    }
    for (auto& t : pool) t.join();
}

int chunk_count(std::size_t n) {
    return static_cast<int>(std::min<std::size_t>(worker_threads(), std::max<std::size_t>(1, n)));
}

Matrix critic_input(const std::vector<Matrix>& obs, const std::vector<const Matrix*>& acts) {
    std::vector<const Matrix*> parts;
    parts.reserve(obs.size() + acts.size());
    for (const Matrix& o : obs) parts.push_back(&o);
    for (const Matrix* a : acts) parts.push_back(a);
    return concat_rows(parts);
}

std::vector<const Matrix*> stored_actions(const Transition& tr) {
    std::vector<const Matrix*> acts;
    acts.reserve(tr.action_vec.size());
    for (const Matrix& a : tr.action_vec) acts.push_back(&a);
    return acts;
}

void add_entries(std::vector<std::pair<std::string, Matrix*>> into,
                 std::vector<std::pair<std::string, Matrix*>> from) {
    for (std::size_t i = 0; i < into.size(); ++i) add_in_place(*into[i].second, *from[i].second);
}

double entries_norm_sq(std::vector<std::pair<std::string, Matrix*>> entries) {
    double s = 0.0;
    for (auto& [name, m] : entries) s += l2_norm_sq(*m);
    return s;
}

void negate_entries(std::vector<std::pair<std::string, Matrix*>> entries) {
    for (auto& [name, m] : entries) scale_in_place(*m, -1.0);
}

NamedMatrices copy_entries(const std::vector<std::pair<std::string, const Matrix*>>& entries) {
    NamedMatrices out;
    out.reserve(entries.size());
    for (auto& [name, m] : entries) out.emplace_back(name, *m);
    return out;
}

void load_entries(std::vector<std::pair<std::string, Matrix*>> into, const NamedMatrices& from) {
    for (auto& [name, m] : into) {
        const Matrix* src = nullptr;
        for (const auto& [n, mm] : from) {
            if (n == name) src = &mm;
        }
        if (!src) throw VersionError("checkpoint: missing parameter '" + name + "'");
        if (!src->same_shape(*m)) {
            throw VersionError("checkpoint: parameter '" + name + "' has shape " +
                               src->shape_str() + ", expected " + m->shape_str());
        }
        *m = *src;
    }
}

} // namespace

// --- KsActor ---------------------------------------------------------------

std::vector<std::pair<std::string, Matrix*>> KsActor::entries(const std::string& prefix) {
    std::vector<std::pair<std::string, Matrix*>> out;
    for (auto& [name, m] : comm.entries()) out.emplace_back(prefix + ".comm." + name, m);
    for (auto& [name, m] : head.entries(prefix + ".head")) out.emplace_back(name, m);
    return out;
}

std::vector<std::pair<std::string, const Matrix*>> KsActor::entries(
    const std::string& prefix) const {
    std::vector<std::pair<std::string, const Matrix*>> out;
    for (auto& [name, m] : const_cast<KsActor*>(this)->entries(prefix)) out.emplace_back(name, m);
    return out;
}

KsActor glorot_ks_actor(std::size_t obs_dim, std::size_t embed_dim, std::size_t knowledge_dim,
                        std::size_t hidden, std::size_t actions, Rng& rng) {
    KsActor a;
    a.comm = glorot_comm(obs_dim, embed_dim, knowledge_dim, rng);
    a.head = Mlp::glorot({embed_dim + 2 * knowledge_dim, hidden, actions},
                         {Activation::Relu, Activation::Identity}, rng);
    return a;
}

KsActor zeros_like(const KsActor& like) {
    KsActor z;
    z.comm = zeros_like(like.comm);
    z.head = zeros_like(like.head);
    return z;
}

Matrix ks_actor_logits(const KsActor& a, const Matrix& obs, const Matrix& k,
                       KsActorCache* cache) {
    KsActorCache local;
    KsActorCache& c = cache ? *cache : local;
    c.m_enc = embed_forward(obs, a.comm, &c.embed);
    c.r = obtain_forward(c.m_enc, k, a.comm, &c.obtain);
    c.kv = update_forward(c.m_enc, k, a.comm, &c.update);
    const Matrix in = concat_rows({&c.m_enc, &c.r, &c.kv});
    return a.head.forward(in, &c.head);
}

void ks_actor_backward(const KsActor& a, const Matrix& grad_logits, KsActorCache& cache,
                       KsActor& grads) {
    const std::size_t m = a.comm.embed_dim();
    const std::size_t K = a.comm.knowledge_dim();
    Matrix grad_in = a.head.backward(grad_logits, cache.head, grads.head);
    Matrix grad_m = slice_row(grad_in, 0, m);
    Matrix grad_r = slice_row(grad_in, m, K);
    Matrix grad_kv = slice_row(grad_in, m + K, K);
    auto [gm1, gk1] = obtain_backward(grad_r, cache.obtain, a.comm, grads.comm);
    auto [gm2, gk2] = update_backward(grad_kv, cache.update, a.comm, grads.comm);
    add_in_place(grad_m, gm1);
    add_in_place(grad_m, gm2);
    DenseGrads eg = dense_backward(grad_m, cache.embed, a.comm.embed);
    add_in_place(grads.comm.embed.weight, eg.weight);
    add_in_place(grads.comm.embed.bias, eg.bias);
    // gk1/gk2 intentionally dropped: knowledge gradients are truncated across ticks
}

// --- Learner base ----------------------------------------------------------

Learner::Learner(std::vector<AgentSpec> agents, LearnerHyper hyper)
    : agents_(std::move(agents)), hyper_(std::move(hyper)) {
    if (agents_.empty()) throw ConfigError("learner: no agents");
    sigma_ = hyper_.sigma_start;
    epsilon_ = hyper_.epsilon_start;
}

void Learner::begin_episode(int episode) {
    const double horizon = hyper_.anneal_fraction * hyper_.episodes;
    const double f = horizon > 0.0 ? std::min(1.0, episode / horizon) : 1.0;
    sigma_ = hyper_.sigma_start + (hyper_.sigma_end - hyper_.sigma_start) * f;
    epsilon_ = hyper_.epsilon_start + (hyper_.epsilon_end - hyper_.epsilon_start) * f;
    reset_episode();
}

DecideResult Learner::finish_decide(Matrix logits, const std::vector<char>& legal, bool explore,
                                    Rng& rng) const {
    if (logits.cols() != legal.size()) {
        throw UsageError("decide: legality mask does not match the action head");
    }
    std::vector<int> allowed;
    for (std::size_t i = 0; i < legal.size(); ++i) {
        if (legal[i]) allowed.push_back(static_cast<int>(i));
    }
    if (allowed.empty()) {
        throw UsageError("decide: no legal action (controller invariant violated)");
    }
    if (explore && sigma_ > 0.0) {
        for (std::size_t i = 0; i < logits.size(); ++i) logits.at(i) += gaussian(rng, 0.0, sigma_);
    }
    Matrix masked = logits;
    for (std::size_t i = 0; i < legal.size(); ++i) {
        if (!legal[i]) masked.at(i) = -1e9;
    }
    DecideResult out;
    if (explore && uniform01(rng) < epsilon_) {
        out.action = allowed[uniform_int(rng, 0, static_cast<int>(allowed.size()) - 1)];
        out.action_vec = Matrix(1, logits.cols());
        out.action_vec.at(out.action) = 1.0;
    } else {
        out.action = argmax_row(masked);
        out.action_vec = softmax_row(masked);
    }
    return out;
}

// --- KS-DDPG ----------------------------------------------------------------

namespace {
std::vector<std::size_t> critic_dims(const std::vector<AgentSpec>& agents,
                                     const LearnerHyper& hyper, bool centralized, int agent) {
    std::size_t in = 0;
    if (centralized) {
        for (const AgentSpec& a : agents) in += a.obs_dim + a.action_dim;
    } else {
        in = agents[agent].obs_dim + agents[agent].action_dim;
    }
    std::vector<std::size_t> dims{in};
    dims.insert(dims.end(), hyper.critic_hidden.begin(), hyper.critic_hidden.end());
    dims.push_back(1);
    return dims;
}

std::vector<Activation> critic_acts(const LearnerHyper& hyper) {
    std::vector<Activation> acts(hyper.critic_hidden.size(), Activation::Relu);
    acts.push_back(Activation::Identity);
    return acts;
}
} // namespace

KsddpgLearner::KsddpgLearner(std::vector<AgentSpec> agents, LearnerHyper hyper, Rng& rng)
    : Learner(std::move(agents), std::move(hyper)), container_(hyper_.knowledge_dim) {
    container_.reset();
    gate_norms_.resize(agents_.size());
    for (int i = 0; i < agent_count(); ++i) {
        actors_.push_back(glorot_ks_actor(agents_[i].obs_dim, hyper_.embed_dim,
                                          hyper_.knowledge_dim, hyper_.actor_hidden,
                                          agents_[i].action_dim, rng));
        critics_.push_back(Mlp::glorot(critic_dims(agents_, hyper_, true, i), critic_acts(hyper_), rng));
        target_actors_.push_back(actors_.back());    // exact copies at construction
        target_critics_.push_back(critics_.back());
        actor_adam_.emplace_back();
        actor_adam_.back().init(actors_.back().entries("a"), hyper_.actor_lr);
        critic_adam_.emplace_back();
        critic_adam_.back().init(critics_.back().entries("c"), hyper_.critic_lr);
    }
}

DecideResult KsddpgLearner::decide(int agent, const Matrix& obs, const std::vector<char>& legal,
                                   bool explore, Rng& rng) {
    const Matrix snapshot = container_.k;
    KsActorCache cache;
    Matrix logits = ks_actor_logits(actors_[agent], obs, snapshot, &cache);
    container_.k = cache.kv;  // the next agent in order sees this write
    gate_norms_[agent] = {std::sqrt(l2_norm_sq(cache.obtain.update_gate)),
                          std::sqrt(l2_norm_sq(cache.obtain.reset_gate)),
                          std::sqrt(l2_norm_sq(cache.update.reset_gate)),
                          std::sqrt(l2_norm_sq(cache.update.update_gate))};
    DecideResult out = finish_decide(std::move(logits), legal, explore, rng);
    out.knowledge = snapshot;
    return out;
}

std::vector<TrainStats> KsddpgLearner::train_step(const ReplayBuffer& buffer, Rng& rng) {
    if (buffer.size() < hyper_.batch_size) return {};
    const int N = agent_count();
    const double inv_batch = 1.0 / static_cast<double>(hyper_.batch_size);
    std::vector<TrainStats> stats(N);

    for (int i = 0; i < N; ++i) {
        const std::vector<std::size_t> idx = buffer.sample_indices(hyper_.batch_size, rng);
        const int chunks = chunk_count(idx.size());

        // critic: minimize mean (y - Q)^2 on stored joint actions
        std::vector<Mlp> cgrads(chunks, zeros_like(critics_[i]));
        std::vector<double> closs(chunks, 0.0);
        run_chunked(idx.size(), chunks, [&](int c, std::size_t b, std::size_t e) {
            for (std::size_t s = b; s < e; ++s) {
                const Transition& tr = buffer.at(idx[s]);
                std::vector<Matrix> next_probs(N);
                std::vector<const Matrix*> next_refs(N);
                for (int j = 0; j < N; ++j) {
                    next_probs[j] = softmax_row(
                        ks_actor_logits(target_actors_[j], tr.obs_next[j], tr.knowledge[j]));
                    next_refs[j] = &next_probs[j];
                }
                const double q_next =
                    target_critics_[i].forward(critic_input(tr.obs_next, next_refs))(0, 0);
                const double y = critic_target(tr.reward[i], hyper_.gamma, q_next, tr.done);
                std::vector<DenseCache> caches;
                const double q =
                    critics_[i].forward(critic_input(tr.obs, stored_actions(tr)), &caches)(0, 0);
                const double err = q - y;
                closs[c] += err * err;
                Matrix up(1, 1);
                up.at(0) = 2.0 * err * inv_batch;
                critics_[i].backward(up, caches, cgrads[c]);
            }
        });
        for (int c = 1; c < chunks; ++c) add_entries(cgrads[0].entries("g"), cgrads[c].entries("g"));
        stats[i].critic_loss =
            std::accumulate(closs.begin(), closs.end(), 0.0) * inv_batch;
        critic_adam_[i].step(critics_[i].entries("c"), cgrads[0].entries("c"));

        // actor: ascend (1/S) sum grad_theta mu * grad_a Q with a_i replayed
        // through the stored knowledge snapshot
        std::vector<KsActor> agrads(chunks, zeros_like(actors_[i]));
        std::size_t a_off = 0;
        for (int j = 0; j < N; ++j) a_off += agents_[j].obs_dim;
        for (int j = 0; j < i; ++j) a_off += agents_[j].action_dim;
        run_chunked(idx.size(), chunks, [&](int c, std::size_t b, std::size_t e) {
            Mlp scratch = zeros_like(critics_[i]);
            for (std::size_t s = b; s < e; ++s) {
                const Transition& tr = buffer.at(idx[s]);
                KsActorCache acache;
                Matrix logits = ks_actor_logits(actors_[i], tr.obs[i], tr.knowledge[i], &acache);
                Matrix probs = softmax_row(logits);
                std::vector<const Matrix*> acts = stored_actions(tr);
                acts[i] = &probs;
                std::vector<DenseCache> ccaches;
                critics_[i].forward(critic_input(tr.obs, acts), &ccaches);
                Matrix one(1, 1, 1.0);
                Matrix grad_in = critics_[i].backward(one, ccaches, scratch);
                Matrix dq_da = slice_row(grad_in, a_off, agents_[i].action_dim);
                scale_in_place(dq_da, inv_batch);
                Matrix grad_logits = softmax_backward(dq_da, probs);
                ks_actor_backward(actors_[i], grad_logits, acache, agrads[c]);
            }
        });
        for (int c = 1; c < chunks; ++c)
            add_entries(agrads[0].entries("g"), agrads[c].entries("g"));
        stats[i].actor_grad_norm = std::sqrt(entries_norm_sq(agrads[0].entries("g")));
        negate_entries(agrads[0].entries("g"));  // Adam minimizes; J is ascended
        actor_adam_[i].step(actors_[i].entries("a"), agrads[0].entries("a"));
    }

    for (int i = 0; i < N; ++i) {
        soft_update_all(target_actors_[i].entries("t"), std::as_const(actors_[i]).entries("t"), hyper_.tau);
        soft_update_all(target_critics_[i].entries("t"), std::as_const(critics_[i]).entries("t"), hyper_.tau);
    }
    return stats;
}

NamedMatrices KsddpgLearner::parameters(int agent) const {
    NamedMatrices out = copy_entries(actors_[agent].entries("actor"));
    NamedMatrices more = copy_entries(critics_[agent].entries("critic"));
    out.insert(out.end(), more.begin(), more.end());
    more = copy_entries(target_actors_[agent].entries("target_actor"));
    out.insert(out.end(), more.begin(), more.end());
    more = copy_entries(target_critics_[agent].entries("target_critic"));
    out.insert(out.end(), more.begin(), more.end());
    return out;
}

void KsddpgLearner::load_parameters(int agent, const NamedMatrices& entries) {
    load_entries(actors_[agent].entries("actor"), entries);
    load_entries(critics_[agent].entries("critic"), entries);
    load_entries(target_actors_[agent].entries("target_actor"), entries);
    load_entries(target_critics_[agent].entries("target_critic"), entries);
}

// --- MADDPG -----------------------------------------------------------------

MaddpgLearner::MaddpgLearner(std::vector<AgentSpec> agents, LearnerHyper hyper, Rng& rng)
    : Learner(std::move(agents), std::move(hyper)) {
    for (int i = 0; i < agent_count(); ++i) {
        actors_.push_back(Mlp::glorot(
            {agents_[i].obs_dim, hyper_.embed_dim, hyper_.actor_hidden, agents_[i].action_dim},
            {Activation::Relu, Activation::Relu, Activation::Identity}, rng));
        critics_.push_back(Mlp::glorot(critic_dims(agents_, hyper_, true, i), critic_acts(hyper_), rng));
        target_actors_.push_back(actors_.back());
        target_critics_.push_back(critics_.back());
        actor_adam_.emplace_back();
        actor_adam_.back().init(actors_.back().entries("a"), hyper_.actor_lr);
        critic_adam_.emplace_back();
        critic_adam_.back().init(critics_.back().entries("c"), hyper_.critic_lr);
    }
}

DecideResult MaddpgLearner::decide(int agent, const Matrix& obs, const std::vector<char>& legal,
                                   bool explore, Rng& rng) {
    return finish_decide(actors_[agent].forward(obs), legal, explore, rng);
}

std::vector<TrainStats> MaddpgLearner::train_step(const ReplayBuffer& buffer, Rng& rng) {
    if (buffer.size() < hyper_.batch_size) return {};
    const int N = agent_count();
    const double inv_batch = 1.0 / static_cast<double>(hyper_.batch_size);
    std::vector<TrainStats> stats(N);

    for (int i = 0; i < N; ++i) {
        const std::vector<std::size_t> idx = buffer.sample_indices(hyper_.batch_size, rng);
        const int chunks = chunk_count(idx.size());

        std::vector<Mlp> cgrads(chunks, zeros_like(critics_[i]));
        std::vector<double> closs(chunks, 0.0);
        run_chunked(idx.size(), chunks, [&](int c, std::size_t b, std::size_t e) {
            for (std::size_t s = b; s < e; ++s) {
                const Transition& tr = buffer.at(idx[s]);
                std::vector<Matrix> next_probs(N);
                std::vector<const Matrix*> next_refs(N);
                for (int j = 0; j < N; ++j) {
                    next_probs[j] = softmax_row(target_actors_[j].forward(tr.obs_next[j]));
                    next_refs[j] = &next_probs[j];
                }
                const double q_next =
                    target_critics_[i].forward(critic_input(tr.obs_next, next_refs))(0, 0);
                const double y = critic_target(tr.reward[i], hyper_.gamma, q_next, tr.done);
                std::vector<DenseCache> caches;
                const double q =
                    critics_[i].forward(critic_input(tr.obs, stored_actions(tr)), &caches)(0, 0);
                const double err = q - y;
                closs[c] += err * err;
                Matrix up(1, 1);
                up.at(0) = 2.0 * err * inv_batch;
                critics_[i].backward(up, caches, cgrads[c]);
            }
        });
        for (int c = 1; c < chunks; ++c) add_entries(cgrads[0].entries("g"), cgrads[c].entries("g"));
        stats[i].critic_loss = std::accumulate(closs.begin(), closs.end(), 0.0) * inv_batch;
        critic_adam_[i].step(critics_[i].entries("c"), cgrads[0].entries("c"));

        std::vector<Mlp> agrads(chunks, zeros_like(actors_[i]));
        std::size_t a_off = 0;
        for (int j = 0; j < N; ++j) a_off += agents_[j].obs_dim;
        for (int j = 0; j < i; ++j) a_off += agents_[j].action_dim;
        run_chunked(idx.size(), chunks, [&](int c, std::size_t b, std::size_t e) {
            Mlp scratch = zeros_like(critics_[i]);
            for (std::size_t s = b; s < e; ++s) {
                const Transition& tr = buffer.at(idx[s]);
                std::vector<DenseCache> acaches;
                Matrix logits = actors_[i].forward(tr.obs[i], &acaches);
                Matrix probs = softmax_row(logits);
                std::vector<const Matrix*> acts = stored_actions(tr);
                acts[i] = &probs;
                std::vector<DenseCache> ccaches;
                critics_[i].forward(critic_input(tr.obs, acts), &ccaches);
                Matrix one(1, 1, 1.0);
                Matrix grad_in = critics_[i].backward(one, ccaches, scratch);
                Matrix dq_da = slice_row(grad_in, a_off, agents_[i].action_dim);
                scale_in_place(dq_da, inv_batch);
                Matrix grad_logits = softmax_backward(dq_da, probs);
                actors_[i].backward(grad_logits, acaches, agrads[c]);
            }
        });
        for (int c = 1; c < chunks; ++c)
            add_entries(agrads[0].entries("g"), agrads[c].entries("g"));
        stats[i].actor_grad_norm = std::sqrt(entries_norm_sq(agrads[0].entries("g")));
        negate_entries(agrads[0].entries("g"));
        actor_adam_[i].step(actors_[i].entries("a"), agrads[0].entries("a"));
    }

    for (int i = 0; i < N; ++i) {
        soft_update_all(target_actors_[i].entries("t"), std::as_const(actors_[i]).entries("t"), hyper_.tau);
        soft_update_all(target_critics_[i].entries("t"), std::as_const(critics_[i]).entries("t"), hyper_.tau);
    }
    return stats;
}

NamedMatrices MaddpgLearner::parameters(int agent) const {
    NamedMatrices out = copy_entries(actors_[agent].entries("actor"));
    NamedMatrices more = copy_entries(critics_[agent].entries("critic"));
    out.insert(out.end(), more.begin(), more.end());
    more = copy_entries(target_actors_[agent].entries("target_actor"));
    out.insert(out.end(), more.begin(), more.end());
    more = copy_entries(target_critics_[agent].entries("target_critic"));
    out.insert(out.end(), more.begin(), more.end());
    return out;
}

void MaddpgLearner::load_parameters(int agent, const NamedMatrices& entries) {
    load_entries(actors_[agent].entries("actor"), entries);
    load_entries(critics_[agent].entries("critic"), entries);
    load_entries(target_actors_[agent].entries("target_actor"), entries);
    load_entries(target_critics_[agent].entries("target_critic"), entries);
}

// --- independent DDPG --------------------------------------------------------

DdpgLearner::DdpgLearner(std::vector<AgentSpec> agents, LearnerHyper hyper, Rng& rng)
    : Learner(std::move(agents), std::move(hyper)) {
    for (int i = 0; i < agent_count(); ++i) {
        actors_.push_back(Mlp::glorot(
            {agents_[i].obs_dim, hyper_.embed_dim, hyper_.actor_hidden, agents_[i].action_dim},
            {Activation::Relu, Activation::Relu, Activation::Identity}, rng));
        critics_.push_back(Mlp::glorot(critic_dims(agents_, hyper_, false, i), critic_acts(hyper_), rng));
        target_actors_.push_back(actors_.back());
        target_critics_.push_back(critics_.back());
        actor_adam_.emplace_back();
        actor_adam_.back().init(actors_.back().entries("a"), hyper_.actor_lr);
        critic_adam_.emplace_back();
        critic_adam_.back().init(critics_.back().entries("c"), hyper_.critic_lr);
    }
}

DecideResult DdpgLearner::decide(int agent, const Matrix& obs, const std::vector<char>& legal,
                                 bool explore, Rng& rng) {
    return finish_decide(actors_[agent].forward(obs), legal, explore, rng);
}

std::vector<TrainStats> DdpgLearner::train_step(const ReplayBuffer& buffer, Rng& rng) {
    if (buffer.size() < hyper_.batch_size) return {};
    const int N = agent_count();
    const double inv_batch = 1.0 / static_cast<double>(hyper_.batch_size);
    std::vector<TrainStats> stats(N);

    for (int i = 0; i < N; ++i) {
        const std::vector<std::size_t> idx = buffer.sample_indices(hyper_.batch_size, rng);
        Mlp cgrad = zeros_like(critics_[i]);
        double loss = 0.0;
        for (std::size_t s : idx) {
            const Transition& tr = buffer.at(s);
            Matrix next_a = softmax_row(target_actors_[i].forward(tr.obs_next[i]));
            const double q_next =
                target_critics_[i].forward(concat_rows({&tr.obs_next[i], &next_a}))(0, 0);
            const double y = critic_target(tr.reward[i], hyper_.gamma, q_next, tr.done);
            std::vector<DenseCache> caches;
            const double q =
                critics_[i].forward(concat_rows({&tr.obs[i], &tr.action_vec[i]}), &caches)(0, 0);
            const double err = q - y;
            loss += err * err;
            Matrix up(1, 1);
            up.at(0) = 2.0 * err * inv_batch;
            critics_[i].backward(up, caches, cgrad);
        }
        stats[i].critic_loss = loss * inv_batch;
        critic_adam_[i].step(critics_[i].entries("c"), cgrad.entries("c"));

        Mlp agrad = zeros_like(actors_[i]);
        Mlp scratch = zeros_like(critics_[i]);
        for (std::size_t s : idx) {
            const Transition& tr = buffer.at(s);
            std::vector<DenseCache> acaches;
            Matrix probs = softmax_row(actors_[i].forward(tr.obs[i], &acaches));
            std::vector<DenseCache> ccaches;
            critics_[i].forward(concat_rows({&tr.obs[i], &probs}), &ccaches);
            Matrix one(1, 1, 1.0);
            Matrix grad_in = critics_[i].backward(one, ccaches, scratch);
            Matrix dq_da = slice_row(grad_in, agents_[i].obs_dim, agents_[i].action_dim);
            scale_in_place(dq_da, inv_batch);
            // recompute the softmax grad against the logits cache
            Matrix grad_logits = softmax_backward(dq_da, probs);
            actors_[i].backward(grad_logits, acaches, agrad);
        }
        stats[i].actor_grad_norm = std::sqrt(entries_norm_sq(agrad.entries("g")));
        negate_entries(agrad.entries("g"));
        actor_adam_[i].step(actors_[i].entries("a"), agrad.entries("a"));
    }

    for (int i = 0; i < N; ++i) {
        soft_update_all(target_actors_[i].entries("t"), std::as_const(actors_[i]).entries("t"), hyper_.tau);
        soft_update_all(target_critics_[i].entries("t"), std::as_const(critics_[i]).entries("t"), hyper_.tau);
    }
    return stats;
}

NamedMatrices DdpgLearner::parameters(int agent) const {
    NamedMatrices out = copy_entries(actors_[agent].entries("actor"));
    NamedMatrices more = copy_entries(critics_[agent].entries("critic"));
    out.insert(out.end(), more.begin(), more.end());
    more = copy_entries(target_actors_[agent].entries("target_actor"));
    out.insert(out.end(), more.begin(), more.end());
    more = copy_entries(target_critics_[agent].entries("target_critic"));
    out.insert(out.end(), more.begin(), more.end());
    return out;
}

void DdpgLearner::load_parameters(int agent, const NamedMatrices& entries) {
    load_entries(actors_[agent].entries("actor"), entries);
    load_entries(critics_[agent].entries("critic"), entries);
    load_entries(target_actors_[agent].entries("target_actor"), entries);
    load_entries(target_critics_[agent].entries("target_critic"), entries);
}

// --- independent DQN ----------------------------------------------------------

DqnLearner::DqnLearner(std::vector<AgentSpec> agents, LearnerHyper hyper, Rng& rng)
    : Learner(std::move(agents), std::move(hyper)) {
    for (int i = 0; i < agent_count(); ++i) {
        qnets_.push_back(Mlp::glorot(
            {agents_[i].obs_dim, hyper_.embed_dim, hyper_.actor_hidden, agents_[i].action_dim},
            {Activation::Relu, Activation::Relu, Activation::Identity}, rng));
        target_qnets_.push_back(qnets_.back());
        adam_.emplace_back();
        adam_.back().init(qnets_.back().entries("q"), hyper_.critic_lr);
    }
}

DecideResult DqnLearner::decide(int agent, const Matrix& obs, const std::vector<char>& legal,
                                bool explore, Rng& rng) {
    Matrix qvals = qnets_[agent].forward(obs);
    std::vector<int> allowed;
    for (std::size_t i = 0; i < legal.size(); ++i) {
        if (legal[i]) allowed.push_back(static_cast<int>(i));
    }
    if (allowed.empty()) throw UsageError("decide: no legal action");
    DecideResult out;
    if (explore && uniform01(rng) < epsilon_) {
        out.action = allowed[uniform_int(rng, 0, static_cast<int>(allowed.size()) - 1)];
    } else {
        out.action = allowed[0];
        for (int a : allowed) {
            if (qvals.at(a) > qvals.at(out.action)) out.action = a;
        }
    }
    out.action_vec = Matrix(1, qvals.cols());
    out.action_vec.at(out.action) = 1.0;
    return out;
}

std::vector<TrainStats> DqnLearner::train_step(const ReplayBuffer& buffer, Rng& rng) {
    if (buffer.size() < hyper_.batch_size) return {};
    const int N = agent_count();
    const double inv_batch = 1.0 / static_cast<double>(hyper_.batch_size);
    std::vector<TrainStats> stats(N);
    for (int i = 0; i < N; ++i) {
        const std::vector<std::size_t> idx = buffer.sample_indices(hyper_.batch_size, rng);
        Mlp grads = zeros_like(qnets_[i]);
        double loss = 0.0;
        for (std::size_t s : idx) {
            const Transition& tr = buffer.at(s);
            Matrix next_q = target_qnets_[i].forward(tr.obs_next[i]);
            double best = next_q.at(0);
            for (std::size_t a = 1; a < next_q.size(); ++a) best = std::max(best, next_q.at(a));
            const double y = critic_target(tr.reward[i], hyper_.gamma, best, tr.done);
            std::vector<DenseCache> caches;
            Matrix q = qnets_[i].forward(tr.obs[i], &caches);
            const int a = tr.action_index[i];
            const double err = q.at(a) - y;
            loss += err * err;
            Matrix up(1, q.cols());
            up.at(a) = 2.0 * err * inv_batch;
            qnets_[i].backward(up, caches, grads);
        }
        stats[i].critic_loss = loss * inv_batch;
        adam_[i].step(qnets_[i].entries("q"), grads.entries("q"));
    }
    for (int i = 0; i < N; ++i) {
        soft_update_all(target_qnets_[i].entries("t"), std::as_const(qnets_[i]).entries("t"), hyper_.tau);
    }
    return stats;
}

NamedMatrices DqnLearner::parameters(int agent) const {
    NamedMatrices out = copy_entries(qnets_[agent].entries("q"));
    NamedMatrices more = copy_entries(target_qnets_[agent].entries("target_q"));
    out.insert(out.end(), more.begin(), more.end());
    return out;
}

void DqnLearner::load_parameters(int agent, const NamedMatrices& entries) {
    load_entries(qnets_[agent].entries("q"), entries);
    load_entries(target_qnets_[agent].entries("target_q"), entries);
}

std::unique_ptr<Learner> make_learner(const std::string& algorithm, std::vector<AgentSpec> agents,
                                      LearnerHyper hyper, Rng& rng) {
    if (algorithm == "ksddpg") return std::make_unique<KsddpgLearner>(std::move(agents), std::move(hyper), rng);
    if (algorithm == "maddpg") return std::make_unique<MaddpgLearner>(std::move(agents), std::move(hyper), rng);
    if (algorithm == "ddpg") return std::make_unique<DdpgLearner>(std::move(agents), std::move(hyper), rng);
    if (algorithm == "dqn") return std::make_unique<DqnLearner>(std::move(agents), std::move(hyper), rng);
    throw ConfigError("unknown learning algorithm '" + algorithm + "'");
}

} // namespace ksddpg
