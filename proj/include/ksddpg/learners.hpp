#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ksddpg/checkpoint.hpp"
#include "ksddpg/comm.hpp"
#include "ksddpg/nets.hpp"
#include "ksddpg/replay.hpp"

namespace ksddpg {

struct AgentSpec {
    int node = -1;
    std::size_t obs_dim = 0;
    std::size_t action_dim = 0;  // phase count; action p = "make phase p active"
};

struct LearnerHyper {
    double gamma = 0.95;
    double tau = 0.01;
    double critic_lr = 1e-3;
    double actor_lr = 1e-4;
    std::size_t batch_size = 1024;
    std::size_t knowledge_dim = 64;
    std::size_t embed_dim = 512;
    std::size_t actor_hidden = 256;
    std::vector<std::size_t> critic_hidden = {1024, 512, 256};
    double sigma_start = 0.5;
    double sigma_end = 0.05;
    double epsilon_start = 0.2;
    double epsilon_end = 0.01;
    double anneal_fraction = 0.6;
    int episodes = 1;  // annealing horizon
};

struct DecideResult {
    int action = -1;
    Matrix action_vec;  // softmax relaxation (one-hot under the epsilon branch)
    Matrix knowledge;   // container snapshot read by the agent; empty if unused
};

struct TrainStats {
    double critic_loss = 0.0;
    double actor_grad_norm = 0.0;
};

/// Knowledge-sharing actor: observation embedding, the two gated container
/// operations, then a dense head over (M_enc, r, kv).
struct KsActor {
    CommParams comm;
    Mlp head;

    std::vector<std::pair<std::string, Matrix*>> entries(const std::string& prefix);
    std::vector<std::pair<std::string, const Matrix*>> entries(const std::string& prefix) const;
};

KsActor glorot_ks_actor(std::size_t obs_dim, std::size_t embed_dim, std::size_t knowledge_dim,
                        std::size_t hidden, std::size_t actions, Rng& rng);
KsActor zeros_like(const KsActor& like);

struct KsActorCache {
    DenseCache embed;
    GateCache obtain, update;
    std::vector<DenseCache> head;
    Matrix m_enc, r, kv;
};

/// Logits of the composed policy for a given container content; `cache`
/// additionally exposes the updated knowledge (cache->kv) for write-back.
Matrix ks_actor_logits(const KsActor& a, const Matrix& obs, const Matrix& k,
                       KsActorCache* cache = nullptr);
/// Accumulates parameter gradients; knowledge gradients stop here (no
/// backpropagation across ticks).
void ks_actor_backward(const KsActor& a, const Matrix& grad_logits, KsActorCache& cache,
                       KsActor& grads);

class Learner {
public:
    Learner(std::vector<AgentSpec> agents, LearnerHyper hyper);
    virtual ~Learner() = default;

    virtual std::string name() const = 0;
    virtual DecideResult decide(int agent, const Matrix& obs, const std::vector<char>& legal,
                                bool explore, Rng& rng) = 0;
    /// One whole-system update (every agent) on minibatches from `buffer`.
    /// Empty result = skipped because the buffer is smaller than a batch.
    virtual std::vector<TrainStats> train_step(const ReplayBuffer& buffer, Rng& rng) = 0;

    virtual bool uses_knowledge() const { return false; }
    virtual NamedMatrices parameters(int agent) const = 0;
    virtual void load_parameters(int agent, const NamedMatrices& entries) = 0;

    void begin_episode(int episode);
    virtual void reset_episode() {}

    int agent_count() const { return static_cast<int>(agents_.size()); }
    const std::vector<AgentSpec>& agents() const { return agents_; }
    double sigma() const { return sigma_; }
    double epsilon() const { return epsilon_; }

protected:
    DecideResult finish_decide(Matrix logits, const std::vector<char>& legal, bool explore,
                               Rng& rng) const;

    std::vector<AgentSpec> agents_;
    LearnerHyper hyper_;
    double sigma_ = 0.0;
    double epsilon_ = 0.0;
};

class KsddpgLearner : public Learner {
public:
    KsddpgLearner(std::vector<AgentSpec> agents, LearnerHyper hyper, Rng& rng);

    std::string name() const override { return "ksddpg"; }
    bool uses_knowledge() const override { return true; }
    DecideResult decide(int agent, const Matrix& obs, const std::vector<char>& legal,
                        bool explore, Rng& rng) override;
    std::vector<TrainStats> train_step(const ReplayBuffer& buffer, Rng& rng) override;
    NamedMatrices parameters(int agent) const override;
    void load_parameters(int agent, const NamedMatrices& entries) override;
    void reset_episode() override { container_.reset(); }

    /// Gate activity of the agent's most recent decision, for the debug trace.
    struct GateNorms {
        double z = 0, l = 0, p = 0, q = 0;
    };
    const GateNorms& gate_norms(int agent) const { return gate_norms_[agent]; }

    const KnowledgeContainer& container() const { return container_; }
    KsActor& actor(int agent) { return actors_[agent]; }
    Mlp& critic(int agent) { return critics_[agent]; }
    const KsActor& target_actor(int agent) const { return target_actors_[agent]; }
    const Mlp& target_critic(int agent) const { return target_critics_[agent]; }

private:
    friend class MaddpgLearner;
    KnowledgeContainer container_;
    std::vector<KsActor> actors_, target_actors_;
    std::vector<Mlp> critics_, target_critics_;
    std::vector<AdamSet> actor_adam_, critic_adam_;
    std::vector<GateNorms> gate_norms_;
};

class MaddpgLearner : public Learner {
public:
    MaddpgLearner(std::vector<AgentSpec> agents, LearnerHyper hyper, Rng& rng);

    std::string name() const override { return "maddpg"; }
    DecideResult decide(int agent, const Matrix& obs, const std::vector<char>& legal,
                        bool explore, Rng& rng) override;
    std::vector<TrainStats> train_step(const ReplayBuffer& buffer, Rng& rng) override;
    NamedMatrices parameters(int agent) const override;
    void load_parameters(int agent, const NamedMatrices& entries) override;

    Mlp& actor(int agent) { return actors_[agent]; }
    Mlp& critic(int agent) { return critics_[agent]; }

private:
    std::vector<Mlp> actors_, target_actors_;
    std::vector<Mlp> critics_, target_critics_;
    std::vector<AdamSet> actor_adam_, critic_adam_;
};

class DdpgLearner : public Learner {
public:
    DdpgLearner(std::vector<AgentSpec> agents, LearnerHyper hyper, Rng& rng);

    std::string name() const override { return "ddpg"; }
    DecideResult decide(int agent, const Matrix& obs, const std::vector<char>& legal,
                        bool explore, Rng& rng) override;
    std::vector<TrainStats> train_step(const ReplayBuffer& buffer, Rng& rng) override;
    NamedMatrices parameters(int agent) const override;
    void load_parameters(int agent, const NamedMatrices& entries) override;

    Mlp& actor(int agent) { return actors_[agent]; }

private:
    std::vector<Mlp> actors_, target_actors_;
    std::vector<Mlp> critics_, target_critics_;  // per-agent (o_i, a_i) critics
    std::vector<AdamSet> actor_adam_, critic_adam_;
};

class DqnLearner : public Learner {
public:
    DqnLearner(std::vector<AgentSpec> agents, LearnerHyper hyper, Rng& rng);

    std::string name() const override { return "dqn"; }
    DecideResult decide(int agent, const Matrix& obs, const std::vector<char>& legal,
                        bool explore, Rng& rng) override;
    std::vector<TrainStats> train_step(const ReplayBuffer& buffer, Rng& rng) override;
    NamedMatrices parameters(int agent) const override;
    void load_parameters(int agent, const NamedMatrices& entries) override;

    Mlp& qnet(int agent) { return qnets_[agent]; }
    const Mlp& target_qnet(int agent) const { return target_qnets_[agent]; }

private:
    std::vector<Mlp> qnets_, target_qnets_;
    std::vector<AdamSet> adam_;
};

/// Eq.-style TD target: y = r + gamma * q_next, with the bootstrap dropped on
/// episode boundaries.
double critic_target(double reward, double gamma, double q_next, bool done);

/// Mean squared TD error over a minibatch of (target, prediction) pairs.
double critic_loss(const std::vector<double>& targets, const std::vector<double>& predictions);

/// Worker-thread cap for minibatch fan-out (KSDDPG_THREADS, default 1).
int worker_threads();

std::unique_ptr<Learner> make_learner(const std::string& algorithm,
                                      std::vector<AgentSpec> agents, LearnerHyper hyper,
                                      Rng& rng);

} // namespace ksddpg
