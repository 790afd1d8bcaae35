#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ksddpg/config.hpp"
#include "ksddpg/replay.hpp"
#include "ksddpg/webster.hpp"

namespace ksddpg {

struct EpisodeLog {
    int episode = 0;
    int horizon = 0;
    int agent_count = 0;
    std::vector<MetricsFrame> frames;  // one per tick
    /// Per agent: (tick, reward) at each of its decision points.
    std::vector<std::vector<std::pair<int, double>>> rewards;
    double wall_s = 0.0;
    int train_steps = 0;
    double critic_loss_sum = 0.0;
    double actor_grad_norm_sum = 0.0;
    // end-of-episode totals from the simulator
    double queued_time_signalized_s = 0.0;
    std::uint64_t served_signalized = 0;
    std::uint64_t stops_total = 0;
};

/// Eq.-20 style average reward per agent per step: decision-point rewards at
/// their tick, zeros elsewhere.
double aggregate_reward(const EpisodeLog& log);

/// Tables-shaped evaluation summary, long format.
struct SummaryTable {
    std::vector<std::pair<std::string, double>> rows;
    double get(const std::string& metric) const;
};

/// Streams an experiment: builds the network and controllers, runs seeded
/// episodes, trains at the configured cadence, evaluates greedily, exports
/// CSV artifacts and checkpoints.
class Experiment {
public:
    explicit Experiment(ExperimentConfig cfg);

    /// One seeded episode. Training mode stores transitions and triggers
    /// train steps; evaluation mode runs the policy greedily.
    EpisodeLog run_episode(std::uint64_t episode_seed, int episode_index, bool train,
                           std::ostream* metrics_csv = nullptr,
                           std::ostream* controller_trace = nullptr,
                           std::ostream* knowledge_trace = nullptr);

    /// Full training loop with logs; writes training_log.csv, reward_curve.csv
    /// and a checkpoint under cfg.out_dir.
    std::vector<EpisodeLog> train();

    /// Greedy evaluation over n episodes (seed stream disjoint from training).
    SummaryTable evaluate(int n_episodes, const std::string& metrics_prefix = "");

    void save_checkpoint_dir(const std::string& dir) const;
    void load_checkpoint_manifest(const std::string& manifest_path);

    const RoadNetwork& network() const { return net_; }
    const ExperimentConfig& config() const { return cfg_; }
    Learner* learner() { return learner_.get(); }
    const ReplayBuffer& buffer() const { return *buffer_; }

    /// Demand-profile V/C ratio at time t (active rates / entry capacity).
    double volume_capacity_ratio(double t) const;
    /// Contiguous [begin,end) periods split at vc_threshold crossings;
    /// one period when the profile never crosses.
    std::vector<std::pair<int, int>> demand_periods() const;

    static inline constexpr const char* kManifestSchema = "ksddpg-ckpt-manifest-1";

private:
    ExperimentConfig cfg_;
    RoadNetwork net_;
    DemandSpec demand_;
    std::vector<AgentSpec> agent_specs_;
    std::unique_ptr<Learner> learner_;
    std::map<int, FixedTimePlan> plans_;  // fixed_time only
    std::unique_ptr<ReplayBuffer> buffer_;
    std::uint64_t insert_since_train_ = 0;
};

} // namespace ksddpg
