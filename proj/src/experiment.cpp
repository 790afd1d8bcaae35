#include "ksddpg/experiment.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "ksddpg/errors.hpp"
#include "ksddpg/max_pressure.hpp"

namespace ksddpg {

namespace {

std::string fmt(double v) {
    std::array<char, 64> buf{};
    std::snprintf(buf.data(), buf.size(), "%.6f", v);
    return buf.data();
}

/// Rewards and observations registered per agent between decision points.
struct AgentRollState {
    Matrix last_action_vec;   // committed action, one-hot of the initial phase at start
    int last_action_index = 0;
    Matrix last_knowledge;    // zeros before the first decision
    double prev_delay_avg = 0.0;
    bool decided_once = false;
};

/// Greedy pressure policy routed through the legality contract: prefer the
/// pressure argmax; extending covers the case where it is already green.
int max_pressure_phase_choice(const Simulation& sim, int node, const PhaseController& ctrl,
                              const std::vector<Action>& legal) {
    const int best = max_pressure_select(sim, node);
    if (best != ctrl.current_phase()) return best;
    for (const Action& a : legal) {
        if (a.kind == Action::Kind::Extend) return best;  // extend the argmax phase
    }
    // extension capped out: switch to the best other phase by pressure
    int alt = -1;
    double alt_pressure = 0.0;
    for (const Action& a : legal) {
        if (a.kind != Action::Kind::SwitchTo) continue;
        const double p = phase_pressure(sim, node, a.target);
        if (alt < 0 || p > alt_pressure) {
            alt = a.target;
            alt_pressure = p;
        }
    }
    return alt;
}

} // namespace

double aggregate_reward(const EpisodeLog& log) {
    double total = 0.0;
    for (const auto& series : log.rewards) {
        for (const auto& [t, r] : series) total += r;
    }
    return total / (static_cast<double>(log.horizon) * log.agent_count);
}

double SummaryTable::get(const std::string& metric) const {
    for (const auto& [name, v] : rows) {
        if (name == metric) return v;
    }
    throw ConfigError("summary: no metric '" + metric + "'");
}

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    net_ = cfg_.build_network();
    demand_ = cfg_.build_demand(net_);

    for (int node : net_.signalized) {
        AgentSpec spec;
        spec.node = node;
        spec.obs_dim = static_cast<std::size_t>(net_.entrance_lane_count(node)) +
                       net_.phase_count(node);
        spec.action_dim = static_cast<std::size_t>(net_.phase_count(node));
        agent_specs_.push_back(spec);
    }

    if (cfg_.algorithm == "fixed_time") {
        plans_ = webster_plan(net_, demand_, cfg_.controller);
    } else if (cfg_.algorithm != "max_pressure") {
        LearnerHyper hyper = cfg_.hyper;
        hyper.episodes = cfg_.episodes;
        Rng init_rng = make_rng(derive_seed(cfg_.seed, 0xA11CE));
        learner_ = make_learner(cfg_.algorithm, agent_specs_, hyper, init_rng);
        buffer_ = std::make_unique<ReplayBuffer>(cfg_.buffer_capacity);
    }
}

double Experiment::volume_capacity_ratio(double t) const {
    double active = 0.0;
    for (const Flow& f : demand_.flows) {
        if (t >= f.start_s && t < f.end_s) active += f.rate_veh_h / 3600.0;
    }
    // Effective entry capacity: saturation flow over the entry links scaled by
    // a nominal quarter green share, the usual share of a four-phase plan.
    double capacity = 0.0;
    for (const Link& l : net_.links) {
        if (net_.nodes[l.from].kind == NodeKind::Boundary) {
            capacity += 0.25 * l.saturation_flow_vps * l.lanes;
        }
    }
    return capacity > 0.0 ? active / capacity : 0.0;
}

std::vector<std::pair<int, int>> Experiment::demand_periods() const {
    const int T = cfg_.horizon_s;
    int first = -1, last = -1;
    for (int t = 0; t < T; ++t) {
        if (volume_capacity_ratio(t) >= cfg_.vc_threshold) {
            if (first < 0) first = t;
            last = t;
        }
    }
    if (first <= 0 || last >= T - 1) return {{0, T}};
    return {{0, first}, {first, last + 1}, {last + 1, T}};
}

EpisodeLog Experiment::run_episode(std::uint64_t episode_seed, int episode_index, bool train,
                                   std::ostream* metrics_csv, std::ostream* controller_trace,
                                   std::ostream* knowledge_trace) {
    const auto wall_start = std::chrono::steady_clock::now();
    const int N = static_cast<int>(agent_specs_.size());
    const int T = cfg_.horizon_s;

    Simulation sim(net_, demand_, derive_seed(episode_seed, 0), cfg_.volume_mode);
    Rng explore_rng = make_rng(derive_seed(episode_seed, 1));
    Rng train_rng = make_rng(derive_seed(episode_seed, 2));

    std::vector<PhaseController> ctrls;
    for (int i = 0; i < N; ++i) {
        const int node = agent_specs_[i].node;
        std::vector<bool> left_only;
        for (int p = 0; p < net_.phase_count(node); ++p) {
            left_only.push_back(net_.phase_is_left_only(node, p));
        }
        ctrls.emplace_back(net_.phase_count(node), left_only, cfg_.controller);
    }

    if (learner_) learner_->begin_episode(episode_index);

    EpisodeLog log;
    log.episode = episode_index;
    log.horizon = T;
    log.agent_count = N;
    log.rewards.resize(N);
    log.frames.reserve(T);

    std::vector<AgentRollState> roll(N);
    for (int i = 0; i < N; ++i) {
        roll[i].last_action_vec = Matrix(1, agent_specs_[i].action_dim);
        roll[i].last_action_vec.at(0) = 1.0;  // controllers start on phase 0
        roll[i].last_knowledge = learner_ && learner_->uses_knowledge()
                                     ? Matrix(1, cfg_.hyper.knowledge_dim)
                                     : Matrix();
    }

    std::optional<Transition> pending;
    std::vector<double> reward_window(N, 0.0);

    if (metrics_csv && metrics_csv->tellp() == 0) {
        *metrics_csv << "t,node_id,queue_veh,delay_s,speed_fps,stops,reward\n";
    }
    if (controller_trace && controller_trace->tellp() == 0) {
        *controller_trace << "t,node_id,phase,mode,elapsed\n";
    }
    if (knowledge_trace && knowledge_trace->tellp() == 0) {
        *knowledge_trace << "t,node_id,z_norm,l_norm,p_norm,q_norm,k\n";
    }

    for (int t = 0; t < T; ++t) {
        std::vector<char> decided(N, 0);
        std::vector<double> tick_rewards(N, 0.0);
        bool any_decision = false;

        // 1. controller bookkeeping + decisions, strictly in agent order
        for (int i = 0; i < N; ++i) {
            PhaseController& c = ctrls[i];
            const bool at_decision = c.begin_tick();
            const int node = agent_specs_[i].node;

            if (cfg_.algorithm == "fixed_time") {
                if (c.mode() == SignalMode::Green) {
                    const FixedTimePlan& plan = plans_.at(node);
                    for (std::size_t s = 0; s < plan.entries.size(); ++s) {
                        if (plan.entries[s].phase == c.current_phase() &&
                            c.phase_elapsed_s() >= plan.entries[s].green_s) {
                            c.force_switch(plan.entries[(s + 1) % plan.entries.size()].phase);
                            break;
                        }
                    }
                }
                continue;
            }
            if (!at_decision) continue;

            decided[i] = 1;
            any_decision = true;

            // reward: reduction of this intersection's average delay between
            // two successive decision points
            const double cur_delay = sim.intersection_delay_avg(node);
            const double r = compute_reward(roll[i].prev_delay_avg, cur_delay);
            roll[i].prev_delay_avg = cur_delay;
            log.rewards[i].emplace_back(t, r);
            reward_window[i] += r;
            tick_rewards[i] = r;

            const std::vector<Action> legal = c.legal_actions();
            if (cfg_.algorithm == "max_pressure") {
                const int best = max_pressure_phase_choice(sim, node, c, legal);
                c.apply(best == c.current_phase() ? Action::extend() : Action::switch_to(best));
                continue;
            }

            // learning policies: action index p means "make phase p active"
            std::vector<char> mask(agent_specs_[i].action_dim, 0);
            for (const Action& a : legal) {
                mask[a.kind == Action::Kind::Extend ? c.current_phase() : a.target] = 1;
            }
            const Matrix obs = sim.observe(node, c.displayed_phase());
            DecideResult d = learner_->decide(i, obs, mask, train, explore_rng);
            c.apply(d.action == c.current_phase() ? Action::extend()
                                                  : Action::switch_to(d.action));
            roll[i].last_action_vec = d.action_vec;
            roll[i].last_action_index = d.action;
            if (learner_->uses_knowledge()) roll[i].last_knowledge = d.knowledge;
            roll[i].decided_once = true;

            if (knowledge_trace && learner_->uses_knowledge()) {
                auto* ks = dynamic_cast<KsddpgLearner*>(learner_.get());
                const auto& gn = ks->gate_norms(i);
                *knowledge_trace << t << "," << net_.nodes[node].id << "," << fmt(gn.z) << ","
                                 << fmt(gn.l) << "," << fmt(gn.p) << "," << fmt(gn.q) << ",\"";
                const Matrix& k = ks->container().k;
                for (std::size_t x = 0; x < k.size(); ++x) {
                    *knowledge_trace << (x ? ";" : "") << fmt(k.at(x));
                }
                *knowledge_trace << "\"\n";
            }
        }

        // 2. epoch bookkeeping for the replay buffer
        if (learner_ && train && any_decision) {
            std::vector<Matrix> obs_now(N);
            for (int i = 0; i < N; ++i) {
                obs_now[i] = sim.observe(agent_specs_[i].node, ctrls[i].displayed_phase());
            }
            if (pending) {
                pending->obs_next = obs_now;
                pending->reward = reward_window;
                pending->done = false;
                buffer_->push(std::move(*pending));
                insert_since_train_ += 1;
                if (insert_since_train_ >= static_cast<std::uint64_t>(cfg_.update_every)) {
                    insert_since_train_ = 0;
                    for (int round = 0; round < cfg_.train_rounds; ++round) {
                        const auto stats = learner_->train_step(*buffer_, train_rng);
                        if (stats.empty()) break;  // buffer below one batch
                        log.train_steps += 1;
                        for (const TrainStats& s : stats) {
                            log.critic_loss_sum += s.critic_loss;
                            log.actor_grad_norm_sum += s.actor_grad_norm;
                        }
                    }
                }
            }
            std::fill(reward_window.begin(), reward_window.end(), 0.0);
            Transition next;
            next.obs = std::move(obs_now);
            for (int i = 0; i < N; ++i) {
                next.action_vec.push_back(roll[i].last_action_vec);
                next.action_index.push_back(roll[i].last_action_index);
                next.knowledge.push_back(roll[i].last_knowledge);
            }
            pending = std::move(next);
        }

        // 3. serve one second of traffic under the current signal states
        std::vector<SignalState> signals;
        signals.reserve(N);
        for (int i = 0; i < N; ++i) signals.push_back(ctrls[i].signal());
        MetricsFrame frame = sim.step(signals);

        // 4. CSV streams
        if (controller_trace) {
            for (int i = 0; i < N; ++i) {
                const PhaseController& c = ctrls[i];
                *controller_trace << t << "," << net_.nodes[agent_specs_[i].node].id << ","
                                  << c.displayed_phase() << "," << mode_name(c.mode()) << ","
                                  << c.phase_elapsed_s() << "\n";
            }
        }
        if (metrics_csv) {
            for (int i = 0; i < N; ++i) {
                const bool report = cfg_.algorithm == "fixed_time"
                                        ? (ctrls[i].mode() == SignalMode::Green &&
                                           ctrls[i].phase_elapsed_s() == 0)
                                        : static_cast<bool>(decided[i]);
                if (!report) continue;
                const NodeFrame& nf = frame.nodes[i];
                *metrics_csv << t << "," << net_.nodes[nf.node].id << "," << nf.queue_veh << ","
                             << fmt(nf.delay_avg_s) << "," << fmt(nf.speed_fps) << ","
                             << nf.stops_cum << "," << fmt(tick_rewards[i]) << "\n";
            }
            double reward_sum = 0.0;
            for (double r : tick_rewards) reward_sum += r;
            *metrics_csv << t << ",NET," << frame.total_queued << "," << fmt(frame.net_delay_avg_s)
                         << "," << fmt(frame.mean_speed_fps) << "," << frame.stops_cum << ","
                         << fmt(reward_sum) << "\n";
        }

        for (int i = 0; i < N; ++i) ctrls[i].finish_tick();
        log.frames.push_back(std::move(frame));
    }

    if (learner_ && train && pending) {
        std::vector<Matrix> obs_now(N);
        for (int i = 0; i < N; ++i) {
            obs_now[i] = sim.observe(agent_specs_[i].node, ctrls[i].displayed_phase());
        }
        pending->obs_next = std::move(obs_now);
        pending->reward = reward_window;
        pending->done = true;  // episode boundary: no bootstrap past it
        buffer_->push(std::move(*pending));
        insert_since_train_ += 1;
    }

    for (int node : net_.signalized) {
        log.queued_time_signalized_s += sim.queued_time_at(node);
        log.served_signalized += sim.served_at(node);
    }
    log.stops_total = sim.stops_total();
    log.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    return log;
}

std::vector<EpisodeLog> Experiment::train() {
    namespace fs = std::filesystem;
    fs::create_directories(cfg_.out_dir);
    std::ofstream train_log(fs::path(cfg_.out_dir) / "training_log.csv");
    train_log << "episode,agent,avg_reward,critic_loss,actor_grad_norm,epsilon,sigma\n";

    std::vector<EpisodeLog> logs;
    std::vector<double> curve;
    for (int e = 0; e < cfg_.episodes; ++e) {
        std::ofstream trace, ktrace;
        if (cfg_.controller_trace) {
            trace.open(fs::path(cfg_.out_dir) / ("controller_trace_ep" + std::to_string(e) + ".csv"));
        }
        if (cfg_.knowledge_trace) {
            ktrace.open(fs::path(cfg_.out_dir) / ("knowledge_trace_ep" + std::to_string(e) + ".csv"));
        }
        EpisodeLog log = run_episode(derive_seed(cfg_.seed, 100 + e), e, learner_ != nullptr,
                                     nullptr, cfg_.controller_trace ? &trace : nullptr,
                                     cfg_.knowledge_trace ? &ktrace : nullptr);
        const double mean_steps = std::max(1, log.train_steps);
        for (int i = 0; i < log.agent_count; ++i) {
            double agent_total = 0.0;
            for (const auto& [t, r] : log.rewards[i]) agent_total += r;
            train_log << e << "," << net_.nodes[agent_specs_[i].node].id << ","
                      << fmt(agent_total / log.horizon) << ","
                      << fmt(log.critic_loss_sum / (mean_steps * log.agent_count)) << ","
                      << fmt(log.actor_grad_norm_sum / (mean_steps * log.agent_count)) << ","
                      << fmt(learner_ ? learner_->epsilon() : 0.0) << ","
                      << fmt(learner_ ? learner_->sigma() : 0.0) << "\n";
        }
        curve.push_back(aggregate_reward(log));
        logs.push_back(std::move(log));
    }

    std::ofstream curve_csv(fs::path(cfg_.out_dir) / "reward_curve.csv");
    curve_csv << "episode,avg_reward,smoothed\n";
    for (std::size_t e = 0; e < curve.size(); ++e) {
        // trailing moving average, window 5
        double s = 0.0;
        int n = 0;
        for (std::size_t w = (e >= 4 ? e - 4 : 0); w <= e; ++w, ++n) s += curve[w];
        curve_csv << e << "," << fmt(curve[e]) << "," << fmt(s / n) << "\n";
    }

    if (learner_) save_checkpoint_dir((fs::path(cfg_.out_dir) / "checkpoint").string());
    return logs;
}

SummaryTable Experiment::evaluate(int n_episodes, const std::string& metrics_prefix) {
    namespace fs = std::filesystem;
    std::vector<EpisodeLog> logs;
    for (int e = 0; e < n_episodes; ++e) {
        std::ofstream metrics, trace;
        std::ostream* metrics_ptr = nullptr;
        if (!metrics_prefix.empty()) {
            const fs::path parent = fs::path(metrics_prefix).parent_path();
            if (!parent.empty()) fs::create_directories(parent);
            metrics.open(metrics_prefix + "metrics_ep" + std::to_string(e) + ".csv");
            metrics_ptr = &metrics;
        }
        if (cfg_.controller_trace && !metrics_prefix.empty()) {
            trace.open(metrics_prefix + "controller_trace_ep" + std::to_string(e) + ".csv");
        }
        // evaluation seed stream is disjoint from training episodes; the same
        // evaluation episode shares its seed across algorithms
        logs.push_back(run_episode(derive_seed(cfg_.seed, 1000000 + e), e, false, metrics_ptr,
                                   cfg_.controller_trace && !metrics_prefix.empty() ? &trace
                                                                                    : nullptr));
    }

    auto mean_over_episodes = [&](auto&& per_episode) {
        double s = 0.0;
        for (const EpisodeLog& log : logs) s += per_episode(log);
        return s / logs.size();
    };
    auto queue_between = [&](const EpisodeLog& log, int lo, int hi) {
        double s = 0.0;
        for (int t = lo; t < hi; ++t) {
            double spatial = 0.0;
            for (const NodeFrame& nf : log.frames[t].nodes) spatial += nf.queue_veh;
            s += spatial / log.frames[t].nodes.size();
        }
        return s / std::max(1, hi - lo);
    };

    SummaryTable table;
    table.rows.emplace_back("avg_reward", mean_over_episodes(aggregate_reward));
    table.rows.emplace_back("avg_queue_veh", mean_over_episodes([&](const EpisodeLog& log) {
        return queue_between(log, 0, log.horizon);
    }));
    table.rows.emplace_back("avg_intersection_delay_s",
                            mean_over_episodes([&](const EpisodeLog& log) {
                                return log.served_signalized
                                           ? log.queued_time_signalized_s / log.served_signalized
                                           : 0.0;
                            }));
    table.rows.emplace_back("avg_vehicle_speed_fps", mean_over_episodes([&](const EpisodeLog& log) {
        double s = 0.0;
        for (const MetricsFrame& f : log.frames) s += f.mean_speed_fps;
        return s / log.frames.size();
    }));
    table.rows.emplace_back("avg_stops_per_s", mean_over_episodes([&](const EpisodeLog& log) {
        return static_cast<double>(log.stops_total) / log.horizon;
    }));

    const auto periods = demand_periods();
    if (periods.size() > 1) {
        for (std::size_t p = 0; p < periods.size(); ++p) {
            table.rows.emplace_back("avg_queue_veh_period_" + std::to_string(p + 1),
                                    mean_over_episodes([&](const EpisodeLog& log) {
                                        return queue_between(log, periods[p].first,
                                                             periods[p].second);
                                    }));
        }
    }
    return table;
}

void Experiment::save_checkpoint_dir(const std::string& dir) const {
    if (!learner_) throw UsageError("checkpoint: nothing to save for a non-learning policy");
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["manifest"] = kManifestSchema;
    manifest["algorithm"] = cfg_.algorithm;
    manifest["agents"] = nlohmann::json::array();
    for (int i = 0; i < learner_->agent_count(); ++i) {
        std::array<char, 32> name{};
        std::snprintf(name.data(), name.size(), "agent_%03d.ckpt", i);
        save_checkpoint((fs::path(dir) / name.data()).string(), learner_->parameters(i));
        manifest["agents"].push_back({{"node", net_.nodes[agent_specs_[i].node].id},
                                      {"file", name.data()},
                                      {"obs_dim", agent_specs_[i].obs_dim},
                                      {"action_dim", agent_specs_[i].action_dim}});
    }
    std::ofstream os(fs::path(dir) / "manifest.json");
    os << manifest.dump(2) << "\n";
}

void Experiment::load_checkpoint_manifest(const std::string& manifest_path) {
    if (!learner_) throw UsageError("checkpoint: non-learning policy takes no checkpoint");
    std::ifstream is(manifest_path);
    if (!is) throw ConfigError("checkpoint: cannot open manifest '" + manifest_path + "'");
    nlohmann::json manifest;
    try {
        is >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint manifest: ") + e.what());
    }
    if (manifest.value("manifest", "") != kManifestSchema) {
        throw VersionError("checkpoint manifest: unknown version '" +
                           manifest.value("manifest", "") + "'");
    }
    if (manifest.value("algorithm", "") != cfg_.algorithm) {
        throw VersionError("checkpoint manifest: algorithm '" +
                           manifest.value("algorithm", "") + "' does not match config '" +
                           cfg_.algorithm + "'");
    }
    const auto& agents = manifest.at("agents");
    if (agents.size() != agent_specs_.size()) {
        throw VersionError("checkpoint manifest: agent count mismatch");
    }
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(manifest_path).parent_path();
    for (std::size_t i = 0; i < agents.size(); ++i) {
        if (agents[i].at("node").get<std::string>() != net_.nodes[agent_specs_[i].node].id) {
            throw VersionError("checkpoint manifest: agent order/node mismatch");
        }
        learner_->load_parameters(static_cast<int>(i),
                                  load_checkpoint((dir / agents[i].at("file").get<std::string>()).string()));
    }
}

} // namespace ksddpg
