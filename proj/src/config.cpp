#include "ksddpg/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ksddpg/errors.hpp"

namespace ksddpg {

namespace {

const std::set<std::string> kAlgorithms = {"ksddpg", "maddpg", "ddpg",
                                           "dqn",    "fixed_time", "max_pressure"};

double to_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("override " + key + ": '" + v + "' is not a number");
    }
}

} // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return from_json_text(ss.str());
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config: invalid JSON: ") + e.what());
    }
    if (j.value("config", "") != kConfigSchema) {
        throw VersionError("config: expected '" + std::string(kConfigSchema) + "', got '" +
                           j.value("config", "") + "'");
    }
    ExperimentConfig c;
    try {
        if (j.contains("network")) {
            const auto& jn = j["network"];
            if (jn.contains("file")) {
                c.use_grid = false;
                c.network_file = jn["file"].get<std::string>();
            } else if (jn.contains("grid")) {
                const auto& jg = jn["grid"];
                c.grid_rows = jg.value("rows", 2);
                c.grid_cols = jg.value("cols", 2);
                c.grid.link_length_ft = jg.value("link_length_ft", c.grid.link_length_ft);
                c.grid.lanes = jg.value("lanes", c.grid.lanes);
                c.grid.free_flow_speed_fps =
                    jg.value("free_flow_speed_fps", c.grid.free_flow_speed_fps);
                c.grid.saturation_flow_vps =
                    jg.value("saturation_flow_vps", c.grid.saturation_flow_vps);
            } else {
                throw ConfigError("config: network needs 'grid' or 'file'");
            }
        }
        if (j.contains("demand")) {
            const auto& jd = j["demand"];
            c.demand_preset = jd.value("preset", "");
            c.preset_rate_veh_h = jd.value("rate_veh_h", 0.0);
            c.preset_main_veh_h = jd.value("main_veh_h", 0.0);
            c.preset_cross_veh_h = jd.value("cross_veh_h", 0.0);
            c.preset_start_s = jd.value("start_s", 0.0);
            c.preset_end_s = jd.value("end_s", -1.0);
            if (jd.contains("flows")) {
                for (const auto& jf : jd["flows"]) {
                    c.flows.push_back({jf.at("from").get<std::string>(),
                                       jf.at("to").get<std::string>(),
                                       jf.at("rate_veh_h").get<double>(),
                                       jf.value("start_s", 0.0),
                                       jf.value("end_s", -1.0)});
                }
            }
        }
        c.algorithm = j.value("algorithm", c.algorithm);
        c.episodes = j.value("episodes", c.episodes);
        c.horizon_s = j.value("horizon_s", c.horizon_s);
        c.seed = j.value("seed", c.seed);
        c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
        c.checkpoint = j.value("checkpoint", c.checkpoint);
        c.out_dir = j.value("out_dir", c.out_dir);
        c.controller_trace = j.value("controller_trace", c.controller_trace);
        c.knowledge_trace = j.value("knowledge_trace", c.knowledge_trace);
        c.vc_threshold = j.value("vc_threshold", c.vc_threshold);
        c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
        c.update_every = j.value("update_every", c.update_every);
        c.train_rounds = j.value("train_rounds", c.train_rounds);
        if (j.value("volume_mode", "queued_plus_running") == std::string("queued_only")) {
            c.volume_mode = VolumeMode::QueuedOnly;
        }
        if (j.contains("hyper")) {
            const auto& jh = j["hyper"];
            auto& h = c.hyper;
            h.gamma = jh.value("gamma", h.gamma);
            h.tau = jh.value("tau", h.tau);
            h.critic_lr = jh.value("critic_lr", h.critic_lr);
            h.actor_lr = jh.value("actor_lr", h.actor_lr);
            h.batch_size = jh.value("batch_size", h.batch_size);
            h.knowledge_dim = jh.value("knowledge_dim", h.knowledge_dim);
            h.embed_dim = jh.value("embed_dim", h.embed_dim);
            h.actor_hidden = jh.value("actor_hidden", h.actor_hidden);
            if (jh.contains("critic_hidden")) {
                h.critic_hidden = jh["critic_hidden"].get<std::vector<std::size_t>>();
            }
            h.sigma_start = jh.value("sigma_start", h.sigma_start);
            h.sigma_end = jh.value("sigma_end", h.sigma_end);
            h.epsilon_start = jh.value("epsilon_start", h.epsilon_start);
            h.epsilon_end = jh.value("epsilon_end", h.epsilon_end);
            h.anneal_fraction = jh.value("anneal_fraction", h.anneal_fraction);
        }
        if (j.contains("controller")) {
            const auto& jc = j["controller"];
            auto& cc = c.controller;
            cc.green_extension_s = jc.value("green_extension_s", cc.green_extension_s);
            cc.min_green_through_s = jc.value("min_green_through_s", cc.min_green_through_s);
            cc.max_green_through_s = jc.value("max_green_through_s", cc.max_green_through_s);
            cc.min_green_left_s = jc.value("min_green_left_s", cc.min_green_left_s);
            cc.max_green_left_s = jc.value("max_green_left_s", cc.max_green_left_s);
            cc.yellow_s = jc.value("yellow_s", cc.yellow_s);
            cc.red_clearance_s = jc.value("red_clearance_s", cc.red_clearance_s);
            cc.cycle_min_s = jc.value("cycle_min_s", cc.cycle_min_s);
            cc.cycle_max_s = jc.value("cycle_max_s", cc.cycle_max_s);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config: schema violation: ") + e.what());
    }
    c.validate();
    return c;
}

void ExperimentConfig::apply_override(const std::string& key, const std::string& value) {
    auto as_int = [&] { return static_cast<int>(to_double(value, key)); };
    if (key == "episodes") episodes = as_int();
    else if (key == "horizon_s") horizon_s = as_int();
    else if (key == "seed") seed = static_cast<std::uint64_t>(to_double(value, key));
    else if (key == "eval_episodes") eval_episodes = as_int();
    else if (key == "algorithm") algorithm = value;
    else if (key == "out_dir") out_dir = value;
    else if (key == "checkpoint") checkpoint = value;
    else if (key == "update_every") update_every = as_int();
    else if (key == "train_rounds") train_rounds = as_int();
    else if (key == "buffer_capacity") buffer_capacity = static_cast<std::size_t>(to_double(value, key));
    else if (key == "controller_trace") controller_trace = value == "true" || value == "1";
    else if (key == "knowledge_trace") knowledge_trace = value == "true" || value == "1";
    else if (key == "vc_threshold") vc_threshold = to_double(value, key);
    else if (key == "hyper.gamma") hyper.gamma = to_double(value, key);
    else if (key == "hyper.tau") hyper.tau = to_double(value, key);
    else if (key == "hyper.critic_lr") hyper.critic_lr = to_double(value, key);
    else if (key == "hyper.actor_lr") hyper.actor_lr = to_double(value, key);
    else if (key == "hyper.batch_size") hyper.batch_size = static_cast<std::size_t>(as_int());
    else if (key == "hyper.knowledge_dim") hyper.knowledge_dim = static_cast<std::size_t>(as_int());
    else if (key == "hyper.embed_dim") hyper.embed_dim = static_cast<std::size_t>(as_int());
    else if (key == "hyper.actor_hidden") hyper.actor_hidden = static_cast<std::size_t>(as_int());
    else if (key == "hyper.sigma_start") hyper.sigma_start = to_double(value, key);
    else if (key == "hyper.sigma_end") hyper.sigma_end = to_double(value, key);
    else if (key == "hyper.epsilon_start") hyper.epsilon_start = to_double(value, key);
    else if (key == "hyper.epsilon_end") hyper.epsilon_end = to_double(value, key);
    else if (key == "hyper.anneal_fraction") hyper.anneal_fraction = to_double(value, key);
    else if (key == "controller.min_green_through_s") controller.min_green_through_s = as_int();
    else if (key == "controller.max_green_through_s") controller.max_green_through_s = as_int();
    else throw ConfigError("unknown override key '" + key + "'");
    validate();
}

RoadNetwork ExperimentConfig::build_network() const {
    if (use_grid) return build_grid(grid_rows, grid_cols, grid);
    return load_network(network_file);
}

DemandSpec ExperimentConfig::build_demand(const RoadNetwork& net) const {
    DemandSpec d;
    const double end_default = preset_end_s >= 0.0 ? preset_end_s : horizon_s;
    auto add = [&](const std::string& from, const std::string& to, double rate, double s,
                   double e) {
        d.flows.push_back({net.node_of(from), net.node_of(to), rate, s, e});
    };
    if (demand_preset == "uniform" || demand_preset == "directional") {
        if (!use_grid) {
            throw ConfigError("demand preset '" + demand_preset + "' needs a grid network");
        }
        if (demand_preset == "uniform") {
            const int streams = 2 * (grid_rows + grid_cols);
            const double rate = preset_rate_veh_h / streams;
            for (int r = 0; r < grid_rows; ++r) {
                add("west_" + std::to_string(r), "east_" + std::to_string(r), rate,
                    preset_start_s, end_default);
                add("east_" + std::to_string(r), "west_" + std::to_string(r), rate,
                    preset_start_s, end_default);
            }
            for (int c = 0; c < grid_cols; ++c) {
                add("north_" + std::to_string(c), "south_" + std::to_string(c), rate,
                    preset_start_s, end_default);
                add("south_" + std::to_string(c), "north_" + std::to_string(c), rate,
                    preset_start_s, end_default);
            }
        } else {
            // per-stream rates: every eastbound row carries main_veh_h, every
            // southbound column carries cross_veh_h
            for (int r = 0; r < grid_rows; ++r) {
                add("west_" + std::to_string(r), "east_" + std::to_string(r), preset_main_veh_h,
                    preset_start_s, end_default);
            }
            for (int c = 0; c < grid_cols; ++c) {
                add("north_" + std::to_string(c), "south_" + std::to_string(c), preset_cross_veh_h,
                    preset_start_s, end_default);
            }
        }
    } else if (!demand_preset.empty()) {
        throw ConfigError("unknown demand preset '" + demand_preset + "'");
    }
    for (const FlowSpec& f : flows) {
        add(f.from, f.to, f.rate_veh_h, f.start_s, f.end_s >= 0.0 ? f.end_s : horizon_s);
    }
    d.validate(net);
    return d;
}

void ExperimentConfig::validate() const {
    if (!kAlgorithms.count(algorithm)) {
        throw ConfigError("config: unknown algorithm '" + algorithm + "'");
    }
    if (episodes < 1 || horizon_s < 1) {
        throw ConfigError("config: episodes and horizon_s must be >= 1");
    }
    if (eval_episodes < 1) throw ConfigError("config: eval_episodes must be >= 1");
    if (update_every < 1 || train_rounds < 1) {
        throw ConfigError("config: update_every and train_rounds must be >= 1");
    }
    if (use_grid && (grid_rows < 2 || grid_cols < 2)) {
        throw ConfigError("config: grid needs rows, cols >= 2");
    }
    if (!use_grid && network_file.empty()) {
        throw ConfigError("config: network file missing");
    }
    controller.validate();
}

} // namespace ksddpg
