// Command-line front end: train / eval / compare over experiment configs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ksddpg/errors.hpp"
#include "ksddpg/experiment.hpp"

namespace fs = std::filesystem;
using namespace ksddpg;

namespace {

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    if (!fs::exists(path)) {
        throw ConfigError("config file not found: " + path);
    }
    ExperimentConfig cfg = ExperimentConfig::from_file(path);
    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        }
        cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

void write_summary(std::ostream& os, const std::string& algorithm, const SummaryTable& table) {
    for (const auto& [metric, value] : table.rows) {
        os << algorithm << "," << metric << "," << value << "\n";
    }
}

int run_train(const std::string& config_path, const std::vector<std::string>& overrides) {
    Experiment exp(load_config(config_path, overrides));
    const auto logs = exp.train();
    double last = logs.empty() ? 0.0 : aggregate_reward(logs.back());
    std::cout << "trained " << logs.size() << " episode(s), final avg reward " << last << "\n";
    std::cout << "outputs in " << exp.config().out_dir << "\n";
    return 0;
}

int run_eval(const std::string& config_path, const std::vector<std::string>& overrides,
             std::string checkpoint, int episodes) {
    ExperimentConfig cfg = load_config(config_path, overrides);
    if (episodes > 0) cfg.eval_episodes = episodes;
    Experiment exp(cfg);
    if (checkpoint.empty()) checkpoint = cfg.checkpoint;
    if (exp.learner()) {
        if (checkpoint.empty()) {
            throw ConfigError("eval: learning algorithm '" + cfg.algorithm +
                              "' needs --checkpoint");
        }
        exp.load_checkpoint_manifest(checkpoint);
    }
    fs::create_directories(cfg.out_dir);
    SummaryTable table = exp.evaluate(cfg.eval_episodes, cfg.out_dir + "/");
    std::ofstream os(fs::path(cfg.out_dir) / "summary.csv");
    os << "algorithm,metric,value\n";
    write_summary(os, cfg.algorithm, table);
    write_summary(std::cout, cfg.algorithm, table);
    return 0;
}

int run_compare(const std::vector<std::string>& config_paths,
                const std::vector<std::string>& overrides, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream os(fs::path(out_dir) / "compare.csv");
    os << "algorithm,metric,value\n";
    for (const std::string& path : config_paths) {
        ExperimentConfig cfg = load_config(path, overrides);
        Experiment exp(cfg);
        if (exp.learner()) {
            if (cfg.checkpoint.empty()) {
                throw ConfigError("compare: config '" + path + "' needs a checkpoint entry");
            }
            exp.load_checkpoint_manifest(cfg.checkpoint);
        }
        SummaryTable table = exp.evaluate(cfg.eval_episodes);
        write_summary(os, cfg.algorithm, table);
        write_summary(std::cout, cfg.algorithm, table);
    }
    std::cout << "comparison written to " << (fs::path(out_dir) / "compare.csv").string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent traffic signal control lab"};
    app.require_subcommand(1);

    std::string config_path, checkpoint, out_dir = "out";
    std::vector<std::string> overrides, config_paths;
    int episodes = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
        cmd->add_option("--set", overrides, "override config entries, key=value");
        cmd->add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
            seed_set = true;
        });
        cmd->add_option("--out", out_dir, "output directory override")
            ->each([&](const std::string& v) { overrides.push_back("out_dir=" + v); });
    };

    CLI::App* train = app.add_subcommand("train", "train a control policy");
    add_common(train);
    train->add_option("--episodes", episodes, "episode count override");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a policy greedily");
    add_common(eval);
    eval->add_option("--checkpoint", checkpoint, "checkpoint manifest path");
    eval->add_option("--episodes", episodes, "evaluation episode count");

    CLI::App* compare = app.add_subcommand("compare", "evaluate several configs side by side");
    compare->add_option("--configs", config_paths, "experiment configs")->required();
    compare->add_option("--set", overrides, "override config entries, key=value");
    compare->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 2 : 0;
    }

    try {
        if (seed_set) overrides.push_back("seed=" + std::to_string(seed));
        if (app.got_subcommand(train)) {
            if (episodes > 0) overrides.push_back("episodes=" + std::to_string(episodes));
            return run_train(config_path, overrides);
        }
        if (app.got_subcommand(eval)) {
            return run_eval(config_path, overrides, checkpoint, episodes);
        }
        return run_compare(config_paths, overrides, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
