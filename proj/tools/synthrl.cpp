// synthrl command-line driver.
//
// Exit status: 0 success, 1 usage or configuration error, 2 stage failure,
// 3 generation budget exhausted.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "synthrl/synthrl.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kStageFailure = 2, kBudget = 3 };

struct Options {
    std::string config_path;
    std::string task;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string stage;
    bool resume = false;
    std::string test_set;
    std::string log_level = "info";
};

void add_common(CLI::App* cmd, Options& o, bool needs_task = true) {
    cmd->add_option("--config", o.config_path, "pipeline config (JSON); defaults apply when omitted");
    auto* t = cmd->add_option("--task", o.task, "task definition file or preset name");
    if (needs_task) t->required();
    cmd->add_option("--out", o.out_dir, "output directory")->required();
    cmd->add_option("--seed", o.seed, "override the config seed");
    cmd->add_option("--log-level", o.log_level, "trace|debug|info|warn|error|off");
}

int execute(const Options& o, std::optional<synthrl::Stage> single) {
    using namespace synthrl;
    PipelineConfig config;
    TaskDefinition task;
    try {
        config = o.config_path.empty() ? PipelineConfig{} : load_config(o.config_path);
        if (o.seed) config.seed = *o.seed;
        for (const auto& w : config_warnings(config)) spdlog::warn("config: {}", w);
        std::vector<std::string> task_warnings;
        task = validate_task(load_task(o.task), &task_warnings);
        for (const auto& w : task_warnings) spdlog::warn("task: {}", w);
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return kUsage;
    } catch (const TaskError& e) {
        spdlog::error("task: {}", e.what());
        return kUsage;
    }

    Pipeline pipeline(config, task, o.out_dir);
    try {
        if (single) {
            std::optional<std::filesystem::path> test_set;
            if (!o.test_set.empty()) test_set = o.test_set;
            pipeline.run_stage(*single, test_set);
        } else {
            pipeline.run(o.resume);
        }
    } catch (const BudgetExhausted& e) {
        spdlog::error("{}", e.what());
        return kBudget;
    } catch (const StageFailure& e) {
        spdlog::error("{}", e.what());
        return kStageFailure;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kStageFailure;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_st("synthrl"));
    spdlog::set_pattern("[%l] %v");

    CLI::App app{"Task-definition-driven synthetic data pipeline for RL fine-tuning"};
    app.require_subcommand(1);
    Options o;

    auto* run = app.add_subcommand("run", "run every stage: corpus, generate, adapt, score, select, export, report");
    add_common(run, o);
    run->add_flag("--resume", o.resume, "skip stages whose manifests are complete for this config");
    run->add_option("--stage", o.stage, "run only this stage");

    auto* corpus = app.add_subcommand("corpus", "corpus operations");
    auto* corpus_build = corpus->add_subcommand("build", "index the corpus and retrieve passages for the task");
    corpus->require_subcommand(1);
    add_common(corpus_build, o);

    struct StageCmd {
        const char* name;
        const char* help;
        synthrl::Stage stage;
        CLI::App* cmd = nullptr;
    };
    StageCmd stages[] = {
        {"generate", "synthesize and verify the initial sample set", synthrl::Stage::generate},
        {"adapt", "classify by base-model solvability and rewrite harder/easier", synthrl::Stage::adapt},
        {"score", "measure base-model pass counts", synthrl::Stage::score},
        {"select", "rank by pass-rate score and keep the top m_train", synthrl::Stage::select},
        {"export", "write trainer-ready records, reward spec and trainer config", synthrl::Stage::export_},
        {"report", "difficulty, length and similarity diagnostics", synthrl::Stage::report},
        {"eval", "greedy accuracy of the base backend on a labeled test set", synthrl::Stage::eval},
    };
    for (auto& s : stages) {
        s.cmd = app.add_subcommand(s.name, s.help);
        add_common(s.cmd, o);
    }
    stages[6].cmd->add_option("--test-set", o.test_set, "JSONL records with input and answer (or output)")->required();

    auto* presets = app.add_subcommand("presets", "list built-in task presets, or print one as JSON");
    std::string preset_name;
    presets->add_option("name", preset_name);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    auto level = spdlog::level::from_str(o.log_level);
    spdlog::set_level(level);

    if (presets->parsed()) {
        if (preset_name.empty()) {
            for (auto n : synthrl::presets::names()) std::cout << n << '\n';
            return kOk;
        }
        auto def = synthrl::presets::find(preset_name);
        if (!def) {
            spdlog::error("unknown preset '{}'", preset_name);
            return kUsage;
        }
        std::cout << synthrl::to_json(*def).dump(2) << '\n';
        return kOk;
    }
    if (corpus_build->parsed()) return execute(o, synthrl::Stage::corpus);
    for (const auto& s : stages)
        if (s.cmd->parsed()) return execute(o, s.stage);
    if (!o.stage.empty()) {
        auto st = synthrl::parse_stage(o.stage);
        if (!st || *st == synthrl::Stage::run) {
            spdlog::error("unknown stage '{}'", o.stage);
            return kUsage;
        }
        if (*st == synthrl::Stage::eval) {
            spdlog::error("use the eval subcommand, which takes --test-set");
            return kUsage;
        }
        return execute(o, *st);
    }
    return execute(o, std::nullopt);
}
