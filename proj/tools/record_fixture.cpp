// Records replayable backend scripts by running the pipeline against the
// simulated arithmetic world, and copies the run's outputs as golden files.
//
//   record_fixture --out tests/data/e2e --corpus data/toy_corpus.jsonl

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "synthrl/synthrl.hpp"
#include "synthrl/testing/simulated_world.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_st("record"));
    CLI::App app{"record scripted backend fixtures from the simulated world"};
    std::string out, corpus, task = "gsm8k";
    std::size_t n_initial = 20, m_train = 10, votes = 5, L = 16;
    std::uint64_t seed = 11, world_seed = 7;
    app.add_option("--out", out)->required();
    app.add_option("--corpus", corpus)->required();
    app.add_option("--task", task);
    app.add_option("--n-initial", n_initial);
    app.add_option("--m-train", m_train);
    app.add_option("--votes", votes);
    app.add_option("--pass-samples", L);
    app.add_option("--seed", seed);
    app.add_option("--world-seed", world_seed);
    CLI11_PARSE(app, argc, argv);

    fs::path dir = fs::absolute(out);
    fs::create_directories(dir);
    auto corpus_rel = fs::relative(fs::absolute(corpus), dir).generic_string();

    nlohmann::ordered_json cfg;
    cfg["n_initial"] = n_initial;
    cfg["m_train"] = m_train;
    cfg["vote_count"] = votes;
    cfg["pass_samples"] = L;
    cfg["retrieval_top_k"] = 5;
    cfg["retrieval_pool_size"] = 40;
    cfg["seed"] = seed;
    cfg["corpus"] = corpus_rel;
    cfg["instructor"] = {{"kind", "scripted"}, {"script", "instructor.script.jsonl"}, {"max_in_flight", 4}};
    cfg["base"] = {{"kind", "scripted"}, {"script", "base.script.jsonl"}, {"max_in_flight", 4}};
    cfg["embedding"] = {{"kind", "scripted"}, {"script", "embedding.script.jsonl"}};
    synthrl::write_text(dir / "config.json", cfg.dump(2) + "\n");

    auto config = synthrl::load_config(dir / "config.json");
    auto def = synthrl::validate_task(synthrl::load_task(task));

    synthrl::testing::WorldOptions wo;
    wo.format = def.answer_format;
    wo.seed = world_seed;
    synthrl::testing::World world(wo);

    auto instructor = std::make_shared<synthrl::ScriptTable>();
    auto base = std::make_shared<synthrl::ScriptTable>();
    auto embedding = std::make_shared<synthrl::ScriptTable>();
    synthrl::Backends backends;
    backends.instructor = std::make_shared<synthrl::RecordingBackend>(world.instructor(), instructor);
    backends.base = std::make_shared<synthrl::RecordingBackend>(world.base(), base);
    backends.embedding =
        std::make_shared<synthrl::RecordingBackend>(synthrl::Responder{}, embedding, world.embedder());

    auto run_dir = dir / "recorded_run";
    fs::remove_all(run_dir);
    synthrl::Pipeline pipeline(config, def, run_dir, backends);
    pipeline.run(false);

    instructor->save(dir / "instructor.script.jsonl");
    base->save(dir / "base.script.jsonl");
    embedding->save(dir / "embedding.script.jsonl");

    auto golden = dir / "golden";
    fs::remove_all(golden);
    for (const char* rel : {"export/train.jsonl", "export/reward_spec.json", "export/trainer_config.txt",
                            "select/selected.jsonl", "adapt/synth.jsonl", "report/report.json"}) {
        fs::create_directories((golden / rel).parent_path());
        fs::copy_file(run_dir / rel, golden / rel, fs::copy_options::overwrite_existing);
    }
    fs::remove_all(run_dir);
    std::cerr << "wrote fixture to " << dir << "\n";
    return 0;
}
