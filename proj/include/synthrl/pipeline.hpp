#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "synthrl/http_backend.hpp"
#include "synthrl/report.hpp"
#include "synthrl/retrieval.hpp"

namespace synthrl {

namespace fs = std::filesystem;

enum class Stage { corpus, generate, adapt, score, select, export_, report, eval, run };

inline std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::corpus: return "corpus";
        case Stage::generate: return "generate";
        case Stage::adapt: return "adapt";
        case Stage::score: return "score";
        case Stage::select: return "select";
        case Stage::export_: return "export";
        case Stage::report: return "report";
        case Stage::eval: return "eval";
        case Stage::run: return "run";
    }
    return "run";
}

inline std::optional<Stage> parse_stage(std::string_view s) {
    for (auto st : {Stage::corpus, Stage::generate, Stage::adapt, Stage::score, Stage::select, Stage::export_,
                    Stage::report, Stage::eval, Stage::run})
        if (to_string(st) == s) return st;
    return std::nullopt;
}

/// Stages executed by a full run, in order.
inline constexpr Stage kRunStages[] = {Stage::corpus, Stage::generate, Stage::adapt,  Stage::score,
                                       Stage::select, Stage::export_,  Stage::report};

struct StageManifest {
    Stage stage = Stage::run;
    std::string status = "ok";  // ok | failed | budget_exhausted
    std::vector<std::string> input_paths;   // relative to out_dir
    std::vector<std::string> output_paths;  // relative to out_dir
    std::string config_hash;
    std::uint64_t seed = 0;
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    std::vector<std::string> warnings;
    nlohmann::ordered_json details = nlohmann::ordered_json::object();
    std::string error;
};

inline nlohmann::ordered_json to_json(const StageManifest& m) {
    nlohmann::ordered_json j;
    j["stage"] = std::string(to_string(m.stage));
    j["status"] = m.status;
    j["input_paths"] = m.input_paths;
    j["output_paths"] = m.output_paths;
    j["config_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["counts"] = m.counts;
    j["warnings"] = m.warnings;
    j["details"] = m.details;
    if (!m.error.empty()) j["error"] = m.error;
    return j;
}

inline StageManifest manifest_from_json(const nlohmann::json& j) {
    StageManifest m;
    auto st = parse_stage(j.at("stage").get<std::string>());
    if (!st) throw PersistenceError("manifest names unknown stage");
    m.stage = *st;
    m.status = j.at("status").get<std::string>();
    m.input_paths = j.at("input_paths").get<std::vector<std::string>>();
    m.output_paths = j.at("output_paths").get<std::vector<std::string>>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.counts = nlohmann::ordered_json::parse(j.at("counts").dump());
    m.warnings = j.value("warnings", std::vector<std::string>{});
    if (j.contains("details")) m.details = nlohmann::ordered_json::parse(j.at("details").dump());
    m.error = j.value("error", std::string());
    return m;
}

/// A stage that could not complete; maps to exit status 2.
class StageFailure : public std::runtime_error {
public:
    StageFailure(Stage s, const std::string& what) : std::runtime_error(std::string(to_string(s)) + ": " + what), stage(s) {}
    Stage stage;
};

inline nlohmann::ordered_json to_json(const Passage& p) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["source"] = std::string(to_string(p.source));
    j["text"] = p.text;
    return j;
}

inline Passage passage_from_json(const nlohmann::json& j) {
    Passage p;
    p.id = j.at("id").get<std::string>();
    auto src = parse_passage_source(j.at("source").get<std::string>());
    if (!src) throw std::invalid_argument("unknown passage source");
    p.source = *src;
    p.text = j.at("text").get<std::string>();
    p.token_count = text::tokenize(p.text).size();
    return p;
}

/// Backends a pipeline talks to. Unset members are built from the config on first use.
struct Backends {
    std::shared_ptr<Backend> instructor;
    std::shared_ptr<Backend> base;
    std::shared_ptr<Backend> embedding;
};

/// Runs pipeline stages against an output directory. Every stage reads its
/// inputs from earlier stage directories, writes into its own directory, and
/// finishes with a manifest.json, so any stage can be rerun in isolation.
class Pipeline {
public:
    Pipeline(PipelineConfig config, TaskDefinition task, fs::path out_dir, Backends backends = {})
        : config_(std::move(config)),
          task_(std::move(task)),
          out_(std::move(out_dir)),
          backends_(std::move(backends)),
          hash_(config_hash(config_)) {}

    const PipelineConfig& config() const noexcept { return config_; }
    const fs::path& out_dir() const noexcept { return out_; }

    fs::path stage_dir(Stage s) const { return out_ / std::string(to_string(s)); }
    fs::path manifest_path(Stage s) const {
        return s == Stage::run ? out_ / "manifest.json" : stage_dir(s) / "manifest.json";
    }

    std::optional<StageManifest> read_manifest(Stage s) const {
        auto p = manifest_path(s);
        if (!fs::exists(p)) return std::nullopt;
        return manifest_from_json(nlohmann::json::parse(read_text(p)));
    }

    /// A completed manifest whose config hash matches and whose outputs all exist.
    bool is_complete(Stage s) const {
        auto m = read_manifest(s);
        if (!m || m->status != "ok" || m->config_hash != hash_) return false;
        for (const auto& p : m->output_paths)
            if (!fs::exists(out_ / p)) return false;
        return true;
    }

    /// Runs one stage. Failures still leave a manifest with status and error.
    StageManifest run_stage(Stage s, const std::optional<fs::path>& test_set = std::nullopt) {
        write_run_inputs();
        StageManifest m = start(s);
        try {
            switch (s) {
                case Stage::corpus: corpus(m); break;
                case Stage::generate: generate(m); break;
                case Stage::adapt: adapt_stage(m); break;
                case Stage::score: score_stage(m); break;
                case Stage::select: select_stage(m); break;
                case Stage::export_: export_stage(m); break;
                case Stage::report: report_stage(m); break;
                case Stage::eval:
                    if (!test_set) throw StageFailure(s, "eval needs a test set");
                    eval_stage(m, *test_set);
                    break;
                case Stage::run: throw std::invalid_argument("run is not a single stage");
            }
        } catch (BudgetExhausted& e) {
            m.status = "budget_exhausted";
            m.error = e.what();
            finish(m);
            throw;
        } catch (const StageFailure& e) {
            m.status = "failed";
            m.error = e.what();
            finish(m);
            throw;
        } catch (const std::exception& e) {
            m.status = "failed";
            m.error = e.what();
            finish(m);
            throw StageFailure(s, e.what());
        }
        finish(m);
        spdlog::info("stage {} done", to_string(s));
        return m;
    }

    /// Full chain. With `resume`, stages whose manifests are complete are skipped.
    StageManifest run(bool resume) {
        StageManifest run;
        run.stage = Stage::run;
        run.config_hash = hash_;
        run.seed = config_.seed;
        for (auto s : kRunStages) {
            auto rel = rel_path(manifest_path(s));
            if (resume && is_complete(s)) {
                spdlog::info("stage {} already complete, skipping", to_string(s));
                run.output_paths.push_back(rel);
                continue;
            }
            try {
                run_stage(s);
            } catch (...) {
                run.status = "failed";
                run.output_paths.push_back(rel);
                run.error = std::string("stage ") + std::string(to_string(s)) + " failed";
                write_manifest(run);
                throw;
            }
            run.output_paths.push_back(rel);
        }
        write_manifest(run);
        return run;
    }

    Gateway& instructor() { return gateway(instructor_gw_, backends_.instructor, config_.instructor_backend); }
    Gateway& base() { return gateway(base_gw_, backends_.base, config_.base_backend); }
    Gateway* embedder() {
        if (!embed_gw_) {
            if (!config_.embedding_backend && !backends_.embedding) return nullptr;
            auto d = config_.embedding_backend.value_or(PipelineConfig::backend_for(BackendRole::embedding));
            if (!backends_.embedding) backends_.embedding = make_backend(d);
            embed_gw_ = std::make_unique<Gateway>(backends_.embedding, d);
        }
        return embed_gw_.get();
    }

private:
    Gateway& gateway(std::unique_ptr<Gateway>& gw, std::shared_ptr<Backend>& backend, const BackendDescriptor& d) {
        if (!gw) {
            if (!backend) backend = make_backend(d);
            gw = std::make_unique<Gateway>(backend, d);
        }
        return *gw;
    }

    std::string rel_path(const fs::path& p) const { return fs::relative(p, out_).generic_string(); }

    StageManifest start(Stage s) {
        StageManifest m;
        m.stage = s;
        m.config_hash = hash_;
        m.seed = config_.seed;
        fs::create_directories(stage_dir(s));
        spdlog::info("stage {} starting", to_string(s));
        return m;
    }

    void write_manifest(const StageManifest& m) { write_text(manifest_path(m.stage), to_json(m).dump(2) + "\n"); }

    void finish(StageManifest& m) {
        for (const auto& w : m.warnings) spdlog::warn("{}: {}", to_string(m.stage), w);
        write_manifest(m);
    }

    // The resolved config and task, so a run directory is self-describing.
    void write_run_inputs() {
        fs::create_directories(out_);
        write_text(out_ / "config.json", to_json(config_).dump(2) + "\n");
        write_text(out_ / "task.json", to_json(task_).dump(2) + "\n");
    }

    /// Reads an earlier stage's output, insisting its manifest completed.
    fs::path need(Stage producer, const std::string& file, StageManifest& m) {
        auto pm = read_manifest(producer);
        if (!pm || pm->status != "ok")
            throw StageFailure(m.stage, "stage " + std::string(to_string(producer)) + " has not completed in " +
                                            out_.string());
        if (pm->config_hash != hash_)
            m.warnings.push_back("stage " + std::string(to_string(producer)) + " ran with a different config");
        auto p = stage_dir(producer) / file;
        if (!fs::exists(p)) throw StageFailure(m.stage, "missing input " + p.string());
        m.input_paths.push_back(rel_path(p));
        return p;
    }

    fs::path output(StageManifest& m, const std::string& file) {
        auto p = stage_dir(m.stage) / file;
        m.output_paths.push_back(rel_path(p));
        return p;
    }

    void corpus(StageManifest& m) {
        auto retrieved_path = output(m, "retrieved.jsonl");
        auto keywords_path = output(m, "keywords.json");
        std::vector<Passage> retrieved;
        nlohmann::ordered_json kw = nlohmann::ordered_json::array();
        if (!config_.retrieval_enabled) {
            m.warnings.push_back("retrieval disabled; generation runs without passages");
        } else {
            if (config_.corpus.empty()) throw StageFailure(Stage::corpus, "retrieval is enabled but no corpus is configured");
            for (const auto& p : config_.corpus)
                if (!fs::exists(p)) throw StageFailure(Stage::corpus, "corpus file not found: " + p);
            auto hash = corpus_content_hash(config_.corpus);
            auto cache = stage_dir(Stage::corpus) / "index.bin";
            std::optional<CorpusIndex> index = CorpusIndex::load(cache, hash);
            if (!index) {
                auto ing = ingest(config_.corpus);
                for (const auto& d : ing.diagnostics) m.warnings.push_back(d);
                m.counts["malformed_records"] = ing.diagnostics.size();
                ing.index.save(cache, hash);
                index = std::move(ing.index);
            }
            m.output_paths.push_back(rel_path(cache));
            auto keywords = extract_keywords(task_, instructor(), config_.gen_temperature, config_.max_tokens);
            for (const auto& k : keywords.keywords) kw.push_back(k);
            retrieved = retrieve(keywords, *index, config_.retrieval_pool_size);
            m.counts["passages_indexed"] = index->doc_count();
            if (retrieved.empty()) m.warnings.push_back("no passage matched the task keywords");
        }
        write_jsonl(retrieved_path, retrieved, [](const Passage& p) { return to_json(p); });
        write_text(keywords_path, kw.dump(2) + "\n");
        m.counts["keywords"] = kw.size();
        m.counts["retrieved"] = retrieved.size();
    }

    void generate(StageManifest& m) {
        auto passages = read_jsonl(need(Stage::corpus, "retrieved.jsonl", m),
                                   [](const nlohmann::json& j) { return passage_from_json(j); });
        std::optional<Pattern> pattern;
        auto pattern_path = output(m, "pattern.txt");
        if (config_.use_pattern && !task_.demos.empty()) {
            pattern = summarize_pattern(task_.demos, task_, instructor(), config_.gen_temperature, config_.max_tokens);
            write_text(pattern_path, pattern->text);
        } else {
            if (!task_.demos.empty()) m.warnings.push_back("pattern summarization disabled; demos are not shown to the generator");
            write_text(pattern_path, "");
        }
        auto samples_path = output(m, "initial.jsonl");
        auto record_stats = [&](const SynthesisStats& st) {
            m.counts["raw_generations"] = st.raw_generations;
            m.counts["accepted"] = st.accepted;
            nlohmann::ordered_json r = nlohmann::ordered_json::object();
            for (const auto& [k, v] : st.rejections) r[k] = v;
            m.details["rejections"] = r;
        };
        try {
            auto res = synthesize_initial(task_, config_, passages, pattern, instructor());
            record_stats(res.stats);
            save_samples(samples_path, res.samples);
        } catch (const BudgetExhausted& e) {
            record_stats(e.stats());
            auto partial = stage_dir(Stage::generate) / "initial.partial.jsonl";
            save_samples(partial, e.partial());
            m.output_paths.push_back(rel_path(partial));
            throw;
        }
    }

    void adapt_stage(StageManifest& m) {
        auto initial = load_samples(need(Stage::generate, "initial.jsonl", m));
        AdaptResult r;
        if (config_.adaptation_enabled) {
            r = adapt(initial, task_, config_, instructor(), base());
        } else {
            m.warnings.push_back("adaptation disabled; the synthetic set is the initial set");
        }
        std::vector<std::string> dropped;
        auto synth = assemble(initial, r.harder, r.easier, &dropped);
        save_samples(output(m, "solved.jsonl"), r.partition.solved);
        save_samples(output(m, "unsolved.jsonl"), r.partition.unsolved);
        save_samples(output(m, "harder.jsonl"), r.harder);
        save_samples(output(m, "easier.jsonl"), r.easier);
        save_samples(output(m, "synth.jsonl"), synth);
        write_jsonl(output(m, "rejections.jsonl"), r.rejections, [](const RewriteRejection& x) {
            nlohmann::ordered_json j;
            j["parent_id"] = x.parent_id;
            j["direction"] = std::string(to_string(x.direction));
            j["reason"] = std::string(to_string(x.rejection.reason));
            j["detail"] = x.rejection.detail;
            return j;
        });
        m.counts["initial"] = initial.size();
        m.counts["solved"] = r.partition.solved.size();
        m.counts["unsolved"] = r.partition.unsolved.size();
        m.counts["harder"] = r.harder.size();
        m.counts["easier"] = r.easier.size();
        m.counts["rejected"] = r.rejections.size();
        m.counts["dropped_duplicates"] = dropped.size();
        m.counts["synth"] = synth.size();
        nlohmann::ordered_json reasons = nlohmann::ordered_json::object();
        for (const auto& x : r.rejections) {
            auto k = std::string(to_string(x.rejection.reason));
            reasons[k] = reasons.value(k, 0) + 1;
        }
        m.details["rejections"] = reasons;
        m.details["dropped_ids"] = dropped;
    }

    void score_stage(StageManifest& m) {
        auto synth = load_samples(need(Stage::adapt, "synth.jsonl", m));
        if (synth.empty()) throw StageFailure(Stage::score, "synthetic set is empty");
        auto scored = score_samples(synth, base(), task_, config_);
        save_scored(output(m, "scored.jsonl"), scored);
        std::size_t zero = 0, perfect = 0;
        for (const auto& s : scored) {
            if (s.pass_count == 0) ++zero;
            if (s.pass_count == s.pass_samples) ++perfect;
        }
        m.counts["scored"] = scored.size();
        m.counts["zero_pass"] = zero;
        m.counts["perfect_pass"] = perfect;
        m.counts["pass_samples"] = config_.pass_samples;
    }

    void select_stage(StageManifest& m) {
        auto scored = load_scored(need(Stage::score, "scored.jsonl", m));
        if (scored.empty()) throw StageFailure(Stage::select, "scored set is empty");
        auto r = select(scored, config_.m_train, config_.selection);
        std::vector<ScoredSample> chosen;
        for (auto i : r.order) chosen.push_back(scored[i]);
        save_scored(output(m, "selected.jsonl"), chosen);
        m.counts["selected"] = chosen.size();
        m.counts["m_train"] = config_.m_train;
        m.counts["tie_events"] = r.tie_events;
        m.counts["padded_perfect_pass"] = r.padded_perfect;
        m.counts["padded_zero_pass"] = r.padded_zero;
        m.details["strategy"] = std::string(to_string(config_.selection));
        for (const auto& w : r.warnings) m.warnings.push_back(w);
    }

    void export_stage(StageManifest& m) {
        auto selected = load_scored(need(Stage::select, "selected.jsonl", m));
        auto em = export_training_set(selected, task_, config_.trainer_profile, stage_dir(Stage::export_));
        for (const auto& p : {em.data_path, em.reward_path, em.config_path}) m.output_paths.push_back(rel_path(p));
        m.counts["records"] = em.record_count;
        if (!config_.trainer_profile.command_template.empty()) {
            auto run = invoke_trainer(em, config_.trainer_profile);
            m.details["trainer_exit_status"] = run.exit_status;
            if (run.exit_status != 0) {
                m.details["trainer_stderr_tail"] = run.stderr_tail;
                throw StageFailure(Stage::export_, "trainer exited with status " + std::to_string(run.exit_status));
            }
        }
    }

    void report_stage(StageManifest& m) {
        auto scored = load_scored(need(Stage::score, "scored.jsonl", m));
        std::vector<Sample> synth;
        std::vector<std::size_t> counts, initial_counts;
        for (const auto& s : scored) {
            synth.push_back(s.sample);
            counts.push_back(s.pass_count);
            if (s.sample.provenance == Provenance::initial) initial_counts.push_back(s.pass_count);
        }
        ReportInputs in;
        in.pass_counts = counts;
        in.pass_samples = config_.pass_samples;
        in.embedder = embedder();
        in.seed = config_.seed;
        auto rep = report(synth, in);
        auto j = to_json(rep);
        j["initial_subset_difficulty"] = {{"pass_samples", config_.pass_samples},
                                          {"bins", pass_rate_histogram(initial_counts, config_.pass_samples)}};
        write_text(output(m, "report.json"), j.dump(2) + "\n");
        auto summary = summary_text(rep);
        write_text(output(m, "summary.txt"), summary);
        std::fwrite(summary.data(), 1, summary.size(), stdout);
        std::fflush(stdout);
        m.counts["samples"] = rep.sample_count;
        for (const auto& n : rep.notes) m.warnings.push_back(n);
    }

    void eval_stage(StageManifest& m, const fs::path& test_set) {
        auto records = load_test_set(test_set, task_.answer_format);
        m.input_paths.push_back(fs::absolute(test_set).lexically_normal().generic_string());
        double acc = evaluate(base(), records, task_, config_.max_tokens, config_.seed);
        nlohmann::ordered_json j;
        j["records"] = records.size();
        j["accuracy"] = acc;
        write_text(output(m, "eval.json"), j.dump(2) + "\n");
        m.counts["records"] = records.size();
        m.details["accuracy"] = acc;
        std::printf("accuracy: %.4f over %zu records\n", acc, records.size());
        std::fflush(stdout);
    }

    PipelineConfig config_;
    TaskDefinition task_;
    fs::path out_;
    Backends backends_;
    std::string hash_;
    std::unique_ptr<Gateway> instructor_gw_;
    std::unique_ptr<Gateway> base_gw_;
    std::unique_ptr<Gateway> embed_gw_;
};

}  // namespace synthrl
