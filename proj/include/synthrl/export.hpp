#pragma once

#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthrl/selection.hpp"

namespace synthrl {

/// One RL prompt with its verifiable answer.
struct TrainingRecord {
    std::string prompt;
    std::string ground_truth;
    std::string id;
    Provenance provenance = Provenance::initial;
    std::size_t pass_count = 0;
    double score = 1.0;
    bool operator==(const TrainingRecord&) const = default;
};

inline TrainingRecord make_training_record(const ScoredSample& s, const TaskDefinition& def) {
    auto gt = extract_answer(s.sample.output, def.answer_format);
    if (!gt) throw std::invalid_argument("sample " + s.sample.id + " has no extractable answer");
    return TrainingRecord{solve_prompt(def, s.sample.input), gt->normalized, s.sample.id, s.sample.provenance,
                          s.pass_count, s.score};
}

inline nlohmann::ordered_json to_json(const TrainingRecord& r) {
    nlohmann::ordered_json j;
    j["prompt"] = r.prompt;
    j["ground_truth"] = r.ground_truth;
    j["metadata"] = {{"id", r.id},
                     {"provenance", std::string(to_string(r.provenance))},
                     {"pass_count", r.pass_count},
                     {"score", r.score}};
    return j;
}

inline TrainingRecord training_record_from_json(const nlohmann::json& j) {
    TrainingRecord r;
    r.prompt = j.at("prompt").get<std::string>();
    r.ground_truth = j.at("ground_truth").get<std::string>();
    const auto& m = j.at("metadata");
    r.id = m.at("id").get<std::string>();
    r.provenance = parse_provenance(m.at("provenance").get<std::string>());
    r.pass_count = m.at("pass_count").get<std::size_t>();
    r.score = m.at("score").get<double>();
    return r;
}

/// Binary exact-match reward with an optional, off-by-default bonus for a
/// completion whose final answer is extractable in the task's format.
struct RewardSpec {
    AnswerFormat answer_format = AnswerFormat::tagged_answer;
    std::string equality = "normalized_exact_match";
    bool format_bonus_enabled = false;
    double format_bonus = 0.1;

    double reward(std::string_view completion, const std::string& ground_truth) const {
        auto got = extract_answer(completion, answer_format);
        double r = 0.0;
        if (got) {
            ExtractedAnswer gold{ground_truth, normalize(ground_truth, answer_format), answer_format};
            if (answers_equal(*got, gold)) r = 1.0;
            if (format_bonus_enabled) r += format_bonus;
        }
        return r;
    }

    bool operator==(const RewardSpec&) const = default;
};

inline nlohmann::ordered_json to_json(const RewardSpec& s) {
    nlohmann::ordered_json j;
    j["type"] = "exact_match";
    j["answer_format"] = std::string(to_string(s.answer_format));
    j["equality"] = s.equality;
    j["correct_reward"] = 1.0;
    j["incorrect_reward"] = 0.0;
    j["format_bonus"] = {{"enabled", s.format_bonus_enabled}, {"value", s.format_bonus}};
    return j;
}

inline RewardSpec reward_spec_from_json(const nlohmann::json& j) {
    RewardSpec s;
    auto f = parse_answer_format(j.at("answer_format").get<std::string>());
    if (!f) throw std::invalid_argument("reward spec: unknown answer_format");
    s.answer_format = *f;
    s.equality = j.at("equality").get<std::string>();
    if (s.equality != "normalized_exact_match") throw std::invalid_argument("reward spec: unknown equality mode");
    if (j.contains("format_bonus")) {
        s.format_bonus_enabled = j["format_bonus"].value("enabled", false);
        s.format_bonus = j["format_bonus"].value("value", 0.1);
    }
    return s;
}

inline std::string trainer_config_text(const TrainerProfile& p) {
    std::ostringstream os;
    os.precision(17);
    os << "algorithm=" << p.algorithm_name << '\n'
       << "learning_rate=" << p.learning_rate << '\n'
       << "responses_per_prompt=" << p.responses_per_prompt << '\n'
       << "batch_size=" << p.batch_size << '\n'
       << "max_response_length=" << p.max_response_length << '\n'
       << "kl_coefficient=" << p.kl_coefficient << '\n'
       << "epochs=" << p.epochs << '\n';
    return os.str();
}

/// Parses the flat key=value trainer config back into a map.
inline std::map<std::string, std::string> parse_flat_config(std::string_view content) {
    std::map<std::string, std::string> out;
    std::istringstream in{std::string(content)};
    std::string line;
    while (std::getline(in, line)) {
        auto t = text::trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("trainer config line without '=': " + t);
        out[text::trim(t.substr(0, eq))] = text::trim(t.substr(eq + 1));
    }
    return out;
}

struct ExportManifest {
    std::filesystem::path out_dir;
    std::filesystem::path data_path;
    std::filesystem::path reward_path;
    std::filesystem::path config_path;
    std::size_t record_count = 0;
};

inline void write_text(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PersistenceError("cannot write " + path.string());
    out << content;
    if (!out) throw PersistenceError("failed writing " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PersistenceError("cannot read " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Writes train.jsonl, reward_spec.json and trainer_config.txt into out_dir.
inline ExportManifest export_training_set(std::span<const ScoredSample> train, const TaskDefinition& def,
                                          const TrainerProfile& profile, const std::filesystem::path& out_dir) {
    if (train.empty()) throw std::invalid_argument("export: training set is empty");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw PersistenceError("cannot create " + out_dir.string() + ": " + ec.message());

    ExportManifest m;
    m.out_dir = out_dir;
    m.data_path = out_dir / "train.jsonl";
    m.reward_path = out_dir / "reward_spec.json";
    m.config_path = out_dir / "trainer_config.txt";

    std::vector<TrainingRecord> records;
    records.reserve(train.size());
    for (const auto& s : train) records.push_back(make_training_record(s, def));
    write_jsonl(m.data_path, records, [](const TrainingRecord& r) { return to_json(r); });

    RewardSpec spec;
    spec.answer_format = def.answer_format;
    write_text(m.reward_path, to_json(spec).dump(2) + "\n");
    write_text(m.config_path, trainer_config_text(profile));
    m.record_count = records.size();
    return m;
}

inline std::vector<TrainingRecord> load_training_records(const std::filesystem::path& path) {
    return read_jsonl(path, [](const nlohmann::json& j) { return training_record_from_json(j); });
}

// ---------------------------------------------------------------------------
// Trainer invocation

class TrainerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string shell_quote(std::string_view s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out.push_back(c);
    }
    out.push_back('\'');
    return out;
}

/// Fills {data_path}, {reward_path}, {config_path} and {out_dir} with shell-quoted
/// paths. {data_path} is required; any other {slot} is an error.
inline std::string render_trainer_command(const std::string& tmpl, const ExportManifest& m) {
    if (text::trim_view(tmpl).empty()) throw TrainerError("trainer command_template is empty");
    const std::map<std::string, std::string> slots = {{"data_path", m.data_path.string()},
                                                      {"reward_path", m.reward_path.string()},
                                                      {"config_path", m.config_path.string()},
                                                      {"out_dir", m.out_dir.string()}};
    static const std::regex slot(R"(\{([A-Za-z_][A-Za-z0-9_]*)\})");
    std::string out;
    bool has_data = false;
    auto begin = std::sregex_iterator(tmpl.begin(), tmpl.end(), slot);
    std::size_t last = 0;
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        auto name = (*it)[1].str();
        auto found = slots.find(name);
        if (found == slots.end()) throw TrainerError("unknown slot {" + name + "} in trainer command");
        if (name == "data_path") has_data = true;
        out.append(tmpl, last, static_cast<std::size_t>(it->position()) - last);
        out += shell_quote(found->second);
        last = static_cast<std::size_t>(it->position() + it->length());
    }
    out.append(tmpl, last);
    if (!has_data) throw TrainerError("trainer command must contain the {data_path} slot");
    return out;
}

struct TrainerRun {
    int exit_status = 0;
    std::string stderr_tail;
};

/// Runs the command under /bin/sh, relaying its stdout and stderr to `log`
/// as they arrive. The last `tail_bytes` of stderr are kept for diagnostics.
inline TrainerRun run_command(const std::string& command, std::ostream& log = std::cerr,
                              std::size_t tail_bytes = 4096) {
    int out_pipe[2], err_pipe[2];
    if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0) throw TrainerError(std::string("pipe: ") + std::strerror(errno));
    pid_t pid = fork();
    if (pid < 0) throw TrainerError(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        close(out_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[0]);
        close(err_pipe[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(out_pipe[1]);
    close(err_pipe[1]);

    TrainerRun run;
    pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    int open_fds = 2;
    char buf[4096];
    while (open_fds > 0) {
        if (poll(fds, 2, -1) < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (int k = 0; k < 2; ++k) {
            if (fds[k].fd < 0 || !(fds[k].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            ssize_t n = read(fds[k].fd, buf, sizeof buf);
            if (n <= 0) {
                close(fds[k].fd);
                fds[k].fd = -1;
                --open_fds;
                continue;
            }
            log.write(buf, n);
            if (k == 1) {
                run.stderr_tail.append(buf, static_cast<std::size_t>(n));
                if (run.stderr_tail.size() > tail_bytes)
                    run.stderr_tail.erase(0, run.stderr_tail.size() - tail_bytes);
            }
        }
    }
    log.flush();
    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (WIFEXITED(status)) run.exit_status = WEXITSTATUS(status);
    else if (WIFSIGNALED(status)) run.exit_status = 128 + WTERMSIG(status);
    else run.exit_status = 1;
    return run;
}

inline TrainerRun invoke_trainer(const ExportManifest& m, const TrainerProfile& profile, std::ostream& log = std::cerr) {
    return run_command(render_trainer_command(profile.command_template, m), log);
}

}  // namespace synthrl
