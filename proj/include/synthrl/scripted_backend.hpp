#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "synthrl/gateway.hpp"
#include "synthrl/text.hpp"

namespace synthrl {

inline std::string_view to_string(TemperatureBand b) { return b == TemperatureBand::zero ? "zero" : "nonzero"; }

/// Completions keyed by (prompt content hash, sample index, temperature band),
/// plus embedding vectors keyed by text content hash.
///
/// File format: one JSON object per line.
///   {"prompt_hash": "<16 hex>", "index": 0, "band": "zero"|"nonzero", "completion": "..."}
///   {"prompt": "<full prompt text>", ...}            (hash computed on load)
///   {"text_hash": "<16 hex>", "embedding": [0.1, ...]}
///   {"text": "<text>", "embedding": [...]}
/// "band" may be omitted, in which case the record serves both bands.
class ScriptTable {
public:
    using Key = std::tuple<std::string, std::size_t, int>;  // band: 0 zero, 1 nonzero, 2 any

    ScriptTable() = default;
    ScriptTable(ScriptTable&& o) noexcept
        : completions_(std::move(o.completions_)), embeddings_(std::move(o.embeddings_)) {}
    ScriptTable& operator=(ScriptTable&& o) noexcept {
        std::scoped_lock lock(mu_, o.mu_);
        completions_ = std::move(o.completions_);
        embeddings_ = std::move(o.embeddings_);
        return *this;
    }

    void add(const std::string& prompt_hash, std::size_t index, std::optional<TemperatureBand> band,
             std::string completion) {
        std::lock_guard lock(mu_);
        completions_[Key{prompt_hash, index, band_code(band)}] = std::move(completion);
    }

    void add_embedding(const std::string& text_hash, std::vector<double> v) {
        std::lock_guard lock(mu_);
        embeddings_[text_hash] = std::move(v);
    }

    std::optional<std::string> find(const std::string& prompt_hash, std::size_t index, TemperatureBand band) const {
        std::lock_guard lock(mu_);
        if (auto it = completions_.find(Key{prompt_hash, index, band_code(band)}); it != completions_.end())
            return it->second;
        if (auto it = completions_.find(Key{prompt_hash, index, 2}); it != completions_.end()) return it->second;
        return std::nullopt;
    }

    std::optional<std::vector<double>> find_embedding(const std::string& text_hash) const {
        std::lock_guard lock(mu_);
        if (auto it = embeddings_.find(text_hash); it != embeddings_.end()) return it->second;
        return std::nullopt;
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return completions_.size() + embeddings_.size();
    }

    static ScriptTable load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw GatewayError(GatewayErrorKind::invalid_request, "cannot open script " + path.string());
        ScriptTable t;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (text::trim_view(line).empty()) continue;
            auto where = path.string() + ":" + std::to_string(lineno);
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
                if (j.contains("embedding")) {
                    std::string h = j.contains("text_hash") ? j.at("text_hash").get<std::string>()
                                                            : text::content_hash(j.at("text").get<std::string>());
                    t.add_embedding(h, j.at("embedding").get<std::vector<double>>());
                    continue;
                }
                std::string h = j.contains("prompt_hash") ? j.at("prompt_hash").get<std::string>()
                                                          : text::content_hash(j.at("prompt").get<std::string>());
                std::optional<TemperatureBand> band;
                if (j.contains("band")) {
                    auto b = j.at("band").get<std::string>();
                    if (b == "zero") band = TemperatureBand::zero;
                    else if (b == "nonzero") band = TemperatureBand::nonzero;
                    else throw std::invalid_argument("band must be 'zero' or 'nonzero'");
                }
                t.add(h, j.value("index", std::size_t{0}), band, j.at("completion").get<std::string>());
            } catch (const std::exception& e) {
                throw GatewayError(GatewayErrorKind::invalid_request, where + ": bad script record: " + e.what());
            }
        }
        return t;
    }

    /// Writes records sorted by key so equal tables give equal files.
    void save(const std::filesystem::path& path) const {
        std::lock_guard lock(mu_);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw GatewayError(GatewayErrorKind::invalid_request, "cannot write script " + path.string());
        for (const auto& [k, v] : completions_) {
            nlohmann::ordered_json j;
            j["prompt_hash"] = std::get<0>(k);
            j["index"] = std::get<1>(k);
            if (std::get<2>(k) != 2) j["band"] = std::get<2>(k) == 0 ? "zero" : "nonzero";
            j["completion"] = v;
            out << j.dump() << '\n';
        }
        for (const auto& [h, v] : embeddings_) {
            nlohmann::ordered_json j;
            j["text_hash"] = h;
            j["embedding"] = v;
            out << j.dump() << '\n';
        }
    }

private:
    static int band_code(std::optional<TemperatureBand> b) {
        if (!b) return 2;
        return *b == TemperatureBand::zero ? 0 : 1;
    }

    mutable std::mutex mu_;
    std::map<Key, std::string> completions_;
    std::map<std::string, std::vector<double>> embeddings_;
};

/// Programmatic stand-in for a script table.
using Responder = std::function<std::string(std::string_view prompt, std::size_t index, TemperatureBand band)>;
using EmbedResponder = std::function<std::vector<double>(std::string_view text)>;

/// Deterministic offline backend: a pure function of (prompt hash, sample index,
/// temperature band). Table misses are hard errors.
class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(std::shared_ptr<const ScriptTable> table) : table_(std::move(table)) {}
    ScriptedBackend(Responder responder, EmbedResponder embedder = {})
        : responder_(std::move(responder)), embedder_(std::move(embedder)) {}

    /// Artificial per-call latency, for scheduling tests.
    void set_latency(std::function<std::chrono::microseconds(std::string_view, std::size_t)> f) {
        latency_ = std::move(f);
    }

    SampleReply sample(const SampleCall& call) override {
        SampleReply r;
        auto band = band_of(call.temperature);
        for (std::size_t i = 0; i < call.n; ++i) {
            std::size_t idx = call.first_index + i;
            if (latency_) std::this_thread::sleep_for(latency_(*call.prompt, idx));
            if (responder_) {
                r.completions.push_back(responder_(*call.prompt, idx, band));
                continue;
            }
            auto h = text::content_hash(*call.prompt);
            auto hit = table_->find(h, idx, band);
            if (!hit)
                throw GatewayError(GatewayErrorKind::script_miss, "no scripted completion for prompt_hash " + h +
                                                                      " index " + std::to_string(idx) + " band " +
                                                                      std::string(to_string(band)));
            r.completions.push_back(std::move(*hit));
        }
        return r;
    }

    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
        std::vector<std::vector<double>> out;
        out.reserve(texts.size());
        for (const auto& t : texts) {
            if (embedder_) {
                out.push_back(embedder_(t));
                continue;
            }
            if (!table_) throw GatewayError(GatewayErrorKind::invalid_request, "scripted backend has no embeddings");
            auto h = text::content_hash(t);
            auto hit = table_->find_embedding(h);
            if (!hit) throw GatewayError(GatewayErrorKind::script_miss, "no scripted embedding for text_hash " + h);
            out.push_back(std::move(*hit));
        }
        if (!out.empty()) {
            for (const auto& v : out)
                if (v.size() != out.front().size())
                    throw GatewayError(GatewayErrorKind::malformed_response, "embedding dimensions differ");
        }
        return out;
    }

    bool batches_samples() const override { return true; }

private:
    std::shared_ptr<const ScriptTable> table_;
    Responder responder_;
    EmbedResponder embedder_;
    std::function<std::chrono::microseconds(std::string_view, std::size_t)> latency_;
};

/// Wraps a responder and records every answer it gives into a ScriptTable,
/// producing a replayable script for a run.
class RecordingBackend : public Backend {
public:
    RecordingBackend(Responder responder, std::shared_ptr<ScriptTable> sink, EmbedResponder embedder = {})
        : responder_(std::move(responder)), sink_(std::move(sink)), embedder_(std::move(embedder)) {}

    SampleReply sample(const SampleCall& call) override {
        SampleReply r;
        auto band = band_of(call.temperature);
        auto h = text::content_hash(*call.prompt);
        for (std::size_t i = 0; i < call.n; ++i) {
            auto c = responder_(*call.prompt, call.first_index + i, band);
            sink_->add(h, call.first_index + i, band, c);
            r.completions.push_back(std::move(c));
        }
        return r;
    }

    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
        if (!embedder_) return Backend::embed(texts);
        std::vector<std::vector<double>> out;
        for (const auto& t : texts) {
            out.push_back(embedder_(t));
            sink_->add_embedding(text::content_hash(t), out.back());
        }
        return out;
    }

    bool batches_samples() const override { return true; }

private:
    Responder responder_;
    std::shared_ptr<ScriptTable> sink_;
    EmbedResponder embedder_;
};

}  // namespace synthrl
