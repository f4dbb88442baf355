#include "memprobe/harness.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "memprobe/errors.hpp"
#include "memprobe/io.hpp"
#include "memprobe/llm/oracle_mock.hpp"
#include "memprobe/probes.hpp"
#include "memprobe/prompts.hpp"
#include "memprobe/qa_engine.hpp"
#include "memprobe/report.hpp"
#include "memprobe/text.hpp"

namespace memprobe {

using nlohmann::json;

std::string_view to_string(ProviderKind p) {
    switch (p) {
        case ProviderKind::live: return "live";
        case ProviderKind::replay: return "replay";
        case ProviderKind::mock: return "mock";
    }
    return "";
}

ProviderKind parse_provider_kind(std::string_view s) {
    if (s == "live") return ProviderKind::live;
    if (s == "replay") return ProviderKind::replay;
    if (s == "mock") return ProviderKind::mock;
    throw ArgumentError("unknown provider '" + std::string(s) + "' (expected live, replay or mock)");
}

namespace {

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = text::trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int to_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return static_cast<int>(v);
    } catch (const std::exception&) {
        throw ArgumentError(key + " expects an integer, got '" + value + "'");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ArgumentError(key + " expects a number, got '" + value + "'");
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    const auto v = text::to_lower(value);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ArgumentError(key + " expects a boolean, got '" + value + "'");
}

std::optional<std::size_t> hash_dimension(const std::string& embedder) {
    if (embedder == "hash") return 1536;
    if (embedder.starts_with("hash:")) {
        const auto d = to_int("embedder", embedder.substr(5));
        if (d < 2) throw ArgumentError("hash embedder needs a dimension >= 2");
        return static_cast<std::size_t>(d);
    }
    if (embedder == "live") return std::nullopt;
    throw ArgumentError("unknown embedder '" + embedder + "' (expected live, hash or hash:<d>)");
}

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads; the first
/// exception is rethrown after all workers stop.
template <typename F>
void parallel_for(std::size_t n, int workers, F fn) {
    if (n == 0) return;
    const auto count = std::max<std::size_t>(1, std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers))));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        while (!failed.load()) {
            const auto i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
            }
        }
    };
    if (count == 1) {
        work();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < count; ++t) threads.emplace_back(work);
        for (auto& t : threads) t.join();
    }
    if (error) std::rethrow_exception(error);
}

template <typename T, typename FromJson>
std::map<std::string, T> load_records(const fs::path& path, FromJson from_json) {
    std::map<std::string, T> out;
    if (!fs::exists(path)) return out;
    for (const auto& j : io::read_jsonl_prefix(path)) {
        try {
            auto rec = from_json(j);
            out.insert_or_assign(rec.question_id, std::move(rec));
        } catch (const std::exception& e) {
            spdlog::warn("ignoring unreadable record in {}: {}", path.string(), e.what());
        }
    }
    return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "corpus_path",     "corpus_format",      "strategies",      "methods",        "k",
        "pool_multiplier", "backbone_model_id",  "judge_model_id",  "rerank_model_id", "embedder",
        "embedding_model", "embedding_dimension", "provider",       "cache_dir",      "out_dir",
        "seed",            "max_in_flight",      "bm25_k1",         "bm25_b",         "conflict_top_m",
        "conflict_threshold", "chunk_size",      "chunk_overlap",   "include_adversarial", "compare_reference",
        "base_url",        "api_key_env",
    };
    return keys;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
    const auto value = text::trim(raw);
    if (key == "corpus_path") corpus_path = value;
    else if (key == "corpus_format") corpus_format = parse_corpus_format(value);
    else if (key == "strategies") {
        strategies.clear();
        for (const auto& s : split_list(value)) strategies.push_back(parse_write_strategy(s));
    } else if (key == "methods") {
        methods.clear();
        for (const auto& m : split_list(value)) methods.push_back(parse_retrieval_method(m));
    } else if (key == "k") k = to_int(key, value);
    else if (key == "pool_multiplier") pool_multiplier = to_int(key, value);
    else if (key == "backbone_model_id") backbone_model_id = value;
    else if (key == "judge_model_id") judge_model_id = value;
    else if (key == "rerank_model_id") rerank_model_id = value;
    else if (key == "embedder") {
        hash_dimension(value);
        embedder = value;
    } else if (key == "embedding_model") embedding_model = value;
    else if (key == "embedding_dimension") embedding_dimension = to_int(key, value);
    else if (key == "provider") provider = parse_provider_kind(value);
    else if (key == "cache_dir") cache_dir = value;
    else if (key == "out_dir") out_dir = value;
    else if (key == "seed") {
        try {
            seed = std::stoull(value);
        } catch (const std::exception&) {
            throw ArgumentError("seed expects an unsigned integer, got '" + value + "'");
        }
    } else if (key == "max_in_flight") max_in_flight = to_int(key, value);
    else if (key == "bm25_k1") bm25_k1 = to_double(key, value);
    else if (key == "bm25_b") bm25_b = to_double(key, value);
    else if (key == "conflict_top_m") conflict_top_m = to_int(key, value);
    else if (key == "conflict_threshold") conflict_threshold = to_double(key, value);
    else if (key == "chunk_size") chunk_size = to_int(key, value);
    else if (key == "chunk_overlap") chunk_overlap = to_int(key, value);
    else if (key == "include_adversarial") include_adversarial = to_bool(key, value);
    else if (key == "compare_reference") compare_reference = to_bool(key, value);
    else if (key == "base_url") base_url = value;
    else if (key == "api_key_env") api_key_env = value;
    else throw ArgumentError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
    if (k < 1) throw ArgumentError("k must be >= 1");
    if (pool_multiplier < 1) throw ArgumentError("pool_multiplier must be >= 1");
    if (max_in_flight < 1) throw ArgumentError("max_in_flight must be >= 1");
    if (strategies.empty()) throw ArgumentError("at least one write strategy is required");
    if (methods.empty()) throw ArgumentError("at least one retrieval method is required");
    if (chunk_size < 1) throw ArgumentError("chunk_size must be >= 1");
    if (chunk_overlap < 0 || chunk_overlap >= chunk_size) {
        throw ArgumentError("chunk_overlap must be in [0, chunk_size)");
    }
    if (conflict_top_m < 1) throw ArgumentError("conflict_top_m must be >= 1");
    if (bm25_k1 < 0 || bm25_b < 0 || bm25_b > 1) throw ArgumentError("bm25 parameters out of range");
    if (embedding_dimension < 2) throw ArgumentError("embedding_dimension must be >= 2");
    hash_dimension(embedder);
}

WriteOptions RunConfig::write_options() const {
    WriteOptions w;
    w.model_id = backbone_model_id;
    w.chunk_size = chunk_size;
    w.chunk_overlap = chunk_overlap;
    w.conflict_top_m = conflict_top_m;
    w.conflict_threshold = conflict_threshold;
    return w;
}

json RunConfig::to_json() const {
    json s = json::array(), m = json::array();
    for (auto x : strategies) s.push_back(to_string(x));
    for (auto x : methods) m.push_back(to_string(x));
    return {{"corpus_path", corpus_path.string()},
            {"corpus_format", corpus_format == CorpusFormat::normalized ? "normalized" : "locomo"},
            {"strategies", s},
            {"methods", m},
            {"k", k},
            {"pool_multiplier", pool_multiplier},
            {"backbone_model_id", backbone_model_id},
            {"judge_model_id", judge_model()},
            {"rerank_model_id", rerank_model_id},
            {"embedder", embedder},
            {"embedding_model", embedding_model},
            {"embedding_dimension", embedding_dimension},
            {"provider", to_string(provider)},
            {"seed", seed},
            {"max_in_flight", max_in_flight},
            {"bm25_k1", bm25_k1},
            {"bm25_b", bm25_b},
            {"conflict_top_m", conflict_top_m},
            {"conflict_threshold", conflict_threshold},
            {"chunk_size", chunk_size},
            {"chunk_overlap", chunk_overlap},
            {"include_adversarial", include_adversarial},
            {"compare_reference", compare_reference},
            {"base_url", base_url},
            {"api_key_env", api_key_env}};
}

RunConfig parse_config(std::string_view body, RunConfig base) {
    std::istringstream in{std::string(body)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (text::trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(fmt::format("config line {}: expected key = value", line_no));
        }
        try {
            base.set(text::trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ArgumentError& e) {
            throw ArgumentError(fmt::format("config line {}: {}", line_no, e.what()));
        }
    }
    return base;
}

RunConfig load_config_file(const fs::path& path, RunConfig base) { return parse_config(io::read_file(path), base); }

json StoreSummary::to_json() const {
    return {{"conversation_id", conversation_id}, {"strategy", memprobe::to_string(strategy)},
            {"entries", entries},                 {"sessions", sessions},
            {"write_llm_calls", write_llm_calls}, {"reused", reused},
            {"log", log.to_json()}};
}

json CellAccounting::to_json() const {
    return {{"config_id", config_id},
            {"questions", questions},
            {"answer_calls", answer_calls},
            {"rerank_calls", rerank_calls},
            {"judge_calls", judge_calls},
            {"total_chat_calls", total_chat_calls()},
            {"skipped", skipped},
            {"utilization_excluded", utilization_excluded},
            {"rerank_fallbacks", rerank_fallbacks}};
}

namespace {

std::shared_ptr<llm::Gateway> make_gateway(const RunConfig& config, std::shared_ptr<llm::ChatProvider> chat,
                                           std::shared_ptr<llm::EmbeddingProvider> embedder) {
    llm::GatewayOptions options;
    options.cache_dir = config.effective_cache_dir();
    options.max_in_flight = config.max_in_flight;
    return std::make_shared<llm::Gateway>(std::move(chat), std::move(embedder), options);
}

std::pair<std::shared_ptr<llm::ChatProvider>, std::shared_ptr<llm::EmbeddingProvider>> make_providers(
    const RunConfig& config) {
    config.validate();
    std::shared_ptr<llm::LiveProvider> live;
    auto get_live = [&] {
        if (!live) {
            llm::LiveProviderConfig lc;
            lc.base_url = config.base_url;
            lc.api_key_env = config.api_key_env;
            lc.embedding_model = config.embedding_model;
            lc.embedding_dimension = static_cast<std::size_t>(config.embedding_dimension);
            live = std::make_shared<llm::LiveProvider>(lc);
        }
        return live;
    };

    std::shared_ptr<llm::ChatProvider> chat;
    switch (config.provider) {
        case ProviderKind::mock: chat = std::make_shared<llm::OracleMockProvider>(); break;
        case ProviderKind::replay: chat = std::make_shared<llm::ReplayChatProvider>(config.effective_cache_dir()); break;
        case ProviderKind::live: chat = get_live(); break;
    }

    std::shared_ptr<llm::EmbeddingProvider> embedder;
    if (auto d = hash_dimension(config.embedder)) {
        embedder = std::make_shared<llm::HashEmbedder>(*d);
    } else if (config.provider == ProviderKind::live) {
        embedder = get_live();
    } else {
        // Offline runs with a live embedder serve recorded vectors.
        embedder = std::make_shared<llm::ReplayEmbeddingProvider>(
            config.effective_cache_dir(), config.embedding_model, static_cast<std::size_t>(config.embedding_dimension));
    }
    return {chat, embedder};
}

}  // namespace

Harness::Harness(RunConfig config) : config_(std::move(config)) {
    auto [chat, embedder] = make_providers(config_);
    gateway_ = make_gateway(config_, chat, embedder);
}

Harness::Harness(RunConfig config, std::shared_ptr<llm::ChatProvider> chat,
                 std::shared_ptr<llm::EmbeddingProvider> embedder)
    : config_(std::move(config)) {
    config_.validate();
    gateway_ = make_gateway(config_, std::move(chat), std::move(embedder));
}

const Corpus& Harness::corpus() {
    if (!corpus_) {
        if (config_.corpus_path.empty()) throw ArgumentError("corpus_path is not set");
        corpus_ = load_corpus(config_.corpus_path, config_.corpus_format);
    }
    return *corpus_;
}

std::vector<QAItem> Harness::questions() {
    std::vector<QAItem> out;
    for (const auto& rec : corpus()) {
        const auto qs = config_.include_adversarial ? rec.qa : filter_adversarial(rec.qa);
        out.insert(out.end(), qs.begin(), qs.end());
    }
    return out;
}

fs::path Harness::results_dir(const std::string& config_id) const { return config_.out_dir / "results" / config_id; }

void Harness::update_manifest(const std::string& section, json value) {
    json manifest = json::object();
    const auto path = manifest_path();
    if (fs::exists(path)) {
        manifest = json::parse(io::read_file(path), nullptr, false);
        if (manifest.is_discarded() || !manifest.is_object()) manifest = json::object();
    }
    manifest["config"] = config_.to_json();
    manifest["prompts"] = prompts::catalog_digests();
    manifest["embedding_model"] = gateway_->embedding_model();
    manifest[section] = std::move(value);
    // Digests accumulate across invocations sharing this output directory.
    std::set<std::string> digests;
    if (manifest.contains("chat_digests") && manifest["chat_digests"].is_array()) {
        for (const auto& d : manifest["chat_digests"]) {
            if (d.is_string()) digests.insert(d.get<std::string>());
        }
    }
    for (auto& d : gateway_->chat_digests()) digests.insert(std::move(d));
    manifest["chat_digests"] = digests;
    io::write_file_atomic(path, manifest.dump(2) + "\n");
}

std::vector<StoreSummary> Harness::build() {
    const auto& records = corpus();
    const auto options = config_.write_options();

    std::vector<std::pair<const Conversation*, WriteStrategy>> jobs;
    for (const auto& rec : records) {
        for (auto s : config_.strategies) jobs.emplace_back(&rec.conversation, s);
    }
    std::vector<StoreSummary> summaries(jobs.size());

    // Conversations in parallel; the sessions of one store are written in order.
    parallel_for(jobs.size(), config_.max_in_flight, [&](std::size_t i) {
        const auto& [conversation, strategy] = jobs[i];
        const auto path = store_path(config_.out_dir, conversation->conversation_id, strategy);
        auto& summary = summaries[i];
        summary.conversation_id = conversation->conversation_id;
        summary.strategy = strategy;
        summary.sessions = static_cast<int>(conversation->sessions.size());
        if (fs::exists(path) && fs::exists(fs::path(path.string() + ".meta.json"))) {
            const auto store = MemoryStore::load(path);
            summary.entries = store.size();
            summary.write_llm_calls = store.write_llm_calls();
            summary.reused = true;
            spdlog::info("reusing store {}", path.string());
            return;
        }
        const auto store = build_store(strategy, *conversation, *gateway_, options, &summary.log);
        store.save(path);
        summary.entries = store.size();
        summary.write_llm_calls = store.write_llm_calls();
        spdlog::info("built {} store for {}: {} entries, {} chat calls", to_string(strategy),
                     conversation->conversation_id, store.size(), store.write_llm_calls());
    });

    json stores = json::array();
    for (const auto& s : summaries) stores.push_back(s.to_json());
    const auto counters = gateway_->counters();
    update_manifest("build", {{"stores", stores}, {"gateway", counters.to_json()}});
    return summaries;
}

const MemoryStore& Harness::store_for(const std::string& conversation_id, WriteStrategy strategy) {
    auto key = std::make_pair(conversation_id, strategy);
    auto it = stores_.find(key);
    if (it == stores_.end()) {
        const auto path = store_path(config_.out_dir, conversation_id, strategy);
        if (!fs::exists(path)) {
            throw NotFoundError("memory store " + path.string() + " does not exist; run build first");
        }
        it = stores_.emplace(key, std::make_unique<MemoryStore>(MemoryStore::load(path))).first;
    }
    return *it->second;
}

std::map<std::string, std::string> Harness::control_answers(const std::vector<QAItem>& qs) {
    // The no-memory answer does not depend on the configuration, so it is
    // computed once per question and shared by every cell.
    const auto path = config_.out_dir / "results" / "control" / "answers_without_memory.jsonl";
    std::map<std::string, std::string> answers;
    if (fs::exists(path)) {
        for (const auto& j : io::read_jsonl_prefix(path)) {
            answers[j.at("question_id").get<std::string>()] = j.at("answer").get<std::string>();
        }
    }
    std::vector<const QAItem*> missing;
    for (const auto& q : qs) {
        if (!answers.count(q.question_id)) missing.push_back(&q);
    }
    std::mutex mutex;
    parallel_for(missing.size(), config_.max_in_flight, [&](std::size_t i) {
        const auto& q = *missing[i];
        try {
            auto a = answer_without_memory(q, *gateway_, config_.backbone_model_id);
            std::lock_guard lock(mutex);
            answers[q.question_id] = a;
            io::append_jsonl(path, {{"question_id", q.question_id}, {"answer", a}});
        } catch (const FixtureMissingError&) {
            throw;
        } catch (const ProviderError& e) {
            spdlog::error("control answer failed for {}: {}", q.question_id, e.what());
        }
    });
    std::vector<json> lines;
    for (const auto& q : qs) {
        if (auto it = answers.find(q.question_id); it != answers.end()) {
            lines.push_back({{"question_id", q.question_id}, {"answer", it->second}});
        }
    }
    io::write_file_atomic(path, io::to_jsonl(lines));
    return answers;
}

EvalSummary Harness::run_cells(bool recompute_probes) {
    const auto qs = questions();
    if (qs.empty()) throw ArgumentError("the corpus has no questions to evaluate");
    for (const auto& rec : corpus()) {
        for (auto s : config_.strategies) store_for(rec.conversation.conversation_id, s);
    }
    const auto control = control_answers(qs);

    Bm25Params bm25{config_.bm25_k1, config_.bm25_b};
    HybridOptions hybrid{config_.rerank_model_id, config_.pool_multiplier};
    const auto judge_model = config_.judge_model();

    EvalSummary summary;
    json cells_manifest = json::array();
    for (auto strategy : config_.strategies) {
        std::map<std::string, std::unique_ptr<Retriever>> retrievers;
        for (const auto& rec : corpus()) {
            const auto& id = rec.conversation.conversation_id;
            retrievers[id] = std::make_unique<Retriever>(store_for(id, strategy), *gateway_, bm25, hybrid);
        }
        for (auto method : config_.methods) {
            const auto config_id = make_config_id(strategy, method, config_.k);
            const auto dir = results_dir(config_id);
            const auto outcomes_path = dir / "outcomes.jsonl";
            const auto probes_path = dir / "probes.jsonl";
            auto outcomes = load_records<QAOutcome>(outcomes_path, qa_outcome_from_json);
            auto probes = recompute_probes ? std::map<std::string, ProbeRecord>{}
                                           : load_records<ProbeRecord>(probes_path, probe_record_from_json);
            if (recompute_probes && fs::exists(probes_path)) fs::remove(probes_path);

            std::mutex mutex;
            std::atomic<int> skipped{0};
            parallel_for(qs.size(), config_.max_in_flight, [&](std::size_t i) {
                const auto& q = qs[i];
                std::optional<QAOutcome> outcome;
                bool have_probe = false;
                {
                    std::lock_guard lock(mutex);
                    if (auto it = outcomes.find(q.question_id); it != outcomes.end()) outcome = it->second;
                    have_probe = probes.count(q.question_id) > 0;
                }
                if (outcome && have_probe) return;
                const auto& store = store_for(q.conversation_id, strategy);
                try {
                    if (!outcome) {
                        auto control_it = control.find(q.question_id);
                        if (control_it == control.end()) {
                            ++skipped;
                            return;
                        }
                        QAOutcome o;
                        o.question_id = q.question_id;
                        o.config_id = config_id;
                        o.retrieval = retrievers.at(q.conversation_id)->retrieve(method, q.question_id, q.question,
                                                                                  config_.k);
                        o.answer_with_memory =
                            answer_with_memory(q, o.retrieval, store, *gateway_, config_.backbone_model_id);
                        o.answer_without_memory = control_it->second;
                        o.chat_calls = o.retrieval.chat_calls + 2;
                        std::lock_guard lock(mutex);
                        outcomes[q.question_id] = o;
                        io::append_jsonl(outcomes_path, to_json(o));
                        outcome = std::move(o);
                    }
                    auto rec = run_probes(q, *outcome, store, config_.k, *gateway_, judge_model);
                    std::lock_guard lock(mutex);
                    io::append_jsonl(probes_path, to_json(rec));
                    probes[q.question_id] = std::move(rec);
                } catch (const FixtureMissingError&) {
                    throw;
                } catch (const ProviderError& e) {
                    spdlog::error("{} / {} skipped: {}", config_id, q.question_id, e.what());
                    ++skipped;
                }
            });

            // Rewrite both files in corpus order so reruns are byte-stable.
            std::vector<json> outcome_lines, probe_lines, trace_lines;
            std::vector<QAOutcome> cell_outcomes;
            std::vector<ProbeRecord> cell_probes;
            for (const auto& q : qs) {
                auto o = outcomes.find(q.question_id);
                auto p = probes.find(q.question_id);
                if (o != outcomes.end()) {
                    outcome_lines.push_back(to_json(o->second));
                    trace_lines.push_back(retrieval_trace(o->second.retrieval, q.question));
                }
                if (p != probes.end()) probe_lines.push_back(to_json(p->second));
                if (o != outcomes.end() && p != probes.end()) {
                    cell_outcomes.push_back(o->second);
                    cell_probes.push_back(p->second);
                }
            }
            io::write_file_atomic(outcomes_path, io::to_jsonl(outcome_lines));
            io::write_file_atomic(probes_path, io::to_jsonl(probe_lines));
            io::write_file_atomic(dir / "traces.jsonl", io::to_jsonl(trace_lines));

            CellAccounting acc;
            acc.config_id = config_id;
            acc.questions = static_cast<int>(cell_outcomes.size());
            acc.skipped = static_cast<int>(qs.size() - cell_outcomes.size());
            for (std::size_t i = 0; i < cell_outcomes.size(); ++i) {
                const auto& o = cell_outcomes[i];
                acc.rerank_calls += o.retrieval.chat_calls;
                acc.answer_calls += o.chat_calls - o.retrieval.chat_calls;
                acc.judge_calls += cell_probes[i].judge_calls;
                if (o.retrieval.rerank_fallback) ++acc.rerank_fallbacks;
                if (!cell_probes[i].utilization) ++acc.utilization_excluded;
            }

            if (cell_outcomes.empty()) {
                spdlog::error("{}: no completed questions; cell omitted from the report", config_id);
            } else {
                auto cell = aggregate_cell(strategy, method, config_.k, qs, cell_outcomes, cell_probes);
                cell.skipped = acc.skipped;
                summary.cells.push_back(std::move(cell));
            }
            cells_manifest.push_back(acc.to_json());
            summary.accounting.push_back(acc);
        }
    }

    if (summary.cells.empty()) throw ProviderError("no configuration produced any completed question");
    emit_report(summary.cells, config_.out_dir / "report", {config_.compare_reference});
    const auto counters = gateway_->counters();
    update_manifest("eval", {{"questions", qs.size()},
                             {"cells", cells_manifest},
                             {"gateway", counters.to_json()}});
    return summary;
}

EvalSummary Harness::eval() { return run_cells(false); }

EvalSummary Harness::probe() { return run_cells(true); }

std::vector<GridCell> Harness::report() {
    const auto qs = questions();
    std::vector<GridCell> cells;
    for (auto strategy : config_.strategies) {
        for (auto method : config_.methods) {
            const auto config_id = make_config_id(strategy, method, config_.k);
            const auto dir = results_dir(config_id);
            if (!fs::exists(dir / "outcomes.jsonl") || !fs::exists(dir / "probes.jsonl")) {
                throw NotFoundError("no stored results for " + config_id + "; run eval first");
            }
            auto outcomes = load_records<QAOutcome>(dir / "outcomes.jsonl", qa_outcome_from_json);
            auto probes = load_records<ProbeRecord>(dir / "probes.jsonl", probe_record_from_json);
            std::vector<QAOutcome> o;
            std::vector<ProbeRecord> p;
            for (const auto& q : qs) {
                auto oi = outcomes.find(q.question_id);
                auto pi = probes.find(q.question_id);
                if (oi != outcomes.end() && pi != probes.end()) {
                    o.push_back(oi->second);
                    p.push_back(pi->second);
                }
            }
            auto cell = aggregate_cell(strategy, method, config_.k, qs, o, p);
            cell.skipped = static_cast<int>(qs.size() - o.size());
            cells.push_back(std::move(cell));
        }
    }
    emit_report(cells, config_.out_dir / "report", {config_.compare_reference});
    return cells;
}

json Harness::validate_judge(const fs::path& labels_csv, const std::optional<std::string>& config_id) {
    const auto rows = parse_csv(io::read_file(labels_csv));
    if (rows.empty()) throw ParseError(labels_csv.string() + " has no label rows");
    const auto& first = rows.front();
    if (!first.count("question_id")) throw ParseError("label CSV needs a question_id column");
    const bool has_human_correct = first.count("human_correct") > 0;
    const bool has_human_failure = first.count("human_failure_category") > 0;
    if (!has_human_correct && !has_human_failure) {
        throw ParseError("label CSV needs human_correct or human_failure_category");
    }
    const bool inline_correct = first.count("llm_correct") > 0;
    const bool inline_failure = first.count("llm_failure_category") > 0;

    std::map<std::string, ProbeRecord> probes;
    if ((has_human_correct && !inline_correct) || (has_human_failure && !inline_failure)) {
        if (!config_id) throw ArgumentError("judge labels need --cell <config_id> or llm_* columns");
        const auto path = results_dir(*config_id) / "probes.jsonl";
        if (!fs::exists(path)) throw NotFoundError("no probe records at " + path.string());
        probes = load_records<ProbeRecord>(path, probe_record_from_json);
    }

    json result = json::object();
    std::ostringstream md;
    md << "# Judge validation\n";

    auto emit = [&](const std::string& name, const JudgeValidation& v, int dropped) {
        auto j = v.to_json();
        j["dropped"] = dropped;
        result[name] = j;
        md << "\n## " << name << "\n\n";
        md << "Rows: " << (v.orientation == MatrixOrientation::judge_rows ? "judge" : "human") << "; columns: "
           << (v.orientation == MatrixOrientation::judge_rows ? "human" : "judge") << ".\n\n";
        md << "| |";
        for (const auto& l : v.matrix.labels) md << " " << l << " |";
        md << " Total |\n|---|";
        for (std::size_t i = 0; i <= v.matrix.labels.size(); ++i) md << "---:|";
        md << "\n";
        const auto rows_sum = v.matrix.row_sums();
        for (std::size_t r = 0; r < v.matrix.labels.size(); ++r) {
            md << "| " << v.matrix.labels[r] << " |";
            for (auto c : v.matrix.counts[r]) md << " " << c << " |";
            md << " " << rows_sum[r] << " |\n";
        }
        md << "| Total |";
        for (auto c : v.matrix.column_sums()) md << " " << c << " |";
        md << " " << v.matrix.total() << " |\n\n";
        md << fmt::format("Agreement {:.4f}, Cohen's kappa {}, n = {}", v.agreement,
                          v.kappa ? fmt::format("{:.4f}", *v.kappa) : std::string("undefined"), v.matrix.total());
        if (dropped) md << ", dropped " << dropped;
        md << ".\n";
    };

    if (has_human_correct) {
        std::map<std::string, std::string> judge, human;
        int dropped = 0;
        for (const auto& row : rows) {
            const auto& raw = row.at("human_correct");
            if (text::trim(raw).empty()) continue;
            const auto& id = row.at("question_id");
            human[id] = normalize_correct_label(raw);
            if (inline_correct) {
                judge[id] = normalize_correct_label(row.at("llm_correct"));
            } else if (auto it = probes.find(id); it != probes.end()) {
                if (it->second.utilization) {
                    judge[id] = it->second.utilization->answer_with_correct ? "correct" : "incorrect";
                } else {
                    human.erase(id);
                    ++dropped;
                }
            }
        }
        emit("correctness", memprobe::validate_judge(judge, human, kCorrectnessLabels, MatrixOrientation::judge_rows),
             dropped);
    }
    if (has_human_failure) {
        std::map<std::string, std::string> judge, human;
        int dropped = 0;
        for (const auto& row : rows) {
            const auto& raw = row.at("human_failure_category");
            if (text::trim(raw).empty()) continue;
            const auto& id = row.at("question_id");
            human[id] = normalize_failure_label(raw);
            if (inline_failure) {
                judge[id] = normalize_failure_label(row.at("llm_failure_category"));
            } else if (auto it = probes.find(id); it != probes.end()) {
                const auto category = it->second.failure.category;
                if (category == FailureCategory::correct || category == FailureCategory::unclassified) {
                    human.erase(id);
                    ++dropped;
                } else {
                    judge[id] = std::string(to_string(category));
                }
            }
        }
        emit("failure", memprobe::validate_judge(judge, human, kFailureLabels, MatrixOrientation::human_rows),
             dropped);
    }

    const auto out = config_.out_dir / "report";
    io::write_file_atomic(out / "judge_validation.json", result.dump(2) + "\n");
    io::write_file_atomic(out / "judge_validation.md", md.str());
    return result;
}

void write_synthetic_corpus(const synthetic::Options& options, const fs::path& path) {
    Corpus corpus{synthetic::generate(options)};
    io::write_file_atomic(path, corpus_to_json(corpus).dump(2) + "\n");
}

}  // namespace memprobe
