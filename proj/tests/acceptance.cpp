// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <spdlog/spdlog.h>

#include "memprobe/harness.hpp"
#include "memprobe/io.hpp"
#include "memprobe/llm/providers.hpp"
#include "memprobe/metrics.hpp"
#include "memprobe/probes.hpp"
#include "memprobe/report.hpp"
#include "memprobe/retrieval.hpp"
#include "test_support.hpp"

using namespace memprobe;
using nlohmann::json;

namespace {

struct Failure {
    std::string detail;
};

void require(bool ok, const std::string& detail) {
    if (!ok) throw Failure{detail};
}

std::string fmt_double(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

std::shared_ptr<llm::Gateway> offline_gateway(std::shared_ptr<llm::ChatProvider> chat, std::size_t dim) {
    return testkit::make_gateway(std::move(chat), dim);
}

MemoryStore make_store(const std::vector<std::string>& docs, llm::Gateway& gw) {
    MemoryStore store("acc", WriteStrategy::summarized_episodes);
    for (const auto& d : docs) {
        MemoryEntry e;
        e.strategy = WriteStrategy::summarized_episodes;
        e.content = d;
        e.timestamp = "t";
        store.upsert(e, UpsertMode::add(), gw);
    }
    return store;
}

std::vector<std::string> random_docs(std::mt19937_64& rng, int max_docs, int max_tokens, int vocab) {
    std::vector<std::string> docs(1 + rng() % max_docs);
    for (auto& d : docs) {
        const int n = 1 + static_cast<int>(rng() % max_tokens);
        for (int i = 0; i < n; ++i) d += (i ? " " : "") + std::string("t") + std::to_string(rng() % vocab);
    }
    return docs;
}

std::string random_query(std::mt19937_64& rng, int vocab) {
    std::string q;
    const int n = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) q += (i ? " " : "") + std::string("t") + std::to_string(rng() % (vocab + 3));
    return q;
}

std::vector<std::string> ids(const std::vector<ScoredEntry>& v) {
    std::vector<std::string> out;
    for (const auto& e : v) out.push_back(e.entry_id);
    return out;
}

// Brute-force Okapi BM25 written straight from the formula.
std::vector<std::size_t> bm25_oracle(const std::vector<std::string>& docs, const std::string& query, std::size_t k) {
    const double k1 = 1.2, b = 0.75;
    std::vector<std::vector<std::string>> toks;
    double total_len = 0;
    for (const auto& d : docs) {
        toks.push_back(text::tokenize(d));
        total_len += static_cast<double>(toks.back().size());
    }
    const double n = static_cast<double>(docs.size());
    const double avgdl = total_len / n;
    std::vector<double> scores(docs.size(), 0.0);
    for (const auto& q : text::tokenize(query)) {
        double df = 0;
        for (const auto& t : toks) df += std::count(t.begin(), t.end(), q) > 0 ? 1 : 0;
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (std::size_t i = 0; i < docs.size(); ++i) {
            const double tf = static_cast<double>(std::count(toks[i].begin(), toks[i].end(), q));
            if (tf == 0) continue;
            const double len = static_cast<double>(toks[i].size());
            scores[i] += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avgdl));
        }
    }
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (scores[i] > 0) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return scores[a] > scores[c]; });
    if (order.size() > k) order.resize(k);
    return order;
}

void bm25_equivalence() {
    std::mt19937_64 rng(101);
    auto gw = offline_gateway(std::make_shared<llm::ScriptedChatProvider>(), 16);
    for (int trial = 0; trial < 100; ++trial) {
        const auto docs = random_docs(rng, 50, 20, 12);
        const auto store = make_store(docs, *gw);
        const auto query = random_query(rng, 12);
        const int k = 1 + static_cast<int>(rng() % 10);
        const auto got = ids(retrieve_bm25(store, query, k).ranked);
        std::vector<std::string> want;
        for (auto i : bm25_oracle(docs, query, static_cast<std::size_t>(k))) want.push_back(store.entries()[i].entry_id);
        require(got == want, "corpus " + std::to_string(trial) + " query '" + query + "' ranking differs");
    }
}

void cosine_equivalence() {
    std::mt19937_64 rng(202);
    auto gw = offline_gateway(std::make_shared<llm::ScriptedChatProvider>(), 24);
    for (int trial = 0; trial < 100; ++trial) {
        const auto docs = random_docs(rng, 40, 10, 30);
        const auto store = make_store(docs, *gw);
        const auto query = random_query(rng, 30);
        const int k = 1 + static_cast<int>(rng() % 8);
        const auto q = gw->embed_one(query);
        std::vector<double> sims;
        for (const auto& e : store.entries()) {
            double dot = 0, na = 0, nb = 0;
            for (std::size_t i = 0; i < q.values.size(); ++i) {
                dot += q.values[i] * e.embedding.values[i];
                na += q.values[i] * q.values[i];
                nb += e.embedding.values[i] * e.embedding.values[i];
            }
            sims.push_back(dot / (std::sqrt(na) * std::sqrt(nb)));
        }
        std::vector<std::size_t> order(sims.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        // scores equal to 12 decimals are ties resolved by sequence
        for (auto& s : sims) s = std::round(s * 1e12) / 1e12;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });
        order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(k)));
        std::vector<std::string> want;
        for (auto i : order) want.push_back(store.entries()[i].entry_id);
        const auto got = retrieve_cosine(store, q, k).ranked;
        require(ids(got) == want, "store " + std::to_string(trial) + " top-k differs");
    }
}

void token_f1_suite() {
    const struct {
        const char *p, *g;
        double f;
    } cases[] = {
        {"a dog named Max", "the dog Max", 0.8},
        {"Paris", "paris", 1.0},
        {"in May 2023", "May 2023", 0.8},
        {"She went to the beach on Sunday", "the beach", 0.2857142857142857},
        {"7 May 2023", "May 7, 2023", 1.0},
        {"pottery class", "a pottery class and painting", 0.6666666666666666},
        {"The cat sat on the mat", "the cat sat", 0.6666666666666666},
        {"Yes", "No", 0.0},
        {"blue blue blue", "blue", 0.5},
        {"blue", "blue blue red", 0.5},
        {"Alice's sister", "Alice sister", 0.5},
        {"running, swimming, and biking", "biking and running", 0.8571428571428571},
        {"an apple a day", "apple", 0.6666666666666666},
        {"I don't have enough information to answer this question.", "Caroline", 0.0},
        {"Caroline moved from Sweden 4 years ago", "Sweden", 0.25},
        {"LGBTQ support group", "LGBTQ support group meeting", 0.8571428571428571},
        {"the the the", "a an", 1.0},
        {"!!!", "???", 1.0},
        {"Mel and her kids", "Melanie and her kids went camping", 0.6},
        {"10 years", "ten years", 0.5},
    };
    require(token_f1("went camping in the woods", "went camping in the woods") == 1.0, "identity");
    require(token_f1("red kayak", "blue violin") == 0.0, "disjoint");
    for (const auto& c : cases) {
        const double got = token_f1(c.p, c.g);
        require(std::abs(got - c.f) <= 1e-9, std::string(c.p) + " | " + c.g + " -> " + fmt_double(got));
    }
}

void utilization_mapping() {
    using U = UtilizationCategory;
    for (int mask = 0; mask < 8; ++mask) {
        const bool same = mask & 4, with = mask & 2, without = mask & 1;
        U want = U::neutral;
        if (same) want = U::ignored;
        else if (with && !without) want = U::beneficial;
        else if (!with && without) want = U::harmful;
        require(classify_utilization(same, with, without) == want, "combination " + std::to_string(mask));
    }
}

void precision_patterns() {
    for (int mask = 0; mask < 32; ++mask) {
        std::vector<RelevanceJudgment> js;
        int count = 0;
        for (int i = 0; i < 5; ++i) {
            const bool rel = mask & (1 << i);
            count += rel;
            js.push_back({"e" + std::to_string(i), rel, "", false});
        }
        require(precision_at_k(js, 5) == count / 5.0, "pattern " + std::to_string(mask));
    }
}

void pearson_grid() {
    const std::vector<std::pair<double, double>> grid = {
        {25.5, 77.9}, {14.8, 59.2}, {29.4, 81.1}, {21.2, 72.2}, {10.6, 49.4},
        {27.7, 77.3}, {21.8, 70.1}, {17.1, 62.7}, {22.3, 73.3},
    };
    const double r = pearson_r(grid);
    require(std::abs(r - 0.98) <= 0.005, "r = " + fmt_double(r));
}

void kappa_correctness() {
    const ConfusionMatrix m(kCorrectnessLabels, {{129, 9}, {7, 55}});
    const double kappa = cohens_kappa(m);
    require(m.agreement() == 0.92, "agreement " + fmt_double(m.agreement()));
    require(kappa >= 0.81 && kappa <= 0.83, "kappa " + fmt_double(kappa));
}

void failure_agreement() {
    const auto rows = parse_csv(io::read_file(MEMPROBE_FIXTURES "/failure_labels.csv"));
    std::map<std::string, std::string> judge, human;
    for (const auto& r : rows) {
        judge[r.at("question_id")] = normalize_failure_label(r.at("llm_failure_category"));
        human[r.at("question_id")] = normalize_failure_label(r.at("human_failure_category"));
    }
    const auto v = validate_judge(judge, human, kFailureLabels, MatrixOrientation::human_rows);
    require(v.matrix.total() == 200, "total " + std::to_string(v.matrix.total()));
    require(v.agreement == 0.88, "agreement " + fmt_double(v.agreement));
}

void hybrid_containment() {
    std::mt19937_64 rng(303);
    auto chat = std::make_shared<llm::ScriptedChatProvider>([&rng](const llm::ChatRequest&) {
        json idx = json::array();
        const int n = static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) idx.push_back(static_cast<int>(rng() % 25) - 2);
        return json{{"ranked_indices", idx}}.dump();
    });
    auto gw = offline_gateway(chat, 24);
    for (int trial = 0; trial < 100; ++trial) {
        const auto docs = random_docs(rng, 40, 10, 15);
        const auto store = make_store(docs, *gw);
        const auto query = random_query(rng, 15);
        const int k = 1 + static_cast<int>(rng() % 6);
        const Bm25Index index(store);
        const auto r = retrieve_hybrid(store, index, query, k, *gw);
        std::set<std::string> allowed;
        for (const auto& e : retrieve_cosine(store, query, 2 * k, *gw).ranked) allowed.insert(e.entry_id);
        for (const auto& e : retrieve_bm25(store, index, query, 2 * k).ranked) allowed.insert(e.entry_id);
        require(r.pool.has_value(), "no pool recorded");
        std::set<std::string> pool;
        for (const auto& e : *r.pool) pool.insert(e.entry_id);
        for (const auto& id : pool) require(allowed.contains(id), "pool entry outside candidate union");
        for (const auto& e : r.ranked) require(pool.contains(e.entry_id), "ranked entry outside pool");
        require(r.ranked.size() <= static_cast<std::size_t>(k), "more than k results");
    }
}

struct SyntheticRun {
    testkit::TempDir dir;
    RunConfig config;
    std::vector<StoreSummary> stores;
    EvalSummary eval;
    Corpus corpus;
};

std::unique_ptr<SyntheticRun> synthetic_run(std::vector<WriteStrategy> strategies,
                                            std::vector<RetrievalMethod> methods) {
    auto run = std::make_unique<SyntheticRun>();
    synthetic::Options options;
    options.seed = 42;
    write_synthetic_corpus(options, run->dir / "corpus.json");
    run->config.corpus_path = run->dir / "corpus.json";
    run->config.provider = ProviderKind::mock;
    run->config.embedder = "hash:1536";
    run->config.out_dir = run->dir / "run";
    run->config.strategies = std::move(strategies);
    run->config.methods = std::move(methods);
    Harness h(run->config);
    run->stores = h.build();
    run->eval = h.eval();
    run->corpus = h.corpus();
    return run;
}

void synthetic_end_to_end() {
    const auto run = synthetic_run({WriteStrategy::basic_rag}, {RetrievalMethod::cosine, RetrievalMethod::bm25});
    require(run->stores.size() == 1 && run->stores[0].write_llm_calls == 0, "basic_rag made write calls");
    const auto& qa = run->corpus.at(0).qa;
    require(qa.size() == 9, "expected 9 questions");
    const auto store = MemoryStore::load(
        store_path(run->config.out_dir, run->corpus.at(0).conversation.conversation_id, WriteStrategy::basic_rag));
    for (const auto& cell : run->eval.cells) {
        require(cell.accuracy == 1.0, cell.config_id() + " accuracy " + fmt_double(cell.accuracy));
        const auto outcomes = io::read_jsonl(run->config.out_dir / "results" / cell.config_id() / "outcomes.jsonl");
        require(outcomes.size() == qa.size(), cell.config_id() + " missing outcomes");
        for (std::size_t i = 0; i < qa.size(); ++i) {
            const auto o = qa_outcome_from_json(outcomes[i]);
            require(!o.retrieval.ranked.empty(), qa[i].question_id + ": nothing retrieved");
            const auto& top = store.at(o.retrieval.ranked.front().entry_id);
            const auto& evidence = qa[i].evidence_turn_ids.value();
            const bool hit = std::any_of(evidence.begin(), evidence.end(), [&](const std::string& t) {
                return std::find(top.source_turn_ids.begin(), top.source_turn_ids.end(), t) !=
                       top.source_turn_ids.end();
            });
            require(hit, cell.config_id() + " " + qa[i].question_id + ": evidence chunk not at rank 1");
        }
    }
    require(run->eval.cells.size() == 2, "expected two cells");
}

void call_accounting() {
    const auto run = synthetic_run({std::begin(kAllStrategies), std::end(kAllStrategies)},
                                   {std::begin(kAllMethods), std::end(kAllMethods)});
    for (const auto& s : run->stores) {
        if (s.strategy == WriteStrategy::extracted_facts) {
            require(s.write_llm_calls >= s.sessions, "facts: " + std::to_string(s.write_llm_calls) + " calls for " +
                                                         std::to_string(s.sessions) + " sessions");
        } else if (s.strategy == WriteStrategy::summarized_episodes) {
            require(s.write_llm_calls == s.sessions, "summaries: " + std::to_string(s.write_llm_calls) +
                                                         " calls for " + std::to_string(s.sessions) + " sessions");
        } else {
            require(s.write_llm_calls == 0, "basic_rag made write calls");
        }
    }
    for (const auto& acc : run->eval.accounting) {
        if (acc.config_id.find("hybrid_rerank") != std::string::npos) continue;
        require(acc.answer_calls == 2 * acc.questions,
                acc.config_id + ": " + std::to_string(acc.answer_calls) + " answer calls for " +
                    std::to_string(acc.questions) + " questions");
        require(acc.rerank_calls == 0, acc.config_id + " made rerank calls");
    }
}

void determinism() {
    auto all_strategies = std::vector<WriteStrategy>{std::begin(kAllStrategies), std::end(kAllStrategies)};
    auto all_methods = std::vector<RetrievalMethod>{std::begin(kAllMethods), std::end(kAllMethods)};
    const auto a = synthetic_run(all_strategies, all_methods);
    const auto b = synthetic_run(all_strategies, all_methods);
    const auto grid_a = io::read_file(a->config.out_dir / "report/grid.csv");
    const auto grid_b = io::read_file(b->config.out_dir / "report/grid.csv");
    require(grid_a == grid_b, "grid.csv differs");
    const auto ma = json::parse(io::read_file(a->config.out_dir / "manifest.json"));
    const auto mb = json::parse(io::read_file(b->config.out_dir / "manifest.json"));
    for (const auto* section : {"build", "eval"}) {
        require(ma.at(section).at("gateway") == mb.at(section).at("gateway"),
                std::string(section) + " call counters differ");
    }
    require(ma.at("eval").at("cells") == mb.at("eval").at("cells"), "per-cell accounting differs");
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    const std::vector<std::pair<std::string, std::function<void()>>> criteria = {
        {"BM25 matches brute-force Okapi scorer on 100 random corpora", bm25_equivalence},
        {"Cosine top-k matches full argsort on 100 random stores", cosine_equivalence},
        {"Token F1 identity, disjoint and 20 reference pairs", token_f1_suite},
        {"Utilization mapping over all 8 verdict combinations", utilization_mapping},
        {"Precision@5 equals relevant count / 5 for all patterns", precision_patterns},
        {"Pearson r over the nine reference grid points is 0.98 +/- 0.005", pearson_grid},
        {"Correctness matrix agreement 0.92 and kappa in [0.81, 0.83]", kappa_correctness},
        {"Failure-category fixture agreement is exactly 0.88", failure_agreement},
        {"Hybrid ranked within pool within candidate union on 100 stores", hybrid_containment},
        {"Synthetic end-to-end: evidence at rank 1, accuracy 1.0, no write calls", synthetic_end_to_end},
        {"Call accounting per session and two answer calls per question", call_accounting},
        {"Two synthetic runs give identical grid.csv and call counts", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        std::string status = "PASS", detail;
        try {
            criteria[i].second();
        } catch (const Failure& f) {
            status = "FAIL";
            detail = f.detail;
        } catch (const std::exception& e) {
            status = "FAIL";
            detail = std::string("exception: ") + e.what();
        }
        if (status == "FAIL") ++failures;
        std::printf("[%s] %2zu. %s%s%s\n", status.c_str(), i + 1, criteria[i].first.c_str(), detail.empty() ? "" : " -- ",
                    detail.c_str());
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
