#include <set>

#include <gtest/gtest.h>

#include "memprobe/errors.hpp"
#include "memprobe/harness.hpp"
#include "memprobe/io.hpp"
#include "test_support.hpp"

using namespace memprobe;
using nlohmann::json;

namespace {

class HarnessTest : public ::testing::Test {
  protected:
    void SetUp() override {
        synthetic::Options options;
        options.seed = 7;
        write_synthetic_corpus(options, corpus_path());
    }

    void write_corpus(const synthetic::Options& options) { write_synthetic_corpus(options, corpus_path()); }

    fs::path corpus_path() const { return dir_ / "corpus.json"; }

    RunConfig config(const std::string& out = "run") const {
        RunConfig c;
        c.corpus_path = corpus_path();
        c.provider = ProviderKind::mock;
        c.embedder = "hash:1536";
        c.out_dir = dir_ / out;
        c.max_in_flight = 4;
        return c;
    }

    static std::string read(const fs::path& p) { return io::read_file(p); }

    testkit::TempDir dir_;
};

const GridCell& find_cell(const std::vector<GridCell>& cells, const std::string& id) {
    for (const auto& c : cells) {
        if (c.config_id() == id) return c;
    }
    throw NotFoundError(id);
}

}  // namespace

TEST(RunConfigParse, KeysValuesAndComments) {
    const auto c = parse_config(
        "# comment\n"
        "k = 3\n"
        "strategies = basic_rag, summarized_episodes  # trailing\n"
        "methods = bm25\n"
        "provider = mock\n"
        "embedder = hash:64\n"
        "bm25_k1 = 1.5\n");
    EXPECT_EQ(c.k, 3);
    EXPECT_EQ(c.strategies, (std::vector<WriteStrategy>{WriteStrategy::basic_rag, WriteStrategy::summarized_episodes}));
    EXPECT_EQ(c.methods, (std::vector<RetrievalMethod>{RetrievalMethod::bm25}));
    EXPECT_EQ(c.provider, ProviderKind::mock);
    EXPECT_DOUBLE_EQ(c.bm25_k1, 1.5);
    EXPECT_EQ(c.judge_model(), c.backbone_model_id);
}

TEST(RunConfigParse, Defaults) {
    const RunConfig c;
    EXPECT_EQ(c.k, 5);
    EXPECT_EQ(c.pool_multiplier, 2);
    EXPECT_EQ(c.provider, ProviderKind::replay);
    EXPECT_EQ(c.strategies.size(), 3u);
    EXPECT_EQ(c.methods.size(), 3u);
    EXPECT_EQ(c.effective_cache_dir(), fs::path("run") / "cache");
}

TEST(RunConfigParse, Errors) {
    RunConfig c;
    EXPECT_THROW(c.set("colour", "blue"), ArgumentError);
    EXPECT_THROW(c.set("k", "five"), ArgumentError);
    EXPECT_THROW(c.set("provider", "openai"), ArgumentError);
    EXPECT_THROW(c.set("embedder", "hash:1"), ArgumentError);
    EXPECT_THROW(c.set("strategies", "graph"), ArgumentError);
    EXPECT_THROW(parse_config("k 5\n"), ParseError);
    c.k = 0;
    EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(RunConfigParse, LiveProviderNeedsKey) {
    RunConfig c;
    c.provider = ProviderKind::live;
    c.api_key_env = "MEMPROBE_SURELY_UNSET_KEY";
    ::unsetenv("MEMPROBE_SURELY_UNSET_KEY");
    EXPECT_THROW(Harness{c}, ProviderError);
}

TEST_F(HarnessTest, BasicRagBuildMakesNoChatCalls) {
    auto c = config();
    c.strategies = {WriteStrategy::basic_rag};
    Harness h(c);
    const auto stores = h.build();
    ASSERT_EQ(stores.size(), 1u);
    EXPECT_EQ(stores[0].write_llm_calls, 0);
    EXPECT_EQ(stores[0].entries, 9u);
    EXPECT_EQ(h.gateway().counters().chat_requests, 0u);
    EXPECT_TRUE(fs::exists(store_path(c.out_dir, stores[0].conversation_id, WriteStrategy::basic_rag)));
}

TEST_F(HarnessTest, WriteCallAccountingPerSession) {
    synthetic::Options o;
    o.seed = 3;
    o.n_sessions = 4;
    write_corpus(o);
    auto c = config();
    c.strategies = {WriteStrategy::extracted_facts, WriteStrategy::summarized_episodes};
    Harness h(c);
    const auto stores = h.build();
    ASSERT_EQ(stores.size(), 2u);
    EXPECT_GE(stores[0].write_llm_calls, 4);
    EXPECT_EQ(stores[1].write_llm_calls, 4);
    EXPECT_EQ(stores[1].entries, 4u);
    EXPECT_EQ(static_cast<std::uint64_t>(stores[0].write_llm_calls + stores[1].write_llm_calls),
              h.gateway().counters().chat_requests);
}

TEST_F(HarnessTest, FullGridOnSyntheticCorpus) {
    Harness h(config());
    h.build();
    const auto summary = h.eval();
    ASSERT_EQ(summary.cells.size(), 9u);
    for (const auto* id : {"basic_rag__cosine__k5", "basic_rag__bm25__k5"}) {
        const auto& cell = find_cell(summary.cells, id);
        EXPECT_DOUBLE_EQ(cell.accuracy, 1.0) << id;
        EXPECT_EQ(cell.n_questions, 9);
    }
    for (const auto& acc : summary.accounting) {
        if (acc.config_id.find("hybrid") == std::string::npos) {
            EXPECT_EQ(acc.answer_calls, 2 * acc.questions) << acc.config_id;
            EXPECT_EQ(acc.rerank_calls, 0);
        }
    }
    const auto out = config().out_dir;
    for (const auto* f : {"report/grid.csv", "report/grid.json", "report/report.md", "manifest.json",
                          "results/basic_rag__cosine__k5/outcomes.jsonl", "results/basic_rag__cosine__k5/probes.jsonl",
                          "results/basic_rag__cosine__k5/traces.jsonl",
                          "results/control/answers_without_memory.jsonl"}) {
        EXPECT_TRUE(fs::exists(out / f)) << f;
    }
    const auto manifest = json::parse(read(out / "manifest.json"));
    EXPECT_EQ(manifest.at("eval").at("cells").size(), 9u);
    EXPECT_FALSE(manifest.at("chat_digests").empty());
    EXPECT_TRUE(manifest.at("prompts").contains("extraction"));
}

TEST_F(HarnessTest, WarmRerunMakesNoProviderCalls) {
    {
        Harness h(config());
        h.build();
        h.eval();
    }
    const auto first = read(config().out_dir / "report/grid.csv");
    Harness again(config());
    again.build();
    again.eval();
    EXPECT_EQ(again.gateway().counters().chat_provider_calls, 0u);
    EXPECT_EQ(read(config().out_dir / "report/grid.csv"), first);
}

TEST_F(HarnessTest, ResumesFromPartialResults) {
    {
        Harness h(config());
        h.build();
        h.eval();
    }
    const auto out = config().out_dir;
    const auto grid = read(out / "report/grid.csv");
    const auto cell_dir = out / "results/extracted_facts__bm25__k5";
    auto truncate = [](const fs::path& p, std::size_t keep, const std::string& tail) {
        const auto lines = io::read_jsonl(p);
        io::write_file_atomic(p, io::to_jsonl({lines.begin(), lines.begin() + keep}) + tail);
    };
    truncate(cell_dir / "outcomes.jsonl", 4, "{\"question_id\": \"trunc");
    truncate(cell_dir / "probes.jsonl", 3, "");

    Harness resumed(config());
    resumed.eval();
    EXPECT_EQ(read(out / "report/grid.csv"), grid);
    const auto outcomes = io::read_jsonl(cell_dir / "outcomes.jsonl");
    const auto probes = io::read_jsonl(cell_dir / "probes.jsonl");
    EXPECT_EQ(outcomes.size(), 9u);
    EXPECT_EQ(probes.size(), 9u);
    std::set<std::string> ids;
    for (const auto& o : outcomes) ids.insert(o.at("question_id").get<std::string>());
    EXPECT_EQ(ids.size(), 9u);
}

TEST_F(HarnessTest, SingleCellGrid) {
    auto c = config();
    c.strategies = {WriteStrategy::summarized_episodes};
    c.methods = {RetrievalMethod::hybrid_rerank};
    Harness h(c);
    h.build();
    const auto summary = h.eval();
    ASSERT_EQ(summary.cells.size(), 1u);
    EXPECT_EQ(summary.cells[0].config_id(), "summarized_episodes__hybrid_rerank__k5");
    EXPECT_EQ(h.report().size(), 1u);
}

TEST_F(HarnessTest, ReportRecomputesFromStoredRecords) {
    Harness h(config());
    h.build();
    h.eval();
    const auto grid = read(config().out_dir / "report/grid.csv");
    fs::remove(config().out_dir / "report/grid.csv");
    Harness reporter(config());
    EXPECT_EQ(reporter.report().size(), 9u);
    EXPECT_EQ(read(config().out_dir / "report/grid.csv"), grid);
}

TEST_F(HarnessTest, ReplayReproducesMockRun) {
    {
        Harness h(config("recorded"));
        h.build();
        h.eval();
    }
    auto c = config("replayed");
    c.provider = ProviderKind::replay;
    c.cache_dir = config("recorded").out_dir / "cache";
    Harness replay(c);
    replay.build();
    replay.eval();
    EXPECT_EQ(read(c.out_dir / "report/grid.csv"), read(config("recorded").out_dir / "report/grid.csv"));
}

TEST_F(HarnessTest, ReplayWithoutFixturesFails) {
    auto c = config();
    c.provider = ProviderKind::replay;
    c.strategies = {WriteStrategy::summarized_episodes};
    Harness h(c);
    EXPECT_THROW(h.build(), FixtureMissingError);
}

TEST_F(HarnessTest, DeterministicAcrossRuns) {
    std::vector<std::string> grids;
    std::vector<json> counts;
    for (const auto* out : {"a", "b"}) {
        Harness h(config(out));
        h.build();
        h.eval();
        grids.push_back(read(config(out).out_dir / "report/grid.csv"));
        const auto m = json::parse(read(config(out).out_dir / "manifest.json"));
        counts.push_back({m.at("build").at("gateway"), m.at("eval").at("cells"), m.at("chat_digests")});
    }
    EXPECT_EQ(grids[0], grids[1]);
    EXPECT_EQ(counts[0], counts[1]);
}

TEST_F(HarnessTest, ValidateJudgeWithInlineLabels) {
    Harness h(config());
    const auto result = h.validate_judge(MEMPROBE_FIXTURES "/correctness_labels.csv", std::nullopt);
    EXPECT_DOUBLE_EQ(result.at("correctness").at("agreement").get<double>(), 0.92);
    EXPECT_NEAR(result.at("correctness").at("kappa").get<double>(), 0.8146, 5e-5);
    EXPECT_TRUE(fs::exists(config().out_dir / "report/judge_validation.md"));

    const auto failure = h.validate_judge(MEMPROBE_FIXTURES "/failure_labels.csv", std::nullopt);
    EXPECT_DOUBLE_EQ(failure.at("failure").at("agreement").get<double>(), 0.88);
}

TEST_F(HarnessTest, ValidateJudgeAgainstProbeRecords) {
    Harness h(config());
    h.build();
    h.eval();
    const auto probes = io::read_jsonl(h.results_dir("basic_rag__cosine__k5") / "probes.jsonl");
    std::string csv = "question_id,human_correct\n";
    for (const auto& p : probes) csv += p.at("question_id").get<std::string>() + ",true\n";
    io::write_file_atomic(dir_ / "labels.csv", csv);
    const auto result = h.validate_judge(dir_ / "labels.csv", std::string("basic_rag__cosine__k5"));
    EXPECT_DOUBLE_EQ(result.at("correctness").at("agreement").get<double>(), 1.0);
    EXPECT_TRUE(result.at("correctness").at("kappa").is_null());
    EXPECT_THROW(h.validate_judge(dir_ / "labels.csv", std::nullopt), ArgumentError);
}
