#include <fstream>

#include <gtest/gtest.h>

#include "memprobe/errors.hpp"
#include "memprobe/io.hpp"
#include "memprobe/memory_store.hpp"
#include "test_support.hpp"

using namespace memprobe;
using nlohmann::json;

namespace {

MemoryEntry fact_entry(const std::string& content) {
    MemoryEntry e;
    e.strategy = WriteStrategy::extracted_facts;
    e.content = content;
    e.session_index = 1;
    e.timestamp = "day 1";
    e.speakers = {"Alice"};
    e.fact_type = FactType::event;
    e.source_turn_ids = {"c1:1:1"};
    return e;
}

MemoryStore three_entry_store(llm::Gateway& gw) {
    MemoryStore store("c1", WriteStrategy::extracted_facts);
    store.upsert(fact_entry("Alice adopted a dog named Max"), UpsertMode::add(), gw);
    store.upsert(fact_entry("Bob moved to Paris"), UpsertMode::add(), gw);
    store.upsert(fact_entry("Alice likes pottery"), UpsertMode::add(), gw);
    store.add_write_llm_calls(4);
    return store;
}

}  // namespace

TEST(MemoryStore, AddAssignsSequentialIds) {
    auto gw = testkit::make_gateway(std::make_shared<llm::ScriptedChatProvider>());
    auto store = three_entry_store(*gw);
    ASSERT_EQ(store.size(), 3u);
    EXPECT_EQ(store.entries()[0].entry_id, "extracted_facts:c1:0");
    EXPECT_EQ(store.entries()[2].entry_id, "extracted_facts:c1:2");
    EXPECT_EQ(store.entries()[1].conversation_id, "c1");
    EXPECT_EQ(store.entries()[1].embedding, gw->embed_one("Bob moved to Paris"));
}

TEST(MemoryStore, UpdateReplacesInPlaceAndReembeds) {
    auto gw = testkit::make_gateway(std::make_shared<llm::ScriptedChatProvider>());
    auto store = three_entry_store(*gw);
    const auto id = store.upsert(fact_entry("Bob moved to Berlin"), UpsertMode::update("extracted_facts:c1:1"), *gw);
    EXPECT_EQ(id, "extracted_facts:c1:1");
    EXPECT_EQ(store.size(), 3u);
    EXPECT_EQ(store.entries()[1].content, "Bob moved to Berlin");
    EXPECT_EQ(store.entries()[1].embedding, gw->embed_one("Bob moved to Berlin"));
    // sequence numbers are never reused after an update
    EXPECT_EQ(store.upsert(fact_entry("new"), UpsertMode::add(), *gw), "extracted_facts:c1:3");
}

TEST(MemoryStore, UpdateOfMissingTargetFails) {
    auto gw = testkit::make_gateway(std::make_shared<llm::ScriptedChatProvider>());
    auto store = three_entry_store(*gw);
    const auto before = store;
    EXPECT_THROW(store.upsert(fact_entry("x"), UpsertMode::update("extracted_facts:c1:9"), *gw), NotFoundError);
    EXPECT_EQ(store, before);
    EXPECT_THROW(store.at("nope"), NotFoundError);
}

TEST(MemoryStore, RejectsInvalidEntries) {
    auto gw = testkit::make_gateway(std::make_shared<llm::ScriptedChatProvider>());
    MemoryStore store("c1", WriteStrategy::extracted_facts);
    EXPECT_THROW(store.upsert(fact_entry("   "), UpsertMode::add(), *gw), ArgumentError);
    auto wrong = fact_entry("x");
    wrong.strategy = WriteStrategy::basic_rag;
    EXPECT_THROW(store.upsert(wrong, UpsertMode::add(), *gw), ArgumentError);
    auto untyped = fact_entry("x");
    untyped.fact_type.reset();
    EXPECT_THROW(store.upsert(untyped, UpsertMode::add(), *gw), ArgumentError);
    EXPECT_TRUE(store.empty());
}

TEST(MemoryStore, SaveLoadRoundTrip) {
    testkit::TempDir dir;
    auto gw = testkit::make_gateway(std::make_shared<llm::ScriptedChatProvider>());
    auto store = three_entry_store(*gw);
    const auto path = store_path(dir.path(), "c1", WriteStrategy::extracted_facts);
    EXPECT_EQ(path, dir.path() / "memory" / "c1" / "extracted_facts.jsonl");
    store.save(path);
    const auto loaded = MemoryStore::load(path);
    EXPECT_EQ(loaded, store);
    EXPECT_EQ(loaded.write_llm_calls(), 4);
}

TEST(MemoryStore, TruncatedLineCitesLineNumber) {
    testkit::TempDir dir;
    auto gw = testkit::make_gateway(std::make_shared<llm::ScriptedChatProvider>());
    auto store = three_entry_store(*gw);
    const auto path = dir / "s.jsonl";
    store.save(path);
    auto lines = io::read_file(path);
    const auto second = lines.find('\n') + 1;
    const auto third = lines.find('\n', second);
    lines = lines.substr(0, second) + lines.substr(second, (third - second) / 2) + lines.substr(third);
    io::write_file_atomic(path, lines);
    try {
        MemoryStore::load(path);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
}

TEST(MemoryStore, FullDimensionEmbeddingsPersistInline) {
    testkit::TempDir dir;
    auto gw = testkit::make_gateway(std::make_shared<llm::ScriptedChatProvider>(), 1536);
    auto store = three_entry_store(*gw);
    const auto path = dir / "s.jsonl";
    store.save(path);
    const auto records = io::read_jsonl(path);
    ASSERT_EQ(records.size(), 3u);
    for (const auto& r : records) {
        EXPECT_EQ(r.at("embedding").size(), 1536u);
    }
}

TEST(MemoryStore, ParsesStrategyAndFactTypeNames) {
    EXPECT_EQ(parse_write_strategy("summarized_episodes"), WriteStrategy::summarized_episodes);
    EXPECT_THROW(parse_write_strategy("graph"), ArgumentError);
    EXPECT_EQ(parse_fact_type("personal_detail"), FactType::personal_detail);
    EXPECT_FALSE(parse_fact_type("gossip"));
}
