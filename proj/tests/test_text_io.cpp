#include <fstream>
#include <map>

#include <gtest/gtest.h>

#include "memprobe/errors.hpp"
#include "memprobe/io.hpp"
#include "memprobe/text.hpp"
#include "test_support.hpp"

using namespace memprobe;
using Tokens = std::vector<std::string>;

TEST(Tokenize, SplitsOnNonAlphanumericRuns) {
    EXPECT_EQ(text::tokenize("Alice's dog, Max!"), (Tokens{"alice", "s", "dog", "max"}));
}

TEST(Tokenize, EmptyInput) { EXPECT_TRUE(text::tokenize("").empty()); }

TEST(Tokenize, CaseFolding) { EXPECT_EQ(text::tokenize("A a A"), (Tokens{"a", "a", "a"})); }

TEST(Tokenize, NonAsciiBytesSeparate) { EXPECT_EQ(text::tokenize("caf\xc3\xa9 ok"), (Tokens{"caf", "ok"})); }

TEST(RenderTemplate, ReplacesKnownKeysOnce) {
    std::map<std::string, std::string> values{{"a", "{b}"}, {"b", "x"}};
    EXPECT_EQ(text::render_template("{a} {b} {c} {", values), "{b} x {c} {");
}

TEST(Trim, StripsWhitespace) {
    EXPECT_EQ(text::trim("  a b \n"), "a b");
    EXPECT_EQ(text::trim("   "), "");
}

TEST(Jsonl, RoundTrip) {
    testkit::TempDir dir;
    const auto path = dir / "x.jsonl";
    io::append_jsonl(path, {{"a", 1}});
    io::append_jsonl(path, {{"a", 2}});
    const auto rows = io::read_jsonl(path);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1]["a"], 2);
}

TEST(Jsonl, MalformedLineNamesLineNumber) {
    testkit::TempDir dir;
    const auto path = dir / "bad.jsonl";
    io::write_file_atomic(path, "{\"a\":1}\n{\"a\":\n");
    try {
        io::read_jsonl(path);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
    EXPECT_EQ(io::read_jsonl_prefix(path).size(), 1u);
}

TEST(WriteFileAtomic, CreatesParentsAndReplaces) {
    testkit::TempDir dir;
    const auto path = dir / "a/b/c.txt";
    io::write_file_atomic(path, "one");
    io::write_file_atomic(path, "two");
    EXPECT_EQ(io::read_file(path), "two");
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(path.parent_path())) ++files;
    EXPECT_EQ(files, 1u);
}

TEST(ReadFile, MissingFileIsIoError) {
    EXPECT_THROW(io::read_file("/nonexistent/memprobe/file"), IoError);
}
