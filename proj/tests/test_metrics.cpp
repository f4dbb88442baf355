#include <random>

#include <gtest/gtest.h>

#include "memprobe/errors.hpp"
#include "memprobe/io.hpp"
#include "memprobe/metrics.hpp"
#include "memprobe/report.hpp"

using namespace memprobe;

namespace {

struct F1Case {
    const char* prediction;
    const char* gold;
    double expected;
};

// Values computed with an independent reference implementation of
// SQuAD-style token F1.
const F1Case kF1Cases[] = {
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

// (token F1 %, accuracy %) per LoCoMo reference grid cell.
const std::vector<std::pair<double, double>> kReferenceGrid = {
    {25.5, 77.9}, {14.8, 59.2}, {29.4, 81.1}, {21.2, 72.2}, {10.6, 49.4},
    {27.7, 77.3}, {21.8, 70.1}, {17.1, 62.7}, {22.3, 73.3},
};

ConfusionMatrix correctness_matrix() {
    // rows: judge label, columns: human label
    return ConfusionMatrix(kCorrectnessLabels, {{129, 9}, {7, 55}});
}

std::map<std::string, std::string> column(const std::vector<std::map<std::string, std::string>>& rows,
                                          const std::string& name) {
    std::map<std::string, std::string> out;
    for (const auto& r : rows) out[r.at("question_id")] = r.at(name);
    return out;
}

}  // namespace

TEST(TokenF1, ReferenceCases) {
    for (const auto& c : kF1Cases) {
        EXPECT_NEAR(token_f1(c.prediction, c.gold), c.expected, 1e-9) << c.prediction << " | " << c.gold;
    }
}

TEST(TokenF1, SymmetricAndBounded) {
    for (const auto& c : kF1Cases) {
        const double f = token_f1(c.prediction, c.gold);
        EXPECT_DOUBLE_EQ(f, token_f1(c.gold, c.prediction));
        EXPECT_GE(f, 0.0);
        EXPECT_LE(f, 1.0);
    }
}

TEST(TokenF1, Normalization) {
    EXPECT_EQ(normalize_answer_tokens("The Cat's  hat!"), (std::vector<std::string>{"cats", "hat"}));
    EXPECT_EQ(token_f1("", "something"), 0.0);
    EXPECT_EQ(token_f1("", ""), 1.0);
}

TEST(Pearson, ReferenceGridCorrelation) {
    EXPECT_NEAR(pearson_r(kReferenceGrid), 0.98, 0.005);
    EXPECT_NEAR(pearson_r(kReferenceGrid), 0.9808893113965812, 1e-12);
}

TEST(Pearson, AffineInvariance) {
    std::vector<std::pair<double, double>> scaled;
    for (auto [x, y] : kReferenceGrid) scaled.push_back({3.0 * x - 7.0, 0.5 * y + 100.0});
    EXPECT_NEAR(pearson_r(scaled), pearson_r(kReferenceGrid), 1e-12);
    std::vector<std::pair<double, double>> flipped;
    for (auto [x, y] : kReferenceGrid) flipped.push_back({-x, y});
    EXPECT_NEAR(pearson_r(flipped), -pearson_r(kReferenceGrid), 1e-12);
}

TEST(Pearson, DegenerateInputs) {
    EXPECT_THROW(pearson_r({{1, 2}}), StatisticError);
    EXPECT_THROW(pearson_r({{1, 2}, {1, 3}, {1, 4}}), StatisticError);
}

TEST(Kappa, CorrectnessValidationTable) {
    const auto m = correctness_matrix();
    EXPECT_EQ(m.total(), 200);
    EXPECT_DOUBLE_EQ(m.agreement(), 0.92);
    EXPECT_NEAR(cohens_kappa(m), 0.8146431881371641, 1e-12);
    EXPECT_NEAR(cohens_kappa(m), 0.81, 0.01);
}

TEST(Kappa, LabelPermutationInvariant) {
    const ConfusionMatrix swapped({"incorrect", "correct"}, {{55, 7}, {9, 129}});
    EXPECT_NEAR(cohens_kappa(swapped), cohens_kappa(correctness_matrix()), 1e-12);
    const ConfusionMatrix transposed(kCorrectnessLabels, {{129, 7}, {9, 55}});
    EXPECT_NEAR(cohens_kappa(transposed), cohens_kappa(correctness_matrix()), 1e-12);
}

TEST(Kappa, PerfectAndDegenerate) {
    EXPECT_DOUBLE_EQ(cohens_kappa(ConfusionMatrix({"a", "b"}, {{10, 0}, {0, 5}})), 1.0);
    EXPECT_THROW(cohens_kappa(ConfusionMatrix({"a", "b"}, {{10, 0}, {0, 0}})), StatisticError);
    EXPECT_THROW(cohens_kappa(ConfusionMatrix({"a", "b"})), StatisticError);
    EXPECT_THROW(ConfusionMatrix({"a", "b"}, {{1, 2}}), ArgumentError);
    EXPECT_THROW(ConfusionMatrix({"a", "b"}, {{1, -2}, {0, 0}}), ArgumentError);
}

TEST(JudgeValidation, CorrectnessFixture) {
    const auto rows = parse_csv(io::read_file(MEMPROBE_FIXTURES "/correctness_labels.csv"));
    auto judge = column(rows, "llm_correct");
    auto human = column(rows, "human_correct");
    for (auto* m : {&judge, &human}) {
        for (auto& [id, label] : *m) label = normalize_correct_label(label);
    }
    const auto v = validate_judge(judge, human, kCorrectnessLabels);
    EXPECT_EQ(v.matrix.counts, correctness_matrix().counts);
    EXPECT_DOUBLE_EQ(v.agreement, 0.92);
    EXPECT_NEAR(v.kappa.value(), 0.8146, 5e-5);
}

TEST(JudgeValidation, FailureFixtureHumanRows) {
    const auto rows = parse_csv(io::read_file(MEMPROBE_FIXTURES "/failure_labels.csv"));
    const auto v = validate_judge(column(rows, "llm_failure_category"), column(rows, "human_failure_category"),
                                  kFailureLabels, MatrixOrientation::human_rows);
    EXPECT_EQ(v.matrix.total(), 200);
    EXPECT_DOUBLE_EQ(v.agreement, 0.88);
    EXPECT_EQ(v.matrix.row_sums(), (std::vector<long>{154, 39, 7}));
    EXPECT_EQ(v.matrix.column_sums(), (std::vector<long>{163, 31, 6}));
    EXPECT_EQ(v.matrix.counts, (std::vector<std::vector<long>>{{147, 7, 0}, {16, 23, 0}, {0, 1, 6}}));
}

TEST(JudgeValidation, MisalignedIdsRejected) {
    std::map<std::string, std::string> judge{{"q1", "correct"}, {"q2", "incorrect"}};
    std::map<std::string, std::string> human{{"q1", "correct"}, {"q3", "incorrect"}};
    try {
        validate_judge(judge, human, kCorrectnessLabels);
        FAIL();
    } catch (const AlignmentError& e) {
        EXPECT_NE(std::string(e.what()).find("q2"), std::string::npos);
    }
    EXPECT_THROW(validate_judge({{"q1", "maybe"}}, {{"q1", "correct"}}, kCorrectnessLabels), ArgumentError);
}

namespace {

QAItem item(const std::string& id) {
    QAItem q;
    q.question_id = id;
    q.conversation_id = "c";
    q.question = "q?";
    q.gold_answer = "Berlin";
    return q;
}

ProbeRecord probe(const std::string& id, FailureCategory f, std::optional<UtilizationCategory> u, double p) {
    ProbeRecord r;
    r.question_id = id;
    r.failure.category = f;
    r.precision_at_k = p;
    if (u) {
        UtilizationVerdict v;
        v.category = *u;
        r.utilization = v;
    }
    return r;
}

}  // namespace

TEST(Aggregate, RatesPartitionQuestions) {
    std::mt19937_64 rng(9);
    const FailureCategory fails[] = {FailureCategory::correct, FailureCategory::retrieval_failure,
                                     FailureCategory::utilization_failure, FailureCategory::hallucination,
                                     FailureCategory::unclassified};
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<QAItem> qs;
        std::vector<QAOutcome> os;
        std::vector<ProbeRecord> ps;
        const int n = 1 + static_cast<int>(rng() % 30);
        for (int i = 0; i < n; ++i) {
            const auto id = "q" + std::to_string(i);
            qs.push_back(item(id));
            os.push_back({id, "cfg", rng() % 2 ? "Berlin" : "Paris", "x", {}, 2});
            std::optional<UtilizationCategory> u;
            if (rng() % 5) u = static_cast<UtilizationCategory>(rng() % 4);
            ps.push_back(probe(id, fails[rng() % 5], u, (rng() % 6) / 5.0));
        }
        const auto cell = aggregate_cell(WriteStrategy::basic_rag, RetrievalMethod::bm25, 5, qs, os, ps);
        double failure_total = cell.accuracy;
        for (const auto& [k, v] : cell.failure_rates) failure_total += v;
        EXPECT_NEAR(failure_total, 1.0, 1e-12);
        double util_total = static_cast<double>(cell.utilization_excluded) / n;
        for (const auto& [k, v] : cell.utilization_rates) util_total += v;
        EXPECT_NEAR(util_total, 1.0, 1e-12);
        EXPECT_EQ(cell.n_questions, n);
    }
}

TEST(Aggregate, ValuesForSmallCell) {
    const std::vector<QAItem> qs = {item("a"), item("b")};
    const std::vector<QAOutcome> os = {{"a", "cfg", "Berlin", "x", {}, 2}, {"b", "cfg", "Paris", "x", {}, 2}};
    const std::vector<ProbeRecord> ps = {
        probe("a", FailureCategory::correct, UtilizationCategory::beneficial, 0.4),
        probe("b", FailureCategory::retrieval_failure, std::nullopt, 0.0)};
    const auto cell = aggregate_cell(WriteStrategy::extracted_facts, RetrievalMethod::cosine, 5, qs, os, ps);
    EXPECT_EQ(cell.config_id(), "extracted_facts__cosine__k5");
    EXPECT_DOUBLE_EQ(cell.accuracy, 0.5);
    EXPECT_DOUBLE_EQ(cell.token_f1, 0.5);
    EXPECT_DOUBLE_EQ(cell.precision_at_k, 0.2);
    EXPECT_DOUBLE_EQ(cell.utilization_rates.at("beneficial"), 0.5);
    EXPECT_DOUBLE_EQ(cell.failure_rates.at("retrieval_failure"), 0.5);
    EXPECT_EQ(cell.utilization_excluded, 1);
    const auto back = grid_cell_from_json(cell.to_json());
    EXPECT_EQ(back.to_json(), cell.to_json());
}

TEST(Aggregate, EmptyAndMisaligned) {
    EXPECT_THROW(aggregate_cell(WriteStrategy::basic_rag, RetrievalMethod::cosine, 5, {}, {}, {}), StatisticError);
    const std::vector<QAOutcome> os = {{"a", "cfg", "x", "y", {}, 2}};
    EXPECT_THROW(aggregate_cell(WriteStrategy::basic_rag, RetrievalMethod::cosine, 5, {item("a")}, os,
                                {probe("b", FailureCategory::correct, std::nullopt, 0)}),
                 AlignmentError);
}
