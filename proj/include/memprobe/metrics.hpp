#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "memprobe/corpus.hpp"
#include "memprobe/memory_store.hpp"
#include "memprobe/probes.hpp"
#include "memprobe/qa_engine.hpp"
#include "memprobe/retrieval.hpp"

namespace memprobe {

/// Lowercase, strip ASCII punctuation, drop articles, split on whitespace.
std::vector<std::string> normalize_answer_tokens(std::string_view s);

/// Token-overlap F1 over the normalized multisets. Both empty gives 1, one
/// empty gives 0.
double token_f1(std::string_view prediction, std::string_view gold);

/// Sample Pearson correlation. Fewer than two points or a constant
/// coordinate raises StatisticError.
double pearson_r(const std::vector<std::pair<double, double>>& points);

struct ConfusionMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<long>> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::vector<std::string> labels);
    ConfusionMatrix(std::vector<std::string> labels, std::vector<std::vector<long>> counts);

    long total() const;
    long diagonal() const;
    std::vector<long> row_sums() const;
    std::vector<long> column_sums() const;
    double agreement() const;

    nlohmann::json to_json() const;
};

/// (p_o - p_e) / (1 - p_e). Raises StatisticError for an empty matrix or
/// when p_e = 1.
double cohens_kappa(const ConfusionMatrix& m);

/// Which labeler indexes the rows of the produced matrix.
enum class MatrixOrientation { judge_rows, human_rows };

struct JudgeValidation {
    ConfusionMatrix matrix;
    MatrixOrientation orientation = MatrixOrientation::judge_rows;
    double agreement = 0.0;
    /// Unset when chance agreement is 1 (every label in one class).
    std::optional<double> kappa;

    nlohmann::json to_json() const;
};

/// Aligns the two label maps on question id and tabulates them. Ids present
/// on only one side raise AlignmentError; labels outside `labels` raise
/// ArgumentError.
JudgeValidation validate_judge(const std::map<std::string, std::string>& judge_labels,
                               const std::map<std::string, std::string>& human_labels,
                               const std::vector<std::string>& labels,
                               MatrixOrientation orientation = MatrixOrientation::judge_rows);

struct GridCell {
    WriteStrategy write_strategy = WriteStrategy::basic_rag;
    RetrievalMethod retrieval_method = RetrievalMethod::cosine;
    int k = 5;
    int n_questions = 0;
    double accuracy = 0.0;
    double token_f1 = 0.0;
    double precision_at_k = 0.0;
    /// Keys: beneficial, harmful, ignored, neutral.
    std::map<std::string, double> utilization_rates;
    /// Keys: retrieval_failure, utilization_failure, hallucination, unclassified.
    std::map<std::string, double> failure_rates;
    /// Questions whose utilization verdict was unusable.
    int utilization_excluded = 0;
    /// Questions with no outcome (answer call failed).
    int skipped = 0;

    std::string config_id() const;
    nlohmann::json to_json() const;
};

GridCell grid_cell_from_json(const nlohmann::json& j);

/// Rates are over all aggregated questions, so accuracy plus the failure
/// rates (including unclassified) sums to 1.
GridCell aggregate_cell(WriteStrategy strategy, RetrievalMethod method, int k, const std::vector<QAItem>& questions,
                        const std::vector<QAOutcome>& outcomes, const std::vector<ProbeRecord>& probes);

}  // namespace memprobe
