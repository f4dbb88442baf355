#include "memprobe/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "memprobe/errors.hpp"
#include "memprobe/text.hpp"

namespace memprobe {

using nlohmann::json;

std::vector<std::string> normalize_answer_tokens(std::string_view s) {
    std::string cleaned;
    cleaned.reserve(s.size());
    for (unsigned char c : s) {
        if (std::ispunct(c)) continue;
        cleaned += static_cast<char>(std::tolower(c));
    }
    std::vector<std::string> tokens;
    std::istringstream in(cleaned);
    std::string tok;
    while (in >> tok) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        tokens.push_back(tok);
    }
    return tokens;
}

double token_f1(std::string_view prediction, std::string_view gold) {
    const auto pred = normalize_answer_tokens(prediction);
    const auto ref = normalize_answer_tokens(gold);
    if (pred.empty() && ref.empty()) return 1.0;
    if (pred.empty() || ref.empty()) return 0.0;

    std::unordered_map<std::string, int> remaining;
    for (const auto& t : ref) ++remaining[t];
    int overlap = 0;
    for (const auto& t : pred) {
        auto it = remaining.find(t);
        if (it != remaining.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double p = static_cast<double>(overlap) / static_cast<double>(pred.size());
    const double r = static_cast<double>(overlap) / static_cast<double>(ref.size());
    return 2.0 * p * r / (p + r);
}

double pearson_r(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2) {
        throw StatisticError("correlation needs at least two points");
    }
    const double n = static_cast<double>(points.size());
    double mx = 0, my = 0;
    for (const auto& [x, y] : points) {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (const auto& [x, y] : points) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw StatisticError("correlation undefined: a coordinate has zero variance");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> l)
    : labels(std::move(l)), counts(labels.size(), std::vector<long>(labels.size(), 0)) {}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> l, std::vector<std::vector<long>> c)
    : labels(std::move(l)), counts(std::move(c)) {
    if (counts.size() != labels.size()) {
        throw ArgumentError("confusion matrix rows do not match label count");
    }
    for (const auto& row : counts) {
        if (row.size() != labels.size()) {
            throw ArgumentError("confusion matrix is not square");
        }
        for (long v : row) {
            if (v < 0) throw ArgumentError("confusion matrix has a negative count");
        }
    }
}

long ConfusionMatrix::total() const {
    long t = 0;
    for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
    return t;
}

long ConfusionMatrix::diagonal() const {
    long d = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) d += counts[i][i];
    return d;
}

std::vector<long> ConfusionMatrix::row_sums() const {
    std::vector<long> out;
    for (const auto& row : counts) out.push_back(std::accumulate(row.begin(), row.end(), 0L));
    return out;
}

std::vector<long> ConfusionMatrix::column_sums() const {
    std::vector<long> out(labels.size(), 0);
    for (const auto& row : counts) {
        for (std::size_t j = 0; j < row.size(); ++j) out[j] += row[j];
    }
    return out;
}

double ConfusionMatrix::agreement() const {
    const long t = total();
    if (t == 0) throw StatisticError("agreement undefined for an empty matrix");
    return static_cast<double>(diagonal()) / static_cast<double>(t);
}

json ConfusionMatrix::to_json() const {
    return {{"labels", labels}, {"counts", counts}, {"row_sums", row_sums()}, {"column_sums", column_sums()}};
}

double cohens_kappa(const ConfusionMatrix& m) {
    const double total = static_cast<double>(m.total());
    if (total <= 0) throw StatisticError("kappa undefined for an empty matrix");
    const auto rows = m.row_sums();
    const auto cols = m.column_sums();
    const double p_o = static_cast<double>(m.diagonal()) / total;
    double p_e = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        p_e += static_cast<double>(rows[i]) * static_cast<double>(cols[i]);
    }
    p_e /= total * total;
    if (p_e >= 1.0) throw StatisticError("kappa undefined: chance agreement is 1");
    return (p_o - p_e) / (1.0 - p_e);
}

json JudgeValidation::to_json() const {
    return {{"matrix", matrix.to_json()},
            {"rows", orientation == MatrixOrientation::judge_rows ? "judge" : "human"},
            {"n", matrix.total()},
            {"agreement", agreement},
            {"kappa", kappa ? nlohmann::json(*kappa) : nlohmann::json(nullptr)}};
}

JudgeValidation validate_judge(const std::map<std::string, std::string>& judge_labels,
                               const std::map<std::string, std::string>& human_labels,
                               const std::vector<std::string>& labels, MatrixOrientation orientation) {
    std::vector<std::string> offenders;
    for (const auto& [id, _] : judge_labels) {
        if (!human_labels.count(id)) offenders.push_back(id + " (no human label)");
    }
    for (const auto& [id, _] : human_labels) {
        if (!judge_labels.count(id)) offenders.push_back(id + " (no judge label)");
    }
    if (!offenders.empty()) {
        std::string msg = "label sets do not align: ";
        for (std::size_t i = 0; i < offenders.size() && i < 20; ++i) {
            msg += (i ? ", " : "") + offenders[i];
        }
        if (offenders.size() > 20) msg += ", ... (" + std::to_string(offenders.size()) + " total)";
        throw AlignmentError(msg);
    }

    auto index_of = [&](const std::string& label) {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == label) return i;
        }
        throw ArgumentError("label '" + label + "' is not one of the matrix labels");
    };

    JudgeValidation v;
    v.orientation = orientation;
    v.matrix = ConfusionMatrix(labels);
    for (const auto& [id, judge] : judge_labels) {
        const auto j = index_of(judge);
        const auto h = index_of(human_labels.at(id));
        if (orientation == MatrixOrientation::judge_rows) {
            ++v.matrix.counts[j][h];
        } else {
            ++v.matrix.counts[h][j];
        }
    }
    v.agreement = v.matrix.agreement();
    if (v.matrix.total() > 0) {
        try {
            v.kappa = cohens_kappa(v.matrix);
        } catch (const StatisticError&) {
        }
    }
    return v;
}

std::string GridCell::config_id() const { return make_config_id(write_strategy, retrieval_method, k); }

json GridCell::to_json() const {
    return {{"write_strategy", to_string(write_strategy)},
            {"retrieval_method", to_string(retrieval_method)},
            {"k", k},
            {"n", n_questions},
            {"accuracy", accuracy},
            {"token_f1", token_f1},
            {"precision_at_k", precision_at_k},
            {"utilization_rates", utilization_rates},
            {"failure_rates", failure_rates},
            {"utilization_excluded", utilization_excluded},
            {"skipped", skipped}};
}

GridCell grid_cell_from_json(const json& j) {
    GridCell c;
    c.write_strategy = parse_write_strategy(j.at("write_strategy").get<std::string>());
    c.retrieval_method = parse_retrieval_method(j.at("retrieval_method").get<std::string>());
    c.k = j.at("k").get<int>();
    c.n_questions = j.at("n").get<int>();
    c.accuracy = j.at("accuracy").get<double>();
    c.token_f1 = j.at("token_f1").get<double>();
    c.precision_at_k = j.at("precision_at_k").get<double>();
    c.utilization_rates = j.at("utilization_rates").get<std::map<std::string, double>>();
    c.failure_rates = j.at("failure_rates").get<std::map<std::string, double>>();
    c.utilization_excluded = j.value("utilization_excluded", 0);
    c.skipped = j.value("skipped", 0);
    return c;
}

GridCell aggregate_cell(WriteStrategy strategy, RetrievalMethod method, int k, const std::vector<QAItem>& questions,
                        const std::vector<QAOutcome>& outcomes, const std::vector<ProbeRecord>& probes) {
    if (outcomes.empty()) {
        throw StatisticError("cannot aggregate an empty cell " + make_config_id(strategy, method, k));
    }
    std::unordered_map<std::string, const QAItem*> by_id;
    for (const auto& q : questions) by_id[q.question_id] = &q;
    std::unordered_map<std::string, const ProbeRecord*> probe_by_id;
    for (const auto& p : probes) probe_by_id[p.question_id] = &p;

    std::vector<std::string> offenders;
    for (const auto& o : outcomes) {
        if (!by_id.count(o.question_id) || !probe_by_id.count(o.question_id)) offenders.push_back(o.question_id);
    }
    if (!offenders.empty() || probes.size() != outcomes.size()) {
        std::string msg = "outcomes and probe records cover different questions";
        if (!offenders.empty()) msg += ": " + offenders.front();
        throw AlignmentError(msg);
    }

    GridCell cell;
    cell.write_strategy = strategy;
    cell.retrieval_method = method;
    cell.k = k;
    cell.n_questions = static_cast<int>(outcomes.size());
    for (const char* key : {"beneficial", "harmful", "ignored", "neutral"}) cell.utilization_rates[key] = 0.0;
    for (const char* key : {"retrieval_failure", "utilization_failure", "hallucination", "unclassified"}) {
        cell.failure_rates[key] = 0.0;
    }

    int correct = 0;
    double f1_sum = 0, precision_sum = 0;
    std::map<std::string, int> util_counts, failure_counts;
    for (const auto& o : outcomes) {
        const auto& probe = *probe_by_id.at(o.question_id);
        f1_sum += token_f1(o.answer_with_memory, by_id.at(o.question_id)->gold_answer);
        precision_sum += probe.precision_at_k;
        if (probe.utilization) {
            ++util_counts[text::to_lower(to_string(probe.utilization->category))];
        } else {
            ++cell.utilization_excluded;
        }
        if (probe.failure.category == FailureCategory::correct) {
            ++correct;
        } else {
            ++failure_counts[std::string(to_string(probe.failure.category))];
        }
    }
    const double n = static_cast<double>(cell.n_questions);
    cell.accuracy = correct / n;
    cell.token_f1 = f1_sum / n;
    cell.precision_at_k = precision_sum / n;
    for (const auto& [key, count] : util_counts) cell.utilization_rates[key] = count / n;
    for (const auto& [key, count] : failure_counts) cell.failure_rates[key] = count / n;
    return cell;
}

}  // namespace memprobe
