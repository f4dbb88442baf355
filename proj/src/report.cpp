#include "memprobe/report.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include <spdlog/fmt/fmt.h>

#include "memprobe/errors.hpp"
#include "memprobe/io.hpp"
#include "memprobe/text.hpp"

namespace memprobe {

using nlohmann::json;

namespace {

const std::vector<std::string> kCsvColumns = {
    "write_strategy", "retrieval_method", "k",          "n",            "accuracy",
    "token_f1",       "precision_at_k",   "beneficial", "harmful",      "ignored",
    "neutral",        "fail_retrieval",   "fail_utilization", "fail_hallucination", "unclassified",
};

std::string exact(double v) { return fmt::format("{:.17g}", v); }
std::string pct(double v) { return fmt::format("{:.1f}", 100.0 * v); }
std::string three(double v) { return fmt::format("{:.3f}", v); }

double rate(const std::map<std::string, double>& m, const char* key) {
    auto it = m.find(key);
    return it == m.end() ? 0.0 : it->second;
}

std::string_view strategy_label(WriteStrategy s) {
    switch (s) {
        case WriteStrategy::basic_rag: return "Basic RAG";
        case WriteStrategy::extracted_facts: return "Extracted Facts";
        case WriteStrategy::summarized_episodes: return "Summarized Episodes";
    }
    return "";
}

std::string_view method_label(RetrievalMethod m) {
    switch (m) {
        case RetrievalMethod::cosine: return "Cosine";
        case RetrievalMethod::bm25: return "BM25";
        case RetrievalMethod::hybrid_rerank: return "Hybrid";
    }
    return "";
}

template <typename F>
double mean_of(const std::vector<const GridCell*>& cells, F f) {
    double s = 0;
    for (const auto* c : cells) s += f(*c);
    return cells.empty() ? 0.0 : s / static_cast<double>(cells.size());
}

std::string render_wide_grid(const std::vector<GridCell>& cells) {
    std::vector<RetrievalMethod> methods;
    std::vector<WriteStrategy> strategies;
    for (auto m : kAllMethods) {
        if (std::any_of(cells.begin(), cells.end(), [&](const GridCell& c) { return c.retrieval_method == m; })) {
            methods.push_back(m);
        }
    }
    for (auto s : kAllStrategies) {
        if (std::any_of(cells.begin(), cells.end(), [&](const GridCell& c) { return c.write_strategy == s; })) {
            strategies.push_back(s);
        }
    }
    auto find = [&](WriteStrategy s, RetrievalMethod m) -> const GridCell* {
        for (const auto& c : cells) {
            if (c.write_strategy == s && c.retrieval_method == m) return &c;
        }
        return nullptr;
    };

    std::ostringstream out;
    out << "| Write strategy |";
    for (auto m : methods) out << " F1 " << method_label(m) << " |";
    for (auto m : methods) out << " Acc " << method_label(m) << " (%) |";
    out << "\n|---|";
    for (std::size_t i = 0; i < 2 * methods.size(); ++i) out << "---:|";
    out << "\n";
    for (auto s : strategies) {
        out << "| " << strategy_label(s) << " |";
        for (auto m : methods) {
            const auto* c = find(s, m);
            out << " " << (c ? three(c->token_f1) : "-") << " |";
        }
        for (auto m : methods) {
            const auto* c = find(s, m);
            out << " " << (c ? pct(c->accuracy) : "-") << " |";
        }
        out << "\n";
    }
    out << "| Avg |";
    std::vector<std::vector<const GridCell*>> per_method;
    for (auto m : methods) {
        std::vector<const GridCell*> col;
        for (const auto& c : cells) {
            if (c.retrieval_method == m) col.push_back(&c);
        }
        per_method.push_back(col);
    }
    for (const auto& col : per_method) out << " " << three(mean_of(col, [](const GridCell& c) { return c.token_f1; })) << " |";
    for (const auto& col : per_method) out << " " << pct(mean_of(col, [](const GridCell& c) { return c.accuracy; })) << " |";
    out << "\n";
    return out.str();
}

}  // namespace

const std::vector<ReferenceCell>& reference_cells() {
    using S = WriteStrategy;
    using M = RetrievalMethod;
    static const std::vector<ReferenceCell> cells = {
        {S::basic_rag, M::cosine, 0.232, 77.9, 25.5, 75.7, 9.2, 15.8, 5.4, 1.0},
        {S::basic_rag, M::bm25, 0.184, 59.2, 14.8, 56.5, 24.8, 35.3, 5.1, 0.4},
        {S::basic_rag, M::hybrid_rerank, 0.240, 81.1, 29.4, 79.0, 6.6, 11.4, 6.2, 1.2},
        {S::extracted_facts, M::cosine, 0.211, 72.2, 21.2, 70.4, 9.7, 21.2, 5.9, 0.6},
        {S::extracted_facts, M::bm25, 0.146, 49.4, 10.6, 46.2, 29.2, 46.3, 3.9, 0.5},
        {S::extracted_facts, M::hybrid_rerank, 0.220, 77.3, 27.7, 75.3, 7.2, 15.1, 6.9, 0.7},
        {S::summarized_episodes, M::cosine, 0.197, 70.1, 21.8, 67.9, 11.4, 20.4, 8.1, 1.4},
        {S::summarized_episodes, M::bm25, 0.173, 62.7, 17.1, 60.4, 18.1, 29.8, 6.4, 1.0},
        {S::summarized_episodes, M::hybrid_rerank, 0.202, 73.3, 22.3, 70.1, 9.9, 18.2, 7.1, 1.4},
    };
    return cells;
}

std::string render_grid_csv(const std::vector<GridCell>& cells) {
    std::ostringstream out;
    out << text::join(kCsvColumns, ",") << "\n";
    for (const auto& c : cells) {
        std::vector<std::string> row = {
            std::string(to_string(c.write_strategy)),
            std::string(to_string(c.retrieval_method)),
            std::to_string(c.k),
            std::to_string(c.n_questions),
            exact(c.accuracy),
            exact(c.token_f1),
            exact(c.precision_at_k),
            exact(rate(c.utilization_rates, "beneficial")),
            exact(rate(c.utilization_rates, "harmful")),
            exact(rate(c.utilization_rates, "ignored")),
            exact(rate(c.utilization_rates, "neutral")),
            exact(rate(c.failure_rates, "retrieval_failure")),
            exact(rate(c.failure_rates, "utilization_failure")),
            exact(rate(c.failure_rates, "hallucination")),
            exact(rate(c.failure_rates, "unclassified")),
        };
        out << text::join(row, ",") << "\n";
    }
    return out.str();
}

std::string render_report_markdown(const std::vector<GridCell>& cells, const ReportOptions& options) {
    std::vector<const GridCell*> all;
    for (const auto& c : cells) all.push_back(&c);

    std::ostringstream out;
    out << "# Memory evaluation report\n\n";
    if (!cells.empty()) {
        out << "Retrieval budget k = " << cells.front().k << ".\n\n";
    }

    out << "## Accuracy and token F1 by write strategy and retrieval method\n\n";
    out << render_wide_grid(cells) << "\n";

    out << "## Answer quality per configuration\n\n";
    out << "| Write strategy | Retrieval | n | Token F1 | Accuracy (%) |\n";
    out << "|---|---|---:|---:|---:|\n";
    for (const auto& c : cells) {
        out << "| " << strategy_label(c.write_strategy) << " | " << method_label(c.retrieval_method) << " | "
            << c.n_questions << " | " << three(c.token_f1) << " | " << pct(c.accuracy) << " |\n";
    }
    out << "| Avg | | | " << three(mean_of(all, [](const GridCell& c) { return c.token_f1; })) << " | "
        << pct(mean_of(all, [](const GridCell& c) { return c.accuracy; })) << " |\n\n";

    out << "## Probe results per configuration\n\n";
    out << "Failure modes are percentages of all questions; the remainder is correct or unclassified.\n\n";
    out << "| Write strategy | Retrieval | Precision | Beneficial | Harmful | Ignored | Neutral | Retrieval failure | "
           "Utilization failure | Hallucination | Unclassified |\n";
    out << "|---|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n";
    auto probe_row = [&](const std::string& head, const std::vector<const GridCell*>& group) {
        auto u = [&](const char* key) {
            return pct(mean_of(group, [&](const GridCell& c) { return rate(c.utilization_rates, key); }));
        };
        auto f = [&](const char* key) {
            return pct(mean_of(group, [&](const GridCell& c) { return rate(c.failure_rates, key); }));
        };
        out << head << " | " << pct(mean_of(group, [](const GridCell& c) { return c.precision_at_k; })) << " | "
            << u("beneficial") << " | " << u("harmful") << " | " << u("ignored") << " | " << u("neutral") << " | "
            << f("retrieval_failure") << " | " << f("utilization_failure") << " | " << f("hallucination") << " | "
            << f("unclassified") << " |\n";
    };
    for (const auto& c : cells) {
        probe_row(fmt::format("| {} | {}", strategy_label(c.write_strategy), method_label(c.retrieval_method)), {&c});
    }
    probe_row("| Avg | ", all);
    out << "\n";

    int excluded = 0, skipped = 0;
    for (const auto& c : cells) {
        excluded += c.utilization_excluded;
        skipped += c.skipped;
    }
    out << "## Exclusions\n\n";
    out << "- Questions without a usable utilization verdict: " << excluded << "\n";
    out << "- Questions skipped after answer errors: " << skipped << "\n";

    if (options.compare_reference) {
        out << "\n## Reference comparison\n\n";
        out << "Measured vs. LoCoMo reference values (percent); `ok` means within 3 points.\n\n";
        out << "| Write strategy | Retrieval | Metric | Measured | Reference | Delta | Within 3 |\n";
        out << "|---|---|---|---:|---:|---:|---|\n";
        for (const auto& c : cells) {
            auto ref = std::find_if(reference_cells().begin(), reference_cells().end(), [&](const ReferenceCell& r) {
                return r.strategy == c.write_strategy && r.method == c.retrieval_method;
            });
            if (ref == reference_cells().end() || c.k != 5) continue;
            const std::vector<std::pair<std::string, std::pair<double, double>>> rows = {
                {"accuracy", {100 * c.accuracy, ref->accuracy}},
                {"precision", {100 * c.precision_at_k, ref->precision}},
                {"beneficial", {100 * rate(c.utilization_rates, "beneficial"), ref->beneficial}},
                {"ignored", {100 * rate(c.utilization_rates, "ignored"), ref->ignored}},
                {"retrieval failure", {100 * rate(c.failure_rates, "retrieval_failure"), ref->fail_retrieval}},
                {"utilization failure", {100 * rate(c.failure_rates, "utilization_failure"), ref->fail_utilization}},
                {"hallucination", {100 * rate(c.failure_rates, "hallucination"), ref->fail_hallucination}},
            };
            for (const auto& [metric, vals] : rows) {
                const double delta = vals.first - vals.second;
                out << "| " << strategy_label(c.write_strategy) << " | " << method_label(c.retrieval_method) << " | "
                    << metric << " | " << fmt::format("{:.1f}", vals.first) << " | "
                    << fmt::format("{:.1f}", vals.second) << " | " << fmt::format("{:+.1f}", delta) << " | "
                    << (std::abs(delta) <= 3.0 ? "ok" : "no") << " |\n";
            }
        }
    }
    return out.str();
}

void emit_report(const std::vector<GridCell>& cells, const fs::path& out_dir, const ReportOptions& options) {
    if (cells.empty()) {
        throw ArgumentError("report needs at least one cell");
    }
    json grid = json::array();
    for (const auto& c : cells) grid.push_back(c.to_json());
    io::write_file_atomic(out_dir / "grid.csv", render_grid_csv(cells));
    io::write_file_atomic(out_dir / "grid.json", grid.dump(2) + "\n");
    io::write_file_atomic(out_dir / "report.md", render_report_markdown(cells, options));
}

std::vector<std::map<std::string, std::string>> parse_csv(std::string_view csv) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, field_started = false;
    for (std::size_t i = 0; i < csv.size(); ++i) {
        const char c = csv[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < csv.size() && csv[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"' && field.empty()) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            field_started = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < csv.size() && csv[i + 1] == '\n') ++i;
            if (field_started || !field.empty() || !row.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            field_started = false;
        } else {
            field += c;
            field_started = true;
        }
    }
    if (quoted) throw ParseError("unterminated quoted CSV field");
    if (field_started || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("CSV has no header row");

    std::vector<std::string> header;
    for (const auto& h : rows.front()) header.push_back(text::trim(h));
    std::vector<std::map<std::string, std::string>> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != header.size()) {
            throw ParseError(fmt::format("CSV line {} has {} fields, header has {}", r + 1, rows[r].size(),
                                         header.size()));
        }
        std::map<std::string, std::string> rec;
        for (std::size_t c = 0; c < header.size(); ++c) rec[header[c]] = rows[r][c];
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<GridCell> parse_grid_csv(std::string_view csv) {
    std::vector<GridCell> cells;
    auto field = [](const std::map<std::string, std::string>& row, const std::string& key) -> const std::string& {
        auto it = row.find(key);
        if (it == row.end()) throw ParseError("grid.csv is missing column " + key);
        return it->second;
    };
    auto number = [&](const std::map<std::string, std::string>& row, const std::string& key) {
        const auto it = row.find(key);
        field(row, key);
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument(it->second);
            return v;
        } catch (const std::exception&) {
            throw ParseError("grid.csv column " + key + " is not a number: '" + it->second + "'");
        }
    };
    for (const auto& row : parse_csv(csv)) {
        GridCell c;
        c.write_strategy = parse_write_strategy(field(row, "write_strategy"));
        c.retrieval_method = parse_retrieval_method(field(row, "retrieval_method"));
        c.k = static_cast<int>(number(row, "k"));
        c.n_questions = static_cast<int>(number(row, "n"));
        c.accuracy = number(row, "accuracy");
        c.token_f1 = number(row, "token_f1");
        c.precision_at_k = number(row, "precision_at_k");
        for (const char* key : {"beneficial", "harmful", "ignored", "neutral"}) {
            c.utilization_rates[key] = number(row, key);
        }
        c.failure_rates["retrieval_failure"] = number(row, "fail_retrieval");
        c.failure_rates["utilization_failure"] = number(row, "fail_utilization");
        c.failure_rates["hallucination"] = number(row, "fail_hallucination");
        c.failure_rates["unclassified"] = number(row, "unclassified");
        cells.push_back(std::move(c));
    }
    return cells;
}

std::vector<GridCell> load_grid_csv(const fs::path& path) { return parse_grid_csv(io::read_file(path)); }

std::string normalize_correct_label(std::string_view raw) {
    const auto s = text::to_lower(text::trim(raw));
    if (s == "true" || s == "1" || s == "yes" || s == "correct") return "correct";
    if (s == "false" || s == "0" || s == "no" || s == "incorrect") return "incorrect";
    throw ParseError("unrecognized correctness label '" + std::string(raw) + "'");
}

std::string normalize_failure_label(std::string_view raw) {
    const auto category = parse_failure_category(raw);
    if (category == FailureCategory::correct || category == FailureCategory::unclassified) {
        throw ParseError("'" + std::string(raw) + "' is not a failure category");
    }
    return std::string(to_string(category));
}

}  // namespace memprobe
