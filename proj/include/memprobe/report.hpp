#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "memprobe/metrics.hpp"

namespace memprobe {

namespace fs = std::filesystem;

struct ReportOptions {
    /// Adds a section comparing each cell against the LoCoMo
    /// reference values with a +/-3 point tolerance flag.
    bool compare_reference = false;
};

/// Writes grid.csv, grid.json and report.md into `out_dir`.
void emit_report(const std::vector<GridCell>& cells, const fs::path& out_dir, const ReportOptions& options = {});

std::string render_grid_csv(const std::vector<GridCell>& cells);
std::string render_report_markdown(const std::vector<GridCell>& cells, const ReportOptions& options = {});

std::vector<GridCell> parse_grid_csv(std::string_view csv);
std::vector<GridCell> load_grid_csv(const fs::path& path);

/// Per-cell LoCoMo reference values at k=5, as percentages.
struct ReferenceCell {
    WriteStrategy strategy;
    RetrievalMethod method;
    double token_f1;
    double accuracy;
    double precision;
    double beneficial;
    double ignored;
    double fail_retrieval;
    double fail_utilization;
    double fail_hallucination;
};

const std::vector<ReferenceCell>& reference_cells();

/// Minimal RFC 4180 reader: header row, quoted fields, CRLF tolerated.
std::vector<std::map<std::string, std::string>> parse_csv(std::string_view csv);

/// "correct" or "incorrect" from true/false, yes/no, 1/0, correct/incorrect.
std::string normalize_correct_label(std::string_view raw);

/// One of retrieval_failure, utilization_failure, hallucination.
std::string normalize_failure_label(std::string_view raw);

inline const std::vector<std::string> kCorrectnessLabels = {"correct", "incorrect"};
inline const std::vector<std::string> kFailureLabels = {"retrieval_failure", "utilization_failure", "hallucination"};

}  // namespace memprobe
