#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

// Binary-classification metrics with tie-aware AUC and average precision,
// plus grouped breakdown tables. Pure functions over immutable arrays.

namespace avianrisk::metrics {

struct Confusion {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct EvalReport {
  std::size_t n = 0;
  std::size_t n_pos = 0;
  double accuracy = 0.0;
  std::optional<double> auc; // absent when only one class present
  std::optional<double> ap;  // absent when no positives
  double f1 = 0.0;
  double threshold = 0.5;
  Confusion confusion;
};

struct BreakdownRow {
  std::string group;
  std::size_t n = 0;
  double accuracy = 0.0;
  std::optional<double> auc;
  std::optional<double> ap;
  double f1 = 0.0;
};

// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked correctly,
// ties counted half. Absent when either class is missing.
std::optional<double> roc_auc(const std::vector<double>& scores,
                              const std::vector<int>& labels);

// Step-wise AP over the PR curve with tied scores collapsed into blocks.
// Absent when there are no positives.
std::optional<double> average_precision(const std::vector<double>& scores,
                                        const std::vector<int>& labels);

// Decision rule: predicted positive iff score >= threshold. F1 = 0 when
// tp = 0.
std::pair<double, Confusion> f1_at(const std::vector<double>& scores,
                                   const std::vector<int>& labels,
                                   double threshold);

EvalReport evaluate(const std::vector<double>& scores,
                    const std::vector<int>& labels, double threshold);

// One row per distinct group key, sorted by descending accuracy (group name
// breaks exact ties deterministically).
std::vector<BreakdownRow> breakdown(const std::vector<std::string>& groups,
                                    const std::vector<double>& scores,
                                    const std::vector<int>& labels,
                                    double threshold);

void write_report_csv(const EvalReport& report, const std::string& path);

// Header: <group_label>,Accuracy,AUC,AP,F1-score. Absent metrics are empty
// fields; a TOTAL row with the global metrics closes the table.
void write_breakdown_csv(const std::vector<BreakdownRow>& rows,
                         const EvalReport& total,
                         const std::string& group_label,
                         const std::string& path);

} // namespace avianrisk::metrics
