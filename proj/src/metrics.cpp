#include "avianrisk/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "avianrisk/csvio.hpp"
#include "avianrisk/error.hpp"

namespace avianrisk::metrics {
namespace {

void check_sizes(const std::vector<double>& scores,
                 const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw InputError("metrics: scores and labels differ in length");
}

std::string opt_field(const std::optional<double>& v) {
  return v ? csvio::format_double(*v) : std::string();
}

} // namespace

std::optional<double> roc_auc(const std::vector<double>& scores,
                              const std::vector<int>& labels) {
  check_sizes(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Walk ascending tie blocks: a positive outranks every negative in lower
  // blocks, and ties within a block count half.
  double num = 0.0;
  std::int64_t n_pos = 0, n_neg = 0, cum_neg = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    std::int64_t block_pos = 0, block_neg = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] > 0) ++block_pos;
      else ++block_neg;
      ++j;
    }
    num += static_cast<double>(block_pos) * static_cast<double>(cum_neg) +
           0.5 * static_cast<double>(block_pos) * static_cast<double>(block_neg);
    cum_neg += block_neg;
    n_pos += block_pos;
    n_neg += block_neg;
    i = j;
  }
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  return num / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::optional<double> average_precision(const std::vector<double>& scores,
                                        const std::vector<int>& labels) {
  check_sizes(scores, labels);
  const std::size_t n = scores.size();
  std::int64_t n_pos = 0;
  for (const int y : labels) n_pos += y > 0;
  if (n_pos == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  double ap = 0.0;
  double prev_recall = 0.0;
  std::int64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] > 0) ++tp;
      else ++fp;
      ++j;
    }
    const double precision =
        static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

std::pair<double, Confusion> f1_at(const std::vector<double>& scores,
                                   const std::vector<int>& labels,
                                   double threshold) {
  check_sizes(scores, labels);
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool truth = labels[i] > 0;
    if (pred && truth) ++c.tp;
    else if (pred && !truth) ++c.fp;
    else if (!pred && truth) ++c.fn;
    else ++c.tn;
  }
  const double f1 =
      c.tp == 0 ? 0.0
                : 2.0 * static_cast<double>(c.tp) /
                      static_cast<double>(2 * c.tp + c.fp + c.fn);
  return {f1, c};
}

EvalReport evaluate(const std::vector<double>& scores,
                    const std::vector<int>& labels, double threshold) {
  check_sizes(scores, labels);
  EvalReport r;
  r.n = scores.size();
  for (const int y : labels) r.n_pos += y > 0;
  r.threshold = threshold;
  std::tie(r.f1, r.confusion) = f1_at(scores, labels, threshold);
  r.accuracy = r.n == 0
                   ? 0.0
                   : static_cast<double>(r.confusion.tp + r.confusion.tn) /
                         static_cast<double>(r.n);
  r.auc = roc_auc(scores, labels);
  r.ap = average_precision(scores, labels);
  return r;
}

std::vector<BreakdownRow> breakdown(const std::vector<std::string>& groups,
                                    const std::vector<double>& scores,
                                    const std::vector<int>& labels,
                                    double threshold) {
  check_sizes(scores, labels);
  if (groups.size() != scores.size())
    throw InputError("metrics: group keys and scores differ in length");

  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < groups.size(); ++i)
    members[groups[i]].push_back(i);

  std::vector<BreakdownRow> rows;
  rows.reserve(members.size());
  for (const auto& [group, idx] : members) {
    std::vector<double> s;
    std::vector<int> y;
    s.reserve(idx.size());
    y.reserve(idx.size());
    for (const std::size_t i : idx) {
      s.push_back(scores[i]);
      y.push_back(labels[i]);
    }
    const EvalReport r = evaluate(s, y, threshold);
    rows.push_back({group, r.n, r.accuracy, r.auc, r.ap, r.f1});
  }
  std::sort(rows.begin(), rows.end(),
            [](const BreakdownRow& a, const BreakdownRow& b) {
              if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
              return a.group < b.group;
            });
  return rows;
}

void write_report_csv(const EvalReport& r, const std::string& path) {
  csvio::Writer w(path);
  w.write_row({"n", "n_pos", "accuracy", "auc", "ap", "f1", "threshold", "tp",
               "fp", "tn", "fn"});
  w.write_row({std::to_string(r.n), std::to_string(r.n_pos),
               csvio::format_double(r.accuracy), opt_field(r.auc),
               opt_field(r.ap), csvio::format_double(r.f1),
               csvio::format_double(r.threshold), std::to_string(r.confusion.tp),
               std::to_string(r.confusion.fp), std::to_string(r.confusion.tn),
               std::to_string(r.confusion.fn)});
  w.close();
}

void write_breakdown_csv(const std::vector<BreakdownRow>& rows,
                         const EvalReport& total,
                         const std::string& group_label,
                         const std::string& path) {
  csvio::Writer w(path);
  w.write_row({group_label, "Accuracy", "AUC", "AP", "F1-score"});
  for (const auto& row : rows)
    w.write_row({row.group, csvio::format_double(row.accuracy),
                 opt_field(row.auc), opt_field(row.ap),
                 csvio::format_double(row.f1)});
  w.write_row({"TOTAL", csvio::format_double(total.accuracy),
               opt_field(total.auc), opt_field(total.ap),
               csvio::format_double(total.f1)});
  w.close();
}

} // namespace avianrisk::metrics
