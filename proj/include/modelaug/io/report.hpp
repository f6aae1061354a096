#pragma once

// Writers for split manifests, evaluation reports, code dumps and prediction
// dumps. Machine tables are tab separated with full-precision values;
// undefined rates print as NA. The human report mirrors the familiar
// mean±std presentation with percentages.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "modelaug/errors.hpp"
#include "modelaug/io/text.hpp"
#include "modelaug/predictor.hpp"

namespace modelaug::io {

inline void write_split_manifest(const std::filesystem::path& path, const SplitSpec& spec,
                                 const std::vector<DrawSplit>& splits) {
  std::string out = "splits total " + std::to_string(spec.total) + " fraction " +
                    format_double(spec.test_fraction) + " draws " + std::to_string(spec.draws) +
                    " seed " + std::to_string(spec.seed) + "\n";
  for (std::size_t i = 0; i < splits.size(); ++i)
    out += std::to_string(i + 1) + " " + std::to_string(splits[i].test_begin) + " " +
           std::to_string(splits[i].test_end) + "\n";
  atomic_write(path, out);
}

namespace detail {

inline std::string cell(const MetricValue& v) {
  return v.defined ? format_double(v.value) : "NA";
}

inline std::string cell(const AggregateMetric& a) {
  return cell(a.mean) + "±" + cell(a.stddev);
}

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline std::string pretty_pct(const MetricValue& v) {
  return v.defined ? fixed(100.0 * v.value, 2) : "undef";
}

inline std::string pretty_f1(const MetricValue& v) {
  return v.defined ? fixed(v.value, 4) : "undef";
}

inline std::string pretty_pct(const AggregateMetric& a) {
  if (!a.mean.defined) return "undef";
  std::string s = fixed(100.0 * a.mean.value, 2);
  s += "±";
  s += a.stddev.defined ? fixed(100.0 * a.stddev.value, 2) : "undef";
  return s;
}

inline std::string pretty_f1(const AggregateMetric& a) {
  if (!a.mean.defined) return "undef";
  std::string s = fixed(a.mean.value, 4);
  s += "±";
  s += a.stddev.defined ? fixed(a.stddev.value, 4) : "undef";
  return s;
}

}  // namespace detail

inline void write_report_table(const std::filesystem::path& path, const EvalReport& report) {
  std::string out = "draw\ttp\tfp\ttn\tfn\taccuracy\tsensitivity\tspecificity\tf1\n";
  ConfusionCounts total;
  for (std::size_t i = 0; i < report.draws.size(); ++i) {
    const DrawResult& d = report.draws[i];
    total += d.counts;
    out += std::to_string(i + 1) + "\t" + std::to_string(d.counts.tp) + "\t" +
           std::to_string(d.counts.fp) + "\t" + std::to_string(d.counts.tn) + "\t" +
           std::to_string(d.counts.fn) + "\t" + detail::cell(d.metrics.accuracy) + "\t" +
           detail::cell(d.metrics.sensitivity) + "\t" + detail::cell(d.metrics.specificity) +
           "\t" + detail::cell(d.metrics.f1) + "\n";
  }
  out += "aggregate\t" + std::to_string(total.tp) + "\t" + std::to_string(total.fp) + "\t" +
         std::to_string(total.tn) + "\t" + std::to_string(total.fn) + "\t" +
         detail::cell(report.accuracy) + "\t" + detail::cell(report.sensitivity) + "\t" +
         detail::cell(report.specificity) + "\t" + detail::cell(report.f1) + "\n";
  atomic_write(path, out);
}

inline void write_report_text(const std::filesystem::path& path, const EvalReport& report) {
  std::string out = "evaluation over " + std::to_string(report.draws.size()) + " draw(s)\n";
  out += "draw    acc(%)   sens(%)  spec(%)  f1\n";
  for (std::size_t i = 0; i < report.draws.size(); ++i) {
    const Metrics& m = report.draws[i].metrics;
    char line[160];
    std::snprintf(line, sizeof(line), "%4zu    %-8s %-8s %-8s %s\n", i + 1,
                  detail::pretty_pct(m.accuracy).c_str(), detail::pretty_pct(m.sensitivity).c_str(),
                  detail::pretty_pct(m.specificity).c_str(), detail::pretty_f1(m.f1).c_str());
    out += line;
  }
  out += "mean    " + detail::pretty_pct(report.accuracy) + "  " +
         detail::pretty_pct(report.sensitivity) + "  " + detail::pretty_pct(report.specificity) +
         "  " + detail::pretty_f1(report.f1) + "\n";
  atomic_write(path, out);
}

inline void write_codes_file(const std::filesystem::path& path, std::size_t n,
                             const std::vector<Vector>& rows) {
  std::string out = "codes n " + std::to_string(n) + "\n";
  for (const Vector& row : rows) {
    if (row.size() != n) throw invalid_input("write_codes_file: row length mismatch");
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) line += " ";
      line += format_double(row[i]);
    }
    out += line + "\n";
  }
  atomic_write(path, out);
}

struct PredictionRow {
  bool has_label = false;
  int label = 0;
  int predicted = 0;
  Vector augmented;  // per class
};

inline void write_predictions_file(const std::filesystem::path& path,
                                   const std::vector<int>& classes,
                                   const std::vector<PredictionRow>& rows) {
  std::string out = "predictions classes";
  for (int c : classes) out += " " + std::to_string(c);
  const bool labeled = !rows.empty() && rows.front().has_label;
  out += labeled ? " labeled 1\n" : " labeled 0\n";
  for (const PredictionRow& r : rows) {
    std::string line;
    if (labeled) line += std::to_string(r.label) + " ";
    line += std::to_string(r.predicted);
    for (double v : r.augmented) line += " " + format_double(v);
    out += line + "\n";
  }
  atomic_write(path, out);
}

}  // namespace modelaug::io
