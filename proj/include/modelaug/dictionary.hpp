#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modelaug/errors.hpp"
#include "modelaug/numeric.hpp"

namespace modelaug {

struct LabeledFeature {
  int label = 0;
  Vector features;
};

struct ClassSpan {
  int class_id = 0;
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
};

// Class-arranged basis matrix: columns of the same class are contiguous,
// classes appear in ascending id order, and the spans partition [0, n).
struct Dictionary {
  Matrix columns;                    // m x n
  std::vector<int> column_classes;   // size n
  std::vector<ClassSpan> class_spans;
  bool unit_columns = true;

  std::size_t dim() const { return columns.rows; }
  std::size_t size() const { return columns.cols; }

  std::vector<int> class_ids() const {
    std::vector<int> ids;
    ids.reserve(class_spans.size());
    for (const auto& s : class_spans) ids.push_back(s.class_id);
    return ids;
  }

  Vector column(std::size_t j) const {
    Vector c(columns.rows);
    for (std::size_t r = 0; r < columns.rows; ++r) c[r] = columns(r, j);
    return c;
  }
};

struct BuildOptions {
  bool normalize = true;
  // When set, every declared class must be populated and no other labels may
  // appear. When empty, the class set is the set of labels observed.
  std::optional<std::vector<int>> declared_classes;
};

inline Dictionary build_dictionary(const std::vector<LabeledFeature>& samples,
                                   const BuildOptions& options = {}) {
  if (samples.empty()) throw invalid_input("build_dictionary: no samples");
  const std::size_t m = samples.front().features.size();
  if (m == 0) throw invalid_input("build_dictionary: zero-length features");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].features.size() != m)
      throw invalid_input("build_dictionary: sample " + std::to_string(i) + " has length " +
                          std::to_string(samples[i].features.size()) + ", expected " +
                          std::to_string(m));
    if (!all_finite(samples[i].features))
      throw invalid_input("build_dictionary: sample " + std::to_string(i) + " has non-finite values");
    if (norm2(samples[i].features) == 0.0)
      throw invalid_input("build_dictionary: sample " + std::to_string(i) + " has zero norm");
  }

  // class id -> member sample indices, input order preserved within a class
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < samples.size(); ++i) members[samples[i].label].push_back(i);

  std::vector<int> classes;
  if (options.declared_classes) {
    classes = *options.declared_classes;
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    for (int c : classes)
      if (!members.count(c))
        throw invalid_input("build_dictionary: declared class " + std::to_string(c) +
                            " has no samples");
    for (const auto& [c, _] : members)
      if (!std::binary_search(classes.begin(), classes.end(), c))
        throw invalid_input("build_dictionary: label " + std::to_string(c) + " not declared");
  } else {
    for (const auto& [c, _] : members) classes.push_back(c);
  }

  Dictionary d;
  d.columns = Matrix(m, samples.size());
  d.column_classes.reserve(samples.size());
  d.unit_columns = options.normalize;
  std::size_t col = 0;
  for (int c : classes) {
    const std::size_t begin = col;
    for (std::size_t i : members[c]) {
      double scale = options.normalize ? 1.0 / norm2(samples[i].features) : 1.0;
      for (std::size_t r = 0; r < m; ++r) d.columns(r, col) = samples[i].features[r] * scale;
      d.column_classes.push_back(c);
      ++col;
    }
    d.class_spans.push_back({c, begin, col});
  }
  return d;
}

inline int class_of_column(const Dictionary& d, std::size_t j) {
  if (j >= d.size()) throw invalid_input("class_of_column: index " + std::to_string(j) +
                                         " out of range [0, " + std::to_string(d.size()) + ")");
  auto it = std::upper_bound(d.class_spans.begin(), d.class_spans.end(), j,
                             [](std::size_t v, const ClassSpan& s) { return v < s.end; });
  return it->class_id;
}

// Structural checks for dictionaries read from files.
inline void validate_dictionary(const Dictionary& d) {
  if (d.size() == 0 || d.dim() == 0) throw invalid_input("dictionary: empty");
  if (d.column_classes.size() != d.size())
    throw invalid_input("dictionary: column class list size mismatch");
  if (!all_finite(d.columns)) throw invalid_input("dictionary: non-finite entries");
  std::size_t expect = 0;
  int prev_class = 0;
  bool first = true;
  for (const auto& s : d.class_spans) {
    if (s.begin != expect || s.end <= s.begin)
      throw invalid_input("dictionary: spans do not partition the columns");
    if (!first && s.class_id <= prev_class)
      throw invalid_input("dictionary: spans not in ascending class order");
    for (std::size_t j = s.begin; j < s.end; ++j)
      if (d.column_classes[j] != s.class_id)
        throw invalid_input("dictionary: column " + std::to_string(j) +
                            " disagrees with its span class");
    expect = s.end;
    prev_class = s.class_id;
    first = false;
  }
  if (expect != d.size()) throw invalid_input("dictionary: spans do not cover all columns");
  if (d.unit_columns) {
    for (std::size_t j = 0; j < d.size(); ++j) {
      double n = 0.0;
      for (std::size_t r = 0; r < d.dim(); ++r) n += d.columns(r, j) * d.columns(r, j);
      if (std::abs(std::sqrt(n) - 1.0) > 1e-10)
        throw invalid_input("dictionary: column " + std::to_string(j) + " is not unit norm");
    }
  }
}

}  // namespace modelaug
