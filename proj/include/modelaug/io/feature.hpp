#pragma once

// Plain text formats shared by the CLI and the tests.
//
// Feature file:
//   features dim <m> classes <c1> ... <ck> [softmax]
//   <label> <v1> ... <vm> [<p1> ... <pk>]
// One sample per line, whitespace separated, '#' lines and blank lines
// ignored, dot decimal separator. The optional softmax marker adds one score
// per declared class to every line, in class order.
//
// Dictionary file:
//   dictionary dim <m> classes <c1> ... <ck> normalized <0|1>
//   <class> <v1> ... <vm>
// One column per line, columns in arranged order.

#include <filesystem>
#include <string>
#include <vector>

#include "modelaug/dictionary.hpp"
#include "modelaug/errors.hpp"
#include "modelaug/io/text.hpp"
#include "modelaug/predictor.hpp"

namespace modelaug::io {

struct FeatureDataset {
  std::size_t dim = 0;
  std::vector<int> classes;  // ascending
  bool has_softmax = false;
  std::vector<LabeledFeature> samples;
  std::vector<Vector> softmax;  // per sample, class order; empty unless has_softmax
};

inline std::vector<ScoredSample> scored_samples(const FeatureDataset& ds) {
  if (!ds.has_softmax) throw io_error("dataset has no softmax columns");
  std::vector<ScoredSample> out;
  out.reserve(ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    out.push_back({ds.samples[i].label, ds.samples[i].features, ds.softmax[i]});
  return out;
}

namespace detail {
inline bool skippable(const std::string& line) {
  for (char ch : line) {
    if (ch == ' ' || ch == '\t') continue;
    return ch == '#';
  }
  return true;  // blank
}
}  // namespace detail

inline FeatureDataset read_feature_file(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  FeatureDataset ds;
  std::size_t ln = 0;
  bool header_seen = false;
  for (const std::string& line : lines) {
    ++ln;
    if (detail::skippable(line)) continue;
    const auto tok = split_tokens(line);
    const std::string where = path.string() + ":" + std::to_string(ln);

    if (!header_seen) {
      if (tok.size() < 5 || tok[0] != "features" || tok[1] != "dim" || tok[3] != "classes")
        throw io_error(where + ": expected 'features dim <m> classes <...>' header");
      ds.dim = static_cast<std::size_t>(parse_uint64(tok[2]));
      if (ds.dim == 0) throw io_error(where + ": feature dimension must be positive");
      std::size_t i = 4;
      for (; i < tok.size() && tok[i] != "softmax"; ++i)
        ds.classes.push_back(static_cast<int>(parse_int(tok[i])));
      if (i < tok.size()) {
        if (i + 1 != tok.size()) throw io_error(where + ": tokens after 'softmax'");
        ds.has_softmax = true;
      }
      if (ds.classes.empty()) throw io_error(where + ": empty class set");
      for (std::size_t c = 1; c < ds.classes.size(); ++c)
        if (ds.classes[c] <= ds.classes[c - 1])
          throw io_error(where + ": class set must be strictly ascending");
      header_seen = true;
      continue;
    }

    const std::size_t expect = 1 + ds.dim + (ds.has_softmax ? ds.classes.size() : 0);
    if (tok.size() != expect)
      throw io_error(where + ": expected " + std::to_string(expect) + " fields, got " +
                     std::to_string(tok.size()));
    LabeledFeature sample;
    sample.label = static_cast<int>(parse_int(tok[0]));
    if (!std::binary_search(ds.classes.begin(), ds.classes.end(), sample.label))
      throw io_error(where + ": label " + std::to_string(sample.label) + " not in class set");
    sample.features.reserve(ds.dim);
    for (std::size_t i = 0; i < ds.dim; ++i) {
      double v = parse_double(tok[1 + i]);
      if (!std::isfinite(v)) throw io_error(where + ": non-finite feature value");
      sample.features.push_back(v);
    }
    if (ds.has_softmax) {
      Vector scores;
      scores.reserve(ds.classes.size());
      double sum = 0.0;
      for (std::size_t i = 0; i < ds.classes.size(); ++i) {
        double v = parse_double(tok[1 + ds.dim + i]);
        if (!std::isfinite(v) || v < 0.0) throw io_error(where + ": bad softmax score");
        sum += v;
        scores.push_back(v);
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw io_error(where + ": softmax scores sum to " + format_double(sum));
      ds.softmax.push_back(std::move(scores));
    }
    ds.samples.push_back(std::move(sample));
  }
  if (!header_seen) throw io_error(path.string() + ": missing header line");
  return ds;
}

inline void write_feature_file(const std::filesystem::path& path, const FeatureDataset& ds) {
  std::string out = "features dim " + std::to_string(ds.dim) + " classes";
  for (int c : ds.classes) out += " " + std::to_string(c);
  if (ds.has_softmax) out += " softmax";
  out += "\n";
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    out += std::to_string(ds.samples[i].label);
    for (double v : ds.samples[i].features) out += " " + format_double(v);
    if (ds.has_softmax)
      for (double v : ds.softmax[i]) out += " " + format_double(v);
    out += "\n";
  }
  atomic_write(path, out);
}

inline void write_dictionary_file(const std::filesystem::path& path, const Dictionary& d) {
  std::string out = "dictionary dim " + std::to_string(d.dim()) + " classes";
  for (int c : d.class_ids()) out += " " + std::to_string(c);
  out += " normalized ";
  out += d.unit_columns ? "1" : "0";
  out += "\n";
  for (std::size_t j = 0; j < d.size(); ++j) {
    out += std::to_string(d.column_classes[j]);
    for (std::size_t r = 0; r < d.dim(); ++r) out += " " + format_double(d.columns(r, j));
    out += "\n";
  }
  atomic_write(path, out);
}

inline Dictionary read_dictionary_file(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  Dictionary d;
  std::vector<int> declared;
  std::size_t dim = 0;
  bool header_seen = false;
  std::size_t ln = 0;
  std::vector<std::pair<int, Vector>> columns;
  for (const std::string& line : lines) {
    ++ln;
    if (detail::skippable(line)) continue;
    const auto tok = split_tokens(line);
    const std::string where = path.string() + ":" + std::to_string(ln);
    if (!header_seen) {
      if (tok.size() < 7 || tok[0] != "dictionary" || tok[1] != "dim" || tok[3] != "classes" ||
          tok[tok.size() - 2] != "normalized")
        throw io_error(where + ": expected 'dictionary dim <m> classes <...> normalized <0|1>'");
      dim = static_cast<std::size_t>(parse_uint64(tok[2]));
      for (std::size_t i = 4; i + 2 < tok.size(); ++i)
        declared.push_back(static_cast<int>(parse_int(tok[i])));
      const long long normalized = parse_int(tok.back());
      if (normalized != 0 && normalized != 1) throw io_error(where + ": normalized must be 0 or 1");
      d.unit_columns = normalized == 1;
      if (declared.empty()) throw io_error(where + ": empty class set");
      header_seen = true;
      continue;
    }
    if (tok.size() != dim + 1)
      throw io_error(where + ": expected " + std::to_string(dim + 1) + " fields");
    int cls = static_cast<int>(parse_int(tok[0]));
    Vector col(dim);
    for (std::size_t i = 0; i < dim; ++i) col[i] = parse_double(tok[1 + i]);
    columns.emplace_back(cls, std::move(col));
  }
  if (!header_seen) throw io_error(path.string() + ": missing header line");
  if (columns.empty()) throw io_error(path.string() + ": no columns");

  d.columns = Matrix(dim, columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    d.column_classes.push_back(columns[j].first);
    for (std::size_t r = 0; r < dim; ++r) d.columns(r, j) = columns[j].second[r];
  }
  // rebuild spans from the column sequence
  std::size_t begin = 0;
  for (std::size_t j = 1; j <= columns.size(); ++j) {
    if (j == columns.size() || d.column_classes[j] != d.column_classes[begin]) {
      d.class_spans.push_back({d.column_classes[begin], begin, j});
      begin = j;
    }
  }
  try {
    validate_dictionary(d);
  } catch (const invalid_input& e) {
    throw io_error(path.string() + ": " + e.what());
  }
  if (d.class_ids() != declared)
    throw io_error(path.string() + ": header class set does not match columns");
  return d;
}

}  // namespace modelaug::io
