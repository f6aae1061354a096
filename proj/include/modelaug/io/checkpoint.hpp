#pragma once

// Text checkpoint for the toy backbone (exact round trip via shortest
// round-trip decimal formatting) and the per-epoch loss trace CSV.

#include <filesystem>
#include <string>
#include <vector>

#include "modelaug/errors.hpp"
#include "modelaug/io/text.hpp"
#include "modelaug/trainer.hpp"

namespace modelaug::io {

inline void write_checkpoint(const std::filesystem::path& path, const ToyBackbone& m) {
  std::string out = "modelaug-checkpoint 1\n";
  out += "input " + std::to_string(m.input_h) + " " + std::to_string(m.input_w) + "\n";
  out += "adapter " + std::to_string(m.adapter.kernel_size) + " " +
         std::to_string(m.adapter.stride) + " " + std::to_string(m.adapter.padding) + " " +
         std::to_string(m.adapter.in_channels) + " " + std::to_string(m.adapter.out_channels) +
         "\n";
  out += std::string("adapter_norm ") + (m.adapter_norm ? "1" : "0") + "\n";
  out += "hidden " + std::to_string(m.hidden.weights.rows) + " " +
         std::to_string(m.hidden.weights.cols) + "\n";
  out += "classes";
  for (int c : m.class_ids) out += " " + std::to_string(c);
  out += "\n";

  auto block = [&out](const std::string& name, const std::vector<double>& values) {
    out += "param " + name + " " + std::to_string(values.size()) + "\n";
    std::string line;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) line += " ";
      line += format_double(values[i]);
    }
    out += line + "\n";
  };
  block("adapter_weights", m.adapter.weights);
  block("adapter_bias", m.adapter.bias);
  if (m.adapter_norm) {
    block("norm_gamma", m.norm_gamma);
    block("norm_beta", m.norm_beta);
  }
  block("hidden_weights", m.hidden.weights.data);
  block("hidden_bias", m.hidden.bias);
  block("output_weights", m.output.weights.data);
  block("output_bias", m.output.bias);
  atomic_write(path, out);
}

inline ToyBackbone read_checkpoint(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::size_t ln = 0;
  auto next = [&]() -> std::vector<std::string_view> {
    while (ln < lines.size()) {
      auto tok = split_tokens(lines[ln]);
      ++ln;
      if (!tok.empty()) return tok;
    }
    throw io_error(path.string() + ": unexpected end of checkpoint");
  };

  auto header = next();
  if (header.size() != 2 || header[0] != "modelaug-checkpoint" || header[1] != "1")
    throw io_error(path.string() + ": not a version-1 checkpoint");

  ToyBackbone m;
  auto input = next();
  if (input.size() != 3 || input[0] != "input") throw io_error(path.string() + ": bad input line");
  m.input_h = static_cast<std::size_t>(parse_uint64(input[1]));
  m.input_w = static_cast<std::size_t>(parse_uint64(input[2]));

  auto adapter = next();
  if (adapter.size() != 6 || adapter[0] != "adapter")
    throw io_error(path.string() + ": bad adapter line");
  m.adapter.kernel_size = static_cast<std::size_t>(parse_uint64(adapter[1]));
  m.adapter.stride = static_cast<std::size_t>(parse_uint64(adapter[2]));
  m.adapter.padding = static_cast<std::size_t>(parse_uint64(adapter[3]));
  m.adapter.in_channels = static_cast<std::size_t>(parse_uint64(adapter[4]));
  m.adapter.out_channels = static_cast<std::size_t>(parse_uint64(adapter[5]));

  auto norm = next();
  if (norm.size() != 2 || norm[0] != "adapter_norm")
    throw io_error(path.string() + ": bad adapter_norm line");
  m.adapter_norm = norm[1] == "1";

  auto hidden = next();
  if (hidden.size() != 3 || hidden[0] != "hidden")
    throw io_error(path.string() + ": bad hidden line");
  const std::size_t hidden_rows = static_cast<std::size_t>(parse_uint64(hidden[1]));
  const std::size_t hidden_cols = static_cast<std::size_t>(parse_uint64(hidden[2]));

  auto classes = next();
  if (classes.size() < 3 || classes[0] != "classes")
    throw io_error(path.string() + ": bad classes line");
  for (std::size_t i = 1; i < classes.size(); ++i)
    m.class_ids.push_back(static_cast<int>(parse_int(classes[i])));

  auto read_block = [&](const std::string& name) -> std::vector<double> {
    auto head = next();
    if (head.size() != 3 || head[0] != "param" || head[1] != name)
      throw io_error(path.string() + ": expected param block '" + name + "'");
    const std::size_t count = static_cast<std::size_t>(parse_uint64(head[2]));
    auto values = next();
    if (values.size() != count)
      throw io_error(path.string() + ": param '" + name + "' expected " + std::to_string(count) +
                     " values, got " + std::to_string(values.size()));
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) v[i] = parse_double(values[i]);
    return v;
  };

  m.adapter.weights = read_block("adapter_weights");
  m.adapter.bias = read_block("adapter_bias");
  if (m.adapter_norm) {
    m.norm_gamma = read_block("norm_gamma");
    m.norm_beta = read_block("norm_beta");
  }
  m.hidden.weights = Matrix(hidden_rows, hidden_cols);
  m.hidden.weights.data = read_block("hidden_weights");
  m.hidden.bias = read_block("hidden_bias");
  m.output.weights = Matrix(m.class_ids.size(), hidden_rows);
  m.output.weights.data = read_block("output_weights");
  m.output.bias = read_block("output_bias");

  if (m.adapter.weights.size() != m.adapter.weight_count() ||
      m.adapter.bias.size() != m.adapter.out_channels)
    throw io_error(path.string() + ": adapter parameter sizes inconsistent");
  if (m.hidden.weights.data.size() != hidden_rows * hidden_cols ||
      m.hidden.bias.size() != hidden_rows)
    throw io_error(path.string() + ": hidden parameter sizes inconsistent");
  if (m.output.weights.data.size() != m.class_ids.size() * hidden_rows ||
      m.output.bias.size() != m.class_ids.size())
    throw io_error(path.string() + ": output parameter sizes inconsistent");

  m.conv_out_h = m.adapter.output_size(m.input_h);
  m.conv_out_w = m.adapter.output_size(m.input_w);
  if (m.feature_len() != hidden_cols)
    throw io_error(path.string() + ": hidden layer width does not match adapter output");
  return m;
}

inline void write_trace_csv(const std::filesystem::path& path,
                            const std::vector<EpochRecord>& trace) {
  std::string out = "stage,stage_name,epoch,train_loss,eval_loss\n";
  for (const EpochRecord& r : trace) {
    if (r.stage_name.find(',') != std::string::npos)
      throw invalid_input("write_trace_csv: stage name contains a comma");
    out += std::to_string(r.stage_index + 1) + "," + r.stage_name + "," +
           std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," +
           format_double(r.eval_loss) + "\n";
  }
  atomic_write(path, out);
}

}  // namespace modelaug::io
