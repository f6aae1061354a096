#pragma once

// Portable graymap/pixmap fixtures: P2/P5 (gray) and P3/P6 (color), maxval up
// to 255. Pixel values load as raw doubles in [0, maxval].

#include <cctype>
#include <cmath>
#include <filesystem>
#include <string>

#include "modelaug/errors.hpp"
#include "modelaug/image.hpp"
#include "modelaug/io/text.hpp"

namespace modelaug::io {

namespace detail {

// Token scanner that treats '#'-to-end-of-line as whitespace.
struct PnmScanner {
  const std::string& buf;
  std::size_t pos = 0;

  explicit PnmScanner(const std::string& b) : buf(b) {}

  void skip_space() {
    while (pos < buf.size()) {
      if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
        ++pos;
      } else if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  }

  std::string next_token() {
    skip_space();
    std::size_t start = pos;
    while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos])) &&
           buf[pos] != '#')
      ++pos;
    if (pos == start) throw io_error("pnm: unexpected end of file");
    return buf.substr(start, pos - start);
  }

  unsigned next_number() {
    const std::string t = next_token();
    long long v = parse_int(t);
    if (v < 0) throw io_error("pnm: negative value");
    return static_cast<unsigned>(v);
  }
};

}  // namespace detail

inline ImageGrid read_pnm(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  detail::PnmScanner sc(buf);
  const std::string magic = sc.next_token();
  std::size_t channels = 0;
  bool binary = false;
  if (magic == "P2") channels = 1;
  else if (magic == "P3") channels = 3;
  else if (magic == "P5") { channels = 1; binary = true; }
  else if (magic == "P6") { channels = 3; binary = true; }
  else throw io_error(path.string() + ": unsupported magic '" + magic + "'");

  const unsigned w = sc.next_number();
  const unsigned h = sc.next_number();
  const unsigned maxval = sc.next_number();
  if (w == 0 || h == 0) throw io_error(path.string() + ": empty image");
  if (maxval == 0 || maxval > 255)
    throw io_error(path.string() + ": unsupported maxval " + std::to_string(maxval));

  ImageGrid img = ImageGrid::zeros(h, w, channels);
  if (binary) {
    // exactly one whitespace character separates the header from the bytes
    if (sc.pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[sc.pos])))
      throw io_error(path.string() + ": malformed binary header");
    ++sc.pos;
    const std::size_t need = static_cast<std::size_t>(w) * h * channels;
    if (buf.size() - sc.pos < need) throw io_error(path.string() + ": truncated pixel data");
    for (std::size_t i = 0; i < need; ++i)
      img.data[i] = static_cast<double>(static_cast<unsigned char>(buf[sc.pos + i]));
  } else {
    for (std::size_t i = 0; i < img.data.size(); ++i) {
      unsigned v = sc.next_number();
      if (v > maxval) throw io_error(path.string() + ": sample exceeds maxval");
      img.data[i] = static_cast<double>(v);
    }
  }
  return img;
}

inline void write_pnm(const std::filesystem::path& path, const ImageGrid& img,
                      bool binary = false, unsigned maxval = 255) {
  if (img.channels != 1 && img.channels != 3)
    throw invalid_input("write_pnm: only 1- or 3-channel images");
  if (maxval == 0 || maxval > 255) throw invalid_input("write_pnm: unsupported maxval");

  const char* magic = img.channels == 1 ? (binary ? "P5" : "P2") : (binary ? "P6" : "P3");
  std::string out = std::string(magic) + "\n" + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n" + std::to_string(maxval) + "\n";
  auto quantize = [maxval](double v) -> unsigned {
    long q = std::lround(v);
    if (q < 0) q = 0;
    if (q > static_cast<long>(maxval)) q = static_cast<long>(maxval);
    return static_cast<unsigned>(q);
  };
  if (binary) {
    for (double v : img.data) out.push_back(static_cast<char>(quantize(v)));
  } else {
    std::size_t per_line = 0;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
      out += std::to_string(quantize(img.data[i]));
      if (++per_line == 16 || i + 1 == img.data.size()) {
        out += "\n";
        per_line = 0;
      } else {
        out += " ";
      }
    }
  }
  atomic_write(path, out);
}

}  // namespace modelaug::io
