#include "dnncov/idx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "dnncov/error.hpp"

namespace dnncov {

namespace {

std::uint32_t read_be32(std::ifstream& in, const std::filesystem::path& path, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw Error(ErrorCode::kParse, path.string() + ": truncated header (" + what + ")");
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>((v >> 24) & 0xFF), static_cast<char>((v >> 16) & 0xFF),
                     static_cast<char>((v >> 8) & 0xFF), static_cast<char>(v & 0xFF)};
  out.write(b, 4);
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return in;
}

std::uintmax_t remaining(std::ifstream& in, const std::filesystem::path& path) {
  const auto pos = static_cast<std::uintmax_t>(in.tellg());
  const auto total = std::filesystem::file_size(path);
  return total >= pos ? total - pos : 0;
}

void check_magic(std::uint32_t magic, std::uint32_t expected, const std::filesystem::path& path) {
  if (magic != expected) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "bad magic 0x%08x (expected 0x%08x)", magic, expected);
    throw Error(ErrorCode::kParse, path.string() + ": " + buf);
  }
}

}  // namespace

std::vector<Tensor> read_idx_images(const std::filesystem::path& path) {
  auto in = open_in(path);
  check_magic(read_be32(in, path, "magic"), kIdxImageMagic, path);
  const std::uint32_t count = read_be32(in, path, "image count");
  const std::uint32_t rows = read_be32(in, path, "rows");
  const std::uint32_t cols = read_be32(in, path, "cols");
  if (rows == 0 || cols == 0) throw Error(ErrorCode::kParse, path.string() + ": zero image dimension");
  const std::uintmax_t plane = std::uintmax_t{rows} * cols;
  if (remaining(in, path) < plane * count) {
    throw Error(ErrorCode::kParse, path.string() + ": truncated payload, header declares " + std::to_string(count) +
                                       " images of " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  std::vector<Tensor> images;
  images.reserve(count);
  std::vector<unsigned char> buf(static_cast<std::size_t>(plane));
  for (std::uint32_t n = 0; n < count; ++n) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    std::vector<double> px(buf.size());
    std::transform(buf.begin(), buf.end(), px.begin(), [](unsigned char b) { return b / 255.0; });
    images.emplace_back(Shape{rows, cols}, std::move(px));
  }
  return images;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
  auto in = open_in(path);
  check_magic(read_be32(in, path, "magic"), kIdxLabelMagic, path);
  const std::uint32_t count = read_be32(in, path, "label count");
  if (remaining(in, path) < count) {
    throw Error(ErrorCode::kParse, path.string() + ": truncated payload, header declares " + std::to_string(count) +
                                       " labels");
  }
  std::vector<std::uint8_t> labels(count);
  in.read(reinterpret_cast<char*>(labels.data()), count);
  return labels;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  Dataset ds;
  ds.images = read_idx_images(images_path);
  ds.labels = read_idx_labels(labels_path);
  if (ds.images.size() != ds.labels.size()) {
    throw Error(ErrorCode::kInput, "image/label count mismatch: " + std::to_string(ds.images.size()) + " images vs " +
                                       std::to_string(ds.labels.size()) + " labels");
  }
  return ds;
}

void write_idx_images(const std::filesystem::path& path, std::span<const Tensor> images) {
  std::size_t rows = 1, cols = 1;
  if (!images.empty()) {
    const Shape& s = images.front().shape();
    if (s.size() == 2) {
      rows = s[0];
      cols = s[1];
    } else if (s.size() == 3 && s[0] == 1) {
      rows = s[1];
      cols = s[2];
    } else {
      throw Error(ErrorCode::kShapeMismatch, "IDX images must be [rows, cols] or [1, rows, cols], got " +
                                                 shape_to_string(s));
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(images.size()));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  for (const Tensor& img : images) {
    if (img.size() != rows * cols) throw Error(ErrorCode::kShapeMismatch, "IDX images must share one shape");
    for (double v : img.data()) {
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
    }
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace dnncov
