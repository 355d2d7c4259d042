#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dnncov/tensor.hpp"

namespace dnncov {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;  // unsigned byte, 3 dims
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;  // unsigned byte, 1 dim

/// Images scaled to [0, 1] (byte / 255), one [rows, cols] tensor each.
struct Dataset {
  std::vector<Tensor> images;
  std::vector<std::uint8_t> labels;  // empty when loaded without a label file

  std::size_t size() const { return images.size(); }
  bool has_labels() const { return !labels.empty(); }
};

std::vector<Tensor> read_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);

/// Reads both files and checks the counts agree.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Writes [rows, cols] (or [1, rows, cols]) images; values are clamped to
/// [0, 1] and rounded to the nearest byte.
void write_idx_images(const std::filesystem::path& path, std::span<const Tensor> images);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

}  // namespace dnncov
