#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "niso/tensor.hpp"

namespace niso {

/// 8/16-bit raster decoded to doubles in [0, 1], row-major [H×W×C].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> pixels;

  double at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }
};

/// Decodes binary PGM (P5), PPM (P6) or PNG. Throws InputError otherwise.
Image read_image(const std::filesystem::path& path);

/// Writes a binary PGM from values in [0, 1] (clamped), shape [H×W].
void write_pgm(const std::filesystem::path& path, const Tensor& gray);
/// Writes a binary PPM from values in [0, 1] (clamped), shape [H×W×3].
void write_ppm(const std::filesystem::path& path, const Tensor& rgb);

/// Writes `bytes` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace niso
