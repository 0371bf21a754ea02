#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "niso/spectral_operator.hpp"

namespace niso {

/// Files written by one export call.
struct ExportedImage {
  std::filesystem::path image;
  std::filesystem::path csv;
  std::filesystem::path sidecar;
};

/// Dense Ω = Φ Λ Φᵀ M as an n×n P5 heatmap with min/max normalization, plus
/// the raw matrix as CSV. Files: omega.{pgm,csv,json}.
ExportedImage export_operator(const std::filesystem::path& dir, const OperatorSnapshot& op);

/// k tiles of height×width, row-major, sorted by ascending eigenvalue; each
/// tile maps [−max|φ|, max|φ|] to [0, 255]. Files: eigenfunctions.{pgm,csv,json}.
ExportedImage export_eigenfunction_atlas(const std::filesystem::path& dir, const OperatorSnapshot& op,
                                         std::size_t height, std::size_t width);

/// τ_Ω heatmap with symmetric normalization; the sidecar records the
/// off-diagonal and off-block mass fractions. Files: tau.{pgm,csv,json}.
ExportedImage export_tau(const std::filesystem::path& dir, const Tensor& tau, const Tensor& eigvals,
                         double block_tolerance);

/// Signed per-pixel deviation m − mean(m) rendered as a P6 diverging map:
/// white at zero, blue-green above the mean, orange-red below.
/// Files: mass_deviation.{ppm,csv,json}.
ExportedImage export_mass_deviation(const std::filesystem::path& dir, const OperatorSnapshot& op,
                                    std::size_t height, std::size_t width);

/// Order of eigenvalue indices, ascending (stable).
std::vector<std::size_t> ascending_order(const Tensor& eigvals);

}  // namespace niso
