#include "niso/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "niso/error.hpp"
#include "niso/image_io.hpp"
#include "niso/isometry_solver.hpp"

namespace niso {

using nlohmann::json;

namespace {

std::string csv_of(const Tensor& m) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}


ExportedImage paths(const std::filesystem::path& dir, const std::string& stem, const char* ext) {
  std::filesystem::create_directories(dir);
  return {dir / (stem + ext), dir / (stem + ".csv"), dir / (stem + ".json")};
}


}  // namespace

std::vector<std::size_t> ascending_order(const Tensor& eigvals) {
  std::vector<std::size_t> order(eigvals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return eigvals[a] < eigvals[b]; });
  return order;
}

ExportedImage export_operator(const std::filesystem::path& dir, const OperatorSnapshot& op) {
  const Tensor omega = operator_matrix(op);
  const auto [lo_it, hi_it] = std::minmax_element(omega.data().begin(), omega.data().end());
  const double lo = *lo_it, hi = *hi_it;
  const double range = hi > lo ? hi - lo : 1.0;
  Tensor img({omega.rows(), omega.cols()});
  for (std::size_t i = 0; i < omega.size(); ++i) img[i] = (omega[i] - lo) / range;

  const ExportedImage out = paths(dir, "omega", ".pgm");
  write_pgm(out.image, img);
  write_file_atomic(out.csv, csv_of(omega));
  const json side = {
      {"image", out.image.filename().string()},
      {"csv", out.csv.filename().string()},
      {"quantity", "dense operator Phi Lambda Phi^T M"},
      {"rows", omega.rows()},
      {"cols", omega.cols()},
      {"normalization", "minmax"},
      {"min", lo},
      {"max", hi},
      {"decode", "value = min + (pixel / 255) * (max - min), pixel rounded to nearest"},
  };
  write_file_atomic(out.sidecar, side.dump(2) + "\n");
  return out;
}

ExportedImage export_eigenfunction_atlas(const std::filesystem::path& dir, const OperatorSnapshot& op,
                                         std::size_t height, std::size_t width) {
  if (height * width != op.n()) {
    throw DimensionError("atlas grid " + std::to_string(height) + "x" + std::to_string(width) +
                         " does not match n=" + std::to_string(op.n()));
  }
  const std::size_t k = op.k();
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(k))));
  const std::size_t rows = (k + cols - 1) / cols;
  Tensor img({rows * height, cols * width});
  const auto order = ascending_order(op.eigvals);

  Tensor sorted({op.n(), k});
  json tiles = json::array();
  for (std::size_t t = 0; t < k; ++t) {
    const std::size_t a = order[t];
    double peak = 0.0;
    for (std::size_t i = 0; i < op.n(); ++i) peak = std::max(peak, std::abs(op.basis(i, a)));
    const double s = peak > 0.0 ? peak : 1.0;
    const std::size_t r0 = (t / cols) * height, c0 = (t % cols) * width;
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        const double v = op.basis(y * width + x, a);
        sorted(y * width + x, t) = v;
        img(r0 + y, c0 + x) = 0.5 + 0.5 * v / s;
      }
    tiles.push_back({{"tile", t}, {"index", a}, {"eigenvalue", op.eigvals[a]}, {"scale", s}});
  }

  const ExportedImage out = paths(dir, "eigenfunctions", ".pgm");
  write_pgm(out.image, img);
  write_file_atomic(out.csv, csv_of(sorted));
  const json side = {
      {"image", out.image.filename().string()},
      {"csv", out.csv.filename().string()},
      {"quantity", "eigenfunctions sorted by ascending eigenvalue"},
      {"tile_height", height},
      {"tile_width", width},
      {"tile_rows", rows},
      {"tile_cols", cols},
      {"tile_count", k},
      {"layout", "row-major"},
      {"normalization", "per-tile symmetric"},
      {"decode", "value = scale * (2 * pixel / 255 - 1)"},
      {"tiles", tiles},
  };
  write_file_atomic(out.sidecar, side.dump(2) + "\n");
  return out;
}

ExportedImage export_tau(const std::filesystem::path& dir, const Tensor& tau, const Tensor& eigvals,
                         double block_tolerance) {
  double peak = 0.0;
  for (double v : tau.data()) peak = std::max(peak, std::abs(v));
  const double s = peak > 0.0 ? peak : 1.0;
  Tensor img({tau.rows(), tau.cols()});
  for (std::size_t i = 0; i < tau.size(); ++i) img[i] = 0.5 + 0.5 * tau[i] / s;

  const ExportedImage out = paths(dir, "tau", ".pgm");
  write_pgm(out.image, img);
  write_file_atomic(out.csv, csv_of(tau));
  const json side = {
      {"image", out.image.filename().string()},
      {"csv", out.csv.filename().string()},
      {"quantity", "spectral map tau_Omega"},
      {"rows", tau.rows()},
      {"cols", tau.cols()},
      {"normalization", "symmetric"},
      {"scale", s},
      {"decode", "value = scale * (2 * pixel / 255 - 1)"},
      {"off_diagonal_fraction", off_diagonal_fraction(tau)},
      {"off_block_fraction", off_block_fraction(tau, eigenvalue_blocks(eigvals, block_tolerance))},
      {"block_tolerance", block_tolerance},
  };
  write_file_atomic(out.sidecar, side.dump(2) + "\n");
  return out;
}

ExportedImage export_mass_deviation(const std::filesystem::path& dir, const OperatorSnapshot& op,
                                    std::size_t height, std::size_t width) {
  if (height * width != op.n()) {
    throw DimensionError("mass grid " + std::to_string(height) + "x" + std::to_string(width) +
                         " does not match n=" + std::to_string(op.n()));
  }
  const double mean = std::accumulate(op.mass.data().begin(), op.mass.data().end(), 0.0) / op.n();
  Tensor dev({height, width});
  double peak = 0.0;
  for (std::size_t i = 0; i < op.n(); ++i) {
    dev[i] = op.mass[i] - mean;
    peak = std::max(peak, std::abs(dev[i]));
  }
  const double s = peak > 0.0 ? peak : 1.0;
  // Endpoints of the diverging ramp; zero deviation is white.
  constexpr double kBelow[3] = {0.85, 0.25, 0.05};
  constexpr double kAbove[3] = {0.05, 0.55, 0.70};
  Tensor img({height, width, 3});
  for (std::size_t i = 0; i < op.n(); ++i) {
    const double t = std::abs(dev[i]) / s;
    const double* end = dev[i] < 0.0 ? kBelow : kAbove;
    for (int c = 0; c < 3; ++c) img[i * 3 + c] = 1.0 + t * (end[c] - 1.0);
  }

  const ExportedImage out = paths(dir, "mass_deviation", ".ppm");
  write_ppm(out.image, img);
  write_file_atomic(out.csv, csv_of(dev));
  const json side = {
      {"image", out.image.filename().string()},
      {"csv", out.csv.filename().string()},
      {"quantity", "mass minus its mean"},
      {"mean", mean},
      {"normalization", "symmetric diverging"},
      {"scale", s},
      {"below_mean_rgb", {kBelow[0], kBelow[1], kBelow[2]}},
      {"above_mean_rgb", {kAbove[0], kAbove[1], kAbove[2]}},
      {"decode", "|value| = scale * t where pixel = white + t * (endpoint - white); sign from the hue"},
  };
  write_file_atomic(out.sidecar, side.dump(2) + "\n");
  return out;
}

}  // namespace niso
