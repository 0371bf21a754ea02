#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "niso/tensor.hpp"

namespace niso {

enum class Domain { torus, sphere };

std::string to_string(Domain d);
Domain parse_domain(const std::string& s);

/// Unit quaternion (w, x, y, z).
struct Quaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  static Quaternion identity() { return {}; }
  /// Uniform over SO(3) from three U(0,1) draws (Shoemake).
  static Quaternion uniform(std::mt19937_64& rng);
  static Quaternion axis_angle(std::array<double, 3> axis, double angle);

  Quaternion operator*(const Quaternion& o) const;
  Quaternion conjugate() const { return {w, -x, -y, -z}; }
  std::array<double, 3> rotate(const std::array<double, 3>& v) const;
};

/// Transformation parameters attached to a generated observation.
struct TransformMeta {
  std::array<int, 2> shift{0, 0};
  Quaternion rotation;
};

/// Values on an H×W grid with C channels, row-major [H×W×C].
struct Observation {
  Tensor values;
  Domain domain = Domain::torus;
  TransformMeta meta;

  std::size_t height() const { return values.shape()[0]; }
  std::size_t width() const { return values.shape()[1]; }
  std::size_t channels() const { return values.shape()[2]; }
  /// [H·W × C] view used as the latent function under the identity codec.
  Tensor as_matrix() const { return values.reshaped({height() * width(), channels()}); }
};

/// ψ, Tψ and optionally T²ψ.
struct ObservationTuple {
  std::vector<Observation> frames;
};

// --- torus -----------------------------------------------------------------

/// Circular roll: out(y, x) = in(y − sy mod H, x − sx mod W).
Observation toric_shift(const Observation& obs, int shift_y, int shift_x);
/// Samples (sy, sx) uniformly over the grid. `triple` adds the roll by 2·shift.
ObservationTuple toric_shift_pair(const Observation& obs, std::mt19937_64& rng, bool triple = false);

// --- sphere ----------------------------------------------------------------

/// Colatitude of row j on an H-row Driscoll–Healy grid: π(2j+1)/(2H).
double dh_colatitude(std::size_t row, std::size_t height);
/// Longitude of column i: 2πi/W.
double dh_longitude(std::size_t col, std::size_t width);

/// Tψ(x) = ψ(R⁻¹x), bilinear in (colatitude, longitude) with longitude
/// wraparound and colatitude clamped at the poles.
Observation sphere_rotate(const Observation& obs, const Quaternion& q);
ObservationTuple sphere_rotation_pair(const Observation& obs, std::mt19937_64& rng, bool triple = false);

// --- sources ---------------------------------------------------------------

/// Periodic low-pass white noise: every channel is a Gaussian combination of
/// the real Fourier modes with |f| ≤ cutoff (|f|² = fy² + fx² on signed
/// frequencies), scaled so the expected per-channel variance is 1.
Observation synthetic_texture(std::size_t height, std::size_t width, std::size_t channels, double cutoff,
                              std::mt19937_64& rng);

/// Band-limited spherical field: Gaussian combination of real spherical
/// harmonics of degree ≤ max_degree sampled on the Driscoll–Healy grid,
/// scaled to unit expected mean square over the sphere.
Observation spherical_texture(std::size_t height, std::size_t width, std::size_t channels,
                              std::size_t max_degree, std::mt19937_64& rng);

/// Number of real Fourier modes kept by synthetic_texture for a cutoff.
std::size_t texture_mode_count(std::size_t height, std::size_t width, double cutoff);

/// Loads `count` images (P5/P6 pixmaps or PNG) in lexicographic filename
/// order, center-crops to the H:W aspect, resizes to H×W and concatenates
/// RGB channels (grayscale is replicated) into C = 3·count. Values in [0, 1].
Observation load_image_stack(const std::filesystem::path& dir, std::size_t height, std::size_t width,
                             std::size_t count);

enum class SourceKind { synthetic, image_dir };

/// Where observations come from and how pairs are formed.
struct PairSpec {
  bool triple = false;
  Domain domain = Domain::torus;
  std::uint64_t seed = 0;
  SourceKind source = SourceKind::synthetic;
  std::filesystem::path image_dir;
  std::size_t image_count = 1;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t channels = 64;
  /// Torus: Fourier cutoff radius. Sphere: maximum harmonic degree.
  double cutoff = 3.0;
};

/// Deterministic generator: tuple(stream, index) depends only on the spec and
/// its arguments.
class PairSource {
 public:
  explicit PairSource(PairSpec spec);

  ObservationTuple tuple(std::uint64_t stream, std::uint64_t index) const;
  const PairSpec& spec() const noexcept { return spec_; }

 private:
  PairSpec spec_;
  std::optional<Observation> images_;
};

/// RNG seeded from (seed, stream, index) through std::seed_seq.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace niso
