#include "niso/data_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "niso/error.hpp"
#include "niso/image_io.hpp"

namespace niso {

std::string to_string(Domain d) { return d == Domain::torus ? "torus" : "sphere"; }

Domain parse_domain(const std::string& s) {
  if (s == "torus") return Domain::torus;
  if (s == "sphere") return Domain::sphere;
  throw ConfigError("unknown domain '" + s + "' (expected torus or sphere)");
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

// --- quaternions -------------------------------------------------------------

Quaternion Quaternion::uniform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double u1 = u(rng), u2 = u(rng), u3 = u(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double t2 = 2.0 * std::numbers::pi * u2, t3 = 2.0 * std::numbers::pi * u3;
  return Quaternion{b * std::cos(t3), a * std::sin(t2), a * std::cos(t2), b * std::sin(t3)};
}

Quaternion Quaternion::axis_angle(std::array<double, 3> axis, double angle) {
  const double n = std::hypot(axis[0], axis[1], axis[2]);
  if (n == 0.0) return identity();
  const double s = std::sin(angle / 2.0) / n;
  return Quaternion{std::cos(angle / 2.0), axis[0] * s, axis[1] * s, axis[2] * s};
}

Quaternion Quaternion::operator*(const Quaternion& o) const {
  return Quaternion{w * o.w - x * o.x - y * o.y - z * o.z, w * o.x + x * o.w + y * o.z - z * o.y,
                    w * o.y - x * o.z + y * o.w + z * o.x, w * o.z + x * o.y - y * o.x + z * o.w};
}

std::array<double, 3> Quaternion::rotate(const std::array<double, 3>& v) const {
  // v' = v + w·t + q×t with t = 2·(q×v)
  const double tx = 2.0 * (y * v[2] - z * v[1]);
  const double ty = 2.0 * (z * v[0] - x * v[2]);
  const double tz = 2.0 * (x * v[1] - y * v[0]);
  return {v[0] + w * tx + (y * tz - z * ty), v[1] + w * ty + (z * tx - x * tz), v[2] + w * tz + (x * ty - y * tx)};
}

// --- torus -------------------------------------------------------------------

Observation toric_shift(const Observation& obs, int shift_y, int shift_x) {
  const auto h = obs.height(), w = obs.width(), c = obs.channels();
  const auto wrap = [](long v, std::size_t n) {
    const long m = static_cast<long>(n);
    return static_cast<std::size_t>(((v % m) + m) % m);
  };
  Observation out{Tensor(obs.values.shape()), obs.domain, obs.meta};
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t sy = wrap(static_cast<long>(y) - shift_y, h);
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t sx = wrap(static_cast<long>(x) - shift_x, w);
      const double* src = obs.values.data().data() + (sy * w + sx) * c;
      std::copy(src, src + c, out.values.data().data() + (y * w + x) * c);
    }
  }
  out.meta.shift = {static_cast<int>(wrap(obs.meta.shift[0] + shift_y, h)),
                    static_cast<int>(wrap(obs.meta.shift[1] + shift_x, w))};
  return out;
}

ObservationTuple toric_shift_pair(const Observation& obs, std::mt19937_64& rng, bool triple) {
  if (obs.domain != Domain::torus) throw UsageError("toric_shift_pair needs a torus observation");
  std::uniform_int_distribution<int> dy(0, static_cast<int>(obs.height()) - 1);
  std::uniform_int_distribution<int> dx(0, static_cast<int>(obs.width()) - 1);
  const int sy = dy(rng), sx = dx(rng);
  ObservationTuple t;
  t.frames.push_back(obs);
  t.frames.push_back(toric_shift(obs, sy, sx));
  if (triple) t.frames.push_back(toric_shift(obs, 2 * sy, 2 * sx));
  return t;
}

// --- sphere ------------------------------------------------------------------

double dh_colatitude(std::size_t row, std::size_t height) {
  return std::numbers::pi * (2.0 * static_cast<double>(row) + 1.0) / (2.0 * static_cast<double>(height));
}

double dh_longitude(std::size_t col, std::size_t width) {
  return 2.0 * std::numbers::pi * static_cast<double>(col) / static_cast<double>(width);
}

namespace {

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

}  // namespace

Observation sphere_rotate(const Observation& obs, const Quaternion& q) {
  const auto h = obs.height(), w = obs.width(), c = obs.channels();
  const Quaternion inv = q.conjugate();
  Observation out{Tensor(obs.values.shape()), obs.domain, obs.meta};
  const double* src = obs.values.data().data();
  double* dst = out.values.data().data();
  for (std::size_t j = 0; j < h; ++j) {
    const double theta = dh_colatitude(j, h);
    for (std::size_t i = 0; i < w; ++i) {
      const double phi = dh_longitude(i, w);
      const auto p = inv.rotate({std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)});
      const double src_theta = std::acos(std::clamp(p[2], -1.0, 1.0));
      double src_phi = std::atan2(p[1], p[0]);
      if (src_phi < 0.0) src_phi += 2.0 * std::numbers::pi;

      const double t = std::clamp(snap(src_theta * static_cast<double>(h) / std::numbers::pi - 0.5), 0.0,
                                  static_cast<double>(h - 1));
      const double u = snap(src_phi * static_cast<double>(w) / (2.0 * std::numbers::pi));
      const std::size_t j0 = static_cast<std::size_t>(std::floor(t));
      const std::size_t j1 = std::min(j0 + 1, h - 1);
      const double wt = t - static_cast<double>(j0);
      const double fu = std::floor(u);
      const std::size_t i0 = static_cast<std::size_t>(static_cast<long>(fu) % static_cast<long>(w) + w) % w;
      const std::size_t i1 = (i0 + 1) % w;
      const double wu = u - fu;

      const double w00 = (1 - wt) * (1 - wu), w01 = (1 - wt) * wu, w10 = wt * (1 - wu), w11 = wt * wu;
      const double* a = src + (j0 * w + i0) * c;
      const double* b = src + (j0 * w + i1) * c;
      const double* d = src + (j1 * w + i0) * c;
      const double* e = src + (j1 * w + i1) * c;
      double* o = dst + (j * w + i) * c;
      for (std::size_t ch = 0; ch < c; ++ch) o[ch] = w00 * a[ch] + w01 * b[ch] + w10 * d[ch] + w11 * e[ch];
    }
  }
  out.meta.rotation = q * obs.meta.rotation;
  return out;
}

ObservationTuple sphere_rotation_pair(const Observation& obs, std::mt19937_64& rng, bool triple) {
  if (obs.domain != Domain::sphere) throw UsageError("sphere_rotation_pair needs a sphere observation");
  const Quaternion q = Quaternion::uniform(rng);
  ObservationTuple t;
  t.frames.push_back(obs);
  t.frames.push_back(sphere_rotate(obs, q));
  if (triple) t.frames.push_back(sphere_rotate(obs, q * q));
  return t;
}

// --- sources -----------------------------------------------------------------

namespace {

struct FourierMode {
  std::size_t fy, fx;
  bool self_conjugate;
};

std::vector<FourierMode> texture_modes(std::size_t h, std::size_t w, double cutoff) {
  std::vector<FourierMode> modes;
  const auto signed_freq = [](std::size_t f, std::size_t n) {
    return 2 * f <= n ? static_cast<double>(f) : static_cast<double>(f) - static_cast<double>(n);
  };
  for (std::size_t fy = 0; fy < h; ++fy)
    for (std::size_t fx = 0; fx < w; ++fx) {
      const double sy = signed_freq(fy, h), sx = signed_freq(fx, w);
      if (sy * sy + sx * sx > cutoff * cutoff + 1e-9) continue;
      const std::size_t ny = (h - fy) % h, nx = (w - fx) % w;
      if (std::make_pair(fy, fx) > std::make_pair(ny, nx)) continue;  // keep one of {f, −f}
      modes.push_back({fy, fx, fy == ny && fx == nx});
    }
  return modes;
}

}  // namespace

std::size_t texture_mode_count(std::size_t height, std::size_t width, double cutoff) {
  std::size_t n = 0;
  for (const auto& m : texture_modes(height, width, cutoff)) n += m.self_conjugate ? 1 : 2;
  return n;
}

Observation synthetic_texture(std::size_t height, std::size_t width, std::size_t channels, double cutoff,
                              std::mt19937_64& rng) {
  if (height == 0 || width == 0 || channels == 0) throw ConfigError("texture extents must be positive");
  if (!(cutoff >= 0.0) || cutoff > static_cast<double>(std::min(height, width)) / 2.0) {
    throw ConfigError("texture cutoff " + std::to_string(cutoff) + " outside [0, min(H,W)/2]");
  }
  const auto modes = texture_modes(height, width, cutoff);
  const double real_modes = static_cast<double>(texture_mode_count(height, width, cutoff));
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(real_modes));

  Observation obs{Tensor({height, width, channels}), Domain::torus, {}};
  std::vector<double> basis_cos(height * width), basis_sin(height * width);
  for (const auto& m : modes) {
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        const double angle = 2.0 * std::numbers::pi *
                             (static_cast<double>(m.fy * y) / static_cast<double>(height) +
                              static_cast<double>(m.fx * x) / static_cast<double>(width));
        const double amp = m.self_conjugate ? 1.0 : std::numbers::sqrt2;
        basis_cos[y * width + x] = amp * std::cos(angle);
        basis_sin[y * width + x] = amp * std::sin(angle);
      }
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const double a = gauss(rng);
      const double b = m.self_conjugate ? 0.0 : gauss(rng);
      for (std::size_t p = 0; p < height * width; ++p) {
        obs.values[p * channels + ch] += a * basis_cos[p] + b * basis_sin[p];
      }
    }
  }
  return obs;
}

Observation spherical_texture(std::size_t height, std::size_t width, std::size_t channels,
                              std::size_t max_degree, std::mt19937_64& rng) {
  if (height == 0 || width == 0 || channels == 0) throw ConfigError("texture extents must be positive");
  const double harmonics = static_cast<double>((max_degree + 1) * (max_degree + 1));
  std::normal_distribution<double> gauss(0.0, std::sqrt(4.0 * std::numbers::pi / harmonics));
  Observation obs{Tensor({height, width, channels}), Domain::sphere, {}};
  std::vector<double> y(height * width);
  for (std::size_t l = 0; l <= max_degree; ++l) {
    for (int m = -static_cast<int>(l); m <= static_cast<int>(l); ++m) {
      const unsigned am = static_cast<unsigned>(std::abs(m));
      for (std::size_t j = 0; j < height; ++j) {
        const double legendre = std::sph_legendre(static_cast<unsigned>(l), am, dh_colatitude(j, height));
        for (std::size_t i = 0; i < width; ++i) {
          const double phi = dh_longitude(i, width);
          double v = legendre;
          if (m > 0) v *= std::numbers::sqrt2 * std::cos(am * phi);
          if (m < 0) v *= std::numbers::sqrt2 * std::sin(am * phi);
          y[j * width + i] = v;
        }
      }
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const double a = gauss(rng);
        for (std::size_t p = 0; p < height * width; ++p) obs.values[p * channels + ch] += a * y[p];
      }
    }
  }
  return obs;
}

Observation load_image_stack(const std::filesystem::path& dir, std::size_t height, std::size_t width,
                             std::size_t count) {
  if (count == 0) throw ConfigError("image count must be positive");
  if (!std::filesystem::is_directory(dir)) throw InputError("image directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().filename().string().starts_with(".")) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  if (files.size() < count) {
    throw InputError("need " + std::to_string(count) + " images in " + dir.string() + ", found " +
                     std::to_string(files.size()));
  }
  files.resize(count);

  std::vector<Image> images;
  std::string failures;
  for (const auto& f : files) {
    try {
      images.push_back(read_image(f));
    } catch (const InputError& e) {
      failures += "\n  " + f.string() + ": " + e.what();
    }
  }
  if (!failures.empty()) throw InputError("undecodable images:" + failures);

  Observation obs{Tensor({height, width, 3 * count}), Domain::torus, {}};
  const std::size_t channels = 3 * count;
  for (std::size_t n = 0; n < count; ++n) {
    const Image& img = images[n];
    // Largest centered window with the target aspect ratio.
    std::size_t crop_h = img.height, crop_w = img.height * width / height;
    if (crop_w > img.width) {
      crop_w = img.width;
      crop_h = std::max<std::size_t>(1, img.width * height / width);
    }
    crop_w = std::max<std::size_t>(1, crop_w);
    const std::size_t top = (img.height - crop_h) / 2, left = (img.width - crop_w) / 2;
    for (std::size_t y = 0; y < height; ++y) {
      const std::size_t y0 = top + y * crop_h / height;
      const std::size_t y1 = std::max(y0 + 1, top + (y + 1) * crop_h / height);
      for (std::size_t x = 0; x < width; ++x) {
        const std::size_t x0 = left + x * crop_w / width;
        const std::size_t x1 = std::max(x0 + 1, left + (x + 1) * crop_w / width);
        for (std::size_t c = 0; c < 3; ++c) {
          const std::size_t src_c = img.channels == 1 ? 0 : c;
          double acc = 0.0;
          for (std::size_t sy = y0; sy < y1; ++sy)
            for (std::size_t sx = x0; sx < x1; ++sx) acc += img.at(sy, sx, src_c);
          obs.values[(y * width + x) * channels + 3 * n + c] = acc / static_cast<double>((y1 - y0) * (x1 - x0));
        }
      }
    }
  }
  return obs;
}

PairSource::PairSource(PairSpec spec) : spec_(std::move(spec)) {
  if (spec_.source == SourceKind::image_dir) {
    images_ = load_image_stack(spec_.image_dir, spec_.height, spec_.width, spec_.image_count);
    images_->domain = spec_.domain;
    spec_.channels = images_->channels();
  } else if (spec_.domain == Domain::torus) {
    if (spec_.cutoff > static_cast<double>(std::min(spec_.height, spec_.width)) / 2.0 || spec_.cutoff < 0.0) {
      throw ConfigError("texture cutoff outside [0, min(H,W)/2]");
    }
  }
}

ObservationTuple PairSource::tuple(std::uint64_t stream, std::uint64_t index) const {
  auto rng = make_rng(spec_.seed, stream, index);
  Observation base;
  if (images_) {
    base = *images_;
  } else if (spec_.domain == Domain::torus) {
    base = synthetic_texture(spec_.height, spec_.width, spec_.channels, spec_.cutoff, rng);
  } else {
    base = spherical_texture(spec_.height, spec_.width, spec_.channels,
                             static_cast<std::size_t>(std::lround(spec_.cutoff)), rng);
  }
  return spec_.domain == Domain::torus ? toric_shift_pair(base, rng, spec_.triple)
                                       : sphere_rotation_pair(base, rng, spec_.triple);
}

}  // namespace niso
