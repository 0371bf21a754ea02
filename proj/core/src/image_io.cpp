#include "niso/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "niso/error.hpp"

namespace niso {
namespace {

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::size_t header_number(const std::string& bytes, std::size_t& pos, const std::filesystem::path& path) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  std::size_t start = pos;
  while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) throw InputError("malformed pixmap header in " + path.string());
  return std::stoul(bytes.substr(start, pos - start));
}

Image read_pnm(const std::string& bytes, const std::filesystem::path& path) {
  const std::size_t channels = bytes[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  Image img;
  img.width = header_number(bytes, pos, path);
  img.height = header_number(bytes, pos, path);
  const std::size_t maxval = header_number(bytes, pos, path);
  if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 65535) {
    throw InputError("invalid pixmap dimensions in " + path.string());
  }
  ++pos;  // single whitespace before the raster
  img.channels = channels;
  const std::size_t bytes_per = maxval < 256 ? 1 : 2;
  const std::size_t count = img.width * img.height * channels;
  if (bytes.size() < pos + count * bytes_per) throw InputError("truncated pixmap " + path.string());
  img.pixels.resize(count);
  const auto* raster = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned v = bytes_per == 1 ? raster[i] : (unsigned{raster[2 * i]} << 8) | raster[2 * i + 1];
    img.pixels[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return img;
}

Image read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw InputError("cannot decode PNG " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&png);
    throw InputError("cannot decode PNG " + path.string() + ": " + png.message);
  }
  Image img{png.height, png.width, 3, std::vector<double>(buffer.size())};
  std::transform(buffer.begin(), buffer.end(), img.pixels.begin(), [](unsigned char v) { return v / 255.0; });
  return img;
}

std::string pnm_bytes(const Tensor& t, std::size_t channels) {
  const std::size_t h = t.shape()[0], w = t.shape()[1];
  std::ostringstream out;
  out << (channels == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
  std::string s = out.str();
  for (double v : t.data()) {
    const double c = std::clamp(v, 0.0, 1.0);
    s.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
  }
  return s;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) return read_pnm(bytes, path);
  static constexpr unsigned char kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(std::begin(kPngMagic), std::end(kPngMagic),
                                       reinterpret_cast<const unsigned char*>(bytes.data()))) {
    return read_png(path);
  }
  throw InputError("unsupported image format: " + path.string());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_pgm(const std::filesystem::path& path, const Tensor& gray) {
  if (gray.rank() != 2) throw DimensionError("write_pgm needs [H×W], got " + to_string(gray.shape()));
  write_file_atomic(path, pnm_bytes(gray, 1));
}

void write_ppm(const std::filesystem::path& path, const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.shape()[2] != 3) {
    throw DimensionError("write_ppm needs [H×W×3], got " + to_string(rgb.shape()));
  }
  write_file_atomic(path, pnm_bytes(rgb, 3));
}

}  // namespace niso
