#include "niso/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "niso/error.hpp"
#include "niso/image_io.hpp"

namespace niso {

namespace {

class Writer {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    buf_.append(reinterpret_cast<const char*>(raw), sizeof(T));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  void put_doubles(std::span<const double> xs) {
    for (double x : xs) put(x);
  }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(const std::string& b, std::size_t end) : b_(b), end_(end) {}

  template <class T>
  T get() {
    need(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, b_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> get_doubles(std::uint64_t n) {
    if (n > (end_ - pos_) / sizeof(double)) throw InputError("checkpoint truncated");
    std::vector<double> out(n);
    for (auto& x : out) x = get<double>();
    return out;
  }
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw InputError("checkpoint truncated");
  }

  const std::string& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::string& bytes, std::size_t len) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(len)));
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes().append(kCheckpointMagic.data(), kCheckpointMagic.size());
  w.put(kCheckpointVersion);
  w.put(ckpt.step);
  const auto& params = ckpt.params.parameters();
  w.put(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.put_string(p.name);
    w.put(static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto d : p.tensor.shape()) w.put(static_cast<std::uint64_t>(d));
    w.put_doubles(p.tensor.data());
  }
  const auto& opt = ckpt.optimizer;
  w.put(opt.step);
  w.put(static_cast<std::uint32_t>(opt.names.size()));
  for (std::size_t i = 0; i < opt.names.size(); ++i) {
    w.put_string(opt.names[i]);
    w.put(static_cast<std::uint64_t>(opt.first_moment[i].size()));
    w.put_doubles(opt.first_moment[i]);
    w.put_doubles(opt.second_moment[i]);
  }
  w.put_string(ckpt.config_json);
  w.put(crc_of(w.bytes(), w.bytes().size()));
  return std::move(w.bytes());
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  constexpr std::size_t kHeader = kCheckpointMagic.size() + 1;
  if (bytes.size() < kHeader + sizeof(std::uint32_t)) throw InputError("checkpoint truncated");
  if (std::memcmp(bytes.data(), kCheckpointMagic.data(), kCheckpointMagic.size()) != 0) {
    throw InputError("not a checkpoint (bad magic)");
  }
  const auto version = static_cast<std::uint8_t>(bytes[kCheckpointMagic.size()]);
  if (version != kCheckpointVersion) {
    throw InputError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::size_t body_end = bytes.size() - sizeof(std::uint32_t);
  ByteReader tail(bytes, bytes.size());
  tail.seek(body_end);
  if (tail.get<std::uint32_t>() != crc_of(bytes, body_end)) throw InputError("checkpoint checksum mismatch");

  ByteReader r(bytes, body_end);
  r.seek(kHeader);
  const auto step = r.get<std::uint64_t>();
  const auto nparams = r.get<std::uint32_t>();
  std::optional<Tensor> mass, basis, eigvals;
  for (std::uint32_t i = 0; i < nparams; ++i) {
    const std::string name = r.get_string();
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw InputError("checkpoint parameter '" + name + "' has implausible rank");
    Shape shape;
    std::uint64_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto extent = r.get<std::uint64_t>();
      shape.push_back(static_cast<std::size_t>(extent));
      count *= extent;
    }
    Tensor t(shape, r.get_doubles(count));
    if (name == SpectralOperatorParams::kRawMass) mass = std::move(t);
    else if (name == SpectralOperatorParams::kRawBasis) basis = std::move(t);
    else if (name == SpectralOperatorParams::kRawEigvals) eigvals = std::move(t);
    else throw InputError("checkpoint has unknown parameter '" + name + "'");
  }
  if (!mass || !basis || !eigvals) throw InputError("checkpoint is missing operator parameters");

  OptimizerState opt;
  opt.step = r.get<std::uint64_t>();
  const auto slots = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < slots; ++i) {
    opt.names.push_back(r.get_string());
    const auto len = r.get<std::uint64_t>();
    opt.first_moment.push_back(r.get_doubles(len));
    opt.second_moment.push_back(r.get_doubles(len));
  }
  std::string config = r.get_string();
  if (r.pos() != body_end) throw InputError("checkpoint has trailing bytes");
  try {
    return Checkpoint{step, SpectralOperatorParams(std::move(*mass), std::move(*basis), std::move(*eigvals)),
                      std::move(opt), std::move(config)};
  } catch (const Error& e) {
    throw InputError(std::string("checkpoint parameters are inconsistent: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace niso
