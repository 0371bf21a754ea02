#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unistd.h>

#include "niso/checkpoint.hpp"
#include "niso/config.hpp"
#include "niso/error.hpp"
#include "niso/export.hpp"
#include "niso/image_io.hpp"
#include "niso/run_io.hpp"
#include "oracles.hpp"

using namespace niso;
using nlohmann::json;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("niso-io-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

Checkpoint sample_checkpoint() {
  std::mt19937_64 rng(71);
  SpectralOperatorParams params(16, 4, OperatorInit{}, rng);
  AdamW opt(params.parameters());
  for (auto& p : params.parameters()) p.tensor.grad.assign(p.tensor.size(), 0.25);
  opt.step(params.parameters(), 1e-3, 1e-4);
  return Checkpoint{7, params, opt.state(), R"({"steps": 10})"};
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("config parsing is strict") {
    const TrainConfig defaults = parse_config("{}");
    CHECK(defaults.steps == 20000);
    CHECK(defaults.k == 32);
    CHECK(defaults.weights.beta == 0.1);

    const TrainConfig c = parse_config(R"({"steps": 50, "warmup_steps": 5, "k": 8,
        "data": {"height": 4, "width": 4, "channels": 3, "cutoff": 1.5}, "seed": 9})");
    CHECK(c.steps == 50);
    CHECK(c.data.channels == 3);
    CHECK(c.data.seed == 9);

    CHECK(config_error(R"({"stepz": 5})").find("stepz") != std::string::npos);
    CHECK(config_error(R"({"data": {"hieght": 4}})").find("data.hieght") != std::string::npos);
    CHECK(config_error(R"({"steps": "many"})").find("steps") != std::string::npos);
    CHECK(config_error(R"({"steps": -3})").find("steps") != std::string::npos);
    CHECK(config_error(R"({"regime": "quad"})").find("regime") != std::string::npos);
    CHECK(config_error(R"({"steps": 10,})") != "");
    CHECK(config_error(R"([1, 2])") != "");
    CHECK(config_error(R"({"k": 100})") != "");
  }

  TEST_CASE("config round trip") {
    TrainConfig c = parse_config(R"({"steps": 123, "warmup_steps": 10, "beta": 0.25, "regime": "triplet",
        "data": {"domain": "sphere", "triple": true, "height": 8, "width": 8, "cutoff": 2}, "k": 9})");
    const TrainConfig back = parse_config(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
    CHECK(back.regime == Regime::triplet);
    CHECK(back.data.domain == Domain::sphere);
    CHECK(json::parse(config_schema()).contains("properties"));
  }

  TEST_CASE("checkpoint round trip") {
    const Checkpoint ck = sample_checkpoint();
    const std::string bytes = encode_checkpoint(ck);
    CHECK(bytes.substr(0, 8) == "NISOCKPT");
    CHECK(static_cast<unsigned char>(bytes[8]) == 1);
    const Checkpoint back = decode_checkpoint(bytes);
    CHECK(back.step == 7);
    CHECK(back.config_json == ck.config_json);
    for (const auto& p : ck.params.parameters())
      CHECK(max_abs_diff(p.tensor, back.params.parameters().at(p.name).tensor) == 0.0);
    CHECK(back.optimizer.step == ck.optimizer.step);
    CHECK(back.optimizer.first_moment == ck.optimizer.first_moment);
    CHECK(back.optimizer.second_moment == ck.optimizer.second_moment);
    CHECK(encode_checkpoint(back) == bytes);

    TempDir dir("ckpt");
    save_checkpoint(dir.path / "c.bin", ck);
    CHECK(slurp(dir.path / "c.bin") == bytes);
    CHECK(encode_checkpoint(load_checkpoint(dir.path / "c.bin")) == bytes);
    CHECK_THROWS_AS(load_checkpoint(dir.path / "missing.bin"), InputError);
  }

  TEST_CASE("checkpoint corruption is detected") {
    const std::string bytes = encode_checkpoint(sample_checkpoint());
    std::string magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(magic), InputError);
    std::string version = bytes;
    version[8] = 9;
    CHECK_THROWS_AS(decode_checkpoint(version), InputError);
    for (std::size_t pos : {std::size_t{20}, bytes.size() / 2, bytes.size() - 5}) {
      std::string flipped = bytes;
      flipped[pos] ^= 0x10;
      CHECK_THROWS_AS(decode_checkpoint(flipped), InputError);
    }
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), InputError);
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, 30)), InputError);
    CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), InputError);
  }

  TEST_CASE("metrics csv") {
    TempDir dir("metrics");
    const auto path = dir.path / "metrics.csv";
    StepMetrics m{3, 1e-4, {}};
    m.report.total = 1.0 / 3.0;
    {
      MetricsWriter w(path);
      w.write(m);
    }
    {
      MetricsWriter w(path, true);
      m.step = 4;
      w.write(m);
    }
    std::istringstream lines(slurp(path));
    std::string header, r1, r2, extra;
    std::getline(lines, header);
    std::getline(lines, r1);
    std::getline(lines, r2);
    CHECK(header == "step,lr,total,recon,equiv,mult,commutator,orth");
    CHECK(r1.rfind("3,", 0) == 0);
    CHECK(r2.rfind("4,", 0) == 0);
    CHECK(!std::getline(lines, extra));
    CHECK(std::count(r1.begin(), r1.end(), ',') == 7);
    const std::string total = r1.substr(r1.find(',', 2) + 1);
    CHECK(std::stod(total.substr(0, total.find(','))) == 1.0 / 3.0);
  }

  TEST_CASE("eval report json") {
    EvalReport r{12.5, 0.01, 1e-9, 7, 0.4, 0.1, 64, 1e-2, 0.5};
    const std::string text = eval_report_to_json(r);
    const EvalReport back = eval_report_from_json(text);
    CHECK(back.equivariance_error_pct == r.equivariance_error_pct);
    CHECK(back.distinct_eigenvalues == 7);
    CHECK(back.pairs == 64);
    CHECK(back.block_tolerance == 0.5);
    const json schema = json::parse(eval_report_schema());
    for (const auto& key : schema["required"]) CHECK(json::parse(text).contains(key.get<std::string>()));
  }

  TEST_CASE("exports") {
    TempDir dir("export");
    std::mt19937_64 rng(72);
    const OperatorSnapshot op = realize_values(SpectralOperatorParams(16, 5, OperatorInit{}, rng));

    const ExportedImage omega = export_operator(dir.path, op);
    const Image om = read_image(omega.image);
    CHECK(om.height == 16);
    CHECK(om.width == 16);
    CHECK(json::parse(slurp(omega.sidecar))["normalization"] == "minmax");

    const ExportedImage atlas = export_eigenfunction_atlas(dir.path, op, 4, 4);
    const json side = json::parse(slurp(atlas.sidecar));
    CHECK(side["tile_count"] == 5);
    CHECK(side["tiles"].size() == 5);
    const Image at = read_image(atlas.image);
    CHECK(at.width == 3 * 4);
    CHECK(at.height == 2 * 4);
    double prev = -1.0;
    for (const auto& t : side["tiles"]) {
      CHECK(t["eigenvalue"].get<double>() >= prev);
      prev = t["eigenvalue"].get<double>();
    }
    CHECK_THROWS_AS(export_eigenfunction_atlas(dir.path, op, 3, 4), DimensionError);

    const ExportedImage tau = export_tau(dir.path, Tensor::identity(5), op.eigvals, 1e-2);
    const json ts = json::parse(slurp(tau.sidecar));
    CHECK(ts["off_diagonal_fraction"] == 0.0);
    const Image ti = read_image(tau.image);
    CHECK(ti.at(0, 0, 0) == doctest::Approx(1.0));
    CHECK(ti.at(0, 1, 0) == doctest::Approx(128.0 / 255.0));

    const ExportedImage mass = export_mass_deviation(dir.path, op, 4, 4);
    const Image mi = read_image(mass.image);
    CHECK(mi.channels == 3);
    std::ifstream csv(mass.csv);
    std::string line;
    std::size_t rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 4);
  }
}
