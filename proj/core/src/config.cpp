#include "niso/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "niso/error.hpp"

namespace niso {

using nlohmann::json;

namespace {

class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(where() + "expected an object");
  }

  void check_unknown() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) throw ConfigError(field(key) + ": unknown key");
    }
  }

  template <class Fn>
  void with(const std::string& key, Fn&& fn) {
    seen_.insert(key);
    auto it = node_.find(key);
    if (it != node_.end()) fn(*it, field(key));
  }

  void get(const std::string& key, std::size_t& out) {
    with(key, [&](const json& v, const std::string& f) {
      if (!v.is_number_unsigned()) throw ConfigError(f + ": expected a non-negative integer");
      out = v.get<std::size_t>();
    });
  }
  void get(const std::string& key, std::uint64_t& out, int) {
    with(key, [&](const json& v, const std::string& f) {
      if (!v.is_number_unsigned()) throw ConfigError(f + ": expected a non-negative integer");
      out = v.get<std::uint64_t>();
    });
  }
  void get(const std::string& key, double& out) {
    with(key, [&](const json& v, const std::string& f) {
      if (!v.is_number()) throw ConfigError(f + ": expected a number");
      out = v.get<double>();
    });
  }
  void get(const std::string& key, bool& out) {
    with(key, [&](const json& v, const std::string& f) {
      if (!v.is_boolean()) throw ConfigError(f + ": expected true or false");
      out = v.get<bool>();
    });
  }
  void get(const std::string& key, std::string& out) {
    with(key, [&](const json& v, const std::string& f) {
      if (!v.is_string()) throw ConfigError(f + ": expected a string");
      out = v.get<std::string>();
    });
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "" : path_ + ": "; }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class T, class Parse>
void get_enum(Reader& r, const std::string& key, T& out, Parse&& parse) {
  std::string s;
  bool present = false;
  r.with(key, [&](const json& v, const std::string& f) {
    if (!v.is_string()) throw ConfigError(f + ": expected a string");
    s = v.get<std::string>();
    present = true;
  });
  if (!present) return;
  try {
    out = parse(s);
  } catch (const Error&) {
    throw ConfigError(r.field(key) + ": unrecognized value '" + s + "'");
  }
}

Regime parse_regime(const std::string& s) {
  if (s == "pairwise") return Regime::pairwise;
  if (s == "triplet") return Regime::triplet;
  throw ConfigError("unknown regime");
}

BasisInit parse_basis(const std::string& s) {
  if (s == "random") return BasisInit::random;
  if (s == "identity") return BasisInit::identity;
  throw ConfigError("unknown basis init");
}

SourceKind parse_source(const std::string& s) {
  if (s == "synthetic") return SourceKind::synthetic;
  if (s == "image_dir") return SourceKind::image_dir;
  throw ConfigError("unknown source");
}

const char* to_string(BasisInit b) { return b == BasisInit::random ? "random" : "identity"; }
const char* to_string(SourceKind s) { return s == SourceKind::synthetic ? "synthetic" : "image_dir"; }

void read_data(const json& node, PairSpec& d) {
  Reader r(node, "data");
  get_enum(r, "domain", d.domain, [](const std::string& s) { return parse_domain(s); });
  r.get("triple", d.triple);
  get_enum(r, "source", d.source, parse_source);
  std::string dir = d.image_dir.string();
  r.get("image_dir", dir);
  d.image_dir = dir;
  r.get("image_count", d.image_count);
  r.get("height", d.height);
  r.get("width", d.width);
  r.get("channels", d.channels);
  r.get("cutoff", d.cutoff);
  r.check_unknown();
  if (d.source == SourceKind::image_dir) {
    if (d.image_dir.empty()) throw ConfigError("data.image_dir: required when data.source is image_dir");
    if (d.image_count == 0) throw ConfigError("data.image_count: must be positive");
    d.channels = 3 * d.image_count;
  }
}

void read_init(const json& node, OperatorInit& init) {
  Reader r(node, "init");
  get_enum(r, "basis", init.basis, parse_basis);
  r.get("eigval_scale", init.eigval_scale);
  r.check_unknown();
  if (!(init.eigval_scale >= 0.0)) throw ConfigError("init.eigval_scale: must be non-negative");
}

}  // namespace

std::string to_string(Regime r) { return r == Regime::pairwise ? "pairwise" : "triplet"; }

TrainConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  TrainConfig c;
  Reader r(root, "");
  r.get("steps", c.steps);
  r.get("batch_size", c.batch_size);
  r.get("lr_peak", c.lr_peak);
  r.get("lr_final", c.lr_final);
  r.get("warmup_steps", c.warmup_steps);
  r.get("weight_decay", c.weight_decay);
  r.get("alpha", c.weights.alpha);
  r.get("beta", c.weights.beta);
  get_enum(r, "regime", c.regime, parse_regime);
  r.get("spectral_dropout", c.spectral_dropout);
  r.get("seed", c.seed, 0);
  r.get("k", c.k);
  r.get("checkpoint_every", c.checkpoint_every);
  r.get("eval_pairs", c.eval_pairs);
  r.get("distinct_tolerance", c.distinct_tolerance);
  r.get("block_tolerance", c.block_tolerance);
  r.with("init", [&](const json& v, const std::string&) { read_init(v, c.init); });
  r.with("data", [&](const json& v, const std::string&) { read_data(v, c.data); });
  r.check_unknown();
  if (!(c.distinct_tolerance > 0.0)) throw ConfigError("distinct_tolerance: must be positive");
  if (!(c.block_tolerance > 0.0)) throw ConfigError("block_tolerance: must be positive");
  c.data.seed = c.seed;
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const TrainConfig& c, int indent) {
  json data = {
      {"domain", to_string(c.data.domain)},
      {"triple", c.data.triple},
      {"source", to_string(c.data.source)},
      {"height", c.data.height},
      {"width", c.data.width},
      {"channels", c.data.channels},
      {"cutoff", c.data.cutoff},
  };
  if (c.data.source == SourceKind::image_dir) {
    data["image_dir"] = c.data.image_dir.string();
    data["image_count"] = c.data.image_count;
  }
  json root = {
      {"steps", c.steps},
      {"batch_size", c.batch_size},
      {"lr_peak", c.lr_peak},
      {"lr_final", c.lr_final},
      {"warmup_steps", c.warmup_steps},
      {"weight_decay", c.weight_decay},
      {"alpha", c.weights.alpha},
      {"beta", c.weights.beta},
      {"regime", to_string(c.regime)},
      {"spectral_dropout", c.spectral_dropout},
      {"seed", c.seed},
      {"k", c.k},
      {"checkpoint_every", c.checkpoint_every},
      {"eval_pairs", c.eval_pairs},
      {"distinct_tolerance", c.distinct_tolerance},
      {"block_tolerance", c.block_tolerance},
      {"init", {{"basis", to_string(c.init.basis)}, {"eigval_scale", c.init.eigval_scale}}},
      {"data", data},
  };
  return root.dump(indent);
}

std::string config_schema() {
  const json uint = {{"type", "integer"}, {"minimum", 0}};
  const json num = {{"type", "number"}};
  json data = {
      {"type", "object"},
      {"additionalProperties", false},
      {"properties",
       {{"domain", {{"enum", {"torus", "sphere"}}}},
        {"triple", {{"type", "boolean"}}},
        {"source", {{"enum", {"synthetic", "image_dir"}}}},
        {"image_dir", {{"type", "string"}}},
        {"image_count", uint},
        {"height", uint},
        {"width", uint},
        {"channels", uint},
        {"cutoff", num}}},
  };
  json schema = {
      {"$schema", "https://json-schema.org/draft/2020-12/schema"},
      {"title", "niso training configuration"},
      {"type", "object"},
      {"additionalProperties", false},
      {"properties",
       {{"steps", uint},
        {"batch_size", uint},
        {"lr_peak", num},
        {"lr_final", num},
        {"warmup_steps", uint},
        {"weight_decay", num},
        {"alpha", num},
        {"beta", num},
        {"regime", {{"enum", {"pairwise", "triplet"}}}},
        {"spectral_dropout", {{"type", "boolean"}}},
        {"seed", uint},
        {"k", uint},
        {"checkpoint_every", uint},
        {"eval_pairs", uint},
        {"distinct_tolerance", num},
        {"init",
         {{"type", "object"},
          {"additionalProperties", false},
          {"properties", {{"basis", {{"enum", {"random", "identity"}}}}, {"eigval_scale", num}}}}},
        {"data", data}}},
  };
  return schema.dump(2);
}

}  // namespace niso
