#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "niso/checkpoint.hpp"
#include "niso/config.hpp"
#include "niso/error.hpp"
#include "niso/export.hpp"
#include "niso/gradcheck.hpp"
#include "niso/image_io.hpp"
#include "niso/parallel.hpp"
#include "niso/run_io.hpp"

namespace niso::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string ckpt;
  std::optional<std::uint64_t> seed;
  std::size_t count = 4;
  std::string fault_op;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::string checkpoint_name(std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt-%08zu.bin", step);
  return buf;
}

TrainConfig apply_seed(TrainConfig c, const Options& o) {
  if (o.seed) {
    c.seed = *o.seed;
    c.data.seed = *o.seed;
  }
  return c;
}

/// Config from --config, else the one embedded in --ckpt.
TrainConfig resolve_config(const Options& o, const std::optional<Checkpoint>& ckpt) {
  if (!o.config.empty()) return apply_seed(load_config(o.config), o);
  if (ckpt && !ckpt->config_json.empty()) return apply_seed(parse_config(ckpt->config_json), o);
  throw ConfigError("--config is required (the checkpoint carries no configuration)");
}

std::optional<Checkpoint> maybe_checkpoint(const Options& o) {
  if (o.ckpt.empty()) return std::nullopt;
  return load_checkpoint(o.ckpt);
}

SpectralOperatorParams operator_for(const TrainConfig& config, const std::optional<Checkpoint>& ckpt) {
  if (ckpt) return ckpt->params;
  return Trainer(config).params();
}

int cmd_train(const Options& o) {
  if (o.config.empty() && o.ckpt.empty()) throw ConfigError("train needs --config");
  if (o.out.empty()) throw ConfigError("train needs --out");
  const std::optional<Checkpoint> resume = maybe_checkpoint(o);
  const TrainConfig config = resolve_config(o, resume);
  const fs::path out = o.out;
  fs::create_directories(out);

  std::optional<Trainer> trainer;
  if (resume) {
    trainer.emplace(config, resume->params, resume->optimizer, static_cast<std::size_t>(resume->step));
  } else {
    trainer.emplace(config);
  }

  const std::string started = utc_now();
  const json manifest = {
      {"version", NISO_VERSION},
      {"seed", config.seed},
      {"start_time", started},
      {"resumed_from", o.ckpt.empty() ? json(nullptr) : json(o.ckpt)},
      {"start_step", trainer->current_step()},
      {"config", json::parse(config_to_json(config))},
      {"outputs",
       {{"metrics", "metrics.csv"}, {"checkpoints", "ckpt-<step>.bin"}, {"summary", "summary.json"}}},
  };
  write_json(out / "manifest.json", manifest);

  MetricsWriter metrics(out / "metrics.csv", resume.has_value());
  const std::string config_text = config_to_json(config);
  fs::path last_ckpt;
  auto save = [&](const Trainer& t) {
    last_ckpt = out / checkpoint_name(t.current_step());
    save_checkpoint(last_ckpt, Checkpoint{t.current_step(), t.params(), t.optimizer_state(), config_text});
  };
  TrainHooks hooks;
  hooks.on_step = [&](const StepMetrics& m) { metrics.write(m); };
  hooks.on_checkpoint = [&](const Trainer& t) {
    metrics.flush();
    save(t);
  };
  try {
    train(*trainer, hooks);
  } catch (const NumericalError& e) {
    metrics.flush();
    std::cerr << "niso train: aborted: " << e.what() << "\n";
    if (!last_ckpt.empty()) std::cerr << "last checkpoint: " << last_ckpt.string() << "\n";
    return kExitRuntime;
  }
  metrics.flush();
  write_json(out / "summary.json", {{"start_time", started},
                                    {"end_time", utc_now()},
                                    {"steps", trainer->current_step()},
                                    {"final_checkpoint", last_ckpt.filename().string()}});
  std::cout << "trained " << trainer->current_step() << " steps; checkpoint " << last_ckpt.string() << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o) {
  const std::optional<Checkpoint> ckpt = maybe_checkpoint(o);
  const TrainConfig config = resolve_config(o, ckpt);
  const SpectralOperatorParams params = operator_for(config, ckpt);
  if (params.n() != config.n() || params.k() != config.k) {
    throw ConfigError("checkpoint operator shape does not match the configuration");
  }
  const PairSource source(config.data);
  const auto pairs = held_out_pairs(source, config.eval_pairs);
  const EvalReport report =
      evaluate(realize_values(params), pairs, config.distinct_tolerance, config.block_tolerance);
  const std::string text = eval_report_to_json(report);
  std::cout << text << "\n";
  if (!o.out.empty()) {
    fs::path path = o.out;
    if (fs::is_directory(path) || path.extension() != ".json") {
      fs::create_directories(path);
      path /= "eval.json";
    }
    write_file_atomic(path, text + "\n");
  }
  return kExitOk;
}

int cmd_export(const Options& o) {
  if (o.out.empty()) throw ConfigError("export needs --out");
  const std::optional<Checkpoint> ckpt = maybe_checkpoint(o);
  const TrainConfig config = resolve_config(o, ckpt);
  const SpectralOperatorParams params = operator_for(config, ckpt);
  const OperatorSnapshot op = realize_values(params);
  const fs::path out = o.out;
  const std::size_t h = config.data.height, w = config.data.width;

  export_operator(out, op);
  export_eigenfunction_atlas(out, op, h, w);
  export_mass_deviation(out, op, h, w);

  const PairSource source(config.data);
  const ObservationTuple pair = source.tuple(kEvalStream, 0);
  Tape tape;
  const Var a = tape.constant(project(pair.frames[0].as_matrix(), op));
  const Var b = tape.constant(project(pair.frames[1].as_matrix(), op));
  const IsometricMap map = estimate_map(a, b, eigenvalue_mask(tape.constant(op.eigvals), MaskMode::fuzzy));
  export_tau(out, map.tau.value(), op.eigvals, config.block_tolerance);
  std::cout << "off_diagonal_fraction " << off_diagonal_fraction(map.tau.value()) << "\n";
  std::cout << "exported to " << out.string() << "\n";
  return kExitOk;
}

int cmd_gradcheck(const Options& o) {
  GradcheckOptions opt;
  if (o.seed) opt.seed = *o.seed;
  opt.fault_op = o.fault_op;
  const auto entries = run_gradcheck(opt);
  const GradcheckEntry* worst = nullptr;
  json report = json::array();
  for (const auto& e : entries) {
    char line[96];
    std::snprintf(line, sizeof line, "%-26s %.3e %s", e.name.c_str(), e.max_rel_error, e.passed ? "ok" : "FAIL");
    std::cout << line << "\n";
    report.push_back({{"name", e.name}, {"max_rel_error", e.max_rel_error}, {"passed", e.passed}});
    if (!e.passed && (!worst || e.max_rel_error > worst->max_rel_error)) worst = &e;
  }
  if (!o.out.empty()) write_json(o.out, {{"tolerance", opt.tolerance}, {"step", opt.step}, {"cases", report}});
  if (worst) {
    char line[160];
    std::snprintf(line, sizeof line, "gradcheck failed: worst offender %s (%.3e > %.0e)", worst->name.c_str(),
                  worst->max_rel_error, opt.tolerance);
    std::cerr << line << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_gen_data(const Options& o) {
  if (o.config.empty()) throw ConfigError("gen-data needs --config");
  if (o.out.empty()) throw ConfigError("gen-data needs --out");
  const TrainConfig config = apply_seed(load_config(o.config), o);
  const PairSource source(config.data);
  const fs::path out = o.out;
  for (std::size_t i = 0; i < o.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "pair-%04zu", i);
    const fs::path dir = out / name;
    fs::create_directories(dir);
    const ObservationTuple t = source.tuple(kTrainStream, i);
    json frames = json::array();
    for (std::size_t f = 0; f < t.frames.size(); ++f) {
      const Observation& obs = t.frames[f];
      const std::string stem = "frame-" + std::to_string(f);
      // First channel as an image; every channel in the CSV.
      Tensor img({obs.height(), obs.width()});
      double lo = obs.values[0], hi = obs.values[0];
      for (std::size_t p = 0; p < img.size(); ++p) {
        const double v = obs.values[p * obs.channels()];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      const double range = hi > lo ? hi - lo : 1.0;
      for (std::size_t p = 0; p < img.size(); ++p) img[p] = (obs.values[p * obs.channels()] - lo) / range;
      write_pgm(dir / (stem + ".pgm"), img);
      const Tensor m = obs.as_matrix();
      std::string csv;
      char buf[32];
      for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
          std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
          if (c) csv += ',';
          csv += buf;
        }
        csv += '\n';
      }
      write_file_atomic(dir / (stem + ".csv"), csv);
      const auto& q = obs.meta.rotation;
      frames.push_back({{"image", stem + ".pgm"},
                        {"csv", stem + ".csv"},
                        {"image_channel", 0},
                        {"normalization", "minmax"},
                        {"min", lo},
                        {"max", hi},
                        {"shift", {obs.meta.shift[0], obs.meta.shift[1]}},
                        {"rotation", {q.w, q.x, q.y, q.z}}});
    }
    write_json(dir / "meta.json", {{"domain", to_string(config.data.domain)},
                                   {"index", i},
                                   {"seed", config.seed},
                                   {"height", config.data.height},
                                   {"width", config.data.width},
                                   {"channels", config.data.channels},
                                   {"frames", frames}});
  }
  std::cout << "wrote " << o.count << " tuples to " << out.string() << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Neural isometry operator learning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", NISO_VERSION);
  Options o;

  auto add_seed = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { o.seed = s; },
                                            "Override the configured seed");
  };

  auto* train = app.add_subcommand("train", "Train an operator");
  train->add_option("--config", o.config, "Configuration JSON");
  train->add_option("--out", o.out, "Run directory");
  train->add_option("--ckpt", o.ckpt, "Resume from this checkpoint");
  add_seed(train);

  auto* eval = app.add_subcommand("eval", "Held-out equivariance report");
  eval->add_option("--config", o.config, "Configuration JSON (default: the one stored in the checkpoint)");
  eval->add_option("--ckpt", o.ckpt, "Checkpoint (default: untrained initialization)");
  eval->add_option("--out", o.out, "Report path or directory");
  add_seed(eval);

  auto* exp = app.add_subcommand("export", "Write operator, eigenfunction, map and mass images");
  exp->add_option("--config", o.config, "Configuration JSON (default: the one stored in the checkpoint)");
  exp->add_option("--ckpt", o.ckpt, "Checkpoint (default: untrained initialization)");
  exp->add_option("--out", o.out, "Output directory");
  add_seed(exp);

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  grad->add_option("--out", o.out, "Write a JSON report here");
  grad->add_option("--inject-fault", o.fault_op, "Scale the backward rule of this op (negative control)")
      ->group("");
  add_seed(grad);

  auto* gen = app.add_subcommand("gen-data", "Write sample observation tuples");
  gen->add_option("--config", o.config, "Configuration JSON");
  gen->add_option("--out", o.out, "Output directory");
  gen->add_option("--count", o.count, "Number of tuples")->check(CLI::PositiveNumber);
  add_seed(gen);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*exp) return cmd_export(o);
    if (*grad) return cmd_gradcheck(o);
    if (*gen) return cmd_gen_data(o);
  } catch (const ConfigError& e) {
    std::cerr << "niso: invalid configuration: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "niso: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace niso::cli
