// Acceptance suite: one PASS/FAIL line per criterion. Usage:
//   niso_acceptance <work-dir> [criterion numbers...]

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "niso/gradcheck.hpp"
#include "niso/isometry_solver.hpp"
#include "niso/linalg.hpp"
#include "niso/losses.hpp"
#include "niso/spectral_operator.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace niso;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Runs a CLI command in-process with its stdout captured; stderr passes through.
std::pair<int, std::string> cli(std::vector<std::string> args) {
  args.insert(args.begin(), "niso");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out;
  auto* old = std::cout.rdbuf(out.rdbuf());
  const int code = cli::run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old);
  return {code, out.str()};
}

Tensor gram_minus_identity(const Tensor& q) {
  Tensor g = matmul_plain(q.transposed(), q);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return g;
}

std::vector<double> metric_column(const fs::path& csv, const std::string& name) {
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  std::size_t col = 0;
  {
    std::istringstream header(line);
    std::string cell;
    for (std::size_t i = 0; std::getline(header, cell, ','); ++i)
      if (cell == name) col = i;
  }
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string cell;
    for (std::size_t i = 0; std::getline(row, cell, ','); ++i)
      if (i == col) out.push_back(std::stod(cell));
  }
  return out;
}

double window_mean(const std::vector<double>& v, std::size_t start, std::size_t len) {
  double s = 0.0;
  for (std::size_t i = start; i < start + len; ++i) s += v[i];
  return s / static_cast<double>(len);
}

// --- criteria ----------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  const GradcheckOptions opt;
  const auto entries = run_gradcheck(opt);
  const GradcheckEntry* worst = &entries.front();
  bool ok = true;
  for (const auto& e : entries) {
    ok = ok && e.passed && e.max_rel_error <= 1e-4;
    if (e.max_rel_error > worst->max_rel_error) worst = &e;
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 60.0;
  return {ok, std::to_string(entries.size()) + " cases, worst " + worst->name + " rel err " +
                  fmt("%.2e", worst->max_rel_error) + " (limit 1e-4), " + fmt("%.1f s", secs)};
}

Outcome solver_orthogonality() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  std::size_t instances = 0;
  for (std::size_t k : {4u, 16u, 64u}) {
    std::uniform_int_distribution<std::size_t> dd(1, 2 * k);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto spec = testing::random_block_spectrum(k, 1 + trial % 5, rng, trial % 3 == 0 ? 0.05 : 1.0);
      const std::size_t d = dd(rng);
      Tape tape;
      const Tensor tau = estimate_map(tape.constant(testing::random_matrix(k, d, rng)),
                                      tape.constant(testing::random_matrix(k, d, rng)),
                                      eigenvalue_mask(tape.constant(spec.eigvals), MaskMode::fuzzy))
                             .tau.value();
      worst = std::max(worst, frobenius(gram_minus_identity(tau)));
      ++instances;
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && secs < 60.0, std::to_string(instances) + " instances (k = 4, 16, 64), max ||tau^T tau - I||_F " +
                                            fmt("%.2e", worst) + " (limit 1e-6), " + fmt("%.1f s", secs)};
}

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2025);
  double worst = 0.0;
  std::set<std::size_t> sizes;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 5 + static_cast<std::size_t>(trial % 28);
    const auto spec = testing::random_block_spectrum(k, 5, rng);
    for (const auto& b : spec.blocks) sizes.insert(b.size());
    // d ≥ the largest block keeps every block solve unique.
    const std::size_t d = 5 + static_cast<std::size_t>(trial % 40);
    const Tensor ca = testing::random_matrix(k, d, rng), cb = testing::random_matrix(k, d, rng);
    Tape tape;
    const Tensor tau =
        estimate_map(tape.constant(ca), tape.constant(cb), eigenvalue_mask(tape.constant(spec.eigvals), MaskMode::hard))
            .tau.value();
    worst = std::max(worst, max_abs_diff(tau, exact_block_solve(ca, cb, spec.eigvals, 1e-6)));
  }
  const double secs = seconds_since(t0);
  const bool all_sizes = sizes == std::set<std::size_t>{1, 2, 3, 4, 5};
  return {worst <= 1e-8 && all_sizes && secs < 60.0,
          "1000 instances, block sizes " + std::to_string(*sizes.begin()) + "-" + std::to_string(*sizes.rbegin()) +
              ", max |estimate - exact| " + fmt("%.2e", worst) + " (limit 1e-8), " + fmt("%.1f s", secs)};
}

Outcome isometry_identity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2026);
  double worst_iso = 0.0, worst_comm = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 4 + static_cast<std::size_t>(trial % 13);
    const auto spec = testing::random_block_spectrum(n, 4, rng);
    Tensor root = spec.eigvals;
    for (double& x : root.storage()) x = std::sqrt(x);
    const OperatorSnapshot op = realize_values(SpectralOperatorParams(testing::random_matrix(n, 1, rng).reshaped({n}),
                                                                      testing::random_matrix(n, n, rng), root));
    const Tensor tau = spatial_map(testing::random_block_orthogonal(n, spec.blocks, rng), op);
    Tensor m({n, n});
    for (std::size_t i = 0; i < n; ++i) m(i, i) = op.mass[i];
    worst_iso = std::max(worst_iso, max_abs_diff(matmul_plain(matmul_plain(tau.transposed(), m), tau), m));
    const Tensor omega = operator_matrix(op);
    Tensor comm = matmul_plain(tau, omega);
    const Tensor right = matmul_plain(omega, tau);
    for (std::size_t i = 0; i < comm.size(); ++i) comm[i] -= right[i];
    worst_comm = std::max(worst_comm, frobenius(comm) / frobenius(omega));
  }
  const double secs = seconds_since(t0);
  return {worst_iso <= 1e-5 && worst_comm <= 1e-5 && secs < 60.0,
          "200 realizations, max |tau^T M tau - M| " + fmt("%.2e", worst_iso) + ", max ||tau Omega - Omega tau||/||Omega|| " +
              fmt("%.2e", worst_comm) + " (limits 1e-5), " + fmt("%.2f s", secs)};
}

Outcome multiplicity_closed_form() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::size_t k : {2u, 4u, 8u}) {
    Tape tape;
    const double lm = multiplicity_loss(eigenvalue_mask(tape.constant(Tensor(Shape{k}, 1.7)), MaskMode::fuzzy)).item();
    worst = std::max(worst, std::abs(lm - static_cast<double>(k) * std::sqrt(static_cast<double>(k - 1))));
  }
  Tape tape;
  const double distinct =
      multiplicity_loss(eigenvalue_mask(tape.constant(Tensor::vector({0.5, 1.5, 2.5, 7.0})), MaskMode::hard)).item();
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && distinct == 0.0 && secs < 1.0,
          "max |L_M - k sqrt(k-1)| " + fmt("%.2e", worst) + " for k = 2, 4, 8; hard distinct L_M = " +
              fmt("%g", distinct) + ", " + fmt("%.3f s", secs)};
}

Outcome dropout_statistics() {
  const auto t0 = Clock::now();
  constexpr std::size_t k = 32, draws = 100000;
  std::mt19937_64 rng(2027);
  std::vector<double> counts(k - 1, 0.0);
  std::size_t triggered = 0, out_of_range = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const DropoutDraw d = sample_spectral_dropout(k, rng);
    if (!d.triggered()) continue;
    ++triggered;
    if (d.keep_rows < 1 || d.keep_rows > k - 1) {
      ++out_of_range;
      continue;
    }
    counts[d.keep_rows - 1] += 1.0;
  }
  const double rate = static_cast<double>(triggered) / draws;
  const double expected = static_cast<double>(triggered) / (k - 1);
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(k - 2.0), chi2));
  const double secs = seconds_since(t0);
  return {std::abs(rate - 0.5) <= 0.01 && p > 0.01 && out_of_range == 0 && secs < 10.0,
          "1e5 draws at k = 32: trigger rate " + fmt("%.4f", rate) + ", chi2 " + fmt("%.1f", chi2) + " (31 bins) p = " +
              fmt("%.3f", p) + ", " + fmt("%.2f s", secs)};
}

// --- training runs -------------------------------------------------------------

struct RunResult {
  fs::path dir;
  json eval;
  double seconds = 0.0;
  bool ok = false;
  std::string error;
};

std::string final_checkpoint(const fs::path& dir) {
  return (dir / json::parse(slurp(dir / "summary.json"))["final_checkpoint"].get<std::string>()).string();
}

RunResult train_and_eval(const fs::path& config, const fs::path& dir) {
  RunResult r{dir, {}, 0.0, false, ""};
  fs::remove_all(dir);
  const auto t0 = Clock::now();
  const auto [code, out] = cli({"train", "--config", config.string(), "--out", dir.string()});
  r.seconds = seconds_since(t0);
  if (code != 0) {
    r.error = "train exited " + std::to_string(code);
    return r;
  }
  const auto [ecode, eout] = cli({"eval", "--ckpt", final_checkpoint(dir), "--out", dir.string()});
  if (ecode != 0) {
    r.error = "eval exited " + std::to_string(ecode);
    return r;
  }
  r.eval = json::parse(slurp(dir / "eval.json"));
  r.ok = true;
  return r;
}

struct TorusRuns {
  RunResult main, repeat, ablation;
  json baseline;
};

fs::path write_variant(const fs::path& base, const fs::path& out, const std::function<void(json&)>& edit) {
  json j = json::parse(slurp(base));
  edit(j);
  std::ofstream(out) << j.dump(2) << "\n";
  return out;
}

class Suite {
 public:
  Suite(fs::path work, fs::path configs) : work_(std::move(work)), configs_(std::move(configs)) {
    fs::create_directories(work_);
  }

  TorusRuns& torus() {
    if (torus_) return *torus_;
    torus_.emplace();
    const fs::path cfg = configs_ / "torus.json";
    const fs::path ablation = write_variant(cfg, work_ / "torus_beta0.json", [](json& j) { j["beta"] = 0.0; });
    std::cerr << "[acceptance] torus run (beta = 0.1)\n";
    torus_->main = train_and_eval(cfg, work_ / "torus");
    std::cerr << "[acceptance] torus repeat run\n";
    torus_->repeat = train_and_eval(cfg, work_ / "torus_repeat");
    std::cerr << "[acceptance] torus ablation run (beta = 0)\n";
    torus_->ablation = train_and_eval(ablation, work_ / "torus_beta0");
    const auto [code, out] = cli({"eval", "--config", cfg.string(), "--out", (work_ / "torus_init.json").string()});
    if (code == 0) torus_->baseline = json::parse(out);
    return *torus_;
  }

  Outcome torus_experiment() {
    TorusRuns& t = torus();
    if (!t.main.ok || !t.ablation.ok || t.baseline.is_null())
      return {false, "run failed: " + t.main.error + t.ablation.error};
    const double err = t.main.eval["equivariance_error_pct"];
    const double off = t.main.eval["off_diagonal_fraction"], base = t.baseline["off_diagonal_fraction"];
    const std::size_t distinct = t.main.eval["distinct_eigenvalues"], ablated = t.ablation.eval["distinct_eigenvalues"];
    const bool err_ok = err <= 10.0, off_ok = off <= 0.5 * base, distinct_ok = distinct > ablated,
               time_ok = t.main.seconds <= 1800.0;
    return {err_ok && off_ok && distinct_ok && time_ok,
            std::string("held-out error ") + fmt("%.4g%%", err) + (err_ok ? " ok" : " FAIL") + " (limit 10%); off-diagonal " +
                fmt("%.3f", off) + " vs untrained " + fmt("%.3f", base) + ", ratio " + fmt("%.2f", off / base) +
                (off_ok ? " ok" : " FAIL") + " (limit 0.50); distinct eigenvalues " + std::to_string(distinct) + " vs " +
                std::to_string(ablated) + " at beta = 0" + (distinct_ok ? " ok" : " FAIL") + "; " +
                fmt("%.0f s", t.main.seconds)};
  }

  Outcome ablation_direction() {
    TorusRuns& t = torus();
    if (!t.main.ok || !t.ablation.ok) return {false, "run failed"};
    const double err = t.main.eval["equivariance_error_pct"], err0 = t.ablation.eval["equivariance_error_pct"];
    const std::size_t distinct = t.main.eval["distinct_eigenvalues"], ablated = t.ablation.eval["distinct_eigenvalues"];
    return {err0 >= err && ablated < distinct,
            "beta = 0: error " + fmt("%.4g%%", err0) + " vs " + fmt("%.4g%%", err) + " (must be no better), distinct " +
                std::to_string(ablated) + " vs " + std::to_string(distinct) + " (must be fewer)"};
  }

  Outcome determinism() {
    TorusRuns& t = torus();
    if (!t.main.ok || !t.repeat.ok) return {false, "run failed"};
    const std::string a = slurp(t.main.dir / "metrics.csv"), b = slurp(t.repeat.dir / "metrics.csv");
    const auto rows = std::count(a.begin(), a.end(), '\n');
    return {!a.empty() && a == b, "metrics.csv " + std::string(a == b ? "identical" : "differs") + " (" +
                                      std::to_string(a.size()) + " bytes, " + std::to_string(rows) + " lines)"};
  }

  Outcome sphere_run() {
    const fs::path cfg = configs_ / "sphere.json";
    std::cerr << "[acceptance] sphere run\n";
    const RunResult r = train_and_eval(cfg, work_ / "sphere");
    if (!r.ok) return {false, "run failed: " + r.error};
    const auto totals = metric_column(r.dir / "metrics.csv", "total");
    if (totals.size() < 200) return {false, "too few metric rows"};
    const double first = window_mean(totals, 0, 100), last = window_mean(totals, totals.size() - 100, 100);

    const auto init = cli({"export", "--config", cfg.string(), "--out", (work_ / "sphere_export_init").string()});
    const auto trained =
        cli({"export", "--ckpt", final_checkpoint(r.dir), "--out", (work_ / "sphere_export").string()});
    if (init.first != 0 || trained.first != 0) return {false, "export failed"};
    const double block0 = json::parse(slurp(work_ / "sphere_export_init" / "tau.json"))["off_block_fraction"];
    const double block1 = json::parse(slurp(work_ / "sphere_export" / "tau.json"))["off_block_fraction"];
    return {last < first && block1 < block0,
            "smoothed loss " + fmt("%.3f", first) + " -> " + fmt("%.3f", last) + " (first vs last 100 steps); exported tau off-block " +
                fmt("%.3f", block0) + " -> " + fmt("%.3f", block1) + "; held-out error " +
                fmt("%.4g%%", r.eval["equivariance_error_pct"].get<double>()) + "; " + fmt("%.0f s", r.seconds)};
  }

 private:
  fs::path work_, configs_;
  std::optional<TorusRuns> torus_;
};

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_runs";
  std::set<int> wanted;
  for (int i = 2; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  Suite suite(work, NISO_CONFIG_DIR);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"solver orthogonality", solver_orthogonality},
      {"oracle equivalence", oracle_equivalence},
      {"isometry identity", isometry_identity},
      {"multiplicity loss closed form", multiplicity_closed_form},
      {"desk-scale torus experiment", [&] { return suite.torus_experiment(); }},
      {"ablation direction", [&] { return suite.ablation_direction(); }},
      {"spherical run", [&] { return suite.sphere_run(); }},
      {"determinism", [&] { return suite.determinism(); }},
      {"spectral dropout statistics", dropout_statistics},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
