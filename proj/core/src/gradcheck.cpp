#include "niso/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "niso/autodiff.hpp"
#include "niso/data_gen.hpp"
#include "niso/isometry_solver.hpp"
#include "niso/losses.hpp"
#include "niso/spectral_operator.hpp"

namespace niso {

namespace {

using Fn = std::function<Var(Tape&, const std::vector<Var>&)>;

struct Case {
  std::string name;
  std::vector<Tensor> inputs;
  Fn fn;
};

Tensor gaussian(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> nd(0.0, scale);
  for (auto& x : t.data()) x = nd(rng);
  return t;
}

Tensor uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> ud(lo, hi);
  for (auto& x : t.data()) x = ud(rng);
  return t;
}

/// Values bounded away from zero so that |x| and 1/x are smooth at h.
Tensor away_from_zero(Shape shape, std::mt19937_64& rng) {
  Tensor t = uniform(std::move(shape), rng, 0.3, 1.5);
  std::bernoulli_distribution sign(0.5);
  for (auto& x : t.data()) x = sign(rng) ? x : -x;
  return t;
}

/// Strictly increasing values with gaps of at least 0.2.
Tensor spaced(std::size_t n, std::mt19937_64& rng) {
  Tensor t({n});
  std::uniform_real_distribution<double> gap(0.2, 0.8);
  double v = 0.1;
  for (auto& x : t.data()) {
    x = v;
    v += gap(rng);
  }
  return t;
}

/// Scalar objective sum(W ⊙ f(x)) with fixed random weights W.
double objective(const Case& c, std::vector<Tensor>& inputs, const Tensor& weights, bool watch,
                 const GradcheckOptions& opt) {
  Tape tape;
  if (watch && !opt.fault_op.empty()) tape.inject_fault(opt.fault_op, opt.fault_factor);
  std::vector<Var> vars;
  for (auto& t : inputs) vars.push_back(watch ? tape.watch(t) : tape.constant(t));
  const Var out = c.fn(tape, vars);
  const Var loss = out.value().size() == 1 ? scale(out, weights[0]) : sum(mul(out, tape.constant(weights)));
  const double value = loss.item();
  if (watch) tape.backward(loss);
  return value;
}

double check(const Case& c, std::mt19937_64& rng, const GradcheckOptions& opt) {
  std::vector<Tensor> inputs = c.inputs;
  Tensor probe_out;
  {
    Tape tape;
    std::vector<Var> vars;
    for (auto& t : inputs) vars.push_back(tape.constant(t));
    probe_out = c.fn(tape, vars).value();
  }
  const Tensor weights = uniform(probe_out.shape(), rng, 0.5, 1.5);

  for (auto& t : inputs) {
    t.requires_grad = true;
    t.zero_grad();
  }
  objective(c, inputs, weights, true, opt);

  double diff2 = 0.0, an2 = 0.0, fd2 = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<double> analytic = inputs[i].grad;
    if (analytic.empty()) analytic.assign(inputs[i].size(), 0.0);
    std::vector<Tensor> work = c.inputs;
    for (std::size_t j = 0; j < work[i].size(); ++j) {
      const double x0 = work[i][j];
      work[i][j] = x0 + opt.step;
      const double up = objective(c, work, weights, false, opt);
      work[i][j] = x0 - opt.step;
      const double down = objective(c, work, weights, false, opt);
      work[i][j] = x0;
      const double fd = (up - down) / (2.0 * opt.step);
      diff2 += (analytic[j] - fd) * (analytic[j] - fd);
      an2 += analytic[j] * analytic[j];
      fd2 += fd * fd;
    }
  }
  const double denom = std::max({std::sqrt(an2), std::sqrt(fd2), 1e-12});
  return std::sqrt(diff2) / denom;
}

std::vector<Case> build_cases(std::mt19937_64& rng) {
  std::vector<Case> cases;
  auto unary = [&](std::string name, Tensor x, std::function<Var(const Var&)> f) {
    cases.push_back({std::move(name), {std::move(x)}, [f](Tape&, const std::vector<Var>& v) { return f(v[0]); }});
  };
  auto binary = [&](std::string name, Tensor a, Tensor b, std::function<Var(const Var&, const Var&)> f) {
    cases.push_back(
        {std::move(name), {std::move(a), std::move(b)}, [f](Tape&, const std::vector<Var>& v) { return f(v[0], v[1]); }});
  };

  binary("matmul", gaussian({4, 3}, rng), gaussian({3, 5}, rng), matmul);
  unary("transpose", gaussian({3, 4}, rng), transpose);
  unary("reshape", gaussian({3, 4}, rng), [](const Var& a) { return reshape(a, {2, 6}); });
  binary("add", gaussian({3, 4}, rng), gaussian({}, rng), add);
  binary("sub", gaussian({}, rng), gaussian({3, 4}, rng), sub);
  binary("mul", gaussian({3, 4}, rng), gaussian({3, 4}, rng), mul);
  unary("neg", gaussian({3, 4}, rng), neg);
  unary("exp", gaussian({3, 4}, rng), [](const Var& a) { return exp(a); });
  unary("abs", away_from_zero({3, 4}, rng), [](const Var& a) { return abs(a); });
  unary("square", gaussian({3, 4}, rng), square);
  unary("softplus", gaussian({3, 4}, rng, 2.0), softplus);
  unary("sqrt", uniform({3, 4}, rng, 0.2, 2.0), [](const Var& a) { return sqrt(a); });
  unary("reciprocal", away_from_zero({3, 4}, rng), reciprocal);
  unary("scale", gaussian({3, 4}, rng), [](const Var& a) { return scale(a, -1.7); });
  unary("sum", gaussian({3, 4}, rng), sum);
  unary("mean", gaussian({3, 4}, rng), mean);
  unary("frobenius_norm", gaussian({3, 4}, rng), frobenius_norm);
  binary("scale_rows", gaussian({4, 3}, rng), gaussian({4}, rng), scale_rows);
  unary("row_sums", gaussian({4, 3}, rng), row_sums);
  unary("diag", gaussian({4}, rng), diag);
  unary("outer_diff", gaussian({4}, rng), outer_diff);
  unary("procrustes_project", gaussian({5, 5}, rng), procrustes_project);
  unary("procrustes_project_tall", gaussian({7, 4}, rng), procrustes_project);
  unary("procrustes_project_wide", gaussian({3, 6}, rng), procrustes_project);

  // Composite objectives over the operator parameters and a small data set.
  constexpr std::size_t n = 12, k = 5, d = 4;
  const Tensor raw_mass = gaussian({n}, rng, 0.5);
  const Tensor raw_basis = gaussian({n, k}, rng);
  Tensor raw_eig = spaced(k, rng);
  for (auto& x : raw_eig.data()) x = std::sqrt(x);
  const Tensor obs_a = gaussian({n, d}, rng);
  const Tensor obs_b = gaussian({n, d}, rng);
  const Tensor obs_c = gaussian({n, d}, rng);
  const LossWeights weights{0.7, 0.1};

  cases.push_back({"composite_pairwise",
                   {raw_mass, raw_basis, raw_eig},
                   [=](Tape& tape, const std::vector<Var>& v) {
                     const IdentityCodec codec;
                     const RealizedOperator op = realize(v[0], v[1], v[2]);
                     const Var a = tape.constant(obs_a), b = tape.constant(obs_b);
                     const Var ca = project(a, op), cb = project(b, op);
                     const EigenvalueMask mask = eigenvalue_mask(op.eigvals, MaskMode::fuzzy);
                     const IsometricMap tau = estimate_map(ca, cb, mask);
                     const DropoutDraw drop{3};
                     const Var recon = reconstruction_loss(codec, tau, a, b, a, b, op, &drop);
                     return combined_loss(weights, recon, equivariance_loss(tau, ca, cb), multiplicity_loss(mask))
                         .total;
                   }});
  cases.push_back({"composite_triplet",
                   {raw_mass, raw_basis, raw_eig},
                   [=](Tape& tape, const std::vector<Var>& v) {
                     const IdentityCodec codec;
                     const RealizedOperator op = realize(v[0], v[1], v[2]);
                     const std::vector<Var> obs{tape.constant(obs_a), tape.constant(obs_b), tape.constant(obs_c)};
                     std::vector<Var> coeffs;
                     for (const auto& o : obs) coeffs.push_back(project(o, op));
                     const EigenvalueMask mask = eigenvalue_mask(op.eigvals, MaskMode::fuzzy);
                     const IsometricMap tau = estimate_map(coeffs[0], coeffs[1], mask);
                     const IsometricMap sigma = estimate_map(coeffs[1], coeffs[2], mask);
                     const TripletLosses t = triplet_losses(codec, tau, sigma, coeffs, obs, obs, op);
                     return combined_loss(weights, t.reconstruction, t.equivariance, multiplicity_loss(mask)).total;
                   }});
  return cases;
}

}  // namespace

std::vector<GradcheckEntry> run_gradcheck(const GradcheckOptions& options) {
  auto rng = make_rng(options.seed, 0, 0);
  std::vector<Case> cases = build_cases(rng);
  std::vector<GradcheckEntry> out;
  for (const auto& c : cases) {
    GradcheckEntry e;
    e.name = c.name;
    e.max_rel_error = check(c, rng, options);
    e.passed = e.max_rel_error <= options.tolerance;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<std::string> gradcheck_case_names() {
  std::mt19937_64 rng(0);
  std::vector<std::string> names;
  for (const auto& c : build_cases(rng)) names.push_back(c.name);
  return names;
}

}  // namespace niso
