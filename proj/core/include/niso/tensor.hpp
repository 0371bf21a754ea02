#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace niso {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Dense row-major array of 64-bit floats.
///
/// A rank-0 tensor (empty shape) holds a single scalar. `grad` is only
/// populated for tensors that take part in differentiation as leaves.
class Tensor {
 public:
  Tensor() : Tensor(Shape{}) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }
  static Tensor identity(std::size_t n);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool is_scalar() const noexcept { return data_.size() == 1; }

  /// Leading extent; 1 for scalars.
  std::size_t rows() const noexcept { return shape_.empty() ? 1 : shape_[0]; }
  /// Product of trailing extents; 1 for vectors and scalars.
  std::size_t cols() const noexcept;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  double item() const;
  Tensor reshaped(Shape shape) const;
  Tensor transposed() const;

  bool requires_grad = false;
  /// Accumulated gradient, same length as data when present.
  std::vector<double> grad;

  bool has_grad() const noexcept { return !grad.empty(); }
  void zero_grad();

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Named trainable leaf.
struct Parameter {
  std::string name;
  Tensor tensor;
};

/// Ordered collection of uniquely named parameters. Element addresses are
/// stable once the set is built, so tapes may hold pointers into it.
class ParameterSet {
 public:
  Parameter& add(std::string name, Tensor value);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::size_t size() const noexcept { return params_.size(); }
  auto begin() noexcept { return params_.begin(); }
  auto end() noexcept { return params_.end(); }
  auto begin() const noexcept { return params_.begin(); }
  auto end() const noexcept { return params_.end(); }

  void zero_grad();

 private:
  std::vector<Parameter> params_;
};

// Plain (non-differentiable) dense helpers used by oracles, diagnostics and
// forward-only code paths.
Tensor matmul_plain(const Tensor& a, const Tensor& b);
double frobenius(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
/// ||aᵀa - I||_F for a column-orthonormal candidate.
double orthogonality_residual(const Tensor& a);

}  // namespace niso
