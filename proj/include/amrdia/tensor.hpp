#pragma once

// Dense fp64 tensors with a small reverse-mode tape. Only rank-1 and rank-2
// shapes are used; rank-1 tensors behave as a single row.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace amrdia::num {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backward;  // pushes this->grad into parents' grads

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};
}  // namespace detail

/// Shared handle to a tensor node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }
  /// Row count, treating rank-1 tensors as one row.
  std::size_t rows() const { return rank() == 1 ? 1 : node_->shape[0]; }
  std::size_t cols() const { return node_->shape.back(); }

  std::span<const double> data() const { return node_->data; }
  /// Parameters are the only tensors mutated in place (optimizer, grad checks).
  std::span<double> mutable_data() { return node_->data; }
  double at(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.clear(); }

  /// Value copy with no tape history.
  Tensor detach() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>);

  std::shared_ptr<detail::Node> node_;
};

/// Creates an op output; it joins the tape only if some input requires grad.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs);

// --- differentiable ops -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
/// a[m,n] + bias[1,n] broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& bias);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor transpose(const Tensor& a);
inline Tensor transpose_last_two(const Tensor& a) { return transpose(a); }
Tensor concat_last_dim(std::span<const Tensor> parts);
Tensor concat_last_dim(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);

/// Row-wise mask for softmax: allowed(r, c) == false forces probability 0.
struct SoftmaxMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> allowed;
  bool operator()(std::size_t r, std::size_t c) const { return allowed[r * cols + c] != 0; }
  static SoftmaxMask causal(std::size_t n);
  static SoftmaxMask keys(std::size_t rows, std::span<const std::uint8_t> key_allowed);
};

/// Softmax along `axis` (0 or 1 for matrices; rank-1 uses the only axis).
Tensor softmax(const Tensor& x, int axis = -1);
/// Row softmax with masked entries excluded (probability exactly 0).
Tensor softmax_rows(const Tensor& x, const SoftmaxMask* mask);

/// Mean-free, unit-variance normalisation of each row, then gain and bias rows.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Rows of `table` selected by `ids`.
Tensor embedding(const Tensor& table, std::span<const std::size_t> ids);

/// Sum over rows of -log softmax(logits[r])[targets[r]].
Tensor cross_entropy_sum(const Tensor& logits, std::span<const std::size_t> targets);
/// Single distribution: logits of V entries (rank-1 or 1 x V).
Tensor cross_entropy(const Tensor& logits, std::size_t target);

/// Inverted dropout with a mask drawn from `rng`; identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng);

/// scores[i,j] = q[i] . table[ids(i,j)], ids given as a row-major M x M array.
Tensor gathered_dot(const Tensor& q, const Tensor& table, std::span<const std::uint32_t> ids);
/// out[i] = sum_j weights[i,j] * table[ids(i,j)].
Tensor gathered_weighted_sum(const Tensor& weights, const Tensor& table, std::span<const std::uint32_t> ids);

/// Runs the tape backwards from a scalar. Leaf gradients accumulate across
/// calls; intermediate gradients are rebuilt on every call.
void backward(const Tensor& loss);

// --- parameters and optimisation ------------------------------------------------

/// Named parameters, iterated in name order.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor tensor);
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }

  /// Deep copy of values (fresh leaves, no grads).
  ParamStore clone() const;

 private:
  std::map<std::string, Tensor> params_;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update over every parameter. Grads are left as-is.
void adam_step(ParamStore& params, AdamState& state, double lr, const AdamOptions& options = {});

/// Global L2 norm of all parameter grads; rescales them to `max_norm` if larger.
double clip_grad_norm(ParamStore& params, double max_norm);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares backward() against central differences on every coordinate.
/// Relative error uses max(|a|, |n|, 1e-8) as the denominator.
GradCheckResult grad_check(const std::function<Tensor(const ParamStore&)>& fn, ParamStore& params, double h = 1e-4);

/// Xavier/Glorot uniform in [-a, a], a = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);
/// Uniform double in [0, 1) from the top 53 bits; independent of the standard library's distributions.
double uniform01(std::mt19937_64& rng);

}  // namespace amrdia::num
