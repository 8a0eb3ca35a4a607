#include "amrdia/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "amrdia/error.hpp"

namespace amrdia::num {

namespace {

using detail::Node;

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::ShapeMismatch, op + ": " + shape_string(a) + " vs " + shape_string(b));
}

void accumulate(Node* target, std::size_t index, double value) {
  if (target->requires_grad) target->ensure_grad()[index] += value;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> data(numel(shape), value);
  return from(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.empty() || shape.size() > 2) throw Error(ErrorCode::ShapeMismatch, "only rank 1 and 2 are supported");
  if (numel(shape) != values.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "data length " + std::to_string(values.size()) + " does not match " + shape_string(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

double Tensor::item() const {
  if (size() != 1) throw Error(ErrorCode::NotScalar, "item() on " + shape_string(shape()));
  return node_->data[0];
}

Tensor Tensor::detach() const { return from(shape(), node_->data, false); }

Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  for (const auto& in : inputs) {
    if (in.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    for (auto& in : inputs) node->parents.push_back(in.node_ptr());
  }
  return Tensor(std::move(node));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) shape_error("matmul", a.shape(), b.shape());
  std::vector<double> out(m * n, 0.0);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * B[p * n + j];
    }
  }
  Tensor r = make_result({m, n}, std::move(out), {a, b});
  if (r.requires_grad()) {
    Node* self = r.node();
    Node* pa = a.node();
    Node* pb = b.node();
    self->backward = [self, pa, pb, m, k, n] {
      const auto& G = self->grad;
      if (pa->requires_grad) {
        auto& ga = pa->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * pb->data[p * n + j];
            ga[i * k + p] += s;
          }
      }
      if (pb->requires_grad) {
        auto& gb = pb->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = pa->data[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * G[i * n + j];
          }
      }
    };
  }
  return r;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  Tensor r = make_result(a.shape(), std::move(out), {a, b});
  if (r.requires_grad()) {
    Node* self = r.node();
    Node* pa = a.node();
    Node* pb = b.node();
    self->backward = [self, pa, pb] {
      for (std::size_t i = 0; i < self->grad.size(); ++i) {
        accumulate(pa, i, self->grad[i]);
        accumulate(pb, i, self->grad[i]);
      }
    };
  }
  return r;
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
  const std::size_t m = a.rows(), n = a.cols();
  if (bias.size() != n) shape_error("add_row", a.shape(), bias.shape());
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bias.data()[j];
  Tensor r = make_result(a.shape(), std::move(out), {a, bias});
  if (r.requires_grad()) {
    Node* self = r.node();
    Node* pa = a.node();
    Node* pb = bias.node();
    self->backward = [self, pa, pb, m, n] {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          accumulate(pa, i * n + j, self->grad[i * n + j]);
          accumulate(pb, j, self->grad[i * n + j]);
        }
    };
  }
  return r;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  Tensor r = make_result(a.shape(), std::move(out), {a, b});
  if (r.requires_grad()) {
    Node* self = r.node();
    Node* pa = a.node();
    Node* pb = b.node();
    self->backward = [self, pa, pb] {
      for (std::size_t i = 0; i < self->grad.size(); ++i) {
        accumulate(pa, i, self->grad[i] * pb->data[i]);
        accumulate(pb, i, self->grad[i] * pa->data[i]);
      }
    };
  }
  return r;
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& x : out) x *= factor;
  Tensor r = make_result(a.shape(), std::move(out), {a});
  if (r.requires_grad()) {
    Node* self = r.node();
    Node* pa = a.node();
    self->backward = [self, pa, factor] {
      for (std::size_t i = 0; i < self->grad.size(); ++i) accumulate(pa, i, self->grad[i] * factor);
    };
  }
  return r;
}

Tensor sum(const Tensor& a) {
  const double s = std::accumulate(a.data().begin(), a.data().end(), 0.0);
  Tensor r = make_result({1}, {s}, {a});
  if (r.requires_grad()) {
    Node* self = r.node();
    Node* pa = a.node();
    self->backward = [self, pa] {
      for (std::size_t i = 0; i < pa->data.size(); ++i) accumulate(pa, i, self->grad[0]);
    };
  }
  return r;
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& x : out) x = x > 0.0 ? x : 0.0;
  Tensor r = make_result(a.shape(), std::move(out), {a});
  if (r.requires_grad()) {
    Node* self = r.node();
    Node* pa = a.node();
    self->backward = [self, pa] {
      for (std::size_t i = 0; i < self->grad.size(); ++i) {
        if (pa->data[i] > 0.0) accumulate(pa, i, self->grad[i]);
      }
    };
  }
  return r;
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.data()[i * n + j];
  Tensor r = make_result({n, m}, std::move(out), {a});
  if (r.requires_grad()) {
    Node* self = r.node();
    Node* pa = a.node();
    self->backward = [self, pa, m, n] {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) accumulate(pa, i * n + j, self->grad[j * m + i]);
    };
  }
  return r;
}

Tensor concat_last_dim(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat of nothing");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) shape_error("concat_last_dim", parts[0].shape(), p.shape());
    total += p.cols();
  }
  std::vector<double> out(m * total);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(p.data().begin() + i * w, w, out.begin() + i * total + off);
    off += w;
  }
  const bool vector_like = parts[0].rank() == 1;
  Shape shape = vector_like ? Shape{total} : Shape{m, total};
  Tensor r = make_result(shape, std::move(out), std::vector<Tensor>(parts.begin(), parts.end()));
  if (r.requires_grad()) {
    Node* self = r.node();
    std::vector<Node*> srcs;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
      srcs.push_back(p.node());
      widths.push_back(p.cols());
    }
    self->backward = [self, srcs, widths, offsets, m, total] {
      for (std::size_t s = 0; s < srcs.size(); ++s) {
        if (!srcs[s]->requires_grad) continue;
        auto& g = srcs[s]->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[s]; ++j) g[i * widths[s] + j] += self->grad[i * total + offsets[s] + j];
      }
    };
  }
  return r;
}

Tensor concat_last_dim(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat_last_dim(std::span<const Tensor>(parts));
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  const std::size_t m = a.rows(), n = a.cols();
  if (start + count > n) throw Error(ErrorCode::IndexOutOfRange, "slice_cols past " + shape_string(a.shape()));
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(a.data().begin() + i * n + start, count, out.begin() + i * count);
  Tensor r = make_result({m, count}, std::move(out), {a});
  if (r.requires_grad()) {
    Node* self = r.node();
    Node* pa = a.node();
    self->backward = [self, pa, m, n, start, count] {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < count; ++j) accumulate(pa, i * n + start + j, self->grad[i * count + j]);
    };
  }
  return r;
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
  const std::size_t n = a.cols();
  if (start + count > a.rows()) throw Error(ErrorCode::IndexOutOfRange, "slice_rows past " + shape_string(a.shape()));
  std::vector<double> out(a.data().begin() + start * n, a.data().begin() + (start + count) * n);
  Tensor r = make_result({count, n}, std::move(out), {a});
  if (r.requires_grad()) {
    Node* self = r.node();
    Node* pa = a.node();
    self->backward = [self, pa, start, n] {
      for (std::size_t i = 0; i < self->grad.size(); ++i) accumulate(pa, start * n + i, self->grad[i]);
    };
  }
  return r;
}

SoftmaxMask SoftmaxMask::causal(std::size_t n) {
  SoftmaxMask m{n, n, std::vector<std::uint8_t>(n * n, 0)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) m.allowed[i * n + j] = 1;
  return m;
}

SoftmaxMask SoftmaxMask::keys(std::size_t rows, std::span<const std::uint8_t> key_allowed) {
  SoftmaxMask m{rows, key_allowed.size(), {}};
  for (std::size_t i = 0; i < rows; ++i) m.allowed.insert(m.allowed.end(), key_allowed.begin(), key_allowed.end());
  return m;
}

Tensor softmax_rows(const Tensor& x, const SoftmaxMask* mask) {
  const std::size_t m = x.rows(), n = x.cols();
  if (mask && (mask->rows != m || mask->cols != n)) {
    throw Error(ErrorCode::ShapeMismatch, "softmax mask does not match " + shape_string(x.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (!mask || (*mask)(i, j)) mx = std::max(mx, x.data()[i * n + j]);
    if (std::isinf(mx)) continue;  // fully masked row stays zero
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && !(*mask)(i, j)) continue;
      out[i * n + j] = std::exp(x.data()[i * n + j] - mx);
      z += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  Tensor r = make_result(x.shape(), std::move(out), {x});
  if (r.requires_grad()) {
    Node* self = r.node();
    Node* px = x.node();
    self->backward = [self, px, m, n] {
      const auto& y = self->data;
      const auto& g = self->grad;
      for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += y[i * n + j] * g[i * n + j];
        for (std::size_t j = 0; j < n; ++j) accumulate(px, i * n + j, y[i * n + j] * (g[i * n + j] - dot));
      }
    };
  }
  return r;
}

Tensor softmax(const Tensor& x, int axis) {
  if (x.rank() == 1 || axis == -1 || axis == 1) return softmax_rows(x, nullptr);
  if (axis == 0) return transpose(softmax_rows(transpose(x), nullptr));
  throw Error(ErrorCode::IndexOutOfRange, "softmax axis " + std::to_string(axis));
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.size() != n || bias.size() != n) shape_error("layer_norm", x.shape(), gain.shape());
  std::vector<double> out(m * n), xhat(m * n), inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.data().data() + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (row[j] - mean) * inv_std[i];
      out[i * n + j] = gain.data()[j] * xhat[i * n + j] + bias.data()[j];
    }
  }
  Tensor r = make_result(x.shape(), std::move(out), {x, gain, bias});
  if (r.requires_grad()) {
    Node* self = r.node();
    Node* px = x.node();
    Node* pg = gain.node();
    Node* pb = bias.node();
    self->backward = [self, px, pg, pb, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
      const auto& g = self->grad;
      std::vector<double> dxhat(n);
      for (std::size_t i = 0; i < m; ++i) {
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t k = i * n + j;
          accumulate(pg, j, g[k] * xhat[k]);
          accumulate(pb, j, g[k]);
          dxhat[j] = g[k] * pg->data[j];
          s1 += dxhat[j];
          s2 += dxhat[j] * xhat[k];
        }
        if (!px->requires_grad) continue;
        auto& gx = px->ensure_grad();
        const double nn = static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t k = i * n + j;
          gx[k] += inv_std[i] / nn * (nn * dxhat[j] - s1 - xhat[k] * s2);
        }
      }
    };
  }
  return r;
}

Tensor embedding(const Tensor& table, std::span<const std::size_t> ids) {
  const std::size_t vocab = table.rows(), d = table.cols();
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab) {
      throw Error(ErrorCode::IndexOutOfRange,
                  "embedding id " + std::to_string(ids[i]) + " >= table rows " + std::to_string(vocab));
    }
    std::copy_n(table.data().begin() + ids[i] * d, d, out.begin() + i * d);
  }
  Tensor r = make_result({ids.size(), d}, std::move(out), {table});
  if (r.requires_grad()) {
    Node* self = r.node();
    Node* pt = table.node();
    self->backward = [self, pt, d, idv = std::vector<std::size_t>(ids.begin(), ids.end())] {
      auto& g = pt->ensure_grad();
      for (std::size_t i = 0; i < idv.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) g[idv[i] * d + j] += self->grad[i * d + j];
    };
  }
  return r;
}

Tensor cross_entropy_sum(const Tensor& logits, std::span<const std::size_t> targets) {
  const std::size_t m = logits.rows(), v = logits.cols();
  if (targets.size() != m) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(targets.size()) + " targets for " + std::to_string(m) + " rows");
  }
  if (v < 2) throw Error(ErrorCode::ShapeMismatch, "cross entropy needs at least two classes");
  std::vector<double> probs(m * v);
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (targets[i] >= v) {
      throw Error(ErrorCode::IndexOutOfRange, "target " + std::to_string(targets[i]) + " >= " + std::to_string(v));
    }
    const double* row = logits.data().data() + i * v;
    const double mx = *std::max_element(row, row + v);
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) {
      probs[i * v + j] = std::exp(row[j] - mx);
      z += probs[i * v + j];
    }
    for (std::size_t j = 0; j < v; ++j) probs[i * v + j] /= z;
    loss += (mx + std::log(z)) - row[targets[i]];
  }
  Tensor r = make_result({1}, {loss}, {logits});
  if (r.requires_grad()) {
    Node* self = r.node();
    Node* pl = logits.node();
    self->backward = [self, pl, m, v, probs = std::move(probs),
                      tv = std::vector<std::size_t>(targets.begin(), targets.end())] {
      auto& g = pl->ensure_grad();
      const double up = self->grad[0];
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < v; ++j)
          g[i * v + j] += up * (probs[i * v + j] - (j == tv[i] ? 1.0 : 0.0));
    };
  }
  return r;
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
  if (logits.rows() != 1) shape_error("cross_entropy", logits.shape(), {1, logits.cols()});
  const std::size_t t[] = {target};
  return cross_entropy_sum(logits, t);
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  const double keep = 1.0 - rate;
  std::vector<double> mask(x.size());
  for (double& mk : mask) mk = uniform01(rng) < keep ? 1.0 / keep : 0.0;
  return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

Tensor gathered_dot(const Tensor& q, const Tensor& table, std::span<const std::uint32_t> ids) {
  const std::size_t m = q.rows(), d = q.cols(), r_count = table.rows();
  if (table.cols() != d) shape_error("gathered_dot", q.shape(), table.shape());
  if (ids.size() % m != 0) throw Error(ErrorCode::ShapeMismatch, "id grid does not match query rows");
  const std::size_t n = ids.size() / m;
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t id = ids[i * n + j];
      if (id >= r_count) throw Error(ErrorCode::IndexOutOfRange, "relation id " + std::to_string(id));
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += q.data()[i * d + c] * table.data()[id * d + c];
      out[i * n + j] = s;
    }
  Tensor r = make_result({m, n}, std::move(out), {q, table});
  if (r.requires_grad()) {
    Node* self = r.node();
    Node* pq = q.node();
    Node* pt = table.node();
    self->backward = [self, pq, pt, m, n, d, idv = std::vector<std::uint32_t>(ids.begin(), ids.end())] {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double g = self->grad[i * n + j];
          if (g == 0.0) continue;
          const std::size_t id = idv[i * n + j];
          for (std::size_t c = 0; c < d; ++c) {
            accumulate(pq, i * d + c, g * pt->data[id * d + c]);
            accumulate(pt, id * d + c, g * pq->data[i * d + c]);
          }
        }
    };
  }
  return r;
}

Tensor gathered_weighted_sum(const Tensor& weights, const Tensor& table, std::span<const std::uint32_t> ids) {
  const std::size_t m = weights.rows(), n = weights.cols(), d = table.cols(), r_count = table.rows();
  if (ids.size() != m * n) throw Error(ErrorCode::ShapeMismatch, "id grid does not match weights");
  std::vector<double> out(m * d, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t id = ids[i * n + j];
      if (id >= r_count) throw Error(ErrorCode::IndexOutOfRange, "relation id " + std::to_string(id));
      const double w = weights.data()[i * n + j];
      for (std::size_t c = 0; c < d; ++c) out[i * d + c] += w * table.data()[id * d + c];
    }
  Tensor r = make_result({m, d}, std::move(out), {weights, table});
  if (r.requires_grad()) {
    Node* self = r.node();
    Node* pw = weights.node();
    Node* pt = table.node();
    self->backward = [self, pw, pt, m, n, d, idv = std::vector<std::uint32_t>(ids.begin(), ids.end())] {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t id = idv[i * n + j];
          double gw = 0.0;
          const double w = pw->data[i * n + j];
          for (std::size_t c = 0; c < d; ++c) {
            gw += self->grad[i * d + c] * pt->data[id * d + c];
            accumulate(pt, id * d + c, w * self->grad[i * d + c]);
          }
          accumulate(pw, i * n + j, gw);
        }
    };
  }
  return r;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw Error(ErrorCode::NotScalar, "backward needs a scalar, got " + (loss.defined() ? shape_string(loss.shape()) : "undefined"));
  }
  Node* root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen{root};
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (!n->parents.empty()) n->grad.clear();
  }
  root->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward();
  }
}

Tensor& ParamStore::add(const std::string& name, Tensor tensor) {
  if (params_.count(name) != 0) throw Error(ErrorCode::InvalidConfig, "duplicate parameter '" + name + "'");
  tensor.node()->requires_grad = true;
  return params_.emplace(name, std::move(tensor)).first->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(ErrorCode::InvalidConfig, "unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ParamStore&>(*this).get(name));
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [name, t] : params_) out.add(name, t.detach());
  return out;
}

void adam_step(ParamStore& params, AdamState& state, double lr, const AdamOptions& opt) {
  for (const auto& [name, t] : params) {
    if (!t.has_grad()) throw Error(ErrorCode::MissingGrad, "parameter '" + name + "' has no gradient");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (auto& [name, p] : params) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) m.assign(p.size(), 0.0);
    if (v.empty()) v.assign(p.size(), 0.0);
    auto data = p.mutable_data();
    const auto g = p.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      data[i] -= lr * m_hat / (std::sqrt(v_hat) + opt.eps);
    }
  }
}

double clip_grad_norm(ParamStore& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, t] : params)
    for (double g : t.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& [name, t] : params) {
      if (!t.has_grad()) continue;
      for (double& g : t.mutable_grad()) g *= f;
    }
  }
  return norm;
}

GradCheckResult grad_check(const std::function<Tensor(const ParamStore&)>& fn, ParamStore& params, double h) {
  params.zero_grad();
  backward(fn(params));
  GradCheckResult result;
  for (auto& [name, t] : params) {
    const std::vector<double> analytic =
        t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end()) : std::vector<double>(t.size(), 0.0);
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = fn(params).item();
      data[i] = saved - h;
      const double down = fn(params).item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      const double err = std::abs(analytic[i] - numeric) / denom;
      if (err > result.max_rel_error || result.worst_param.empty()) {
        result = {err, name, i, analytic[i], numeric};
      }
    }
  }
  return result;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> w(fan_in * fan_out);
  for (double& x : w) x = (2.0 * uniform01(rng) - 1.0) * a;
  return Tensor::from({fan_in, fan_out}, std::move(w), true);
}

}  // namespace amrdia::num
