#include "neofcam/diff.hpp"

#include "neofcam/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace neofcam::diff {
namespace {

double* grad_of(const Tensor& t) {
  if (!t->requires_grad) return nullptr;
  if (t->grad.empty()) t->grad.assign(t->size(), 0.0);
  return t->grad.data();
}

std::string shape_str(const Tensor& t) { return std::to_string(t->rows) + "x" + std::to_string(t->cols); }

enum class Bcast { same, scalar, row, col };

Bcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (b->rows == a->rows && b->cols == a->cols) return Bcast::same;
  if (b->rows == 1 && b->cols == 1) return Bcast::scalar;
  if (b->rows == 1 && b->cols == a->cols) return Bcast::row;
  if (b->cols == 1 && b->rows == a->rows) return Bcast::col;
  throw InvalidArgument(std::string(op) + ": cannot broadcast " + shape_str(b) + " onto " + shape_str(a));
}

inline std::size_t bidx(Bcast k, std::size_t i, std::size_t j, std::size_t cols) {
  switch (k) {
    case Bcast::same: return i * cols + j;
    case Bcast::scalar: return 0;
    case Bcast::row: return j;
    case Bcast::col: return i;
  }
  return 0;
}

std::vector<double> transposed(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  std::vector<double> t(v.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = v[i * cols + j];
  return t;
}

void require_cols(const Tensor& a, std::size_t cols, const char* op) {
  if (a->cols != cols) throw InvalidArgument(std::string(op) + ": expected " + std::to_string(cols) +
                                             " columns, got " + shape_str(a));
}

}  // namespace

Tensor make_tensor(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad) {
  if (values.size() != rows * cols) throw InvalidArgument("make_tensor: value count does not match shape");
  auto t = std::make_shared<TensorData>();
  t->rows = rows;
  t->cols = cols;
  t->value = std::move(values);
  t->requires_grad = requires_grad;
  return t;
}

Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return make_tensor(rows, cols, std::vector<double>(rows * cols, 0.0), requires_grad);
}

Tensor scalar(double v, bool requires_grad) { return make_tensor(1, 1, {v}, requires_grad); }

Tensor row_vector(const Vec3& v, bool requires_grad) { return make_tensor(1, 3, {v.x(), v.y(), v.z()}, requires_grad); }

Tensor Tape::record(std::size_t rows, std::size_t cols, std::vector<double> value, bool requires_grad,
                    std::function<void(const TensorData&)> back) {
  Tensor out = make_tensor(rows, cols, std::move(value), requires_grad);
  if (requires_grad) nodes_.push_back({out, std::move(back)});
  return out;
}

void Tape::backward(const Tensor& out) {
  if (out->rows != 1 || out->cols != 1)
    throw InvalidArgument("backward: output must be 1x1, got " + shape_str(out));
  if (!out->requires_grad) return;
  out->grad.assign(1, 1.0);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
    if (it->out->has_grad()) it->back(*it->out);
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a->cols != b->rows) throw InvalidArgument("matmul: shape mismatch " + shape_str(a) + " * " + shape_str(b));
  const std::size_t m = a->rows, k = a->cols, n = b->cols;
  std::vector<double> c(m * n);
  kernels::active().gemm(m, n, k, a->value.data(), b->value.data(), c.data(), false);
  return record(m, n, std::move(c), a->requires_grad || b->requires_grad, [a, b, m, n, k](const TensorData& o) {
    if (double* ga = grad_of(a)) {
      const auto bt = transposed(b->value, k, n);
      kernels::active().gemm(m, k, n, o.grad.data(), bt.data(), ga, true);
    }
    if (double* gb = grad_of(b)) {
      const auto at = transposed(a->value, m, k);
      kernels::active().gemm(k, n, m, at.data(), o.grad.data(), gb, true);
    }
  });
}

Tensor Tape::transpose(const Tensor& a) {
  const std::size_t r = a->rows, c = a->cols;
  return record(c, r, transposed(a->value, r, c), a->requires_grad, [a, r, c](const TensorData& o) {
    double* ga = grad_of(a);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += o.grad[j * r + i];
  });
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  const Bcast k = broadcast_kind(a, b, "add");
  const std::size_t r = a->rows, c = a->cols;
  std::vector<double> v(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[i * c + j] = a->value[i * c + j] + b->value[bidx(k, i, j, c)];
  return record(r, c, std::move(v), a->requires_grad || b->requires_grad, [a, b, k, r, c](const TensorData& o) {
    if (double* ga = grad_of(a))
      for (std::size_t t = 0; t < r * c; ++t) ga[t] += o.grad[t];
    if (double* gb = grad_of(b))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gb[bidx(k, i, j, c)] += o.grad[i * c + j];
  });
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  const Bcast k = broadcast_kind(a, b, "sub");
  const std::size_t r = a->rows, c = a->cols;
  std::vector<double> v(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[i * c + j] = a->value[i * c + j] - b->value[bidx(k, i, j, c)];
  return record(r, c, std::move(v), a->requires_grad || b->requires_grad, [a, b, k, r, c](const TensorData& o) {
    if (double* ga = grad_of(a))
      for (std::size_t t = 0; t < r * c; ++t) ga[t] += o.grad[t];
    if (double* gb = grad_of(b))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gb[bidx(k, i, j, c)] -= o.grad[i * c + j];
  });
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  const Bcast k = broadcast_kind(a, b, "mul");
  const std::size_t r = a->rows, c = a->cols;
  std::vector<double> v(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[i * c + j] = a->value[i * c + j] * b->value[bidx(k, i, j, c)];
  return record(r, c, std::move(v), a->requires_grad || b->requires_grad, [a, b, k, r, c](const TensorData& o) {
    double* ga = grad_of(a);
    double* gb = grad_of(b);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const std::size_t ia = i * c + j, ib = bidx(k, i, j, c);
        if (ga) ga[ia] += o.grad[ia] * b->value[ib];
        if (gb) gb[ib] += o.grad[ia] * a->value[ia];
      }
  });
}

Tensor Tape::scale(const Tensor& a, double s) {
  std::vector<double> v(a->value);
  for (double& x : v) x *= s;
  return record(a->rows, a->cols, std::move(v), a->requires_grad, [a, s](const TensorData& o) {
    double* ga = grad_of(a);
    for (std::size_t t = 0; t < o.size(); ++t) ga[t] += s * o.grad[t];
  });
}

Tensor Tape::add_scalar(const Tensor& a, double s) {
  std::vector<double> v(a->value);
  for (double& x : v) x += s;
  return record(a->rows, a->cols, std::move(v), a->requires_grad, [a](const TensorData& o) {
    double* ga = grad_of(a);
    for (std::size_t t = 0; t < o.size(); ++t) ga[t] += o.grad[t];
  });
}

Tensor Tape::relu(const Tensor& a) {
  std::vector<double> v(a->value);
  for (double& x : v) x = x > 0.0 ? x : 0.0;
  return record(a->rows, a->cols, std::move(v), a->requires_grad, [a](const TensorData& o) {
    double* ga = grad_of(a);
    for (std::size_t t = 0; t < o.size(); ++t)
      if (a->value[t] > 0.0) ga[t] += o.grad[t];
  });
}

Tensor Tape::sin(const Tensor& a) {
  std::vector<double> v(a->value);
  for (double& x : v) x = std::sin(x);
  return record(a->rows, a->cols, std::move(v), a->requires_grad, [a](const TensorData& o) {
    double* ga = grad_of(a);
    for (std::size_t t = 0; t < o.size(); ++t) ga[t] += o.grad[t] * std::cos(a->value[t]);
  });
}

Tensor Tape::cos(const Tensor& a) {
  std::vector<double> v(a->value);
  for (double& x : v) x = std::cos(x);
  return record(a->rows, a->cols, std::move(v), a->requires_grad, [a](const TensorData& o) {
    double* ga = grad_of(a);
    for (std::size_t t = 0; t < o.size(); ++t) ga[t] -= o.grad[t] * std::sin(a->value[t]);
  });
}

Tensor Tape::clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw InvalidArgument("clamp: lo > hi");
  std::vector<double> v(a->value);
  for (double& x : v) x = std::clamp(x, lo, hi);
  return record(a->rows, a->cols, std::move(v), a->requires_grad, [a, lo, hi](const TensorData& o) {
    double* ga = grad_of(a);
    for (std::size_t t = 0; t < o.size(); ++t)
      if (a->value[t] >= lo && a->value[t] <= hi) ga[t] += o.grad[t];
  });
}

Tensor Tape::clamp_cols(const Tensor& a, std::span<const double> lo, std::span<const double> hi) {
  if (lo.size() != a->cols || hi.size() != a->cols) throw InvalidArgument("clamp_cols: bound length mismatch");
  std::vector<double> l(lo.begin(), lo.end()), h(hi.begin(), hi.end());
  const std::size_t c = a->cols;
  std::vector<double> v(a->value);
  for (std::size_t t = 0; t < v.size(); ++t) v[t] = std::clamp(v[t], l[t % c], h[t % c]);
  return record(a->rows, c, std::move(v), a->requires_grad, [a, l, h, c](const TensorData& o) {
    double* ga = grad_of(a);
    for (std::size_t t = 0; t < o.size(); ++t)
      if (a->value[t] >= l[t % c] && a->value[t] <= h[t % c]) ga[t] += o.grad[t];
  });
}

Tensor Tape::softmax_rows(const Tensor& a) {
  const std::size_t r = a->rows, c = a->cols;
  std::vector<double> y(r * c);
  kernels::active().softmax_rows(r, c, a->value.data(), y.data());
  return record(r, c, std::move(y), a->requires_grad, [a, r, c](const TensorData& o) {
    double* ga = grad_of(a);
    for (std::size_t i = 0; i < r; ++i) {
      const double* yi = o.value.data() + i * c;
      const double* gi = o.grad.data() + i * c;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += yi[j] * gi[j];
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += yi[j] * (gi[j] - dot);
    }
  });
}

Tensor Tape::sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a->value) s += x;
  return record(1, 1, {s}, a->requires_grad, [a](const TensorData& o) {
    double* ga = grad_of(a);
    for (std::size_t t = 0; t < a->size(); ++t) ga[t] += o.grad[0];
  });
}

Tensor Tape::mean(const Tensor& a) {
  if (a->size() == 0) throw InvalidArgument("mean: empty tensor");
  const double inv = 1.0 / static_cast<double>(a->size());
  double s = 0.0;
  for (double x : a->value) s += x;
  return record(1, 1, {s * inv}, a->requires_grad, [a, inv](const TensorData& o) {
    double* ga = grad_of(a);
    for (std::size_t t = 0; t < a->size(); ++t) ga[t] += o.grad[0] * inv;
  });
}

Tensor Tape::sum_over_rows(const Tensor& a) {
  const std::size_t r = a->rows, c = a->cols;
  std::vector<double> v(c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[j] += a->value[i * c + j];
  return record(1, c, std::move(v), a->requires_grad, [a, r, c](const TensorData& o) {
    double* ga = grad_of(a);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += o.grad[j];
  });
}

Tensor Tape::sum_over_cols(const Tensor& a) {
  const std::size_t r = a->rows, c = a->cols;
  std::vector<double> v(r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[i] += a->value[i * c + j];
  return record(r, 1, std::move(v), a->requires_grad, [a, r, c](const TensorData& o) {
    double* ga = grad_of(a);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += o.grad[i];
  });
}

Tensor Tape::l2_norm_rows(const Tensor& a) {
  const std::size_t r = a->rows, c = a->cols;
  std::vector<double> v(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += a->value[i * c + j] * a->value[i * c + j];
    v[i] = std::sqrt(s);
  }
  return record(r, 1, std::move(v), a->requires_grad, [a, r, c](const TensorData& o) {
    double* ga = grad_of(a);
    for (std::size_t i = 0; i < r; ++i) {
      if (o.value[i] == 0.0) continue;
      const double s = o.grad[i] / o.value[i];
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += s * a->value[i * c + j];
    }
  });
}

Tensor Tape::normalize_rows(const Tensor& a) {
  const std::size_t r = a->rows, c = a->cols;
  std::vector<double> v(r * c, 0.0), norms(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += a->value[i * c + j] * a->value[i * c + j];
    norms[i] = std::sqrt(s);
    if (norms[i] > 0.0)
      for (std::size_t j = 0; j < c; ++j) v[i * c + j] = a->value[i * c + j] / norms[i];
  }
  return record(r, c, std::move(v), a->requires_grad, [a, r, c, norms](const TensorData& o) {
    double* ga = grad_of(a);
    for (std::size_t i = 0; i < r; ++i) {
      if (norms[i] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += o.value[i * c + j] * o.grad[i * c + j];
      for (std::size_t j = 0; j < c; ++j)
        ga[i * c + j] += (o.grad[i * c + j] - o.value[i * c + j] * dot) / norms[i];
    }
  });
}

Tensor Tape::cross_rows(const Tensor& a, const Tensor& b) {
  require_cols(a, 3, "cross_rows");
  require_cols(b, 3, "cross_rows");
  if (a->rows != b->rows) throw InvalidArgument("cross_rows: row count mismatch");
  const std::size_t r = a->rows;
  auto cross = [](const double* x, const double* y, double* out) {
    out[0] = x[1] * y[2] - x[2] * y[1];
    out[1] = x[2] * y[0] - x[0] * y[2];
    out[2] = x[0] * y[1] - x[1] * y[0];
  };
  std::vector<double> v(3 * r);
  for (std::size_t i = 0; i < r; ++i) cross(&a->value[3 * i], &b->value[3 * i], &v[3 * i]);
  return record(r, 3, std::move(v), a->requires_grad || b->requires_grad, [a, b, r, cross](const TensorData& o) {
    double* ga = grad_of(a);
    double* gb = grad_of(b);
    double t[3];
    for (std::size_t i = 0; i < r; ++i) {
      const double* g = &o.grad[3 * i];
      if (ga) {
        cross(&b->value[3 * i], g, t);
        for (int k = 0; k < 3; ++k) ga[3 * i + k] += t[k];
      }
      if (gb) {
        cross(g, &a->value[3 * i], t);
        for (int k = 0; k < 3; ++k) gb[3 * i + k] += t[k];
      }
    }
  });
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols: no inputs");
  const std::size_t r = parts[0]->rows;
  std::size_t c = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    if (p->rows != r) throw InvalidArgument("concat_cols: row count mismatch");
    c += p->cols;
    rg = rg || p->requires_grad;
  }
  std::vector<double> v(r * c);
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < p->cols; ++j) v[i * c + off + j] = p->value[i * p->cols + j];
    off += p->cols;
  }
  return record(r, c, std::move(v), rg, [parts, r, c](const TensorData& o) {
    std::size_t off = 0;
    for (const Tensor& p : parts) {
      if (double* g = grad_of(p))
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < p->cols; ++j) g[i * p->cols + j] += o.grad[i * c + off + j];
      off += p->cols;
    }
  });
}

Tensor Tape::concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_rows: no inputs");
  const std::size_t c = parts[0]->cols;
  std::size_t r = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    if (p->cols != c) throw InvalidArgument("concat_rows: column count mismatch");
    r += p->rows;
    rg = rg || p->requires_grad;
  }
  std::vector<double> v;
  v.reserve(r * c);
  for (const Tensor& p : parts) v.insert(v.end(), p->value.begin(), p->value.end());
  return record(r, c, std::move(v), rg, [parts](const TensorData& o) {
    std::size_t off = 0;
    for (const Tensor& p : parts) {
      if (double* g = grad_of(p))
        for (std::size_t t = 0; t < p->size(); ++t) g[t] += o.grad[off + t];
      off += p->size();
    }
  });
}

Tensor Tape::gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  const std::size_t c = a->cols;
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  std::vector<double> v(idx.size() * c);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= a->rows) throw InvalidArgument("gather_rows: index out of range");
    std::copy_n(a->value.begin() + static_cast<std::ptrdiff_t>(idx[i] * c), c, v.begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  return record(idx.size(), c, std::move(v), a->requires_grad, [a, idx, c](const TensorData& o) {
    double* ga = grad_of(a);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) ga[idx[i] * c + j] += o.grad[i * c + j];
  });
}

Tensor Tape::pair_relu_dot(const Tensor& a, const Tensor& b, const Tensor& v) {
  const std::size_t m = a->rows, d = a->cols, q = b->rows;
  if (b->cols != d || v->rows != q || v->cols != d)
    throw InvalidArgument("pair_relu_dot: shape mismatch " + shape_str(a) + ", " + shape_str(b) + ", " + shape_str(v));
  std::vector<double> out(q * m);
  kernels::active().pair_relu_dot(q, m, d, a->value.data(), b->value.data(), v->value.data(), out.data());
  const bool rg = a->requires_grad || b->requires_grad || v->requires_grad;
  return record(q, m, std::move(out), rg, [a, b, v, q, m, d](const TensorData& o) {
    kernels::active().pair_relu_dot_backward(q, m, d, a->value.data(), b->value.data(), v->value.data(),
                                             o.grad.data(), grad_of(a), grad_of(b), grad_of(v));
  });
}

}  // namespace neofcam::diff
