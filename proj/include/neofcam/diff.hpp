#pragma once

// Small reverse-mode autodiff over dense row-major matrices. A Tape records
// the operations of one forward pass; backward() on a 1x1 result
// accumulates gradients into every participating tensor that requires
// them. Leaf tensors (parameters) outlive tapes.

#include "neofcam/common.hpp"

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace neofcam::diff {

struct TensorData {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something flows into it
  bool requires_grad = false;

  std::size_t size() const { return rows * cols; }
  double at(std::size_t r, std::size_t c) const { return value[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return value[r * cols + c]; }
  bool has_grad() const { return !grad.empty(); }
  void zero_grad() { grad.clear(); }
};

using Tensor = std::shared_ptr<TensorData>;

Tensor make_tensor(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad = false);
Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
Tensor scalar(double v, bool requires_grad = false);
Tensor row_vector(const Vec3& v, bool requires_grad = false);

class Tape {
 public:
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor transpose(const Tensor& a);

  // Elementwise with b broadcast when it is 1x1, 1 x cols or rows x 1.
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);

  Tensor scale(const Tensor& a, double s);
  Tensor add_scalar(const Tensor& a, double s);
  Tensor relu(const Tensor& a);
  Tensor sin(const Tensor& a);
  Tensor cos(const Tensor& a);
  // Gradient passes where lo <= x <= hi.
  Tensor clamp(const Tensor& a, double lo, double hi);
  // Per-column bounds, `lo`/`hi` of length cols.
  Tensor clamp_cols(const Tensor& a, std::span<const double> lo, std::span<const double> hi);

  Tensor softmax_rows(const Tensor& a);
  Tensor sum(const Tensor& a);            // 1x1
  Tensor mean(const Tensor& a);           // 1x1
  Tensor sum_over_rows(const Tensor& a);  // 1 x cols
  Tensor sum_over_cols(const Tensor& a);  // rows x 1
  Tensor l2_norm_rows(const Tensor& a);   // rows x 1
  Tensor normalize_rows(const Tensor& a);
  Tensor cross_rows(const Tensor& a, const Tensor& b);  // rows x 3 each

  Tensor concat_cols(const std::vector<Tensor>& parts);
  Tensor concat_rows(const std::vector<Tensor>& parts);
  Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);

  // out[i][j] = sum_t relu(a[j][t] - b[i][t]) * v[i][t]; a: m x d, b and v: q x d.
  Tensor pair_relu_dot(const Tensor& a, const Tensor& b, const Tensor& v);

  // Requires a 1x1 output. Seeds d(out)/d(out) = 1.
  void backward(const Tensor& out);

  std::size_t size() const { return nodes_.size(); }

 private:
  Tensor record(std::size_t rows, std::size_t cols, std::vector<double> value, bool requires_grad,
                std::function<void(const TensorData&)> back);

  struct Node {
    Tensor out;
    std::function<void(const TensorData&)> back;
  };
  std::vector<Node> nodes_;
};

}  // namespace neofcam::diff
