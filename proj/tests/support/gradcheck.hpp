#pragma once

// Finite-difference gradient checks over the autodiff op set, shared by the
// unit tests and the acceptance binary.

#include "neofcam/diff.hpp"
#include "neofcam/random.hpp"
#include "oracles.hpp"

#include <functional>
#include <string>
#include <vector>

namespace gradcheck {

namespace nd = neofcam::diff;

struct Shape {
  std::size_t rows, cols;
};

struct OpCase {
  std::string name;
  std::vector<Shape> inputs;
  std::function<nd::Tensor(nd::Tape&, const std::vector<nd::Tensor>&)> build;
  // true when x is too close to a kink of this op to difference across it
  std::function<bool(double)> near_kink = [](double) { return false; };
};

inline const std::vector<std::size_t>& gather_index() {
  static const std::vector<std::size_t> idx{2, 0, 2, 1};
  return idx;
}

inline std::vector<OpCase> op_catalogue() {
  const auto kink0 = [](double x) { return std::abs(x) < 1e-3; };
  const auto kink_clamp = [](double x) { return std::abs(x - 0.3) < 1e-3 || std::abs(x + 0.4) < 1e-3; };
  std::vector<OpCase> ops;
  ops.push_back({"matmul", {{3, 4}, {4, 2}}, [](nd::Tape& t, const auto& x) { return t.matmul(x[0], x[1]); }});
  ops.push_back({"transpose", {{3, 2}}, [](nd::Tape& t, const auto& x) { return t.transpose(x[0]); }});
  ops.push_back({"add", {{3, 2}, {3, 2}}, [](nd::Tape& t, const auto& x) { return t.add(x[0], x[1]); }});
  ops.push_back({"add_row_broadcast", {{3, 2}, {1, 2}}, [](nd::Tape& t, const auto& x) { return t.add(x[0], x[1]); }});
  ops.push_back({"sub_col_broadcast", {{3, 2}, {3, 1}}, [](nd::Tape& t, const auto& x) { return t.sub(x[0], x[1]); }});
  ops.push_back({"mul", {{3, 2}, {3, 2}}, [](nd::Tape& t, const auto& x) { return t.mul(x[0], x[1]); }});
  ops.push_back({"mul_scalar_broadcast", {{3, 2}, {1, 1}}, [](nd::Tape& t, const auto& x) { return t.mul(x[0], x[1]); }});
  ops.push_back({"scale", {{2, 3}}, [](nd::Tape& t, const auto& x) { return t.scale(x[0], -1.7); }});
  ops.push_back({"add_scalar", {{2, 3}}, [](nd::Tape& t, const auto& x) { return t.add_scalar(x[0], 0.6); }});
  ops.push_back({"relu", {{3, 3}}, [](nd::Tape& t, const auto& x) { return t.relu(x[0]); }, kink0});
  ops.push_back({"sin", {{2, 3}}, [](nd::Tape& t, const auto& x) { return t.sin(x[0]); }});
  ops.push_back({"cos", {{2, 3}}, [](nd::Tape& t, const auto& x) { return t.cos(x[0]); }});
  ops.push_back({"clamp", {{3, 3}}, [](nd::Tape& t, const auto& x) { return t.clamp(x[0], -0.4, 0.3); }, kink_clamp});
  ops.push_back({"clamp_cols",
                 {{3, 2}},
                 [](nd::Tape& t, const auto& x) {
                   const double lo[] = {-0.4, -0.4}, hi[] = {0.3, 0.3};
                   return t.clamp_cols(x[0], lo, hi);
                 },
                 kink_clamp});
  ops.push_back({"softmax_rows", {{3, 4}}, [](nd::Tape& t, const auto& x) { return t.softmax_rows(x[0]); }});
  ops.push_back({"sum", {{3, 2}}, [](nd::Tape& t, const auto& x) { return t.sum(x[0]); }});
  ops.push_back({"mean", {{3, 2}}, [](nd::Tape& t, const auto& x) { return t.mean(x[0]); }});
  ops.push_back({"sum_over_rows", {{3, 2}}, [](nd::Tape& t, const auto& x) { return t.sum_over_rows(x[0]); }});
  ops.push_back({"sum_over_cols", {{3, 2}}, [](nd::Tape& t, const auto& x) { return t.sum_over_cols(x[0]); }});
  ops.push_back({"l2_norm_rows", {{3, 3}}, [](nd::Tape& t, const auto& x) { return t.l2_norm_rows(x[0]); }});
  ops.push_back({"normalize_rows", {{3, 3}}, [](nd::Tape& t, const auto& x) { return t.normalize_rows(x[0]); }});
  ops.push_back({"cross_rows", {{2, 3}, {2, 3}}, [](nd::Tape& t, const auto& x) { return t.cross_rows(x[0], x[1]); }});
  ops.push_back({"concat_cols", {{2, 1}, {2, 3}}, [](nd::Tape& t, const auto& x) { return t.concat_cols({x[0], x[1]}); }});
  ops.push_back({"concat_rows", {{1, 2}, {3, 2}}, [](nd::Tape& t, const auto& x) { return t.concat_rows({x[0], x[1]}); }});
  ops.push_back({"gather_rows", {{3, 2}}, [](nd::Tape& t, const auto& x) { return t.gather_rows(x[0], gather_index()); }});
  ops.push_back({"pair_relu_dot",
                 {{4, 3}, {2, 3}, {2, 3}},
                 [](nd::Tape& t, const auto& x) { return t.pair_relu_dot(x[0], x[1], x[2]); }});
  // composite from the field: mean(relu(X W))
  ops.push_back({"mean_relu_matmul",
                 {{5, 3}, {3, 4}},
                 [](nd::Tape& t, const auto& x) { return t.mean(t.relu(t.matmul(x[0], x[1]))); }});
  return ops;
}

// Random inputs for one instance; entries near a kink are resampled.
// pair_relu_dot's kinks are in differences a - b, handled by the caller of
// max_rel_error through `input_ok`.
inline std::vector<nd::Tensor> random_inputs(const OpCase& op, neofcam::Rng& rng) {
  std::vector<nd::Tensor> xs;
  for (const Shape& s : op.inputs) {
    std::vector<double> v(s.rows * s.cols);
    for (double& x : v) {
      do x = neofcam::uniform(rng, -1.0, 1.0);
      while (op.near_kink(x));
    }
    xs.push_back(nd::make_tensor(s.rows, s.cols, v, true));
  }
  return xs;
}

// Projects the op output onto fixed random weights so every output entry
// contributes to the checked scalar.
inline double max_rel_error(const OpCase& op, std::vector<nd::Tensor> xs, neofcam::Rng& rng, double h = 1e-5,
                            double floor = 1e-4) {
  nd::Tensor proj;
  {
    nd::Tape probe;
    const nd::Tensor out = op.build(probe, xs);
    std::vector<double> w(out->size());
    for (double& x : w) x = neofcam::uniform(rng, -1.0, 1.0);
    proj = nd::make_tensor(out->rows, out->cols, w);
  }
  const auto value = [&] {
    nd::Tape t;
    const nd::Tensor out = op.build(t, xs);
    double s = 0;
    for (std::size_t i = 0; i < out->size(); ++i) s += out->value[i] * proj->value[i];
    return s;
  };
  nd::Tape t;
  const nd::Tensor out = op.build(t, xs);
  t.backward(t.sum(t.mul(out, proj)));

  std::vector<double*> slots;
  std::vector<double> analytic;
  for (const nd::Tensor& x : xs)
    for (std::size_t i = 0; i < x->size(); ++i) {
      slots.push_back(&x->value[i]);
      analytic.push_back(x->has_grad() ? x->grad[i] : 0.0);
    }
  const std::vector<double> numeric = oracle::central_diff(value, slots, h);
  double worst = 0;
  for (std::size_t i = 0; i < numeric.size(); ++i)
    worst = std::max(worst, oracle::rel_error(analytic[i], numeric[i], floor));
  return worst;
}

// pair_relu_dot is kinked where a[j][t] == b[i][t].
inline bool input_ok(const OpCase& op, const std::vector<nd::Tensor>& xs) {
  if (op.name == "pair_relu_dot") {
    for (std::size_t j = 0; j < xs[0]->rows; ++j)
      for (std::size_t i = 0; i < xs[1]->rows; ++i)
        for (std::size_t c = 0; c < xs[0]->cols; ++c)
          if (std::abs(xs[0]->at(j, c) - xs[1]->at(i, c)) < 1e-3) return false;
  }
  if (op.name == "mean_relu_matmul") {
    for (std::size_t i = 0; i < xs[0]->rows; ++i)
      for (std::size_t j = 0; j < xs[1]->cols; ++j) {
        double s = 0;
        for (std::size_t c = 0; c < xs[0]->cols; ++c) s += xs[0]->at(i, c) * xs[1]->at(c, j);
        if (std::abs(s) < 1e-3) return false;
      }
  }
  return true;
}

inline std::vector<nd::Tensor> kink_free_inputs(const OpCase& op, neofcam::Rng& rng) {
  for (;;) {
    auto xs = random_inputs(op, rng);
    if (input_ok(op, xs)) return xs;
  }
}

}  // namespace gradcheck
