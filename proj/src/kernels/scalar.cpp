#include "kernels_internal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace neofcam::kernels::scalar {

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void pair_relu_dot(std::size_t q, std::size_t m, std::size_t d,
                   const double* a, const double* b, const double* v,
                   double* out) {
  for (std::size_t i = 0; i < q; ++i) {
    const double* bi = b + i * d;
    const double* vi = v + i * d;
    for (std::size_t j = 0; j < m; ++j) {
      const double* aj = a + j * d;
      double acc = 0.0;
      for (std::size_t t = 0; t < d; ++t) {
        const double h = aj[t] - bi[t];
        if (h > 0.0) acc += h * vi[t];
      }
      out[i * m + j] = acc;
    }
  }
}

void pair_relu_dot_backward(std::size_t q, std::size_t m, std::size_t d,
                            const double* a, const double* b, const double* v,
                            const double* g, double* grad_a, double* grad_b,
                            double* grad_v) {
  for (std::size_t i = 0; i < q; ++i) {
    const double* bi = b + i * d;
    const double* vi = v + i * d;
    for (std::size_t j = 0; j < m; ++j) {
      const double gij = g[i * m + j];
      if (gij == 0.0) continue;
      const double* aj = a + j * d;
      for (std::size_t t = 0; t < d; ++t) {
        const double h = aj[t] - bi[t];
        if (h <= 0.0) continue;
        const double gv = gij * vi[t];
        if (grad_a) grad_a[j * d + t] += gv;
        if (grad_b) grad_b[i * d + t] -= gv;
        if (grad_v) grad_v[i * d + t] += gij * h;
      }
    }
  }
}

void softmax_rows(std::size_t rows, std::size_t cols, const double* in,
                  double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in + r * cols;
    double* y = out + r * cols;
    double mx = -INFINITY;
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, x[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      y[c] = std::exp(x[c] - mx);
      sum += y[c];
    }
    const double inv = 1.0 / sum;
    for (std::size_t c = 0; c < cols; ++c) y[c] *= inv;
  }
}

void spherical_flip(std::size_t n, const double* xyz, const double* viewpoint,
                    double radius, double* out) {
  const double two_r = 2.0 * radius;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = xyz[3 * i] - viewpoint[0];
    const double y = xyz[3 * i + 1] - viewpoint[1];
    const double z = xyz[3 * i + 2] - viewpoint[2];
    const double len = std::sqrt(x * x + y * y + z * z);
    const double s = two_r / len - 1.0;
    out[3 * i] = x * s;
    out[3 * i + 1] = y * s;
    out[3 * i + 2] = z * s;
  }
}

void classify_frustum(std::size_t n, const double* xyz,
                      const FrustumParams& p, std::uint8_t* out) {
  const double* r = p.world_to_camera;
  const double near2 = p.near * p.near;
  const double far2 = p.far * p.far;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xyz[3 * i] - p.origin[0];
    const double dy = xyz[3 * i + 1] - p.origin[1];
    const double dz = xyz[3 * i + 2] - p.origin[2];
    const double lx = r[0] * dx + r[1] * dy + r[2] * dz;
    const double ly = r[3] * dx + r[4] * dy + r[5] * dz;
    const double lz = r[6] * dx + r[7] * dy + r[8] * dz;
    const double d2 = dx * dx + dy * dy + dz * dz;
    std::uint8_t code = 0;
    if (lz > 0.0 && std::fabs(lx) <= lz * p.tan_half_h &&
        std::fabs(ly) <= lz * p.tan_half_v && d2 <= far2)
      code |= kInCone;
    if (d2 >= near2) code |= kBeyondNear;
    out[i] = code;
  }
}

}  // namespace neofcam::kernels::scalar

namespace neofcam::kernels {

const KernelTable& scalar_table() {
  static const KernelTable table{
      "scalar",
      scalar::gemm,
      scalar::pair_relu_dot,
      scalar::pair_relu_dot_backward,
      scalar::softmax_rows,
      scalar::spherical_flip,
      scalar::classify_frustum,
  };
  return table;
}

}  // namespace neofcam::kernels
