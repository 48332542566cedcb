#pragma once

// Data-parallel inner loops used by the rest of the library. Every kernel
// has a portable scalar reference implementation; an AVX2/FMA variant is
// compiled when the target supports it and selected at runtime. The
// NEOFCAM_KERNELS environment variable ("scalar" or "avx2") overrides the
// automatic choice.

#include <cstddef>
#include <cstdint>
#include <span>

namespace neofcam::kernels {

enum class Backend { scalar, avx2 };

// World-to-camera transform and frustum bounds for classify_frustum.
struct FrustumParams {
  double world_to_camera[9];  // row-major R^T
  double origin[3];
  double tan_half_h;
  double tan_half_v;
  double near;
  double far;
};

// classify_frustum output bits.
inline constexpr std::uint8_t kInCone = 1;      // in front, inside FOV, dist <= far
inline constexpr std::uint8_t kBeyondNear = 2;  // dist >= near

struct KernelTable {
  const char* name;

  // c (+)= a * b for row-major a (m x k), b (k x n), c (m x n).
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a,
               const double* b, double* c, bool accumulate);

  // out[i][j] = sum_t relu(a[j][t] - b[i][t]) * v[i][t]
  // a: m x d, b: q x d, v: q x d, out: q x m.
  void (*pair_relu_dot)(std::size_t q, std::size_t m, std::size_t d,
                        const double* a, const double* b, const double* v,
                        double* out);

  // Accumulates the vector-Jacobian product of pair_relu_dot for the
  // upstream gradient g (q x m). Null gradient pointers are skipped.
  void (*pair_relu_dot_backward)(std::size_t q, std::size_t m, std::size_t d,
                                 const double* a, const double* b,
                                 const double* v, const double* g,
                                 double* grad_a, double* grad_b,
                                 double* grad_v);

  // Numerically stable softmax along each row.
  void (*softmax_rows)(std::size_t rows, std::size_t cols, const double* in,
                       double* out);

  // out_i = p_i * (2R/|p_i| - 1), p_i = xyz_i - viewpoint (xyz is n x 3).
  // Output is viewpoint-centred. |p_i| must be non-zero.
  void (*spherical_flip)(std::size_t n, const double* xyz,
                         const double* viewpoint, double radius, double* out);

  void (*classify_frustum)(std::size_t n, const double* xyz,
                           const FrustumParams& params, std::uint8_t* out);
};

const KernelTable& scalar_table();

// nullptr when the AVX2 variants were not compiled or the CPU lacks
// AVX2/FMA.
const KernelTable* avx2_table();

bool avx2_available();

const KernelTable& active();
Backend active_backend();

// Throws InvalidArgument when asking for an unavailable backend.
void set_backend(Backend backend);

const char* backend_name(Backend backend);

// Convenience wrappers over the active table.
void gemm(std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate = false);
void softmax_rows(std::size_t rows, std::size_t cols,
                  std::span<const double> in, std::span<double> out);

}  // namespace neofcam::kernels
