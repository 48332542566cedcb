#pragma once

#include "neofcam/kernels.hpp"

namespace neofcam::kernels::scalar {

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c, bool accumulate);
void pair_relu_dot(std::size_t q, std::size_t m, std::size_t d,
                   const double* a, const double* b, const double* v,
                   double* out);
void pair_relu_dot_backward(std::size_t q, std::size_t m, std::size_t d,
                            const double* a, const double* b, const double* v,
                            const double* g, double* grad_a, double* grad_b,
                            double* grad_v);
void softmax_rows(std::size_t rows, std::size_t cols, const double* in,
                  double* out);
void spherical_flip(std::size_t n, const double* xyz, const double* viewpoint,
                    double radius, double* out);
void classify_frustum(std::size_t n, const double* xyz,
                      const FrustumParams& p, std::uint8_t* out);

}  // namespace neofcam::kernels::scalar

namespace neofcam::kernels::avx2 {

// Defined only when NEOFCAM_HAVE_AVX2_KERNELS is set.
const KernelTable& table();

}  // namespace neofcam::kernels::avx2
