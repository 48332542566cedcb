// AVX2/FMA variants. This translation unit is compiled with -mavx2 -mfma
// -ffp-contract=off; explicit _mm256_fmadd_pd calls are the only fused
// operations, so the geometric kernels round identically to the scalar
// reference.

#include "kernels_internal.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace neofcam::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  const __m128d h = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, h));
}

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  const __m128d h = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_max_sd(lo, h));
}

// Cephes-style rational approximation of exp, ~1 ulp on [-708, 709].
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.78271289338397);
  const __m256d lo = _mm256_set1_pd(-708.39641853226408);
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
  const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
  const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
  const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
  const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
  const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
  const __m256d q3 = _mm256_set1_pd(2.00000000000000000009e0);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two = _mm256_set1_pd(2.0);

  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);
  const __m256d fx = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                     _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_fnmadd_pd(fx, c1, x);
  x = _mm256_fnmadd_pd(fx, c2, x);
  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_fmadd_pd(p0, xx, p1);
  px = _mm256_fmadd_pd(px, xx, p2);
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_fmadd_pd(q0, xx, q1);
  qx = _mm256_fmadd_pd(qx, xx, q2);
  qx = _mm256_fmadd_pd(qx, xx, q3);
  x = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  x = _mm256_fmadd_pd(two, x, one);

  // 2^fx through the exponent field; fx + 1023 lies in [1, 2047].
  const __m256d magic = _mm256_set1_pd(4503599627370496.0 + 1023.0);
  const __m256i bits =
      _mm256_slli_epi64(_mm256_castpd_si256(_mm256_add_pd(fx, magic)), 52);
  return _mm256_mul_pd(x, _mm256_castsi256_pd(bits));
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const __m256d av = _mm256_set1_pd(aip);
      const double* brow = b + p * n;
      std::size_t j = 0;
      for (; j < n4; j += 4) {
        const __m256d cv = _mm256_loadu_pd(crow + j);
        _mm256_storeu_pd(crow + j,
                         _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cv));
      }
      for (; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void pair_relu_dot(std::size_t q, std::size_t m, std::size_t d,
                   const double* a, const double* b, const double* v,
                   double* out) {
  const std::size_t d4 = d & ~std::size_t{3};
  const __m256d zero = _mm256_setzero_pd();
  for (std::size_t i = 0; i < q; ++i) {
    const double* bi = b + i * d;
    const double* vi = v + i * d;
    double* orow = out + i * m;
    std::size_t j = 0;
    for (; j + 4 <= m; j += 4) {
      const double* a0 = a + j * d;
      const double* a1 = a0 + d;
      const double* a2 = a1 + d;
      const double* a3 = a2 + d;
      __m256d s0 = zero, s1 = zero, s2 = zero, s3 = zero;
      std::size_t t = 0;
      for (; t < d4; t += 4) {
        const __m256d bv = _mm256_loadu_pd(bi + t);
        const __m256d vv = _mm256_loadu_pd(vi + t);
        s0 = _mm256_fmadd_pd(
            _mm256_max_pd(_mm256_sub_pd(_mm256_loadu_pd(a0 + t), bv), zero), vv, s0);
        s1 = _mm256_fmadd_pd(
            _mm256_max_pd(_mm256_sub_pd(_mm256_loadu_pd(a1 + t), bv), zero), vv, s1);
        s2 = _mm256_fmadd_pd(
            _mm256_max_pd(_mm256_sub_pd(_mm256_loadu_pd(a2 + t), bv), zero), vv, s2);
        s3 = _mm256_fmadd_pd(
            _mm256_max_pd(_mm256_sub_pd(_mm256_loadu_pd(a3 + t), bv), zero), vv, s3);
      }
      double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
      for (; t < d; ++t) {
        const double bt = bi[t], vt = vi[t];
        r0 += std::max(a0[t] - bt, 0.0) * vt;
        r1 += std::max(a1[t] - bt, 0.0) * vt;
        r2 += std::max(a2[t] - bt, 0.0) * vt;
        r3 += std::max(a3[t] - bt, 0.0) * vt;
      }
      orow[j] = r0;
      orow[j + 1] = r1;
      orow[j + 2] = r2;
      orow[j + 3] = r3;
    }
    for (; j < m; ++j) {
      const double* aj = a + j * d;
      __m256d s = zero;
      std::size_t t = 0;
      for (; t < d4; t += 4) {
        const __m256d h = _mm256_max_pd(
            _mm256_sub_pd(_mm256_loadu_pd(aj + t), _mm256_loadu_pd(bi + t)), zero);
        s = _mm256_fmadd_pd(h, _mm256_loadu_pd(vi + t), s);
      }
      double r = hsum(s);
      for (; t < d; ++t) r += std::max(aj[t] - bi[t], 0.0) * vi[t];
      orow[j] = r;
    }
  }
}

void pair_relu_dot_backward(std::size_t q, std::size_t m, std::size_t d,
                            const double* a, const double* b, const double* v,
                            const double* g, double* grad_a, double* grad_b,
                            double* grad_v) {
  const std::size_t d4 = d & ~std::size_t{3};
  const __m256d zero = _mm256_setzero_pd();
  for (std::size_t i = 0; i < q; ++i) {
    const double* bi = b + i * d;
    const double* vi = v + i * d;
    double* gbi = grad_b ? grad_b + i * d : nullptr;
    double* gvi = grad_v ? grad_v + i * d : nullptr;
    for (std::size_t j = 0; j < m; ++j) {
      const double gij = g[i * m + j];
      if (gij == 0.0) continue;
      const __m256d gg = _mm256_set1_pd(gij);
      const double* aj = a + j * d;
      double* gaj = grad_a ? grad_a + j * d : nullptr;
      std::size_t t = 0;
      for (; t < d4; t += 4) {
        const __m256d h =
            _mm256_sub_pd(_mm256_loadu_pd(aj + t), _mm256_loadu_pd(bi + t));
        const __m256d mask = _mm256_cmp_pd(h, zero, _CMP_GT_OQ);
        const __m256d gv =
            _mm256_and_pd(_mm256_mul_pd(gg, _mm256_loadu_pd(vi + t)), mask);
        if (gaj) _mm256_storeu_pd(gaj + t, _mm256_add_pd(_mm256_loadu_pd(gaj + t), gv));
        if (gbi) _mm256_storeu_pd(gbi + t, _mm256_sub_pd(_mm256_loadu_pd(gbi + t), gv));
        if (gvi)
          _mm256_storeu_pd(gvi + t, _mm256_fmadd_pd(gg, _mm256_and_pd(h, mask),
                                                    _mm256_loadu_pd(gvi + t)));
      }
      for (; t < d; ++t) {
        const double h = aj[t] - bi[t];
        if (h <= 0.0) continue;
        const double gv = gij * vi[t];
        if (gaj) gaj[t] += gv;
        if (gbi) gbi[t] -= gv;
        if (gvi) gvi[t] += gij * h;
      }
    }
  }
}

void softmax_rows(std::size_t rows, std::size_t cols, const double* in,
                  double* out) {
  const std::size_t c4 = cols & ~std::size_t{3};
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in + r * cols;
    double* y = out + r * cols;
    double mx = -INFINITY;
    std::size_t c = 0;
    if (c4 > 0) {
      __m256d mv = _mm256_loadu_pd(x);
      for (c = 4; c < c4; c += 4) mv = _mm256_max_pd(mv, _mm256_loadu_pd(x + c));
      mx = hmax(mv);
    }
    for (; c < cols; ++c) mx = std::max(mx, x[c]);

    const __m256d mxv = _mm256_set1_pd(mx);
    __m256d sv = _mm256_setzero_pd();
    for (c = 0; c < c4; c += 4) {
      const __m256d e = exp_pd(_mm256_sub_pd(_mm256_loadu_pd(x + c), mxv));
      _mm256_storeu_pd(y + c, e);
      sv = _mm256_add_pd(sv, e);
    }
    double sum = hsum(sv);
    for (; c < cols; ++c) {
      y[c] = std::exp(x[c] - mx);
      sum += y[c];
    }
    const double inv = 1.0 / sum;
    const __m256d invv = _mm256_set1_pd(inv);
    for (c = 0; c < c4; c += 4)
      _mm256_storeu_pd(y + c, _mm256_mul_pd(_mm256_loadu_pd(y + c), invv));
    for (; c < cols; ++c) y[c] *= inv;
  }
}

void spherical_flip(std::size_t n, const double* xyz, const double* viewpoint,
                    double radius, double* out) {
  const __m256i idx = _mm256_setr_epi64x(0, 3, 6, 9);
  const __m256d vx = _mm256_set1_pd(viewpoint[0]);
  const __m256d vy = _mm256_set1_pd(viewpoint[1]);
  const __m256d vz = _mm256_set1_pd(viewpoint[2]);
  const __m256d two_r = _mm256_set1_pd(2.0 * radius);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  alignas(32) double ox[4], oy[4], oz[4];
  for (; i + 4 <= n; i += 4) {
    const double* base = xyz + 3 * i;
    const __m256d x = _mm256_sub_pd(_mm256_i64gather_pd(base, idx, 8), vx);
    const __m256d y = _mm256_sub_pd(_mm256_i64gather_pd(base + 1, idx, 8), vy);
    const __m256d z = _mm256_sub_pd(_mm256_i64gather_pd(base + 2, idx, 8), vz);
    const __m256d len = _mm256_sqrt_pd(_mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(x, x), _mm256_mul_pd(y, y)), _mm256_mul_pd(z, z)));
    const __m256d s = _mm256_sub_pd(_mm256_div_pd(two_r, len), one);
    _mm256_store_pd(ox, _mm256_mul_pd(x, s));
    _mm256_store_pd(oy, _mm256_mul_pd(y, s));
    _mm256_store_pd(oz, _mm256_mul_pd(z, s));
    for (int l = 0; l < 4; ++l) {
      out[3 * (i + l)] = ox[l];
      out[3 * (i + l) + 1] = oy[l];
      out[3 * (i + l) + 2] = oz[l];
    }
  }
  if (i < n) scalar::spherical_flip(n - i, xyz + 3 * i, viewpoint, radius, out + 3 * i);
}

void classify_frustum(std::size_t n, const double* xyz,
                      const FrustumParams& p, std::uint8_t* out) {
  const double* r = p.world_to_camera;
  const __m256i idx = _mm256_setr_epi64x(0, 3, 6, 9);
  const __m256d ox = _mm256_set1_pd(p.origin[0]);
  const __m256d oy = _mm256_set1_pd(p.origin[1]);
  const __m256d oz = _mm256_set1_pd(p.origin[2]);
  __m256d rv[9];
  for (int t = 0; t < 9; ++t) rv[t] = _mm256_set1_pd(r[t]);
  const __m256d th = _mm256_set1_pd(p.tan_half_h);
  const __m256d tv = _mm256_set1_pd(p.tan_half_v);
  const __m256d near2 = _mm256_set1_pd(p.near * p.near);
  const __m256d far2 = _mm256_set1_pd(p.far * p.far);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const double* base = xyz + 3 * i;
    const __m256d dx = _mm256_sub_pd(_mm256_i64gather_pd(base, idx, 8), ox);
    const __m256d dy = _mm256_sub_pd(_mm256_i64gather_pd(base + 1, idx, 8), oy);
    const __m256d dz = _mm256_sub_pd(_mm256_i64gather_pd(base + 2, idx, 8), oz);
    const __m256d lx = _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(rv[0], dx), _mm256_mul_pd(rv[1], dy)),
        _mm256_mul_pd(rv[2], dz));
    const __m256d ly = _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(rv[3], dx), _mm256_mul_pd(rv[4], dy)),
        _mm256_mul_pd(rv[5], dz));
    const __m256d lz = _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(rv[6], dx), _mm256_mul_pd(rv[7], dy)),
        _mm256_mul_pd(rv[8], dz));
    const __m256d d2 = _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
        _mm256_mul_pd(dz, dz));
    __m256d cone = _mm256_cmp_pd(lz, zero, _CMP_GT_OQ);
    cone = _mm256_and_pd(cone, _mm256_cmp_pd(_mm256_and_pd(lx, abs_mask),
                                             _mm256_mul_pd(lz, th), _CMP_LE_OQ));
    cone = _mm256_and_pd(cone, _mm256_cmp_pd(_mm256_and_pd(ly, abs_mask),
                                             _mm256_mul_pd(lz, tv), _CMP_LE_OQ));
    cone = _mm256_and_pd(cone, _mm256_cmp_pd(d2, far2, _CMP_LE_OQ));
    const __m256d beyond = _mm256_cmp_pd(d2, near2, _CMP_GE_OQ);
    const int cm = _mm256_movemask_pd(cone);
    const int bm = _mm256_movemask_pd(beyond);
    for (int l = 0; l < 4; ++l) {
      std::uint8_t code = 0;
      if (cm & (1 << l)) code |= kInCone;
      if (bm & (1 << l)) code |= kBeyondNear;
      out[i + l] = code;
    }
  }
  if (i < n) scalar::classify_frustum(n - i, xyz + 3 * i, p, out + i);
}

}  // namespace

const KernelTable& table() {
  static const KernelTable t{
      "avx2",        gemm,           pair_relu_dot,   pair_relu_dot_backward,
      softmax_rows,  spherical_flip, classify_frustum,
  };
  return t;
}

}  // namespace neofcam::kernels::avx2
