#include "kernels_internal.hpp"

#include "neofcam/common.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace neofcam::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(NEOFCAM_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const KernelTable* best = avx2_table();
  if (const char* env = std::getenv("NEOFCAM_KERNELS")) {
    const std::string_view choice(env);
    if (choice == "scalar") return &scalar_table();
    if (choice == "avx2" && best) return best;
  }
  return best ? best : &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable* avx2_table() {
#if defined(NEOFCAM_HAVE_AVX2_KERNELS)
  static const bool ok = cpu_has_avx2();
  return ok ? &avx2::table() : nullptr;
#else
  return nullptr;
#endif
}

bool avx2_available() { return avx2_table() != nullptr; }

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

Backend active_backend() {
  return &active() == &scalar_table() ? Backend::scalar : Backend::avx2;
}

void set_backend(Backend backend) {
  const KernelTable* t = backend == Backend::scalar ? &scalar_table() : avx2_table();
  if (!t) throw InvalidArgument("kernel backend 'avx2' is not available on this machine");
  current().store(t, std::memory_order_release);
}

const char* backend_name(Backend backend) {
  return backend == Backend::scalar ? "scalar" : "avx2";
}

void gemm(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
          std::span<const double> b, std::span<double> c, bool accumulate) {
  if (a.size() < m * k || b.size() < k * n || c.size() < m * n)
    throw InvalidArgument("gemm: buffer smaller than the stated dimensions");
  active().gemm(m, n, k, a.data(), b.data(), c.data(), accumulate);
}

void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> in,
                  std::span<double> out) {
  if (in.size() < rows * cols || out.size() < rows * cols)
    throw InvalidArgument("softmax_rows: buffer smaller than the stated dimensions");
  active().softmax_rows(rows, cols, in.data(), out.data());
}

}  // namespace neofcam::kernels
