#pragma once

// Dense double-precision inner loops used by the learner and the score
// algebra. Each kernel has a scalar reference implementation and optional
// AVX2/FMA (x86-64) and NEON (AArch64) variants; one backend is selected at
// runtime from CPU features and can be overridden with FEDSCORE_KERNELS
// (scalar|avx2|neon) or set_backend().
//
// Elementwise kernels (axpy, add_scaled, adam_update) produce bit-identical
// results on every backend. Reductions (dot) reassociate the sum and agree
// with the scalar reference to rounding error only.

#include <cstddef>
#include <span>
#include <string_view>

namespace fedscore::kernels {

enum class Backend { Scalar, Avx2, Neon };

std::string_view to_string(Backend b);

struct AdamCoefficients {
  double learning_rate;
  double beta1;
  double beta2;
  double epsilon;
  double bias_correction1;  // 1 / (1 - beta1^t)
  double bias_correction2;  // 1 / (1 - beta2^t)
};

/// Function table of one backend. All spans in a call must have equal length.
struct KernelTable {
  Backend backend;
  double (*dot)(const double* a, const double* b, std::size_t n) noexcept;
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n) noexcept;
  // out = x + a * y
  void (*add_scaled)(const double* x, double a, const double* y, double* out, std::size_t n) noexcept;
  void (*adam_update)(const AdamCoefficients& c, const double* grads, double* params, double* m,
                      double* v, std::size_t n) noexcept;
};

const KernelTable& scalar_table() noexcept;
/// nullptr when the backend is not compiled into this binary.
const KernelTable* avx2_table() noexcept;
const KernelTable* neon_table() noexcept;

bool backend_supported(Backend b) noexcept;
Backend active_backend() noexcept;
const KernelTable& active() noexcept;
/// Throws fedscore::Error(InvalidArgument) if `b` is unsupported on this CPU.
void set_backend(Backend b);
Backend parse_backend(std::string_view name);

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double a, std::span<const double> x, std::span<double> y) noexcept {
  active().axpy(a, x.data(), y.data(), x.size());
}
inline void add_scaled(std::span<const double> x, double a, std::span<const double> y,
                       std::span<double> out) noexcept {
  active().add_scaled(x.data(), a, y.data(), out.data(), x.size());
}
inline void adam_update(const AdamCoefficients& c, std::span<const double> grads,
                        std::span<double> params, std::span<double> m, std::span<double> v) noexcept {
  active().adam_update(c, grads.data(), params.data(), m.data(), v.data(), grads.size());
}

}  // namespace fedscore::kernels
