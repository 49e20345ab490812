#include <cmath>

#include "fedscore/kernels.hpp"

namespace fedscore::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_scaled_scalar(const double* x, double a, const double* y, double* out, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + a * y[i];
}

void adam_update_scalar(const AdamCoefficients& c, const double* g, double* p, double* m, double* v,
                        std::size_t n) noexcept {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = c.beta1 * m[i] + one_minus_b1 * g[i];
    v[i] = c.beta2 * v[i] + one_minus_b2 * (g[i] * g[i]);
    const double m_hat = m[i] * c.bias_correction1;
    const double v_hat = v[i] * c.bias_correction2;
    p[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{Backend::Scalar, dot_scalar, axpy_scalar, add_scaled_scalar,
                                 adam_update_scalar};
  return table;
}

}  // namespace fedscore::kernels
