#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "fedscore/error.hpp"
#include "fedscore/kernels.hpp"
#include "fedscore/rng.hpp"

using namespace fedscore;
using namespace fedscore::kernels;

namespace {

std::vector<const KernelTable*> simd_tables() {
  std::vector<const KernelTable*> out;
  if (backend_supported(Backend::Avx2) && avx2_table() != nullptr) out.push_back(avx2_table());
  if (backend_supported(Backend::Neon) && neon_table() != nullptr) out.push_back(neon_table());
  return out;
}

std::vector<double> random_vec(Xoshiro256& rng, std::size_t n, double lo = -3.0, double hi = 3.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("backend names") {
  CHECK(parse_backend("scalar") == Backend::Scalar);
  CHECK(parse_backend("avx2") == Backend::Avx2);
  CHECK(parse_backend("neon") == Backend::Neon);
  CHECK_THROWS_AS(parse_backend("sse9"), Error);
  CHECK(to_string(Backend::Avx2) == "avx2");
  CHECK(backend_supported(Backend::Scalar));
}

TEST_CASE("set_backend switches the active table") {
  const Backend before = active_backend();
  set_backend(Backend::Scalar);
  CHECK(active_backend() == Backend::Scalar);
  CHECK(&active() == &scalar_table());
  for (auto b : {Backend::Avx2, Backend::Neon}) {
    if (!backend_supported(b)) CHECK_THROWS_AS(set_backend(b), Error);
  }
  set_backend(before);
}

TEST_CASE("SIMD kernels match the scalar reference") {
  const auto tables = simd_tables();
  if (tables.empty()) MESSAGE("no SIMD backend on this machine");
  const KernelTable& ref = scalar_table();
  Xoshiro256 rng(2024);

  for (const KernelTable* simd : tables) {
    CAPTURE(to_string(simd->backend));
    for (std::size_t n = 0; n <= 67; ++n) {
      CAPTURE(n);
      // Offset by one element so the SIMD paths see unaligned pointers.
      const auto a = random_vec(rng, n + 1);
      const auto b = random_vec(rng, n + 1);
      const double s = rng.uniform(-2.0, 2.0);

      {
        const double want = ref.dot(a.data() + 1, b.data() + 1, n);
        const double got = simd->dot(a.data() + 1, b.data() + 1, n);
        double mag = 0.0;
        for (std::size_t i = 1; i <= n; ++i) mag += std::abs(a[i] * b[i]);
        CHECK(std::abs(got - want) <= 1e-14 * (mag + 1.0));
      }

      {
        auto y_ref = random_vec(rng, n + 1);
        auto y_simd = y_ref;
        ref.axpy(s, a.data() + 1, y_ref.data() + 1, n);
        simd->axpy(s, a.data() + 1, y_simd.data() + 1, n);
        CHECK(same_bits(y_ref, y_simd));
      }

      {
        std::vector<double> o_ref(n + 1, 0.0), o_simd(n + 1, 0.0);
        ref.add_scaled(a.data() + 1, s, b.data() + 1, o_ref.data() + 1, n);
        simd->add_scaled(a.data() + 1, s, b.data() + 1, o_simd.data() + 1, n);
        CHECK(same_bits(o_ref, o_simd));
      }

      {
        const AdamCoefficients c{0.01, 0.9, 0.999, 1e-8, 1.0 / (1.0 - 0.9 * 0.9), 1.0 / (1.0 - 0.999 * 0.999)};
        auto p_ref = random_vec(rng, n + 1);
        auto m_ref = random_vec(rng, n + 1, -0.1, 0.1);
        auto v_ref = random_vec(rng, n + 1, 0.0, 0.1);
        auto p_simd = p_ref, m_simd = m_ref, v_simd = v_ref;
        ref.adam_update(c, a.data() + 1, p_ref.data() + 1, m_ref.data() + 1, v_ref.data() + 1, n);
        simd->adam_update(c, a.data() + 1, p_simd.data() + 1, m_simd.data() + 1, v_simd.data() + 1, n);
        CHECK(same_bits(p_ref, p_simd));
        CHECK(same_bits(m_ref, m_simd));
        CHECK(same_bits(v_ref, v_simd));
      }
    }
  }
}

TEST_CASE("scalar kernels against closed forms") {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(scalar_table().dot(a.data(), b.data(), 3) == 32.0);
  std::vector<double> y{1, 1, 1};
  scalar_table().axpy(2.0, a.data(), y.data(), 3);
  CHECK(y == std::vector<double>{3, 5, 7});
  std::vector<double> out(3);
  scalar_table().add_scaled(a.data(), 0.5, b.data(), out.data(), 3);
  CHECK(out == std::vector<double>{3, 4.5, 6});
}
