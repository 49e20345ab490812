#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "fedscore/error.hpp"
#include "fedscore/kernels.hpp"

namespace fedscore::kernels {

#if !defined(FEDSCORE_HAVE_AVX2)
const KernelTable* avx2_table() noexcept { return nullptr; }
#endif

namespace {

const KernelTable* table_for(Backend b) noexcept {
  switch (b) {
    case Backend::Scalar: return &scalar_table();
    case Backend::Avx2: return avx2_table();
    case Backend::Neon: return neon_table();
  }
  return nullptr;
}

const KernelTable* detect() {
  if (const char* env = std::getenv("FEDSCORE_KERNELS"); env != nullptr && *env != '\0') {
    try {
      const Backend requested = parse_backend(env);
      if (backend_supported(requested)) return table_for(requested);
    } catch (const Error&) {
    }
    std::fprintf(stderr, "warning: FEDSCORE_KERNELS=%s unavailable, using auto-detected kernels\n", env);
  }
  if (backend_supported(Backend::Avx2)) return avx2_table();
  if (backend_supported(Backend::Neon)) return neon_table();
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

std::string_view to_string(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    case Backend::Neon: return "neon";
  }
  return "unknown";
}

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::Scalar;
  if (name == "avx2") return Backend::Avx2;
  if (name == "neon") return Backend::Neon;
  throw Error(ErrorKind::InvalidArgument, "unknown kernel backend '" + std::string(name) + "'");
}

bool backend_supported(Backend b) noexcept {
  switch (b) {
    case Backend::Scalar: return true;
    case Backend::Avx2:
#if defined(FEDSCORE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return avx2_table() != nullptr && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::Neon: return neon_table() != nullptr;
  }
  return false;
}

Backend active_backend() noexcept { return active().backend; }

const KernelTable& active() noexcept { return *current().load(std::memory_order_acquire); }

void set_backend(Backend b) {
  if (!backend_supported(b)) {
    throw Error(ErrorKind::InvalidArgument,
                "kernel backend '" + std::string(to_string(b)) + "' is not supported here");
  }
  current().store(table_for(b), std::memory_order_release);
}

}  // namespace fedscore::kernels
