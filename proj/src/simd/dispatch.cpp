#include <atomic>
#include <cstdlib>
#include <string>
#include <vector>

#include "colorser/error.hpp"
#include "colorser/simd.hpp"

namespace colorser::simd {
namespace {

std::vector<Backend> detect_backends() {
  std::vector<Backend> found{Backend::scalar};
#if defined(COLORSER_HAVE_AVX2)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    found.push_back(Backend::avx2);
  }
#endif
#if defined(COLORSER_HAVE_NEON)
  found.push_back(Backend::neon);
#endif
  return found;
}

const std::vector<Backend>& backends() {
  static const std::vector<Backend> list = detect_backends();
  return list;
}

bool is_available(Backend backend) {
  for (Backend b : backends()) {
    if (b == backend) return true;
  }
  return false;
}

Backend initial_backend() {
  if (const char* env = std::getenv("COLORSER_SIMD")) {
    const std::string requested(env);
    for (Backend b : backends()) {
      if (backend_name(b) == requested) return b;
    }
  }
  return backends().back();
}

std::atomic<const KernelTable*>& active_table() {
  static std::atomic<const KernelTable*> table{&kernels_for(initial_backend())};
  return table;
}

std::atomic<Backend>& active_tag() {
  static std::atomic<Backend> tag{initial_backend()};
  return tag;
}

}  // namespace

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "unknown";
}

std::span<const Backend> available_backends() { return backends(); }

Backend active_backend() { return active_tag().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (!is_available(backend)) {
    throw ValidationError("SIMD backend not available: " + std::string(backend_name(backend)));
  }
  active_table().store(&kernels_for(backend), std::memory_order_relaxed);
  active_tag().store(backend, std::memory_order_relaxed);
}

const KernelTable& kernels_for(Backend backend) {
  switch (backend) {
#if defined(COLORSER_HAVE_AVX2)
    case Backend::avx2: return detail::avx2_kernels();
#endif
#if defined(COLORSER_HAVE_NEON)
    case Backend::neon: return detail::neon_kernels();
#endif
    default: return detail::scalar_kernels();
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("dot: length mismatch");
  return active_table().load(std::memory_order_relaxed)->dot(a.data(), b.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("squared_distance: length mismatch");
  return active_table().load(std::memory_order_relaxed)->squared_distance(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ValidationError("axpy: length mismatch");
  active_table().load(std::memory_order_relaxed)->axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace colorser::simd
