#pragma once

// Dense double-precision kernels used by the RBF kernel matrix and the MLP
// layers. Every kernel has a scalar reference implementation; vectorized
// variants are selected at runtime from what the CPU reports.

#include <span>
#include <string_view>

namespace colorser::simd {

enum class Backend { scalar, avx2, neon };

std::string_view backend_name(Backend backend);

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

/// Backends compiled into this build and supported by the running CPU.
std::span<const Backend> available_backends();

/// Backend in use. First call picks the widest available one unless the
/// COLORSER_SIMD environment variable names another (scalar, avx2, neon).
Backend active_backend();

/// Forces a backend for the whole process. Throws ValidationError if the
/// backend is not available.
void set_backend(Backend backend);

const KernelTable& kernels_for(Backend backend);

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

namespace detail {
const KernelTable& scalar_kernels();
#if defined(COLORSER_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif
#if defined(COLORSER_HAVE_NEON)
const KernelTable& neon_kernels();
#endif
}  // namespace detail

}  // namespace colorser::simd
