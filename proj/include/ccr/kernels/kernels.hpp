#pragma once

#include <cstddef>
#include <string>

namespace ccr::kernels {

// Dense f64 vector kernels used by the tape's inner loops. Every entry has a
// scalar reference implementation; the AVX2 table is selected at runtime when
// the CPU supports it. Elementwise kernels are bit-identical across tables;
// reductions (dot, sum, l1norm, sqnorm) may differ by rounding because the
// SIMD variants re-associate the accumulation.
struct Kernels {
  const char* name;

  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*l1norm)(const double* x, std::size_t n);
  double (*sqnorm)(const double* x, std::size_t n);

  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  void (*add)(const double* x, const double* y, double* out, std::size_t n);
  void (*sub)(const double* x, const double* y, double* out, std::size_t n);
  void (*mul)(const double* x, const double* y, double* out, std::size_t n);
  void (*scale)(double a, const double* x, double* out, std::size_t n);
  void (*relu)(const double* x, double* out, std::size_t n);
  // gx += gy * 1[x > 0]
  void (*relu_bwd)(const double* x, const double* gy, double* gx, std::size_t n);

  // Fused Adam update: m,v moments in place, p -= lr * mhat / (sqrt(vhat)+eps).
  // bias1 = 1-beta1^t, bias2 = 1-beta2^t are precomputed by the caller.
  void (*adam_update)(double* p, const double* g, double* m, double* v, std::size_t n,
                      double lr, double beta1, double beta2, double eps,
                      double bias1, double bias2);
};

const Kernels& scalar();

// nullptr when this build/CPU cannot run AVX2+FMA.
const Kernels* avx2();

// The table every caller should use. Honors the CCR_KERNELS env var
// ("scalar" or "avx2") and any force() override; otherwise picks the best
// table the CPU supports.
const Kernels& active();

// Test hook: "auto", "scalar" or "avx2". Throws if the request cannot be met.
void force(const std::string& which);

}  // namespace ccr::kernels
