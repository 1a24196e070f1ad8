#pragma once

#include <cstddef>
#include <string>

// Hot inner-loop kernels over contiguous double spans. A scalar reference
// implementation always exists; an AVX2 variant is selected at process start
// when the CPU supports it. Selection can be forced with the environment
// variable LBA_SODKIT_KERNELS=scalar|avx2|auto.
//
// Elementwise kernels (add/sub/mul/scale/axpy/relu/maxv) are bit-identical
// between variants: lanes never interact and the AVX2 code uses plain
// mul+add (no FMA). Reductions (dot/sum/sumsq_shift) reassociate the sum and
// may differ from scalar in the last ulps; callers treat them as approximate.

namespace lba::kernels {

struct KernelTable {
    const char* name;

    void (*add)(double* out, const double* a, const double* b, std::size_t n);
    void (*sub)(double* out, const double* a, const double* b, std::size_t n);
    void (*mul)(double* out, const double* a, const double* b, std::size_t n);
    void (*add_scalar)(double* out, const double* a, double s, std::size_t n);
    void (*mul_scalar)(double* out, const double* a, double s, std::size_t n);
    // y[i] += a * x[i]
    void (*axpy)(double* y, const double* x, double a, std::size_t n);
    void (*relu)(double* out, const double* a, std::size_t n);
    // out[i] = max(out[i], a[i])
    void (*maxv)(double* out, const double* a, std::size_t n);

    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* a, std::size_t n);
    // sum of (a[i] - shift)^2
    double (*sumsq_shift)(const double* a, double shift, std::size_t n);
};

extern const KernelTable kScalar;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable kAvx2;
#endif

// Table selected at startup (cpuid + env override). Stable for the process
// lifetime, so repeated runs on one machine are bit-identical.
const KernelTable& active();

bool avx2_available();

// Names of all compiled-in variants, for tests.
std::size_t variant_count();
const KernelTable& variant(std::size_t i);

} // namespace lba::kernels
