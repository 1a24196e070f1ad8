#include "lba/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace lba::kernels {

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

namespace {

const KernelTable* select() {
    const char* env = std::getenv("LBA_SODKIT_KERNELS");
#if defined(__x86_64__) || defined(_M_X64)
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0) return &kScalar;
        if (std::strcmp(env, "avx2") == 0 && avx2_available()) return &kAvx2;
    }
    if (avx2_available()) return &kAvx2;
#else
    (void)env;
#endif
    return &kScalar;
}

} // namespace

const KernelTable& active() {
    static const KernelTable* table = select();
    return *table;
}

std::size_t variant_count() {
#if defined(__x86_64__) || defined(_M_X64)
    return avx2_available() ? 2 : 1;
#else
    return 1;
#endif
}

const KernelTable& variant(std::size_t i) {
#if defined(__x86_64__) || defined(_M_X64)
    if (i == 1 && avx2_available()) return kAvx2;
#endif
    (void)i;
    return kScalar;
}

} // namespace lba::kernels
