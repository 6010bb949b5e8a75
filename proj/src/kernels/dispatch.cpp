#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "faceqa/kernels.hpp"

namespace faceqa::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(FACEQA_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* initial_table() {
    const char* env = std::getenv("FACEQA_KERNELS");
    if (env != nullptr) {
        const std::string choice(env);
        if (choice == "scalar") return &scalar_table();
        if (choice == "avx2" && available(Isa::Avx2)) return &table(Isa::Avx2);
    }
    return available(Isa::Avx2) ? &table(Isa::Avx2) : &scalar_table();
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> t{initial_table()};
    return t;
}

}  // namespace

std::string_view to_string(Isa isa) {
    return isa == Isa::Avx2 ? "avx2" : "scalar";
}

bool available(Isa isa) {
    if (isa == Isa::Scalar) return true;
    static const bool avx2 = cpu_has_avx2();
    return avx2;
}

const KernelTable& table(Isa isa) {
    if (!available(isa)) {
        throw std::invalid_argument("kernel ISA not available: " + std::string(to_string(isa)));
    }
#if defined(FACEQA_HAVE_AVX2)
    if (isa == Isa::Avx2) return avx2_table();
#endif
    return scalar_table();
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Isa isa) { current().store(&table(isa), std::memory_order_release); }

}  // namespace faceqa::kernels
