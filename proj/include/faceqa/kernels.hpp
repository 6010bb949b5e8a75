#pragma once

// Arithmetic inner loops shared by the image statistics, the embedding
// projections and the regression head. Each kernel has a scalar reference
// and an AVX2 variant; the active table is chosen once at startup from the
// CPU features, or forced with FACEQA_KERNELS=scalar|avx2.

#include <cstddef>
#include <span>
#include <string_view>

namespace faceqa::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);

struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
};

struct KernelTable {
    Isa isa;
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    double (*squared_distance)(const double* a, const double* b, std::size_t n);
    Moments (*moments)(const float* v, std::size_t n);
    // 4-neighbour Laplacian of the middle row, interior columns only:
    // out[k] = (up[k+1] + down[k+1]) + (mid[k] + mid[k+2]) - 4 * mid[k+1], k in [0, n-2)
    void (*laplacian_row)(const float* up, const float* mid, const float* down, float* out,
                          std::size_t n);
};

const KernelTable& scalar_table();
#if defined(FACEQA_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

bool available(Isa isa);
const KernelTable& table(Isa isa);

const KernelTable& active();
/// Overrides the dispatch decision. Throws std::invalid_argument if the ISA is unavailable.
void select(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    return active().squared_distance(a.data(), b.data(), a.size());
}

inline Moments moments(std::span<const float> v) { return active().moments(v.data(), v.size()); }

}  // namespace faceqa::kernels
