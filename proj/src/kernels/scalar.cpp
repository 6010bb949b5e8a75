#include "faceqa/kernels.hpp"

namespace faceqa::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

Moments moments_scalar(const float* v, std::size_t n) {
    Moments m;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = v[i];
        m.sum += x;
        m.sum_sq += x * x;
    }
    return m;
}

void laplacian_row_scalar(const float* up, const float* mid, const float* down, float* out,
                          std::size_t n) {
    if (n < 3) return;
    for (std::size_t k = 0; k + 2 < n; ++k) {
        const float vertical = up[k + 1] + down[k + 1];
        const float horizontal = mid[k] + mid[k + 2];
        out[k] = (vertical + horizontal) - 4.0f * mid[k + 1];
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable t{Isa::Scalar,       dot_scalar,     axpy_scalar,
                               squared_distance_scalar, moments_scalar, laplacian_row_scalar};
    return t;
}

}  // namespace faceqa::kernels
