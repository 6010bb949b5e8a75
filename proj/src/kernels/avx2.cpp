// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "faceqa/kernels.hpp"

#include <immintrin.h>

namespace faceqa::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double sum = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));  // no fma: must match scalar bit for bit
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

double squared_distance_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
        acc0 = _mm256_fmadd_pd(d0, d0, acc0);
        acc1 = _mm256_fmadd_pd(d1, d1, acc1);
    }
    for (; i + 4 <= n; i += 4) {
        __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    }
    double sum = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

Moments moments_avx2(const float* v, std::size_t n) {
    __m256d sum = _mm256_setzero_pd();
    __m256d sum_sq = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d x = _mm256_cvtps_pd(_mm_loadu_ps(v + i));
        sum = _mm256_add_pd(sum, x);
        sum_sq = _mm256_fmadd_pd(x, x, sum_sq);
    }
    Moments m{hsum(sum), hsum(sum_sq)};
    for (; i < n; ++i) {
        const double x = v[i];
        m.sum += x;
        m.sum_sq += x * x;
    }
    return m;
}

void laplacian_row_avx2(const float* up, const float* mid, const float* down, float* out,
                        std::size_t n) {
    if (n < 3) return;
    const std::size_t count = n - 2;
    const __m256 four = _mm256_set1_ps(4.0f);
    std::size_t k = 0;
    // Same operation order as the scalar kernel and no FMA, so results are bit-identical.
    for (; k + 8 <= count; k += 8) {
        __m256 vertical = _mm256_add_ps(_mm256_loadu_ps(up + k + 1), _mm256_loadu_ps(down + k + 1));
        __m256 horizontal = _mm256_add_ps(_mm256_loadu_ps(mid + k), _mm256_loadu_ps(mid + k + 2));
        __m256 center = _mm256_mul_ps(four, _mm256_loadu_ps(mid + k + 1));
        _mm256_storeu_ps(out + k, _mm256_sub_ps(_mm256_add_ps(vertical, horizontal), center));
    }
    for (; k < count; ++k) {
        const float vertical = up[k + 1] + down[k + 1];
        const float horizontal = mid[k] + mid[k + 2];
        out[k] = (vertical + horizontal) - 4.0f * mid[k + 1];
    }
}

}  // namespace

const KernelTable& avx2_table() {
    static const KernelTable t{Isa::Avx2,         dot_avx2,     axpy_avx2,
                               squared_distance_avx2, moments_avx2, laplacian_row_avx2};
    return t;
}

}  // namespace faceqa::kernels
