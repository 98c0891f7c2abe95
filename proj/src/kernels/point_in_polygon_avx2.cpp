#include "modeshare/kernels/point_in_polygon.hpp"

#include <immintrin.h>

#include <cassert>

namespace modeshare::kernels {

// Same operation order as the scalar kernel (sub, mul, div, add; no FMA) so
// the crossing abscissa rounds identically in every lane.
void toggle_crossings_avx2(std::span<const double> px, std::span<const double> py, RingView ring,
                           std::span<std::uint8_t> inside) {
    assert(px.size() == py.size() && px.size() == inside.size());
    const std::size_t nv = ring.xs.size();
    if (nv < 2) {
        return;
    }
    const std::size_t n = px.size();
    const std::size_t blocked = n - n % 4;

    for (std::size_t k = 0; k < blocked; k += 4) {
        const __m256d x = _mm256_loadu_pd(px.data() + k);
        const __m256d y = _mm256_loadu_pd(py.data() + k);
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t i = 0, j = nv - 1; i < nv; j = i++) {
            const __m256d xi = _mm256_set1_pd(ring.xs[i]);
            const __m256d yi = _mm256_set1_pd(ring.ys[i]);
            const __m256d xj = _mm256_set1_pd(ring.xs[j]);
            const __m256d yj = _mm256_set1_pd(ring.ys[j]);
            const __m256d above_i = _mm256_cmp_pd(yi, y, _CMP_GT_OQ);
            const __m256d above_j = _mm256_cmp_pd(yj, y, _CMP_GT_OQ);
            const __m256d straddle = _mm256_xor_pd(above_i, above_j);
            // lanes with yi == yj divide by zero here; straddle masks them out
            const __m256d num = _mm256_mul_pd(_mm256_sub_pd(xj, xi), _mm256_sub_pd(y, yi));
            const __m256d cross_x = _mm256_add_pd(_mm256_div_pd(num, _mm256_sub_pd(yj, yi)), xi);
            const __m256d left = _mm256_cmp_pd(x, cross_x, _CMP_LT_OQ);
            acc = _mm256_xor_pd(acc, _mm256_and_pd(straddle, left));
        }
        const int mask = _mm256_movemask_pd(acc);
        for (int lane = 0; lane < 4; ++lane) {
            inside[k + lane] ^= static_cast<std::uint8_t>((mask >> lane) & 1);
        }
    }
    if (blocked < n) {
        toggle_crossings_scalar(px.subspan(blocked), py.subspan(blocked), ring, inside.subspan(blocked));
    }
}

}  // namespace modeshare::kernels
