#include "modeshare/kernels/point_in_polygon.hpp"

#include <cassert>
#include <cstdlib>
#include <cstring>

namespace modeshare::kernels {

std::string_view isa_name(Isa isa) {
    switch (isa) {
    case Isa::scalar:
        return "scalar";
    case Isa::avx2:
        return "avx2";
    }
    return "unknown";
}

bool isa_available(Isa isa) {
    switch (isa) {
    case Isa::scalar:
        return true;
    case Isa::avx2:
#if defined(MODESHARE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
        return __builtin_cpu_supports("avx2");
#else
        return false;
#endif
    }
    return false;
}

Isa detected_isa() {
    static const Isa isa = isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
    return isa;
}

Isa active_isa() {
    const char* forced = std::getenv("MODESHARE_ISA");
    if (forced != nullptr && std::strcmp(forced, "scalar") == 0) {
        return Isa::scalar;
    }
    return detected_isa();
}

void toggle_crossings_scalar(std::span<const double> px, std::span<const double> py, RingView ring,
                             std::span<std::uint8_t> inside) {
    assert(px.size() == py.size() && px.size() == inside.size());
    assert(ring.xs.size() == ring.ys.size());
    const std::size_t nv = ring.xs.size();
    if (nv < 2) {
        return;
    }
    for (std::size_t k = 0; k < px.size(); ++k) {
        const double x = px[k];
        const double y = py[k];
        std::uint8_t acc = inside[k];
        for (std::size_t i = 0, j = nv - 1; i < nv; j = i++) {
            const double xi = ring.xs[i];
            const double yi = ring.ys[i];
            const double xj = ring.xs[j];
            const double yj = ring.ys[j];
            if ((yi > y) != (yj > y)) {
                const double cross_x = (xj - xi) * (y - yi) / (yj - yi) + xi;
                if (x < cross_x) {
                    acc ^= 1U;
                }
            }
        }
        inside[k] = acc;
    }
}

void toggle_crossings(std::span<const double> px, std::span<const double> py, RingView ring,
                      std::span<std::uint8_t> inside, Isa isa) {
#if defined(MODESHARE_HAVE_AVX2)
    if (isa == Isa::avx2 && isa_available(Isa::avx2)) {
        toggle_crossings_avx2(px, py, ring, inside);
        return;
    }
#else
    (void)isa;
#endif
    toggle_crossings_scalar(px, py, ring, inside);
}

}  // namespace modeshare::kernels
