#pragma once

// Even-odd point-in-polygon kernels used by zonal population sums.
//
// Every variant toggles `inside[k]` once per ring edge crossed by a ray cast
// from point k towards +x, so calling it for several rings of one polygon
// yields even-odd membership with holes. The scalar kernel is the reference;
// vector variants must produce identical bytes.

#include <cstdint>
#include <span>
#include <string_view>

namespace modeshare::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// Best variant supported by both the build and the running CPU.
Isa detected_isa();

/// detected_isa(), unless MODESHARE_ISA=scalar forces the reference path.
Isa active_isa();

bool isa_available(Isa isa);

/// Ring given as parallel vertex arrays (x = lon, y = lat). A trailing vertex
/// equal to the first is harmless.
struct RingView {
    std::span<const double> xs;
    std::span<const double> ys;
};

void toggle_crossings_scalar(std::span<const double> px, std::span<const double> py, RingView ring,
                             std::span<std::uint8_t> inside);

#if defined(MODESHARE_HAVE_AVX2)
void toggle_crossings_avx2(std::span<const double> px, std::span<const double> py, RingView ring,
                           std::span<std::uint8_t> inside);
#endif

/// Dispatches to the requested variant; falls back to scalar when unavailable.
void toggle_crossings(std::span<const double> px, std::span<const double> py, RingView ring,
                      std::span<std::uint8_t> inside, Isa isa);

}  // namespace modeshare::kernels
