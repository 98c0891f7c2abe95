#include "modeshare/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace modeshare::geo {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

bool valid(const LatLon& p) {
    return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
           p.lon >= -180.0 && p.lon <= 180.0;
}

double haversine(const LatLon& a, const LatLon& b) {
    const double phi1 = a.lat * kDegToRad;
    const double phi2 = b.lat * kDegToRad;
    const double dphi = (b.lat - a.lat) * kDegToRad;
    const double dlambda = (b.lon - a.lon) * kDegToRad;
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlambda / 2.0);
    const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kEarthRadiusM * std::asin(std::sqrt(std::min(1.0, h)));
}

double ring_area_km2(std::span<const LatLon> ring) {
    std::size_t n = ring.size();
    if (n > 1 && ring.front() == ring.back()) {
        --n;
    }
    if (n < 3) {
        return 0.0;
    }
    // sum of (lon2 - lon1) * (2 + sin lat1 + sin lat2) over edges
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const LatLon& p1 = ring[i];
        const LatLon& p2 = ring[(i + 1) % n];
        total += (p2.lon - p1.lon) * kDegToRad *
                 (2.0 + std::sin(p1.lat * kDegToRad) + std::sin(p2.lat * kDegToRad));
    }
    const double area_m2 = std::abs(total) * kEarthRadiusM * kEarthRadiusM / 2.0;
    return area_m2 / 1.0e6;
}

double polyline_length(std::span<const LatLon> line) {
    double len = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i) {
        len += haversine(line[i - 1], line[i]);
    }
    return len;
}

LatLon point_along(std::span<const LatLon> line, double offset_m) {
    if (line.empty()) {
        return {};
    }
    double walked = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i) {
        const double seg = haversine(line[i - 1], line[i]);
        if (seg > 0.0 && offset_m <= walked + seg) {
            const double t = std::max(0.0, (offset_m - walked) / seg);
            return {line[i - 1].lat + t * (line[i].lat - line[i - 1].lat),
                    line[i - 1].lon + t * (line[i].lon - line[i - 1].lon)};
        }
        walked += seg;
    }
    return line.back();
}

}  // namespace modeshare::geo
