#pragma once

#include <span>
#include <vector>

namespace modeshare::geo {

/// Mean Earth radius (IUGG), metres.
inline constexpr double kEarthRadiusM = 6371008.8;

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;
    friend bool operator==(const LatLon&, const LatLon&) = default;
};

bool valid(const LatLon& p);

/// Great-circle distance on the mean-radius sphere, metres.
double haversine(const LatLon& a, const LatLon& b);

/// Unsigned area of a closed ring on the sphere, km². The ring may repeat its
/// first vertex at the end; orientation is ignored.
double ring_area_km2(std::span<const LatLon> ring);

/// Arc length of a polyline, metres.
double polyline_length(std::span<const LatLon> line);

/// Point at `offset_m` along a polyline; offsets past the end clamp to the last vertex.
LatLon point_along(std::span<const LatLon> line, double offset_m);

}  // namespace modeshare::geo
