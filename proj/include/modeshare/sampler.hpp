#pragma once

#include "modeshare/geo.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace modeshare::sampler {

struct RoadEdge {
    std::string edge_id;
    std::vector<geo::LatLon> polyline;
};

struct RoadNetwork {
    std::vector<RoadEdge> edges;
};

/// Validates every edge (>= 2 vertices, positive length, unique id).
RoadNetwork make_network(std::vector<RoadEdge> edges);

/// GeoJSON FeatureCollection of LineString features carrying an `edge_id`
/// property (string or integer).
RoadNetwork parse_road_network_geojson(std::string_view text);
RoadNetwork load_road_network(const std::filesystem::path& path);

struct SamplePoint {
    std::string point_id;
    double lat = 0.0;
    double lon = 0.0;
    std::string edge_id;
    double offset_m = 0.0;

    friend bool operator==(const SamplePoint&, const SamplePoint&) = default;
};

struct SamplingOptions {
    double spacing_m = 50.0;
    std::size_t max_points = 2000;
    std::uint64_t seed = 1;
    /// Fixed first offset on every edge. When unset, each edge draws its own
    /// offset uniformly from [0, spacing) using the seeded stream.
    std::optional<double> start_offset_m;
};

inline constexpr double kMinSpacingM = 20.0;
inline constexpr double kMaxSpacingM = 100.0;

/// All candidate points before subsampling, in edge order.
std::vector<SamplePoint> candidate_points(const RoadNetwork& network, const SamplingOptions& opts);

/// Candidates subsampled to at most `max_points` by a seeded partial
/// Fisher-Yates draw. Returned points keep network order.
std::vector<SamplePoint> sample_points(const RoadNetwork& network, const SamplingOptions& opts);

struct ImageRequest {
    std::string point_id;
    double lat = 0.0;
    double lon = 0.0;
    int heading = 0;
    int fov = 90;
    int pitch = 0;
    int width = 640;
    int height = 640;

    friend bool operator==(const ImageRequest&, const ImageRequest&) = default;
};

inline constexpr int kHeadings[4] = {0, 90, 180, 270};

/// Four requests per point, one per compass heading.
std::vector<ImageRequest> plan_requests(const std::vector<SamplePoint>& points);

struct ImageMetadata {
    std::string point_id;
    bool available = false;
    std::optional<int> capture_year;
    std::optional<int> capture_month;

    friend bool operator==(const ImageMetadata&, const ImageMetadata&) = default;
};

/// Source of image-availability answers. Implementations must tolerate
/// concurrent calls.
class MetadataClient {
public:
    virtual ~MetadataClient() = default;
    /// Throws TransportError on a backend failure.
    virtual ImageMetadata query(const SamplePoint& point) const = 0;
};

/// Offline client answering from a fixture CSV
/// `point_id,available,capture_year,capture_month`.
class FixtureMetadataClient final : public MetadataClient {
public:
    explicit FixtureMetadataClient(std::vector<ImageMetadata> entries);
    static FixtureMetadataClient parse(std::string_view text);
    static FixtureMetadataClient load(const std::filesystem::path& path);

    ImageMetadata query(const SamplePoint& point) const override;
    const std::vector<ImageMetadata>& entries() const { return entries_; }

private:
    std::vector<ImageMetadata> entries_;  // sorted by point_id
};

struct LiveClientOptions {
    std::string base_url = "https://maps.googleapis.com";
    std::string path = "/maps/api/streetview/metadata";
    std::string api_key;
    int timeout_s = 10;
};

/// Client for the street-view metadata HTTP endpoint. The key is read from
/// SV_API_KEY when not given explicitly.
class HttpMetadataClient final : public MetadataClient {
public:
    explicit HttpMetadataClient(LiveClientOptions opts);
    static HttpMetadataClient from_environment(LiveClientOptions opts = {});

    ImageMetadata query(const SamplePoint& point) const override;

    /// Request target (path and query string) for a point.
    std::string request_target(const SamplePoint& point) const;

private:
    LiveClientOptions opts_;
};

/// Decode one metadata endpoint JSON response. Statuses OK, ZERO_RESULTS and
/// NOT_FOUND are answers; anything else raises TransportError.
ImageMetadata parse_metadata_response(const std::string& point_id, std::string_view body);

struct AvailabilityResult {
    std::vector<SamplePoint> kept;
    std::vector<ImageMetadata> metadata;  // one per input point, input order
};

/// Query every point (up to `workers` concurrent calls) and keep those with
/// an available image, preserving input order.
AvailabilityResult filter_by_availability(const std::vector<SamplePoint>& points, const MetadataClient& client,
                                          std::size_t workers = 1);

std::string format_points_csv(const std::vector<SamplePoint>& points);
std::string format_requests_csv(const std::vector<ImageRequest>& requests);
std::string format_metadata_csv(const std::vector<ImageMetadata>& metadata);

}  // namespace modeshare::sampler
