#include "modeshare/sampler.hpp"

#include "modeshare/error.hpp"
#include "modeshare/io.hpp"
#include "modeshare/parallel.hpp"
#include "modeshare/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

namespace modeshare::sampler {
namespace {

using nlohmann::json;

std::string format_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.7f", v);
    return buf;
}

std::vector<geo::LatLon> parse_line(const json& coords) {
    std::vector<geo::LatLon> line;
    for (const auto& pt : coords) {
        if (!pt.is_array() || pt.size() < 2 || !pt[0].is_number() || !pt[1].is_number()) {
            throw Error("road network: vertex must be [lon, lat]");
        }
        line.push_back({pt[1].get<double>(), pt[0].get<double>()});
    }
    return line;
}

}  // namespace

RoadNetwork make_network(std::vector<RoadEdge> edges) {
    std::set<std::string> ids;
    for (const auto& e : edges) {
        if (e.polyline.size() < 2) {
            throw Error("road edge '" + e.edge_id + "' has fewer than 2 vertices");
        }
        for (const auto& p : e.polyline) {
            if (!geo::valid(p)) {
                throw Error("road edge '" + e.edge_id + "' has a vertex outside WGS84 range");
            }
        }
        if (!(geo::polyline_length(e.polyline) > 0.0)) {
            throw Error("road edge '" + e.edge_id + "' has zero length");
        }
        if (!ids.insert(e.edge_id).second) {
            throw Error("duplicate road edge id '" + e.edge_id + "'");
        }
    }
    return RoadNetwork{std::move(edges)};
}

RoadNetwork parse_road_network_geojson(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("road network: invalid JSON: ") + e.what());
    }
    std::vector<RoadEdge> edges;
    try {
        if (doc.value("type", "") != "FeatureCollection") {
            throw Error("road network must be a GeoJSON FeatureCollection");
        }
        for (const auto& f : doc.at("features")) {
            const auto& geom = f.at("geometry");
            if (geom.value("type", "") != "LineString") {
                throw Error("road network features must be LineString geometries");
            }
            const auto& props = f.at("properties");
            if (!props.contains("edge_id")) {
                throw SchemaError("edge_id", "road network feature without 'edge_id' property");
            }
            const auto& id = props.at("edge_id");
            RoadEdge edge;
            edge.edge_id = id.is_string() ? id.get<std::string>() : id.dump();
            edge.polyline = parse_line(geom.at("coordinates"));
            edges.push_back(std::move(edge));
        }
    } catch (const json::exception& e) {
        throw Error(std::string("road network: malformed GeoJSON: ") + e.what());
    }
    return make_network(std::move(edges));
}

RoadNetwork load_road_network(const std::filesystem::path& path) {
    return parse_road_network_geojson(io::read_text(path));
}

std::vector<SamplePoint> candidate_points(const RoadNetwork& network, const SamplingOptions& opts) {
    if (network.edges.empty()) {
        throw Error("road network is empty");
    }
    if (!(opts.spacing_m >= kMinSpacingM && opts.spacing_m <= kMaxSpacingM)) {
        throw RangeError("spacing_m must lie in [20,100], got " + io::format_double(opts.spacing_m));
    }
    if (opts.start_offset_m && !(*opts.start_offset_m >= 0.0 && *opts.start_offset_m < opts.spacing_m)) {
        throw RangeError("start offset must lie in [0, spacing)");
    }

    Rng rng(opts.seed);
    std::vector<SamplePoint> out;
    for (const auto& edge : network.edges) {
        const double length = geo::polyline_length(edge.polyline);
        // drawn for every edge so the stream does not depend on edge lengths
        const double drawn = rng.uniform() * opts.spacing_m;
        const double first = opts.start_offset_m.value_or(drawn);

        auto emit = [&](std::size_t k, double offset) {
            const geo::LatLon p = geo::point_along(edge.polyline, offset);
            out.push_back({edge.edge_id + ":" + std::to_string(k), p.lat, p.lon, edge.edge_id, offset});
        };

        if (length < opts.spacing_m) {
            emit(0, length / 2.0);
            continue;
        }
        for (std::size_t k = 0;; ++k) {
            const double offset = first + static_cast<double>(k) * opts.spacing_m;
            if (offset >= length) {
                break;
            }
            emit(k, offset);
        }
    }
    return out;
}

std::vector<SamplePoint> sample_points(const RoadNetwork& network, const SamplingOptions& opts) {
    std::vector<SamplePoint> candidates = candidate_points(network, opts);
    if (candidates.size() <= opts.max_points) {
        return candidates;
    }
    // independent stream for selection so offsets stay fixed when max_points changes
    Rng rng(opts.seed ^ 0x9E3779B97F4A7C15ULL);
    std::vector<std::size_t> idx(candidates.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < opts.max_points; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(opts.max_points);
    std::sort(idx.begin(), idx.end());

    std::vector<SamplePoint> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) {
        out.push_back(std::move(candidates[i]));
    }
    return out;
}

std::vector<ImageRequest> plan_requests(const std::vector<SamplePoint>& points) {
    std::vector<ImageRequest> out;
    out.reserve(points.size() * 4);
    for (const auto& p : points) {
        for (int heading : kHeadings) {
            ImageRequest r;
            r.point_id = p.point_id;
            r.lat = p.lat;
            r.lon = p.lon;
            r.heading = heading;
            out.push_back(std::move(r));
        }
    }
    return out;
}

FixtureMetadataClient::FixtureMetadataClient(std::vector<ImageMetadata> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(),
              [](const ImageMetadata& a, const ImageMetadata& b) { return a.point_id < b.point_id; });
    auto dup = std::adjacent_find(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
        return a.point_id == b.point_id;
    });
    if (dup != entries_.end()) {
        throw ConsistencyError("metadata fixture lists point '" + dup->point_id + "' twice");
    }
}

FixtureMetadataClient FixtureMetadataClient::parse(std::string_view text) {
    const io::CsvTable table = io::parse_csv(text);
    const std::size_t c_id = table.require("point_id");
    const std::size_t c_avail = table.require("available");
    const std::size_t c_year = table.require("capture_year");
    const std::size_t c_month = table.require("capture_month");
    std::vector<ImageMetadata> entries;
    for (const auto& row : table.rows()) {
        ImageMetadata m;
        m.point_id = row.fields[c_id];
        const std::string& a = row.fields[c_avail];
        if (a == "true" || a == "1") {
            m.available = true;
        } else if (a == "false" || a == "0") {
            m.available = false;
        } else {
            throw RowError(row.line, "available must be true/false, got '" + a + "'");
        }
        if (m.available) {
            if (!row.fields[c_year].empty()) {
                auto y = io::parse_int(row.fields[c_year]);
                if (!y) {
                    throw RowError(row.line, "bad capture_year");
                }
                m.capture_year = static_cast<int>(*y);
            }
            if (!row.fields[c_month].empty()) {
                auto mo = io::parse_int(row.fields[c_month]);
                if (!mo || *mo < 1 || *mo > 12) {
                    throw RowError(row.line, "capture_month must be 1-12");
                }
                m.capture_month = static_cast<int>(*mo);
            }
        } else if (!row.fields[c_year].empty() || !row.fields[c_month].empty()) {
            throw RowError(row.line, "capture date given for an unavailable image");
        }
        entries.push_back(std::move(m));
    }
    return FixtureMetadataClient(std::move(entries));
}

FixtureMetadataClient FixtureMetadataClient::load(const std::filesystem::path& path) {
    return parse(io::read_text(path));
}

ImageMetadata FixtureMetadataClient::query(const SamplePoint& point) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), point.point_id,
                               [](const ImageMetadata& m, const std::string& id) { return m.point_id < id; });
    if (it == entries_.end() || it->point_id != point.point_id) {
        throw ConsistencyError("metadata fixture has no entry for point '" + point.point_id + "'");
    }
    return *it;
}

ImageMetadata parse_metadata_response(const std::string& point_id, std::string_view body) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception&) {
        throw TransportError(point_id, "metadata response is not JSON");
    }
    const std::string status = doc.value("status", "");
    ImageMetadata m;
    m.point_id = point_id;
    if (status == "ZERO_RESULTS" || status == "NOT_FOUND") {
        return m;
    }
    if (status != "OK") {
        throw TransportError(point_id, "metadata status '" + status + "'");
    }
    m.available = true;
    const std::string date = doc.value("date", "");
    if (!date.empty()) {
        auto dash = date.find('-');
        auto y = io::parse_int(std::string_view(date).substr(0, dash));
        if (y) {
            m.capture_year = static_cast<int>(*y);
        }
        if (dash != std::string::npos) {
            auto mo = io::parse_int(std::string_view(date).substr(dash + 1));
            if (mo && *mo >= 1 && *mo <= 12) {
                m.capture_month = static_cast<int>(*mo);
            }
        }
    }
    return m;
}

AvailabilityResult filter_by_availability(const std::vector<SamplePoint>& points, const MetadataClient& client,
                                          std::size_t workers) {
    AvailabilityResult res;
    res.metadata.resize(points.size());
    parallel_for(points.size(), workers, [&](std::size_t i) { res.metadata[i] = client.query(points[i]); });
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (res.metadata[i].point_id != points[i].point_id) {
            throw ConsistencyError("metadata client answered '" + res.metadata[i].point_id + "' for point '" +
                                   points[i].point_id + "'");
        }
        if (res.metadata[i].available) {
            res.kept.push_back(points[i]);
        }
    }
    return res;
}

std::string format_points_csv(const std::vector<SamplePoint>& points) {
    std::string out = "point_id,lat,lon,edge_id,offset_m\n";
    for (const auto& p : points) {
        out += io::csv_join({p.point_id, format_coord(p.lat), format_coord(p.lon), p.edge_id,
                             io::format_double(p.offset_m)});
        out.push_back('\n');
    }
    return out;
}

std::string format_requests_csv(const std::vector<ImageRequest>& requests) {
    std::string out = "point_id,lat,lon,heading,fov,pitch,width,height\n";
    for (const auto& r : requests) {
        out += io::csv_join({r.point_id, format_coord(r.lat), format_coord(r.lon), std::to_string(r.heading),
                             std::to_string(r.fov), std::to_string(r.pitch), std::to_string(r.width),
                             std::to_string(r.height)});
        out.push_back('\n');
    }
    return out;
}

std::string format_metadata_csv(const std::vector<ImageMetadata>& metadata) {
    std::string out = "point_id,available,capture_year,capture_month\n";
    for (const auto& m : metadata) {
        out += io::csv_join({m.point_id, m.available ? "true" : "false",
                             m.capture_year ? std::to_string(*m.capture_year) : "",
                             m.capture_month ? std::to_string(*m.capture_month) : ""});
        out.push_back('\n');
    }
    return out;
}

}  // namespace modeshare::sampler
