#pragma once

#include "modeshare/geo.hpp"
#include "modeshare/kernels/point_in_polygon.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace modeshare::dataset {

enum class CityRole { training, demo };
enum class SurveyScope { all_trips, commuting };

std::string_view to_string(CityRole role);
std::string_view to_string(SurveyScope scope);

/// One city's survey data. Shares are proportions in (0,1).
struct CityRecord {
    std::string city_id;
    std::string name;
    std::string country;
    CityRole role = CityRole::training;
    std::optional<double> cycle_share;
    std::optional<double> motorcycle_share;
    std::optional<int> survey_year;
    SurveyScope survey_scope = SurveyScope::all_trips;
    double population = 0.0;
    double area_km2 = 0.0;
    double pop_density = 0.0;

    friend bool operator==(const CityRecord&, const CityRecord&) = default;
};

/// Header of the city table file, in canonical column order.
inline constexpr std::string_view kCityTableHeader =
    "city_id,name,country,role,cycle_share_pct,motorcycle_share_pct,survey_year,survey_scope,population,area_km2";

std::vector<CityRecord> parse_city_table(std::string_view text);
std::vector<CityRecord> load_city_table(const std::filesystem::path& path);

/// Serialize records back to the city table format (shares in percent).
std::string format_city_table(const std::vector<CityRecord>& records);

/// Parse a survey year field: "2017", or a range "2015-2018" whose arithmetic
/// mean is rounded to the nearest year.
std::optional<int> parse_survey_year(std::string_view field);

/// Scale a commuting-only share to an all-trips share. Throws RangeError when
/// the input or the result leaves (0,1).
double adjust_commute_share(double share, double factor = 0.72);

/// Per-country commuting scale factors with a fallback.
struct CommuteFactors {
    double default_factor = 0.72;
    std::map<std::string, double> by_country;

    double factor_for(const std::string& country) const;
};

/// Adjust every commuting-scope record to all-trips using `factors`.
/// Adjusted records are relabelled all_trips, so applying twice is a no-op.
std::vector<CityRecord> apply_commute_adjustment(std::vector<CityRecord> records,
                                                 const CommuteFactors& factors);

struct PopulationCell {
    double lat = 0.0;
    double lon = 0.0;
    double population = 0.0;
};

struct PopulationGrid {
    double cell_size_m = 250.0;
    std::vector<PopulationCell> cells;
};

/// CSV `lat,lon,population` preceded by a `# cell_size_m=<metres>` line.
PopulationGrid parse_population_grid(std::string_view text);
PopulationGrid load_population_grid(const std::filesystem::path& path);

/// One polygon: the first ring is the exterior, further rings are holes.
struct Polygon {
    std::vector<std::vector<geo::LatLon>> rings;
};

struct Boundary {
    std::vector<Polygon> polygons;
    double area_km2 = 0.0;
};

/// Build a boundary, validating closed rings and computing spherical area.
Boundary make_boundary(std::vector<Polygon> polygons);

/// Accepts a GeoJSON Polygon or MultiPolygon geometry, Feature, or
/// FeatureCollection. Coordinates are [lon, lat].
Boundary parse_boundary_geojson(std::string_view text);
Boundary load_boundary(const std::filesystem::path& path);

/// Even-odd membership of each point in the boundary (1 = inside).
std::vector<std::uint8_t> points_inside(const Boundary& boundary, std::span<const double> lats,
                                        std::span<const double> lons,
                                        kernels::Isa isa = kernels::active_isa());

/// Persons per km²: population of cells whose centroid lies inside the
/// boundary, divided by the boundary area.
double compute_population_density(const PopulationGrid& grid, const Boundary& boundary,
                                  kernels::Isa isa = kernels::active_isa());

}  // namespace modeshare::dataset
