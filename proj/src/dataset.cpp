#include "modeshare/dataset.hpp"

#include "modeshare/error.hpp"
#include "modeshare/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace modeshare::dataset {
namespace {

using nlohmann::json;

std::optional<double> parse_share_pct(const io::CsvRow& row, std::size_t col, std::string_view name) {
    const std::string& field = row.fields[col];
    if (field.empty()) {
        return std::nullopt;
    }
    const auto share = io::parse_scaled(field, -2);
    if (!share) {
        throw RowError(row.line, std::string(name) + ": not a number: '" + field + "'");
    }
    if (!(*share > 0.0 && *share < 1.0)) {
        throw RowError(row.line, std::string(name) + " must lie strictly inside (0,100), got " + field);
    }
    return *share;
}

double parse_number(const io::CsvRow& row, std::size_t col, std::string_view name) {
    auto v = io::parse_double(row.fields[col]);
    if (!v) {
        throw RowError(row.line, std::string(name) + ": not a number: '" + row.fields[col] + "'");
    }
    return *v;
}

std::string format_pct(double share) { return io::format_scaled(share, 2); }

std::vector<geo::LatLon> parse_ring(const json& coords) {
    if (!coords.is_array()) {
        throw Error("boundary ring is not an array");
    }
    std::vector<geo::LatLon> ring;
    ring.reserve(coords.size());
    for (const auto& pt : coords) {
        if (!pt.is_array() || pt.size() < 2 || !pt[0].is_number() || !pt[1].is_number()) {
            throw Error("boundary vertex must be [lon, lat]");
        }
        ring.push_back({pt[1].get<double>(), pt[0].get<double>()});
    }
    return ring;
}

Polygon parse_polygon(const json& coords) {
    if (!coords.is_array() || coords.empty()) {
        throw Error("polygon has no rings");
    }
    Polygon poly;
    for (const auto& r : coords) {
        poly.rings.push_back(parse_ring(r));
    }
    return poly;
}

void collect_polygons(const json& node, std::vector<Polygon>& out) {
    const std::string type = node.value("type", "");
    if (type == "FeatureCollection") {
        for (const auto& f : node.at("features")) {
            collect_polygons(f, out);
        }
    } else if (type == "Feature") {
        collect_polygons(node.at("geometry"), out);
    } else if (type == "Polygon") {
        out.push_back(parse_polygon(node.at("coordinates")));
    } else if (type == "MultiPolygon") {
        for (const auto& p : node.at("coordinates")) {
            out.push_back(parse_polygon(p));
        }
    } else {
        throw Error("unsupported boundary geometry type '" + type + "'");
    }
}

}  // namespace

std::string_view to_string(CityRole role) {
    return role == CityRole::training ? "training" : "demo";
}

std::string_view to_string(SurveyScope scope) {
    return scope == SurveyScope::all_trips ? "all_trips" : "commuting";
}

std::optional<int> parse_survey_year(std::string_view field) {
    field = io::trim(field);
    if (field.empty()) {
        return std::nullopt;
    }
    auto dash = field.find('-', 1);
    if (dash == std::string_view::npos) {
        auto y = io::parse_int(field);
        if (!y) {
            throw Error("bad survey year '" + std::string(field) + "'");
        }
        return static_cast<int>(*y);
    }
    auto a = io::parse_int(field.substr(0, dash));
    auto b = io::parse_int(field.substr(dash + 1));
    if (!a || !b || *b < *a) {
        throw Error("bad survey year range '" + std::string(field) + "'");
    }
    return static_cast<int>(std::lround((static_cast<double>(*a) + static_cast<double>(*b)) / 2.0));
}

std::vector<CityRecord> parse_city_table(std::string_view text) {
    const io::CsvTable table = io::parse_csv(text);
    const std::size_t c_id = table.require("city_id");
    const std::size_t c_name = table.require("name");
    const std::size_t c_country = table.require("country");
    const std::size_t c_role = table.require("role");
    const std::size_t c_cycle = table.require("cycle_share_pct");
    const std::size_t c_motor = table.require("motorcycle_share_pct");
    const std::size_t c_year = table.require("survey_year");
    const std::size_t c_scope = table.require("survey_scope");
    const std::size_t c_pop = table.require("population");
    const std::size_t c_area = table.require("area_km2");

    std::vector<CityRecord> out;
    std::set<std::string> seen;
    for (const auto& row : table.rows()) {
        CityRecord rec;
        rec.city_id = row.fields[c_id];
        if (rec.city_id.empty()) {
            throw RowError(row.line, "empty city_id");
        }
        if (!seen.insert(rec.city_id).second) {
            throw RowError(row.line, "duplicate city_id '" + rec.city_id + "'");
        }
        rec.name = row.fields[c_name];
        rec.country = row.fields[c_country];

        const std::string& role = row.fields[c_role];
        if (role == "training") {
            rec.role = CityRole::training;
        } else if (role == "demo") {
            rec.role = CityRole::demo;
        } else {
            throw RowError(row.line, "role must be 'training' or 'demo', got '" + role + "'");
        }

        rec.cycle_share = parse_share_pct(row, c_cycle, "cycle_share_pct");
        rec.motorcycle_share = parse_share_pct(row, c_motor, "motorcycle_share_pct");
        if (rec.role == CityRole::training && !rec.cycle_share && !rec.motorcycle_share) {
            throw RowError(row.line, "training city has no mode share");
        }
        if (rec.role == CityRole::demo && rec.cycle_share && rec.motorcycle_share) {
            throw RowError(row.line, "demo city has both mode shares; mark it training");
        }

        try {
            rec.survey_year = parse_survey_year(row.fields[c_year]);
        } catch (const Error& e) {
            throw RowError(row.line, e.what());
        }

        const std::string& scope = row.fields[c_scope];
        if (scope.empty() || scope == "all_trips") {
            rec.survey_scope = SurveyScope::all_trips;
        } else if (scope == "commuting") {
            rec.survey_scope = SurveyScope::commuting;
        } else {
            throw RowError(row.line, "survey_scope must be 'all_trips' or 'commuting', got '" + scope + "'");
        }

        rec.population = parse_number(row, c_pop, "population");
        rec.area_km2 = parse_number(row, c_area, "area_km2");
        if (rec.population < 0.0) {
            throw RowError(row.line, "population must be non-negative");
        }
        if (!(rec.area_km2 > 0.0)) {
            throw RowError(row.line, "area_km2 must be positive");
        }
        rec.pop_density = rec.population / rec.area_km2;
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<CityRecord> load_city_table(const std::filesystem::path& path) {
    try {
        return parse_city_table(io::read_text(path));
    } catch (const RowError& e) {
        throw RowError(e.line(), path.string() + ": " + e.what());
    }
}

std::string format_city_table(const std::vector<CityRecord>& records) {
    std::string out(kCityTableHeader);
    out.push_back('\n');
    for (const auto& r : records) {
        out += io::csv_join({
            r.city_id,
            r.name,
            r.country,
            std::string(to_string(r.role)),
            r.cycle_share ? format_pct(*r.cycle_share) : "",
            r.motorcycle_share ? format_pct(*r.motorcycle_share) : "",
            r.survey_year ? std::to_string(*r.survey_year) : "",
            std::string(to_string(r.survey_scope)),
            io::format_double(r.population),
            io::format_double(r.area_km2),
        });
        out.push_back('\n');
    }
    return out;
}

double adjust_commute_share(double share, double factor) {
    if (!(share > 0.0 && share < 1.0)) {
        throw RangeError("share must lie in (0,1)");
    }
    if (!(factor > 0.0)) {
        throw RangeError("commute factor must be positive");
    }
    const double adjusted = share * factor;
    if (!(adjusted > 0.0 && adjusted < 1.0)) {
        throw RangeError("adjusted share " + io::format_double(adjusted) + " leaves (0,1)");
    }
    return adjusted;
}

double CommuteFactors::factor_for(const std::string& country) const {
    auto it = by_country.find(country);
    return it == by_country.end() ? default_factor : it->second;
}

std::vector<CityRecord> apply_commute_adjustment(std::vector<CityRecord> records,
                                                 const CommuteFactors& factors) {
    for (auto& r : records) {
        if (r.survey_scope != SurveyScope::commuting) {
            continue;
        }
        const double f = factors.factor_for(r.country);
        try {
            if (r.cycle_share) {
                r.cycle_share = adjust_commute_share(*r.cycle_share, f);
            }
            if (r.motorcycle_share) {
                r.motorcycle_share = adjust_commute_share(*r.motorcycle_share, f);
            }
        } catch (const RangeError& e) {
            throw RangeError(r.city_id + ": " + e.what());
        }
        r.survey_scope = SurveyScope::all_trips;
    }
    return records;
}

PopulationGrid parse_population_grid(std::string_view text) {
    PopulationGrid grid;
    bool have_size = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        auto line = io::trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        if (line.empty()) {
            continue;
        }
        if (line.front() != '#') {
            break;
        }
        auto eq = line.find("cell_size_m");
        if (eq != std::string_view::npos) {
            auto val = line.substr(line.find('=', eq) + 1);
            auto v = io::parse_double(val);
            if (!v || !(*v > 0.0)) {
                throw Error("population grid: cell_size_m must be a positive number");
            }
            grid.cell_size_m = *v;
            have_size = true;
        }
    }
    if (!have_size) {
        throw SchemaError("cell_size_m", "population grid: missing '# cell_size_m=<metres>' metadata line");
    }

    const io::CsvTable table = io::parse_csv(text);
    const std::size_t c_lat = table.require("lat");
    const std::size_t c_lon = table.require("lon");
    const std::size_t c_pop = table.require("population");
    grid.cells.reserve(table.rows().size());
    for (const auto& row : table.rows()) {
        auto lat = io::parse_double(row.fields[c_lat]);
        auto lon = io::parse_double(row.fields[c_lon]);
        auto pop = io::parse_double(row.fields[c_pop]);
        if (!lat || !lon || !pop) {
            throw RowError(row.line, "unparseable number in population grid");
        }
        if (*pop < 0.0) {
            throw RowError(row.line, "negative population count");
        }
        if (!geo::valid({*lat, *lon})) {
            throw RowError(row.line, "coordinate outside WGS84 range");
        }
        grid.cells.push_back({*lat, *lon, *pop});
    }
    return grid;
}

PopulationGrid load_population_grid(const std::filesystem::path& path) {
    return parse_population_grid(io::read_text(path));
}

Boundary make_boundary(std::vector<Polygon> polygons) {
    if (polygons.empty()) {
        throw Error("boundary has no polygons");
    }
    Boundary b;
    double area = 0.0;
    for (const auto& poly : polygons) {
        for (std::size_t r = 0; r < poly.rings.size(); ++r) {
            const auto& ring = poly.rings[r];
            if (ring.size() < 4) {
                throw Error("boundary ring needs at least 4 vertices (closed triangle)");
            }
            if (!(ring.front() == ring.back())) {
                throw Error("boundary ring is not closed (first vertex != last vertex)");
            }
            for (const auto& p : ring) {
                if (!geo::valid(p)) {
                    throw Error("boundary vertex outside WGS84 range");
                }
            }
            const double a = geo::ring_area_km2(ring);
            area += r == 0 ? a : -a;
        }
    }
    if (!(area > 0.0)) {
        throw Error("boundary area must be positive");
    }
    b.polygons = std::move(polygons);
    b.area_km2 = area;
    return b;
}

Boundary parse_boundary_geojson(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("boundary: invalid JSON: ") + e.what());
    }
    std::vector<Polygon> polygons;
    try {
        collect_polygons(doc, polygons);
    } catch (const json::exception& e) {
        throw Error(std::string("boundary: malformed GeoJSON: ") + e.what());
    }
    return make_boundary(std::move(polygons));
}

Boundary load_boundary(const std::filesystem::path& path) {
    return parse_boundary_geojson(io::read_text(path));
}

std::vector<std::uint8_t> points_inside(const Boundary& boundary, std::span<const double> lats,
                                        std::span<const double> lons, kernels::Isa isa) {
    std::vector<std::uint8_t> inside(lats.size(), 0);
    std::vector<std::uint8_t> scratch(lats.size());
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& poly : boundary.polygons) {
        std::fill(scratch.begin(), scratch.end(), 0);
        for (const auto& ring : poly.rings) {
            xs.clear();
            ys.clear();
            for (const auto& p : ring) {
                xs.push_back(p.lon);
                ys.push_back(p.lat);
            }
            kernels::toggle_crossings(lons, lats, {xs, ys}, scratch, isa);
        }
        for (std::size_t k = 0; k < inside.size(); ++k) {
            inside[k] |= scratch[k];
        }
    }
    return inside;
}

double compute_population_density(const PopulationGrid& grid, const Boundary& boundary, kernels::Isa isa) {
    if (!(boundary.area_km2 > 0.0)) {
        throw RangeError("boundary area must be positive");
    }
    std::vector<double> lats;
    std::vector<double> lons;
    lats.reserve(grid.cells.size());
    lons.reserve(grid.cells.size());
    for (const auto& c : grid.cells) {
        lats.push_back(c.lat);
        lons.push_back(c.lon);
    }
    const auto inside = points_inside(boundary, lats, lons, isa);

    // sorted summation: the total must not depend on cell order
    std::vector<double> members;
    for (std::size_t k = 0; k < inside.size(); ++k) {
        if (inside[k]) {
            members.push_back(grid.cells[k].population);
        }
    }
    if (members.empty()) {
        throw EmptyCoverageError("no population cell centroid lies inside the boundary");
    }
    std::sort(members.begin(), members.end());
    double total = 0.0;
    for (double m : members) {
        total += m;
    }
    return total / boundary.area_km2;
}

}  // namespace modeshare::dataset
