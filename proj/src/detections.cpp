#include "modeshare/detections.hpp"

#include "modeshare/error.hpp"
#include "modeshare/io.hpp"

#include <algorithm>
#include <unordered_map>

namespace modeshare::detections {
namespace {

std::optional<long long> parse_optional_count(const io::CsvRow& row, std::size_t col, std::string_view name) {
    const std::string& f = row.fields[col];
    if (f.empty() || f == "Na" || f == "NA" || f == "na") {
        return std::nullopt;
    }
    auto v = io::parse_int(f);
    if (!v || *v < 0) {
        throw RowError(row.line, std::string(name) + ": expected a non-negative count or Na, got '" + f + "'");
    }
    return *v;
}

std::unordered_map<std::string_view, std::size_t> index_manifest(std::span<const std::string> manifest) {
    std::unordered_map<std::string_view, std::size_t> idx;
    idx.reserve(manifest.size());
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        idx.emplace(manifest[i], i);
    }
    return idx;
}

std::string optional_text(const std::optional<long long>& v) {
    return v ? std::to_string(*v) : "Na";
}

}  // namespace

std::string_view to_string(VehicleClass c) {
    switch (c) {
    case VehicleClass::motor:
        return "motor";
    case VehicleClass::pedal:
        return "pedal";
    case VehicleClass::cargo:
        return "cargo";
    case VehicleClass::rickshaw:
        return "rickshaw";
    }
    return "unknown";
}

std::optional<VehicleClass> parse_class(std::string_view s) {
    for (auto c : kAllClasses) {
        if (s == to_string(c)) {
            return c;
        }
    }
    return std::nullopt;
}

std::vector<Detection> parse_detections(std::string_view text) {
    const io::CsvTable table = io::parse_csv(text);
    const std::size_t c_img = table.require("image_id");
    const std::size_t c_cls = table.require("class");
    const std::size_t c_conf = table.require("confidence");
    const std::size_t c_x0 = table.require("x_min");
    const std::size_t c_y0 = table.require("y_min");
    const std::size_t c_x1 = table.require("x_max");
    const std::size_t c_y1 = table.require("y_max");
    std::vector<Detection> out;
    out.reserve(table.rows().size());
    for (const auto& row : table.rows()) {
        Detection d;
        d.image_id = row.fields[c_img];
        auto cls = parse_class(row.fields[c_cls]);
        if (!cls) {
            throw RowError(row.line, "unknown class '" + row.fields[c_cls] + "'");
        }
        d.cls = *cls;
        auto conf = io::parse_double(row.fields[c_conf]);
        auto x0 = io::parse_double(row.fields[c_x0]);
        auto y0 = io::parse_double(row.fields[c_y0]);
        auto x1 = io::parse_double(row.fields[c_x1]);
        auto y1 = io::parse_double(row.fields[c_y1]);
        if (!conf || !x0 || !y0 || !x1 || !y1) {
            throw RowError(row.line, "unparseable number in detection");
        }
        if (*conf < 0.0 || *conf > 1.0) {
            throw RowError(row.line, "confidence outside [0,1]");
        }
        d.confidence = *conf;
        d.box = {*x0, *y0, *x1, *y1};
        if (!d.box.valid()) {
            throw RowError(row.line, "degenerate bounding box");
        }
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<Detection> load_detections(const std::filesystem::path& path) {
    return parse_detections(io::read_text(path));
}

std::string format_detections(const std::vector<Detection>& dets) {
    std::string out = "image_id,class,confidence,x_min,y_min,x_max,y_max\n";
    for (const auto& d : dets) {
        out += io::csv_join({d.image_id, std::string(to_string(d.cls)), io::format_double(d.confidence),
                             io::format_double(d.box.x_min), io::format_double(d.box.y_min),
                             io::format_double(d.box.x_max), io::format_double(d.box.y_max)});
        out.push_back('\n');
    }
    return out;
}

std::vector<std::string> parse_manifest(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        auto line = io::trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        if (!line.empty() && line.front() != '#') {
            out.emplace_back(line);
        }
    }
    std::vector<std::string> sorted = out;
    std::sort(sorted.begin(), sorted.end());
    auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end()) {
        throw ConsistencyError("image manifest lists '" + *dup + "' twice");
    }
    return out;
}

std::vector<std::string> load_manifest(const std::filesystem::path& path) {
    return parse_manifest(io::read_text(path));
}

long long CityCounts::count(VehicleClass c) const {
    switch (c) {
    case VehicleClass::motor:
        return gsv_motorcycle;
    case VehicleClass::pedal:
        return gsv_cycle;
    case VehicleClass::cargo:
        return gsv_cargo;
    case VehicleClass::rickshaw:
        return gsv_rickshaw;
    }
    return 0;
}

long long& CityCounts::count(VehicleClass c) {
    switch (c) {
    case VehicleClass::motor:
        return gsv_motorcycle;
    case VehicleClass::pedal:
        return gsv_cycle;
    case VehicleClass::cargo:
        return gsv_cargo;
    case VehicleClass::rickshaw:
        return gsv_rickshaw;
    }
    return gsv_rickshaw;
}

CityCounts& CityCounts::merge_detections(const CityCounts& other) {
    for (auto c : kAllClasses) {
        count(c) += other.count(c);
    }
    return *this;
}

CityCounts aggregate_city_counts(std::string city_id, std::span<const Detection> dets,
                                 std::span<const std::string> manifest, double conf_threshold) {
    const auto idx = index_manifest(manifest);
    CityCounts out;
    out.city_id = std::move(city_id);
    out.n_images = static_cast<long long>(manifest.size());
    for (const auto& d : dets) {
        if (!idx.contains(d.image_id)) {
            throw ConsistencyError("detection references image '" + d.image_id + "' absent from the manifest");
        }
        if (d.confidence >= conf_threshold) {
            ++out.count(d.cls);
        }
    }
    return out;
}

std::vector<long long> per_image_counts(std::span<const Detection> dets, std::span<const std::string> manifest,
                                        VehicleClass cls, double conf_threshold) {
    const auto idx = index_manifest(manifest);
    std::vector<long long> out(manifest.size(), 0);
    for (const auto& d : dets) {
        auto it = idx.find(d.image_id);
        if (it == idx.end()) {
            throw ConsistencyError("detection references image '" + d.image_id + "' absent from the manifest");
        }
        if (d.cls == cls && d.confidence >= conf_threshold) {
            ++out[it->second];
        }
    }
    return out;
}

std::string format_city_counts(const std::vector<CityCounts>& counts) {
    std::string out = "city_id,gsv_cycle,gsv_motorcycle,gsv_cargo,gsv_rickshaw,n_images\n";
    for (const auto& c : counts) {
        out += io::csv_join({c.city_id, std::to_string(c.gsv_cycle), std::to_string(c.gsv_motorcycle),
                             std::to_string(c.gsv_cargo), std::to_string(c.gsv_rickshaw),
                             std::to_string(c.n_images)});
        out.push_back('\n');
    }
    return out;
}

std::vector<CityCounts> parse_city_counts(std::string_view text) {
    const io::CsvTable table = io::parse_csv(text);
    const std::size_t c_id = table.require("city_id");
    const std::size_t c_cyc = table.require("gsv_cycle");
    const std::size_t c_mot = table.require("gsv_motorcycle");
    const auto c_cargo = table.find("gsv_cargo");
    const auto c_rick = table.find("gsv_rickshaw");
    const auto c_n = table.find("n_images");
    auto get = [](const io::CsvRow& row, std::size_t col, std::string_view name) {
        auto v = io::parse_int(row.fields[col]);
        if (!v || *v < 0) {
            throw RowError(row.line, std::string(name) + ": expected a non-negative count");
        }
        return *v;
    };
    std::vector<CityCounts> out;
    for (const auto& row : table.rows()) {
        CityCounts c;
        c.city_id = row.fields[c_id];
        c.gsv_cycle = get(row, c_cyc, "gsv_cycle");
        c.gsv_motorcycle = get(row, c_mot, "gsv_motorcycle");
        if (c_cargo) {
            c.gsv_cargo = get(row, *c_cargo, "gsv_cargo");
        }
        if (c_rick) {
            c.gsv_rickshaw = get(row, *c_rick, "gsv_rickshaw");
        }
        if (c_n) {
            c.n_images = get(row, *c_n, "n_images");
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<CityCounts> load_city_counts(const std::filesystem::path& path) {
    return parse_city_counts(io::read_text(path));
}

std::vector<ManualCounts> parse_manual_counts(std::string_view text) {
    const io::CsvTable table = io::parse_csv(text);
    const std::size_t c_id = table.require("city_id");
    const std::size_t c_cyc = table.require("tp_cycle");
    const std::size_t c_mot = table.require("tp_motorcycle");
    const auto c_ysum = table.find("yolo_sum");
    const auto c_tsum = table.find("tp_sum");
    std::vector<ManualCounts> out;
    for (const auto& row : table.rows()) {
        ManualCounts m;
        m.city_id = row.fields[c_id];
        m.tp_cycle = parse_optional_count(row, c_cyc, "tp_cycle");
        m.tp_motorcycle = parse_optional_count(row, c_mot, "tp_motorcycle");
        if (c_ysum) {
            m.printed_yolo_sum = parse_optional_count(row, *c_ysum, "yolo_sum");
        }
        if (c_tsum) {
            m.printed_tp_sum = parse_optional_count(row, *c_tsum, "tp_sum");
        }
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<ManualCounts> load_manual_counts(const std::filesystem::path& path) {
    return parse_manual_counts(io::read_text(path));
}

ManualComparison compare_manual(const CityCounts& automated, const ManualCounts& manual) {
    if (automated.city_id != manual.city_id) {
        throw ConsistencyError("comparing counts of '" + automated.city_id + "' with manual counts of '" +
                               manual.city_id + "'");
    }
    ManualComparison out;
    out.city_id = automated.city_id;

    auto fill = [&](ClassComparison& cmp, long long autos, const std::optional<long long>& tp, std::string_view label) {
        cmp.automated = autos;
        cmp.manual_tp = tp;
        if (!tp) {
            cmp.skipped = true;
            out.notes.push_back(std::string(label) + ": manual count Na, class skipped");
        } else if (autos == 0) {
            cmp.skipped = true;
            out.notes.push_back(std::string(label) + ": no automated detections, ratio undefined");
        } else {
            cmp.ratio = static_cast<double>(*tp) / static_cast<double>(autos);
        }
    };
    fill(out.cycle, automated.gsv_cycle, manual.tp_cycle, "cycle");
    fill(out.motorcycle, automated.gsv_motorcycle, manual.tp_motorcycle, "motorcycle");

    out.yolo_sum = automated.gsv_cycle + automated.gsv_motorcycle;
    if (manual.tp_cycle && manual.tp_motorcycle) {
        out.tp_sum = *manual.tp_cycle + *manual.tp_motorcycle;
    }
    if (manual.printed_yolo_sum && *manual.printed_yolo_sum != out.yolo_sum) {
        out.yolo_sum_mismatch = true;
        out.notes.push_back("printed yolo_sum " + std::to_string(*manual.printed_yolo_sum) + " != recomputed " +
                            std::to_string(out.yolo_sum));
    }
    if (manual.printed_tp_sum && out.tp_sum && *manual.printed_tp_sum != *out.tp_sum) {
        out.tp_sum_mismatch = true;
        out.notes.push_back("printed tp_sum " + std::to_string(*manual.printed_tp_sum) + " != recomputed " +
                            std::to_string(*out.tp_sum));
    }
    return out;
}

std::string format_manual_comparison(const std::vector<ManualComparison>& rows) {
    std::string out =
        "city,cycle_yolo,motorcycle_yolo,tp_cycle,tp_motorcycle,yolo_sum,tp_sum,cycle_ratio,motorcycle_ratio,notes\n";
    for (const auto& r : rows) {
        std::string notes;
        for (std::size_t i = 0; i < r.notes.size(); ++i) {
            notes += (i ? "; " : "") + r.notes[i];
        }
        out += io::csv_join({r.city_id, std::to_string(r.cycle.automated), std::to_string(r.motorcycle.automated),
                             optional_text(r.cycle.manual_tp), optional_text(r.motorcycle.manual_tp),
                             std::to_string(r.yolo_sum), optional_text(r.tp_sum),
                             r.cycle.ratio ? io::format_double(*r.cycle.ratio) : "Na",
                             r.motorcycle.ratio ? io::format_double(*r.motorcycle.ratio) : "Na", notes});
        out.push_back('\n');
    }
    return out;
}

std::vector<SaturationPoint> saturation_curve(std::span<const long long> per_image, std::size_t step) {
    if (step == 0) {
        throw RangeError("saturation step must be >= 1");
    }
    std::vector<SaturationPoint> out;
    long long cumulative = 0;
    for (std::size_t i = 0; i < per_image.size(); ++i) {
        cumulative += per_image[i];
        const std::size_t seen = i + 1;
        if (seen % step == 0 || seen == per_image.size()) {
            out.push_back({seen, static_cast<double>(cumulative) / static_cast<double>(seen)});
        }
    }
    return out;
}

std::vector<SaturationPoint> saturation_curve(std::span<const Detection> dets, std::span<const std::string> manifest,
                                              VehicleClass cls, std::size_t step, double conf_threshold) {
    const auto counts = per_image_counts(dets, manifest, cls, conf_threshold);
    return saturation_curve(counts, step);
}

std::string format_saturation_csv(const std::vector<SaturationPoint>& series) {
    std::string out = "images_seen,detections_per_image\n";
    for (const auto& p : series) {
        out += std::to_string(p.images_seen) + "," + io::format_double(p.detections_per_image) + "\n";
    }
    return out;
}

}  // namespace modeshare::detections
