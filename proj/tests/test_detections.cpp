#include "support.hpp"

#include "modeshare/detections.hpp"
#include "modeshare/error.hpp"

#include <doctest.h>

#include <random>

using namespace modeshare;
using namespace modeshare::detections;

namespace {

Detection det(const std::string& img, VehicleClass c, double conf) { return {img, c, conf, {10, 10, 50, 60}}; }

}  // namespace

TEST_CASE("detection files parse and validate") {
    const auto d = parse_detections("image_id,class,confidence,x_min,y_min,x_max,y_max\n"
                                    "a_0,pedal,0.9,1,2,30,40\n"
                                    "a_90,motor,0.3,5,5,6,6\n");
    REQUIRE(d.size() == 2);
    CHECK(d[0].cls == VehicleClass::pedal);
    CHECK(d[1].box.x_max == 6.0);
    CHECK(parse_detections(format_detections(d)).size() == 2);
    const std::string hdr = "image_id,class,confidence,x_min,y_min,x_max,y_max\n";
    CHECK_THROWS_AS(parse_detections(hdr + "a,pedal,1.2,1,2,3,4\n"), RowError);
    CHECK_THROWS_AS(parse_detections(hdr + "a,pedal,0.5,3,2,3,4\n"), RowError);
    CHECK_THROWS_AS(parse_detections(hdr + "a,truck,0.5,1,2,3,4\n"), RowError);
    CHECK_THROWS_AS(parse_detections("image_id,class,confidence,x_min,y_min,x_max\n"), SchemaError);
    CHECK(parse_manifest("a\n\nb\n") == std::vector<std::string>{"a", "b"});
    CHECK_THROWS_AS(parse_manifest("a\na\n"), ConsistencyError);
}

TEST_CASE("aggregation applies the confidence threshold") {
    const std::vector<std::string> manifest{"i0", "i1", "i2"};
    const std::vector<Detection> dets{det("i0", VehicleClass::pedal, 0.9), det("i1", VehicleClass::pedal, 0.9),
                                      det("i2", VehicleClass::pedal, 0.9), det("i0", VehicleClass::motor, 0.1)};
    const auto c = aggregate_city_counts("x", dets, manifest);
    CHECK(c.gsv_cycle == 3);
    CHECK(c.gsv_motorcycle == 0);
    CHECK(c.n_images == 3);
    const std::vector<Detection> edge{det("i0", VehicleClass::motor, 0.25)};
    CHECK(aggregate_city_counts("x", edge, manifest).gsv_motorcycle == 1);
}

TEST_CASE("empty detections over a full manifest") {
    std::vector<std::string> manifest;
    for (int i = 0; i < 8000; ++i) {
        manifest.push_back("img" + std::to_string(i));
    }
    const auto c = aggregate_city_counts("x", {}, manifest);
    CHECK(c.gsv_cycle == 0);
    CHECK(c.gsv_motorcycle == 0);
    CHECK(c.gsv_cargo == 0);
    CHECK(c.gsv_rickshaw == 0);
    CHECK(c.n_images == 8000);
}

TEST_CASE("detections outside the manifest are inconsistent") {
    const std::vector<std::string> manifest{"i0"};
    const std::vector<Detection> dets{det("ghost", VehicleClass::pedal, 0.9)};
    CHECK_THROWS_AS(aggregate_city_counts("x", dets, manifest), ConsistencyError);
}

TEST_CASE("aggregation properties on a generated city") {
    std::vector<Detection> dets;
    std::vector<std::string> manifest;
    testsupport::city_fixture(3, 408, 857, 8000, dets, manifest);
    const auto base = aggregate_city_counts("bogota", dets, manifest);
    CHECK(base.gsv_cycle == 408);
    CHECK(base.gsv_motorcycle == 857);

    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 3; ++rep) {
        std::shuffle(dets.begin(), dets.end(), rng);
        const auto c = aggregate_city_counts("bogota", dets, manifest);
        CHECK(c.gsv_cycle == base.gsv_cycle);
        CHECK(c.gsv_motorcycle == base.gsv_motorcycle);
        CHECK(c.gsv_cargo == base.gsv_cargo);
        CHECK(c.gsv_rickshaw == base.gsv_rickshaw);
    }

    CityCounts prev = aggregate_city_counts("bogota", dets, manifest, 0.0);
    for (double thr : {0.1, 0.25, 0.5, 0.75, 0.99, 1.0}) {
        const auto c = aggregate_city_counts("bogota", dets, manifest, thr);
        for (auto cls : kAllClasses) {
            CHECK(c.count(cls) <= prev.count(cls));
        }
        prev = c;
    }

    for (auto cls : kAllClasses) {
        const auto per = per_image_counts(dets, manifest, cls);
        CHECK(per.size() == manifest.size());
        CHECK(std::accumulate(per.begin(), per.end(), 0LL) == base.count(cls));
    }

    // split-and-merge equals the sequential fold
    const std::span<const Detection> all(dets);
    CityCounts merged = aggregate_city_counts("bogota", all.subspan(0, 500), manifest);
    merged.merge_detections(aggregate_city_counts("bogota", all.subspan(500), manifest));
    CHECK(merged.gsv_cycle == base.gsv_cycle);
    CHECK(merged.gsv_motorcycle == base.gsv_motorcycle);
    CHECK(merged.n_images == base.n_images);
}

TEST_CASE("city count tables round-trip") {
    std::vector<CityCounts> rows{{"a", 1, 2, 3, 4, 10}, {"b", 5, 6, 7, 8, 20}};
    const auto back = parse_city_counts(format_city_counts(rows));
    REQUIRE(back.size() == 2);
    CHECK(back[1].gsv_motorcycle == 6);
    CHECK(back[1].n_images == 20);
    CHECK(format_city_counts(back) == format_city_counts(rows));
}

TEST_CASE("manual comparison") {
    CityCounts sf{"sf", 117, 181, 0, 0, 8000};
    const auto r = compare_manual(sf, ManualCounts{"sf", 86, 127, std::nullopt, std::nullopt});
    CHECK(std::abs(*r.cycle.ratio - 86.0 / 117.0) < 1e-12);
    CHECK(std::abs(*r.motorcycle.ratio - 127.0 / 181.0) < 1e-12);
    CHECK(*r.cycle.ratio == doctest::Approx(0.735).epsilon(0.001));
    CHECK(*r.motorcycle.ratio == doctest::Approx(0.702).epsilon(0.001));
    CHECK(r.yolo_sum == 298);
    CHECK(r.tp_sum == 213);

    const auto same = compare_manual(sf, ManualCounts{"sf", 117, 181, 298, 298});
    CHECK(*same.cycle.ratio == 1.0);
    CHECK(*same.motorcycle.ratio == 1.0);
    CHECK_FALSE(same.yolo_sum_mismatch);
    CHECK_FALSE(same.tp_sum_mismatch);
    const auto off = compare_manual(sf, ManualCounts{"sf", 86, 127, 298, 215});
    CHECK(off.tp_sum_mismatch);
    CHECK_FALSE(off.yolo_sum_mismatch);
    CHECK(off.notes.size() == 1);

    const auto manual = parse_manual_counts("city_id,tp_cycle,tp_motorcycle\nhamburg,323,Na\n");
    CityCounts hh{"hamburg", 400, 12, 0, 0, 8000};
    const auto h = compare_manual(hh, manual[0]);
    CHECK(h.motorcycle.skipped);
    CHECK_FALSE(h.motorcycle.ratio.has_value());
    CHECK_FALSE(h.tp_sum.has_value());
    CHECK_FALSE(h.notes.empty());
    const std::string csv = format_manual_comparison({h});
    CHECK(csv.find("Na") != std::string::npos);
    CHECK_THROWS_AS(compare_manual(hh, ManualCounts{"sf", 1, 1, {}, {}}), ConsistencyError);
}

TEST_CASE("saturation curves") {
    const std::vector<long long> flat(100, 1);
    for (const auto& p : saturation_curve(flat, 10)) {
        CHECK(p.detections_per_image == 1.0);
    }
    const auto pts = saturation_curve(flat, 30);
    REQUIRE(pts.size() == 4);
    CHECK(pts.back().images_seen == 100);

    std::vector<long long> front(200, 0);
    std::fill(front.begin(), front.begin() + 100, 2);
    const auto c = saturation_curve(front, 10);
    for (std::size_t i = 1; i < c.size(); ++i) {
        if (c[i].images_seen > 100) {
            CHECK(c[i].detections_per_image < c[i - 1].detections_per_image);
        }
    }
    CHECK_THROWS_AS(saturation_curve(flat, 0), RangeError);
}
