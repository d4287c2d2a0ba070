#include <random>
#include <set>

#include "doctest.h"
#include "odet/dota.hpp"

using namespace odet;

TEST_CASE("parsing a plain annotation line") {
    const auto records = parse_dota_annotation("10 10 20 10 20 20 10 20 plane 0\n");
    REQUIRE(records.size() == 1);
    const AnnotationRecord& rec = records[0];
    CHECK(rec.quad == std::array<double, 8>{10, 10, 20, 10, 20, 20, 10, 20});
    CHECK(rec.category == "plane");
    CHECK(rec.difficult == 0);
}

TEST_CASE("header and blank lines are skipped") {
    const std::string text =
        "imagesource:GoogleEarth\n"
        "gsd:0.146343590398\n"
        "\n"
        "1 1 4 1 4 4 1 4 ship 1\n";
    const auto records = parse_dota_annotation(text);
    REQUIRE(records.size() == 1);
    CHECK(records[0].category == "ship");
    CHECK(records[0].difficult == 1);
}

TEST_CASE("malformed lines name their line number") {
    try {
        parse_dota_annotation("imagesource:x\n1 2 3 4 5 6 7 8 plane\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line == 2);
        CHECK(std::string(e.what()).find("10 tokens") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_dota_annotation("1 2 3 4 5 6 7 abc plane 0\n"), ParseError);
    CHECK_THROWS_AS(parse_dota_annotation("1 2 3 4 5 6 7 8 plane 2\n"), ParseError);
}

TEST_CASE("parse, serialize, parse is lossless") {
    const std::string text =
        "10.25 10 20 10.125 20 20 10 20 plane 0\n"
        "0.5 -1.75 4 1 4 4 1 4 small-vehicle 1\n";
    const auto records = parse_dota_annotation(text);
    const std::string round = serialize_dota_annotation(records);
    const auto again = parse_dota_annotation(round);
    REQUIRE(again.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(again[i].quad == records[i].quad);
        CHECK(again[i].category == records[i].category);
        CHECK(again[i].difficult == records[i].difficult);
    }
}

TEST_CASE("patch grid hand cases") {
    const PatchSpec spec{1024, 200};
    {
        const auto windows = patch_grid(1024, 1024, spec);
        REQUIRE(windows.size() == 1);
        CHECK(windows[0].x == 0);
        CHECK(windows[0].w == 1024);
    }
    {
        const auto windows = patch_grid(2048, 2048, spec);
        CHECK(windows.size() == 9);
        std::set<int> xs, ys;
        for (const Window& w : windows) {
            xs.insert(w.x);
            ys.insert(w.y);
            CHECK(w.w == 1024);
            CHECK(w.h == 1024);
        }
        CHECK(xs == std::set<int>{0, 824, 1024});
        CHECK(ys == std::set<int>{0, 824, 1024});
    }
    {
        const auto windows = patch_grid(500, 500, spec);
        REQUIRE(windows.size() == 1);
        CHECK(windows[0].w == 500);
        CHECK(windows[0].h == 500);
    }
    CHECK_THROWS_AS(patch_grid(100, 100, PatchSpec{100, 100}), ValidationError);
}

TEST_CASE("patch grid covers every pixel on random sizes") {
    std::mt19937_64 rng(100);
    for (int trial = 0; trial < 50; ++trial) {
        const int width = 1 + static_cast<int>(rng() % 3000);
        const int height = 1 + static_cast<int>(rng() % 3000);
        const auto windows = patch_grid(width, height, PatchSpec{1024, 200});
        // Spot-check a lattice of pixels including the far corner.
        for (int px : {0, width / 3, width - 1}) {
            for (int py : {0, height / 2, height - 1}) {
                bool covered = false;
                for (const Window& w : windows) {
                    if (px >= w.x && px < w.x + w.w && py >= w.y && py < w.y + w.h) {
                        covered = true;
                        break;
                    }
                }
                CHECK(covered);
            }
        }
    }
}

TEST_CASE("clipping keeps, drops and marks instances by retained area") {
    const Window win{100, 100, 200, 200};
    std::vector<AnnotationRecord> records;
    // fully inside
    records.push_back(AnnotationRecord{{120, 120, 140, 120, 140, 140, 120, 140}, "plane", 0});
    // fully outside
    records.push_back(AnnotationRecord{{400, 400, 420, 400, 420, 420, 400, 420}, "plane", 0});
    // 30% retained: width 100 with 30 units inside -> dropped at keep_frac 0.5
    records.push_back(AnnotationRecord{{30, 120, 130, 120, 130, 140, 30, 140}, "plane", 0});
    // 60% retained: width 100 with 60 units inside -> kept but difficult
    records.push_back(AnnotationRecord{{60, 150, 160, 150, 160, 170, 60, 170}, "plane", 0});

    const auto clipped = clip_annotations_to_window(records, win, ClipOptions{});
    REQUIRE(clipped.size() == 2);
    CHECK(clipped[0].quad == std::array<double, 8>{20, 20, 40, 20, 40, 40, 20, 40});
    CHECK(clipped[0].difficult == 0);
    CHECK(clipped[1].difficult == 1);
    // the clipped piece spans x in [100, 160] globally -> [0, 60] locally
    for (int i = 0; i < 4; ++i) {
        CHECK(clipped[1].quad[2 * i] >= -1e-9);
        CHECK(clipped[1].quad[2 * i] <= 60 + 1e-9);
    }
}

TEST_CASE("merging translates a single patch identically") {
    const std::vector<Window> windows{{0, 0, 100, 100}};
    std::vector<PatchDetection> dets{{0, "plane", 0.9,
                                      Polygon{{{1, 1}, {5, 1}, {5, 5}, {1, 5}}}}};
    const auto merged = merge_patch_detections(dets, windows, 0.5, "img1");
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].poly.vertices[0].x == 1.0);
    CHECK(merged[0].image_id == "img1");
    CHECK(merged[0].category == "plane");
}

TEST_CASE("the same object found in two overlapping patches merges to one") {
    const std::vector<Window> windows{{0, 0, 100, 100}, {50, 0, 100, 100}};
    const Polygon in_first{{{60, 10}, {80, 10}, {80, 30}, {60, 30}}};
    const Polygon in_second{{{10, 10}, {30, 10}, {30, 30}, {10, 30}}};  // same box, local coords
    std::vector<PatchDetection> dets{{0, "plane", 0.9, in_first},
                                     {1, "plane", 0.8, in_second}};
    const auto merged = merge_patch_detections(dets, windows, 0.5, "img1");
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].score == 0.9);
}

TEST_CASE("merge validates window tags and passes empty input through") {
    CHECK(merge_patch_detections({}, std::vector<Window>{{0, 0, 10, 10}}, 0.5, "x").empty());
    std::vector<PatchDetection> bad{{3, "plane", 0.5, Polygon{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}}}};
    CHECK_THROWS_AS(merge_patch_detections(bad, std::vector<Window>{{0, 0, 10, 10}}, 0.5, "x"),
                    ValidationError);
}

TEST_CASE("ratio split sizes follow the floor rule") {
    std::vector<std::string> ids;
    for (int i = 0; i < 1510; ++i) ids.push_back("img" + std::to_string(i));
    const SplitManifest manifest = ratio_split(ids, 42);
    CHECK(manifest.train.size() == 755);
    CHECK(manifest.val.size() == 302);
    CHECK(manifest.test.size() == 453);

    std::vector<std::string> ten;
    for (int i = 0; i < 10; ++i) ten.push_back(std::to_string(i));
    const SplitManifest small = ratio_split(ten, 0);
    CHECK(small.train.size() == 5);
    CHECK(small.val.size() == 2);
    CHECK(small.test.size() == 3);

    CHECK_THROWS_AS(ratio_split({}, 1), ValidationError);
}

TEST_CASE("ratio split is reproducible and partitions the ids") {
    std::vector<std::string> ids;
    for (int i = 0; i < 97; ++i) ids.push_back("id" + std::to_string(i));
    const SplitManifest a = ratio_split(ids, 7);
    const SplitManifest b = ratio_split(ids, 7);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);

    const SplitManifest c = ratio_split(ids, 8);
    CHECK(a.train != c.train);  // a different seed shuffles differently

    std::set<std::string> all;
    all.insert(a.train.begin(), a.train.end());
    all.insert(a.val.begin(), a.val.end());
    all.insert(a.test.begin(), a.test.end());
    CHECK(all.size() == ids.size());
    CHECK(a.train.size() + a.val.size() + a.test.size() == ids.size());
}

TEST_CASE("detection files round trip") {
    const std::string text = "img1 plane 0.25 0 0 4 0 4 4 0 4\n";
    const auto dets = parse_detection_file(text);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].image_id == "img1");
    CHECK(dets[0].score == 0.25);
    CHECK(serialize_detections(dets) == text);
    CHECK_THROWS_AS(parse_detection_file("img1 plane 0.25 0 0 4 0\n"), ParseError);
}
