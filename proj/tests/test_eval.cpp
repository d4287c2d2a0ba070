#include <random>

#include "doctest.h"
#include "odet/eval.hpp"

using namespace odet;

namespace {

Polygon square(double x, double y, double side) {
    return Polygon{{{x, y}, {x + side, y}, {x + side, y + side}, {x, y + side}}};
}

}  // namespace

TEST_CASE("a detection above threshold is a true positive") {
    // 10x10 det over a 10x6 gt: IoU = 60/(100+60-60) = 0.6
    const std::vector<Polygon> dets{square(0, 0, 10)};
    const std::vector<Polygon> gts{Polygon{{{0, 0}, {10, 0}, {10, 6}, {0, 6}}}};
    const std::vector<bool> difficult{false};
    const auto flags = match_detections(dets, gts, difficult, 0.5);
    REQUIRE(flags.size() == 1);
    CHECK(flags[0] == MatchFlag::TP);
}

TEST_CASE("two detections on one ground truth: the higher-scored wins") {
    const std::vector<Polygon> dets{square(0, 0, 10), square(0.5, 0, 10)};  // score-sorted
    const std::vector<Polygon> gts{square(0, 0, 10)};
    const std::vector<bool> difficult{false};
    const auto flags = match_detections(dets, gts, difficult, 0.5);
    CHECK(flags[0] == MatchFlag::TP);
    CHECK(flags[1] == MatchFlag::FP);
}

TEST_CASE("a detection on a difficult ground truth is ignored") {
    const std::vector<Polygon> dets{square(0, 0, 10)};
    const std::vector<Polygon> gts{square(0, 0, 10)};
    const std::vector<bool> difficult{true};
    const auto flags = match_detections(dets, gts, difficult, 0.5);
    CHECK(flags[0] == MatchFlag::Ignored);
}

TEST_CASE("AP hand cases") {
    // [FP, TP] with one ground truth: 0.5 under both metrics.
    {
        const MatchFlag flags[] = {MatchFlag::FP, MatchFlag::TP};
        CHECK(*average_precision(flags, 1, ApMetric::AllPoint) ==
              doctest::Approx(0.5).epsilon(1e-12));
        CHECK(*average_precision(flags, 1, ApMetric::Voc07) ==
              doctest::Approx(0.5).epsilon(1e-12));
    }
    // [TP, FP, TP] with two ground truths: 5/6 all-point, 28/33 voc07.
    {
        const MatchFlag flags[] = {MatchFlag::TP, MatchFlag::FP, MatchFlag::TP};
        CHECK(std::fabs(*average_precision(flags, 2, ApMetric::AllPoint) - 5.0 / 6.0) <= 1e-12);
        CHECK(std::fabs(*average_precision(flags, 2, ApMetric::Voc07) - 28.0 / 33.0) <= 1e-12);
    }
    // Perfect run reaches exactly one.
    {
        const MatchFlag flags[] = {MatchFlag::TP, MatchFlag::TP, MatchFlag::TP};
        CHECK(*average_precision(flags, 3, ApMetric::AllPoint) == 1.0);
        CHECK(*average_precision(flags, 3, ApMetric::Voc07) == 1.0);
    }
}

TEST_CASE("AP skips ignored flags and reports undefined for empty categories") {
    const MatchFlag flags[] = {MatchFlag::Ignored, MatchFlag::TP};
    CHECK(*average_precision(flags, 1, ApMetric::AllPoint) == 1.0);
    CHECK_FALSE(average_precision(flags, 0, ApMetric::AllPoint).has_value());
}

TEST_CASE("a trailing false positive leaves AP unchanged") {
    std::vector<MatchFlag> flags{MatchFlag::TP, MatchFlag::FP, MatchFlag::TP};
    const double base_all = *average_precision(flags, 3, ApMetric::AllPoint);
    const double base_voc = *average_precision(flags, 3, ApMetric::Voc07);
    flags.push_back(MatchFlag::FP);
    CHECK(*average_precision(flags, 3, ApMetric::AllPoint) ==
          doctest::Approx(base_all).epsilon(1e-15));
    CHECK(*average_precision(flags, 3, ApMetric::Voc07) ==
          doctest::Approx(base_voc).epsilon(1e-15));
}

TEST_CASE("an early false positive never increases AP") {
    const std::vector<MatchFlag> clean{MatchFlag::TP, MatchFlag::TP};
    const std::vector<MatchFlag> polluted{MatchFlag::FP, MatchFlag::TP, MatchFlag::TP};
    for (ApMetric metric : {ApMetric::AllPoint, ApMetric::Voc07}) {
        CHECK(*average_precision(polluted, 2, metric) <= *average_precision(clean, 2, metric));
    }
}

TEST_CASE("dataset evaluation: perfect detections reach mAP one") {
    std::vector<GroundTruth> gts{{"img1", square(0, 0, 10), "plane", false},
                                 {"img1", square(20, 0, 8), "ship", false},
                                 {"img2", square(5, 5, 6), "plane", false}};
    std::vector<DetRecord> dets;
    for (const GroundTruth& gt : gts) {
        dets.push_back(DetRecord{gt.image_id, gt.category, 1.0, gt.poly});
    }
    const EvalResult result = evaluate_dataset(dets, gts, EvalConfig{});
    CHECK(result.map == 1.0);
    CHECK(result.per_category.at("plane").n_gt == 2);
    CHECK(result.per_category.at("plane").tp == 2);
    CHECK(result.per_category.at("ship").fp == 0);
}

TEST_CASE("mAP averages only categories with ground truth") {
    std::vector<GroundTruth> gts{{"img1", square(0, 0, 10), "plane", false},
                                 {"img1", square(30, 0, 10), "plane", false},
                                 {"img1", square(60, 0, 10), "ship", false}};
    std::vector<DetRecord> dets{
        {"img1", "plane", 0.9, square(0, 0, 10)},   // TP
        {"img1", "plane", 0.8, square(100, 0, 10)}, // FP -> plane AP 0.5 all-point
        {"img1", "ship", 0.9, square(60, 0, 10)},   // TP -> ship AP 1.0
    };
    EvalConfig cfg;
    cfg.metric = ApMetric::AllPoint;
    const EvalResult result = evaluate_dataset(dets, gts, cfg);
    CHECK(*result.per_category.at("plane").ap == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(*result.per_category.at("ship").ap == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(result.map == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(result.categories_in_mean == 2);
}

TEST_CASE("unknown detection categories become false positives, not errors") {
    std::vector<GroundTruth> gts{{"img1", square(0, 0, 10), "plane", false}};
    std::vector<DetRecord> dets{{"img1", "plane", 0.9, square(0, 0, 10)},
                                {"img1", "harbor", 0.8, square(0, 0, 10)}};
    const EvalResult result = evaluate_dataset(dets, gts, EvalConfig{});
    CHECK(result.map == 1.0);  // harbor has no ground truth, excluded from the mean
    CHECK(result.per_category.at("harbor").fp == 1);
    CHECK_FALSE(result.per_category.at("harbor").ap.has_value());
    CHECK(result.categories_in_mean == 1);
}

TEST_CASE("evaluation is invariant to detection input order for distinct scores") {
    std::mt19937_64 rng(95);
    std::vector<GroundTruth> gts;
    std::vector<DetRecord> dets;
    for (int i = 0; i < 12; ++i) {
        const double x = 15.0 * i;
        gts.push_back(GroundTruth{"img" + std::to_string(i % 3), square(x, 0, 10),
                                  i % 2 ? "plane" : "ship", false});
        dets.push_back(DetRecord{"img" + std::to_string(i % 3), i % 2 ? "plane" : "ship",
                                 0.05 * i + 0.01, square(x + 2, 0, 10)});
    }
    const EvalResult base = evaluate_dataset(dets, gts, EvalConfig{});
    std::shuffle(dets.begin(), dets.end(), rng);
    const EvalResult shuffled = evaluate_dataset(dets, gts, EvalConfig{});
    CHECK(base.map == shuffled.map);
    CHECK(base.per_category.at("plane").tp == shuffled.per_category.at("plane").tp);
    CHECK(base.per_category.at("ship").fp == shuffled.per_category.at("ship").fp);
}

TEST_CASE("difficult ground truths leave the positive pool") {
    std::vector<GroundTruth> gts{{"img1", square(0, 0, 10), "plane", true},
                                 {"img1", square(30, 0, 10), "plane", false}};
    std::vector<DetRecord> dets{{"img1", "plane", 0.9, square(0, 0, 10)},
                                {"img1", "plane", 0.8, square(30, 0, 10)}};
    const EvalResult result = evaluate_dataset(dets, gts, EvalConfig{});
    CHECK(result.per_category.at("plane").n_gt == 1);
    CHECK(result.per_category.at("plane").tp == 1);
    CHECK(result.per_category.at("plane").fp == 0);
    CHECK(result.map == 1.0);
}

TEST_CASE("the AP table carries sorted categories and the metric label") {
    std::vector<GroundTruth> gts{{"img1", square(0, 0, 10), "ship", false},
                                 {"img1", square(30, 0, 10), "plane", false}};
    std::vector<DetRecord> dets{{"img1", "ship", 0.9, square(0, 0, 10)},
                                {"img1", "plane", 0.9, square(30, 0, 10)}};
    const EvalResult result = evaluate_dataset(dets, gts, EvalConfig{});
    const std::string table = format_ap_table(result, ApMetric::Voc07);
    CHECK(table.find("plane") != std::string::npos);
    CHECK(table.find("voc07-11point") != std::string::npos);
    CHECK(table.find("plane") < table.find("ship"));
}

TEST_CASE("invalid thresholds are rejected") {
    CHECK_THROWS_AS(evaluate_dataset({}, {}, EvalConfig{1.5, ApMetric::Voc07}),
                    ValidationError);
}
