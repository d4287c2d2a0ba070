#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odet/geometry.hpp"

namespace odet {

struct GroundTruth {
    std::string image_id;
    Polygon poly;
    std::string category;
    bool difficult = false;
};

struct DetRecord {
    std::string image_id;
    std::string category;
    double score = 0.0;
    Polygon poly;
};

enum class MatchFlag { TP, FP, Ignored };
enum class ApMetric { Voc07, AllPoint };

struct EvalConfig {
    double iou_thresh = 0.5;
    ApMetric metric = ApMetric::Voc07;
};

// Greedy matching for one category within one image. Detections must arrive
// sorted by descending score (ties by input order). Each detection takes the
// unmatched ground truth of highest IoU >= thresh; taking a difficult ground
// truth flags the detection Ignored instead of TP.
std::vector<MatchFlag> match_detections(std::span<const Polygon> dets,
                                        std::span<const Polygon> gts,
                                        const std::vector<bool>& gt_difficult, double iou_thresh);

// AP over flags ordered by descending score, skipping Ignored entries.
// n_gt counts non-difficult ground truths; n_gt == 0 leaves AP undefined.
std::optional<double> average_precision(std::span<const MatchFlag> flags, int n_gt,
                                        ApMetric metric);

struct CategoryEval {
    std::optional<double> ap;
    int n_gt = 0;
    int tp = 0;
    int fp = 0;
};

struct EvalResult {
    std::map<std::string, CategoryEval> per_category;  // sorted category names
    double map = 0.0;        // mean over categories with n_gt >= 1
    int categories_in_mean = 0;
};

EvalResult evaluate_dataset(const std::vector<DetRecord>& dets,
                            const std::vector<GroundTruth>& gts, const EvalConfig& cfg);

// Per-category AP table in fixed (sorted) category order.
std::string format_ap_table(const EvalResult& result, ApMetric metric);

const char* metric_name(ApMetric metric);

}  // namespace odet
