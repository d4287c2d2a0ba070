#include "odet/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace odet {

std::vector<MatchFlag> match_detections(std::span<const Polygon> dets,
                                        std::span<const Polygon> gts,
                                        const std::vector<bool>& gt_difficult, double iou_thresh) {
    if (gts.size() != gt_difficult.size()) {
        throw ValidationError("match_detections: difficult flags do not align with gts");
    }
    std::vector<bool> taken(gts.size(), false);
    std::vector<MatchFlag> flags;
    flags.reserve(dets.size());
    for (const Polygon& det : dets) {
        int best = -1;
        double best_iou = 0.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (taken[g]) continue;
            const double iou = rotated_iou(det, gts[g]);
            if (iou >= iou_thresh && iou > best_iou) {
                best_iou = iou;
                best = static_cast<int>(g);
            }
        }
        if (best < 0) {
            flags.push_back(MatchFlag::FP);
        } else {
            taken[best] = true;
            flags.push_back(gt_difficult[best] ? MatchFlag::Ignored : MatchFlag::TP);
        }
    }
    return flags;
}

std::optional<double> average_precision(std::span<const MatchFlag> flags, int n_gt,
                                        ApMetric metric) {
    if (n_gt <= 0) return std::nullopt;

    std::vector<double> recall, precision;
    int tp = 0, fp = 0;
    for (MatchFlag f : flags) {
        if (f == MatchFlag::Ignored) continue;
        if (f == MatchFlag::TP) {
            ++tp;
        } else {
            ++fp;
        }
        recall.push_back(static_cast<double>(tp) / n_gt);
        precision.push_back(static_cast<double>(tp) / (tp + fp));
    }

    // Monotone envelope: best precision at any recall >= r.
    std::vector<double> envelope(precision.size());
    double best = 0.0;
    for (std::size_t i = precision.size(); i-- > 0;) {
        best = std::max(best, precision[i]);
        envelope[i] = best;
    }

    if (metric == ApMetric::AllPoint) {
        double ap = 0.0, prev_recall = 0.0;
        for (std::size_t i = 0; i < recall.size(); ++i) {
            if (recall[i] > prev_recall) {
                ap += (recall[i] - prev_recall) * envelope[i];
                prev_recall = recall[i];
            }
        }
        return ap;
    }

    // voc07: mean of the max precision at recall >= t for t in {0, 0.1, .., 1}.
    double acc = 0.0;
    for (int j = 0; j <= 10; ++j) {
        const double t = j / 10.0;
        double p = 0.0;
        for (std::size_t i = 0; i < recall.size(); ++i) {
            if (recall[i] >= t) {
                p = envelope[i];
                break;
            }
        }
        acc += p;
    }
    return acc / 11.0;
}

EvalResult evaluate_dataset(const std::vector<DetRecord>& dets,
                            const std::vector<GroundTruth>& gts, const EvalConfig& cfg) {
    if (!(cfg.iou_thresh > 0.0) || !(cfg.iou_thresh < 1.0)) {
        throw ValidationError("evaluate_dataset: iou threshold must lie in (0, 1)");
    }
    EvalResult result;
    for (const GroundTruth& gt : gts) result.per_category.try_emplace(gt.category);
    for (const DetRecord& det : dets) result.per_category.try_emplace(det.category);

    for (auto& [category, entry] : result.per_category) {
        // Ground truths of this category, grouped per image.
        std::map<std::string, std::vector<std::size_t>> gt_by_image;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gts[g].category != category) continue;
            gt_by_image[gts[g].image_id].push_back(g);
            if (!gts[g].difficult) ++entry.n_gt;
        }

        std::vector<std::size_t> det_idx;
        for (std::size_t d = 0; d < dets.size(); ++d) {
            if (dets[d].category == category) det_idx.push_back(d);
        }
        std::stable_sort(det_idx.begin(), det_idx.end(), [&](std::size_t a, std::size_t b) {
            return dets[a].score > dets[b].score;
        });

        std::map<std::string, std::vector<bool>> taken;
        for (const auto& [image, ids] : gt_by_image) {
            taken[image] = std::vector<bool>(ids.size(), false);
        }

        std::vector<MatchFlag> flags;
        flags.reserve(det_idx.size());
        for (std::size_t d : det_idx) {
            const DetRecord& det = dets[d];
            auto it = gt_by_image.find(det.image_id);
            int best = -1;
            double best_iou = 0.0;
            if (it != gt_by_image.end()) {
                auto& used = taken[det.image_id];
                for (std::size_t k = 0; k < it->second.size(); ++k) {
                    if (used[k]) continue;
                    const double iou = rotated_iou(det.poly, gts[it->second[k]].poly);
                    if (iou >= cfg.iou_thresh && iou > best_iou) {
                        best_iou = iou;
                        best = static_cast<int>(k);
                    }
                }
            }
            if (best < 0) {
                flags.push_back(MatchFlag::FP);
                ++entry.fp;
            } else {
                taken[det.image_id][best] = true;
                if (gts[it->second[best]].difficult) {
                    flags.push_back(MatchFlag::Ignored);
                } else {
                    flags.push_back(MatchFlag::TP);
                    ++entry.tp;
                }
            }
        }
        entry.ap = average_precision(flags, entry.n_gt, cfg.metric);
    }

    double acc = 0.0;
    for (const auto& [category, entry] : result.per_category) {
        if (entry.ap) {
            acc += *entry.ap;
            ++result.categories_in_mean;
        }
    }
    result.map = result.categories_in_mean > 0 ? acc / result.categories_in_mean : 0.0;
    return result;
}

const char* metric_name(ApMetric metric) {
    return metric == ApMetric::Voc07 ? "voc07-11point" : "all-point";
}

std::string format_ap_table(const EvalResult& result, ApMetric metric) {
    std::size_t name_width = 8;
    for (const auto& [category, entry] : result.per_category) {
        name_width = std::max(name_width, category.size());
    }
    char line[256];
    std::string out;
    std::snprintf(line, sizeof(line), "%-*s  %8s  %6s  %6s  %6s\n",
                  static_cast<int>(name_width), "category", "AP(%)", "n_gt", "TP", "FP");
    out += line;
    for (const auto& [category, entry] : result.per_category) {
        if (entry.ap) {
            std::snprintf(line, sizeof(line), "%-*s  %8.2f  %6d  %6d  %6d\n",
                          static_cast<int>(name_width), category.c_str(), 100.0 * *entry.ap,
                          entry.n_gt, entry.tp, entry.fp);
        } else {
            std::snprintf(line, sizeof(line), "%-*s  %8s  %6d  %6d  %6d\n",
                          static_cast<int>(name_width), category.c_str(), "-", entry.n_gt,
                          entry.tp, entry.fp);
        }
        out += line;
    }
    std::snprintf(line, sizeof(line), "mAP(%s) = %.4f over %d categories\n",
                  metric_name(metric), 100.0 * result.map, result.categories_in_mean);
    out += line;
    return out;
}

}  // namespace odet
