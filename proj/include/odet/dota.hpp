#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "odet/eval.hpp"
#include "odet/geometry.hpp"

namespace odet {

// One annotation line: quad corners x1 y1 .. x4 y4, category token, difficult flag.
struct AnnotationRecord {
    std::array<double, 8> quad{};
    std::string category;
    int difficult = 0;
};

// Header lines (starting "imagesource" or "gsd") and blank lines are skipped;
// any other line must carry exactly 10 tokens.
std::vector<AnnotationRecord> parse_dota_annotation(std::string_view text);
std::string serialize_dota_annotation(std::span<const AnnotationRecord> records);

GroundTruth annotation_to_ground_truth(const AnnotationRecord& rec, const std::string& image_id);

struct PatchSpec {
    int size = 1024;
    int overlap = 200;
    int stride() const { return size - overlap; }
};

struct Window {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
};

// Overlapping tiling: starts at multiples of the stride, the final start
// clamped so the last window ends at the image edge; windows shrink to the
// image when it is smaller than the patch. The windows cover every pixel.
std::vector<Window> patch_grid(int width, int height, const PatchSpec& spec);

struct ClipOptions {
    double keep_frac = 0.5;       // drop instances retaining less area than this
    double difficult_frac = 0.7;  // retained fraction below this marks difficult
};

// Intersects each instance with the window and rewrites it in window-local
// coordinates. Intersections with more than four corners are reduced back to
// quads by collapsing their shortest edges.
std::vector<AnnotationRecord> clip_annotations_to_window(std::span<const AnnotationRecord> records,
                                                         const Window& window,
                                                         const ClipOptions& opt);

struct PatchDetection {
    std::size_t window = 0;  // index into the grid
    std::string category;
    double score = 0.0;
    Polygon poly;  // window-local coordinates
};

// Translates patch detections into image coordinates, pools them, and runs
// per-category rotated NMS.
std::vector<DetRecord> merge_patch_detections(std::span<const PatchDetection> dets,
                                              std::span<const Window> windows, double nms_thresh,
                                              const std::string& image_id);

struct SplitManifest {
    std::vector<std::string> train, val, test;
    std::uint64_t seed = 0;
};

// Deterministic 5:2:3 split: seeded shuffle, then floor(n/2) / floor(n/5) /
// remainder.
SplitManifest ratio_split(std::vector<std::string> ids, std::uint64_t seed);

std::string serialize_split_manifest(const SplitManifest& manifest);

// One detection per line: image_id category score x1 y1 x2 y2 x3 y3 x4 y4.
std::vector<DetRecord> parse_detection_file(std::string_view text);
std::string serialize_detections(std::span<const DetRecord> dets);

}  // namespace odet
