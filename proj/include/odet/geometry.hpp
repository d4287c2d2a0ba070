#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "odet/tensor.hpp"

namespace odet {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

// Convex polygon, vertices counterclockwise (signed area >= 0).
struct Polygon {
    std::vector<Point> vertices;
};

// Center, side lengths and counterclockwise rotation in radians; theta is kept
// in the canonical range [-pi/2, pi/2).
struct RotatedBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
    double theta = 0.0;
};

RotatedBox normalize_box(RotatedBox box);
Polygon box_to_polygon(const RotatedBox& box);

Polygon make_quad(const std::array<double, 8>& coords);  // orientation-normalized

double polygon_area(const Polygon& poly);  // signed shoelace area
// Reorders vertices counterclockwise if the winding is clockwise.
Polygon orient_ccw(Polygon poly);

// Sutherland-Hodgman intersection of convex polygons.
Polygon polygon_clip(const Polygon& subject, const Polygon& clip);
double polygon_clip_area(const Polygon& subject, const Polygon& clip);

double rotated_iou(const Polygon& a, const Polygon& b);
double rotated_iou(const RotatedBox& a, const RotatedBox& b);

struct Detection {
    Polygon poly;
    int category = 0;
    double score = 0.0;
};

// Greedy suppression: highest score first (ties by ascending input index); a
// detection is kept iff its IoU with every previously kept detection of the
// same category stays below the threshold. Returns kept indices in keep order.
std::vector<std::size_t> rotated_nms(const std::vector<Detection>& detections,
                                     double iou_thresh);

// Axis-aligned IoU of two (x, y, w, h) rectangles; closed-form cross-check.
double aligned_iou(double ax, double ay, double aw, double ah, double bx, double by, double bw,
                   double bh);

}  // namespace odet
