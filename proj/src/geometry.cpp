#include "odet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace odet {

namespace {

constexpr double kSliverArea = 1e-12;  // intersections below this count as empty

double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

Point line_intersection(const Point& a, const Point& b, const Point& p, const Point& q) {
    const double a1 = b.y - a.y, b1 = a.x - b.x;
    const double c1 = a1 * a.x + b1 * a.y;
    const double a2 = q.y - p.y, b2 = p.x - q.x;
    const double c2 = a2 * p.x + b2 * p.y;
    const double det = a1 * b2 - a2 * b1;
    return Point{(b2 * c1 - b1 * c2) / det, (a1 * c2 - a2 * c1) / det};
}

}  // namespace

RotatedBox normalize_box(RotatedBox box) {
    if (!(box.w > 0.0) || !(box.h > 0.0)) {
        throw ValidationError("rotated box sides must be positive");
    }
    const double pi = std::numbers::pi;
    double t = std::fmod(box.theta + pi / 2.0, pi);
    if (t < 0.0) t += pi;
    box.theta = t - pi / 2.0;
    return box;
}

Polygon box_to_polygon(const RotatedBox& box) {
    const RotatedBox b = normalize_box(box);
    const double c = std::cos(b.theta), s = std::sin(b.theta);
    const double hw = b.w / 2.0, hh = b.h / 2.0;
    // Local corners in counterclockwise order.
    const std::array<Point, 4> local{Point{-hw, -hh}, Point{hw, -hh}, Point{hw, hh},
                                     Point{-hw, hh}};
    Polygon poly;
    for (const Point& p : local) {
        poly.vertices.push_back(Point{b.cx + c * p.x - s * p.y, b.cy + s * p.x + c * p.y});
    }
    return poly;
}

double polygon_area(const Polygon& poly) {
    const auto& v = poly.vertices;
    if (v.size() < 3) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Point& p = v[i];
        const Point& q = v[(i + 1) % v.size()];
        acc += p.x * q.y - q.x * p.y;
    }
    return acc / 2.0;
}

Polygon orient_ccw(Polygon poly) {
    if (polygon_area(poly) < 0.0) std::reverse(poly.vertices.begin(), poly.vertices.end());
    return poly;
}

Polygon make_quad(const std::array<double, 8>& coords) {
    Polygon poly;
    for (int i = 0; i < 4; ++i) poly.vertices.push_back(Point{coords[2 * i], coords[2 * i + 1]});
    return orient_ccw(std::move(poly));
}

Polygon polygon_clip(const Polygon& subject, const Polygon& clip) {
    if (subject.vertices.size() < 3 || clip.vertices.size() < 3) return {};
    std::vector<Point> output = subject.vertices;
    const auto& cv = clip.vertices;
    for (std::size_t i = 0; i < cv.size() && !output.empty(); ++i) {
        const Point& a = cv[i];
        const Point& b = cv[(i + 1) % cv.size()];
        std::vector<Point> input;
        input.swap(output);
        for (std::size_t j = 0; j < input.size(); ++j) {
            const Point& cur = input[j];
            const Point& nxt = input[(j + 1) % input.size()];
            const bool cur_in = cross(a, b, cur) >= 0.0;
            const bool nxt_in = cross(a, b, nxt) >= 0.0;
            if (cur_in) {
                output.push_back(cur);
                if (!nxt_in) output.push_back(line_intersection(a, b, cur, nxt));
            } else if (nxt_in) {
                output.push_back(line_intersection(a, b, cur, nxt));
            }
        }
    }
    return Polygon{std::move(output)};
}

double polygon_clip_area(const Polygon& subject, const Polygon& clip) {
    const double area = polygon_area(polygon_clip(subject, clip));
    return area > kSliverArea ? area : 0.0;
}

double rotated_iou(const Polygon& a, const Polygon& b) {
    const double area_a = polygon_area(a);
    const double area_b = polygon_area(b);
    const double inter = polygon_clip_area(a, b);
    const double denom = area_a + area_b - inter;
    if (denom <= 0.0) return 0.0;
    return inter / denom;
}

double rotated_iou(const RotatedBox& a, const RotatedBox& b) {
    return rotated_iou(box_to_polygon(a), box_to_polygon(b));
}

std::vector<std::size_t> rotated_nms(const std::vector<Detection>& detections,
                                     double iou_thresh) {
    for (const Detection& d : detections) {
        if (!std::isfinite(d.score)) throw ValidationError("rotated_nms: non-finite score");
    }
    std::vector<std::size_t> order(detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return detections[i].score > detections[j].score;
    });

    std::vector<std::size_t> kept;
    for (std::size_t idx : order) {
        bool suppressed = false;
        for (std::size_t k : kept) {
            if (detections[k].category != detections[idx].category) continue;
            if (rotated_iou(detections[k].poly, detections[idx].poly) >= iou_thresh) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(idx);
    }
    return kept;
}

double aligned_iou(double ax, double ay, double aw, double ah, double bx, double by, double bw,
                   double bh) {
    const double ix = std::max(0.0, std::min(ax + aw, bx + bw) - std::max(ax, bx));
    const double iy = std::max(0.0, std::min(ay + ah, by + bh) - std::max(ay, by));
    const double inter = ix * iy;
    const double denom = aw * ah + bw * bh - inter;
    return denom <= 0.0 ? 0.0 : inter / denom;
}

}  // namespace odet
