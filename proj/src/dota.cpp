#include "odet/dota.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace odet {

namespace {

std::vector<std::string> tokenize(std::string_view line) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) tokens.emplace_back(line.substr(start, i - start));
    }
    return tokens;
}

double parse_coord(const std::string& token, int line_no) {
    double value = 0.0;
    const char* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
        throw ParseError("expected a numeric coordinate, got '" + token + "'", line_no);
    }
    return value;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

bool is_header_line(const std::vector<std::string>& tokens) {
    if (tokens.empty()) return false;
    const std::string& first = tokens.front();
    return first.rfind("imagesource", 0) == 0 || first.rfind("gsd", 0) == 0;
}

}  // namespace

std::vector<AnnotationRecord> parse_dota_annotation(std::string_view text) {
    std::vector<AnnotationRecord> records;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos
                                                                              : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        const auto tokens = tokenize(line);
        if (tokens.empty() || is_header_line(tokens)) continue;
        if (tokens.size() != 10) {
            throw ParseError("expected 10 tokens, got " + std::to_string(tokens.size()), line_no);
        }
        AnnotationRecord rec;
        for (int i = 0; i < 8; ++i) rec.quad[i] = parse_coord(tokens[i], line_no);
        rec.category = tokens[8];
        if (tokens[9] == "0") {
            rec.difficult = 0;
        } else if (tokens[9] == "1") {
            rec.difficult = 1;
        } else {
            throw ParseError("difficult flag must be 0 or 1, got '" + tokens[9] + "'", line_no);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::string serialize_dota_annotation(std::span<const AnnotationRecord> records) {
    std::string out;
    for (const AnnotationRecord& rec : records) {
        for (int i = 0; i < 8; ++i) {
            out += format_double(rec.quad[i]);
            out += ' ';
        }
        out += rec.category;
        out += ' ';
        out += std::to_string(rec.difficult);
        out += '\n';
    }
    return out;
}

GroundTruth annotation_to_ground_truth(const AnnotationRecord& rec, const std::string& image_id) {
    return GroundTruth{image_id, make_quad(rec.quad), rec.category, rec.difficult != 0};
}

namespace {

std::vector<int> axis_starts(int dim, int size, int stride) {
    std::vector<int> starts;
    for (int k = 0;; ++k) {
        const int s = k * stride;
        if (s + size >= dim) break;
        starts.push_back(s);
    }
    const int last = std::max(0, dim - size);
    if (starts.empty() || starts.back() != last) starts.push_back(last);
    return starts;
}

}  // namespace

std::vector<Window> patch_grid(int width, int height, const PatchSpec& spec) {
    if (width < 1 || height < 1) throw ValidationError("patch_grid: empty image");
    if (spec.overlap < 0 || spec.overlap >= spec.size) {
        throw ValidationError("patch_grid: overlap must satisfy 0 <= overlap < size");
    }
    const auto xs = axis_starts(width, spec.size, spec.stride());
    const auto ys = axis_starts(height, spec.size, spec.stride());
    std::vector<Window> windows;
    windows.reserve(xs.size() * ys.size());
    for (int y : ys) {
        for (int x : xs) {
            windows.push_back(Window{x, y, std::min(spec.size, width - x),
                                     std::min(spec.size, height - y)});
        }
    }
    return windows;
}

namespace {

Polygon window_polygon(const Window& win) {
    return Polygon{{Point{static_cast<double>(win.x), static_cast<double>(win.y)},
                    Point{static_cast<double>(win.x + win.w), static_cast<double>(win.y)},
                    Point{static_cast<double>(win.x + win.w), static_cast<double>(win.y + win.h)},
                    Point{static_cast<double>(win.x), static_cast<double>(win.y + win.h)}}};
}

// Collapses the shortest edge by intersecting its neighbouring edges, the
// usual devkit reduction for clipped quads that gained corners.
Polygon reduce_to_quad(Polygon poly) {
    auto& v = poly.vertices;
    while (v.size() > 4) {
        std::size_t shortest = 0;
        double best = std::numeric_limits<double>::max();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const Point& a = v[i];
            const Point& b = v[(i + 1) % v.size()];
            const double len = (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
            if (len < best) {
                best = len;
                shortest = i;
            }
        }
        const std::size_t n = v.size();
        const Point& p0 = v[(shortest + n - 1) % n];
        const Point& p1 = v[shortest];
        const Point& p2 = v[(shortest + 1) % n];
        const Point& p3 = v[(shortest + 2) % n];
        const double a1 = p1.y - p0.y, b1 = p0.x - p1.x, c1 = a1 * p0.x + b1 * p0.y;
        const double a2 = p3.y - p2.y, b2 = p2.x - p3.x, c2 = a2 * p2.x + b2 * p2.y;
        const double det = a1 * b2 - a2 * b1;
        Point merged;
        if (std::fabs(det) < 1e-12) {
            merged = Point{(p1.x + p2.x) / 2.0, (p1.y + p2.y) / 2.0};
        } else {
            merged = Point{(b2 * c1 - b1 * c2) / det, (a1 * c2 - a2 * c1) / det};
        }
        v[shortest] = merged;
        v.erase(v.begin() + static_cast<std::ptrdiff_t>((shortest + 1) % n));
    }
    while (v.size() < 4 && !v.empty()) v.push_back(v.back());
    return orient_ccw(std::move(poly));
}

}  // namespace

std::vector<AnnotationRecord> clip_annotations_to_window(std::span<const AnnotationRecord> records,
                                                         const Window& window,
                                                         const ClipOptions& opt) {
    if (opt.keep_frac < 0.0 || opt.keep_frac > 1.0) {
        throw ValidationError("clip_annotations_to_window: keep_frac must lie in [0, 1]");
    }
    const Polygon win_poly = window_polygon(window);
    std::vector<AnnotationRecord> out;
    for (const AnnotationRecord& rec : records) {
        const Polygon poly = make_quad(rec.quad);
        const double area = polygon_area(poly);
        if (area <= 0.0) continue;
        const double inter = polygon_clip_area(poly, win_poly);
        const double frac = inter / area;
        if (frac < opt.keep_frac || inter <= 0.0) continue;

        Polygon local;
        if (frac >= 1.0 - 1e-9) {
            local = poly;  // fully inside: keep the original corners
        } else {
            local = reduce_to_quad(polygon_clip(poly, win_poly));
        }
        AnnotationRecord clipped;
        for (int i = 0; i < 4; ++i) {
            clipped.quad[2 * i] = local.vertices[i].x - window.x;
            clipped.quad[2 * i + 1] = local.vertices[i].y - window.y;
        }
        clipped.category = rec.category;
        clipped.difficult = (rec.difficult != 0 || frac < opt.difficult_frac) ? 1 : 0;
        out.push_back(std::move(clipped));
    }
    return out;
}

std::vector<DetRecord> merge_patch_detections(std::span<const PatchDetection> dets,
                                              std::span<const Window> windows, double nms_thresh,
                                              const std::string& image_id) {
    std::map<std::string, int> category_ids;
    std::vector<Detection> pooled;
    std::vector<const PatchDetection*> sources;
    for (const PatchDetection& det : dets) {
        if (det.window >= windows.size()) {
            throw ValidationError("merge_patch_detections: detection references window " +
                                  std::to_string(det.window) + " of " +
                                  std::to_string(windows.size()));
        }
        const Window& win = windows[det.window];
        Polygon global = det.poly;
        for (Point& p : global.vertices) {
            p.x += win.x;
            p.y += win.y;
        }
        const int cat = static_cast<int>(
            category_ids.try_emplace(det.category, static_cast<int>(category_ids.size()))
                .first->second);
        pooled.push_back(Detection{std::move(global), cat, det.score});
        sources.push_back(&det);
    }
    std::vector<DetRecord> merged;
    for (std::size_t idx : rotated_nms(pooled, nms_thresh)) {
        merged.push_back(DetRecord{image_id, sources[idx]->category, pooled[idx].score,
                                   pooled[idx].poly});
    }
    return merged;
}

SplitManifest ratio_split(std::vector<std::string> ids, std::uint64_t seed) {
    if (ids.empty()) throw ValidationError("ratio_split: no ids");
    std::mt19937_64 rng(seed);
    // Hand-rolled Fisher-Yates so manifests are identical across toolchains.
    for (std::size_t i = ids.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(ids[i], ids[j]);
    }
    const std::size_t n = ids.size();
    const std::size_t n_train = n * 5 / 10;
    const std::size_t n_val = n * 2 / 10;
    SplitManifest manifest;
    manifest.seed = seed;
    manifest.train.assign(ids.begin(), ids.begin() + n_train);
    manifest.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    manifest.test.assign(ids.begin() + n_train + n_val, ids.end());
    return manifest;
}

std::string serialize_split_manifest(const SplitManifest& manifest) {
    std::string out = "# seed " + std::to_string(manifest.seed) + "\n";
    for (const auto& id : manifest.train) out += "train " + id + "\n";
    for (const auto& id : manifest.val) out += "val " + id + "\n";
    for (const auto& id : manifest.test) out += "test " + id + "\n";
    return out;
}

std::vector<DetRecord> parse_detection_file(std::string_view text) {
    std::vector<DetRecord> dets;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos
                                                                              : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        if (tokens.size() != 11) {
            throw ParseError("expected 11 tokens (id category score quad), got " +
                                 std::to_string(tokens.size()),
                             line_no);
        }
        DetRecord det;
        det.image_id = tokens[0];
        det.category = tokens[1];
        det.score = parse_coord(tokens[2], line_no);
        std::array<double, 8> quad{};
        for (int i = 0; i < 8; ++i) quad[i] = parse_coord(tokens[3 + i], line_no);
        det.poly = make_quad(quad);
        dets.push_back(std::move(det));
    }
    return dets;
}

std::string serialize_detections(std::span<const DetRecord> dets) {
    std::string out;
    for (const DetRecord& det : dets) {
        if (det.poly.vertices.size() != 4) {
            throw ValidationError("serialize_detections: detections must be quads");
        }
        out += det.image_id + " " + det.category + " " + format_double(det.score);
        for (const Point& p : det.poly.vertices) {
            out += ' ';
            out += format_double(p.x);
            out += ' ';
            out += format_double(p.y);
        }
        out += '\n';
    }
    return out;
}

}  // namespace odet
