#pragma once

// Oriented 3D boxes, rotated-footprint IoU, and IoU-based ID/FP labeling.
//
// Scene file (CSV, header required):
//   kind,class_id,x,y,z,l,w,h,yaw,confidence
// kind is `pred` or `gt`; (x, y, z) is the box centre; yaw rotates the
// length axis counter-clockwise from +x. Ground-truth rows may leave
// confidence empty.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "lsvos/errors.hpp"
#include "lsvos/feature_store.hpp"

namespace lsvos {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// Maps any angle into (-pi, pi].
inline double normalize_yaw(double yaw) {
  const double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(yaw, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  if (r > std::numbers::pi) r -= two_pi;
  return r;
}

class Box3D {
 public:
  Box3D(double x, double y, double z, double length, double width, double height, double yaw)
      : x_(x), y_(y), z_(z), length_(length), width_(width), height_(height), yaw_(normalize_yaw(yaw)) {
    if (!(length > 0.0) || !(width > 0.0) || !(height > 0.0)) {
      throw InvalidInput("Box3D: sizes must be strictly positive");
    }
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) || !std::isfinite(yaw) ||
        !std::isfinite(length) || !std::isfinite(width) || !std::isfinite(height)) {
      throw InvalidInput("Box3D: non-finite parameter");
    }
  }

  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }
  double length() const { return length_; }
  double width() const { return width_; }
  double height() const { return height_; }
  double yaw() const { return yaw_; }

  double z_min() const { return z_ - 0.5 * height_; }
  double z_max() const { return z_ + 0.5 * height_; }
  double footprint_area() const { return length_ * width_; }
  double volume() const { return length_ * width_ * height_; }

  /// Footprint corners, counter-clockwise.
  std::array<Vec2, 4> corners() const {
    const double c = std::cos(yaw_);
    const double s = std::sin(yaw_);
    const double hl = 0.5 * length_;
    const double hw = 0.5 * width_;
    const std::array<Vec2, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
    std::array<Vec2, 4> out{};
    for (std::size_t i = 0; i < 4; ++i) {
      out[i] = {x_ + c * local[i].x - s * local[i].y, y_ + s * local[i].x + c * local[i].y};
    }
    return out;
  }

  bool contains(double px, double py, double pz) const {
    if (pz < z_min() || pz > z_max()) return false;
    const double dx = px - x_;
    const double dy = py - y_;
    const double c = std::cos(yaw_);
    const double s = std::sin(yaw_);
    const double u = c * dx + s * dy;
    const double v = -s * dx + c * dy;
    return std::abs(u) <= 0.5 * length_ && std::abs(v) <= 0.5 * width_;
  }

  double bounding_radius() const { return 0.5 * std::hypot(length_, width_); }

 private:
  double x_, y_, z_;
  double length_, width_, height_;
  double yaw_;
};

struct Detection {
  Box3D box;
  int class_id = 0;
  double confidence = 1.0;
};

struct GroundTruth {
  Box3D box;
  int class_id = 0;
};

namespace detail {

inline double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

/// Shoelace formula; positive for counter-clockwise polygons.
inline double polygon_area(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

/// Sutherland-Hodgman: clips `subject` by each edge of the convex CCW `clip`.
inline std::vector<Vec2> clip_convex(std::vector<Vec2> subject, const std::array<Vec2, 4>& clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % clip.size()];
    std::vector<Vec2> input = std::move(subject);
    subject.clear();
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Vec2& cur = input[i];
      const Vec2& prev = input[(i + input.size() - 1) % input.size()];
      const double d_cur = cross(a, b, cur);
      const double d_prev = cross(a, b, prev);
      if (d_cur >= 0.0) {
        if (d_prev < 0.0) {
          const double t = d_prev / (d_prev - d_cur);
          subject.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
        }
        subject.push_back(cur);
      } else if (d_prev >= 0.0) {
        const double t = d_prev / (d_prev - d_cur);
        subject.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
      }
    }
  }
  return subject;
}

}  // namespace detail

/// Area of the intersection of the two yaw-rotated footprints.
inline double footprint_intersection(const Box3D& a, const Box3D& b) {
  const double centre_dist = std::hypot(a.x() - b.x(), a.y() - b.y());
  if (centre_dist > a.bounding_radius() + b.bounding_radius()) return 0.0;
  // Work in a's frame: a is axis-aligned at the origin, which keeps the
  // clipping exact for coincident boxes.
  const double c = std::cos(a.yaw());
  const double s = std::sin(a.yaw());
  const double dx = b.x() - a.x();
  const double dy = b.y() - a.y();
  const Box3D a_local(0.0, 0.0, a.z(), a.length(), a.width(), a.height(), 0.0);
  const Box3D b_local(c * dx + s * dy, -s * dx + c * dy, b.z(), b.length(), b.width(), b.height(), b.yaw() - a.yaw());
  const auto ca = a_local.corners();
  const auto cb = b_local.corners();
  std::vector<Vec2> poly(ca.begin(), ca.end());
  poly = detail::clip_convex(std::move(poly), cb);
  if (poly.size() < 3) return 0.0;
  return std::max(0.0, detail::polygon_area(poly));
}

/// Bird's-eye-view IoU of the rotated footprints.
inline double iou_bev(const Box3D& a, const Box3D& b) {
  const double inter = footprint_intersection(a, b);
  const double uni = a.footprint_area() + b.footprint_area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Volumetric IoU: footprint intersection times vertical overlap.
inline double iou_3d(const Box3D& a, const Box3D& b) {
  const double dz = std::min(a.z_max(), b.z_max()) - std::max(a.z_min(), b.z_min());
  if (dz <= 0.0) return 0.0;
  const double inter = footprint_intersection(a, b) * dz;
  const double uni = a.volume() + b.volume() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Per-class IoU thresholds for TP/FP labeling. Index = class id.
using IouThresholds = std::vector<double>;

/// 0.7 for vehicles, 0.5 for pedestrians and cyclists (class order
/// vehicle, pedestrian, cyclist).
inline IouThresholds default_iou_thresholds() { return {0.7, 0.5, 0.5}; }

/// ID iff the best 3D IoU against a same-class ground truth reaches the
/// prediction's class threshold. Cross-class overlap never counts.
inline std::vector<FeatureLabel> label_detections(const std::vector<Detection>& preds,
                                                  const std::vector<GroundTruth>& gts,
                                                  const IouThresholds& thresholds) {
  std::vector<FeatureLabel> labels;
  labels.reserve(preds.size());
  for (const auto& p : preds) {
    if (p.class_id < 0 || static_cast<std::size_t>(p.class_id) >= thresholds.size()) {
      throw InvalidInput("label_detections: no IoU threshold for class " + std::to_string(p.class_id));
    }
    double best = 0.0;
    for (const auto& g : gts) {
      if (g.class_id == p.class_id) best = std::max(best, iou_3d(p.box, g.box));
    }
    labels.push_back(best >= thresholds[static_cast<std::size_t>(p.class_id)] ? FeatureLabel::id
                                                                              : FeatureLabel::fp);
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Scene CSV

struct Scene {
  std::vector<Detection> predictions;
  std::vector<GroundTruth> ground_truths;
};

inline void write_scene_csv(std::ostream& os, const Scene& scene) {
  os << "kind,class_id,x,y,z,l,w,h,yaw,confidence\n";
  std::ostringstream line;
  line.precision(17);
  auto emit = [&](const char* kind, int cls, const Box3D& b, const std::string& conf) {
    line.str("");
    line << kind << ',' << cls << ',' << b.x() << ',' << b.y() << ',' << b.z() << ',' << b.length()
         << ',' << b.width() << ',' << b.height() << ',' << b.yaw() << ',' << conf << '\n';
    os << line.str();
  };
  for (const auto& g : scene.ground_truths) emit("gt", g.class_id, g.box, "");
  std::ostringstream conf;
  conf.precision(17);
  for (const auto& p : scene.predictions) {
    conf.str("");
    conf << p.confidence;
    emit("pred", p.class_id, p.box, conf.str());
  }
}

inline Scene read_scene_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("kind,class_id", 0) != 0) {
    throw FormatError("scene CSV: missing header");
  }
  Scene scene;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() == 9) cells.emplace_back();
    if (cells.size() != 10) throw FormatError("scene CSV line " + std::to_string(line_no) + ": expected 10 columns");
    try {
      const int cls = std::stoi(cells[1]);
      Box3D box(std::stod(cells[2]), std::stod(cells[3]), std::stod(cells[4]), std::stod(cells[5]),
                std::stod(cells[6]), std::stod(cells[7]), std::stod(cells[8]));
      if (cells[0] == "gt") {
        scene.ground_truths.push_back({box, cls});
      } else if (cells[0] == "pred") {
        const double conf = cells[9].empty() ? 1.0 : std::stod(cells[9]);
        if (conf < 0.0 || conf > 1.0) throw InvalidInput("confidence outside [0, 1]");
        scene.predictions.push_back({box, cls, conf});
      } else {
        throw FormatError("scene CSV line " + std::to_string(line_no) + ": unknown kind '" + cells[0] + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw FormatError("scene CSV line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::out_of_range&) {
      throw FormatError("scene CSV line " + std::to_string(line_no) + ": value out of range");
    }
  }
  return scene;
}

}  // namespace lsvos
