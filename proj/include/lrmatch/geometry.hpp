#pragma once

// Planar primitives used by the scoring criteria. All angles are signed
// radians in (-pi, pi], counterclockwise positive.

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lrmatch/errors.hpp"

namespace lrmatch {

inline constexpr double kEarthRadiusM = 6371000.0;

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double euclidean(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline double squared_distance(Point a, Point b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Maps any angle into (-pi, pi].
inline double normalize_angle(double a) {
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

class DirectedSegment {
 public:
  DirectedSegment(Point a, Point b) : a_(a), b_(b) {
    if (!std::isfinite(a.x) || !std::isfinite(a.y) || !std::isfinite(b.x) ||
        !std::isfinite(b.y)) {
      throw DegenerateGeometry("segment has non-finite coordinates");
    }
    if (a == b) throw DegenerateGeometry("zero-length segment");
  }

  Point a() const { return a_; }
  Point b() const { return b_; }
  Point direction() const { return b_ - a_; }
  double length() const { return euclidean(a_, b_); }
  DirectedSegment reversed() const { return {b_, a_}; }

 private:
  Point a_;
  Point b_;
};

// Rotation taking the direction of `u` onto the direction of `v`.
inline double signed_angle(const DirectedSegment& u, const DirectedSegment& v) {
  const Point du = u.direction();
  const Point dv = v.direction();
  const double angle = std::atan2(cross(du, dv), dot(du, dv));
  return angle == -std::numbers::pi ? std::numbers::pi : angle;
}

struct AngleSequence {
  // running[r - 1] is the turn at interior vertex r, for r = 1..l-1.
  std::vector<double> running;
  // straight[s] is the angle from the base to link s, for s = 0..l-1.
  std::vector<double> straight;
};

inline AngleSequence angle_sequence(std::span<const Point> path, const DirectedSegment& base) {
  if (path.size() < 2) throw DegenerateGeometry("path needs at least two points");
  std::vector<DirectedSegment> links;
  links.reserve(path.size() - 1);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    links.emplace_back(path[i], path[i + 1]);
  }
  AngleSequence out;
  out.straight.reserve(links.size());
  out.running.reserve(links.size() - 1);
  for (std::size_t s = 0; s < links.size(); ++s) {
    out.straight.push_back(signed_angle(base, links[s]));
    if (s > 0) out.running.push_back(signed_angle(links[s - 1], links[s]));
  }
  return out;
}

// Unsigned area enclosed between `path` and the line carrying `base`, with
// lobes on either side of the line counted positively.
inline double absolute_area(std::span<const Point> path, const DirectedSegment& base) {
  if (path.size() < 2) throw DegenerateGeometry("path needs at least two points");
  const Point origin = base.a();
  const Point dir = base.direction();
  const double len = base.length();
  const Point ux{dir.x / len, dir.y / len};

  double area = 0.0;
  double t0 = dot(path[0] - origin, ux);
  double d0 = cross(ux, path[0] - origin);
  for (std::size_t i = 1; i < path.size(); ++i) {
    const double t1 = dot(path[i] - origin, ux);
    const double d1 = cross(ux, path[i] - origin);
    const double dt = std::abs(t1 - t0);
    if ((d0 > 0.0 && d1 < 0.0) || (d0 < 0.0 && d1 > 0.0)) {
      const double f = d0 / (d0 - d1);
      area += 0.5 * dt * (f * std::abs(d0) + (1.0 - f) * std::abs(d1));
    } else {
      area += 0.5 * dt * std::abs(d0 + d1);
    }
    t0 = t1;
    d0 = d1;
  }
  return area;
}

struct LonLat {
  double lon = 0.0;
  double lat = 0.0;
};

inline void check_lonlat(LonLat p) {
  if (!std::isfinite(p.lon) || !std::isfinite(p.lat) || p.lat < -90.0 || p.lat > 90.0 ||
      p.lon < -180.0 || p.lon > 180.0) {
    throw InvalidCoordinate("coordinate out of range: lon=" + std::to_string(p.lon) +
                            " lat=" + std::to_string(p.lat));
  }
}

// Equirectangular projection about `origin`, in meters.
inline Point project(LonLat origin, LonLat p) {
  constexpr double kRad = std::numbers::pi / 180.0;
  const double coslat = std::cos(origin.lat * kRad);
  return {kEarthRadiusM * (p.lon - origin.lon) * kRad * coslat,
          kEarthRadiusM * (p.lat - origin.lat) * kRad};
}

inline LonLat unproject(LonLat origin, Point p) {
  constexpr double kDeg = 180.0 / std::numbers::pi;
  const double coslat = std::cos(origin.lat * std::numbers::pi / 180.0);
  return {origin.lon + p.x / (kEarthRadiusM * coslat) * kDeg,
          origin.lat + p.y / kEarthRadiusM * kDeg};
}

inline std::vector<Point> local_projection(LonLat origin, std::span<const LonLat> points) {
  check_lonlat(origin);
  std::vector<Point> out;
  out.reserve(points.size());
  for (const LonLat& p : points) {
    check_lonlat(p);
    out.push_back(project(origin, p));
  }
  return out;
}

}  // namespace lrmatch
