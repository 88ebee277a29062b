#pragma once

// The four scores of a candidate path against a measurement segment. Lower
// is better for all of them.
//
//   LC  |anchor gaps + path length - segment length|        meters
//   RC  mean |turn| at the path's interior nodes             radians
//   SC  mean |angle| between each path link and the segment  radians
//   AC  unsigned area between the path and the segment line  square meters

#include <array>
#include <cctype>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "lrmatch/candidate.hpp"
#include "lrmatch/geometry.hpp"

namespace lrmatch {

enum class CriterionId { LC, RC, SC, AC };

inline constexpr std::array<CriterionId, 4> kAllCriteria = {CriterionId::LC, CriterionId::RC,
                                                            CriterionId::SC, CriterionId::AC};

inline const char* to_string(CriterionId c) {
  switch (c) {
    case CriterionId::LC: return "LC";
    case CriterionId::RC: return "RC";
    case CriterionId::SC: return "SC";
    case CriterionId::AC: return "AC";
  }
  return "?";
}

inline std::optional<CriterionId> parse_criterion(std::string_view s) {
  std::string up(s);
  for (char& ch : up) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (up == "LC") return CriterionId::LC;
  if (up == "RC") return CriterionId::RC;
  if (up == "SC") return CriterionId::SC;
  if (up == "AC") return CriterionId::AC;
  return std::nullopt;
}

struct CriterionScores {
  double lc = 0.0;
  double rc = 0.0;
  double sc = 0.0;
  double ac = 0.0;

  double get(CriterionId c) const {
    switch (c) {
      case CriterionId::LC: return lc;
      case CriterionId::RC: return rc;
      case CriterionId::SC: return sc;
      case CriterionId::AC: return ac;
    }
    return lc;
  }

  friend bool operator==(const CriterionScores&, const CriterionScores&) = default;
};

namespace criteria {

inline double length_score(double anchor_start_m, double path_length_m, double anchor_end_m,
                           double seg_length_m) {
  return std::abs(anchor_start_m + path_length_m + anchor_end_m - seg_length_m);
}

inline double running_score(std::span<const Point> path) {
  if (path.size() < 3) return 0.0;
  double sum = 0.0;
  for (std::size_t r = 1; r + 1 < path.size(); ++r) {
    sum += std::abs(signed_angle({path[r - 1], path[r]}, {path[r], path[r + 1]}));
  }
  return sum / static_cast<double>(path.size() - 2);
}

inline double straight_score(std::span<const Point> path, const DirectedSegment& base) {
  double sum = 0.0;
  for (std::size_t s = 0; s + 1 < path.size(); ++s) {
    sum += std::abs(signed_angle(base, {path[s], path[s + 1]}));
  }
  return sum / static_cast<double>(path.size() - 1);
}

}  // namespace criteria

inline double score_lc(const CandidatePath& c, const MeasurementSegment& seg) {
  return criteria::length_score(c.anchor_start_m, c.path_length_m, c.anchor_end_m, seg.length_m);
}

inline double score_rc(const StreetNetwork& net, const CandidatePath& c) {
  const auto pts = path_points(net, c);
  return criteria::running_score(pts);
}

inline double score_sc(const StreetNetwork& net, const CandidatePath& c,
                       const MeasurementSegment& seg) {
  const auto [start, end] = oriented_endpoints(seg, c.orientation);
  const auto pts = path_points(net, c);
  return criteria::straight_score(pts, DirectedSegment(start, end));
}

inline double score_ac(const StreetNetwork& net, const CandidatePath& c,
                       const MeasurementSegment& seg) {
  const auto [start, end] = oriented_endpoints(seg, c.orientation);
  const auto pts = path_points(net, c);
  return absolute_area(pts, DirectedSegment(start, end));
}

inline CriterionScores score_all(const StreetNetwork& net, const CandidatePath& c,
                                 const MeasurementSegment& seg) {
  const auto [start, end] = oriented_endpoints(seg, c.orientation);
  const DirectedSegment base(start, end);
  const auto pts = path_points(net, c);
  return {score_lc(c, seg), criteria::running_score(pts), criteria::straight_score(pts, base),
          absolute_area(pts, base)};
}

}  // namespace lrmatch
