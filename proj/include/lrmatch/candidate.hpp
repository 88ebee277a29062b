#pragma once

#include <string>
#include <vector>

#include "lrmatch/geometry.hpp"
#include "lrmatch/network.hpp"

namespace lrmatch {

// Which measurement endpoint anchors the first node of a candidate path.
enum class Orientation { AtoB, BtoA };

inline const char* to_string(Orientation o) { return o == Orientation::AtoB ? "a->b" : "b->a"; }

// A shortest path in the street network proposed for one measurement segment.
struct CandidatePath {
  std::string seg_id;
  std::vector<NodeIndex> nodes;
  std::vector<EdgeIndex> edges;
  double path_length_m = 0.0;
  Orientation orientation = Orientation::AtoB;
  double anchor_start_m = 0.0;
  double anchor_end_m = 0.0;

  std::size_t edge_count() const { return edges.size(); }
};

// Measurement endpoints in candidate order: (anchored start, anchored end).
inline std::pair<Point, Point> oriented_endpoints(const MeasurementSegment& seg, Orientation o) {
  return o == Orientation::AtoB ? std::pair{seg.a, seg.b} : std::pair{seg.b, seg.a};
}

inline std::vector<Point> path_points(const StreetNetwork& net, const CandidatePath& c) {
  std::vector<Point> pts;
  pts.reserve(c.nodes.size());
  for (NodeIndex n : c.nodes) pts.push_back(net.point(n));
  return pts;
}

inline std::vector<std::string> node_fingerprint(const StreetNetwork& net, const CandidatePath& c) {
  std::vector<std::string> ids;
  ids.reserve(c.nodes.size());
  for (NodeIndex n : c.nodes) ids.push_back(net.node_id(n));
  return ids;
}

}  // namespace lrmatch
