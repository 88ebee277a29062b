#pragma once

// The two input networks: the directed street network (high resolution) and
// the undirected measurement network (low resolution), plus loading and
// node consolidation.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrmatch/errors.hpp"
#include "lrmatch/geometry.hpp"
#include "lrmatch/io.hpp"
#include "lrmatch/spatial_index.hpp"

namespace lrmatch {

using NodeIndex = std::uint32_t;
using EdgeIndex = std::uint32_t;

enum class CoordMode { Metric, LonLat };

inline CoordMode parse_coord_mode(std::string_view s) {
  if (s == "metric") return CoordMode::Metric;
  if (s == "lonlat") return CoordMode::LonLat;
  throw Error("unknown coordinate mode '" + std::string(s) + "' (expected metric or lonlat)");
}

struct StreetEdge {
  std::string id;
  NodeIndex from = 0;
  NodeIndex to = 0;
  double length_m = 0.0;
};

// Minimal disjoint-set forest.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0u); }

  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // Keeps the smaller root, which makes representatives order-independent.
  bool unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
    return true;
  }

 private:
  std::vector<std::uint32_t> parent_;
};

struct NodeRecord {
  std::string id;
  Point p;
  std::size_t line = 0;
};

struct EdgeRecord {
  std::string id;
  std::string from;
  std::string to;
  std::optional<double> length_m;
  std::size_t line = 0;
};

// Directed street graph. Node indices follow ascending node id, so comparing
// index sequences orders paths the same way as comparing id sequences.
class StreetNetwork {
 public:
  StreetNetwork() = default;

  static StreetNetwork build(std::vector<NodeRecord> nodes, std::vector<EdgeRecord> edges,
                             const std::string& nodes_file = "nodes",
                             const std::string& edges_file = "edges") {
    StreetNetwork net;
    std::sort(nodes.begin(), nodes.end(),
              [](const NodeRecord& a, const NodeRecord& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (i > 0 && nodes[i].id == nodes[i - 1].id) {
        throw SchemaError(nodes_file, std::max(nodes[i].line, nodes[i - 1].line),
                          "duplicate node id '" + nodes[i].id + "'");
      }
      if (!std::isfinite(nodes[i].p.x) || !std::isfinite(nodes[i].p.y)) {
        throw SchemaError(nodes_file, nodes[i].line, "non-finite coordinate");
      }
      net.node_ids_.push_back(nodes[i].id);
      net.points_.push_back(nodes[i].p);
      net.by_id_.emplace(nodes[i].id, static_cast<NodeIndex>(i));
    }

    std::sort(edges.begin(), edges.end(),
              [](const EdgeRecord& a, const EdgeRecord& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const EdgeRecord& e = edges[i];
      if (i > 0 && e.id == edges[i - 1].id) {
        throw SchemaError(edges_file, std::max(e.line, edges[i - 1].line),
                          "duplicate edge id '" + e.id + "'");
      }
      auto from = net.find_node(e.from);
      auto to = net.find_node(e.to);
      if (!from) throw SchemaError(edges_file, e.line, "unknown node '" + e.from + "'");
      if (!to) throw SchemaError(edges_file, e.line, "unknown node '" + e.to + "'");
      const double straight = euclidean(net.points_[*from], net.points_[*to]);
      const double length = e.length_m.value_or(straight);
      if (!(length > 0.0) || !std::isfinite(length)) {
        throw SchemaError(edges_file, e.line, "edge length must be positive");
      }
      if (length < 0.99 * straight) {
        throw SchemaError(edges_file, e.line,
                          "edge length " + io::format_double(length) +
                              " undercuts straight-line distance " +
                              io::format_double(straight));
      }
      net.edges_.push_back({e.id, *from, *to, length});
    }
    net.finish();
    return net;
  }

  std::size_t node_count() const { return points_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool empty() const { return points_.empty(); }

  const std::string& node_id(NodeIndex n) const { return node_ids_[n]; }
  Point point(NodeIndex n) const { return points_[n]; }
  const std::vector<Point>& points() const { return points_; }
  const StreetEdge& edge(EdgeIndex e) const { return edges_[e]; }
  const std::vector<StreetEdge>& edges() const { return edges_; }

  // Outgoing edges, ordered by (head node, length, edge id).
  const std::vector<EdgeIndex>& out_edges(NodeIndex n) const { return out_[n]; }

  std::optional<NodeIndex> find_node(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<EdgeIndex> find_edge(const std::string& id) const {
    auto it = std::lower_bound(edges_.begin(), edges_.end(), id,
                               [](const StreetEdge& e, const std::string& v) { return e.id < v; });
    if (it == edges_.end() || it->id != id) return std::nullopt;
    return static_cast<EdgeIndex>(it - edges_.begin());
  }

  // Shortest edge from -> to; ties go to the smaller edge id.
  std::optional<EdgeIndex> best_edge(NodeIndex from, NodeIndex to) const {
    for (EdgeIndex e : out_[from]) {
      if (edges_[e].to == to) return e;
    }
    return std::nullopt;
  }

  const SpatialIndex& index() const { return index_; }

  std::size_t weak_component_count() const {
    UnionFind uf(node_count());
    std::size_t count = node_count();
    for (const StreetEdge& e : edges_) {
      if (uf.unite(e.from, e.to)) --count;
    }
    return count;
  }

  // Set when the input was geographic; metric coordinates are relative to it.
  const std::optional<LonLat>& origin() const { return origin_; }
  void set_origin(std::optional<LonLat> origin) { origin_ = origin; }

 private:
  void finish() {
    out_.assign(points_.size(), {});
    for (EdgeIndex e = 0; e < edges_.size(); ++e) out_[edges_[e].from].push_back(e);
    for (auto& list : out_) {
      std::sort(list.begin(), list.end(), [&](EdgeIndex a, EdgeIndex b) {
        const StreetEdge& ea = edges_[a];
        const StreetEdge& eb = edges_[b];
        if (ea.to != eb.to) return ea.to < eb.to;
        if (ea.length_m != eb.length_m) return ea.length_m < eb.length_m;
        return ea.id < eb.id;
      });
    }
    index_ = SpatialIndex(points_);
  }

  std::vector<std::string> node_ids_;
  std::vector<Point> points_;
  std::unordered_map<std::string, NodeIndex> by_id_;
  std::vector<StreetEdge> edges_;
  std::vector<std::vector<EdgeIndex>> out_;
  SpatialIndex index_;
  std::optional<LonLat> origin_;
};

struct MeasurementSegment {
  std::string id;
  std::string sensor_id;
  Point a;
  Point b;
  double length_m = 0.0;
};

struct MeasurementNetwork {
  // Sorted by id.
  std::vector<MeasurementSegment> segments;

  const MeasurementSegment* find(const std::string& id) const {
    auto it = std::lower_bound(
        segments.begin(), segments.end(), id,
        [](const MeasurementSegment& s, const std::string& v) { return s.id < v; });
    if (it == segments.end() || it->id != id) return nullptr;
    return &*it;
  }
};

namespace detail {

inline LonLat bbox_center(const std::vector<LonLat>& pts) {
  if (pts.empty()) return {};
  double minlon = pts[0].lon, maxlon = minlon, minlat = pts[0].lat, maxlat = minlat;
  for (const LonLat& p : pts) {
    minlon = std::min(minlon, p.lon);
    maxlon = std::max(maxlon, p.lon);
    minlat = std::min(minlat, p.lat);
    maxlat = std::max(maxlat, p.lat);
  }
  return {0.5 * (minlon + maxlon), 0.5 * (minlat + maxlat)};
}

inline MeasurementNetwork finish_segments(std::vector<MeasurementSegment> segs,
                                          const std::string& file) {
  std::sort(segs.begin(), segs.end(),
            [](const MeasurementSegment& a, const MeasurementSegment& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < segs.size(); ++i) {
    if (segs[i].id == segs[i - 1].id) {
      throw SchemaError(file, 0, "duplicate segment id '" + segs[i].id + "'");
    }
  }
  return MeasurementNetwork{std::move(segs)};
}

inline std::string json_scalar_to_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number()) return io::format_double(v.get<double>());
  return v.dump();
}

}  // namespace detail

// Reads `node_id,x,y` and `edge_id,from,to[,length_m]`. In lon/lat mode the
// nodes are projected about their bounding-box center, which is kept as the
// network origin.
inline StreetNetwork load_street_network(const std::filesystem::path& nodes_file,
                                         const std::filesystem::path& edges_file,
                                         CoordMode mode = CoordMode::Metric) {
  const io::CsvTable nt = io::read_csv(nodes_file);
  const std::size_t cid = nt.require_column("node_id");
  const std::size_t cx = nt.require_column("x");
  const std::size_t cy = nt.require_column("y");

  std::vector<NodeRecord> nodes;
  std::vector<LonLat> geo;
  nodes.reserve(nt.rows.size());
  for (const io::CsvRow& row : nt.rows) {
    const double x = io::require_double(nt, row, cx);
    const double y = io::require_double(nt, row, cy);
    if (row.fields[cid].empty()) throw SchemaError(nt.path, row.line, "empty node_id");
    if (mode == CoordMode::LonLat) {
      try {
        check_lonlat({x, y});
      } catch (const InvalidCoordinate& e) {
        throw SchemaError(nt.path, row.line, e.what());
      }
      geo.push_back({x, y});
    }
    nodes.push_back({row.fields[cid], {x, y}, row.line});
  }
  std::optional<LonLat> origin;
  if (mode == CoordMode::LonLat) {
    origin = detail::bbox_center(geo);
    for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i].p = project(*origin, geo[i]);
  }

  const io::CsvTable et = io::read_csv(edges_file);
  const std::size_t eid = et.require_column("edge_id");
  const std::size_t efrom = et.require_column("from");
  const std::size_t eto = et.require_column("to");
  const auto elen = et.column("length_m");
  std::vector<EdgeRecord> edges;
  edges.reserve(et.rows.size());
  for (const io::CsvRow& row : et.rows) {
    EdgeRecord rec{row.fields[eid], row.fields[efrom], row.fields[eto], std::nullopt, row.line};
    if (rec.id.empty()) throw SchemaError(et.path, row.line, "empty edge_id");
    if (elen && !row.fields[*elen].empty()) rec.length_m = io::require_double(et, row, *elen);
    edges.push_back(std::move(rec));
  }

  StreetNetwork net = StreetNetwork::build(std::move(nodes), std::move(edges), nt.path, et.path);
  net.set_origin(origin);
  return net;
}

// Accepts a GeoJSON FeatureCollection of LineStrings carrying `sensor_id`, or
// a CSV `segment_id,sensor_id,ax,ay,bx,by`. Polylines are cut into one
// segment per consecutive vertex pair. For lon/lat input, `origin` (when
// given) is the projection origin, otherwise the data's bounding-box center.
inline MeasurementNetwork load_measurements(const std::filesystem::path& file,
                                            CoordMode mode = CoordMode::Metric,
                                            std::optional<LonLat> origin = std::nullopt) {
  const std::string path = file.string();
  auto to_point = [&](LonLat raw, std::size_t row) -> LonLat {
    if (mode == CoordMode::LonLat) {
      try {
        check_lonlat(raw);
      } catch (const InvalidCoordinate& e) {
        throw SchemaError(path, row, e.what());
      }
    }
    return raw;
  };

  std::vector<MeasurementSegment> segs;
  std::vector<std::pair<LonLat, LonLat>> raw;  // pre-projection endpoints

  const std::string ext = file.extension().string();
  if (ext == ".csv") {
    const io::CsvTable t = io::read_csv(file);
    const std::size_t cid = t.require_column("segment_id");
    const std::size_t csensor = t.require_column("sensor_id");
    const std::size_t cax = t.require_column("ax");
    const std::size_t cay = t.require_column("ay");
    const std::size_t cbx = t.require_column("bx");
    const std::size_t cby = t.require_column("by");
    for (const io::CsvRow& row : t.rows) {
      if (row.fields[cid].empty()) throw SchemaError(path, row.line, "empty segment_id");
      if (row.fields[csensor].empty()) throw SchemaError(path, row.line, "missing sensor_id");
      const LonLat a = to_point({io::require_double(t, row, cax), io::require_double(t, row, cay)},
                                row.line);
      const LonLat b = to_point({io::require_double(t, row, cbx), io::require_double(t, row, cby)},
                                row.line);
      if (a.lon == b.lon && a.lat == b.lat) {
        throw SchemaError(path, row.line, "segment endpoints coincide");
      }
      segs.push_back({row.fields[cid], row.fields[csensor], {}, {}, 0.0});
      raw.emplace_back(a, b);
    }
  } else {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(io::read_file(file));
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(path, 0, std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
        !doc.contains("features") || !doc["features"].is_array()) {
      throw SchemaError(path, 0, "expected a GeoJSON FeatureCollection");
    }
    const auto& features = doc["features"];
    for (std::size_t f = 0; f < features.size(); ++f) {
      const auto& feat = features[f];
      const std::size_t row = f + 1;  // feature ordinal stands in for the row
      const auto props = feat.value("properties", nlohmann::json::object());
      if (!props.is_object() || !props.contains("sensor_id") || props["sensor_id"].is_null()) {
        throw SchemaError(path, row, "feature missing sensor_id");
      }
      const std::string sensor = detail::json_scalar_to_string(props["sensor_id"]);
      const auto& geom = feat.value("geometry", nlohmann::json());
      if (!geom.is_object() || geom.value("type", "") != "LineString" ||
          !geom.contains("coordinates") || !geom["coordinates"].is_array()) {
        throw SchemaError(path, row, "feature geometry must be a LineString");
      }
      const auto& coords = geom["coordinates"];
      if (coords.size() < 2) throw SchemaError(path, row, "LineString needs at least 2 vertices");
      std::vector<LonLat> verts;
      for (const auto& c : coords) {
        if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
          throw SchemaError(path, row, "malformed coordinate");
        }
        verts.push_back(to_point({c[0].get<double>(), c[1].get<double>()}, row));
      }
      const std::string base = feat.contains("id") && !feat["id"].is_null()
                                   ? detail::json_scalar_to_string(feat["id"])
                                   : "f" + std::to_string(f);
      for (std::size_t j = 0; j + 1 < verts.size(); ++j) {
        if (verts[j].lon == verts[j + 1].lon && verts[j].lat == verts[j + 1].lat) {
          throw SchemaError(path, row, "repeated consecutive vertex");
        }
        segs.push_back({base + "#" + std::to_string(j), sensor, {}, {}, 0.0});
        raw.emplace_back(verts[j], verts[j + 1]);
      }
    }
  }

  if (mode == CoordMode::LonLat && !origin) {
    std::vector<LonLat> all;
    for (const auto& [a, b] : raw) {
      all.push_back(a);
      all.push_back(b);
    }
    origin = detail::bbox_center(all);
  }
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (mode == CoordMode::LonLat) {
      segs[i].a = project(*origin, raw[i].first);
      segs[i].b = project(*origin, raw[i].second);
    } else {
      segs[i].a = {raw[i].first.lon, raw[i].first.lat};
      segs[i].b = {raw[i].second.lon, raw[i].second.lat};
    }
    segs[i].length_m = euclidean(segs[i].a, segs[i].b);
  }
  return detail::finish_segments(std::move(segs), path);
}

// Merges street nodes closer than `tolerance` (single linkage, transitive),
// repeating on the merged nodes until no two remaining nodes are within the
// tolerance. Each cluster becomes one node at the centroid of its original
// members, named after its smallest member id.
inline StreetNetwork consolidate(const StreetNetwork& net, double tolerance) {
  if (!(tolerance >= 0.0)) throw Error("consolidation tolerance must be >= 0");
  const std::size_t n = net.node_count();
  UnionFind uf(n);

  // Current cluster representatives and their centroids.
  std::vector<NodeIndex> reps(n);
  std::iota(reps.begin(), reps.end(), 0u);
  std::vector<Point> centers = net.points();
  for (;;) {
    const SpatialIndex idx(centers);
    bool merged = false;
    for (std::uint32_t i = 0; i < centers.size(); ++i) {
      for (std::uint32_t j : idx.within(centers[i], tolerance)) {
        if (j > i && uf.unite(reps[i], reps[j])) merged = true;
      }
    }
    if (!merged) break;
    std::map<NodeIndex, std::pair<Point, std::size_t>> acc;
    for (NodeIndex v = 0; v < n; ++v) {
      auto& [sum, count] = acc[uf.find(v)];
      sum = sum + net.point(v);
      ++count;
    }
    reps.clear();
    centers.clear();
    for (const auto& [root, sc] : acc) {
      reps.push_back(root);
      centers.push_back((1.0 / static_cast<double>(sc.second)) * sc.first);
    }
  }

  std::map<NodeIndex, Point> root_point;
  for (std::size_t i = 0; i < reps.size(); ++i) root_point[uf.find(reps[i])] = centers[i];

  std::vector<NodeRecord> nodes;
  nodes.reserve(root_point.size());
  for (const auto& [root, p] : root_point) nodes.push_back({net.node_id(root), p, 0});

  std::vector<EdgeRecord> edges;
  for (const StreetEdge& e : net.edges()) {
    const NodeIndex from = uf.find(e.from);
    const NodeIndex to = uf.find(e.to);
    if (from == to) continue;
    const Point pf = root_point[from];
    const Point pt = root_point[to];
    const bool moved = !(pf == net.point(e.from)) || !(pt == net.point(e.to));
    const double length = moved ? std::max(e.length_m, euclidean(pf, pt)) : e.length_m;
    edges.push_back({e.id, net.node_id(from), net.node_id(to), length, 0});
  }
  StreetNetwork out = StreetNetwork::build(std::move(nodes), std::move(edges));
  out.set_origin(net.origin());
  return out;
}

}  // namespace lrmatch
