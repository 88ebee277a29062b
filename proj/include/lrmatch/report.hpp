#pragma once

// Post-run analytics and file formats: normalized score tables, ranked
// curves, cross-criterion pairs, worst-N extraction, and the CSV / GeoJSON
// layers written for each run.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrmatch/errors.hpp"
#include "lrmatch/io.hpp"
#include "lrmatch/matcher.hpp"
#include "lrmatch/network.hpp"

namespace lrmatch {

using nlohmann::json;

struct ScoreRow {
  std::string seg_id;
  CriterionId criterion_used = CriterionId::RC;
  CriterionScores raw;
  CriterionScores normalized;

  friend bool operator==(const ScoreRow&, const ScoreRow&) = default;
};

struct ScoreTable {
  std::vector<ScoreRow> rows;

  friend bool operator==(const ScoreTable&, const ScoreTable&) = default;
};

// Min-max scaling into [0, 1]; a constant column maps to 0.
inline std::vector<double> min_max_normalize(const std::vector<double>& v) {
  std::vector<double> out(v.size(), 0.0);
  if (v.empty()) return out;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double span = *hi - *lo;
  if (!(span > 0.0)) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / span;
  return out;
}

namespace detail {

inline std::vector<const MatchResult*> matched_only(const std::vector<MatchResult>& results) {
  std::vector<const MatchResult*> out;
  for (const auto& r : results) {
    if (r.matched()) out.push_back(&r);
  }
  return out;
}

inline std::vector<double> column(const std::vector<const MatchResult*>& rs, CriterionId c) {
  std::vector<double> v;
  v.reserve(rs.size());
  for (const auto* r : rs) v.push_back(r->scores.get(c));
  return v;
}

}  // namespace detail

inline ScoreTable score_table(const std::vector<MatchResult>& results) {
  const auto rs = detail::matched_only(results);
  std::array<std::vector<double>, 4> norm;
  for (std::size_t c = 0; c < 4; ++c) {
    norm[c] = min_max_normalize(detail::column(rs, kAllCriteria[c]));
  }
  ScoreTable t;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    t.rows.push_back({rs[i]->seg_id, rs[i]->criterion_used, rs[i]->scores,
                      {norm[0][i], norm[1][i], norm[2][i], norm[3][i]}});
  }
  return t;
}

struct RankPoint {
  std::size_t rank = 0;  // 1-based
  double value = 0.0;
};

inline std::vector<RankPoint> rank_curve(const std::vector<MatchResult>& results,
                                         CriterionId criterion) {
  const auto rs = detail::matched_only(results);
  if (rs.empty()) throw EmptyRun();
  std::vector<double> v = min_max_normalize(detail::column(rs, criterion));
  std::sort(v.begin(), v.end());
  std::vector<RankPoint> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back({i + 1, v[i]});
  return out;
}

struct CorrelationPoint {
  std::string seg_id;
  double used = 0.0;
  double other = 0.0;
};

// One point per matched segment, both axes normalized over the matched set.
inline std::vector<CorrelationPoint> correlation_pairs(const std::vector<MatchResult>& results,
                                                       CriterionId used, CriterionId other) {
  const auto rs = detail::matched_only(results);
  if (rs.empty()) throw EmptyRun();
  for (const auto* r : rs) {
    if (r->criterion_used != used) {
      throw Error(std::string("results were matched with ") + to_string(r->criterion_used) +
                  ", not " + to_string(used));
    }
  }
  const auto x = min_max_normalize(detail::column(rs, used));
  const auto y = min_max_normalize(detail::column(rs, other));
  std::vector<CorrelationPoint> out;
  out.reserve(rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) out.push_back({rs[i]->seg_id, x[i], y[i]});
  return out;
}

struct WorstNExtract {
  CriterionId criterion = CriterionId::RC;
  std::size_t n = 0;
  std::vector<std::string> seg_ids;  // worst first
};

// Default extract sizes per criterion: 50 for LC/AC, 300 for RC/SC.
inline std::size_t default_worst_n(CriterionId c) {
  return (c == CriterionId::LC || c == CriterionId::AC) ? 50 : 300;
}

inline WorstNExtract worst_n(const std::vector<MatchResult>& results, CriterionId criterion,
                             std::size_t n) {
  if (n == 0) throw Error("worst_n needs n >= 1");
  auto rs = detail::matched_only(results);
  if (rs.empty()) throw EmptyRun();
  std::sort(rs.begin(), rs.end(), [&](const MatchResult* a, const MatchResult* b) {
    const double sa = a->scores.get(criterion);
    const double sb = b->scores.get(criterion);
    if (sa != sb) return sa > sb;
    return a->seg_id < b->seg_id;
  });
  WorstNExtract out{criterion, n, {}};
  for (std::size_t i = 0; i < std::min(n, rs.size()); ++i) out.seg_ids.push_back(rs[i]->seg_id);
  return out;
}

// ---------------------------------------------------------------------------
// CSV layers

inline std::string score_table_csv(const ScoreTable& t) {
  std::ostringstream out;
  out << "seg_id,criterion_used,lc,rc,sc,ac,lc_norm,rc_norm,sc_norm,ac_norm\n";
  for (const ScoreRow& r : t.rows) {
    out << io::csv_escape(r.seg_id) << ',' << to_string(r.criterion_used);
    for (CriterionId c : kAllCriteria) out << ',' << io::format_double(r.raw.get(c));
    for (CriterionId c : kAllCriteria) out << ',' << io::format_double(r.normalized.get(c));
    out << '\n';
  }
  return out.str();
}

inline ScoreTable parse_score_table_csv(const std::string& text, const std::string& path = "") {
  std::istringstream in(text);
  const io::CsvTable t = io::parse_csv(in, path);
  ScoreTable out;
  const std::size_t cid = t.require_column("seg_id");
  const std::size_t ccrit = t.require_column("criterion_used");
  const std::array<const char*, 4> raw = {"lc", "rc", "sc", "ac"};
  const std::array<const char*, 4> nrm = {"lc_norm", "rc_norm", "sc_norm", "ac_norm"};
  for (const io::CsvRow& row : t.rows) {
    ScoreRow r;
    r.seg_id = row.fields[cid];
    const auto crit = parse_criterion(row.fields[ccrit]);
    if (!crit) throw SchemaError(path, row.line, "bad criterion");
    r.criterion_used = *crit;
    std::array<double, 4> rv{}, nv{};
    for (std::size_t c = 0; c < 4; ++c) {
      rv[c] = io::require_double(t, row, t.require_column(raw[c]));
      nv[c] = io::require_double(t, row, t.require_column(nrm[c]));
    }
    r.raw = {rv[0], rv[1], rv[2], rv[3]};
    r.normalized = {nv[0], nv[1], nv[2], nv[3]};
    out.rows.push_back(std::move(r));
  }
  return out;
}

namespace detail {

inline std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(sep);
    out += v[i];
  }
  return out;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace detail

// Full per-segment results; list columns are ';'-separated ids.
inline std::string results_csv(const StreetNetwork& net, const std::vector<MatchResult>& results) {
  std::ostringstream out;
  out << "seg_id,sensor_id,status,reason,criterion,candidates,orientation,anchor_start_m,"
         "anchor_end_m,path_length_m,lc,rc,sc,ac,nodes,edges,overridden\n";
  for (const MatchResult& r : results) {
    out << io::csv_escape(r.seg_id) << ',' << io::csv_escape(r.sensor_id) << ','
        << (r.matched() ? "matched" : "unmatched") << ',' << r.reason << ','
        << to_string(r.criterion_used) << ',' << r.candidates_evaluated << ',';
    if (r.matched() && r.chosen) {
      const CandidatePath& c = *r.chosen;
      std::vector<std::string> edges;
      for (EdgeIndex e : c.edges) edges.push_back(net.edge(e).id);
      out << to_string(c.orientation) << ',' << io::format_double(c.anchor_start_m) << ','
          << io::format_double(c.anchor_end_m) << ',' << io::format_double(c.path_length_m);
      for (CriterionId k : kAllCriteria) out << ',' << io::format_double(r.scores.get(k));
      out << ',' << io::csv_escape(detail::join(node_fingerprint(net, c), ';')) << ','
          << io::csv_escape(detail::join(edges, ';'));
    } else {
      out << ",,,,,,,,,";
    }
    out << ',' << (r.overridden ? 1 : 0) << '\n';
  }
  return out.str();
}

inline std::vector<MatchResult> parse_results_csv(const std::string& text,
                                                  const StreetNetwork& net,
                                                  const std::string& path = "results") {
  std::istringstream in(text);
  const io::CsvTable t = io::parse_csv(in, path);
  auto col = [&](const char* name) { return t.require_column(name); };
  std::vector<MatchResult> out;
  for (const io::CsvRow& row : t.rows) {
    auto f = [&](const char* name) -> const std::string& { return row.fields[col(name)]; };
    MatchResult r;
    r.seg_id = f("seg_id");
    r.sensor_id = f("sensor_id");
    r.reason = f("reason");
    const auto crit = parse_criterion(f("criterion"));
    if (!crit) throw SchemaError(path, row.line, "bad criterion");
    r.criterion_used = *crit;
    r.candidates_evaluated = static_cast<std::size_t>(std::stoull(f("candidates")));
    r.overridden = f("overridden") == "1";
    if (f("status") == "matched") {
      r.status = MatchStatus::Matched;
      CandidatePath c;
      c.seg_id = r.seg_id;
      c.orientation = f("orientation") == "b->a" ? Orientation::BtoA : Orientation::AtoB;
      c.anchor_start_m = io::require_double(t, row, col("anchor_start_m"));
      c.anchor_end_m = io::require_double(t, row, col("anchor_end_m"));
      c.path_length_m = io::require_double(t, row, col("path_length_m"));
      for (const std::string& id : detail::split(f("nodes"), ';')) {
        auto n = net.find_node(id);
        if (!n) throw SchemaError(path, row.line, "unknown node '" + id + "'");
        c.nodes.push_back(*n);
      }
      std::set<std::string> ids;
      for (const std::string& id : detail::split(f("edges"), ';')) {
        auto e = net.find_edge(id);
        if (!e) throw SchemaError(path, row.line, "unknown edge '" + id + "'");
        c.edges.push_back(*e);
        ids.insert(id);
      }
      r.street_edges.assign(ids.begin(), ids.end());
      r.scores = {io::require_double(t, row, col("lc")), io::require_double(t, row, col("rc")),
                  io::require_double(t, row, col("sc")), io::require_double(t, row, col("ac"))};
      r.chosen = std::move(c);
    } else {
      r.status = MatchStatus::Unmatched;
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// GeoJSON layers. Coordinates are lon/lat when the network carries a
// geographic origin, projected meters otherwise.

inline json coordinate(const StreetNetwork& net, Point p) {
  if (net.origin()) {
    const LonLat g = unproject(*net.origin(), p);
    return json::array({g.lon, g.lat});
  }
  return json::array({p.x, p.y});
}

inline json line_string(const StreetNetwork& net, std::span<const Point> pts) {
  json coords = json::array();
  for (Point p : pts) coords.push_back(coordinate(net, p));
  return {{"type", "LineString"}, {"coordinates", coords}};
}

inline double to_degrees(double rad) { return rad * 180.0 / std::numbers::pi; }

inline json scores_json(const CriterionScores& s) {
  return {{"lc_m", s.lc},
          {"rc_rad", s.rc},
          {"sc_rad", s.sc},
          {"ac_m2", s.ac},
          {"rc_deg", to_degrees(s.rc)},
          {"sc_deg", to_degrees(s.sc)}};
}

// One feature per line keeps large layers diff-able; the bytes depend only on
// the inputs.
inline std::string feature_collection(const std::vector<json>& features) {
  std::string out = "{\"type\":\"FeatureCollection\",\"features\":[";
  for (std::size_t i = 0; i < features.size(); ++i) {
    out += i ? ",\n" : "\n";
    out += features[i].dump();
  }
  out += features.empty() ? "]}\n" : "\n]}\n";
  return out;
}

inline json matched_feature(const StreetNetwork& net, const MatchResult& r) {
  const CandidatePath& c = *r.chosen;
  std::vector<std::string> edges;
  for (EdgeIndex e : c.edges) edges.push_back(net.edge(e).id);
  json props = {{"seg_id", r.seg_id},
                {"sensor_id", r.sensor_id},
                {"status", "matched"},
                {"criterion", to_string(r.criterion_used)},
                {"candidates_evaluated", r.candidates_evaluated},
                {"orientation", to_string(c.orientation)},
                {"nodes", node_fingerprint(net, c)},
                {"path_edges", edges},
                {"street_edges", r.street_edges},
                {"scores", scores_json(r.scores)},
                {"overridden", r.overridden}};
  const auto pts = path_points(net, c);
  return {{"type", "Feature"}, {"geometry", line_string(net, pts)}, {"properties", props}};
}

inline json segment_feature(const StreetNetwork& net, const MeasurementSegment& seg,
                            json props) {
  const std::array<Point, 2> pts = {seg.a, seg.b};
  return {{"type", "Feature"}, {"geometry", line_string(net, pts)}, {"properties", props}};
}

inline std::string matched_geojson(const StreetNetwork& net,
                                   const std::vector<MatchResult>& results) {
  std::vector<json> feats;
  for (const auto& r : results) {
    if (r.matched() && r.chosen) feats.push_back(matched_feature(net, r));
  }
  return feature_collection(feats);
}

inline std::string unmatched_geojson(const StreetNetwork& net, const MeasurementNetwork& meas,
                                     const std::vector<MatchResult>& results) {
  std::vector<json> feats;
  for (const auto& r : results) {
    if (r.matched()) continue;
    const MeasurementSegment* seg = meas.find(r.seg_id);
    if (!seg) continue;
    feats.push_back(segment_feature(net, *seg,
                                    {{"seg_id", r.seg_id},
                                     {"sensor_id", r.sensor_id},
                                     {"status", "unmatched"},
                                     {"reason", r.reason},
                                     {"overridden", r.overridden}}));
  }
  return feature_collection(feats);
}

// Worst-N layer: the measurement segments plus their matched paths.
inline std::string worst_geojson(const StreetNetwork& net, const std::vector<MatchResult>& results,
                                 const WorstNExtract& w) {
  std::map<std::string, const MatchResult*> by_id;
  for (const auto& r : results) by_id[r.seg_id] = &r;
  std::vector<json> feats;
  for (std::size_t i = 0; i < w.seg_ids.size(); ++i) {
    json f = matched_feature(net, *by_id.at(w.seg_ids[i]));
    f["properties"]["worst_rank"] = i + 1;
    f["properties"]["worst_criterion"] = to_string(w.criterion);
    feats.push_back(std::move(f));
  }
  return feature_collection(feats);
}

// Rebuilds the score table from a matched GeoJSON layer.
inline ScoreTable score_table_from_geojson(const std::string& text) {
  const json doc = json::parse(text);
  std::vector<MatchResult> rs;
  for (const auto& f : doc.at("features")) {
    const auto& p = f.at("properties");
    MatchResult r;
    r.seg_id = p.at("seg_id").get<std::string>();
    r.status = MatchStatus::Matched;
    r.criterion_used = parse_criterion(p.at("criterion").get<std::string>()).value();
    const auto& s = p.at("scores");
    r.scores = {s.at("lc_m").get<double>(), s.at("rc_rad").get<double>(),
                s.at("sc_rad").get<double>(), s.at("ac_m2").get<double>()};
    rs.push_back(std::move(r));
  }
  return score_table(rs);
}

// Street network and measurement segments as two layers, for overlay views.
inline std::string street_geojson(const StreetNetwork& net) {
  std::vector<json> feats;
  for (const StreetEdge& e : net.edges()) {
    const std::array<Point, 2> pts = {net.point(e.from), net.point(e.to)};
    feats.push_back({{"type", "Feature"},
                     {"geometry", line_string(net, pts)},
                     {"properties",
                      {{"edge_id", e.id},
                       {"from", net.node_id(e.from)},
                       {"to", net.node_id(e.to)},
                       {"length_m", e.length_m}}}});
  }
  return feature_collection(feats);
}

inline std::string measurement_geojson(const StreetNetwork& net, const MeasurementNetwork& meas) {
  std::vector<json> feats;
  for (const auto& s : meas.segments) {
    feats.push_back(segment_feature(net, s, {{"seg_id", s.id}, {"sensor_id", s.sensor_id}}));
  }
  return feature_collection(feats);
}

inline json summary_json(const RunSummary& s, std::size_t k, CriterionId criterion,
                         const std::vector<MatchResult>& results) {
  json unmatched = json::array();
  for (const auto& r : results) {
    if (!r.matched()) unmatched.push_back({{"seg_id", r.seg_id}, {"reason", r.reason}});
  }
  json hist = json::object();
  for (const auto& [count, edges] : s.reuse_histogram) hist[std::to_string(count)] = edges;
  json reused = json::object();
  for (const auto& [edge, count] : s.edge_reuse) {
    if (count > 1) reused[edge] = count;
  }
  return {{"k", k},
          {"criterion", to_string(criterion)},
          {"segments", s.segments},
          {"matched", s.matched},
          {"unmatched", s.unmatched},
          {"unmatched_reasons", s.unmatched_reasons},
          {"unmatched_segments", unmatched},
          {"edge_reuse_histogram", hist},
          {"reused_edges", reused}};
}

}  // namespace lrmatch
