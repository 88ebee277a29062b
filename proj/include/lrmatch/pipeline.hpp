#pragma once

// End-to-end stages shared by the CLI and the tests: ingest to a prepared
// directory, match into a run directory, and derive the report files.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrmatch/io.hpp"
#include "lrmatch/matcher.hpp"
#include "lrmatch/network.hpp"
#include "lrmatch/overrides.hpp"
#include "lrmatch/report.hpp"

namespace lrmatch {

namespace fs = std::filesystem;

struct RunConfig {
  std::size_t k = 4;
  CriterionId criterion = CriterionId::RC;
  double tolerance_m = 4.0;
  CoordMode coords = CoordMode::Metric;
  std::map<CriterionId, std::size_t> worst_n = {{CriterionId::LC, 50},
                                                {CriterionId::RC, 300},
                                                {CriterionId::SC, 300},
                                                {CriterionId::AC, 50}};
  std::size_t threads = 0;  // 0 = hardware concurrency

  void validate() const {
    if (k < 1) throw Error("k must be >= 1");
    if (!(tolerance_m >= 0.0)) throw Error("tolerance must be >= 0");
    for (const auto& [c, n] : worst_n) {
      if (n < 1) throw Error(std::string("worst-n for ") + to_string(c) + " must be >= 1");
    }
  }
};

// Flat `key = value` file; `#` starts a comment. Unknown keys are errors.
inline std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::istringstream in(io::read_file(path));
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SchemaError(path.string(), lineno, "expected key = value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

inline void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& kv,
                         const std::string& source = "config") {
  auto number = [&](const std::string& key, const std::string& v) {
    auto d = io::parse_double(v);
    if (!d) throw SchemaError(source, 0, "'" + key + "' is not a number: " + v);
    return *d;
  };
  for (const auto& [key, value] : kv) {
    if (key == "k") {
      cfg.k = static_cast<std::size_t>(number(key, value));
    } else if (key == "criterion") {
      auto c = parse_criterion(value);
      if (!c) throw SchemaError(source, 0, "unknown criterion '" + value + "'");
      cfg.criterion = *c;
    } else if (key == "tolerance") {
      cfg.tolerance_m = number(key, value);
    } else if (key == "coords") {
      cfg.coords = parse_coord_mode(value);
    } else if (key == "threads") {
      cfg.threads = value == "auto" ? 0 : static_cast<std::size_t>(number(key, value));
    } else if (key.rfind("worst_", 0) == 0) {
      auto c = parse_criterion(key.substr(6));
      if (!c) throw SchemaError(source, 0, "unknown key '" + key + "'");
      cfg.worst_n[*c] = static_cast<std::size_t>(number(key, value));
    } else {
      throw SchemaError(source, 0, "unknown key '" + key + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// Prepared networks

struct PreparedData {
  StreetNetwork net;
  MeasurementNetwork measurements;
  nlohmann::json report;
};

inline PreparedData ingest(const fs::path& nodes, const fs::path& edges,
                           const fs::path& measurements, CoordMode mode, double tolerance_m) {
  StreetNetwork raw = load_street_network(nodes, edges, mode);
  const std::size_t nodes_before = raw.node_count();
  const std::size_t edges_before = raw.edge_count();
  const std::size_t comps_before = raw.weak_component_count();
  StreetNetwork net = consolidate(raw, tolerance_m);
  MeasurementNetwork meas = load_measurements(measurements, mode, net.origin());

  std::set<std::pair<double, double>> endpoints;
  for (const auto& s : meas.segments) {
    endpoints.insert({s.a.x, s.a.y});
    endpoints.insert({s.b.x, s.b.y});
  }
  nlohmann::json report = {
      {"coords", mode == CoordMode::LonLat ? "lonlat" : "metric"},
      {"tolerance_m", tolerance_m},
      {"street_nodes_before", nodes_before},
      {"street_nodes_after", net.node_count()},
      {"street_edges_before", edges_before},
      {"street_edges_after", net.edge_count()},
      {"weak_components_before", comps_before},
      {"weak_components_after", net.weak_component_count()},
      {"measurement_segments", meas.segments.size()},
      {"measurement_endpoints", endpoints.size()},
      {"origin", net.origin() ? nlohmann::json::array({net.origin()->lon, net.origin()->lat})
                              : nlohmann::json()}};
  return {std::move(net), std::move(meas), std::move(report)};
}

inline std::string nodes_csv(const StreetNetwork& net) {
  std::ostringstream out;
  out << "node_id,x,y\n";
  for (NodeIndex n = 0; n < net.node_count(); ++n) {
    out << io::csv_escape(net.node_id(n)) << ',' << io::format_double(net.point(n).x) << ','
        << io::format_double(net.point(n).y) << '\n';
  }
  return out.str();
}

inline std::string edges_csv(const StreetNetwork& net) {
  std::ostringstream out;
  out << "edge_id,from,to,length_m\n";
  for (const StreetEdge& e : net.edges()) {
    out << io::csv_escape(e.id) << ',' << io::csv_escape(net.node_id(e.from)) << ','
        << io::csv_escape(net.node_id(e.to)) << ',' << io::format_double(e.length_m) << '\n';
  }
  return out.str();
}

inline std::string segments_csv(const MeasurementNetwork& meas) {
  std::ostringstream out;
  out << "segment_id,sensor_id,ax,ay,bx,by\n";
  for (const auto& s : meas.segments) {
    out << io::csv_escape(s.id) << ',' << io::csv_escape(s.sensor_id) << ','
        << io::format_double(s.a.x) << ',' << io::format_double(s.a.y) << ','
        << io::format_double(s.b.x) << ',' << io::format_double(s.b.y) << '\n';
  }
  return out.str();
}

inline void write_prepared(const fs::path& dir, const PreparedData& data) {
  // Everything is rendered before the first write.
  const std::string n = nodes_csv(data.net);
  const std::string e = edges_csv(data.net);
  const std::string s = segments_csv(data.measurements);
  const std::string r = data.report.dump(2) + "\n";
  io::write_atomic(dir / "nodes.csv", n);
  io::write_atomic(dir / "edges.csv", e);
  io::write_atomic(dir / "segments.csv", s);
  io::write_atomic(dir / "ingest_report.json", r);
}

inline PreparedData load_prepared(const fs::path& dir) {
  PreparedData d;
  d.net = load_street_network(dir / "nodes.csv", dir / "edges.csv", CoordMode::Metric);
  d.measurements = load_measurements(dir / "segments.csv", CoordMode::Metric);
  if (fs::exists(dir / "ingest_report.json")) {
    d.report = nlohmann::json::parse(io::read_file(dir / "ingest_report.json"));
    const auto& o = d.report.value("origin", nlohmann::json());
    if (o.is_array() && o.size() == 2) d.net.set_origin(LonLat{o[0].get<double>(), o[1].get<double>()});
  }
  return d;
}

// ---------------------------------------------------------------------------
// Runs

inline fs::path run_file(const fs::path& run_dir, const std::string& run_id,
                         const std::string& layer, const std::string& ext) {
  return run_dir / (run_id + "." + layer + "." + ext);
}

struct RunOutput {
  std::vector<MatchResult> results;
  RunSummary summary;
  double wall_seconds = 0.0;
};

inline RunOutput run_match(const PreparedData& data, const RunConfig& cfg) {
  cfg.validate();
  if (data.net.empty()) throw EmptyNetwork();
  const auto t0 = std::chrono::steady_clock::now();
  RunOutput out;
  out.results = match_all(data.net, data.measurements, cfg.k, cfg.criterion, cfg.threads);
  out.summary = summarize(out.results);
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// The deterministic layers of a run: results, scores, matched, unmatched,
// summary. Wall time goes to a separate timing file.
inline void write_run(const fs::path& run_dir, const std::string& run_id, const PreparedData& data,
                      const RunConfig& cfg, const RunOutput& run) {
  const std::map<fs::path, std::string> files = {
      {run_file(run_dir, run_id, "results", "csv"), results_csv(data.net, run.results)},
      {run_file(run_dir, run_id, "scores", "csv"), score_table_csv(score_table(run.results))},
      {run_file(run_dir, run_id, "matched", "geojson"), matched_geojson(data.net, run.results)},
      {run_file(run_dir, run_id, "unmatched", "geojson"),
       unmatched_geojson(data.net, data.measurements, run.results)},
      {run_file(run_dir, run_id, "summary", "json"),
       summary_json(run.summary, cfg.k, cfg.criterion, run.results).dump(2) + "\n"},
      {run_file(run_dir, run_id, "timing", "json"),
       nlohmann::json({{"wall_seconds", run.wall_seconds}}).dump(2) + "\n"}};
  for (const auto& [path, content] : files) io::write_atomic(path, content);
}

struct LoadedRun {
  std::vector<MatchResult> results;
  std::size_t k = 4;
  CriterionId criterion = CriterionId::RC;
};

inline LoadedRun load_run(const fs::path& run_dir, const std::string& run_id,
                          const StreetNetwork& net) {
  LoadedRun run;
  const fs::path results = run_file(run_dir, run_id, "results", "csv");
  run.results = parse_results_csv(io::read_file(results), net, results.string());
  const auto summary =
      nlohmann::json::parse(io::read_file(run_file(run_dir, run_id, "summary", "json")));
  run.k = summary.at("k").get<std::size_t>();
  run.criterion = parse_criterion(summary.at("criterion").get<std::string>()).value();
  return run;
}

inline fs::path overrides_path(const fs::path& run_dir) { return run_dir / "overrides.jsonl"; }

// Report files: rank curves, correlation pairs, worst-N layers, network
// overlay layers, and the reviewed (override-applied) result layers.
inline std::vector<fs::path> write_report(const fs::path& run_dir, const std::string& run_id,
                                          const PreparedData& data, const RunConfig& cfg) {
  LoadedRun run = load_run(run_dir, run_id, data.net);
  const OverrideLog log(overrides_path(run_dir));
  apply_overrides(run.results, data.net, data.measurements, run.k, log.effective());

  std::map<fs::path, std::string> files;
  auto lower = [](CriterionId c) {
    std::string s = to_string(c);
    for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
  };
  for (CriterionId c : kAllCriteria) {
    std::ostringstream rank;
    rank << "rank,normalized_score\n";
    for (const RankPoint& p : rank_curve(run.results, c)) {
      rank << p.rank << ',' << io::format_double(p.value) << '\n';
    }
    files[run_file(run_dir, run_id, "rank." + lower(c), "csv")] = rank.str();

    const std::size_t n = cfg.worst_n.count(c) ? cfg.worst_n.at(c) : default_worst_n(c);
    files[run_file(run_dir, run_id, "worst." + lower(c), "geojson")] =
        worst_geojson(data.net, run.results, worst_n(run.results, c, n));

    if (c == run.criterion) continue;
    std::ostringstream corr;
    corr << "seg_id," << lower(run.criterion) << "_norm," << lower(c) << "_norm\n";
    for (const CorrelationPoint& p : correlation_pairs(run.results, run.criterion, c)) {
      corr << io::csv_escape(p.seg_id) << ',' << io::format_double(p.used) << ','
           << io::format_double(p.other) << '\n';
    }
    files[run_file(run_dir, run_id, "corr." + lower(run.criterion) + "_" + lower(c), "csv")] =
        corr.str();
  }
  files[run_file(run_dir, run_id, "reviewed.results", "csv")] = results_csv(data.net, run.results);
  files[run_file(run_dir, run_id, "reviewed.scores", "csv")] =
      score_table_csv(score_table(run.results));
  files[run_file(run_dir, run_id, "reviewed.matched", "geojson")] =
      matched_geojson(data.net, run.results);
  files[run_file(run_dir, run_id, "reviewed.unmatched", "geojson")] =
      unmatched_geojson(data.net, data.measurements, run.results);
  files[run_file(run_dir, run_id, "streets", "geojson")] = street_geojson(data.net);
  files[run_file(run_dir, run_id, "measurements", "geojson")] =
      measurement_geojson(data.net, data.measurements);

  std::vector<fs::path> written;
  for (const auto& [path, content] : files) {
    io::write_atomic(path, content);
    written.push_back(path);
  }
  return written;
}

}  // namespace lrmatch
