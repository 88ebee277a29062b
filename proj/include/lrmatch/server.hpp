#pragma once

// HTTP/JSON API behind the review console.
//
//   GET  /health
//   GET  /segments?sort=&order=&page=&page_size=
//   GET  /segments/{id}/candidates
//   POST /segments/{id}/override
//   GET  /layers?bbox=minx,miny,maxx,maxy
//
// ReviewService holds the request logic and is usable without sockets;
// ReviewServer binds it to cpp-httplib. No authentication: the service is
// meant for a trusted host.

#include <algorithm>
#include <filesystem>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lrmatch/matcher.hpp"
#include "lrmatch/overrides.hpp"
#include "lrmatch/pipeline.hpp"
#include "lrmatch/report.hpp"

namespace lrmatch {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

struct BBox {
  double minx = 0, miny = 0, maxx = 0, maxy = 0;

  bool contains(Point p) const {
    return p.x >= minx && p.x <= maxx && p.y >= miny && p.y <= maxy;
  }

  // Liang-Barsky: does the closed segment p-q touch the box?
  bool intersects(Point p, Point q) const {
    double t0 = 0.0, t1 = 1.0;
    const double dx = q.x - p.x, dy = q.y - p.y;
    const double ps[4] = {-dx, dx, -dy, dy};
    const double qs[4] = {p.x - minx, maxx - p.x, p.y - miny, maxy - p.y};
    for (int i = 0; i < 4; ++i) {
      if (ps[i] == 0.0) {
        if (qs[i] < 0.0) return false;
      } else {
        const double t = qs[i] / ps[i];
        if (ps[i] < 0.0) {
          t0 = std::max(t0, t);
        } else {
          t1 = std::min(t1, t);
        }
        if (t0 > t1) return false;
      }
    }
    return true;
  }
};

inline std::optional<BBox> parse_bbox(const std::string& s) {
  std::vector<double> v;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::string part = s.substr(start, comma == std::string::npos ? std::string::npos
                                                                         : comma - start);
    auto d = io::parse_double(part);
    if (!d || !std::isfinite(*d)) return std::nullopt;
    v.push_back(*d);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (v.size() != 4 || v[0] > v[2] || v[1] > v[3]) return std::nullopt;
  return BBox{v[0], v[1], v[2], v[3]};
}

class ReviewService {
 public:
  ReviewService(PreparedData data, LoadedRun run, std::filesystem::path run_dir)
      : data_(std::move(data)),
        k_(run.k),
        criterion_(run.criterion),
        base_(std::move(run.results)),
        log_(overrides_path(run_dir)) {
    for (std::size_t i = 0; i < base_.size(); ++i) position_[base_[i].seg_id] = i;
    effective_ = base_;
    apply_overrides(effective_, data_.net, data_.measurements, k_, log_.effective());
  }

  ApiResponse health() const { return {200, {{"status", "ok"}}}; }

  ApiResponse list_segments(const std::string& sort, const std::string& order, std::size_t page,
                            std::size_t page_size) const {
    const auto crit = parse_criterion(sort.empty() ? to_string(criterion_) : sort);
    if (!crit) return error(400, "unknown sort criterion '" + sort + "'");
    if (!order.empty() && order != "asc" && order != "desc") {
      return error(400, "order must be asc or desc");
    }
    if (page < 1 || page_size < 1) return error(400, "page and page_size must be >= 1");
    const bool desc = order != "asc";

    std::shared_lock lock(mutex_);
    const ScoreTable table = score_table(effective_);
    std::map<std::string, const ScoreRow*> norm;
    for (const auto& row : table.rows) norm[row.seg_id] = &row;

    std::vector<const MatchResult*> items;
    for (const auto& r : effective_) items.push_back(&r);
    // Unmatched segments have no score and always sort last.
    std::stable_sort(items.begin(), items.end(), [&](const MatchResult* a, const MatchResult* b) {
      if (a->matched() != b->matched()) return a->matched();
      if (a->matched()) {
        const double sa = a->scores.get(*crit), sb = b->scores.get(*crit);
        if (sa != sb) return desc ? sa > sb : sa < sb;
      }
      return a->seg_id < b->seg_id;
    });

    nlohmann::json out = nlohmann::json::array();
    const std::size_t begin = (page - 1) * page_size;
    for (std::size_t i = begin; i < std::min(items.size(), begin + page_size); ++i) {
      const MatchResult& r = *items[i];
      nlohmann::json item = {{"seg_id", r.seg_id},
                             {"sensor_id", r.sensor_id},
                             {"status", r.matched() ? "matched" : "unmatched"},
                             {"overridden", r.overridden}};
      if (r.matched()) {
        const ScoreRow& row = *norm.at(r.seg_id);
        item["scores"] = scores_json(r.scores);
        item["normalized"] = {{"lc", row.normalized.lc},
                              {"rc", row.normalized.rc},
                              {"sc", row.normalized.sc},
                              {"ac", row.normalized.ac}};
      } else {
        item["reason"] = r.reason;
      }
      out.push_back(std::move(item));
    }
    return {200,
            {{"total", items.size()},
             {"page", page},
             {"page_size", page_size},
             {"sort", to_string(*crit)},
             {"order", desc ? "desc" : "asc"},
             {"items", out}}};
  }

  ApiResponse candidates(const std::string& seg_id) const {
    const MeasurementSegment* seg = data_.measurements.find(seg_id);
    if (!seg || !position_.count(seg_id)) return error(404, "unknown segment '" + seg_id + "'");
    MatchResult current;
    {
      std::shared_lock lock(mutex_);
      current = effective_[position_.at(seg_id)];
    }
    Matcher matcher(data_.net, k_);
    const auto cands = matcher.scored_candidates(*seg);
    const auto pick = select_candidate(cands, criterion_);
    nlohmann::json list = nlohmann::json::array();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const CandidatePath& c = cands[i].path;
      std::vector<std::string> edges;
      for (EdgeIndex e : c.edges) edges.push_back(data_.net.edge(e).id);
      const bool chosen = current.matched() && current.chosen &&
                          current.chosen->nodes == c.nodes &&
                          current.chosen->orientation == c.orientation;
      const auto pts = path_points(data_.net, c);
      list.push_back({{"index", i},
                      {"fingerprint", node_fingerprint(data_.net, c)},
                      {"edges", edges},
                      {"orientation", to_string(c.orientation)},
                      {"path_length_m", c.path_length_m},
                      {"anchor_start_m", c.anchor_start_m},
                      {"anchor_end_m", c.anchor_end_m},
                      {"geometry", line_string(data_.net, pts)},
                      {"scores", scores_json(cands[i].scores)},
                      {"algorithm_choice", pick && *pick == i},
                      {"chosen", chosen}});
    }
    nlohmann::json body = {{"seg_id", seg_id},
                           {"k", k_},
                           {"criterion", to_string(criterion_)},
                           {"status", current.matched() ? "matched" : "unmatched"},
                           {"overridden", current.overridden},
                           {"candidates", list}};
    if (!current.matched()) body["reason"] = current.reason;
    return {200, body};
  }

  ApiResponse post_override(const std::string& seg_id, const std::string& body_text) {
    const MeasurementSegment* seg = data_.measurements.find(seg_id);
    if (!seg || !position_.count(seg_id)) return error(404, "unknown segment '" + seg_id + "'");
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(body_text);
    } catch (const nlohmann::json::parse_error&) {
      return error(400, "body is not valid JSON");
    }
    if (!body.is_object() || !body.contains("decision") || !body["decision"].is_string()) {
      return error(400, "missing decision");
    }
    const auto decision = parse_decision(body["decision"].get<std::string>());
    if (!decision) return error(400, "unknown decision");

    Override o;
    o.seg_id = seg_id;
    o.decision = *decision;
    o.note = body.value("note", "");
    o.timestamp = utc_now();
    if (o.decision == Decision::PickCandidate) {
      if (!body.contains("fingerprint") || !body["fingerprint"].is_array()) {
        return error(422, "PickCandidate needs a fingerprint (node id list)");
      }
      try {
        o.fingerprint = body["fingerprint"].get<std::vector<std::string>>();
      } catch (const nlohmann::json::exception&) {
        return error(422, "fingerprint must be a list of node ids");
      }
      Matcher matcher(data_.net, k_);
      if (!find_candidate(data_.net, matcher.scored_candidates(*seg), o.fingerprint)) {
        return error(422, "fingerprint does not match any candidate of " + seg_id);
      }
    }

    std::unique_lock lock(mutex_);
    log_.append(o);
    const std::size_t i = position_.at(seg_id);
    std::vector<MatchResult> one = {base_[i]};
    apply_overrides(one, data_.net, data_.measurements, k_, {{seg_id, o}});
    effective_[i] = std::move(one.front());
    std::size_t count = 0;
    for (const auto& h : log_.history()) count += h.seg_id == seg_id;
    return {200, {{"ok", true}, {"override", o.to_json()}, {"history_count", count}}};
  }

  ApiResponse layers(const std::string& bbox_text) const {
    const auto box = parse_bbox(bbox_text);
    if (!box) return error(400, "bbox must be minx,miny,maxx,maxy");
    // Boxes arrive in output coordinates; lon/lat boxes stay boxes under the
    // equirectangular projection.
    BBox metric = *box;
    if (data_.net.origin()) {
      const Point lo = project(*data_.net.origin(), {box->minx, box->miny});
      const Point hi = project(*data_.net.origin(), {box->maxx, box->maxy});
      metric = {lo.x, lo.y, hi.x, hi.y};
    }
    std::vector<nlohmann::json> streets, meas;
    for (const StreetEdge& e : data_.net.edges()) {
      const Point p = data_.net.point(e.from), q = data_.net.point(e.to);
      if (!metric.intersects(p, q)) continue;
      const std::array<Point, 2> pts = {p, q};
      streets.push_back({{"type", "Feature"},
                         {"geometry", line_string(data_.net, pts)},
                         {"properties", {{"edge_id", e.id}}}});
    }
    for (const auto& s : data_.measurements.segments) {
      if (!metric.intersects(s.a, s.b)) continue;
      meas.push_back(segment_feature(data_.net, s, {{"seg_id", s.id}, {"sensor_id", s.sensor_id}}));
    }
    auto fc = [](std::vector<nlohmann::json> f) {
      return nlohmann::json{{"type", "FeatureCollection"}, {"features", std::move(f)}};
    };
    return {200, {{"streets", fc(std::move(streets))}, {"measurements", fc(std::move(meas))}}};
  }

  std::vector<MatchResult> effective_results() const {
    std::shared_lock lock(mutex_);
    return effective_;
  }

  const OverrideLog& log() const { return log_; }

 private:
  static ApiResponse error(int status, const std::string& message) {
    return {status, {{"error", message}}};
  }

  PreparedData data_;
  std::size_t k_;
  CriterionId criterion_;
  std::vector<MatchResult> base_;
  std::vector<MatchResult> effective_;
  std::map<std::string, std::size_t> position_;
  OverrideLog log_;
  mutable std::shared_mutex mutex_;
};

class ReviewServer {
 public:
  explicit ReviewServer(ReviewService& service, const std::string& ui_dir = "")
      : service_(&service) {
    auto send = [](httplib::Response& res, const ApiResponse& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    auto size_param = [](const httplib::Request& req, const char* name, std::size_t fallback) {
      if (!req.has_param(name)) return std::optional<std::size_t>(fallback);
      auto v = io::parse_double(req.get_param_value(name));
      if (!v || *v < 0 || *v != std::floor(*v)) return std::optional<std::size_t>();
      return std::optional<std::size_t>(static_cast<std::size_t>(*v));
    };

    server_.Get("/health", [=, this](const httplib::Request&, httplib::Response& res) {
      send(res, service_->health());
    });
    server_.Get("/segments", [=, this](const httplib::Request& req, httplib::Response& res) {
      const auto page = size_param(req, "page", 1);
      const auto page_size = size_param(req, "page_size", 50);
      if (!page || !page_size) {
        send(res, {400, {{"error", "page and page_size must be positive integers"}}});
        return;
      }
      send(res, service_->list_segments(req.get_param_value("sort"), req.get_param_value("order"),
                                        *page, *page_size));
    });
    server_.Get(R"(/segments/([^/]+)/candidates)",
                [=, this](const httplib::Request& req, httplib::Response& res) {
                  send(res, service_->candidates(req.matches[1].str()));
                });
    server_.Post(R"(/segments/([^/]+)/override)",
                 [=, this](const httplib::Request& req, httplib::Response& res) {
                   send(res, service_->post_override(req.matches[1].str(), req.body));
                 });
    server_.Get("/layers", [=, this](const httplib::Request& req, httplib::Response& res) {
      send(res, service_->layers(req.get_param_value("bbox")));
    });
    server_.set_exception_handler(
        [=](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
          std::string what = "internal error";
          try {
            std::rethrow_exception(ep);
          } catch (const std::exception& e) {
            what = e.what();
          } catch (...) {
          }
          send(res, {500, {{"error", what}}});
        });
    if (!ui_dir.empty()) server_.set_mount_point("/", ui_dir);
    // The library default also sets SO_REUSEPORT, which would let a second
    // server share a busy port silently.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
  }

  // Returns the bound port (useful with port 0). Throws when the port is taken.
  int bind(const std::string& host, int port) {
    if (port == 0) {
      const int p = server_.bind_to_any_port(host);
      if (p < 0) throw Error("cannot bind " + host);
      return p;
    }
    if (!server_.bind_to_port(host, port)) {
      throw Error("cannot bind " + host + ":" + std::to_string(port) + " (port busy?)");
    }
    return port;
  }

  // Blocks until stop().
  bool listen() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  ReviewService* service_;
  httplib::Server server_;
};

}  // namespace lrmatch
