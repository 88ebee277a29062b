#pragma once

// Matches each measurement segment to a street path. For a segment (a, b)
// the candidates are the shortest paths from every anchor of a to every
// anchor of b and back, where the anchors of a point are its k nearest street
// nodes. The candidate minimizing the selected criterion is kept, and its
// scores under all four criteria are reported alongside.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "lrmatch/candidate.hpp"
#include "lrmatch/criteria.hpp"
#include "lrmatch/network.hpp"
#include "lrmatch/shortest_path.hpp"

namespace lrmatch {

enum class MatchStatus { Matched, Unmatched };

inline constexpr const char* kReasonNoPath = "NoPath";
inline constexpr const char* kReasonMarkedUnmatchable = "MarkedUnmatchable";

struct MatchResult {
  std::string seg_id;
  std::string sensor_id;
  MatchStatus status = MatchStatus::Unmatched;
  std::string reason;  // set when Unmatched
  std::optional<CandidatePath> chosen;
  CriterionScores scores;
  CriterionId criterion_used = CriterionId::RC;
  std::size_t candidates_evaluated = 0;
  std::vector<std::string> street_edges;  // m(e), sorted edge ids
  bool overridden = false;

  bool matched() const { return status == MatchStatus::Matched; }
};

struct RunSummary {
  std::size_t segments = 0;
  std::size_t matched = 0;
  std::size_t unmatched = 0;
  std::map<std::string, std::size_t> unmatched_reasons;
  // Street edge id -> number of matched segments using it.
  std::map<std::string, std::size_t> edge_reuse;
  // Reuse count -> number of street edges with that count.
  std::map<std::size_t, std::size_t> reuse_histogram;
};

struct ScoredCandidate {
  CandidatePath path;
  CriterionScores scores;
};

// Scores closer than this (relative, absolute below 1) count as equal.
inline constexpr double kScoreTieTolerance = 1e-9;

inline double tie_slack(double best) { return kScoreTieTolerance * std::max(1.0, std::abs(best)); }

// Ordering used to break score ties: smaller total anchor gap, then fewer
// edges, then smaller node sequence, then a->b before b->a.
inline bool tie_break_less(const CandidatePath& x, const CandidatePath& y) {
  const double gx = x.anchor_start_m + x.anchor_end_m;
  const double gy = y.anchor_start_m + y.anchor_end_m;
  if (std::abs(gx - gy) > tie_slack(std::min(gx, gy))) return gx < gy;
  if (x.edges.size() != y.edges.size()) return x.edges.size() < y.edges.size();
  if (x.nodes != y.nodes) return x.nodes < y.nodes;
  return x.orientation == Orientation::AtoB && y.orientation == Orientation::BtoA;
}

// Index of the chosen candidate, or nullopt for an empty list.
inline std::optional<std::size_t> select_candidate(std::span<const ScoredCandidate> cands,
                                                   CriterionId criterion) {
  if (cands.empty()) return std::nullopt;
  double best = cands[0].scores.get(criterion);
  for (const auto& c : cands) best = std::min(best, c.scores.get(criterion));
  const double limit = best + tie_slack(best);
  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (cands[i].scores.get(criterion) > limit) continue;
    if (!pick || tie_break_less(cands[i].path, cands[*pick].path)) pick = i;
  }
  return pick;
}

class Matcher {
 public:
  Matcher(const StreetNetwork& net, std::size_t k) : net_(&net), k_(k), search_(net) {
    if (k == 0) throw Error("k must be >= 1");
    if (net.empty()) throw EmptyNetwork();
  }

  std::size_t k() const { return k_; }

  // Shortest paths between the anchor sets of both endpoints, in both
  // directions. Same-node pairs and unreachable pairs are skipped.
  std::vector<CandidatePath> generate_candidates(const MeasurementSegment& seg) {
    const auto near_a = net_->index().knn(seg.a, k_);
    const auto near_b = net_->index().knn(seg.b, k_);
    std::vector<CandidatePath> out;
    collect(seg, Orientation::AtoB, near_a, near_b, out);
    collect(seg, Orientation::BtoA, near_b, near_a, out);
    return out;
  }

  std::vector<ScoredCandidate> scored_candidates(const MeasurementSegment& seg) {
    std::vector<ScoredCandidate> out;
    for (CandidatePath& c : generate_candidates(seg)) {
      // Distinct street nodes sharing a position give a zero-length link
      // that has no direction; such a path cannot be scored.
      CriterionScores s;
      try {
        s = score_all(*net_, c, seg);
      } catch (const DegenerateGeometry&) {
        continue;
      }
      out.push_back({std::move(c), s});
    }
    return out;
  }

  MatchResult match_one(const MeasurementSegment& seg, CriterionId criterion) {
    return result_from(seg, criterion, scored_candidates(seg));
  }

  MatchResult result_from(const MeasurementSegment& seg, CriterionId criterion,
                          std::vector<ScoredCandidate> cands) const {
    MatchResult r;
    r.seg_id = seg.id;
    r.sensor_id = seg.sensor_id;
    r.criterion_used = criterion;
    r.candidates_evaluated = cands.size();
    const auto pick = select_candidate(cands, criterion);
    if (!pick) {
      r.status = MatchStatus::Unmatched;
      r.reason = kReasonNoPath;
      return r;
    }
    assign_chosen(r, std::move(cands[*pick]));
    return r;
  }

  void assign_chosen(MatchResult& r, ScoredCandidate chosen) const {
    r.status = MatchStatus::Matched;
    r.reason.clear();
    r.scores = chosen.scores;
    std::set<std::string> ids;
    for (EdgeIndex e : chosen.path.edges) ids.insert(net_->edge(e).id);
    r.street_edges.assign(ids.begin(), ids.end());
    r.chosen = std::move(chosen.path);
  }

 private:
  void collect(const MeasurementSegment& seg, Orientation o, const std::vector<Neighbor>& from,
               const std::vector<Neighbor>& to, std::vector<CandidatePath>& out) {
    std::vector<NodeIndex> targets;
    for (const Neighbor& t : to) targets.push_back(t.id);
    for (const Neighbor& s : from) {
      search_.run(s.id, targets);
      for (const Neighbor& t : to) {
        if (t.id == s.id || !search_.reached(t.id)) continue;
        CandidatePath c;
        c.seg_id = seg.id;
        c.orientation = o;
        c.nodes = search_.path_to(t.id);
        c.anchor_start_m = s.distance;
        c.anchor_end_m = t.distance;
        double length = 0.0;
        for (std::size_t i = 0; i + 1 < c.nodes.size(); ++i) {
          const EdgeIndex e = *net_->best_edge(c.nodes[i], c.nodes[i + 1]);
          c.edges.push_back(e);
          length += net_->edge(e).length_m;
        }
        c.path_length_m = length;
        out.push_back(std::move(c));
      }
    }
  }

  const StreetNetwork* net_;
  std::size_t k_;
  ShortestPathSearch search_;
};

inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

inline RunSummary summarize(const std::vector<MatchResult>& results) {
  RunSummary s;
  s.segments = results.size();
  for (const MatchResult& r : results) {
    if (r.matched()) {
      ++s.matched;
      for (const std::string& e : r.street_edges) ++s.edge_reuse[e];
    } else {
      ++s.unmatched;
      ++s.unmatched_reasons[r.reason];
    }
  }
  for (const auto& [edge, count] : s.edge_reuse) ++s.reuse_histogram[count];
  return s;
}

// One result per segment, ordered by segment id regardless of input order or
// thread count. `threads` = 0 uses the hardware concurrency.
inline std::vector<MatchResult> match_all(const StreetNetwork& net,
                                          const MeasurementNetwork& measurements, std::size_t k,
                                          CriterionId criterion, std::size_t threads = 1) {
  std::vector<const MeasurementSegment*> order;
  order.reserve(measurements.segments.size());
  for (const auto& s : measurements.segments) order.push_back(&s);
  std::sort(order.begin(), order.end(),
            [](const auto* a, const auto* b) { return a->id < b->id; });

  std::vector<MatchResult> results(order.size());
  if (order.empty()) return results;
  if (net.empty()) throw EmptyNetwork();
  if (k == 0) throw Error("k must be >= 1");

  const std::size_t workers = std::min(resolve_threads(threads), order.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto work = [&] {
    try {
      Matcher m(net, k);
      for (std::size_t i = next++; i < order.size(); i = next++) {
        results[i] = m.match_one(*order[i], criterion);
      }
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
      next = order.size();
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace lrmatch
