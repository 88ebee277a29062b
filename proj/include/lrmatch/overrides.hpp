#pragma once

// Human review decisions, stored as an append-only JSON-lines log. The last
// entry per segment is the active one; replaying the log over a fresh result
// set yields the same effective state.

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrmatch/errors.hpp"
#include "lrmatch/matcher.hpp"

namespace lrmatch {

enum class Decision { AcceptChosen, PickCandidate, MarkUnmatchable };

inline const char* to_string(Decision d) {
  switch (d) {
    case Decision::AcceptChosen: return "AcceptChosen";
    case Decision::PickCandidate: return "PickCandidate";
    case Decision::MarkUnmatchable: return "MarkUnmatchable";
  }
  return "?";
}

inline std::optional<Decision> parse_decision(std::string_view s) {
  if (s == "AcceptChosen") return Decision::AcceptChosen;
  if (s == "PickCandidate") return Decision::PickCandidate;
  if (s == "MarkUnmatchable") return Decision::MarkUnmatchable;
  return std::nullopt;
}

struct Override {
  std::string seg_id;
  Decision decision = Decision::AcceptChosen;
  std::vector<std::string> fingerprint;  // node ids, PickCandidate only
  std::string note;
  std::int64_t timestamp = 0;  // UTC seconds

  nlohmann::json to_json() const {
    nlohmann::json j = {{"seg_id", seg_id},
                        {"decision", to_string(decision)},
                        {"note", note},
                        {"timestamp", timestamp}};
    if (decision == Decision::PickCandidate) j["fingerprint"] = fingerprint;
    return j;
  }

  static Override from_json(const nlohmann::json& j) {
    Override o;
    o.seg_id = j.at("seg_id").get<std::string>();
    const auto d = parse_decision(j.at("decision").get<std::string>());
    if (!d) throw Error("unknown decision '" + j.at("decision").get<std::string>() + "'");
    o.decision = *d;
    if (j.contains("fingerprint")) o.fingerprint = j["fingerprint"].get<std::vector<std::string>>();
    o.note = j.value("note", "");
    o.timestamp = j.value("timestamp", std::int64_t{0});
    return o;
  }
};

class OverrideLog {
 public:
  OverrideLog() = default;
  explicit OverrideLog(std::filesystem::path path) : path_(std::move(path)) { load(); }

  const std::vector<Override>& history() const { return history_; }

  // Active override per segment (last write wins).
  std::map<std::string, Override> effective() const {
    std::map<std::string, Override> out;
    for (const Override& o : history_) out[o.seg_id] = o;
    return out;
  }

  std::optional<Override> active(const std::string& seg_id) const {
    for (auto it = history_.rbegin(); it != history_.rend(); ++it) {
      if (it->seg_id == seg_id) return *it;
    }
    return std::nullopt;
  }

  // Appends and flushes one line before returning.
  void append(const Override& o) {
    if (!path_.empty()) {
      std::error_code ec;
      if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path(), ec);
      std::ofstream out(path_, std::ios::binary | std::ios::app);
      if (!out) throw IoError("cannot append to " + path_.string());
      out << o.to_json().dump() << '\n';
      out.flush();
      if (!out) throw IoError("write failed for " + path_.string());
    }
    history_.push_back(o);
  }

 private:
  void load() {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        history_.push_back(Override::from_json(nlohmann::json::parse(line)));
      } catch (const std::exception& e) {
        // A torn final line (crash mid-append) is dropped; anything else is corrupt.
        if (in.peek() == std::char_traits<char>::eof()) break;
        throw SchemaError(path_.string(), lineno, e.what());
      }
    }
  }

  std::filesystem::path path_;
  std::vector<Override> history_;
};

inline std::int64_t utc_now() { return static_cast<std::int64_t>(std::time(nullptr)); }

// Finds the regenerated candidate whose node ids equal `fingerprint`.
inline std::optional<ScoredCandidate> find_candidate(const StreetNetwork& net,
                                                     std::vector<ScoredCandidate> cands,
                                                     const std::vector<std::string>& fingerprint) {
  std::optional<ScoredCandidate> hit;
  for (auto& c : cands) {
    if (node_fingerprint(net, c.path) != fingerprint) continue;
    // Same node sequence from both orientations: keep the first (a->b).
    if (!hit) hit = std::move(c);
  }
  return hit;
}

// Applies the active overrides to `results` in place.
inline void apply_overrides(std::vector<MatchResult>& results, const StreetNetwork& net,
                            const MeasurementNetwork& meas, std::size_t k,
                            const std::map<std::string, Override>& active) {
  if (active.empty()) return;
  Matcher matcher(net, k);
  for (MatchResult& r : results) {
    auto it = active.find(r.seg_id);
    if (it == active.end()) continue;
    const Override& o = it->second;
    r.overridden = true;
    switch (o.decision) {
      case Decision::AcceptChosen:
        break;
      case Decision::MarkUnmatchable:
        r.status = MatchStatus::Unmatched;
        r.reason = kReasonMarkedUnmatchable;
        r.chosen.reset();
        r.street_edges.clear();
        r.scores = {};
        break;
      case Decision::PickCandidate: {
        const MeasurementSegment* seg = meas.find(r.seg_id);
        if (!seg) break;
        auto hit = find_candidate(net, matcher.scored_candidates(*seg), o.fingerprint);
        if (!hit) {
          throw Error("override for " + r.seg_id + " names a candidate that no longer exists");
        }
        matcher.assign_chosen(r, std::move(*hit));
        break;
      }
    }
  }
}

}  // namespace lrmatch
