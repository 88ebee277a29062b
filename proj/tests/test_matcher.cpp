#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "lrmatch/matcher.hpp"
#include "lrmatch/synth.hpp"
#include "oracle.hpp"

using namespace lrmatch;

namespace {

StreetNetwork grid(int n, double spacing = 100.0) {
  std::vector<NodeRecord> nodes;
  std::vector<EdgeRecord> edges;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      nodes.push_back({synth::grid_node_id(r, c), {c * spacing, r * spacing}, 0});
      auto link = [&](int r1, int c1) {
        const auto a = synth::grid_node_id(r, c), b = synth::grid_node_id(r1, c1);
        edges.push_back({a + ">" + b, a, b, std::nullopt, 0});
        edges.push_back({b + ">" + a, b, a, std::nullopt, 0});
      };
      if (c + 1 < n) link(r, c + 1);
      if (r + 1 < n) link(r + 1, c);
    }
  }
  return StreetNetwork::build(std::move(nodes), std::move(edges));
}

MeasurementSegment seg(std::string id, Point a, Point b) {
  return {std::move(id), "k", a, b, euclidean(a, b)};
}

std::vector<std::string> ids(const StreetNetwork& net, const std::vector<NodeIndex>& nodes) {
  std::vector<std::string> out;
  for (NodeIndex n : nodes) out.push_back(net.node_id(n));
  return out;
}

}  // namespace

TEST(GenerateCandidates, AtMostTwoKSquared) {
  const StreetNetwork net = grid(10);
  for (std::size_t k : {1u, 2u, 3u, 4u}) {
    Matcher m(net, k);
    const auto c = m.generate_candidates(seg("s", {120, 230}, {640, 410}));
    EXPECT_LE(c.size(), 2 * k * k);
  }
  Matcher m4(net, 4);
  // Disjoint anchor sets on a strongly connected grid give the full 32.
  EXPECT_EQ(m4.generate_candidates(seg("s", {150, 150}, {750, 150})).size(), 32u);
}

TEST(GenerateCandidates, SingleNodeGraphHasNone) {
  const StreetNetwork net = StreetNetwork::build({{"only", {0, 0}, 0}}, {});
  Matcher m(net, 4);
  EXPECT_TRUE(m.generate_candidates(seg("s", {-5, 0}, {5, 0})).empty());
  const MatchResult r = m.match_one(seg("s", {-5, 0}, {5, 0}), CriterionId::RC);
  EXPECT_FALSE(r.matched());
  EXPECT_EQ(r.reason, kReasonNoPath);
}

TEST(GenerateCandidates, GridK1GivesStraightPathBothWays) {
  const StreetNetwork net = grid(6);
  Matcher m(net, 1);
  const auto c = m.generate_candidates(seg("s", {102, 198}, {398, 203}));
  ASSERT_EQ(c.size(), 2u);
  const std::vector<std::string> fwd = {"n0002_0001", "n0002_0002", "n0002_0003", "n0002_0004"};
  EXPECT_EQ(ids(net, c[0].nodes), fwd);
  EXPECT_EQ(c[0].orientation, Orientation::AtoB);
  EXPECT_EQ(c[0].edge_count(), 3u);
  EXPECT_DOUBLE_EQ(c[0].path_length_m, 300.0);
  std::vector<std::string> back(fwd.rbegin(), fwd.rend());
  EXPECT_EQ(ids(net, c[1].nodes), back);
  EXPECT_EQ(c[1].orientation, Orientation::BtoA);
  EXPECT_NEAR(c[0].anchor_start_m, std::hypot(2.0, 2.0), 1e-12);
  EXPECT_NEAR(c[1].anchor_start_m, std::hypot(2.0, 3.0), 1e-12);
}

TEST(MatchOne, SegmentOnSingleEdge) {
  const StreetNetwork net = StreetNetwork::build(
      {{"u", {0, 0}, 0}, {"v", {50, 0}, 0}}, {{"uv", "u", "v", std::nullopt, 0}});
  Matcher m(net, 1);
  for (CriterionId c : kAllCriteria) {
    const MatchResult r = m.match_one(seg("s", {0, 0}, {50, 0}), c);
    ASSERT_TRUE(r.matched());
    EXPECT_EQ(r.street_edges, std::vector<std::string>{"uv"});
    EXPECT_EQ(r.scores, (CriterionScores{0, 0, 0, 0}));
    EXPECT_EQ(r.candidates_evaluated, 1u);
  }
}

TEST(MatchOne, CrossComponentIsNoPath) {
  const StreetNetwork net = StreetNetwork::build(
      {{"a", {0, 0}, 0}, {"b", {10, 0}, 0}, {"c", {1000, 0}, 0}, {"d", {1010, 0}, 0}},
      {{"ab", "a", "b", std::nullopt, 0}, {"cd", "c", "d", std::nullopt, 0}});
  Matcher m(net, 1);
  const MatchResult r = m.match_one(seg("s", {0, 1}, {1005, 1}), CriterionId::LC);
  EXPECT_FALSE(r.matched());
  EXPECT_EQ(r.reason, kReasonNoPath);
  EXPECT_EQ(r.candidates_evaluated, 0u);
}

TEST(MatchOne, OneWayStreetUsesReverseOrientation) {
  const StreetNetwork net = StreetNetwork::build(
      {{"a", {0, 0}, 0}, {"b", {100, 0}, 0}}, {{"ba", "b", "a", std::nullopt, 0}});
  Matcher m(net, 1);
  const MatchResult r = m.match_one(seg("s", {0, 0}, {100, 0}), CriterionId::SC);
  ASSERT_TRUE(r.matched());
  EXPECT_EQ(r.chosen->orientation, Orientation::BtoA);
  EXPECT_EQ(r.scores.sc, 0.0);
}

TEST(SelectCandidate, TieBreakOrder) {
  auto cand = [](double gap, std::vector<NodeIndex> nodes, Orientation o) {
    ScoredCandidate c;
    c.path.anchor_start_m = gap;
    c.path.nodes = nodes;
    c.path.edges.resize(nodes.size() - 1);
    c.path.orientation = o;
    c.scores = {1, 1, 1, 1};
    return c;
  };
  std::vector<ScoredCandidate> v = {cand(2, {0, 1}, Orientation::AtoB),
                                    cand(1, {0, 2, 1}, Orientation::AtoB),
                                    cand(1, {0, 1}, Orientation::BtoA),
                                    cand(1, {0, 1}, Orientation::AtoB)};
  EXPECT_EQ(*select_candidate(v, CriterionId::RC), 3u);
  v[3].scores.rc = 1 + 1e-6;
  EXPECT_EQ(*select_candidate(v, CriterionId::RC), 2u);
  v[0].scores.rc = 0.5;
  EXPECT_EQ(*select_candidate(v, CriterionId::RC), 0u);
  EXPECT_FALSE(select_candidate({}, CriterionId::RC));
}

TEST(ShortestPath, DistancesMatchBellmanFord) {
  std::mt19937_64 rng(12);
  for (int g = 0; g < 5; ++g) {
    const StreetNetwork net = oracle::random_planar_graph(rng, 120);
    const auto arcs = oracle::arcs(net);
    ShortestPathSearch sp(net);
    std::vector<NodeIndex> all(net.node_count());
    for (NodeIndex i = 0; i < all.size(); ++i) all[i] = i;
    for (NodeIndex s = 0; s < net.node_count(); s += 7) {
      sp.run(s, all);
      const auto ref = oracle::bellman_ford(net.node_count(), arcs, s);
      for (NodeIndex t = 0; t < net.node_count(); ++t) {
        if (!std::isfinite(ref[t])) {
          EXPECT_FALSE(sp.reached(t));
          continue;
        }
        ASSERT_TRUE(sp.reached(t));
        EXPECT_TRUE(oracle::close(sp.distance(t), ref[t]));
        const auto path = sp.path_to(t);
        double len = 0;
        for (std::size_t i = 0; i + 1 < path.size(); ++i)
          len += net.edge(*net.best_edge(path[i], path[i + 1])).length_m;
        EXPECT_TRUE(oracle::close(len, ref[t]));
      }
    }
  }
}

TEST(ShortestPath, EqualLengthTiesTakeSmallestNodeSequence) {
  // On a unit grid every monotone staircase is a shortest path.
  const StreetNetwork net = grid(5, 1.0);
  const auto arcs = oracle::arcs(net);
  const auto rev = oracle::reversed(arcs);
  ShortestPathSearch sp(net);
  for (NodeIndex s = 0; s < net.node_count(); ++s) {
    const auto from = oracle::bellman_ford(net.node_count(), arcs, s);
    for (NodeIndex t = 0; t < net.node_count(); ++t) {
      if (s == t) continue;
      const NodeIndex targets[] = {t};
      sp.run(s, targets);
      const auto to = oracle::bellman_ford(net.node_count(), rev, t);
      EXPECT_EQ(sp.path_to(t), oracle::lex_shortest_path(arcs, s, t, from, to));
    }
  }
}

TEST(MatchOne, AgreesWithExhaustiveOracle) {
  std::mt19937_64 rng(2024);
  std::size_t compared = 0;
  for (int g = 0; g < 6; ++g) {
    const StreetNetwork net = oracle::random_planar_graph(rng, 200);
    oracle::BruteMatcher brute(net);
    std::uniform_real_distribution<double> u(-50, 950);
    for (std::size_t k : {1u, 2u, 4u}) {
      Matcher m(net, k);
      for (int i = 0; i < 15; ++i) {
        const Point a{u(rng), u(rng)}, b{u(rng), u(rng)};
        const auto s = seg("s", a, b);
        const auto cands = m.scored_candidates(s);
        for (int c = 0; c < 4; ++c) {
          const MatchResult r = m.result_from(s, kAllCriteria[c], cands);
          const oracle::Choice ref = brute.match(a, b, k, c);
          ASSERT_EQ(r.candidates_evaluated, ref.candidates);
          ASSERT_EQ(r.matched(), ref.matched);
          if (!ref.matched) continue;
          EXPECT_EQ(r.chosen->nodes, ref.nodes);
          EXPECT_EQ(r.chosen->orientation == Orientation::AtoB, ref.a_to_b);
          EXPECT_NEAR(r.scores.get(kAllCriteria[c]), ref.scores.get(c),
                      1e-9 * std::max(1.0, ref.scores.get(c)));
          ++compared;
        }
      }
    }
  }
  EXPECT_GT(compared, 500u);
}

TEST(MatchAll, EmptyInputGivesEmptySummary) {
  const StreetNetwork net = grid(3);
  const auto results = match_all(net, MeasurementNetwork{}, 4, CriterionId::RC);
  EXPECT_TRUE(results.empty());
  const RunSummary s = summarize(results);
  EXPECT_EQ(s.segments, 0u);
  EXPECT_EQ(s.matched, 0u);
  EXPECT_TRUE(s.edge_reuse.empty());
}

TEST(MatchAll, EmptyNetworkThrows) {
  MeasurementNetwork m;
  m.segments.push_back(seg("s", {0, 0}, {1, 1}));
  EXPECT_THROW(match_all(StreetNetwork{}, m, 4, CriterionId::RC), EmptyNetwork);
}

TEST(MatchAll, OrderAndThreadCountDoNotMatter) {
  std::mt19937_64 rng(77);
  const StreetNetwork net = oracle::random_planar_graph(rng, 200);
  std::uniform_real_distribution<double> u(0, 900);
  MeasurementNetwork meas;
  for (int i = 0; i < 120; ++i) {
    meas.segments.push_back(seg("s" + std::to_string(1000 + i), {u(rng), u(rng)}, {u(rng), u(rng)}));
  }
  const auto base = match_all(net, meas, 3, CriterionId::AC, 1);
  MeasurementNetwork shuffled = meas;
  std::shuffle(shuffled.segments.begin(), shuffled.segments.end(), rng);
  for (std::size_t threads : {1u, 2u, 5u}) {
    const auto other = match_all(net, shuffled, 3, CriterionId::AC, threads);
    ASSERT_EQ(other.size(), base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      EXPECT_EQ(other[i].seg_id, base[i].seg_id);
      EXPECT_EQ(other[i].status, base[i].status);
      EXPECT_EQ(other[i].street_edges, base[i].street_edges);
      EXPECT_EQ(other[i].scores, base[i].scores);
      if (base[i].chosen) { EXPECT_EQ(other[i].chosen->nodes, base[i].chosen->nodes); }
    }
  }
}

TEST(Summarize, CountsReuseAndReasons) {
  std::vector<MatchResult> rs(3);
  rs[0].status = MatchStatus::Matched;
  rs[0].street_edges = {"e1", "e2"};
  rs[1].status = MatchStatus::Matched;
  rs[1].street_edges = {"e2"};
  rs[2].reason = kReasonNoPath;
  const RunSummary s = summarize(rs);
  EXPECT_EQ(s.matched, 2u);
  EXPECT_EQ(s.unmatched, 1u);
  EXPECT_EQ(s.unmatched_reasons.at("NoPath"), 1u);
  EXPECT_EQ(s.edge_reuse.at("e2"), 2u);
  EXPECT_EQ(s.reuse_histogram.at(1), 1u);
  EXPECT_EQ(s.reuse_histogram.at(2), 1u);
}
