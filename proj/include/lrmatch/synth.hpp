#pragma once

// Synthetic benchmark: a two-way street grid and measurement segments laid
// along straight grid lines, with the generating path kept as ground truth.
//
// Each segment spans a run of collinear grid edges. Both endpoints share one
// perpendicular offset and get independent offsets along the line, each
// component bounded by jitter / sqrt(2), so every endpoint stays within
// `jitter` meters of its grid node and the segment stays parallel to the
// grid line it follows.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lrmatch/errors.hpp"
#include "lrmatch/io.hpp"

namespace lrmatch::synth {

struct GridSpec {
  std::size_t rows = 30;
  std::size_t cols = 30;
  double spacing_m = 100.0;
  std::size_t segments = 500;
  std::size_t min_span = 3;
  std::size_t max_span = 10;
  double jitter_m = 10.0;
  std::uint64_t seed = 1;
};

struct TruthRow {
  std::string seg_id;
  std::vector<std::string> nodes;  // from the node nearest a to the node nearest b
};

struct Benchmark {
  std::string nodes_csv;
  std::string edges_csv;
  std::string segments_csv;
  std::vector<TruthRow> truth;

  std::string truth_csv() const {
    std::string out = "seg_id,nodes\n";
    for (const auto& t : truth) {
      out += t.seg_id + ",";
      for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        if (i) out += ';';
        out += t.nodes[i];
      }
      out += '\n';
    }
    return out;
  }
};

inline std::string grid_node_id(std::size_t r, std::size_t c) {
  std::ostringstream s;
  s << 'n' << std::setw(4) << std::setfill('0') << r << '_' << std::setw(4) << std::setfill('0')
    << c;
  return s.str();
}

// Portable draws: the standard distributions differ across library vendors.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return lo + static_cast<std::size_t>(engine_() % (hi - lo + 1));
  }

 private:
  std::mt19937_64 engine_;
};

inline Benchmark make_grid(const GridSpec& spec) {
  if (spec.rows < 2 || spec.cols < 2) throw Error("grid needs at least 2x2 nodes");
  if (spec.min_span < 1 || spec.max_span < spec.min_span) throw Error("bad span range");
  if (spec.max_span >= std::max(spec.rows, spec.cols)) throw Error("span exceeds grid size");
  if (!(spec.jitter_m >= 0.0) || spec.jitter_m >= spec.spacing_m / 4.0) {
    throw Error("jitter must be in [0, spacing/4)");
  }

  Benchmark b;
  std::ostringstream nodes, edges, segs;
  nodes << "node_id,x,y\n";
  for (std::size_t r = 0; r < spec.rows; ++r) {
    for (std::size_t c = 0; c < spec.cols; ++c) {
      nodes << grid_node_id(r, c) << ',' << io::format_double(c * spec.spacing_m) << ','
            << io::format_double(r * spec.spacing_m) << '\n';
    }
  }
  edges << "edge_id,from,to,length_m\n";
  auto edge = [&](std::size_t r0, std::size_t c0, std::size_t r1, std::size_t c1) {
    const std::string a = grid_node_id(r0, c0);
    const std::string z = grid_node_id(r1, c1);
    edges << a << '-' << z << ',' << a << ',' << z << ',' << io::format_double(spec.spacing_m)
          << '\n';
    edges << z << '-' << a << ',' << z << ',' << a << ',' << io::format_double(spec.spacing_m)
          << '\n';
  };
  for (std::size_t r = 0; r < spec.rows; ++r) {
    for (std::size_t c = 0; c < spec.cols; ++c) {
      if (c + 1 < spec.cols) edge(r, c, r, c + 1);
      if (r + 1 < spec.rows) edge(r, c, r + 1, c);
    }
  }

  Rng rng(spec.seed);
  const double bound = spec.jitter_m / std::sqrt(2.0);
  segs << "segment_id,sensor_id,ax,ay,bx,by\n";
  const int width = static_cast<int>(std::to_string(spec.segments).size());
  for (std::size_t i = 0; i < spec.segments; ++i) {
    const bool horizontal = rng.uniform(0.0, 1.0) < 0.5;
    const std::size_t lines = horizontal ? spec.rows : spec.cols;
    const std::size_t along = horizontal ? spec.cols : spec.rows;
    const std::size_t line = rng.index(0, lines - 1);
    const std::size_t span = rng.index(spec.min_span, std::min(spec.max_span, along - 1));
    const std::size_t start = rng.index(0, along - 1 - span);
    const double offset = rng.uniform(-bound, bound);
    const double e0 = rng.uniform(-bound, bound);
    const double e1 = rng.uniform(-bound, bound);

    TruthRow truth;
    std::ostringstream id;
    id << 's' << std::setw(width) << std::setfill('0') << i;
    truth.seg_id = id.str();
    for (std::size_t s = 0; s <= span; ++s) {
      truth.nodes.push_back(horizontal ? grid_node_id(line, start + s)
                                       : grid_node_id(start + s, line));
    }
    const double fixed = line * spec.spacing_m + offset;
    const double t0 = start * spec.spacing_m + e0;
    const double t1 = (start + span) * spec.spacing_m + e1;
    const double ax = horizontal ? t0 : fixed;
    const double ay = horizontal ? fixed : t0;
    const double bx = horizontal ? t1 : fixed;
    const double by = horizontal ? fixed : t1;
    segs << truth.seg_id << ",sensor-" << (i / 3) << ',' << io::format_double(ax) << ','
         << io::format_double(ay) << ',' << io::format_double(bx) << ',' << io::format_double(by)
         << '\n';
    b.truth.push_back(std::move(truth));
  }
  b.nodes_csv = nodes.str();
  b.edges_csv = edges.str();
  b.segments_csv = segs.str();
  return b;
}

}  // namespace lrmatch::synth
