#pragma once

// Shared on-disk fixtures for the pipeline, server and CLI tests.

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "lrmatch/io.hpp"
#include "lrmatch/pipeline.hpp"
#include "lrmatch/synth.hpp"

namespace fixture {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("lrmatch_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = path_ / name;
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

 private:
  fs::path path_;
};

inline std::string read(const fs::path& p) { return lrmatch::io::read_file(p); }

// A small synthetic grid plus an island of two nodes far to the east, and one
// extra segment reaching from the grid to the island that cannot be matched
// when k is small enough for the island anchors to fill N_k.
struct GridWithIsland {
  fs::path nodes, edges, segments;
  std::size_t grid_nodes = 0;
  std::size_t segment_count = 0;
};

inline GridWithIsland write_grid_with_island(const TempDir& dir, std::size_t n = 8,
                                             std::size_t segments = 30, std::uint64_t seed = 3) {
  lrmatch::synth::GridSpec spec;
  spec.rows = spec.cols = n;
  spec.segments = segments;
  spec.min_span = 1;
  spec.max_span = std::min<std::size_t>(4, n - 1);
  spec.seed = seed;
  const auto b = lrmatch::synth::make_grid(spec);
  const double far = 100.0 * n + 5000.0;
  GridWithIsland g;
  g.nodes = dir.write("in/nodes.csv", b.nodes_csv + "z1," + std::to_string(far) + ",0\nz2," +
                                          std::to_string(far + 100) + ",0\n");
  g.edges = dir.write("in/edges.csv", b.edges_csv + "island,z1,z2,100\n");
  g.segments = dir.write("in/segments.csv", b.segments_csv + "zz_island,sensor-x,50,0," +
                                                std::to_string(far + 50) + ",0\n");
  g.grid_nodes = n * n;
  g.segment_count = segments + 1;
  return g;
}

// Runs ingest and match in-process and writes both to disk.
inline lrmatch::PreparedData prepare_and_match(const TempDir& dir, const GridWithIsland& g,
                                               std::size_t k, lrmatch::CriterionId c,
                                               const std::string& run_id = "run") {
  lrmatch::PreparedData data =
      lrmatch::ingest(g.nodes, g.edges, g.segments, lrmatch::CoordMode::Metric, 4.0);
  lrmatch::write_prepared(dir / "prepared", data);
  lrmatch::RunConfig cfg;
  cfg.k = k;
  cfg.criterion = c;
  cfg.threads = 1;
  const auto run = lrmatch::run_match(data, cfg);
  lrmatch::write_run(dir / "run", run_id, data, cfg, run);
  return data;
}

}  // namespace fixture
