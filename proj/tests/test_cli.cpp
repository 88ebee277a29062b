#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"

extern char** environ;

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the CLI through the shell with stdout and stderr captured to files.
Outcome run(const fixture::TempDir& dir, const std::string& args, const std::string& env = "") {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = env + " \"" + std::string(LRMATCH_CLI_PATH) + "\" " + args + " >\"" +
                          out.string() + "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = fixture::read(out);
  o.err = fixture::read(err);
  return o;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

json read_json(const fs::path& p) { return json::parse(fixture::read(p)); }

// Asks the kernel for an unused port, then releases it for the server.
int free_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  socklen_t len = sizeof addr;
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

}  // namespace

TEST(Cli, DuplicateNodeIdExitsTwoNamingTheRow) {
  fixture::TempDir d("cli");
  const auto nodes = d.write("nodes.csv", "node_id,x,y\nA,0,0\nB,1,1\nA,2,2\n");
  const auto edges = d.write("edges.csv", "edge_id,from,to\n");
  const auto segs = d.write("s.csv", "segment_id,sensor_id,ax,ay,bx,by\ns,k,0,0,1,1\n");
  const Outcome o = run(d, "ingest --nodes " + q(nodes) + " --edges " + q(edges) +
                               " --measurements " + q(segs) + " --out " + q(d / "p"));
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("nodes.csv:4"), std::string::npos) << o.err;
  EXPECT_NE(o.err.find("duplicate node id"), std::string::npos) << o.err;
  EXPECT_FALSE(fs::exists(d / "p" / "nodes.csv"));
}

TEST(Cli, IngestReportsConsolidatedNodeCount) {
  fixture::TempDir d("cli");
  const auto nodes = d.write("nodes.csv", "node_id,x,y\nA,0,0\nB,2,0\n");
  const auto edges = d.write("edges.csv", "edge_id,from,to\nab,A,B\n");
  const auto segs = d.write("s.csv", "segment_id,sensor_id,ax,ay,bx,by\ns,k,0,0,1,1\n");
  const Outcome o = run(d, "ingest --tolerance 4 --nodes " + q(nodes) + " --edges " + q(edges) +
                               " --measurements " + q(segs) + " --out " + q(d / "p"));
  ASSERT_EQ(o.code, 0) << o.err;
  const json report = read_json(d / "p" / "ingest_report.json");
  EXPECT_EQ(report["street_nodes_before"], 2);
  EXPECT_EQ(report["street_nodes_after"], 1);
  EXPECT_EQ(report["street_edges_after"], 0);
}

TEST(Cli, SynthIngestMatchReportOnGrid) {
  fixture::TempDir d("cli");
  ASSERT_EQ(run(d, "synth --out " + q(d / "g") + " --rows 12 --cols 12 --segments 60").code, 0);
  const std::string in = " --nodes " + q(d / "g" / "nodes.csv") + " --edges " +
                         q(d / "g" / "edges.csv") + " --measurements " +
                         q(d / "g" / "segments.csv");
  ASSERT_EQ(run(d, "ingest" + in + " --out " + q(d / "p")).code, 0);
  const Outcome m =
      run(d, "match --prepared " + q(d / "p") + " --out " + q(d / "r") + " --criterion rc --k 4");
  ASSERT_EQ(m.code, 0) << m.err;
  const json summary = read_json(d / "r" / "run.summary.json");
  EXPECT_EQ(summary["segments"], 60);
  EXPECT_EQ(summary["matched"], 60);
  EXPECT_EQ(summary["criterion"], "RC");
  EXPECT_EQ(summary["k"], 4);
  const Outcome r = run(d, "report --prepared " + q(d / "p") + " --run-dir " + q(d / "r"));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"run.rank.lc.csv", "run.rank.ac.csv", "run.worst.rc.geojson",
                        "run.corr.rc_lc.csv", "run.corr.rc_ac.csv", "run.streets.geojson",
                        "run.reviewed.results.csv"}) {
    EXPECT_TRUE(fs::exists(d / "r" / f)) << f;
  }
  EXPECT_FALSE(fs::exists(d / "r" / "run.corr.rc_rc.csv"));
}

TEST(Cli, UnmatchedSegmentIsNotAnError) {
  fixture::TempDir d("cli");
  const auto g = fixture::write_grid_with_island(d);
  ASSERT_EQ(run(d, "ingest --nodes " + q(g.nodes) + " --edges " + q(g.edges) +
                       " --measurements " + q(g.segments) + " --out " + q(d / "p"))
                .code,
            0);
  const Outcome m = run(d, "match --k 2 --prepared " + q(d / "p") + " --out " + q(d / "r"));
  EXPECT_EQ(m.code, 0) << m.err;
  const json summary = read_json(d / "r" / "run.summary.json");
  EXPECT_EQ(summary["unmatched"], 1);
  EXPECT_EQ(summary["unmatched_reasons"]["NoPath"], 1);
  EXPECT_EQ(summary["unmatched_segments"][0]["seg_id"], "zz_island");
  const json layer = read_json(d / "r" / "run.unmatched.geojson");
  EXPECT_EQ(layer["features"].size(), 1u);
}

TEST(Cli, ConfigFilePrecedence) {
  fixture::TempDir d("cli");
  const auto g = fixture::write_grid_with_island(d);
  ASSERT_EQ(run(d, "ingest --nodes " + q(g.nodes) + " --edges " + q(g.edges) +
                       " --measurements " + q(g.segments) + " --out " + q(d / "p"))
                .code,
            0);
  const auto cfg = d.write("run.conf", "# test config\nk = 2\ncriterion = sc\n");
  const std::string base = "match --prepared " + q(d / "p") + " --config " + q(cfg);

  ASSERT_EQ(run(d, base + " --out " + q(d / "a")).code, 0);
  json s = read_json(d / "a" / "run.summary.json");
  EXPECT_EQ(s["k"], 2);
  EXPECT_EQ(s["criterion"], "SC");

  ASSERT_EQ(run(d, base + " --k 3 --out " + q(d / "b")).code, 0);
  s = read_json(d / "b" / "run.summary.json");
  EXPECT_EQ(s["k"], 3);
  EXPECT_EQ(s["criterion"], "SC");

  ASSERT_EQ(run(d, "match --prepared " + q(d / "p") + " --out " + q(d / "c")).code, 0);
  s = read_json(d / "c" / "run.summary.json");
  EXPECT_EQ(s["k"], 4);
  EXPECT_EQ(s["criterion"], "RC");

  EXPECT_EQ(run(d, base + " --out " + q(d / "e"), "LOWRES_MATCH_THREADS=2").code, 0);
  EXPECT_EQ(run(d, base + " --out " + q(d / "e"), "LOWRES_MATCH_THREADS=bogus").code, 2);

  const auto bad = d.write("bad.conf", "k = 2\nwhatever = 1\n");
  EXPECT_EQ(run(d, "match --prepared " + q(d / "p") + " --config " + q(bad) + " --out " +
                       q(d / "f"))
                .code,
            2);
}

TEST(Cli, InputErrorsExitTwo) {
  fixture::TempDir d("cli");
  EXPECT_EQ(run(d, "").code, 2);
  EXPECT_EQ(run(d, "frobnicate").code, 2);
  EXPECT_EQ(run(d, "match --prepared " + q(d / "missing") + " --out " + q(d / "r")).code, 2);
  // Empty street network.
  d.write("p/nodes.csv", "node_id,x,y\n");
  d.write("p/edges.csv", "edge_id,from,to,length_m\n");
  d.write("p/segments.csv", "segment_id,sensor_id,ax,ay,bx,by\ns,k,0,0,1,1\n");
  const Outcome o = run(d, "match --prepared " + q(d / "p") + " --out " + q(d / "r"));
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("empty"), std::string::npos) << o.err;
  EXPECT_EQ(run(d, "match --criterion zz --prepared " + q(d / "p") + " --out " + q(d / "r")).code,
            2);
}

TEST(Cli, ReportOnRunWithoutMatchesExitsTwo) {
  fixture::TempDir d("cli");
  d.write("p/nodes.csv", "node_id,x,y\na,0,0\nb,10,0\nc,1000,0\nd,1010,0\n");
  d.write("p/edges.csv", "edge_id,from,to,length_m\nab,a,b,10\ncd,c,d,10\n");
  d.write("p/segments.csv", "segment_id,sensor_id,ax,ay,bx,by\ns,k,0,0,1005,0\n");
  ASSERT_EQ(run(d, "match --k 1 --prepared " + q(d / "p") + " --out " + q(d / "r")).code, 0);
  const Outcome o = run(d, "report --prepared " + q(d / "p") + " --run-dir " + q(d / "r"));
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("no matched segments"), std::string::npos) << o.err;
}

TEST(Cli, ServeAnswersHealthAndStopsOnSignal) {
  fixture::TempDir d("cli");
  fixture::prepare_and_match(d, fixture::write_grid_with_island(d), 2, lrmatch::CriterionId::RC);
  const int port = free_port();
  const std::string port_s = std::to_string(port);
  const std::string prepared = (d / "prepared").string(), run_dir = (d / "run").string();
  std::vector<std::string> args = {LRMATCH_CLI_PATH, "serve",    "--prepared", prepared,
                                   "--run-dir",      run_dir,    "--port",     port_s};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  pid_t pid = 0;
  ASSERT_EQ(posix_spawn(&pid, LRMATCH_CLI_PATH, nullptr, nullptr, argv.data(), environ), 0);

  httplib::Client cli("127.0.0.1", port);
  cli.set_connection_timeout(2);
  cli.set_read_timeout(10);
  int status_code = 0;
  for (int i = 0; i < 100 && status_code != 200; ++i) {
    if (auto res = cli.Get("/health")) status_code = res->status;
    else std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  EXPECT_EQ(status_code, 200);

  // A second instance on the same port fails fast with an input error.
  const Outcome busy = run(d, "serve --prepared " + q(d / "prepared") + " --run-dir " +
                                  q(d / "run") + " --port " + port_s);
  EXPECT_EQ(busy.code, 2) << busy.err;

  // Overrides posted now are still there after a restart.
  auto post = cli.Post("/segments/s01/override", R"({"decision":"MarkUnmatchable"})",
                       "application/json");
  ASSERT_TRUE(post);
  EXPECT_EQ(post->status, 200);

  kill(pid, SIGTERM);
  int status = 0;
  waitpid(pid, &status, 0);
  EXPECT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0);

  ASSERT_EQ(posix_spawn(&pid, LRMATCH_CLI_PATH, nullptr, nullptr, argv.data(), environ), 0);
  json listing;
  for (int i = 0; i < 100 && listing.is_null(); ++i) {
    if (auto res = cli.Get("/segments?sort=rc&page_size=1000")) listing = json::parse(res->body);
    else std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  bool found = false;
  for (const auto& item : listing["items"]) {
    if (item["seg_id"] == "s01") {
      found = true;
      EXPECT_EQ(item["status"], "unmatched");
      EXPECT_EQ(item["reason"], "MarkedUnmatchable");
      EXPECT_TRUE(item["overridden"].get<bool>());
    }
  }
  EXPECT_TRUE(found);
  kill(pid, SIGTERM);
  waitpid(pid, &status, 0);
}

TEST(Cli, RunIdsShareARunDirectory) {
  fixture::TempDir d("cli");
  const auto g = fixture::write_grid_with_island(d);
  ASSERT_EQ(run(d, "ingest --nodes " + q(g.nodes) + " --edges " + q(g.edges) +
                       " --measurements " + q(g.segments) + " --out " + q(d / "p"))
                .code,
            0);
  for (const char* c : {"lc", "ac"}) {
    ASSERT_EQ(run(d, std::string("match --criterion ") + c + " --run-id " + c + " --prepared " +
                         q(d / "p") + " --out " + q(d / "r"))
                  .code,
              0);
  }
  EXPECT_EQ(read_json(d / "r" / "lc.summary.json")["criterion"], "LC");
  EXPECT_EQ(read_json(d / "r" / "ac.summary.json")["criterion"], "AC");
  ASSERT_EQ(run(d, "report --run-id ac --prepared " + q(d / "p") + " --run-dir " + q(d / "r"))
                .code,
            0);
  EXPECT_TRUE(fs::exists(d / "r" / "ac.rank.lc.csv"));
  EXPECT_FALSE(fs::exists(d / "r" / "lc.rank.lc.csv"));
}
