// lrmatch: match a low-resolution measurement network onto a street network.
//
//   lrmatch synth  --out DIR [grid options]
//   lrmatch ingest --nodes F --edges F --measurements F --out DIR
//   lrmatch match  --prepared DIR --out RUN_DIR [--run-id ID]
//   lrmatch report --prepared DIR --run-dir RUN_DIR [--run-id ID]
//   lrmatch serve  --prepared DIR --run-dir RUN_DIR [--port N]
//
// Exit codes: 0 success, 1 unexpected failure, 2 input or configuration error.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lrmatch/pipeline.hpp"
#include "lrmatch/server.hpp"
#include "lrmatch/synth.hpp"

namespace fs = std::filesystem;
using namespace lrmatch;

namespace {

struct ConfigFlags {
  std::string config_file;
  std::size_t k = 4;
  std::string criterion = "rc";
  double tolerance = 4.0;
  std::string coords = "metric";
  std::string threads = "auto";
  std::size_t worst_lc = 50, worst_rc = 300, worst_sc = 300, worst_ac = 50;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--config", f.config_file, "key = value config file");
  cmd->add_option("--k", f.k, "anchors per measurement endpoint");
  cmd->add_option("--criterion", f.criterion, "lc, rc, sc or ac");
  cmd->add_option("--tolerance", f.tolerance, "node consolidation tolerance (m)");
  cmd->add_option("--coords", f.coords, "metric or lonlat");
  cmd->add_option("--threads", f.threads, "worker threads or 'auto'");
  cmd->add_option("--worst-lc", f.worst_lc);
  cmd->add_option("--worst-rc", f.worst_rc);
  cmd->add_option("--worst-sc", f.worst_sc);
  cmd->add_option("--worst-ac", f.worst_ac);
}

// Flags override the config file, which overrides the defaults. The
// LOWRES_MATCH_THREADS environment variable overrides both for parallelism.
RunConfig resolve_config(CLI::App* cmd, const ConfigFlags& f) {
  RunConfig cfg;
  if (!f.config_file.empty()) apply_config(cfg, read_config_file(f.config_file), f.config_file);
  std::map<std::string, std::string> flags;
  auto given = [&](const char* name) { return cmd->count(name) > 0; };
  if (given("--k")) flags["k"] = std::to_string(f.k);
  if (given("--criterion")) flags["criterion"] = f.criterion;
  if (given("--tolerance")) flags["tolerance"] = io::format_double(f.tolerance);
  if (given("--coords")) flags["coords"] = f.coords;
  if (given("--threads")) flags["threads"] = f.threads;
  if (given("--worst-lc")) flags["worst_lc"] = std::to_string(f.worst_lc);
  if (given("--worst-rc")) flags["worst_rc"] = std::to_string(f.worst_rc);
  if (given("--worst-sc")) flags["worst_sc"] = std::to_string(f.worst_sc);
  if (given("--worst-ac")) flags["worst_ac"] = std::to_string(f.worst_ac);
  if (const char* env = std::getenv("LOWRES_MATCH_THREADS"); env && *env) flags["threads"] = env;
  apply_config(cfg, flags, "command line");
  cfg.validate();
  return cfg;
}

ReviewServer* g_server = nullptr;

void handle_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Match low-resolution measurement segments to street network paths"};
  app.require_subcommand(1);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic grid benchmark");
  std::string synth_out;
  synth::GridSpec spec;
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--rows", spec.rows);
  synth_cmd->add_option("--cols", spec.cols);
  synth_cmd->add_option("--spacing", spec.spacing_m, "grid spacing (m)");
  synth_cmd->add_option("--segments", spec.segments);
  synth_cmd->add_option("--min-span", spec.min_span, "minimum grid edges per segment");
  synth_cmd->add_option("--max-span", spec.max_span, "maximum grid edges per segment");
  synth_cmd->add_option("--jitter", spec.jitter_m, "endpoint displacement bound (m)");
  synth_cmd->add_option("--seed", spec.seed);

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "validate, consolidate and split the inputs");
  std::string nodes_file, edges_file, meas_file, prepared_out;
  ConfigFlags ingest_flags;
  ingest_cmd->add_option("--nodes", nodes_file)->required();
  ingest_cmd->add_option("--edges", edges_file)->required();
  ingest_cmd->add_option("--measurements", meas_file, "GeoJSON or CSV")->required();
  ingest_cmd->add_option("--out", prepared_out, "prepared directory")->required();
  add_config_flags(ingest_cmd, ingest_flags);

  // match
  auto* match_cmd = app.add_subcommand("match", "match every measurement segment");
  std::string prepared_dir, run_dir, run_id = "run";
  ConfigFlags match_flags;
  match_cmd->add_option("--prepared", prepared_dir)->required();
  match_cmd->add_option("--out", run_dir, "run directory")->required();
  match_cmd->add_option("--run-id", run_id);
  add_config_flags(match_cmd, match_flags);

  // report
  auto* report_cmd = app.add_subcommand("report", "rank curves, correlations, worst-N layers");
  ConfigFlags report_flags;
  report_cmd->add_option("--prepared", prepared_dir)->required();
  report_cmd->add_option("--run-dir", run_dir)->required();
  report_cmd->add_option("--run-id", run_id);
  add_config_flags(report_cmd, report_flags);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "review API (and UI bundle, if given)");
  std::string host = "127.0.0.1", ui_dir;
  int port = 8080;
  serve_cmd->add_option("--prepared", prepared_dir)->required();
  serve_cmd->add_option("--run-dir", run_dir)->required();
  serve_cmd->add_option("--run-id", run_id);
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port);
  serve_cmd->add_option("--ui-dir", ui_dir, "static review UI bundle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth_cmd) {
      const synth::Benchmark b = synth::make_grid(spec);
      const fs::path out(synth_out);
      io::write_atomic(out / "nodes.csv", b.nodes_csv);
      io::write_atomic(out / "edges.csv", b.edges_csv);
      io::write_atomic(out / "segments.csv", b.segments_csv);
      io::write_atomic(out / "truth.csv", b.truth_csv());
      std::cout << "wrote " << spec.rows * spec.cols << " nodes and " << spec.segments
                << " segments to " << out.string() << "\n";
    } else if (*ingest_cmd) {
      const RunConfig cfg = resolve_config(ingest_cmd, ingest_flags);
      const PreparedData data =
          ingest(nodes_file, edges_file, meas_file, cfg.coords, cfg.tolerance_m);
      write_prepared(prepared_out, data);
      std::cout << data.report.dump(2) << "\n";
    } else if (*match_cmd) {
      const RunConfig cfg = resolve_config(match_cmd, match_flags);
      const PreparedData data = load_prepared(prepared_dir);
      const RunOutput run = run_match(data, cfg);
      write_run(run_dir, run_id, data, cfg, run);
      std::cout << "matched " << run.summary.matched << " of " << run.summary.segments
                << " segments (" << run.summary.unmatched << " unmatched) in "
                << run.wall_seconds << " s\n";
    } else if (*report_cmd) {
      const RunConfig cfg = resolve_config(report_cmd, report_flags);
      const PreparedData data = load_prepared(prepared_dir);
      for (const fs::path& p : write_report(run_dir, run_id, data, cfg)) {
        std::cout << p.string() << "\n";
      }
    } else if (*serve_cmd) {
      PreparedData data = load_prepared(prepared_dir);
      LoadedRun run = load_run(run_dir, run_id, data.net);
      ReviewService service(std::move(data), std::move(run), run_dir);
      ReviewServer server(service, ui_dir);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::cout << "serving on http://" << host << ":" << bound << std::endl;
      server.listen();
      g_server = nullptr;
    }
  } catch (const lrmatch::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
