#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>

#include "matchlab/density.hpp"
#include "matchlab/error.hpp"
#include "matchlab/experiments.hpp"
#include "matchlab/io.hpp"
#include "matchlab/rng.hpp"
#include "matchlab/transport.hpp"

using namespace matchlab;

namespace {

template <typename F>
std::optional<errc> thrown_code(F&& f) {
  try {
    f();
  } catch (const error& e) {
    return e.code();
  }
  return std::nullopt;
}

// fresh scratch directory per test run, removed on destruction
struct TempDir {
  std::filesystem::path root;
  TempDir() {
    root = std::filesystem::temp_directory_path() /
           ("matchlab_io_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()));
    std::filesystem::create_directories(root);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(root, ec);
  }
  std::string file(const std::string& name) const { return (root / name).string(); }
  static int counter() {
    static int c = 0;
    return ++c;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

} // namespace

TEST_SUITE("io") {

TEST_CASE("format_double round-trips doubles exactly") {
  for (double v : {1.0 / 3.0, 0.1, 1e-300, 12345678.9012345, -0.0, 2.5e17}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(2.0) == "2");
}

TEST_CASE("point clouds survive a write/read cycle bit for bit") {
  TempDir dir;
  Rng rng(31337);
  PointCloud cloud;
  for (int i = 0; i < 57; ++i) cloud.points.push_back({rng.uniform(), rng.uniform()});
  const std::string path = dir.file("cloud.txt");
  write_point_cloud(path, cloud);
  const PointCloud back = read_point_cloud(path);
  REQUIRE(back.size() == cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(back[i].x == cloud[i].x);
    CHECK(back[i].y == cloud[i].y);
  }
  CHECK(thrown_code([&] { read_point_cloud(dir.file("missing.txt")); }) == errc::io_failure);

  std::ofstream bad(dir.file("bad.txt"));
  bad << "2\n0.5 0.5\n1.5 0.5\n";
  bad.close();
  CHECK(thrown_code([&] { read_point_cloud(dir.file("bad.txt")); }) == errc::out_of_domain);
}

TEST_CASE("grid fields survive a write/read cycle") {
  TempDir dir;
  GridField f(5);
  Rng rng(4242);
  for (double& v : f.values) v = rng.normal();
  const std::string path = dir.file("field.txt");
  write_grid_field(path, f);
  const GridField back = read_grid_field(path);
  REQUIRE(back.m == 5);
  for (std::size_t i = 0; i < f.values.size(); ++i) CHECK(back.values[i] == f.values[i]);
}

TEST_CASE("plan files list sparse flows with a size header") {
  WeightedAtoms sources, sinks;
  sources.points = {{0.0, 0.0}, {1.0, 0.0}};
  sources.masses = {0.5, 0.5};
  sinks.points = {{0.5, 0.0}};
  sinks.masses = {1.0};
  const TransportPlan plan = solve_transportation(sources, sinks);
  std::ostringstream out;
  write_plan(out, plan);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "2 1");
  int flows = 0;
  while (std::getline(lines, line))
    if (!line.empty()) ++flows;
  CHECK(flows == 2);
  CHECK(out.str().find("1 1 0.5") != std::string::npos);
}

TEST_CASE("density files reproduce every model kind") {
  TempDir dir;
  int index = 0;
  for (const char* preset : {"uniform", "tilted", "pwc2x2", "two_delta", "disconnected"}) {
    const DensityModel model = preset_density(preset);
    const std::string path = dir.file("density_" + std::to_string(index++) + ".txt");
    write_density(path, model);
    const DensityModel back = read_density(path);
    CHECK(back.kind == model.kind);
    if (is_positive_kind(model)) {
      // probe a few interior points; evaluation must agree exactly
      for (double x : {0.1, 0.45, 0.9})
        for (double y : {0.2, 0.75})
          CHECK(evaluate(back, {x, y}) == doctest::Approx(evaluate(model, {x, y})).epsilon(1e-12));
    } else if (model.kind == DensityKind::two_delta) {
      CHECK(back.z1.x == model.z1.x);
      CHECK(back.z2.y == model.z2.y);
    } else {
      CHECK(back.sq1.x0 == model.sq1.x0);
      CHECK(back.sq2.x1 == model.sq2.x1);
      CHECK(back.v1 == model.v1);
    }
  }
}

TEST_CASE("density resolution accepts presets and files, rejects the rest") {
  TempDir dir;
  CHECK(resolve_density("uniform").kind == DensityKind::uniform);
  const std::string path = dir.file("density.txt");
  write_density(path, preset_density("pwc2x2"));
  CHECK(resolve_density(path).kind == DensityKind::piecewise_constant);
  CHECK(thrown_code([] { resolve_density("no_such_density"); }) == errc::config_invalid);
}

TEST_CASE("records CSV keeps the schema and blanks NaN columns") {
  TempDir dir;
  std::vector<TrialRecord> records;
  TrialRecord a;
  a.n = 16;
  a.trial = 0;
  a.seed = 123;
  a.cost = 0.25;
  records.push_back(a); // raw/corrected stay NaN
  TrialRecord b;
  b.n = 16;
  b.trial = 1;
  b.seed = 456;
  b.cost = 0.5;
  b.raw = 3.0;
  b.corrected = 0.375;
  records.push_back(b);
  const std::string path = dir.file("records.csv");
  write_records_csv(path, ExperimentMode::bipartite, records);

  const std::string text = slurp(path);
  std::istringstream lines(text);
  std::string line;
  std::getline(lines, line);
  CHECK(line == records_csv_header);
  std::getline(lines, line);
  CHECK(line == "bipartite,16,0,123,0.25,,,");
  std::getline(lines, line);
  CHECK(line == "bipartite,16,1,456,0.5,3,0.375,");

  const CsvRecords back = read_records_csv(path);
  REQUIRE(back.records.size() == 2);
  CHECK(back.modes[0] == "bipartite");
  CHECK(back.records[0].cost == 0.25);
  CHECK(std::isnan(back.records[0].raw));
  CHECK(back.records[1].corrected == 0.375);

  std::ofstream bad(dir.file("bad.csv"));
  bad << "mode,N,trial\nbipartite,1,0\n";
  bad.close();
  CHECK(thrown_code([&] { read_records_csv(dir.file("bad.csv")); }) == errc::io_failure);
}

TEST_CASE("experiment config files parse keys and reject unknown ones") {
  TempDir dir;
  const std::string path = dir.file("exp.cfg");
  std::ofstream cfg(path);
  cfg << "# two-sample run\n";
  cfg << "mode bipartite\n";
  cfg << "density pwc2x2\n";
  cfg << "n 32 64\n";
  cfg << "trials 5 3\n";
  cfg << "seed 77\n";
  cfg << "jobs 2\n";
  cfg.close();
  const ExperimentConfig parsed = read_experiment_config(path);
  CHECK(parsed.mode == ExperimentMode::bipartite);
  CHECK(parsed.model.kind == DensityKind::piecewise_constant);
  CHECK(parsed.n_values == std::vector<long>{32, 64});
  CHECK(parsed.trials == std::vector<int>{5, 3});
  CHECK(parsed.master_seed == 77);
  CHECK(parsed.jobs == 2);

  std::ofstream bad(dir.file("bad.cfg"));
  bad << "mode bipartite\nn 8\ntrials 2\nwidgets 3\n";
  bad.close();
  CHECK(thrown_code([&] { read_experiment_config(dir.file("bad.cfg")); }) ==
        errc::config_invalid);

  std::ofstream missing(dir.file("missing_mode.cfg"));
  missing << "n 8\ntrials 2\n";
  missing.close();
  CHECK(thrown_code([&] { read_experiment_config(dir.file("missing_mode.cfg")); }) ==
        errc::config_invalid);
}

TEST_CASE("summary json is stable and carries the fit") {
  ExperimentConfig cfg;
  cfg.mode = ExperimentMode::two_delta;
  cfg.density = "two_delta";
  cfg.model = preset_density("two_delta");
  cfg.n_values = {50, 100, 200};
  cfg.trials = {10};
  cfg.master_seed = 5;
  cfg.jobs = 1;
  const ExperimentResult result = run_experiment(cfg);
  const std::string a = summary_json(result);
  const std::string b = summary_json(run_experiment(cfg));
  CHECK(a == b);
  CHECK(a.find("\"mode\"") != std::string::npos);
  CHECK(a.find("\"stats\"") != std::string::npos);

  const std::string manifest = manifest_json(cfg, "experiment", "outdir");
  CHECK(manifest.find("\"subcommand\": \"experiment\"") != std::string::npos);
  CHECK(manifest.find("\"seed\": 5") != std::string::npos);
}

TEST_CASE("report renders one aligned row per mode and sample size") {
  TempDir dir;
  ExperimentConfig cfg;
  cfg.mode = ExperimentMode::two_delta;
  cfg.density = "two_delta";
  cfg.model = preset_density("two_delta");
  cfg.n_values = {25, 50};
  cfg.trials = {6, 4};
  cfg.master_seed = 11;
  cfg.jobs = 1;
  const ExperimentResult result = run_experiment(cfg);
  const std::string path = dir.file("records.csv");
  write_records_csv(path, result.mode, result.records);
  const std::string text = render_report(read_records_csv(path));
  CHECK(text.find("two_delta") != std::string::npos);
  CHECK(text.find("mean_cost") != std::string::npos);
  // one header plus one row per n
  int rows = 0;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line))
    if (!line.empty() && line[0] != '#') ++rows;
  CHECK(rows == 2);
}

} // TEST_SUITE
