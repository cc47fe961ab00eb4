#include "matchlab/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <ostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "matchlab/density.hpp"
#include "matchlab/error.hpp"
#include "matchlab/experiments.hpp"
#include "matchlab/field.hpp"
#include "matchlab/io.hpp"
#include "matchlab/semidiscrete.hpp"
#include "matchlab/transport.hpp"
#include "matchlab/version.hpp"

namespace matchlab {

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void do_sample(std::ostream& out, const std::string& density, long n, std::uint64_t seed,
               const std::string& out_path) {
  if (n < 1) fail(errc::config_invalid, "n: must be >= 1");
  const DensityModel model = resolve_density(density);
  const PointCloud cloud = sample_points(model, std::size_t(n), seed);
  if (out_path.empty()) {
    write_point_cloud(out, cloud);
  } else {
    write_point_cloud(out_path, cloud);
    out << "wrote " << n << " points to " << out_path << "\n";
  }
}

void do_match(std::ostream& out, const std::string& x_path, const std::string& y_path,
              const std::string& out_path) {
  const PointCloud x = read_point_cloud(x_path);
  const PointCloud y = read_point_cloud(y_path);
  const Assignment a = solve_assignment(x, y);
  out << "cost " << format_double(a.cost) << "\n";
  if (!out_path.empty()) {
    write_matching(out_path, a);
    out << "wrote matching to " << out_path << "\n";
  }
}

void do_w2(std::ostream& out, const std::string& x_path, const std::string& y_path,
           const std::string& density, int resolution) {
  if (y_path.empty() == density.empty())
    fail(errc::config_invalid, "y/density: give exactly one comparison target");
  const PointCloud x = read_point_cloud(x_path);
  if (!y_path.empty()) {
    const PointCloud y = read_point_cloud(y_path);
    out << "w2 " << format_double(empirical_w2(x, y)) << "\n";
    return;
  }
  const DensityModel model = resolve_density(density);
  const int m = resolution > 0 ? resolution : default_resolution(x.size());
  const SemidiscreteResult r = w2_to_density(x, model, m);
  out << "resolution " << m << "\n";
  out << "raw " << format_double(r.raw) << "\n";
  out << "corrected " << format_double(r.corrected) << "\n";
}

void do_predict(std::ostream& out, double n) {
  out << "heat " << format_double(heat_cutoff_prediction(n)) << "\n";
  out << "fourier " << format_double(fourier_cutoff_prediction(n)) << "\n";
}

void do_green(std::ostream& out, const std::string& density, double zx, double zy, int resolution,
              double r_min) {
  const DensityModel model = resolve_density(density);
  const Point z{zx, zy};
  const double c = green_singular_coefficient(model, z, resolution, r_min);
  out << "coefficient " << format_double(c) << "\n";
  const DensityModel probe = model.normalized ? model : normalize(model);
  out << "reference " << format_double(1.0 / (2.0 * 3.14159265358979323846 * evaluate(probe, z)))
      << "\n";
}

void do_experiment(std::ostream& out, const std::string& config_path, bool seed_set,
                   std::uint64_t seed, bool jobs_set, int jobs, const std::string& out_dir) {
  ExperimentConfig config = read_experiment_config(config_path);
  if (seed_set) config.master_seed = seed;
  if (jobs_set) config.jobs = jobs;
  validate_config(config);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(errc::io_failure, "cannot create output directory '" + out_dir + "'");

  const std::string started = utc_timestamp();
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult result = run_experiment(config);
  const auto t1 = std::chrono::steady_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();

  const std::string records_path = out_dir + "/records.csv";
  write_records_csv(records_path, result.mode, result.records);
  write_text_file(out_dir + "/summary.json", summary_json(result));
  write_text_file(out_dir + "/manifest.json", manifest_json(config, "experiment", out_dir));

  // wall-clock facts live here, never in the data files
  std::ostringstream log;
  log << "started " << started << "\n";
  log << "config " << config_path << "\n";
  log << "mode " << mode_name(config.mode) << "\n";
  log << "seed " << config.master_seed << "\n";
  log << "records " << result.records.size() << "\n";
  log << "elapsed_ms " << ms << "\n";
  log << "finished " << utc_timestamp() << "\n";
  write_text_file(out_dir + "/run.log", log.str());

  out << "wrote " << result.records.size() << " records to " << records_path << "\n";
  if (result.fit) {
    out << "slope " << format_double(result.fit->slope) << " +- "
        << format_double(result.fit->slope_se);
    if (result.fit->target != 0.0)
      out << " (target " << format_double(result.fit->target) << ", ratio "
          << format_double(result.fit->ratio) << ")";
    out << "\n";
  }
}

void do_report(std::ostream& out, const std::string& csv_path, const std::string& out_path) {
  const CsvRecords data = read_records_csv(csv_path);
  const std::string text = render_report(data);
  if (out_path.empty()) {
    out << text;
  } else {
    write_text_file(out_path, text);
    out << "wrote report to " << out_path << "\n";
  }
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"random Euclidean matching laboratory on the unit square"};
  app.set_version_flag("--version", std::string(version_string));
  app.require_subcommand(1);

  // sample
  auto* sample = app.add_subcommand("sample", "draw points from a density");
  std::string sample_density = "uniform", sample_out;
  long sample_n = 0;
  std::uint64_t sample_seed = default_master_seed;
  sample->add_option("--density", sample_density, "preset name or density file");
  sample->add_option("--n", sample_n, "number of points")->required();
  sample->add_option("--seed", sample_seed, "RNG seed (fixed default, never wall-clock)");
  sample->add_option("--out", sample_out, "output file (default: stdout)");
  sample->callback([&] { do_sample(out, sample_density, sample_n, sample_seed, sample_out); });

  // match
  auto* match = app.add_subcommand("match", "optimal matching between two point files");
  std::string match_x, match_y, match_out;
  match->add_option("--x", match_x, "first point cloud file")->required();
  match->add_option("--y", match_y, "second point cloud file")->required();
  match->add_option("--out", match_out, "write the matching here");
  match->callback([&] { do_match(out, match_x, match_y, match_out); });

  // w2
  auto* w2 = app.add_subcommand("w2", "squared W2 distance from a sample");
  std::string w2_x, w2_y, w2_density;
  int w2_resolution = 0;
  w2->add_option("--x", w2_x, "point cloud file")->required();
  w2->add_option("--y", w2_y, "second cloud (two-sample distance)");
  w2->add_option("--density", w2_density, "density target (sample-to-density distance)");
  w2->add_option("--resolution", w2_resolution, "discretization grid (default: by n)");
  w2->callback([&] { do_w2(out, w2_x, w2_y, w2_density, w2_resolution); });

  // predict
  auto* predict = app.add_subcommand("predict", "matching cost predictions at a given n");
  double predict_n = 0.0;
  predict->add_option("--n", predict_n, "number of points")->required();
  predict->callback([&] { do_predict(out, predict_n); });

  // green
  auto* green = app.add_subcommand("green", "singular coefficient of the weighted Green function");
  std::string green_density = "uniform";
  double green_zx = 0.5, green_zy = 0.5, green_rmin = 0.0;
  int green_resolution = 256;
  green->add_option("--density", green_density, "preset name or density file");
  green->add_option("--zx", green_zx, "charge x (grid vertex)");
  green->add_option("--zy", green_zy, "charge y (grid vertex)");
  green->add_option("--resolution", green_resolution, "grid resolution");
  green->add_option("--rmin", green_rmin, "inner fit radius (default 4/resolution)");
  green->callback(
      [&] { do_green(out, green_density, green_zx, green_zy, green_resolution, green_rmin); });

  // experiment
  auto* experiment = app.add_subcommand("experiment", "run a configured Monte Carlo experiment");
  std::string exp_config, exp_out = "out";
  std::uint64_t exp_seed = default_master_seed;
  int exp_jobs = 0;
  auto* exp_config_opt =
      experiment->add_option("--config", exp_config, "experiment config file")->required();
  auto* exp_seed_opt =
      experiment->add_option("--seed", exp_seed, "master seed (overrides the config)");
  auto* exp_jobs_opt =
      experiment->add_option("--jobs", exp_jobs, "worker threads (default: all processors)");
  experiment->add_option("--out", exp_out, "output directory");
  (void)exp_config_opt;
  experiment->callback([&] {
    do_experiment(out, exp_config, exp_seed_opt->count() > 0, exp_seed,
                  exp_jobs_opt->count() > 0, exp_jobs, exp_out);
  });

  // report
  auto* report = app.add_subcommand("report", "aggregate a records CSV into a table");
  std::string report_csv, report_out;
  report->add_option("--csv", report_csv, "records CSV file")->required();
  report->add_option("--out", report_out, "output file (default: stdout)");
  report->callback([&] { do_report(out, report_csv, report_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  } catch (const error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == errc::config_invalid ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

} // namespace matchlab
