#include "matchlab/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "matchlab/error.hpp"

namespace matchlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_failure, "cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::io_failure, "cannot open '" + path + "' for writing");
  return out;
}

// whitespace tokens with '#' comments stripped
std::vector<std::string> tokenize(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
  }
  return tokens;
}

double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(errc::io_failure, context + ": expected a number, got '" + s + "'");
  }
}

long parse_long(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(errc::io_failure, context + ": expected an integer, got '" + s + "'");
  }
}

} // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// point clouds, matchings, plans

void write_point_cloud(std::ostream& out, const PointCloud& cloud) {
  out << cloud.size() << "\n";
  for (const Point& p : cloud.points)
    out << format_double(p.x) << " " << format_double(p.y) << "\n";
}

void write_point_cloud(const std::string& path, const PointCloud& cloud) {
  auto out = open_output(path);
  write_point_cloud(out, cloud);
}

PointCloud read_point_cloud(const std::string& path) {
  auto in = open_input(path);
  const std::vector<std::string> tokens = tokenize(in);
  if (tokens.empty()) fail(errc::io_failure, path + ": missing point count header");
  const long n = parse_long(tokens[0], path);
  if (n < 0 || tokens.size() != std::size_t(1 + 2 * n))
    fail(errc::io_failure, path + ": expected " + std::to_string(2 * n) + " coordinates");
  PointCloud cloud;
  for (long i = 0; i < n; ++i)
    cloud.points.push_back(
        {parse_double(tokens[1 + 2 * i], path), parse_double(tokens[2 + 2 * i], path)});
  validate_cloud(cloud);
  return cloud;
}

void write_matching(std::ostream& out, const Assignment& a) {
  out << a.match.size() << "\n";
  for (std::size_t i = 0; i < a.match.size(); ++i)
    out << (i + 1) << " " << (a.match[i] + 1) << "\n";
}

void write_matching(const std::string& path, const Assignment& a) {
  auto out = open_output(path);
  write_matching(out, a);
}

void write_plan(std::ostream& out, const TransportPlan& plan) {
  out << plan.source_masses.size() << " " << plan.sink_masses.size() << "\n";
  for (const PlanEntry& e : plan.flows)
    out << (e.i + 1) << " " << (e.j + 1) << " " << format_double(e.flow) << "\n";
}

void write_plan(const std::string& path, const TransportPlan& plan) {
  auto out = open_output(path);
  write_plan(out, plan);
}

// ---------------------------------------------------------------------------
// grid fields

void write_grid_field(const std::string& path, const GridField& f) {
  auto out = open_output(path);
  out << f.m << "\n";
  for (int j = 0; j <= f.m; ++j) {
    for (int i = 0; i <= f.m; ++i) out << (i ? " " : "") << format_double(f.at(i, j));
    out << "\n";
  }
}

GridField read_grid_field(const std::string& path) {
  auto in = open_input(path);
  const std::vector<std::string> tokens = tokenize(in);
  if (tokens.empty()) fail(errc::io_failure, path + ": missing resolution header");
  const long m = parse_long(tokens[0], path);
  if (m < 1) fail(errc::io_failure, path + ": resolution must be >= 1");
  const std::size_t count = std::size_t(m + 1) * std::size_t(m + 1);
  if (tokens.size() != 1 + count)
    fail(errc::io_failure, path + ": expected " + std::to_string(count) + " vertex values");
  GridField f(static_cast<int>(m));
  for (std::size_t i = 0; i < count; ++i) f.values[i] = parse_double(tokens[1 + i], path);
  return f;
}

// ---------------------------------------------------------------------------
// densities

void write_density(const std::string& path, const DensityModel& model) {
  auto out = open_output(path);
  switch (model.kind) {
    case DensityKind::uniform:
      out << "density uniform\n";
      break;
    case DensityKind::piecewise_constant: {
      out << "density piecewise_constant\n";
      out << "m " << model.m << "\n";
      out << "values";
      for (double v : model.values) out << " " << format_double(v);
      out << "\n";
      break;
    }
    case DensityKind::smooth_sampled: {
      out << "density smooth_sampled\n";
      out << "k " << model.k << "\n";
      out << "values";
      for (double v : model.values) out << " " << format_double(v);
      out << "\n";
      if (model.lipschitz > 0.0) out << "lipschitz " << format_double(model.lipschitz) << "\n";
      if (model.lower_bound > 0.0)
        out << "lower_bound " << format_double(model.lower_bound) << "\n";
      break;
    }
    case DensityKind::two_delta:
      out << "density two_delta\n";
      out << "z1 " << format_double(model.z1.x) << " " << format_double(model.z1.y) << "\n";
      out << "z2 " << format_double(model.z2.x) << " " << format_double(model.z2.y) << "\n";
      break;
    case DensityKind::disconnected_squares:
      out << "density disconnected\n";
      out << "square1 " << format_double(model.sq1.x0) << " " << format_double(model.sq1.y0) << " "
          << format_double(model.sq1.x1) << " " << format_double(model.sq1.y1) << "\n";
      out << "square2 " << format_double(model.sq2.x0) << " " << format_double(model.sq2.y0) << " "
          << format_double(model.sq2.x1) << " " << format_double(model.sq2.y1) << "\n";
      out << "value1 " << format_double(model.v1) << "\n";
      out << "value2 " << format_double(model.v2) << "\n";
      break;
  }
}

DensityModel read_density(const std::string& path) {
  auto in = open_input(path);
  std::vector<std::string> tokens = tokenize(in);
  std::size_t pos = 0;
  auto next = [&](const char* what) -> const std::string& {
    if (pos >= tokens.size()) fail(errc::io_failure, path + ": unexpected end of file in " + what);
    return tokens[pos++];
  };
  if (next("header") != "density") fail(errc::io_failure, path + ": expected 'density <kind>'");
  const std::string kind = next("header");

  int m = 0, k = 0;
  std::vector<double> values;
  double lipschitz = 0.0, lower_bound = 0.0, v1 = 0.0, v2 = 0.0;
  Point z1{}, z2{};
  Rect sq1{}, sq2{};
  auto read_rect = [&](const char* what) {
    Rect r;
    r.x0 = parse_double(next(what), path);
    r.y0 = parse_double(next(what), path);
    r.x1 = parse_double(next(what), path);
    r.y1 = parse_double(next(what), path);
    return r;
  };
  while (pos < tokens.size()) {
    const std::string key = next("body");
    if (key == "m") {
      m = int(parse_long(next("m"), path));
    } else if (key == "k") {
      k = int(parse_long(next("k"), path));
    } else if (key == "values") {
      std::size_t count = 0;
      if (kind == "piecewise_constant") count = std::size_t(m) * std::size_t(m);
      else if (kind == "smooth_sampled") count = std::size_t(k + 1) * std::size_t(k + 1);
      if (count == 0) fail(errc::io_failure, path + ": grid size must come before values");
      for (std::size_t i = 0; i < count; ++i) values.push_back(parse_double(next("values"), path));
    } else if (key == "z1") {
      z1 = {parse_double(next("z1"), path), parse_double(next("z1"), path)};
    } else if (key == "z2") {
      z2 = {parse_double(next("z2"), path), parse_double(next("z2"), path)};
    } else if (key == "square1") {
      sq1 = read_rect("square1");
    } else if (key == "square2") {
      sq2 = read_rect("square2");
    } else if (key == "value1") {
      v1 = parse_double(next("value1"), path);
    } else if (key == "value2") {
      v2 = parse_double(next("value2"), path);
    } else if (key == "lipschitz") {
      lipschitz = parse_double(next("lipschitz"), path);
    } else if (key == "lower_bound") {
      lower_bound = parse_double(next("lower_bound"), path);
    } else {
      fail(errc::io_failure, path + ": unknown density key '" + key + "'");
    }
  }

  if (kind == "uniform") return make_uniform();
  if (kind == "piecewise_constant") return make_piecewise_constant(m, std::move(values));
  if (kind == "smooth_sampled")
    return make_smooth_sampled(k, std::move(values), lipschitz, lower_bound);
  if (kind == "two_delta") return make_two_delta(z1, z2);
  if (kind == "disconnected") return make_disconnected(sq1, sq2, v1, v2);
  fail(errc::io_failure, path + ": unknown density kind '" + kind + "'");
}

DensityModel resolve_density(const std::string& name_or_path) {
  const std::vector<std::string> presets = preset_names();
  if (std::find(presets.begin(), presets.end(), name_or_path) != presets.end())
    return preset_density(name_or_path);
  if (std::filesystem::exists(name_or_path)) return read_density(name_or_path);
  std::string known;
  for (const std::string& p : presets) known += (known.empty() ? "" : ", ") + p;
  fail(errc::config_invalid,
       "density: '" + name_or_path + "' is neither a preset (" + known + ") nor a file");
}

// ---------------------------------------------------------------------------
// records CSV

const char* const records_csv_header = "mode,N,trial,seed,cost,raw,corrected,walltime_ms";

void write_records_csv(const std::string& path, ExperimentMode mode,
                       const std::vector<TrialRecord>& records) {
  auto out = open_output(path);
  out << records_csv_header << "\n";
  const char* name = mode_name(mode);
  for (const TrialRecord& r : records) {
    out << name << "," << r.n << "," << r.trial << "," << r.seed << "," << format_double(r.cost)
        << ",";
    if (!std::isnan(r.raw)) out << format_double(r.raw);
    out << ",";
    if (!std::isnan(r.corrected)) out << format_double(r.corrected);
    out << ",\n"; // walltime kept blank: data files must be rerun-identical
  }
}

CsvRecords read_records_csv(const std::string& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) fail(errc::io_failure, path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != records_csv_header)
    fail(errc::io_failure, path + ": unexpected CSV header '" + line + "'");
  CsvRecords data;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    const std::string context = path + ":" + std::to_string(lineno);
    if (fields.size() != 8) fail(errc::io_failure, context + ": expected 8 CSV fields");
    TrialRecord r;
    r.n = parse_long(fields[1], context);
    r.trial = int(parse_long(fields[2], context));
    try {
      r.seed = std::stoull(fields[3]);
    } catch (const std::exception&) {
      fail(errc::io_failure, context + ": bad seed '" + fields[3] + "'");
    }
    r.cost = parse_double(fields[4], context);
    r.raw = fields[5].empty() ? kNaN : parse_double(fields[5], context);
    r.corrected = fields[6].empty() ? kNaN : parse_double(fields[6], context);
    data.modes.push_back(fields[0]);
    data.records.push_back(r);
  }
  return data;
}

// ---------------------------------------------------------------------------
// JSON artifacts

namespace {

nlohmann::ordered_json stats_to_json(const NStats& s) {
  nlohmann::ordered_json j;
  j["n"] = s.n;
  j["trials"] = s.trials;
  j["mean_cost"] = s.mean_cost;
  j["se_cost"] = s.se_cost;
  j["mean_raw"] = s.mean_raw;
  j["se_raw"] = s.se_raw;
  j["mean_corrected"] = s.mean_corrected;
  j["se_corrected"] = s.se_corrected;
  j["reference"] = s.reference;
  return j;
}

} // namespace

std::string summary_json(const ExperimentResult& result) {
  nlohmann::ordered_json j;
  j["mode"] = mode_name(result.mode);
  j["records"] = result.records.size();
  j["stats"] = nlohmann::ordered_json::array();
  for (const NStats& s : result.stats) j["stats"].push_back(stats_to_json(s));
  if (result.fit) {
    nlohmann::ordered_json f;
    f["slope"] = result.fit->slope;
    f["slope_se"] = result.fit->slope_se;
    f["intercept"] = result.fit->intercept;
    f["intercept_se"] = result.fit->intercept_se;
    f["target"] = result.fit->target;
    f["ratio"] = result.fit->ratio;
    j["fit"] = f;
  } else {
    j["fit"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string manifest_json(const ExperimentConfig& config, const std::string& subcommand,
                          const std::string& out_dir) {
  nlohmann::ordered_json j;
  j["tool"] = version_string;
  j["subcommand"] = subcommand;
  j["seed"] = config.master_seed;
  j["jobs"] = config.jobs;
  j["out"] = out_dir;
  nlohmann::ordered_json c;
  c["mode"] = mode_name(config.mode);
  c["density"] = config.density;
  c["n"] = config.n_values;
  c["trials"] = config.trials;
  c["resolution"] = config.resolution;
  c["arc_limit"] = config.arc_limit;
  j["config"] = c;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// experiment config files

ExperimentConfig read_experiment_config(const std::string& path) {
  auto in = open_input(path);
  ExperimentConfig cfg;
  cfg.n_values.clear();
  cfg.trials.clear();
  bool have_mode = false, have_density = false;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    std::vector<std::string> args;
    std::string tok;
    while (ls >> tok) args.push_back(tok);
    const std::string context = path + ":" + std::to_string(lineno);
    auto one = [&]() -> const std::string& {
      if (args.size() != 1)
        fail(errc::config_invalid, key + ": expected exactly one value (" + context + ")");
      return args[0];
    };
    if (key == "mode") {
      cfg.mode = mode_from_name(one());
      have_mode = true;
    } else if (key == "density") {
      cfg.density = one();
      have_density = true;
    } else if (key == "n") {
      if (args.empty()) fail(errc::config_invalid, "n_values: expected at least one value");
      for (const std::string& a : args) cfg.n_values.push_back(parse_long(a, context));
    } else if (key == "trials") {
      if (args.empty()) fail(errc::config_invalid, "trials: expected at least one value");
      for (const std::string& a : args) cfg.trials.push_back(int(parse_long(a, context)));
    } else if (key == "seed") {
      try {
        cfg.master_seed = std::stoull(one());
      } catch (const std::exception&) {
        fail(errc::config_invalid, "seed: expected an unsigned integer (" + context + ")");
      }
    } else if (key == "resolution") {
      cfg.resolution = int(parse_long(one(), context));
    } else if (key == "jobs") {
      cfg.jobs = int(parse_long(one(), context));
    } else if (key == "arc_limit") {
      cfg.arc_limit = parse_long(one(), context);
    } else {
      fail(errc::config_invalid, key + ": unknown config key (" + context + ")");
    }
  }
  if (!have_mode) fail(errc::config_invalid, "mode: missing from config file");
  if (cfg.n_values.empty()) fail(errc::config_invalid, "n_values: missing from config file");
  if (cfg.trials.empty()) fail(errc::config_invalid, "trials: missing from config file");
  if (have_density) cfg.model = resolve_density(cfg.density);
  return cfg;
}

// ---------------------------------------------------------------------------
// report rendering

std::string render_report(const CsvRecords& data) {
  if (data.records.empty()) fail(errc::io_failure, "no records to report on");

  // group by (mode, n), deterministic order
  std::map<std::string, std::map<long, std::vector<const TrialRecord*>>> groups;
  for (std::size_t i = 0; i < data.records.size(); ++i)
    groups[data.modes[i]][data.records[i].n].push_back(&data.records[i]);

  auto stat = [](const std::vector<const TrialRecord*>& rs, double TrialRecord::* field) {
    double sum = 0.0;
    std::size_t k = 0;
    for (const TrialRecord* r : rs) {
      if (std::isnan(r->*field)) return std::pair<double, double>{kNaN, kNaN};
      sum += r->*field;
      ++k;
    }
    const double mean = sum / double(k);
    if (k < 2) return std::pair<double, double>{mean, 0.0};
    double ss = 0.0;
    for (const TrialRecord* r : rs) ss += (r->*field - mean) * (r->*field - mean);
    return std::pair<double, double>{mean, std::sqrt(ss / double(k - 1)) / std::sqrt(double(k))};
  };
  auto cell = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%13.6g", v);
    return std::string(buf);
  };

  std::ostringstream out;
  out << "#         mode         n    trials    mean_cost       se_cost     mean_raw       se_raw"
         "    mean_corr      se_corr   cost/log_n  cost/sqrt_n\n";
  for (const auto& [mode, by_n] : groups) {
    for (const auto& [n, rs] : by_n) {
      const auto [mc, sc] = stat(rs, &TrialRecord::cost);
      const auto [mr, sr] = stat(rs, &TrialRecord::raw);
      const auto [mo, so] = stat(rs, &TrialRecord::corrected);
      char head[48];
      std::snprintf(head, sizeof(head), "%14s%10ld%10zu", mode.c_str(), n, rs.size());
      out << head << cell(mc) << cell(sc) << cell(mr) << cell(sr) << cell(mo) << cell(so)
          << cell(n > 1 ? mc / std::log(double(n)) : kNaN) << cell(mc / std::sqrt(double(n)))
          << "\n";
    }
  }
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  auto out = open_output(path);
  out << content;
}

} // namespace matchlab
