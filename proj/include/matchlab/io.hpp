#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "matchlab/density.hpp"
#include "matchlab/experiments.hpp"
#include "matchlab/field.hpp"
#include "matchlab/transport.hpp"

namespace matchlab {

// Shortest round-trip decimal rendering (%.17g); every writer goes through
// this so identical runs produce byte-identical files.
std::string format_double(double v);

// Point cloud files: "N" header, then one "x y" line per point.
void write_point_cloud(std::ostream& out, const PointCloud& cloud);
void write_point_cloud(const std::string& path, const PointCloud& cloud);
PointCloud read_point_cloud(const std::string& path);

// Matching files: "N" header, then one 1-based "i j" line per matched pair.
void write_matching(std::ostream& out, const Assignment& a);
void write_matching(const std::string& path, const Assignment& a);

// Plan files: "n m" header, then sparse 1-based "i j flow" triples.
void write_plan(std::ostream& out, const TransportPlan& plan);
void write_plan(const std::string& path, const TransportPlan& plan);

// Grid field files: "M" header, then the (M+1)^2 vertex values row-major.
void write_grid_field(const std::string& path, const GridField& f);
GridField read_grid_field(const std::string& path);

// Density files: "density <kind>" then the kind's key/value lines
// (m/k + values row-major from the lower-left row, atoms, squares).
void write_density(const std::string& path, const DensityModel& model);
DensityModel read_density(const std::string& path);

// A preset name, or a path to a density file.
DensityModel resolve_density(const std::string& name_or_path);

// Records CSV, schema: mode,N,trial,seed,cost,raw,corrected,walltime_ms.
// NaN fields are left blank; walltime stays blank by design (timings carry
// wall-clock noise and belong in the side log, data files must be
// byte-identical across reruns).
extern const char* const records_csv_header;
void write_records_csv(const std::string& path, ExperimentMode mode,
                       const std::vector<TrialRecord>& records);

struct CsvRecords {
  std::vector<std::string> modes; // per record
  std::vector<TrialRecord> records;
};
CsvRecords read_records_csv(const std::string& path);

// Deterministic JSON artifacts for an experiment run.
std::string summary_json(const ExperimentResult& result);
std::string manifest_json(const ExperimentConfig& config, const std::string& subcommand,
                          const std::string& out_dir);

// Key/value experiment config file; keys: mode, density, n, trials, seed,
// resolution, jobs, arc_limit. '#' starts a comment.
ExperimentConfig read_experiment_config(const std::string& path);

// Aligned per-(mode, n) aggregate table; '#'-prefixed header line, plain
// numeric columns below, so the same file feeds gnuplot directly.
std::string render_report(const CsvRecords& data);

void write_text_file(const std::string& path, const std::string& content);

} // namespace matchlab
