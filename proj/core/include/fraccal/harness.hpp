#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fraccal/inversion.hpp"
#include "fraccal/model.hpp"

namespace fraccal {

/// Smooth 0-to-1 transition on [0, 1], built from exp(-1/t).
double smooth_step(double t);

struct Interval {
  double a = 0.0;
  double b = 0.0;
};

/// Exterior set geometry: a union of intervals in 1D, or the square frame
/// (-outer, outer)^2 minus [-inner, inner]^2 in 2D.
struct ExteriorSet {
  int dim = 1;
  std::vector<Interval> intervals;
  double inner = 0.0;
  double outer = 0.0;

  static ExteriorSet symmetric_1d(double inner, double outer);
  static ExteriorSet frame_2d(double inner, double outer);

  bool contains(double x, double y = 0.0) const;
  /// Smallest width of the set (interval length, or frame thickness).
  double thickness() const;
};

/// C-infinity function equal to 1 on the w-eroded set, 0 outside it.
SpatialFunction mollified_indicator(const ExteriorSet& set, double w);

enum class PresetId { Ex41, Ex42, Ex43, Ex44, Custom };

std::string to_string(PresetId id);
PresetId parse_preset(const std::string& name);

/// Example definition; grids are built per resolution.
struct ExperimentPreset {
  PresetId id = PresetId::Ex41;
  int dim = 1;
  double s = 0.4;
  double gamma = 2.0;
  double L = 1.0;
  double R = 3.0;
  int N = 256;
  int data_factor = 2;
  double smoothing = 0.2;
  double alpha_c = 1.0;
  std::optional<double> alpha;  ///< explicit alpha overriding the rule
  double stop_factor = 2.0;
  int max_outer_iter = 200;
  std::vector<double> noise_levels;
  double default_delta = 1e-5;
  int collar = 1;
  /// Gap between the domain and W1/W2; 0 selects one inversion-grid cell.
  double eps = 0.25;
  SpatialFunction q_true;
};

ExperimentPreset make_preset(PresetId id);

/// Overrides accepted from the CLI, config files and the environment.
struct ExperimentConfig {
  std::string example = "ex4.1";
  std::optional<int> N;
  std::optional<int> data_N;
  std::optional<double> gamma;
  std::optional<double> delta;
  std::optional<double> alpha;
  std::optional<double> alpha_c;
  std::uint64_t seed = 1;
  std::optional<int> max_iter;
  /// Gap between the domain and W1/W2; defaults to the preset's value.
  std::optional<double> eps;
  double rtol = 1e-10;
  bool allow_inverse_crime = false;
  std::string out_dir;
  std::string format = "csv";
  std::vector<double> deltas;  ///< sweep only

  /// Applies one key=value setting; throws std::invalid_argument on unknown
  /// keys or malformed values.
  void set(const std::string& key, const std::string& value);
};

/// Parses `key = value` lines; '#' starts a comment.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});
/// Applies PREFIX_KEY variables (e.g. FRACCAL_DELTA) from the environment.
ExperimentConfig apply_environment(ExperimentConfig cfg, const std::string& prefix = "FRACCAL_");

/// Inversion-grid spec for a preset with the given domain-to-exterior gap.
ProblemSpec build_spec(const ExperimentPreset& preset, int N, double gap);

/// Clean values plus i.i.d. Uniform(-delta, delta) noise from mt19937_64.
Observation gen_noise(const NodeSet& points, std::span<const double> clean, double delta, std::uint64_t seed);

/// Uniform on [0, 1) with 53 random bits.
double uniform53(std::uint64_t bits);

struct RunRecord {
  std::string preset;
  std::uint64_t seed = 0;
  double delta = 0.0;
  double alpha = 0.0;
  int N = 0;
  int data_N = 0;
  int dim = 1;
  double linf_error = 0.0;
  double l2_error = 0.0;
  int iterations = 0;
  std::string stop_reason;
  double E_final = 0.0;
  double stop_threshold = 0.0;
  double data_seconds = 0.0;
  double inversion_seconds = 0.0;
  std::vector<IterationRecord> trace;
  std::vector<double> noise;  ///< perturbation added to the clean data
  /// Nodal output over the inversion grid's interior: x[,y], q_true, q_rec.
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> q_true;
  std::vector<double> q_rec;
  std::vector<std::string> outputs;
  std::string error;  ///< non-empty when a stage failed

  bool operator==(const RunRecord&) const;
};

RunRecord run_experiment(const ExperimentConfig& cfg);

struct SweepRow {
  double delta = 0.0;
  double inv_log_delta = 0.0;
  double linf_error = 0.0;
  double l2_error = 0.0;
  int iterations = 0;
  std::uint64_t seed = 0;
  std::string error;
};

/// One row per delta, sorted by delta ascending; needs at least 3 levels.
/// Row failures are recorded and the sweep continues.
std::vector<SweepRow> stability_sweep(const ExperimentConfig& cfg, std::vector<RunRecord>* records = nullptr);

/// Pearson correlation coefficient.
double pearson(std::span<const double> a, std::span<const double> b);

void write_reconstruction_csv(std::ostream& os, const RunRecord& rec);
void write_trace_csv(std::ostream& os, const RunRecord& rec);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
std::string record_to_json(const RunRecord& rec, const ExperimentConfig* cfg = nullptr);
RunRecord record_from_json(const std::string& text);
std::string sweep_to_json(const std::vector<SweepRow>& rows, const ExperimentConfig* cfg = nullptr);

/// Writes the record to cfg.out_dir in cfg.format and fills rec.outputs.
void export_record(RunRecord& rec, const ExperimentConfig& cfg);
std::vector<std::string> export_sweep(const std::vector<SweepRow>& rows, const ExperimentConfig& cfg);

}  // namespace fraccal
