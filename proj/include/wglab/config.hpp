#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wglab/operators.hpp"

namespace wglab {

inline constexpr const char* kConfigSchema = "wglab-experiment/1";

enum class ExperimentKind { DomainAudit, Norms, ResolventSweep, Spectrum, Evolve, FlatDispersion, Duhamel };

const char* kind_name(ExperimentKind k);

struct SweepSettings {
  std::vector<double> lambda;      // z grid, real parts
  std::vector<double> eps;         // z grid, imaginary parts
  bool scale_by_threshold = true;  // both lists in units of lambda_1^2
  int sources = 8;
  double support_radius = 2.0;
  double weight_eps = 0.1;
  int ell_x = 0, k_y = 0;
  bool add_embedded = false;       // also sweep at localized eigenvalues of the sector above lambda_1^2
  std::string expect = "uniform";  // uniform | blowup
};

struct NormSettings {
  int fields = 200;
  std::vector<double> R{0.25, 1.0, 4.0};
  std::vector<double> s{0.5, 1.0, 3.0};
};

struct SpectrumSettings {
  double a = 0.0, b = 4.0;
  bool scale_by_threshold = true;
  int ell_x = 0, k_y = 0;
  int shifts = 20, krylov_dim = 30;
  double tol = 1e-8;
  bool dense_check = false;        // compare bound states with a dense eigensolve
  std::string expect = "any";      // any | absence | bound-state | embedded | none-below-threshold
};

struct DatumSettings {
  std::string kind = "gaussian";   // gaussian | eigenstate
  double width = 1.0;
  double center = 0.0;
  int y_mode = 1;
};

struct EvolveSettings {
  std::string flow = "schrodinger";  // schrodinger | wave
  double T = 10.0;
  double dt = 0.01;
  double mu = 0.0;
  std::vector<double> eps{0.1, 0.3};
  DatumSettings datum;
  bool strichartz = false;
  bool half_derivative = true;
  std::string wave_route = "auto";   // auto | spectral | leapfrog
  int snapshot_every = 0;
  double source_T = 1.0;             // Duhamel: source switched off after this time
  std::string expect = "dispersive"; // dispersive | trapped | none
};

struct FlatSettings {
  double t_lo = 1.0, t_hi = 30.0;
  int samples = 25;
  std::vector<double> check_times{1.0, 5.0, 10.0};
  double box_factor = 8.0;
  double width = 1.0;
  int modes = 1;
  bool compare_evolution = false;  // Crank-Nicolson against the modal solution
  double compare_t = 5.0;
  double dt = 0.01;
};

struct Tolerances {
  double max_ratio = 0.0;          // 0 means 5000 n^2
  double trend = 3.0;
  double contrast_trend = 100.0;
  double identity = 1e-9;
  double margin = 1e-10;
  double plateau = 0.1;
  double strichartz_plateau = 0.05;
  double mass_drift = 1e-10;
  double energy_drift = 1e-8;
  double slope_lo = -1.65, slope_hi = -1.35;
  double closed_form = 1e-6;
  double oracle = 0.02;
  double doubling = 0.02;
  double eig_doubling = 1e-3;
  double residual = 1e-8;
  double stationary = 1e-8;
};

struct ExperimentConfig {
  std::string schema = kConfigSchema;
  std::string name;
  ExperimentKind kind = ExperimentKind::DomainAudit;
  ProfileSpec profile;
  GridSpec grid;
  PotentialField potential;
  SweepSettings sweep;
  NormSettings norms;
  SpectrumSettings spectrum;
  EvolveSettings evolve;
  FlatSettings flat;
  Tolerances tol;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool extent_doubling = false;
  std::string out;                 // not part of the echo
};

struct ConfigIssue {
  std::string path;
  std::string message;
};

struct ConfigParse {
  ExperimentConfig config;
  std::vector<ConfigIssue> issues;
  bool ok() const { return issues.empty(); }
};

ConfigParse parse_config(const std::string& json_text);
ConfigParse load_config(const std::string& path);

// Range and cross-field checks on an already parsed config.
std::vector<ConfigIssue> check_config(const ExperimentConfig& c);

// Full config with every default written out, keys sorted; `out` is omitted.
std::string config_to_json(const ExperimentConfig& c);
std::string config_hash(const ExperimentConfig& c);

// Throws ConfigInvalid naming the first issue's field path.
void require_valid(const ConfigParse& p);

}  // namespace wglab
