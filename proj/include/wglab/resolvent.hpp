#pragma once

#include <array>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "wglab/norms.hpp"
#include "wglab/operators.hpp"

namespace wglab {

struct SpectralPoint {
  double lambda = 0.0;
  double eps = 0.0;

  Complex z() const { return {lambda, eps}; }
  double abs() const { return std::hypot(lambda, eps); }
};

enum class SolveMethod { Auto, Direct, Condensed, Krylov };

const char* solve_method_name(SolveMethod m);

struct SolveOptions {
  SolveMethod method = SolveMethod::Auto;
  double tol = 1e-10;
  int max_iter = 20000;
  // Auto picks the direct factorization up to this many unknowns.
  Eigen::Index direct_limit = 100000;
  // Precomputed tail of the operator, shared across spectral points.
  std::shared_ptr<const struct TailStructure> tail;
};

struct SolverStats {
  int iterations = 0;
  std::string method;
};

struct ResolventSolve {
  SpectralPoint z;
  GridFunction f;
  GridFunction u;
  double residual = 0.0;  // ||(H - z) u - f|| / ||f||
  SolverStats stats;
};

// Radial layers beyond the last change of the cross-section are identical up
// to a scalar shift, so the tail decouples into cross-section modes. Each
// mode is a tridiagonal chain that is eliminated by a continued fraction onto
// the innermost tail layer; only the core is factorized.
struct TailStructure {
  int K = 0;                    // last core layer; layers K+1.. are condensed
  int layers = 0;
  std::vector<Eigen::Index> layer_start;  // cell offsets, size layers + 1
  Eigen::MatrixXd Q;            // cross-section modes of the tail block
  VecD tau;                     // their eigenvalues
  VecD shift;                   // diagonal shift of layer i w.r.t. the last layer
  VecD coupling;                // e_i between layers i and i + 1
  Eigen::Index core_size() const { return layer_start[K + 1]; }
};

// Returns false when the layout is not radial in x or the tail is too short.
bool detect_tail(const DirichletOperator& H, TailStructure& out);

// Factorization of H - z for one spectral point, reusable across sources.
class ResolventSolver {
 public:
  ResolventSolver(const DirichletOperator& H, SpectralPoint z, SolveOptions opt = {});
  ~ResolventSolver();
  ResolventSolver(const ResolventSolver&) = delete;
  ResolventSolver& operator=(const ResolventSolver&) = delete;

  ResolventSolve solve(const GridFunction& f) const;
  SolveMethod method() const { return method_; }

 private:
  struct Impl;
  const DirichletOperator& H_;
  SpectralPoint z_;
  SolveOptions opt_;
  SolveMethod method_;
  std::unique_ptr<Impl> impl_;
};

ResolventSolve solve_resolvent(const DirichletOperator& H, SpectralPoint z, const GridFunction& f,
                               const SolveOptions& opt = {});

// ||(H - z) u - f|| / ||f|| in the weighted L2 norm.
double resolvent_residual(const DirichletOperator& H, SpectralPoint z, const GridFunction& f, const GridFunction& u);

struct EnergyDefects {
  double im_defect = 0.0;  // |eps ||u||^2 + Im<f, u>|
  double re_defect = 0.0;  // |<Hu, u> - lambda ||u||^2 - Re<f, u>|
  double scale = 0.0;      // ||f|| ||u||
};

EnergyDefects energy_identity_check(const DirichletOperator& H, const ResolventSolve& s);

// |grad_x u| per cell: centered differences with one-sided closure at the
// mask boundary, plus the angular part l(l + n - 2) |u|^2 / r^2 of a sector.
GridFunction grad_x_magnitude(const GridFunction& u, int ell_x = 0);

struct SweepRecord {
  double lambda = 0.0;
  double eps = 0.0;
  int source = 0;
  double X_u = 0.0;
  double X1_u = 0.0;
  double X_grad = 0.0;
  double Xstar_f = 0.0;
  double ratio = 0.0;         // (|grad u|_X^2 + |u|_X1^2 + (|lambda| + |eps|) |u|_X^2) / |f|_X*^2
  double ratio_no_z = 0.0;    // without the |z| term
  double weighted = 0.0;      // |<x>^{-1-e} u| / |<x>^{1+e} f|
  double weighted_grad = 0.0; // |<x>^{-1/2-e} grad u| / |<x>^{1/2+e} f|
  double weighted_z = 0.0;    // |z|^{1/2} |<x>^{-1/2-e} u| / |<x>^{1/2+e} f|
  double residual = 0.0;
  double im_defect = 0.0;     // relative to ||f|| ||u||
  double re_defect = 0.0;
  int iterations = 0;
  std::string method;
  std::string error;          // nonempty when the point failed
};

SweepRecord resolvent_ratio(const DirichletOperator& H, const ResolventSolve& s, double weight_eps = 0.1);

// Smooth compactly supported source: radial bump of the given width at
// center_r (direction dir in Cartesian layouts) times a smooth y profile.
struct SourceSpec {
  double center_r = 0.0;
  double width = 1.0;
  std::array<double, 3> dir{1.0, 0.0, 0.0};
  std::array<double, 3> y_amp{1.0, 0.0, 0.0};
  std::array<double, 3> y_phase{0.0, 0.0, 0.0};

  GridFunction sample(DomainPtr d) const;
};

std::vector<SourceSpec> make_source_ensemble(int count, double support_radius, std::uint64_t seed);

struct SweepSummary {
  double max_ratio = 0.0;
  // max over lambda of sup_f ratio(eps_min) / sup_f ratio(eps_max)
  double trend = 0.0;
  double trend_lambda = 0.0;
  double source_trend = 0.0;  // same quotient taken per source, for reporting
  double max_residual = 0.0;
  double max_im_defect = 0.0;
  double max_re_defect = 0.0;
  std::size_t failures = 0;
  std::vector<SweepRecord> records;  // lambda major, then eps, then source
};

SweepSummary sweep_uniformity(const DirichletOperator& H, const std::vector<double>& lambdas,
                              const std::vector<double>& eps, const std::vector<GridFunction>& sources,
                              int jobs = 1, const SolveOptions& opt = {}, double weight_eps = 0.1);

// Largest relative change of the ratios between two sweeps over the same grid.
double sweep_sensitivity(const SweepSummary& a, const SweepSummary& b);

std::string sweep_csv_header();
std::string sweep_csv_row(const SweepRecord& r);

}  // namespace wglab
