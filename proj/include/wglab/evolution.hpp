#pragma once

#include <functional>
#include <string>
#include <vector>

#include "wglab/fourier.hpp"
#include "wglab/operators.hpp"
#include "wglab/spectral.hpp"

namespace wglab {

// Per-step integrands of the smoothing and Strichartz accumulators.
struct TraceSeries {
  double eps = 0.1;
  std::vector<double> t;
  std::vector<double> w1;    // |<x>^{-1-eps} u|^2
  std::vector<double> wh;    // |<x>^{-1/2-eps} u|^2 (wave-flow weight)
  std::vector<double> w2;    // |<x>^{-1/2-eps} |D_x|^{1/2} u|^2
  std::vector<double> w3;    // |<x>^{-1/2-eps} grad_x u|^2
  std::vector<double> st2;   // |u|^2 in L^2_y L^{2n/(n-2)}_x
  std::vector<double> src;   // |<x>^{1+eps} F|^2 at the step midpoints (Duhamel only)
};

struct TraceOptions {
  std::vector<double> eps;   // one series per exponent; empty disables tracing
  bool half_derivative = true;
  bool gradient = true;
  bool strichartz = true;
};

using StepObserver = std::function<void(int step, double t, const GridFunction& u)>;

struct EvolveOptions {
  int snapshot_every = 0;    // 0 keeps only the first and last state
  double solve_tol = 1e-12;  // residual bound of each linear solve
  TraceOptions trace;
  StepObserver observer;
};

struct Trajectory {
  std::string scheme;
  double dt = 0.0;
  int steps = 0;
  int ell_x = 0;
  std::vector<double> times;            // of the snapshots
  std::vector<GridFunction> snapshots;
  std::vector<double> mass;             // |u(t_k)| for every step
  std::vector<double> energy;           // wave flows only
  std::vector<TraceSeries> traces;

  double final_time() const { return dt * steps; }
  const GridFunction& initial() const { return snapshots.front(); }
  const GridFunction& final_state() const { return snapshots.back(); }
  double mass_drift() const;    // max_k | |u_k| - |u_0| | / |u_0|
  double energy_drift() const;  // max_k |E_k - E_0| / |E_0|
  const TraceSeries& trace(double eps) const;
};

// Crank-Nicolson for u_t = i H u, u(0) = f, i.e. u(t) = e^{itH} f.
Trajectory evolve_schrodinger(const DirichletOperator& H, const GridFunction& f, double T, double dt,
                              const EvolveOptions& opt = {});

using SourceFn = std::function<GridFunction(double s)>;

// u(t) = int_0^t e^{i(t-s)H} F(s) ds by Crank-Nicolson with the source
// sampled at step midpoints.
Trajectory duhamel_evolve(const DirichletOperator& H, const SourceFn& F, double T, double dt,
                          const EvolveOptions& opt = {});

enum class WaveRoute { Auto, Spectral, Leapfrog };

struct WaveOptions {
  WaveRoute route = WaveRoute::Auto;
  Eigen::Index dense_limit = 3000;   // Auto uses the eigenbasis up to this size
  double max_energy = 0.0;           // spectral route: keep E_j <= max_energy (0 keeps all)
  double tail_tol = 1e-8;            // spectral route: admissible discarded mass
};

// u(t) = e^{it sqrt(H + mu^2)} f. The leapfrog route solves u_tt + (H + mu^2) u = 0
// with u(0) = f, u_t(0) = i sqrt(H + mu^2) f.
Trajectory evolve_wave(const DirichletOperator& H, double mu, const GridFunction& f, double T, double dt,
                       const EvolveOptions& opt = {}, const WaveOptions& wopt = {});

// y(b) ~ fn(A) b for symmetric A by Lanczos with full reorthogonalization.
VecC lanczos_function(const SpMatD& A, const VecC& b, const std::function<double(double)>& fn,
                      double tol = 1e-13, int max_steps = 400);

// |u| in L^{p_x}_x per y slice, then L^2_y.
double mixed_norm(const GridFunction& u, double p_x);
// Per-cell field evaluated into the same norm (used for potentials).
double mixed_norm(const WaveguideDomain& d, const std::vector<double>& values, double p_x);

// Integrands at one time.
void trace_sample(const GridFunction& u, int ell_x, double eps, const TraceOptions& opt, TraceSeries& out);

struct EvolutionTrace {
  double eps = 0.1;
  std::vector<double> T;
  std::vector<double> S1, Sh, S2, S3, St2, Src;  // cumulative trapezoid sums
  double f_norm2 = 0.0;       // |f|^2
  double f_half2 = 0.0;       // ||D_x|^{1/2} f|^2 (when available)

  double St(std::size_t k) const { return std::sqrt(St2[k]); }
  // Index of the sample at time T (nearest).
  std::size_t index(double t) const;
};

// Trapezoid sum of one integrand over samples k0..k1.
double trapezoid(const std::vector<double>& t, const std::vector<double>& w, std::size_t k0, std::size_t k1);

EvolutionTrace smoothing_trace(const Trajectory& traj, double eps = 0.1);

struct StrichartzResult {
  double T = 0.0;
  double St = 0.0;
  double v_factor = 0.0;    // |<x>^{1+eps} V| in L^2_y L^n_x
  double data_norm = 0.0;   // |f| + ||D_x|^{1/2} f|
  double ratio = 0.0;
};

// NoFlatTail unless the domain is a product outside a ball.
StrichartzResult strichartz_norm(const Trajectory& traj, const PotentialField& V = PotentialField::zero(),
                                 double eps = 0.1, double T = -1.0);

// sqrt(S1(T)) / sqrt(sum dt |<x>^{1+eps} F|^2) for a Duhamel trajectory.
double duhamel_ratio(const Trajectory& traj, double eps = 0.1, double T = -1.0);

struct ModalReference {
  GridFunction u;
  double outer_fraction = 0.0;
  double tail_mass = 0.0;   // relative mass of f outside the modes
};

// Modal solution on a flat product: the free x propagator e^{it|xi|^2}
// applied on a periodic box, times e^{i t lambda_j^2} on each cross-section
// mode. EigenbasisIncomplete when f has mass outside the modes, BoxTooSmall
// when the box boundary carries mass above 1e-6.
ModalReference flat_reference_propagator(const ModeBasis& modes, const GridFunction& f, double t,
                                         double box_factor = 4.0);

struct DecayFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;   // rms of the log residuals
  double t_lo = 0.0, t_hi = 0.0;
  int samples = 0;
};

// Least squares fit of log y against log t over t in [t_lo, t_hi].
DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& y, double t_lo = 1.0, double t_hi = 30.0);

double sup_norm(const GridFunction& u);

// Observed order p from errors of steps dt and dt/2 against a dt/4 solution:
// e(dt) / e(dt/2) = 1 + 2^p under e ~ C dt^p.
double quarter_reference_order(double e_dt, double e_half);

std::string trace_csv_header();
std::string trace_csv_rows(const Trajectory& traj, double eps = 0.1);

}  // namespace wglab
