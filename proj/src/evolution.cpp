#include "wglab/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "wglab/norms.hpp"
#include "wglab/resolvent.hpp"

namespace wglab {

namespace {

constexpr Complex kI{0.0, 1.0};

int steps_for(double T, double dt) {
  if (!(dt > 0.0) || !(T >= 0.0)) fail(ErrorCode::InvalidArgument, "need dt > 0 and T >= 0");
  const double k = T / dt;
  const int steps = static_cast<int>(std::llround(k));
  if (std::abs(k - steps) > 1e-9 * std::max(1.0, k))
    fail(ErrorCode::InvalidArgument, fmt::format("T = {} is not a multiple of dt = {}", T, dt));
  return steps;
}

SpMatC shifted_identity(const SpMatD& S, Complex alpha, Complex beta) {
  // alpha I + beta S
  std::vector<Eigen::Triplet<Complex>> trips;
  trips.reserve(static_cast<std::size_t>(S.nonZeros() + S.rows()));
  for (Eigen::Index r = 0; r < S.outerSize(); ++r) {
    trips.emplace_back(static_cast<int>(r), static_cast<int>(r), alpha);
    for (SpMatD::InnerIterator it(S, r); it; ++it)
      trips.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), beta * it.value());
  }
  SpMatC A(static_cast<int>(S.rows()), static_cast<int>(S.cols()));
  A.setFromTriplets(trips.begin(), trips.end());
  A.makeCompressed();
  return A;
}

// One Crank-Nicolson step in symmetric coordinates.
class CrankNicolson {
 public:
  CrankNicolson(const SpMatD& S, double dt, double tol)
      : A_(shifted_identity(S, 1.0, -0.5 * dt * kI)), B_(shifted_identity(S, 1.0, 0.5 * dt * kI)), tol_(tol) {
    lu_.analyzePattern(A_);
    lu_.factorize(A_);
    if (lu_.info() != Eigen::Success) fail(ErrorCode::SolverBreakdown, "Crank-Nicolson factorization failed");
  }

  VecC rhs(const VecC& w) const { return B_ * w; }

  VecC solve(const VecC& b) const {
    VecC x = lu_.solve(b);
    const double bn = std::max(b.norm(), std::numeric_limits<double>::min());
    for (int refine = 0;; ++refine) {
      VecC r = b - A_ * x;
      double res = r.norm() / bn;
      if (res <= tol_) break;
      if (refine == 3) fail(ErrorCode::SolverBreakdown, fmt::format("Crank-Nicolson solve residual {:.3g}", res));
      x += lu_.solve(r);
    }
    return x;
  }

 private:
  SpMatC A_, B_;
  Eigen::SparseLU<SpMatC, Eigen::COLAMDOrdering<int>> lu_;
  double tol_;
};

// Fields shared by all exponents at one time.
struct TraceFields {
  GridFunction half;
  GridFunction grad;
  double st2 = 0.0;
  bool has_half = false, has_grad = false, has_st = false;
};

double strichartz_exponent(int n) {
  if (n < 3) fail(ErrorCode::InvalidArgument, "the endpoint exponent needs n >= 3");
  return 2.0 * n / (n - 2.0);
}

TraceFields trace_fields(const GridFunction& u, int ell_x, const TraceOptions& opt) {
  TraceFields tf;
  if (opt.half_derivative) {
    if (ell_x != 0) fail(ErrorCode::Unsupported, "half derivative traces need the l = 0 sector");
    tf.half = half_derivative_x(u);
    tf.has_half = true;
  }
  if (opt.gradient) {
    tf.grad = grad_x_magnitude(u, ell_x);
    tf.has_grad = true;
  }
  if (opt.strichartz) {
    double m = mixed_norm(u, strichartz_exponent(u.domain->spec().n));
    tf.st2 = m * m;
    tf.has_st = true;
  }
  return tf;
}

void push_sample(const GridFunction& u, const TraceFields& tf, double eps, double t, TraceSeries& s) {
  auto sq = [](double v) { return v * v; };
  s.t.push_back(t);
  s.w1.push_back(sq(weighted_norm_fixed(u, 1.0 + eps)));
  s.wh.push_back(sq(weighted_norm_fixed(u, 0.5 + eps)));
  s.w2.push_back(tf.has_half ? sq(weighted_norm_fixed(tf.half, 0.5 + eps)) : 0.0);
  s.w3.push_back(tf.has_grad ? sq(weighted_norm_fixed(tf.grad, 0.5 + eps)) : 0.0);
  s.st2.push_back(tf.has_st ? tf.st2 : 0.0);
}

// Bookkeeping shared by the time steppers.
class Recorder {
 public:
  Recorder(Trajectory& traj, const DirichletOperator& H, const EvolveOptions& opt) : traj_(traj), H_(H), opt_(opt) {
    for (double e : opt.trace.eps) {
      if (!(e > 0.0)) fail(ErrorCode::InvalidArgument, "trace exponents must be positive");
      TraceSeries s;
      s.eps = e;
      traj_.traces.push_back(s);
    }
  }

  void record(int k, const VecC& w) {
    const double t = k * traj_.dt;
    traj_.mass.push_back(w.norm());
    const bool snap = k == 0 || k == traj_.steps || (opt_.snapshot_every > 0 && k % opt_.snapshot_every == 0);
    const bool need_u = snap || !traj_.traces.empty() || opt_.observer;
    if (!need_u) return;
    GridFunction u = from_symmetric(H_.domain, w);
    if (!traj_.traces.empty()) {
      TraceFields tf = trace_fields(u, H_.ell_x, opt_.trace);
      for (auto& s : traj_.traces) push_sample(u, tf, s.eps, t, s);
    }
    if (opt_.observer) opt_.observer(k, t, u);
    if (snap) {
      traj_.times.push_back(t);
      traj_.snapshots.push_back(std::move(u));
    }
  }

 private:
  Trajectory& traj_;
  const DirichletOperator& H_;
  const EvolveOptions& opt_;
};

void check_field(const DirichletOperator& H, const GridFunction& f) {
  if (f.domain != H.domain || static_cast<Eigen::Index>(f.size()) != H.dim())
    fail(ErrorCode::InvalidArgument, "field and operator live on different domains");
}

VecC physical_to_symmetric(const DirichletOperator& H, const VecC& u) {
  return H.sqrt_weight.cast<Complex>().cwiseProduct(u);
}

// Real Lanczos: returns |b| Q fn(T) e_1.
VecD lanczos_real(const SpMatD& A, const VecD& b, const std::function<double(double)>& fn, double tol, int max_steps) {
  const Eigen::Index N = A.rows();
  const double bn = b.norm();
  if (bn == 0.0) return VecD::Zero(N);
  max_steps = static_cast<int>(std::min<Eigen::Index>(max_steps, N));
  Eigen::MatrixXd Q(N, max_steps);
  std::vector<double> alpha, beta;
  VecD q = b / bn;
  VecD prev;
  auto evaluate = [&](int m) {
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
      T(j, j) = alpha[j];
      if (j + 1 < m) T(j, j + 1) = T(j + 1, j) = beta[j];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    VecD fe(m);
    for (int j = 0; j < m; ++j) fe[j] = fn(es.eigenvalues()[j]) * es.eigenvectors()(0, j);
    VecD coef = es.eigenvectors() * fe;
    return VecD(bn * (Q.leftCols(m) * coef));
  };
  for (int j = 0; j < max_steps; ++j) {
    Q.col(j) = q;
    VecD w = A * q;
    alpha.push_back(q.dot(w));
    for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
    const double bj = w.norm();
    beta.push_back(bj);
    const int m = j + 1;
    const bool invariant = bj < 1e-14 * std::max(1.0, std::abs(alpha[j]));
    if (invariant || m == max_steps || m % 10 == 0) {
      VecD y = evaluate(m);
      if (invariant || m == N) return y;
      if (prev.size() && (y - prev).norm() <= tol * y.norm()) return y;
      if (m == max_steps) {
        double change = prev.size() ? (y - prev).norm() / y.norm() : 1.0;
        fail(ErrorCode::SolverBreakdown, fmt::format("Lanczos matrix function stalled at change {:.3g}", change));
      }
      prev = std::move(y);
    }
    q = w / bj;
  }
  return prev;
}

double max_eigenvalue(const SpMatD& A) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  VecD v(A.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = nd(rng);
  VecD ritz = lanczos_ritz(A, v, 60);
  return ritz.maxCoeff();
}

}  // namespace

double Trajectory::mass_drift() const {
  if (mass.empty() || mass.front() == 0.0) return 0.0;
  double d = 0.0;
  for (double m : mass) d = std::max(d, std::abs(m - mass.front()));
  return d / mass.front();
}

double Trajectory::energy_drift() const {
  if (energy.empty() || energy.front() == 0.0) return 0.0;
  double d = 0.0;
  for (double e : energy) d = std::max(d, std::abs(e - energy.front()));
  return d / std::abs(energy.front());
}

const TraceSeries& Trajectory::trace(double eps) const {
  for (const auto& s : traces)
    if (std::abs(s.eps - eps) <= 1e-12 * std::max(1.0, eps)) return s;
  fail(ErrorCode::MissingArtifact, fmt::format("no trace recorded at eps = {}", eps));
}

Trajectory evolve_schrodinger(const DirichletOperator& H, const GridFunction& f, double T, double dt,
                              const EvolveOptions& opt) {
  check_field(H, f);
  Trajectory traj;
  traj.scheme = "crank-nicolson";
  traj.dt = dt;
  traj.steps = steps_for(T, dt);
  traj.ell_x = H.ell_x;
  Recorder rec(traj, H, opt);
  CrankNicolson cn(H.S, dt, opt.solve_tol);
  VecC w = physical_to_symmetric(H, f.values);
  rec.record(0, w);
  for (int k = 1; k <= traj.steps; ++k) {
    w = cn.solve(cn.rhs(w));
    rec.record(k, w);
  }
  return traj;
}

Trajectory duhamel_evolve(const DirichletOperator& H, const SourceFn& F, double T, double dt,
                          const EvolveOptions& opt) {
  Trajectory traj;
  traj.scheme = "crank-nicolson-duhamel";
  traj.dt = dt;
  traj.steps = steps_for(T, dt);
  traj.ell_x = H.ell_x;
  Recorder rec(traj, H, opt);
  CrankNicolson cn(H.S, dt, opt.solve_tol);
  VecC w = VecC::Zero(H.dim());
  rec.record(0, w);
  for (int k = 0; k < traj.steps; ++k) {
    GridFunction Fk = F((k + 0.5) * dt);
    check_field(H, Fk);
    for (auto& s : traj.traces) {
      double v = weighted_norm_fixed(Fk, -(1.0 + s.eps));
      s.src.push_back(v * v);
    }
    VecC b = cn.rhs(w) + dt * physical_to_symmetric(H, Fk.values);
    w = cn.solve(b);
    rec.record(k + 1, w);
  }
  return traj;
}

VecC lanczos_function(const SpMatD& A, const VecC& b, const std::function<double(double)>& fn, double tol,
                      int max_steps) {
  VecD re = lanczos_real(A, b.real(), fn, tol, max_steps);
  VecD im = lanczos_real(A, b.imag(), fn, tol, max_steps);
  VecC out(b.size());
  out.real() = re;
  out.imag() = im;
  return out;
}

Trajectory evolve_wave(const DirichletOperator& H, double mu, const GridFunction& f, double T, double dt,
                       const EvolveOptions& opt, const WaveOptions& wopt) {
  check_field(H, f);
  if (!(mu >= 0.0)) fail(ErrorCode::InvalidArgument, "mu must be nonnegative");
  Trajectory traj;
  traj.dt = dt;
  traj.steps = steps_for(T, dt);
  traj.ell_x = H.ell_x;
  const double mu2 = mu * mu;
  const Eigen::Index N = H.dim();
  WaveRoute route = wopt.route;
  if (route == WaveRoute::Auto) route = N <= wopt.dense_limit ? WaveRoute::Spectral : WaveRoute::Leapfrog;
  Recorder rec(traj, H, opt);
  const VecC w0 = physical_to_symmetric(H, f.values);
  const SpMatD& S = H.S;
  auto quad_energy = [&](const VecC& w) {
    VecC Sw = S * w;
    return 2.0 * (w.dot(Sw).real() + mu2 * w.squaredNorm());
  };

  if (route == WaveRoute::Spectral) {
    traj.scheme = "wave-spectral";
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(Eigen::SparseMatrix<double>(S))};
    if (es.info() != Eigen::Success) fail(ErrorCode::EigenbasisIncomplete, "dense eigensolve failed");
    Eigen::Index keep = N;
    if (wopt.max_energy > 0.0) {
      keep = 0;
      while (keep < N && es.eigenvalues()[keep] <= wopt.max_energy) ++keep;
    }
    const Eigen::MatrixXd V = es.eigenvectors().leftCols(keep);
    VecC c(keep);
    c.real() = V.transpose() * w0.real();
    c.imag() = V.transpose() * w0.imag();
    const double f2 = w0.squaredNorm();
    const double tail = f2 > 0 ? std::max(0.0, 1.0 - c.squaredNorm() / f2) : 0.0;
    if (tail > wopt.tail_tol)
      fail(ErrorCode::EigenbasisIncomplete, fmt::format("discarded mass {:.3g} above {:.3g}", tail, wopt.tail_tol));
    VecD omega(keep);
    for (Eigen::Index j = 0; j < keep; ++j) {
      double e = es.eigenvalues()[j] + mu2;
      if (e < 0.0) fail(ErrorCode::InvalidArgument, "H + mu^2 has a negative eigenvalue");
      omega[j] = std::sqrt(e);
    }
    for (int k = 0; k <= traj.steps; ++k) {
      const double t = k * dt;
      VecC ck(keep);
      for (Eigen::Index j = 0; j < keep; ++j) ck[j] = std::polar(1.0, omega[j] * t) * c[j];
      VecC w(N);
      w.real() = V * ck.real();
      w.imag() = V * ck.imag();
      traj.energy.push_back(quad_energy(w));
      rec.record(k, w);
    }
    return traj;
  }

  traj.scheme = "wave-leapfrog";
  SpMatD A = S;
  for (Eigen::Index i = 0; i < N; ++i) A.coeffRef(i, i) += mu2;
  const double lmax = 1.02 * max_eigenvalue(A);
  if (dt * dt * lmax >= 4.0)
    fail(ErrorCode::InvalidArgument, fmt::format("leapfrog unstable: dt = {} exceeds {:.4g}", dt, 2.0 / std::sqrt(lmax)));
  const VecC v0 = kI * lanczos_function(A, w0, [](double x) { return std::sqrt(std::max(x, 0.0)); });
  VecC cur = w0;
  VecC next = w0 + dt * v0 - 0.5 * dt * dt * VecC(A * w0);
  for (int k = 0; k <= traj.steps; ++k) {
    VecC Anext = A * next;
    VecC d = (next - cur) / dt;
    traj.energy.push_back(d.squaredNorm() + Anext.dot(cur).real());
    rec.record(k, cur);
    if (k == traj.steps) break;
    VecC after = 2.0 * next - cur - dt * dt * Anext;
    cur = std::move(next);
    next = std::move(after);
  }
  return traj;
}

double mixed_norm(const WaveguideDomain& d, const std::vector<double>& values, double p_x) {
  if (values.size() != d.size()) fail(ErrorCode::InvalidArgument, "values do not match the domain");
  if (!(p_x >= 1.0)) fail(ErrorCode::InvalidArgument, "mixed norm exponent must be >= 1");
  const std::size_t ny = static_cast<std::size_t>(d.layout().y_block());
  std::vector<std::vector<double>> slice(ny);
  std::vector<double> yw(ny, 0.0);
  for (std::size_t c = 0; c < d.size(); ++c) {
    const double xw = d.x_weight(c);
    const auto j = static_cast<std::size_t>(d.y_index(c));
    slice[j].push_back(xw * std::pow(std::abs(values[c]), p_x));
    yw[j] = d.weight(c) / xw;
  }
  std::vector<double> terms;
  for (std::size_t j = 0; j < ny; ++j) {
    if (slice[j].empty()) continue;
    terms.push_back(yw[j] * std::pow(pairwise_sum(slice[j]), 2.0 / p_x));
  }
  return std::sqrt(pairwise_sum(terms));
}

double mixed_norm(const GridFunction& u, double p_x) {
  std::vector<double> a(u.size());
  for (std::size_t c = 0; c < a.size(); ++c) a[c] = std::abs(u.values[static_cast<Eigen::Index>(c)]);
  return mixed_norm(*u.domain, a, p_x);
}

void trace_sample(const GridFunction& u, int ell_x, double eps, const TraceOptions& opt, TraceSeries& out) {
  out.eps = eps;
  push_sample(u, trace_fields(u, ell_x, opt), eps, out.t.empty() ? 0.0 : out.t.back(), out);
}

double trapezoid(const std::vector<double>& t, const std::vector<double>& w, std::size_t k0, std::size_t k1) {
  if (k1 >= t.size() || k1 >= w.size() || k0 > k1) fail(ErrorCode::InvalidArgument, "trapezoid range out of bounds");
  std::vector<double> parts;
  parts.reserve(k1 - k0);
  for (std::size_t k = k0; k < k1; ++k) parts.push_back(0.5 * (t[k + 1] - t[k]) * (w[k] + w[k + 1]));
  double s = 0.0;
  for (double p : parts) s += p;
  return s;
}

std::size_t EvolutionTrace::index(double t) const {
  if (T.empty()) fail(ErrorCode::MissingArtifact, "empty trace");
  auto it = std::lower_bound(T.begin(), T.end(), t - 1e-12 * std::max(1.0, std::abs(t)));
  if (it == T.end()) return T.size() - 1;
  return static_cast<std::size_t>(it - T.begin());
}

EvolutionTrace smoothing_trace(const Trajectory& traj, double eps) {
  if (!(eps > 0.0)) fail(ErrorCode::InvalidArgument, "eps must be positive");
  const TraceSeries& s = traj.trace(eps);
  EvolutionTrace tr;
  tr.eps = eps;
  tr.T = s.t;
  auto cumulative = [&](const std::vector<double>& w, std::vector<double>& out) {
    out.assign(s.t.size(), 0.0);
    // Running sums in step order: S(t_{k+1}) = S(t_k) + trapezoid(k, k+1).
    for (std::size_t k = 0; k + 1 < s.t.size(); ++k)
      out[k + 1] = out[k] + 0.5 * (s.t[k + 1] - s.t[k]) * (w[k] + w[k + 1]);
  };
  cumulative(s.w1, tr.S1);
  cumulative(s.wh, tr.Sh);
  cumulative(s.w2, tr.S2);
  cumulative(s.w3, tr.S3);
  cumulative(s.st2, tr.St2);
  tr.Src.assign(s.t.size(), 0.0);
  for (std::size_t k = 0; k < s.src.size() && k + 1 < s.t.size(); ++k)
    tr.Src[k + 1] = tr.Src[k] + (s.t[k + 1] - s.t[k]) * s.src[k];
  const GridFunction& f = traj.initial();
  tr.f_norm2 = l2_norm_sq(f);
  if (traj.ell_x == 0) {
    try {
      double hn = l2_norm(half_derivative_x(f));
      tr.f_half2 = hn * hn;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Unsupported) throw;
    }
  }
  return tr;
}

StrichartzResult strichartz_norm(const Trajectory& traj, const PotentialField& V, double eps, double T) {
  const GridFunction& f = traj.initial();
  const WaveguideDomain& d = *f.domain;
  if (!audit_flat_tail(d).holds) fail(ErrorCode::NoFlatTail, "Strichartz measurement needs a flat tail");
  const TraceSeries* series = nullptr;
  for (const auto& s : traj.traces)
    if (!s.st2.empty()) series = &s;
  if (!series) fail(ErrorCode::MissingArtifact, "trajectory carries no Strichartz samples");
  StrichartzResult res;
  res.T = T < 0.0 ? traj.final_time() : T;
  std::size_t k1 = 0;
  while (k1 + 1 < series->t.size() && series->t[k1] < res.T - 1e-12 * std::max(1.0, res.T)) ++k1;
  res.T = series->t[k1];
  res.St = std::sqrt(k1 > 0 ? trapezoid(series->t, series->st2, 0, k1) : 0.0);
  std::vector<double> vw(d.size());
  for (std::size_t c = 0; c < d.size(); ++c) vw[c] = std::pow(bracket(d.radius(c)), 1.0 + eps) * std::abs(V.at_cell(d, c));
  res.v_factor = mixed_norm(d, vw, d.spec().n);
  res.data_norm = l2_norm(f);
  if (traj.ell_x != 0) fail(ErrorCode::Unsupported, "Strichartz data norm needs the l = 0 sector");
  res.data_norm += l2_norm(half_derivative_x(f));
  res.ratio = res.data_norm > 0 ? res.St / ((1.0 + res.v_factor) * res.data_norm) : 0.0;
  return res;
}

double duhamel_ratio(const Trajectory& traj, double eps, double T) {
  EvolutionTrace tr = smoothing_trace(traj, eps);
  std::size_t k = tr.index(T < 0.0 ? traj.final_time() : T);
  return tr.Src[k] > 0 ? std::sqrt(tr.S1[k] / tr.Src[k]) : 0.0;
}

ModalReference flat_reference_propagator(const ModeBasis& modes, const GridFunction& f, double t, double box_factor) {
  const WaveguideDomain& d = *f.domain;
  if (d.profile().variant != ProfileSpec::Variant::FlatProduct)
    fail(ErrorCode::InvalidArgument, "the modal reference needs a flat product domain");
  std::map<std::int64_t, Eigen::Index> row;
  for (std::size_t i = 0; i < modes.y_index.size(); ++i) row[modes.y_index[i]] = static_cast<Eigen::Index>(i);
  const Eigen::Index ncs = static_cast<Eigen::Index>(modes.y_index.size());
  const Eigen::Index J = modes.modes.cols();

  // Cells of one x column are contiguous (x is the slowest layout index).
  std::vector<std::pair<std::size_t, std::size_t>> columns;
  for (std::size_t c = 0; c < d.size();) {
    std::size_t e = c;
    while (e < d.size() && d.x_column(e) == d.x_column(c)) ++e;
    if (static_cast<Eigen::Index>(e - c) != ncs) fail(ErrorCode::ModeMismatch, "column does not match the cross-section");
    columns.emplace_back(c, e);
    c = e;
  }
  auto gather = [&](const GridFunction& u, std::size_t c0, std::size_t c1) {
    VecC v = VecC::Zero(ncs);
    for (std::size_t c = c0; c < c1; ++c) {
      auto it = row.find(d.y_index(c));
      if (it == row.end()) fail(ErrorCode::ModeMismatch, "cell outside the cross-section of the modes");
      v[it->second] = u.values[static_cast<Eigen::Index>(c)];
    }
    return v;
  };
  const Eigen::MatrixXcd Phi = modes.modes.cast<Complex>();
  const VecC q = modes.quad.cast<Complex>();

  ModalReference ref;
  // Mass of f outside the span of the modes.
  std::vector<double> outside;
  for (auto [c0, c1] : columns) {
    VecC v = gather(f, c0, c1);
    VecC coef = Phi.adjoint() * q.cwiseProduct(v);
    VecC resid = v - Phi * coef;
    double xw = d.x_weight(c0);
    for (Eigen::Index i = 0; i < ncs; ++i) outside.push_back(xw * modes.quad[i] * std::norm(resid[i]));
  }
  const double f2 = l2_norm_sq(f);
  ref.tail_mass = f2 > 0 ? pairwise_sum(outside) / f2 : 0.0;
  if (ref.tail_mass > 1e-8)
    fail(ErrorCode::EigenbasisIncomplete, fmt::format("data has relative mass {:.3g} outside the modes", ref.tail_mass));

  XMultiplierResult xm = x_multiplier(f, [t](double xi) { return std::polar(1.0, t * xi * xi); }, box_factor);
  ref.outer_fraction = xm.outer_fraction;
  if (xm.outer_fraction > 1e-6)
    fail(ErrorCode::BoxTooSmall, fmt::format("box edge carries relative mass {:.3g}", xm.outer_fraction));
  VecC phase(J);
  for (Eigen::Index j = 0; j < J; ++j) phase[j] = std::polar(1.0, t * modes.values[j]);
  ref.u = GridFunction(f.domain);
  for (auto [c0, c1] : columns) {
    VecC v = gather(xm.u, c0, c1);
    VecC coef = Phi.adjoint() * q.cwiseProduct(v);
    VecC out = Phi * phase.cwiseProduct(coef);
    for (std::size_t c = c0; c < c1; ++c) ref.u.values[static_cast<Eigen::Index>(c)] = out[row[d.y_index(c)]];
  }
  return ref;
}

DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& y, double t_lo, double t_hi) {
  if (t.size() != y.size()) fail(ErrorCode::InvalidArgument, "time and value series differ in length");
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t_lo * (1 - 1e-12) || t[k] > t_hi * (1 + 1e-12) || !(y[k] > 0.0)) continue;
    lx.push_back(std::log(t[k]));
    ly.push_back(std::log(y[k]));
  }
  if (lx.size() < 2) fail(ErrorCode::InvalidArgument, "fewer than two samples in the fit range");
  const double n = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    mx += lx[k];
    my += ly[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
  }
  DecayFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) ss += std::pow(ly[k] - fit.intercept - fit.slope * lx[k], 2);
  fit.residual = std::sqrt(ss / n);
  fit.t_lo = t_lo;
  fit.t_hi = t_hi;
  fit.samples = static_cast<int>(lx.size());
  return fit;
}

double sup_norm(const GridFunction& u) { return u.values.size() ? u.values.cwiseAbs().maxCoeff() : 0.0; }

double quarter_reference_order(double e_dt, double e_half) {
  if (!(e_half > 0.0) || !(e_dt > e_half)) return std::numeric_limits<double>::quiet_NaN();
  return std::log2(e_dt / e_half - 1.0);
}

std::string trace_csv_header() { return "t,S1,Sh,S2,S3,St,mass,energy"; }

std::string trace_csv_rows(const Trajectory& traj, double eps) {
  EvolutionTrace tr = smoothing_trace(traj, eps);
  std::string out;
  for (std::size_t k = 0; k < tr.T.size(); ++k) {
    std::string energy = k < traj.energy.size() ? fmt::format("{:.17g}", traj.energy[k]) : "";
    double mass = k < traj.mass.size() ? traj.mass[k] : 0.0;
    out += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", tr.T[k], tr.S1[k], tr.Sh[k],
                       tr.S2[k], tr.S3[k], tr.St(k), mass, energy);
  }
  return out;
}

}  // namespace wglab
