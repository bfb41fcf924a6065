#include "wglab/resolvent.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <fmt/format.h>

namespace wglab {

const char* solve_method_name(SolveMethod m) {
  switch (m) {
    case SolveMethod::Auto: return "auto";
    case SolveMethod::Direct: return "direct";
    case SolveMethod::Condensed: return "condensed";
    case SolveMethod::Krylov: return "cocg";
  }
  return "?";
}

namespace {

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); }

double sum_abs2(const VecC& v) {
  std::vector<double> t(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) t[i] = std::norm(v[i]);
  return pairwise_sum(t);
}

Complex dot_conj(const VecC& a, const VecC& b) {  // sum a conj(b)
  std::vector<Complex> t(static_cast<std::size_t>(a.size()));
  for (Eigen::Index i = 0; i < a.size(); ++i) t[i] = a[i] * std::conj(b[i]);
  return pairwise_sum(std::span<const Complex>(t));
}

}  // namespace

bool detect_tail(const DirichletOperator& H, TailStructure& out) {
  const WaveguideDomain& d = *H.domain;
  const GridLayout& lay = d.layout();
  if (!lay.radial_x()) return false;
  const int layers = lay.dims()[0];
  const SpMatD& S = H.S;

  std::vector<Eigen::Index> start(layers + 1, 0);
  for (std::size_t c = 0; c < d.size(); ++c) start[d.x_column(c) + 1]++;
  for (int i = 0; i < layers; ++i) start[i + 1] += start[i];

  const int last = layers - 1;
  const Eigen::Index ny = start[last + 1] - start[last];
  if (ny == 0) return false;

  // Layer i matches the last layer: same y cells, same in-layer couplings,
  // a uniform diagonal shift, and a uniform diagonal coupling to layer i + 1.
  auto same_layer = [&](int i) {
    if (start[i + 1] - start[i] != ny) return false;
    const double shift = S.coeff(start[i], start[i]) - S.coeff(start[last], start[last]);
    for (Eigen::Index k = 0; k < ny; ++k) {
      const Eigen::Index c = start[i] + k, cl = start[last] + k;
      if (d.y_index(c) != d.y_index(cl)) return false;
      if (std::abs(S.coeff(c, c) - S.coeff(cl, cl) - shift) > 1e-12 * std::abs(S.coeff(c, c))) return false;
      int n_in = 0;
      for (SpMatD::InnerIterator it(S, c); it; ++it) {
        if (it.col() < start[i] || it.col() >= start[i + 1] || it.col() == c) continue;
        ++n_in;
        if (it.value() != S.coeff(cl, it.col() - start[i] + start[last])) return false;
      }
      int n_last = 0;
      for (SpMatD::InnerIterator it(S, cl); it; ++it)
        if (it.col() >= start[last] && it.col() < start[last + 1] && it.col() != cl) ++n_last;
      if (n_in != n_last) return false;
    }
    return true;
  };
  auto uniform_coupling = [&](int i, double& e) {
    e = S.coeff(start[i], start[i + 1]);
    if (e == 0.0) return false;
    for (Eigen::Index k = 0; k < ny; ++k) {
      const Eigen::Index c = start[i] + k;
      int n_out = 0;
      for (SpMatD::InnerIterator it(S, c); it; ++it) {
        if (it.col() < start[i + 1]) continue;
        ++n_out;
        if (it.col() != start[i + 1] + k || !close(it.value(), e)) return false;
      }
      if (n_out != 1) return false;
    }
    return true;
  };

  int K = last;
  VecD coupling = VecD::Zero(layers);
  while (K > 0) {
    double e = 0.0;
    if (!same_layer(K - 1) || !uniform_coupling(K - 1, e)) break;
    coupling[K - 1] = e;
    --K;
  }
  if (last - K < 3) return false;

  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(ny, ny);
  for (Eigen::Index k = 0; k < ny; ++k)
    for (SpMatD::InnerIterator it(S, start[last] + k); it; ++it)
      if (it.col() >= start[last]) T(k, it.col() - start[last]) = it.value();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  out.K = K;
  out.layers = layers;
  out.layer_start = std::move(start);
  out.Q = es.eigenvectors();
  out.tau = es.eigenvalues();
  out.shift = VecD::Zero(layers);
  for (int i = K; i < layers; ++i)
    out.shift[i] = S.coeff(out.layer_start[i], out.layer_start[i]) - S.coeff(out.layer_start[last], out.layer_start[last]);
  out.coupling = coupling;
  return true;
}

struct ResolventSolver::Impl {
  Eigen::SparseLU<SpMatC, Eigen::COLAMDOrdering<int>> lu;
  TailStructure tail;
  // Continued fractions, one row per condensed layer.
  Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> G;
  Eigen::SparseMatrix<double> precond_matrix;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> precond;
};

namespace {

SpMatC shifted(const SpMatD& S, Complex z, Eigen::Index n) {
  std::vector<Eigen::Triplet<Complex, int>> trips;
  trips.reserve(static_cast<std::size_t>(S.nonZeros()));
  for (Eigen::Index r = 0; r < n; ++r) {
    bool diag = false;
    for (SpMatD::InnerIterator it(S, r); it; ++it) {
      if (it.col() >= n) continue;
      Complex v = it.value();
      if (it.col() == r) {
        v -= z;
        diag = true;
      }
      trips.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), v);
    }
    if (!diag) trips.emplace_back(static_cast<int>(r), static_cast<int>(r), -z);
  }
  SpMatC A(n, n);
  A.setFromTriplets(trips.begin(), trips.end());
  A.makeCompressed();
  return A;
}

}  // namespace

ResolventSolver::ResolventSolver(const DirichletOperator& H, SpectralPoint z, SolveOptions opt)
    : H_(H), z_(z), opt_(opt), method_(opt.method), impl_(std::make_unique<Impl>()) {
  const Eigen::Index N = H.dim();
  auto tail = [&]() {
    if (opt.tail) {
      impl_->tail = *opt.tail;
      return true;
    }
    return detect_tail(H, impl_->tail);
  };
  if (method_ == SolveMethod::Auto) {
    if (N <= opt.direct_limit)
      method_ = SolveMethod::Direct;
    else if (tail())
      method_ = SolveMethod::Condensed;
    else
      method_ = SolveMethod::Krylov;
  } else if (method_ == SolveMethod::Condensed) {
    if (!tail()) fail(ErrorCode::Unsupported, "no condensable tail in this domain");
  }
  const Complex zc = z.z();
  auto factor_failed = [&]() {
    if (z.eps == 0.0) fail(ErrorCode::SpectrumHit, fmt::format("H - {} is singular", z.lambda));
    fail(ErrorCode::SolverBreakdown, "sparse factorization failed");
  };

  if (method_ == SolveMethod::Direct) {
    SpMatC A = shifted(H.S, zc, N);
    impl_->lu.compute(A);
    if (impl_->lu.info() != Eigen::Success) factor_failed();
  } else if (method_ == SolveMethod::Condensed) {
    const TailStructure& t = impl_->tail;
    const Eigen::Index ny = t.tau.size();
    const int nt = t.layers - 1 - t.K;
    impl_->G.resize(nt, ny);
    for (Eigen::Index j = 0; j < ny; ++j) {
      Complex g = 0.0;
      for (int i = t.layers - 1; i > t.K; --i) {
        Complex a = t.tau[j] + t.shift[i] - zc;
        Complex e2 = i + 1 < t.layers ? t.coupling[i] * t.coupling[i] : 0.0;
        g = 1.0 / (a - e2 * g);
        impl_->G(i - t.K - 1, j) = g;
      }
    }
    const Eigen::Index nc = t.core_size();
    SpMatC A = shifted(H.S, zc, nc);
    const double eK = t.coupling[t.K];
    VecC corr = -(eK * eK) * impl_->G.row(0).transpose();
    Eigen::MatrixXcd D = t.Q.cast<Complex>() * corr.asDiagonal() * t.Q.transpose().cast<Complex>();
    const Eigen::Index off = t.layer_start[t.K];
    SpMatC Dm(nc, nc);
    std::vector<Eigen::Triplet<Complex, int>> trips;
    for (Eigen::Index a = 0; a < ny; ++a)
      for (Eigen::Index b = 0; b < ny; ++b) trips.emplace_back(static_cast<int>(off + a), static_cast<int>(off + b), D(a, b));
    Dm.setFromTriplets(trips.begin(), trips.end());
    A += Dm;
    impl_->lu.compute(A);
    if (impl_->lu.info() != Eigen::Success) factor_failed();
  } else {
    const double sigma = std::max(z.abs(), 1e-3);
    impl_->precond_matrix = H.S;
    for (Eigen::Index i = 0; i < N; ++i) impl_->precond_matrix.coeffRef(i, i) += sigma;
    impl_->precond.compute(impl_->precond_matrix);
    if (impl_->precond.info() != Eigen::Success) fail(ErrorCode::SolverBreakdown, "preconditioner factorization failed");
  }
}

ResolventSolver::~ResolventSolver() = default;

ResolventSolve ResolventSolver::solve(const GridFunction& f) const {
  const Eigen::Index N = H_.dim();
  if (f.values.size() != N) fail(ErrorCode::InvalidArgument, "source size does not match the operator");
  const Complex z = z_.z();
  const VecC sw = H_.sqrt_weight.cast<Complex>();
  const VecC b = sw.cwiseProduct(f.values);
  auto apply_A = [&](const VecC& w) -> VecC { return VecC(H_.S * w) - z * w; };

  int iterations = 0;
  auto condensed = [&](const VecC& rhs) -> VecC {
    const TailStructure& t = impl_->tail;
    const Eigen::Index ny = t.tau.size();
    const Eigen::Index nt = t.layers - 1 - t.K;
    const Eigen::Index t0 = t.layer_start[t.K + 1];
    // Tail layers are contiguous blocks of ny cells: column i of the map is layer K+1+i.
    Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>> R(rhs.data() + t0, ny, nt);
    Eigen::Index last = nt;  // compact sources leave the far tail untouched
    while (last > 0 && R.col(last - 1).isZero(0.0)) --last;
    Eigen::MatrixXd bre(ny, last), bim(ny, last);
    if (last > 0) {
      bre.noalias() = t.Q.transpose() * Eigen::MatrixXd(R.leftCols(last).real());
      bim.noalias() = t.Q.transpose() * Eigen::MatrixXd(R.leftCols(last).imag());
    }
    std::vector<Complex> g(static_cast<std::size_t>(nt) * ny, Complex(0.0));
    for (Eigen::Index row = last - 1; row >= 0; --row) {
      const int i = t.K + 1 + static_cast<int>(row);
      const double e = i + 1 < t.layers ? t.coupling[i] : 0.0;
      Complex* gr = g.data() + row * ny;
      const Complex* Gr = impl_->G.data() + row * ny;
      const Complex* gn = row + 1 < nt ? gr + ny : nullptr;
      for (Eigen::Index j = 0; j < ny; ++j) {
        Complex bj(bre(j, row), bim(j, row));
        if (gn) bj -= e * gn[j];
        gr[j] = Gr[j] * bj;
      }
    }
    const Eigen::Index nc = t.core_size();
    VecC core_rhs = rhs.head(nc);
    const double eK = t.coupling[t.K];
    const double* Q = t.Q.data();  // column major
    for (Eigen::Index a = 0; a < ny; ++a) {
      Complex acc = 0.0;
      for (Eigen::Index j = 0; j < ny; ++j) acc += Q[j * ny + a] * g[j];
      core_rhs[t.layer_start[t.K] + a] -= eK * acc;
    }
    VecC w(rhs.size());
    w.head(nc) = impl_->lu.solve(core_rhs);
    // Evanescent modes decay far below rounding level; flushing them keeps
    // the tail out of subnormal arithmetic, which is very slow.
    double peak = w.head(nc).cwiseAbs().maxCoeff();
    for (const Complex& v : g) peak = std::max(peak, std::abs(v));
    const double kFlush = 1e-100 * peak;
    Eigen::MatrixXd cre(ny, nt), cim(ny, nt);
    std::vector<Complex> c(ny);
    for (Eigen::Index j = 0; j < ny; ++j) {
      Complex acc = 0.0;
      for (Eigen::Index a = 0; a < ny; ++a) acc += Q[j * ny + a] * w[t.layer_start[t.K] + a];
      c[j] = acc;
    }
    for (Eigen::Index row = 0; row < nt; ++row) {
      const double e = t.coupling[t.K + row];
      const Complex* gr = g.data() + row * ny;
      const Complex* Gr = impl_->G.data() + row * ny;
      for (Eigen::Index j = 0; j < ny; ++j) {
        c[j] = gr[j] - Gr[j] * e * c[j];
        if (std::abs(c[j].real()) < kFlush) c[j].real(0.0);
        if (std::abs(c[j].imag()) < kFlush) c[j].imag(0.0);
        cre(j, row) = c[j].real();
        cim(j, row) = c[j].imag();
      }
    }
    Eigen::Map<Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>> W(w.data() + t0, ny, nt);
    const Eigen::MatrixXd ore = t.Q * cre, oim = t.Q * cim;
    for (Eigen::Index k = 0; k < W.size(); ++k) W.data()[k] = Complex(ore.data()[k], oim.data()[k]);
    return w;
  };

  auto cocg = [&](const VecC& rhs, const VecC& x0) -> VecC {
    VecC x = x0;
    VecC r = rhs - apply_A(x);
    const double bn = rhs.norm();
    auto prec = [&](const VecC& v) -> VecC {
      VecC out(v.size());
      out.real() = impl_->precond.solve(VecD(v.real()));
      out.imag() = impl_->precond.solve(VecD(v.imag()));
      return out;
    };
    VecC zv = prec(r);
    VecC p = zv;
    Complex rho = r.transpose() * zv;
    double best = r.norm();
    int since_best = 0;
    for (int it = 0; it < opt_.max_iter; ++it) {
      if (r.norm() <= 0.1 * opt_.tol * bn) break;
      VecC q = apply_A(p);
      Complex pq = p.transpose() * q;
      if (std::abs(pq) == 0.0 || !std::isfinite(std::abs(pq))) fail(ErrorCode::SolverBreakdown, "COCG breakdown");
      Complex alpha = rho / pq;
      x += alpha * p;
      r -= alpha * q;
      ++iterations;
      double rn = r.norm();
      if (rn < 0.5 * best) {
        best = rn;
        since_best = 0;
      } else if (++since_best > 2000) {
        fail(ErrorCode::SolverBreakdown, fmt::format("COCG stagnated at relative residual {:.3g}", rn / bn));
      }
      zv = prec(r);
      Complex rho_new = r.transpose() * zv;
      if (rho == 0.0) fail(ErrorCode::SolverBreakdown, "COCG breakdown");
      p = zv + (rho_new / rho) * p;
      rho = rho_new;
    }
    return x;
  };

  ResolventSolve out;
  out.z = z_;
  out.f = f;
  out.stats.method = solve_method_name(method_);
  const double bn = b.norm();
  if (bn == 0.0) {
    out.u = GridFunction(f.domain);
    return out;
  }

  VecC w;
  auto one = [&](const VecC& rhs) -> VecC {
    if (method_ == SolveMethod::Direct) return impl_->lu.solve(rhs);
    return condensed(rhs);
  };
  if (method_ == SolveMethod::Krylov) {
    w = cocg(b, VecC::Zero(N));
  } else {
    w = one(b);
    ++iterations;
  }
  double res = (b - apply_A(w)).norm() / bn;
  // Iterative refinement on the same factorization.
  for (int pass = 0; pass < 3 && res > 0.1 * opt_.tol && std::isfinite(res); ++pass) {
    VecC r = b - apply_A(w);
    if (method_ == SolveMethod::Krylov)
      w = cocg(b, w);
    else
      w += one(r);
    ++iterations;
    res = (b - apply_A(w)).norm() / bn;
  }
  if (!(res <= opt_.tol)) {
    if (z_.eps == 0.0) fail(ErrorCode::SpectrumHit, fmt::format("residual {:.3g} at real z = {}", res, z_.lambda));
    fail(ErrorCode::SolverBreakdown, fmt::format("residual {:.3g} above tolerance", res));
  }
  out.u = GridFunction(f.domain, w.cwiseQuotient(sw));
  out.residual = res;
  out.stats.iterations = iterations;
  return out;
}

ResolventSolve solve_resolvent(const DirichletOperator& H, SpectralPoint z, const GridFunction& f,
                               const SolveOptions& opt) {
  ResolventSolver s(H, z, opt);
  return s.solve(f);
}

double resolvent_residual(const DirichletOperator& H, SpectralPoint z, const GridFunction& f, const GridFunction& u) {
  const VecC sw = H.sqrt_weight.cast<Complex>();
  VecC w = sw.cwiseProduct(u.values);
  VecC b = sw.cwiseProduct(f.values);
  VecC r = VecC(H.S * w) - z.z() * w - b;
  double bn = b.norm();
  return bn == 0.0 ? r.norm() : r.norm() / bn;
}

EnergyDefects energy_identity_check(const DirichletOperator& H, const ResolventSolve& s) {
  const VecC sw = H.sqrt_weight.cast<Complex>();
  VecC w = sw.cwiseProduct(s.u.values);
  VecC fs = sw.cwiseProduct(s.f.values);
  VecC Sw = H.S * w;
  const double uu = sum_abs2(w);
  const double Huu = dot_conj(Sw, w).real();
  const Complex fu = dot_conj(fs, w);
  EnergyDefects e;
  e.im_defect = std::abs(s.z.eps * uu + fu.imag());
  e.re_defect = std::abs(Huu - s.z.lambda * uu - fu.real());
  e.scale = std::sqrt(sum_abs2(fs)) * std::sqrt(uu);
  return e;
}

GridFunction grad_x_magnitude(const GridFunction& u, int ell_x) {
  const WaveguideDomain& d = *u.domain;
  const GridLayout& lay = d.layout();
  const double h = d.spec().h_x;
  const double ang = centrifugal(ell_x, d.spec().n);
  GridFunction g(u.domain);
  int idx[8];
  for (std::size_t c = 0; c < d.size(); ++c) {
    const std::int64_t t = d.tensor_index(c);
    d.indices(c, idx);
    double s = 0.0;
    for (int a = 0; a < lay.x_axes(); ++a) {
      const int dim = lay.dims()[a];
      const std::int32_t up = idx[a] + 1 < dim ? d.cell_of(t + lay.stride(a)) : -1;
      std::int32_t dn = idx[a] > 0 ? d.cell_of(t - lay.stride(a)) : -1;
      // Radial origin: the inner neighbor is the mirror image of the cell.
      if (lay.radial_x() && idx[a] == 0) dn = static_cast<std::int32_t>(c);
      Complex der = 0.0;
      if (up >= 0 && dn >= 0) {
        der = (u.values[up] - u.values[dn]) / (2.0 * h);
      } else if (up >= 0) {
        der = (u.values[up] - u.values[c]) / h;
      } else if (dn >= 0) {
        der = (u.values[c] - u.values[dn]) / h;
      }
      s += std::norm(der);
    }
    if (ang != 0.0) s += ang * std::norm(u.values[c]) / (d.radius(c) * d.radius(c));
    g.values[c] = std::sqrt(s);
  }
  return g;
}

SweepRecord resolvent_ratio(const DirichletOperator& H, const ResolventSolve& s, double weight_eps) {
  SweepRecord r;
  r.lambda = s.z.lambda;
  r.eps = s.z.eps;
  r.Xstar_f = norm_Xstar(s.f);
  if (!(r.Xstar_f > 0.0)) fail(ErrorCode::ZeroSource, "source has zero X* norm");
  r.X_u = norm_X(s.u);
  r.X1_u = norm_X1(s.u);
  GridFunction g = grad_x_magnitude(s.u, H.ell_x);
  r.X_grad = norm_X(g);
  const double fs2 = r.Xstar_f * r.Xstar_f;
  r.ratio_no_z = (r.X_grad * r.X_grad + r.X1_u * r.X1_u) / fs2;
  r.ratio = r.ratio_no_z + (std::abs(s.z.lambda) + std::abs(s.z.eps)) * r.X_u * r.X_u / fs2;
  const double a = 1.0 + weight_eps, b = 0.5 + weight_eps;
  r.weighted = weighted_norm_fixed(s.u, a) / weighted_norm_fixed(s.f, -a);
  r.weighted_grad = weighted_norm_fixed(g, b) / weighted_norm_fixed(s.f, -b);
  r.weighted_z = std::sqrt(s.z.abs()) * weighted_norm_fixed(s.u, b) / weighted_norm_fixed(s.f, -b);
  r.residual = s.residual;
  EnergyDefects e = energy_identity_check(H, s);
  r.im_defect = e.scale > 0 ? e.im_defect / e.scale : e.im_defect;
  r.re_defect = e.scale > 0 ? e.re_defect / e.scale : e.re_defect;
  r.iterations = s.stats.iterations;
  r.method = s.stats.method;
  return r;
}

GridFunction SourceSpec::sample(DomainPtr d) const {
  const GridLayout& lay = d->layout();
  const int n = d->spec().n;
  return wglab::sample(d, [&](const CellPoint& p) -> Complex {
    double dist;
    if (lay.radial_x()) {
      dist = std::abs(p.r - center_r);
    } else {
      double s2 = 0.0;
      for (int a = 0; a < n; ++a) {
        double c = a < 3 ? center_r * dir[a] : 0.0;
        s2 += (p.x[a] - c) * (p.x[a] - c);
      }
      dist = std::sqrt(s2);
    }
    double s = dist / width;
    if (s >= 1.0) return 0.0;
    double y = p.y[0] + 0.7 * p.y[1];
    double prof = 1.0;
    for (int k = 0; k < 3; ++k) prof += 0.5 * y_amp[k] * std::cos((k + 1) * y + y_phase[k]);
    return bump_function(s) * prof;
  });
}

std::vector<SourceSpec> make_source_ensemble(int count, double support_radius, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  std::normal_distribution<double> nd;
  std::vector<SourceSpec> out;
  const double M = std::max(support_radius, 1.0);
  for (int i = 0; i < count; ++i) {
    SourceSpec s;
    s.width = 0.5 + 0.5 * ud(rng);
    s.center_r = std::max(0.0, (M - s.width)) * ud(rng);
    double nrm = 0.0;
    for (auto& c : s.dir) {
      c = nd(rng);
      nrm += c * c;
    }
    for (auto& c : s.dir) c /= std::sqrt(nrm);
    for (int k = 0; k < 3; ++k) {
      s.y_amp[k] = 2.0 * ud(rng) - 1.0;
      s.y_phase[k] = 2.0 * kPi * ud(rng);
    }
    out.push_back(s);
  }
  return out;
}

SweepSummary sweep_uniformity(const DirichletOperator& H, const std::vector<double>& lambdas,
                              const std::vector<double>& eps, const std::vector<GridFunction>& sources, int jobs,
                              const SolveOptions& opt, double weight_eps) {
  for (double e : eps)
    if (!(e > 0.0)) fail(ErrorCode::InvalidArgument, "sweep eps values must be positive");
  const std::size_t nl = lambdas.size(), ne = eps.size(), ns = sources.size();
  SweepSummary sum;
  sum.records.resize(nl * ne * ns);
  SolveOptions o = opt;
  if (!o.tail && o.method != SolveMethod::Direct && o.method != SolveMethod::Krylov && H.dim() > o.direct_limit) {
    auto t = std::make_shared<TailStructure>();
    if (detect_tail(H, *t)) o.tail = t;
  }
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t task = next++; task < nl * ne; task = next++) {
      const std::size_t li = task / ne, ei = task % ne;
      SpectralPoint z{lambdas[li], eps[ei]};
      std::unique_ptr<ResolventSolver> solver;
      std::string err;
      try {
        solver = std::make_unique<ResolventSolver>(H, z, o);
      } catch (const Error& e) {
        err = fmt::format("{}: {}", error_name(e.code()), e.what());
      }
      for (std::size_t si = 0; si < ns; ++si) {
        SweepRecord& rec = sum.records[task * ns + si];
        if (solver) {
          try {
            rec = resolvent_ratio(H, solver->solve(sources[si]), weight_eps);
          } catch (const Error& e) {
            rec = SweepRecord{};
            rec.error = fmt::format("{}: {}", error_name(e.code()), e.what());
          }
        } else {
          rec.error = err;
        }
        rec.lambda = z.lambda;
        rec.eps = z.eps;
        rec.source = static_cast<int>(si);
      }
    }
  };
  jobs = std::max(1, jobs);
  if (jobs == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::size_t e_lo = 0, e_hi = 0;
  for (std::size_t i = 0; i < ne; ++i) {
    if (eps[i] < eps[e_lo]) e_lo = i;
    if (eps[i] > eps[e_hi]) e_hi = i;
  }
  for (const auto& r : sum.records) {
    if (!r.error.empty()) {
      ++sum.failures;
      continue;
    }
    sum.max_ratio = std::max(sum.max_ratio, r.ratio);
    sum.max_residual = std::max(sum.max_residual, r.residual);
    sum.max_im_defect = std::max(sum.max_im_defect, r.im_defect);
    sum.max_re_defect = std::max(sum.max_re_defect, r.re_defect);
  }
  if (ne > 0) {
    for (std::size_t li = 0; li < nl; ++li) {
      double top_lo = 0.0, top_hi = 0.0;
      for (std::size_t si = 0; si < ns; ++si) {
        const auto& lo = sum.records[(li * ne + e_lo) * ns + si];
        const auto& hi = sum.records[(li * ne + e_hi) * ns + si];
        if (lo.error.empty()) top_lo = std::max(top_lo, lo.ratio);
        if (hi.error.empty()) top_hi = std::max(top_hi, hi.ratio);
        if (lo.error.empty() && hi.error.empty() && hi.ratio > 0)
          sum.source_trend = std::max(sum.source_trend, lo.ratio / hi.ratio);
      }
      if (!(top_hi > 0)) continue;
      const double t = top_lo / top_hi;
      if (t > sum.trend) {
        sum.trend = t;
        sum.trend_lambda = lambdas[li];
      }
    }
  }
  return sum;
}

double sweep_sensitivity(const SweepSummary& a, const SweepSummary& b) {
  if (a.records.size() != b.records.size()) fail(ErrorCode::InvalidArgument, "sweeps cover different grids");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    if (!x.error.empty() || !y.error.empty()) continue;
    worst = std::max(worst, std::abs(x.ratio - y.ratio) / std::max(std::abs(x.ratio), 1e-300));
  }
  return worst;
}

namespace {

std::string csv_field(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

std::string sweep_csv_header() {
  return "lambda,eps,source,ratio,ratio_no_z,X_u,X1_u,X_grad_u,Xstar_f,weighted,weighted_grad,weighted_z,"
         "residual,im_defect,re_defect,iterations,method,error";
}

std::string sweep_csv_row(const SweepRecord& r) {
  return fmt::format("{:.17g},{:.17g},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},"
                     "{:.17g},{:.17g},{:.17g},{},{},{}",
                     r.lambda, r.eps, r.source, r.ratio, r.ratio_no_z, r.X_u, r.X1_u, r.X_grad, r.Xstar_f, r.weighted,
                     r.weighted_grad, r.weighted_z, r.residual, r.im_defect, r.re_defect, r.iterations, r.method,
                     csv_field(r.error));
}

}  // namespace wglab
