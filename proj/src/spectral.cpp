#include "wglab/spectral.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <fmt/format.h>

namespace wglab {

// ------------------------------------------------------------------ modes

ModeBasis cross_section_modes(const CrossSection& omega, const GridSpec& grid, int J, int k_y) {
  if (J < 1) fail(ErrorCode::InvalidArgument, "mode count must be positive");
  GridSpec g = grid;
  const bool radial_disk = omega.kind == CrossSection::Kind::Disk && grid.mode == GridMode::RadialXRadialY;
  g.mode = radial_disk ? GridMode::RadialXRadialY : GridMode::RadialX;
  g.extent_x = g.h_x;  // a single radial layer; its x stencil is a constant diagonal
  if (k_y != 0 && !radial_disk) fail(ErrorCode::NotRadial, "k_y needs a radial disk grid");

  DomainPtr d = build_domain(ProfileSpec::flat(omega), g);
  SectorOperator H = assemble_sector(d, 0, k_y);
  const GridLayout& lay = d->layout();
  const double cx = lay.x_face(0) / (g.h_x * lay.x_measure(0));
  const Eigen::Index N = H.dim();
  if (N < J) fail(ErrorCode::UnderResolved, fmt::format("cross-section has {} cells, {} modes requested", N, J));

  Eigen::SparseMatrix<double> A = H.S;
  for (Eigen::Index i = 0; i < N; ++i) A.coeffRef(i, i) -= cx;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(A), Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) fail(ErrorCode::EigenIterationStall, "cross-section eigensolve failed");

  ModeBasis mb;
  mb.grid = grid;
  mb.k_y = k_y;
  mb.values = es.eigenvalues().head(J);
  const double kmax = kPi / (2.0 * grid.h_y);
  if (std::sqrt(std::max(0.0, mb.values[J - 1])) > kmax)
    fail(ErrorCode::UnderResolved,
         fmt::format("mode {} has wavenumber {:.4g}, the grid resolves up to {:.4g}", J, std::sqrt(mb.values[J - 1]), kmax));
  mb.quad.resize(N);
  mb.y_index.resize(N);
  for (Eigen::Index c = 0; c < N; ++c) {
    mb.quad[c] = d->weight(c) / lay.x_measure(0);
    mb.y_index[c] = d->y_index(c);
  }
  const Eigen::MatrixXd W = es.eigenvectors().leftCols(J);
  mb.modes = W.array().colwise() / mb.quad.array().sqrt();
  Eigen::MatrixXd gram = mb.modes.transpose() * mb.quad.asDiagonal() * mb.modes;
  mb.gram_defect = (gram - Eigen::MatrixXd::Identity(J, J)).cwiseAbs().maxCoeff();
  for (int j = 0; j < J; ++j) {
    VecD r = A * W.col(j) - mb.values[j] * W.col(j);
    mb.max_residual = std::max(mb.max_residual, r.norm());
  }
  return mb;
}

ModeBasis tail_modes(const WaveguideDomain& d, int J, int k_y) {
  const ProfileSpec& p = d.profile();
  const auto& xn = d.layout().x_nodes();
  const double r_end = d.layout().radial_x() ? xn.back() : d.spec().extent_x;
  const double g = p.g(r_end);
  CrossSection cs = p.section;
  switch (cs.kind) {
    case CrossSection::Kind::Interval: cs = CrossSection::interval(g * cs.a, g * cs.b); break;
    case CrossSection::Kind::Disk: cs = CrossSection::disk(g * cs.radius); break;
    case CrossSection::Kind::Mask: break;
  }
  return cross_section_modes(cs, d.spec(), J, k_y);
}

double essential_threshold(const ModeBasis& basis) {
  if (basis.values.size() == 0) fail(ErrorCode::InvalidArgument, "empty mode basis");
  return basis.values[0];
}

// ------------------------------------------------------------------ scan

namespace {

using SpCol = Eigen::SparseMatrix<double>;
using LDLT = Eigen::SimplicialLDLT<SpCol, Eigen::Lower, Eigen::AMDOrdering<int>>;

SpCol shifted(const SpMatD& S, double sigma) {
  SpCol A = S;
  for (Eigen::Index i = 0; i < A.rows(); ++i) A.coeffRef(i, i) -= sigma;
  return A;
}

// Factor S - sigma I; nudges sigma off exact singularity.
double factor(const SpMatD& S, double sigma, LDLT& f) {
  const double nudge = 1e-11 * std::max(1.0, std::abs(sigma));
  for (int attempt = 0; attempt < 4; ++attempt) {
    f.compute(shifted(S, sigma));
    if (f.info() == Eigen::Success) {
      const VecD& D = f.vectorD();
      bool ok = true;
      for (Eigen::Index i = 0; i < D.size() && ok; ++i) ok = std::isfinite(D[i]) && D[i] != 0.0;
      if (ok) return sigma;
    }
    sigma += nudge * (attempt + 1);
  }
  fail(ErrorCode::SolverBreakdown, fmt::format("shifted factorization failed near {}", sigma));
}

int negatives(const LDLT& f) {
  const VecD& D = f.vectorD();
  int n = 0;
  for (Eigen::Index i = 0; i < D.size(); ++i) n += D[i] < 0.0;
  return n;
}

struct Pair {
  double value;
  double residual;
  VecD w;  // symmetric coordinates, unit norm
};

void orthogonalize(VecD& v, const std::vector<VecD>& basis) {
  for (int pass = 0; pass < 2; ++pass)
    for (const VecD& q : basis) v -= q.dot(v) * q;
}

// Eigenpairs of S in [lo, hi) by shift-invert Lanczos with locking.
std::vector<Pair> slice_pairs(const SpMatD& S, double lo, double hi, int count, const ScanOptions& opt,
                              std::uint64_t seed) {
  const Eigen::Index N = S.rows();
  LDLT f;
  const double sigma = factor(S, 0.5 * (lo + hi), f);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  auto random_vec = [&] {
    VecD v(N);
    for (Eigen::Index i = 0; i < N; ++i) v[i] = nd(rng);
    return v;
  };

  std::vector<VecD> locked;
  std::vector<Pair> out;
  VecD start = random_vec();
  for (int restart = 0; restart < opt.max_restarts && static_cast<int>(out.size()) < count; ++restart) {
    const int m = static_cast<int>(std::min<Eigen::Index>(opt.krylov_dim, N - static_cast<Eigen::Index>(locked.size())));
    if (m <= 0) break;
    Eigen::MatrixXd Q(N, m);
    VecD alpha = VecD::Zero(m), beta = VecD::Zero(m);
    VecD q = start;
    orthogonalize(q, locked);
    if (q.norm() < 1e-12) {
      q = random_vec();
      orthogonalize(q, locked);
    }
    q /= q.norm();
    int steps = 0;
    for (int j = 0; j < m; ++j) {
      Q.col(j) = q;
      VecD w = f.solve(q);
      alpha[j] = q.dot(w);
      for (int pass = 0; pass < 2; ++pass) {
        w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
        orthogonalize(w, locked);
      }
      steps = j + 1;
      beta[j] = w.norm();
      if (beta[j] < 1e-13 * std::max(1.0, std::abs(alpha[j]))) break;
      q = w / beta[j];
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(steps, steps);
    for (int j = 0; j < steps; ++j) {
      T(j, j) = alpha[j];
      if (j + 1 < steps) T(j, j + 1) = T(j + 1, j) = beta[j];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    VecD next = VecD::Zero(N);
    bool any_pending = false;
    // Largest |theta| first: those are the eigenvalues closest to the shift.
    std::vector<int> order(steps);
    for (int i = 0; i < steps; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int x, int y) { return std::abs(es.eigenvalues()[x]) > std::abs(es.eigenvalues()[y]); });
    for (int i : order) {
      const double theta = es.eigenvalues()[i];
      if (theta == 0.0) continue;
      const double E0 = sigma + 1.0 / theta;
      if (E0 < lo - 1e-9 * (hi - lo) || E0 >= hi + 1e-9 * (hi - lo)) continue;
      VecD x = Q.leftCols(steps) * es.eigenvectors().col(i).head(steps);
      orthogonalize(x, locked);
      double xn = x.norm();
      if (xn < 1e-8) continue;
      x /= xn;
      double E = x.dot(S * x);
      double res = (S * x - E * x).norm();
      for (int polish = 0; polish < 4 && res > 0.1 * opt.tol; ++polish) {
        VecD y = f.solve(x);
        orthogonalize(y, locked);
        x = y / y.norm();
        E = x.dot(S * x);
        res = (S * x - E * x).norm();
      }
      if (res <= opt.tol && E >= lo && E < hi) {
        locked.push_back(x);
        out.push_back({E, res, x});
        if (static_cast<int>(out.size()) >= count) break;
      } else if (E >= lo && E < hi) {
        next += x;
        any_pending = true;
      }
    }
    start = any_pending ? next : random_vec();
  }
  if (static_cast<int>(out.size()) < count)
    fail(ErrorCode::EigenIterationStall,
         fmt::format("found {} of {} eigenvalues in [{:.6g}, {:.6g})", out.size(), count, lo, hi));
  return out;
}

}  // namespace

int count_below(const SpMatD& S, double sigma) {
  LDLT f;
  factor(S, sigma, f);
  return negatives(f);
}

double mass_radius(const WaveguideDomain& d, const VecD& u, double fraction) {
  std::vector<std::pair<double, double>> pieces(d.size());
  long double total = 0.0L;
  for (std::size_t c = 0; c < d.size(); ++c) {
    double m = d.weight(c) * u[static_cast<Eigen::Index>(c)] * u[static_cast<Eigen::Index>(c)];
    pieces[c] = {d.radial_interval(c).second, m};
    total += m;
  }
  std::sort(pieces.begin(), pieces.end());
  long double acc = 0.0L;
  for (const auto& [b, m] : pieces) {
    acc += m;
    if (acc >= fraction * total) return b;
  }
  return pieces.empty() ? 0.0 : pieces.back().first;
}

std::vector<const EigenEntry*> EigenReport::bound_states() const {
  std::vector<const EigenEntry*> out;
  for (const auto& e : entries)
    if (e.localized && (!e.checked_doubling || e.stable)) out.push_back(&e);
  return out;
}

EigenReport scan_eigenvalues(const DirichletOperator& H, double a, double b, const ScanOptions& opt) {
  if (!(std::isfinite(a) && std::isfinite(b) && b > a)) fail(ErrorCode::InvalidArgument, "window must be finite with b > a");
  if (a < 0.0) fail(ErrorCode::InvalidArgument, "window must start at a >= 0");
  if (opt.shifts < 1 || opt.krylov_dim < 2) fail(ErrorCode::InvalidArgument, "bad scan options");
  const SpMatD& S = H.S;
  const WaveguideDomain& d = *H.domain;

  EigenReport rep;
  rep.a = a;
  rep.b = b;
  rep.extent_x = d.spec().extent_x;
  rep.profile_id = H.profile_id;
  rep.potential_id = H.potential_id;
  rep.ell_x = H.ell_x;
  rep.k_y = H.k_y;
  rep.shifts = opt.shifts;
  rep.krylov_dim = opt.krylov_dim;

  const int ns = opt.shifts;
  std::vector<double> edge(ns + 1);
  for (int s = 0; s <= ns; ++s) edge[s] = a + (b - a) * s / ns;
  std::vector<int> below(ns + 1);
  for (int s = 0; s <= ns; ++s) below[s] = count_below(S, edge[s]);
  rep.window_count = below[ns] - below[0];
  if (rep.window_count > opt.max_count)
    fail(ErrorCode::InvalidArgument,
         fmt::format("window holds {} eigenvalues, above the limit {}", rep.window_count, opt.max_count));

  std::vector<std::vector<Pair>> found(ns);
  std::vector<std::string> errors(ns);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int s = next++; s < ns; s = next++) {
      const int cnt = below[s + 1] - below[s];
      if (cnt <= 0) continue;
      try {
        found[s] = slice_pairs(S, edge[s], edge[s + 1], cnt, opt, opt.seed * 1000003ULL + s);
      } catch (const Error& e) {
        errors[s] = e.what();
      }
    }
  };
  const int jobs = std::max(1, std::min(opt.jobs, ns));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (!e.empty()) fail(ErrorCode::EigenIterationStall, e);

  for (int s = 0; s < ns; ++s) {
    std::sort(found[s].begin(), found[s].end(), [](const Pair& x, const Pair& y) { return x.value < y.value; });
    for (auto& p : found[s]) {
      // Neighbouring slices only meet at their shared edge.
      bool dup = false;
      for (const auto& e : rep.entries) {
        if (std::abs(e.value - p.value) > 1e-6 * std::max(1.0, std::abs(p.value))) continue;
        VecD we = e.vector.cwiseProduct(H.sqrt_weight);
        if (std::abs(we.dot(p.w)) > 0.5) dup = true;
      }
      if (dup) continue;
      EigenEntry e;
      e.value = p.value;
      e.residual = p.residual;
      e.ell_x = H.ell_x;
      e.k_y = H.k_y;
      e.vector = p.w.cwiseQuotient(H.sqrt_weight);
      e.r90 = mass_radius(d, e.vector);
      e.localized = e.r90 <= 0.5 * rep.extent_x;
      rep.entries.push_back(std::move(e));
    }
  }
  return rep;
}

void apply_doubling(EigenReport& base, const EigenReport& doubled, double rel) {
  base.doubled_extent = doubled.extent_x;
  for (auto& e : base.entries) {
    e.checked_doubling = true;
    double best = -1.0, dist = 0.0;
    for (const auto& o : doubled.entries) {
      if (!o.localized) continue;
      double dd = std::abs(o.value - e.value);
      if (best < 0 || dd < dist) {
        best = o.value;
        dist = dd;
      }
    }
    e.doubled_value = best < 0 ? std::nan("") : best;
    e.stable = best >= 0 && dist <= rel * std::max(std::abs(e.value), 1e-12);
  }
}

EigenReport classify_embedded(EigenReport report, double global_threshold, double tol) {
  report.threshold = global_threshold;
  for (auto& e : report.entries)
    e.embedded = e.localized && (!e.checked_doubling || e.stable) &&
                 e.value > global_threshold + tol * std::max(1.0, std::abs(global_threshold));
  const auto bs = report.bound_states();
  report.certificate = bs.empty();
  report.certificate_note = fmt::format(
      "window [{:.6g}, {:.6g}] sector (l={}, k={}): {} eigenvalues by inertia, {} localized, {} stable; "
      "{} shifts, Krylov dimension {}, extent {} doubled to {}",
      report.a, report.b, report.ell_x, report.k_y, report.window_count,
      std::count_if(report.entries.begin(), report.entries.end(), [](const EigenEntry& e) { return e.localized; }),
      bs.size(), report.shifts, report.krylov_dim, report.extent_x, report.doubled_extent);
  return report;
}

EigenReport scan_domain(const ProfileSpec& profile, const GridSpec& grid, const PotentialField& V, int ell_x,
                        int k_y, double a, double b, const ScanOptions& opt) {
  auto build = [&](const GridSpec& g) {
    DomainPtr d = build_domain(profile, g);
    if (g.mode == GridMode::FullTensor) {
      if (ell_x != 0 || k_y != 0) fail(ErrorCode::ModeMismatch, "sectors need a reduced grid mode");
      return assemble_hamiltonian(d, V);
    }
    return assemble_sector(d, ell_x, k_y, V);
  };
  DirichletOperator H = build(grid);
  EigenReport rep = scan_eigenvalues(H, a, b, opt);
  GridSpec g2 = grid;
  g2.extent_x *= 2.0;
  EigenReport rep2 = scan_eigenvalues(build(g2), a, b, opt);
  apply_doubling(rep, rep2);
  const double global = essential_threshold(tail_modes(*H.domain, 1, 0));
  rep.sector_threshold = k_y == 0 ? global : essential_threshold(tail_modes(*H.domain, 1, k_y));
  return classify_embedded(std::move(rep), global);
}

}  // namespace wglab
