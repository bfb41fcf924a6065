#include "wglab/operators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

namespace wglab {

PotentialField PotentialField::zero() { return {}; }

PotentialField PotentialField::constant(double c) {
  PotentialField v;
  v.kind = Kind::Constant;
  v.c = c;
  return v;
}

PotentialField PotentialField::inverse_r(double c) {
  PotentialField v;
  v.kind = Kind::InverseR;
  v.c = c;
  return v;
}

PotentialField PotentialField::linear_r(double c) {
  PotentialField v;
  v.kind = Kind::LinearR;
  v.c = c;
  return v;
}

PotentialField PotentialField::gaussian_inverse_r(double c, double width) {
  PotentialField v;
  v.kind = Kind::GaussianInverseR;
  v.c = c;
  v.width = width;
  return v;
}

PotentialField PotentialField::from_samples(std::vector<double> s) {
  PotentialField v;
  v.kind = Kind::Samples;
  v.samples = std::move(s);
  return v;
}

double PotentialField::at_radius(double r) const {
  switch (kind) {
    case Kind::Zero: return 0.0;
    case Kind::Constant: return c;
    case Kind::InverseR: return c / r;
    case Kind::LinearR: return c * r;
    case Kind::GaussianInverseR: return c * std::exp(-(r / width) * (r / width)) / r;
    case Kind::Samples: break;
  }
  fail(ErrorCode::InvalidArgument, "sampled potential has no radial formula");
}

double PotentialField::at_cell(const WaveguideDomain& d, std::size_t c) const {
  if (kind == Kind::Samples) {
    if (samples.size() != d.size()) fail(ErrorCode::InvalidArgument, "potential samples do not match the domain");
    return samples[c];
  }
  return at_radius(d.radius(c));
}

double PotentialField::radial_slack(double r) const {
  // q = r V; slack = -r q'(r).
  switch (kind) {
    case Kind::Zero: return 0.0;
    case Kind::Constant: return -r * c;
    case Kind::InverseR: return 0.0;
    case Kind::LinearR: return -2.0 * c * r * r;
    case Kind::GaussianInverseR: {
      double s = r / width;
      return 2.0 * c * s * s * std::exp(-s * s);
    }
    case Kind::Samples: break;
  }
  fail(ErrorCode::InvalidArgument, "sampled potential has no radial formula");
}

double PotentialField::support_radius() const {
  if (kind == Kind::Zero) return 0.0;
  if (kind == Kind::GaussianInverseR) return 8.0 * width;  // below 1e-27 relative beyond
  return std::numeric_limits<double>::infinity();
}

std::string PotentialField::id() const {
  switch (kind) {
    case Kind::Zero: return "zero";
    case Kind::Constant: return fmt::format("constant({:.17g})", c);
    case Kind::InverseR: return fmt::format("inverse_r({:.17g})", c);
    case Kind::LinearR: return fmt::format("linear_r({:.17g})", c);
    case Kind::GaussianInverseR: return fmt::format("gaussian_inverse_r({:.17g},{:.17g})", c, width);
    case Kind::Samples: return fmt::format("samples({})", samples.size());
  }
  return "?";
}

PotentialReport audit_potential(const PotentialField& V, const WaveguideDomain& d) {
  PotentialReport rep;
  rep.analytic = V.analytic();
  double vmin = std::numeric_limits<double>::infinity();
  double smin = std::numeric_limits<double>::infinity();
  if (V.analytic()) {
    for (std::size_t c = 0; c < d.size(); ++c) {
      double r = d.radius(c);
      vmin = std::min(vmin, V.at_radius(r));
      smin = std::min(smin, V.radial_slack(r));
    }
  } else {
    const GridLayout& lay = d.layout();
    int idx[8];
    for (std::size_t c = 0; c < d.size(); ++c) {
      vmin = std::min(vmin, V.at_cell(d, c));
      d.indices(c, idx);
      std::int64_t t = d.tensor_index(c);
      // x . grad(|x| V) by centered differences along the x axes.
      double dot = 0.0;
      for (int a = 0; a < lay.x_axes(); ++a) {
        double h = d.spec().h_x;
        auto q_at = [&](std::int64_t tt) {
          std::int32_t cc = d.cell_of(tt);
          return cc < 0 ? std::numeric_limits<double>::quiet_NaN() : d.radius(cc) * V.at_cell(d, cc);
        };
        double q0 = d.radius(c) * V.at_cell(d, c);
        double qp = idx[a] + 1 < lay.dims()[a] ? q_at(t + lay.stride(a)) : std::numeric_limits<double>::quiet_NaN();
        double qm = idx[a] > 0 ? q_at(t - lay.stride(a)) : std::numeric_limits<double>::quiet_NaN();
        double der;
        if (!std::isnan(qp) && !std::isnan(qm)) der = (qp - qm) / (2 * h);
        else if (!std::isnan(qp)) der = (qp - q0) / h;
        else if (!std::isnan(qm)) der = (q0 - qm) / h;
        else der = 0.0;
        double xa = lay.radial_x() ? d.radius(c) : lay.x_nodes()[idx[a]];
        // In radial mode the derivative is d/dr and x . grad = r d/dr.
        dot += xa * der;
      }
      smin = std::min(smin, -dot);
    }
  }
  rep.min_value = vmin;
  rep.min_slack = smin;
  rep.nonneg = vmin >= 0.0;
  rep.radial_repulsive = smin >= 0.0;
  return rep;
}

namespace {

DirichletOperator assemble(DomainPtr domain, int ell, int k, const PotentialField& V) {
  const WaveguideDomain& d = *domain;
  const GridLayout& lay = d.layout();
  const GridSpec& sp = d.spec();
  const int xa = lay.x_axes();
  const int na = lay.axes();
  const Eigen::Index N = static_cast<Eigen::Index>(d.size());

  DirichletOperator H;
  H.domain = domain;
  H.ell_x = ell;
  H.k_y = k;
  H.profile_id = d.profile().id();
  H.potential_id = V.id();
  H.potential.resize(N);
  H.sqrt_weight.resize(N);
  for (Eigen::Index c = 0; c < N; ++c) {
    double v = V.at_cell(d, c);
    if (!(v >= 0.0)) fail(ErrorCode::NegativePotential, fmt::format("V = {} at cell {}", v, c));
    H.potential[c] = v;
    H.sqrt_weight[c] = std::sqrt(d.weight(c));
  }

  using Trip = Eigen::Triplet<double, std::int64_t>;
  std::vector<Trip> trips;
  trips.reserve(static_cast<std::size_t>(N) * (2 * na + 1));
  const double hx = sp.h_x, hy = sp.h_y;
  const double ell_c = centrifugal(ell, sp.n);
  const double k2 = static_cast<double>(k) * k;

  int idx[8];
  for (Eigen::Index c = 0; c < N; ++c) {
    const std::int64_t t = d.tensor_index(c);
    lay.unravel(t, idx);
    double diag = 0.0;
    double centri = 0.0, centri_y = 0.0;
    for (int a = 0; a < na; ++a) {
      const bool is_x = a < xa;
      const bool radial = is_x ? lay.radial_x() : lay.radial_y();
      const double h = is_x ? hx : hy;
      const int i = idx[a];
      const int dim = lay.dims()[a];
      if (!radial) {
        diag += 2.0 / (h * h);
        for (int dir = -1; dir <= 1; dir += 2) {
          int q = i + dir;
          if (q < 0 || q >= dim) continue;
          std::int32_t nb = d.cell_of(t + dir * lay.stride(a));
          if (nb >= 0) trips.emplace_back(c, nb, -1.0 / (h * h));
        }
        continue;
      }
      auto vol = [&](int j) { return is_x ? lay.x_measure(j) : lay.y_measure(j); };
      auto face = [&](int j) { return is_x ? lay.x_face(j) : lay.y_face(j); };
      const double Vi = vol(i);
      const double up = face(i);
      const double dn = i > 0 ? face(i - 1) : 0.0;
      diag += (up + dn) / (h * Vi);
      if (i + 1 < dim) {
        std::int32_t nb = d.cell_of(t + lay.stride(a));
        if (nb >= 0) trips.emplace_back(c, nb, -up / (h * std::sqrt(Vi * vol(i + 1))));
      }
      if (i > 0) {
        std::int32_t nb = d.cell_of(t - lay.stride(a));
        if (nb >= 0) trips.emplace_back(c, nb, -dn / (h * std::sqrt(vol(i - 1) * Vi)));
      }
      if (is_x && ell_c != 0.0) {
        double r = lay.x_nodes()[i];
        centri = ell_c / (r * r);
      }
      if (!is_x && k2 != 0.0) {
        double rho = lay.y_nodes()[i];
        centri_y = k2 / (rho * rho);
      }
    }
    // Order matters for bit-exact identities: stencil, then angular terms, then V.
    if (centri != 0.0) diag += centri;
    if (centri_y != 0.0) diag += centri_y;
    if (H.potential[c] != 0.0) diag += H.potential[c];
    trips.emplace_back(c, c, diag);
  }
  H.S.resize(N, N);
  H.S.setFromTriplets(trips.begin(), trips.end());
  H.S.makeCompressed();
  return H;
}

}  // namespace

DirichletOperator assemble_hamiltonian(DomainPtr domain, const PotentialField& V) {
  return assemble(std::move(domain), 0, 0, V);
}

SectorOperator assemble_sector(DomainPtr domain, int ell_x, int k_y, const PotentialField& V) {
  const GridLayout& lay = domain->layout();
  if (!lay.radial_x()) fail(ErrorCode::ModeMismatch, "sector operators need a reduced grid mode");
  if (ell_x < 0 || k_y < 0) fail(ErrorCode::InvalidArgument, "angular momenta must be nonnegative");
  if (k_y != 0 && !lay.radial_y()) fail(ErrorCode::NotRadial, "k_y needs a radial cross-section grid");
  return assemble(std::move(domain), ell_x, k_y, V);
}

VecC DirichletOperator::apply(const VecC& u) const {
  VecC w = sqrt_weight.cast<Complex>().cwiseProduct(u);
  VecC Sw = S * w;
  return Sw.cwiseQuotient(sqrt_weight.cast<Complex>());
}

GridFunction DirichletOperator::apply(const GridFunction& u) const {
  return GridFunction(domain, apply(u.values));
}

VecD lanczos_ritz(const SpMatD& S, const VecD& start, int steps) {
  const Eigen::Index N = S.rows();
  steps = static_cast<int>(std::min<Eigen::Index>(steps, N));
  Eigen::MatrixXd Q(N, steps);
  VecD alpha(steps), beta(steps);
  VecD q = start / start.norm();
  int m = 0;
  for (int j = 0; j < steps; ++j) {
    Q.col(j) = q;
    VecD w = S * q;
    alpha[j] = q.dot(w);
    w -= alpha[j] * q;
    if (j > 0) w -= beta[j - 1] * Q.col(j - 1);
    for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
    m = j + 1;
    double b = w.norm();
    beta[j] = b;
    if (b < 1e-14 * std::max(1.0, std::abs(alpha[j]))) break;
    q = w / b;
  }
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
  for (int j = 0; j < m; ++j) {
    T(j, j) = alpha[j];
    if (j + 1 < m) T(j, j + 1) = T(j + 1, j) = beta[j];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

Diagnostics operator_selfcheck(const DirichletOperator& H, std::uint64_t seed) {
  Diagnostics dg;
  const SpMatD& S = H.S;
  SpMatD St = S.transpose();
  SpMatD diff = S - St;
  for (Eigen::Index k = 0; k < diff.outerSize(); ++k)
    for (SpMatD::InnerIterator it(diff, k); it; ++it) dg.max_asymmetry = std::max(dg.max_asymmetry, std::abs(it.value()));
  dg.symmetric = dg.max_asymmetry == 0.0;

  const WaveguideDomain& d = *H.domain;
  const GridLayout& lay = d.layout();
  for (Eigen::Index r = 0; r < S.outerSize(); ++r) {
    for (SpMatD::InnerIterator it(S, r); it; ++it) {
      if (it.col() == r) continue;
      std::int64_t dt = std::llabs(d.tensor_index(r) - d.tensor_index(it.col()));
      bool ok = false;
      int idx_a[8], idx_b[8];
      lay.unravel(d.tensor_index(r), idx_a);
      lay.unravel(d.tensor_index(it.col()), idx_b);
      for (int a = 0; a < lay.axes(); ++a) {
        if (dt != lay.stride(a)) continue;
        int diffs = 0;
        for (int b = 0; b < lay.axes(); ++b) diffs += idx_a[b] != idx_b[b];
        ok = diffs == 1 && std::abs(idx_a[a] - idx_b[a]) == 1;
        if (ok) break;
      }
      if (!ok) ++dg.nonlocal_entries;
    }
  }
  dg.local = dg.nonlocal_entries == 0;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  VecD v(S.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = nd(rng);
  // Symmetric part only, so a corrupted matrix still yields real Ritz values.
  SpMatD Ssym = 0.5 * (S + St);
  VecD ritz = lanczos_ritz(Ssym, v, 32);
  dg.min_ritz = ritz.size() ? ritz.minCoeff() : 0.0;
  dg.nonnegative = dg.min_ritz >= -1e-10;
  return dg;
}

void export_coo(const std::string& path, const DirichletOperator& H) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot open " + path);
  for (Eigen::Index r = 0; r < H.S.outerSize(); ++r)
    for (SpMatD::InnerIterator it(H.S, r); it; ++it) os << fmt::format("{} {} {:.17g}\n", r, it.col(), it.value());
  if (!os) fail(ErrorCode::Io, "write failed for " + path);
}

}  // namespace wglab
