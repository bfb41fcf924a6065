#pragma once

#include <string>
#include <vector>

#include "wglab/grid_function.hpp"

namespace wglab {

struct PotentialField {
  enum class Kind { Zero, Constant, InverseR, LinearR, GaussianInverseR, Samples };
  Kind kind = Kind::Zero;
  double c = 0.0;
  double width = 1.0;            // GaussianInverseR: c exp(-(r/width)^2) / r
  std::vector<double> samples;   // per active cell

  static PotentialField zero();
  static PotentialField constant(double c);
  static PotentialField inverse_r(double c);
  static PotentialField linear_r(double c);
  static PotentialField gaussian_inverse_r(double c, double width);
  static PotentialField from_samples(std::vector<double> v);

  bool analytic() const { return kind != Kind::Samples; }
  // V at radius r (analytic kinds) or at a cell (all kinds).
  double at_radius(double r) const;
  double at_cell(const WaveguideDomain& d, std::size_t c) const;
  // -x . grad_x(|x| V) for a radial V (analytic kinds).
  double radial_slack(double r) const;
  // Nonzero only inside |x| <= support radius (infinity when unbounded).
  double support_radius() const;
  std::string id() const;
};

struct PotentialReport {
  bool nonneg = true;
  bool radial_repulsive = true;
  double min_value = 0.0;
  double min_slack = 0.0;
  bool analytic = true;
};

PotentialReport audit_potential(const PotentialField& V, const WaveguideDomain& d);

// Sparse symmetric discretization of -Delta + V on the active cells, stored
// in symmetric coordinates w = sqrt(W) u where W is the cell quadrature
// weight. Radial axes use a conservative flux form with exact shell volumes,
// which is the discrete counterpart of the substitution w = r^{(n-1)/2} u.
// In reduced modes the matrix is the (ell_x, k_y) angular sector.
struct DirichletOperator {
  DomainPtr domain;
  SpMatD S;
  VecD potential;
  VecD sqrt_weight;
  int ell_x = 0;
  int k_y = 0;
  std::string profile_id;
  std::string potential_id;

  Eigen::Index dim() const { return S.rows(); }
  // Physical action H u.
  VecC apply(const VecC& u) const;
  GridFunction apply(const GridFunction& u) const;
};

using SectorOperator = DirichletOperator;

DirichletOperator assemble_hamiltonian(DomainPtr domain, const PotentialField& V = PotentialField::zero());
SectorOperator assemble_sector(DomainPtr domain, int ell_x, int k_y,
                               const PotentialField& V = PotentialField::zero());

// Centrifugal coefficient l(l + n - 2).
inline double centrifugal(int ell, int n) { return static_cast<double>(ell) * (ell + n - 2); }

struct Diagnostics {
  bool symmetric = true;
  double max_asymmetry = 0.0;
  double min_ritz = 0.0;
  bool nonnegative = true;
  bool local = true;
  std::size_t nonlocal_entries = 0;
};

Diagnostics operator_selfcheck(const DirichletOperator& H, std::uint64_t seed = 0);

// Coordinate list: "row col value" per line, 17 significant digits.
void export_coo(const std::string& path, const DirichletOperator& H);

// Lanczos with full reorthogonalization from a start vector; returns the
// Ritz values of the symmetric matrix restricted to the Krylov space.
VecD lanczos_ritz(const SpMatD& S, const VecD& start, int steps);

}  // namespace wglab
