#pragma once

#include <string>
#include <vector>

#include "wglab/operators.hpp"

namespace wglab {

// Dirichlet eigenpairs of -Delta_y on a cross-section, discretized with the
// same stencil the waveguide operators use along y. Modes are orthonormal
// under the y quadrature (sum_j q_j phi_a(j) phi_b(j) = delta_ab).
struct ModeBasis {
  GridSpec grid;                     // y settings of the discretization
  int k_y = 0;                       // angular sector on a radial disk grid
  std::vector<std::int64_t> y_index; // layout y index of each cross-section cell
  VecD quad;                         // y quadrature weight per cell
  VecD values;                       // lambda_j^2, ascending
  Eigen::MatrixXd modes;             // column j is phi_j on the cells
  double gram_defect = 0.0;          // max |Gram - I|
  double max_residual = 0.0;         // max ||-Delta phi_j - lambda_j^2 phi_j||
};

// J lowest modes. UnderResolved when mode J has fewer than 4 cells per
// wavelength or the cross-section has fewer than J cells.
ModeBasis cross_section_modes(const CrossSection& omega, const GridSpec& grid, int J, int k_y = 0);
// Modes of the cross-section the domain has at the end of its box.
ModeBasis tail_modes(const WaveguideDomain& d, int J, int k_y = 0);

double essential_threshold(const ModeBasis& basis);

struct ScanOptions {
  int shifts = 20;         // slices of the window
  int krylov_dim = 30;
  double tol = 1e-8;       // ||(S - E) v|| / ||v||
  int max_restarts = 60;
  int max_count = 400;     // eigenvalues a window may hold
  int jobs = 1;
  std::uint64_t seed = 7;
};

struct EigenEntry {
  double value = 0.0;
  double residual = 0.0;
  double r90 = 0.0;           // radius holding 90% of the mass
  int ell_x = 0;
  int k_y = 0;
  bool localized = false;     // r90 <= extent_x / 2
  bool embedded = false;
  bool checked_doubling = false;
  bool stable = false;        // reappears at doubled extent within the tolerance
  double doubled_value = 0.0;
  VecD vector;                // physical eigenfunction, unit L2 norm; not serialized
};

struct EigenReport {
  double a = 0.0, b = 0.0;
  double extent_x = 0.0;
  double doubled_extent = 0.0;
  std::string profile_id;
  std::string potential_id;
  int ell_x = 0, k_y = 0;
  double threshold = 0.0;         // global lambda_1^2 (k_y = 0)
  double sector_threshold = 0.0;  // bottom of the sector's essential spectrum
  int shifts = 0, krylov_dim = 0;
  int window_count = 0;           // from the inertia of the shifted operator
  std::vector<EigenEntry> entries;
  bool certificate = false;       // absence of bound states in the window
  std::string certificate_note;

  // Entries that survive the localization and doubling filters.
  std::vector<const EigenEntry*> bound_states() const;
};

// Negative inertia of S - sigma I: the number of eigenvalues below sigma.
int count_below(const SpMatD& S, double sigma);

EigenReport scan_eigenvalues(const DirichletOperator& H, double a, double b, const ScanOptions& opt = {});

// Marks each entry of `base` as stable if `doubled` has a localized entry
// within rel relative distance.
void apply_doubling(EigenReport& base, const EigenReport& doubled, double rel = 1e-3);

// Full pipeline on a profile: scan at extent_x and at 2 extent_x, filter,
// attach thresholds, classify.
EigenReport scan_domain(const ProfileSpec& profile, const GridSpec& grid, const PotentialField& V, int ell_x,
                        int k_y, double a, double b, const ScanOptions& opt = {});

// Sets embedded flags (value above the global threshold + tol, localized)
// and the absence certificate.
EigenReport classify_embedded(EigenReport report, double global_threshold, double tol = 1e-6);

// Mass radius of a cell field: smallest R with at least `fraction` of the
// mass in |x| < R (upper ends of the radial cell intervals).
double mass_radius(const WaveguideDomain& d, const VecD& u, double fraction = 0.9);

}  // namespace wglab
