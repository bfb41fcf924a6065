#pragma once

#include <vector>

namespace wglab {

// Radial multiplier weights psi(|x|), phi(|x|) for the virial identity.
//
// PositiveLambda:    psi = |x| outside R, R/2 + |x|^2/(2R) inside; phi = 1/R inside.
// NonpositiveLambda: psi' = alpha with alpha -> 1/n at infinity; phi = 0.
enum class WeightKind { PositiveLambda, NonpositiveLambda };

const char* weight_kind_name(WeightKind k);

struct WeightSample {
  double r = 0.0;
  double psi = 0.0;
  double phi = 0.0;
  double dpsi = 0.0;          // radial derivative
  double lap = 0.0;           // Delta psi
  double neg_bilap = 0.0;     // -Delta^2 psi (absolutely continuous part)
  double hess_radial = 0.0;   // psi''
  double hess_tangent = 0.0;  // psi' / r
  bool inner = false;         // evaluated with the r < R branch
};

struct WeightEval {
  WeightKind kind = WeightKind::PositiveLambda;
  double R = 1.0;
  int n = 3;
  std::vector<WeightSample> samples;
  double grad_sup = 0.0;       // sup of |grad psi| over r > 0
  std::size_t branch_points = 0;  // samples at r == R (left branch)
};

// Closed forms; r == R is evaluated with the inner branch.
WeightSample weight_at(WeightKind kind, double R, int n, double r);
// psi on the branch selected by `inner`, continued to any real r. Extended
// precision so that finite-difference checks are not limited by rounding.
long double weight_branch_psi(WeightKind kind, double R, int n, long double r, bool inner);

WeightEval morawetz_weights(WeightKind kind, double R, const std::vector<double>& radii, int n = 3);

struct WeightValidation {
  double max_rel_lap = 0.0;
  double max_rel_bilap = 0.0;
  double continuity_defect = 0.0;  // |psi_in(R) - psi_out(R)|
  double c1_defect = 0.0;          // |psi'_in(R) - psi'_out(R)|
  bool radial_sign = true;         // psi' >= 0 at every sample
  std::size_t checked = 0;
};

// Compares Delta psi and Delta^2 psi with five- and seven-point finite
// differences (step h) of the branch-wise psi, on samples in [2h, inf)
// excluding (R - 2h, R + 2h).
WeightValidation validate_weights(const WeightEval& w, double h);

}  // namespace wglab
