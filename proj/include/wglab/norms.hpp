#pragma once

#include <functional>
#include <string>
#include <vector>

#include "wglab/grid_function.hpp"

namespace wglab {

// Radial mass distribution of a nonnegative cell density. Each cell spreads
// its mass over its radial interval [a, b] with density proportional to
// rho^{n-1}; every Morrey-Campanato quantity below is evaluated exactly for
// this measure, so shell-wise inequalities transfer to the discrete sums.
class RadialMass {
 public:
  RadialMass(const WaveguideDomain& d, const std::vector<double>& cell_mass);

  double total() const { return total_; }
  // Mass inside |x| < R.
  double ball(double R) const;
  // Mass inside lo <= |x| < hi.
  double shell(double lo, double hi) const;
  // sup_R R^{-s} M(R) over R > 0 and the radius attaining it.
  std::pair<double, double> morrey_sup(double s) const;
  double max_radius() const { return b_max_; }

 private:
  struct Piece {
    double a, b, m;
  };
  double fraction(const Piece& p, double lo, double hi) const;

  int n_;
  std::vector<Piece> by_b_;           // sorted by b
  std::vector<long double> prefix_;   // prefix_[k] = mass of by_b_[0..k)
  double width_ = 0.0;
  double total_ = 0.0;
  double b_max_ = 0.0;
};

std::vector<double> cell_mass(const GridFunction& f);

struct NormReport {
  double X = 0.0;
  double X1 = 0.0;
  double X2 = 0.0;
  double Xstar = 0.0;
  double R_X = 0.0;
  double R_X1 = 0.0;
  double R_X2 = 0.0;
};

NormReport norm_report(const GridFunction& f);
double norm_X(const GridFunction& f);
double norm_X1(const GridFunction& f);
double norm_X2(const GridFunction& f);
double norm_Xstar(const GridFunction& f);
// Norms of a real nonnegative cell density |f|^2 W given directly.
double norm_X_mass(const WaveguideDomain& d, const std::vector<double>& mass);
double norm_X1_mass(const WaveguideDomain& d, const std::vector<double>& mass);
double norm_Xstar_mass(const WaveguideDomain& d, const std::vector<double>& mass);

// <x>_R = (R + |x|^2/R)^{1/2}; <x> = (1 + |x|^2)^{1/2}.
inline double bracket_R(double r, double R) { return std::sqrt(R + r * r / R); }
inline double bracket(double r) { return std::sqrt(1.0 + r * r); }

// ||<x>_R^{-s} f|| (midpoint weights).
double weighted_norm(const GridFunction& f, double s, double R);
// ||<x>^{-s} f||.
double weighted_norm_fixed(const GridFunction& f, double s);

// Dyadic radii 2^j inside the radial range of the domain.
std::vector<double> dyadic_radii(const WaveguideDomain& d, int below = 0);

enum class InequalityId {
  MCin1,
  MCin3,
  MCin4,
  MCin2,
  Comparnorm,
  MCtoweightgen,
  MCtoweightX,
  MCtoweightX1,
  WeighttoMC,
  Weight1,
};

const char* inequality_name(InequalityId id);
int inequality_arity(InequalityId id);

struct InequalityParams {
  double R = 1.0;
  double s = 1.0;
  double gamma = 2.0;
  double eps = 0.1;
  std::vector<double> R_set;  // Weight1: radii for the sup (dyadic by default)
};

struct MarginReport {
  InequalityId id = InequalityId::MCin1;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  double constant = 0.0;
  std::string params;
};

MarginReport check_inequality(InequalityId id, const std::vector<const GridFunction*>& fields,
                              const InequalityParams& p = {});

// Constant of the fixed-weight inequality assembled from its proof:
// C^2 = (1 + 2^gamma) * sum_j 2^{-2 j eps} * 2^gamma.
double weight1_constant(double gamma, double eps);
// Constant of the dyadic splitting step on the input side of the weight lemma.
double lemma_input_constant(double gamma, double eps);

// Linear map on symmetric coordinates (w = sqrt(W) u); multiplication
// operators commute with the change of variables.
struct LinearMap {
  Eigen::Index dim = 0;
  std::function<VecC(const VecC&)> apply;
  std::function<VecC(const VecC&)> apply_adjoint;
};

double operator_norm(const LinearMap& A, double tol = 1e-8, int max_iter = 10000, std::uint64_t seed = 0);

struct LemmaBound {
  double C0 = 0.0;
  double R_at = 0.0;
  double S_at = 0.0;
  double fixed_weight_norm = 0.0;
  double ratio = 0.0;
  double proof_constant = 0.0;
};

LemmaBound lemma_weights_bound(const WaveguideDomain& d, const LinearMap& A, double gamma, double eps,
                               const std::vector<double>& R_set, const std::vector<double>& S_set);

std::string margin_csv_header();
std::string margin_csv_row(const MarginReport& m);

}  // namespace wglab
