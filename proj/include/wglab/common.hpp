#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace wglab {

using Complex = std::complex<double>;
using VecD = Eigen::VectorXd;
using VecC = Eigen::VectorXcd;
using SpMatD = Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t>;
using SpMatC = Eigen::SparseMatrix<Complex, Eigen::ColMajor, int>;

inline constexpr double kPi = 3.14159265358979323846;

enum class ErrorCode {
  EmptyDomain,
  DisconnectedDomain,
  ProfileOutOfBounds,
  NoFlatTail,
  ArityMismatch,
  PowerIterationStall,
  NegativePotential,
  NotRadial,
  ModeMismatch,
  SolverBreakdown,
  SpectrumHit,
  ZeroSource,
  UnderResolved,
  EigenIterationStall,
  EigenbasisIncomplete,
  BoxTooSmall,
  ConfigInvalid,
  MissingArtifact,
  Unsupported,
  InvalidArgument,
  Io,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

// Pairwise (tree) summation with a fixed split rule, so results do not
// depend on how callers chunk the work.
double pairwise_sum(std::span<const double> v);
double pairwise_sum(const std::vector<double>& v);
Complex pairwise_sum(std::span<const Complex> v);

// Volume of the unit sphere S^{n-1} in R^n.
double sphere_area(int n);
// Volume of the unit ball in R^n.
double ball_volume(int n);

}  // namespace wglab
