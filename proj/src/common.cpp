#include "wglab/common.hpp"

#include <array>
#include <cmath>

namespace wglab {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyDomain: return "EmptyDomain";
    case ErrorCode::DisconnectedDomain: return "DisconnectedDomain";
    case ErrorCode::ProfileOutOfBounds: return "ProfileOutOfBounds";
    case ErrorCode::NoFlatTail: return "NoFlatTail";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::PowerIterationStall: return "PowerIterationStall";
    case ErrorCode::NegativePotential: return "NegativePotential";
    case ErrorCode::NotRadial: return "NotRadial";
    case ErrorCode::ModeMismatch: return "ModeMismatch";
    case ErrorCode::SolverBreakdown: return "SolverBreakdown";
    case ErrorCode::SpectrumHit: return "SpectrumHit";
    case ErrorCode::ZeroSource: return "ZeroSource";
    case ErrorCode::UnderResolved: return "UnderResolved";
    case ErrorCode::EigenIterationStall: return "EigenIterationStall";
    case ErrorCode::EigenbasisIncomplete: return "EigenbasisIncomplete";
    case ErrorCode::BoxTooSmall: return "BoxTooSmall";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::Unsupported: return "Unsupported";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

namespace {

template <class T>
T tree_sum(const T* p, std::size_t n) {
  if (n <= 16) {
    T s{};
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    return s;
  }
  std::size_t half = n / 2;
  return tree_sum(p, half) + tree_sum(p + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> v) { return tree_sum(v.data(), v.size()); }
double pairwise_sum(const std::vector<double>& v) { return tree_sum(v.data(), v.size()); }
Complex pairwise_sum(std::span<const Complex> v) { return tree_sum(v.data(), v.size()); }

double sphere_area(int n) {
  static const auto table = [] {
    std::array<double, 33> t{};
    for (int k = 1; k < 33; ++k) t[k] = 2.0 * std::pow(kPi, 0.5 * k) / std::tgamma(0.5 * k);
    return t;
  }();
  if (n >= 1 && n < 33) return table[n];
  return 2.0 * std::pow(kPi, 0.5 * n) / std::tgamma(0.5 * n);
}

double ball_volume(int n) { return sphere_area(n) / n; }

}  // namespace wglab
