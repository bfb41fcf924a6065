#include "wglab/morawetz.hpp"

#include <algorithm>
#include <cmath>

#include "wglab/common.hpp"

namespace wglab {

const char* weight_kind_name(WeightKind k) {
  return k == WeightKind::PositiveLambda ? "positive_lambda" : "nonpositive_lambda";
}

namespace {

void check_args(double R, int n) {
  if (!(R > 0.0)) fail(ErrorCode::InvalidArgument, "weight radius must be positive");
  if (n < 3) fail(ErrorCode::InvalidArgument, "weights need n >= 3");
}

// psi' on a branch, continued to any r > 0.
double branch_dpsi(WeightKind kind, double R, int n, double r, bool inner) {
  if (kind == WeightKind::PositiveLambda) return inner ? r / R : 1.0;
  const double nn = n;
  if (inner) return 1.0 / (2 * nn) + r / (2 * nn * R) - r * r * r / (2 * nn * (nn + 2) * R * R * R);
  return 1.0 / nn - std::pow(R / r, n - 1) / (2 * nn * (nn + 2));
}

}  // namespace

long double weight_branch_psi(WeightKind kind, double R, int n, long double r, bool inner) {
  using ld = long double;
  const ld RR = R;
  if (kind == WeightKind::PositiveLambda) return inner ? 0.5L * RR + r * r / (2 * RR) : r;
  const ld nn = n;
  auto psi_in = [&](ld s) {
    return s / (2 * nn) + s * s / (4 * nn * RR) - s * s * s * s / (8 * nn * (nn + 2) * RR * RR * RR);
  };
  if (inner) return psi_in(r);
  const ld c = std::pow(RR, static_cast<ld>(n - 1)) / (2 * nn * (nn + 2));
  return psi_in(RR) + (r - RR) / nn - c * (std::pow(RR, static_cast<ld>(2 - n)) - std::pow(r, static_cast<ld>(2 - n))) / (nn - 2);
}

WeightSample weight_at(WeightKind kind, double R, int n, double r) {
  check_args(R, n);
  if (!(r > 0.0)) fail(ErrorCode::InvalidArgument, "weights are evaluated at r > 0");
  const double nn = n;
  const double mu = (nn - 1) * (nn - 3);
  WeightSample s;
  s.r = r;
  s.inner = r <= R;
  s.psi = static_cast<double>(weight_branch_psi(kind, R, n, r, s.inner));
  s.dpsi = branch_dpsi(kind, R, n, r, s.inner);
  s.hess_tangent = s.dpsi / r;
  if (kind == WeightKind::PositiveLambda) {
    if (s.inner) {
      s.phi = 1.0 / R;
      s.hess_radial = 1.0 / R;
      s.lap = nn / R;
      s.neg_bilap = 0.0;
    } else {
      s.hess_radial = 0.0;
      s.lap = (nn - 1) / r;
      s.neg_bilap = mu / (r * r * r);
    }
  } else {
    const double R3 = R * R * R, r3 = r * r * r;
    if (s.inner) {
      s.hess_radial = 1.0 / (2 * nn * R) - 3 * r * r / (2 * nn * (nn + 2) * R3);
      s.lap = 1.0 / (2 * R) + (nn - 1) / (2 * nn * r) - r * r / (2 * nn * R3);
      s.neg_bilap = 1.0 / R3 + mu / (2 * nn * r3);
    } else {
      s.hess_radial = (nn - 1) * std::pow(R / r, n - 1) / (2 * nn * (nn + 2) * r);
      s.lap = (nn - 1) / (nn * r);
      s.neg_bilap = mu / (nn * r3);
    }
  }
  return s;
}

WeightEval morawetz_weights(WeightKind kind, double R, const std::vector<double>& radii, int n) {
  check_args(R, n);
  WeightEval w;
  w.kind = kind;
  w.R = R;
  w.n = n;
  w.grad_sup = kind == WeightKind::PositiveLambda ? 1.0 : 1.0 / n;
  w.samples.reserve(radii.size());
  for (double r : radii) {
    w.samples.push_back(weight_at(kind, R, n, r));
    if (r == R) ++w.branch_points;
  }
  return w;
}

WeightValidation validate_weights(const WeightEval& w, double h) {
  if (!(h > 0.0)) fail(ErrorCode::InvalidArgument, "finite-difference step must be positive");
  using ld = long double;
  WeightValidation v;
  const int n = w.n;
  const ld R = w.R;
  auto f = [&](ld r, bool inner) { return weight_branch_psi(w.kind, w.R, n, r, inner); };
  for (const auto& s : w.samples) {
    v.radial_sign = v.radial_sign && s.dpsi >= 0.0;
    if (s.r < 2 * h || std::abs(s.r - w.R) < 2 * h) continue;
    const ld r = s.r, hh = h;
    const bool in = s.inner;
    ld fm3 = f(r - 3 * hh, in), fm2 = f(r - 2 * hh, in), fm1 = f(r - hh, in), f0 = f(r, in);
    ld fp1 = f(r + hh, in), fp2 = f(r + 2 * hh, in), fp3 = f(r + 3 * hh, in);
    ld d1 = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * hh);
    ld d2 = (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * hh * hh);
    ld d3 = (fm3 - 8 * fm2 + 13 * fm1 - 13 * fp1 + 8 * fp2 - fp3) / (8 * hh * hh * hh);
    ld d4 = (-fm3 + 12 * fm2 - 39 * fm1 + 56 * f0 - 39 * fp1 + 12 * fp2 - fp3) / (6 * hh * hh * hh * hh);
    const ld nn = n, mu = (nn - 1) * (nn - 3);
    ld lap = d2 + (nn - 1) / r * d1;
    ld bilap = d4 + 2 * (nn - 1) / r * d3 + mu / (r * r) * d2 - mu / (r * r * r) * d1;
    double el = static_cast<double>(std::abs(lap - s.lap) / std::max<ld>(std::abs(s.lap), 1 / R));
    double eb = static_cast<double>(std::abs(-bilap - s.neg_bilap) / std::max<ld>(std::abs(s.neg_bilap), 1 / (R * R * R)));
    v.max_rel_lap = std::max(v.max_rel_lap, el);
    v.max_rel_bilap = std::max(v.max_rel_bilap, eb);
    ++v.checked;
  }
  v.continuity_defect = static_cast<double>(
      std::abs(weight_branch_psi(w.kind, w.R, n, w.R, true) - weight_branch_psi(w.kind, w.R, n, w.R, false)));
  v.c1_defect = std::abs(branch_dpsi(w.kind, w.R, n, w.R, true) - branch_dpsi(w.kind, w.R, n, w.R, false));
  return v;
}

}  // namespace wglab
