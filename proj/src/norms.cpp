#include "wglab/norms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

namespace wglab {

RadialMass::RadialMass(const WaveguideDomain& d, const std::vector<double>& cell_mass) : n_(d.spec().n) {
  // Cells of equal radial interval are merged with pairwise sums, skipping
  // zero masses, so the result does not depend on the cell order.
  std::vector<double> acc;
  if (d.layout().radial_x()) {
    // Radial layouts list cells column by column with increasing radius.
    for (std::size_t c = 0; c < d.size();) {
      std::size_t e = c;
      acc.clear();
      while (e < d.size() && d.x_column(e) == d.x_column(c)) {
        if (cell_mass[e] != 0.0) acc.push_back(cell_mass[e]);
        ++e;
      }
      if (!acc.empty()) {
        auto [a, b] = d.radial_interval(c);
        by_b_.push_back({a, b, pairwise_sum(acc)});
      }
      c = e;
    }
  } else {
    std::vector<Piece> raw;
    raw.reserve(d.size());
    for (std::size_t c = 0; c < d.size(); ++c) {
      if (cell_mass[c] == 0.0) continue;
      auto [a, b] = d.radial_interval(c);
      raw.push_back({a, b, cell_mass[c]});
    }
    std::stable_sort(raw.begin(), raw.end(),
                     [](const Piece& p, const Piece& q) { return p.b < q.b || (p.b == q.b && p.a < q.a); });
    for (std::size_t k = 0; k < raw.size();) {
      std::size_t e = k;
      acc.clear();
      while (e < raw.size() && raw[e].a == raw[k].a && raw[e].b == raw[k].b) acc.push_back(raw[e++].m);
      by_b_.push_back({raw[k].a, raw[k].b, pairwise_sum(acc)});
      k = e;
    }
  }
  prefix_.assign(by_b_.size() + 1, 0.0L);
  std::vector<double> ms;
  ms.reserve(by_b_.size());
  for (std::size_t k = 0; k < by_b_.size(); ++k) {
    prefix_[k + 1] = prefix_[k] + by_b_[k].m;
    width_ = std::max(width_, by_b_[k].b - by_b_[k].a);
    b_max_ = std::max(b_max_, by_b_[k].b);
    ms.push_back(by_b_[k].m);
  }
  total_ = pairwise_sum(ms);
}

double RadialMass::fraction(const Piece& p, double lo, double hi) const {
  if (hi <= p.a || lo >= p.b || hi <= lo) return 0.0;
  if (lo <= p.a && hi >= p.b) return 1.0;
  double l = std::max(lo, p.a);
  double h = std::min(hi, p.b);
  return (std::pow(h, n_) - std::pow(l, n_)) / (std::pow(p.b, n_) - std::pow(p.a, n_));
}

double RadialMass::ball(double R) const {
  if (by_b_.empty() || R <= 0) return 0.0;
  auto it = std::upper_bound(by_b_.begin(), by_b_.end(), R, [](double v, const Piece& p) { return v < p.b; });
  std::size_t k = static_cast<std::size_t>(it - by_b_.begin());
  long double s = prefix_[k];
  for (std::size_t q = k; q < by_b_.size() && by_b_[q].b < R + width_ + 1e-300; ++q) {
    if (by_b_[q].a < R) s += by_b_[q].m * fraction(by_b_[q], 0.0, R);
  }
  return static_cast<double>(s);
}

double RadialMass::shell(double lo, double hi) const {
  if (by_b_.empty() || hi <= lo) return 0.0;
  auto it = std::upper_bound(by_b_.begin(), by_b_.end(), lo, [](double v, const Piece& p) { return v < p.b; });
  std::vector<double> parts;
  for (auto q = it; q != by_b_.end() && q->b < hi + width_ + 1e-300; ++q) {
    double f = fraction(*q, lo, hi);
    if (f > 0) parts.push_back(q->m * f);
  }
  return pairwise_sum(parts);
}

std::pair<double, double> RadialMass::morrey_sup(double s) const {
  if (by_b_.empty()) return {0.0, 0.0};
  std::vector<double> pts;
  pts.reserve(2 * by_b_.size());
  for (const auto& p : by_b_) {
    if (p.a > 0) pts.push_back(p.a);
    pts.push_back(p.b);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  double best = 0.0, best_R = pts.front();
  auto consider = [&](double R) {
    double v = ball(R) / std::pow(R, s);
    if (v > best) {
      best = v;
      best_R = R;
    }
  };
  for (double R : pts) consider(R);
  if (s > n_) {
    // M = A + B R^n between breakpoints; R^{-s} M can peak inside a gap.
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
      double t0 = pts[k], t1 = pts[k + 1];
      double B = 0.0;
      for (const auto& p : by_b_)
        if (p.a <= t0 && p.b >= t1) B += p.m / (std::pow(p.b, n_) - std::pow(p.a, n_));
      if (B <= 0) continue;
      double A = ball(t0) - B * std::pow(t0, n_);
      double q = s * A / ((n_ - s) * B);
      if (q <= 0) continue;
      double Rs = std::pow(q, 1.0 / n_);
      if (Rs > t0 && Rs < t1) consider(Rs);
    }
  }
  return {best, best_R};
}

std::vector<double> cell_mass(const GridFunction& f) {
  const auto& w = f.domain->weights();
  std::vector<double> m(f.size());
  for (std::size_t c = 0; c < m.size(); ++c) m[c] = w[c] * std::norm(f.values[c]);
  return m;
}

namespace {

double xstar_of(const RadialMass& rm, double h) {
  if (rm.total() == 0.0) return 0.0;
  int j_hi = static_cast<int>(std::ceil(std::log2(rm.max_radius()))) + 1;
  int j_floor = static_cast<int>(std::floor(std::log2(h))) - 1;
  std::vector<double> terms;
  for (int j = j_hi; j > j_hi - 400; --j) {
    double lo = std::ldexp(1.0, j - 1), hi = std::ldexp(1.0, j);
    double m = rm.shell(lo, hi);
    double t = std::ldexp(1.0, 0) * std::sqrt(std::ldexp(1.0, j) * m);
    terms.push_back(t);
    if (j < j_floor) {
      double sofar = 0.0;
      for (double v : terms) sofar += v;
      if (t <= 1e-18 * sofar) break;
    }
  }
  std::reverse(terms.begin(), terms.end());
  return pairwise_sum(terms);
}

double x2_of(const WaveguideDomain& d, const RadialMass& rm, double* at) {
  const double h = d.spec().h_x;
  std::vector<double> cand(d.radii());
  for (double R : dyadic_radii(d)) cand.push_back(R);
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  double best = 0.0, best_R = cand.empty() ? 0.0 : cand.front();
  for (double R : cand) {
    double v = rm.shell(std::max(0.0, R - 0.5 * h), R + 0.5 * h) / (h * R * R);
    if (v > best) {
      best = v;
      best_R = R;
    }
  }
  if (at) *at = best_R;
  return std::sqrt(best);
}

}  // namespace

NormReport norm_report(const GridFunction& f) {
  const WaveguideDomain& d = *f.domain;
  RadialMass rm(d, cell_mass(f));
  NormReport r;
  auto x = rm.morrey_sup(1.0);
  auto x1 = rm.morrey_sup(3.0);
  r.X = std::sqrt(x.first);
  r.R_X = x.second;
  r.X1 = std::sqrt(x1.first);
  r.R_X1 = x1.second;
  r.X2 = x2_of(d, rm, &r.R_X2);
  r.Xstar = xstar_of(rm, d.spec().h_x);
  return r;
}

double norm_X_mass(const WaveguideDomain& d, const std::vector<double>& mass) {
  return std::sqrt(RadialMass(d, mass).morrey_sup(1.0).first);
}
double norm_X1_mass(const WaveguideDomain& d, const std::vector<double>& mass) {
  return std::sqrt(RadialMass(d, mass).morrey_sup(3.0).first);
}
double norm_Xstar_mass(const WaveguideDomain& d, const std::vector<double>& mass) {
  return xstar_of(RadialMass(d, mass), d.spec().h_x);
}

double norm_X(const GridFunction& f) { return norm_X_mass(*f.domain, cell_mass(f)); }
double norm_X1(const GridFunction& f) { return norm_X1_mass(*f.domain, cell_mass(f)); }
double norm_Xstar(const GridFunction& f) { return norm_Xstar_mass(*f.domain, cell_mass(f)); }
double norm_X2(const GridFunction& f) {
  RadialMass rm(*f.domain, cell_mass(f));
  return x2_of(*f.domain, rm, nullptr);
}

double weighted_norm(const GridFunction& f, double s, double R) {
  if (!(R > 0)) fail(ErrorCode::InvalidArgument, "weight radius must be positive");
  const auto& w = f.domain->weights();
  const auto& r = f.domain->radii();
  std::vector<double> t(f.size());
  for (std::size_t c = 0; c < t.size(); ++c) t[c] = w[c] * std::norm(f.values[c]) * std::pow(R + r[c] * r[c] / R, -s);
  return std::sqrt(pairwise_sum(t));
}

double weighted_norm_fixed(const GridFunction& f, double s) {
  const auto& w = f.domain->weights();
  const auto& r = f.domain->radii();
  std::vector<double> t(f.size());
  for (std::size_t c = 0; c < t.size(); ++c) t[c] = w[c] * std::norm(f.values[c]) * std::pow(1.0 + r[c] * r[c], -s);
  return std::sqrt(pairwise_sum(t));
}

std::vector<double> dyadic_radii(const WaveguideDomain& d, int below) {
  double lo = d.spec().h_x;
  double hi = 0.0;
  for (std::size_t c = 0; c < d.size(); ++c) hi = std::max(hi, d.radial_interval(c).second);
  std::vector<double> out;
  int j0 = static_cast<int>(std::floor(std::log2(lo))) - below;
  int j1 = static_cast<int>(std::ceil(std::log2(hi)));
  for (int j = j0; j <= j1; ++j) out.push_back(std::ldexp(1.0, j));
  return out;
}

const char* inequality_name(InequalityId id) {
  switch (id) {
    case InequalityId::MCin1: return "MCin1";
    case InequalityId::MCin3: return "MCin3";
    case InequalityId::MCin4: return "MCin4";
    case InequalityId::MCin2: return "MCin2";
    case InequalityId::Comparnorm: return "comparnorm";
    case InequalityId::MCtoweightgen: return "MCtoweightgen";
    case InequalityId::MCtoweightX: return "MCtoweight_X";
    case InequalityId::MCtoweightX1: return "MCtoweight_X1";
    case InequalityId::WeighttoMC: return "weighttoMC";
    case InequalityId::Weight1: return "weight1";
  }
  return "?";
}

int inequality_arity(InequalityId id) {
  switch (id) {
    case InequalityId::MCin1:
    case InequalityId::MCin3:
    case InequalityId::MCin2: return 2;
    case InequalityId::MCin4: return 3;
    default: return 1;
  }
}

double weight1_constant(double gamma, double eps) {
  double geo = 1.0 / (1.0 - std::pow(2.0, -2.0 * eps));
  return std::sqrt((1.0 + std::pow(2.0, gamma)) * geo * std::pow(2.0, gamma));
}

double lemma_input_constant(double gamma, double eps) {
  double geo = 1.0 / (1.0 - std::pow(2.0, -2.0 * eps));
  return std::sqrt(std::pow(2.0, gamma) + std::pow(2.0, 2.0 * gamma) * geo);
}

MarginReport check_inequality(InequalityId id, const std::vector<const GridFunction*>& fields,
                              const InequalityParams& p) {
  if (static_cast<int>(fields.size()) != inequality_arity(id))
    fail(ErrorCode::ArityMismatch, fmt::format("{} takes {} fields, got {}", inequality_name(id),
                                               inequality_arity(id), fields.size()));
  for (const auto* f : fields)
    if (!f || f->domain != fields[0]->domain) fail(ErrorCode::InvalidArgument, "fields must share one domain");
  const GridFunction& f = *fields[0];
  const WaveguideDomain& d = *f.domain;
  const auto& w = d.weights();

  auto product_mass = [&](std::size_t k) {
    std::vector<double> m(d.size());
    for (std::size_t c = 0; c < m.size(); ++c) {
      double v = w[c];
      for (std::size_t q = 0; q < k; ++q) v *= std::abs(fields[q]->values[c]);
      m[c] = v;
    }
    return m;
  };

  MarginReport rep;
  rep.id = id;
  switch (id) {
    case InequalityId::MCin1: {
      rep.lhs = pairwise_sum(product_mass(2));
      rep.constant = 1.0;
      rep.rhs = norm_X(f) * norm_Xstar(*fields[1]);
      break;
    }
    case InequalityId::MCin3: {
      rep.lhs = RadialMass(d, product_mass(2)).shell(p.R, 2.0 * p.R);
      rep.constant = 4.0;
      rep.rhs = 4.0 * p.R * p.R * norm_X(f) * norm_X1(*fields[1]);
      rep.params = fmt::format("R={:.17g}", p.R);
      break;
    }
    case InequalityId::MCin4: {
      rep.lhs = pairwise_sum(product_mass(3));
      double sup = 0.0;
      for (std::size_t c = 0; c < d.size(); ++c)
        sup = std::max(sup, std::abs(fields[2]->values[c]) * d.radial_interval(c).second);
      rep.constant = 2.0;
      rep.rhs = 2.0 * norm_X1(f) * norm_Xstar(*fields[1]) * sup;
      break;
    }
    case InequalityId::MCin2: {
      rep.lhs = RadialMass(d, product_mass(2)).ball(p.R);
      rep.constant = 2.0;
      rep.rhs = 2.0 * p.R * norm_X1(f) * norm_Xstar(*fields[1]);
      rep.params = fmt::format("R={:.17g}", p.R);
      break;
    }
    case InequalityId::Comparnorm: {
      rep.lhs = norm_X1(f);
      rep.rhs = norm_X2(f);
      rep.constant = 1.0;
      break;
    }
    case InequalityId::MCtoweightgen: {
      double wn = weighted_norm(f, p.s, p.R);
      rep.lhs = wn * wn;
      rep.constant = std::pow(2.0, 4.0 * p.s) / (std::pow(2.0, p.s) - 1.0);
      rep.rhs = rep.constant * RadialMass(d, cell_mass(f)).morrey_sup(p.s).first;
      rep.params = fmt::format("R={:.17g};s={:.17g}", p.R, p.s);
      break;
    }
    case InequalityId::MCtoweightX: {
      rep.lhs = weighted_norm(f, 1.0, p.R);
      rep.constant = 4.0;
      rep.rhs = 4.0 * norm_X(f);
      rep.params = fmt::format("R={:.17g}", p.R);
      break;
    }
    case InequalityId::MCtoweightX1: {
      rep.lhs = weighted_norm(f, 3.0, p.R);
      rep.constant = 10.0;
      rep.rhs = 10.0 * norm_X1(f);
      rep.params = fmt::format("R={:.17g}", p.R);
      break;
    }
    case InequalityId::WeighttoMC: {
      rep.lhs = norm_Xstar(f);
      rep.constant = 16.0;
      rep.rhs = 16.0 * weighted_norm(f, -1.0, p.R);
      rep.params = fmt::format("R={:.17g}", p.R);
      break;
    }
    case InequalityId::Weight1: {
      rep.lhs = weighted_norm_fixed(f, 0.5 * p.gamma + p.eps);
      std::vector<double> Rs = p.R_set.empty() ? dyadic_radii(d) : p.R_set;
      double sup = 0.0;
      for (double R : Rs) sup = std::max(sup, weighted_norm(f, p.gamma, R));
      rep.constant = weight1_constant(p.gamma, p.eps);
      rep.rhs = rep.constant * sup;
      rep.params = fmt::format("gamma={:.17g};eps={:.17g};radii={}", p.gamma, p.eps, Rs.size());
      break;
    }
  }
  rep.margin = rep.rhs - rep.lhs;
  return rep;
}

double operator_norm(const LinearMap& A, double tol, int max_iter, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  VecC v(A.dim);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = Complex(nd(rng), nd(rng));
  v /= v.norm();
  double prev = -1.0;
  for (int it = 0; it < max_iter; ++it) {
    VecC Av = A.apply(v);
    double nAv = Av.norm();
    if (nAv == 0.0) {
      if (it == 0) return 0.0;
      return std::sqrt(std::max(prev, 0.0));
    }
    VecC w = A.apply_adjoint(Av);
    double est = nAv * nAv;  // <A*A v, v> with |v| = 1
    double nw = w.norm();
    if (nw == 0.0) return std::sqrt(est);
    v = w / nw;
    if (prev >= 0 && std::abs(est - prev) <= tol * est) return std::sqrt(est);
    prev = est;
  }
  fail(ErrorCode::PowerIterationStall, fmt::format("no convergence in {} iterations", max_iter));
}

LemmaBound lemma_weights_bound(const WaveguideDomain& d, const LinearMap& A, double gamma, double eps,
                               const std::vector<double>& R_set, const std::vector<double>& S_set) {
  if (!(gamma > 0) || !(eps > 0)) fail(ErrorCode::InvalidArgument, "gamma and eps must be positive");
  const auto& r = d.radii();
  const Eigen::Index N = static_cast<Eigen::Index>(d.size());
  auto diag = [&](auto&& fn) {
    VecD v(N);
    for (Eigen::Index c = 0; c < N; ++c) v[c] = fn(r[c]);
    return v;
  };
  LemmaBound out;
  for (double R : R_set) {
    VecD DR = diag([&](double x) { return std::pow(R + x * x / R, -0.5 * gamma); });
    for (double S : S_set) {
      VecD DS = diag([&](double x) { return std::pow(S + x * x / S, -0.5 * gamma); });
      LinearMap B;
      B.dim = N;
      B.apply = [&](const VecC& v) -> VecC { return DR.cwiseProduct(A.apply(DS.cwiseProduct(v))); };
      B.apply_adjoint = [&](const VecC& v) -> VecC { return DS.cwiseProduct(A.apply_adjoint(DR.cwiseProduct(v))); };
      double nb = operator_norm(B);
      if (nb > out.C0) {
        out.C0 = nb;
        out.R_at = R;
        out.S_at = S;
      }
    }
  }
  VecD D = diag([&](double x) { return std::pow(1.0 + x * x, -0.5 * (0.5 * gamma + eps)); });
  LinearMap F;
  F.dim = N;
  F.apply = [&](const VecC& v) -> VecC { return D.cwiseProduct(A.apply(D.cwiseProduct(v))); };
  F.apply_adjoint = [&](const VecC& v) -> VecC { return D.cwiseProduct(A.apply_adjoint(D.cwiseProduct(v))); };
  out.fixed_weight_norm = operator_norm(F);
  out.ratio = out.C0 > 0 ? out.fixed_weight_norm / out.C0 : 0.0;
  out.proof_constant = weight1_constant(gamma, eps) * lemma_input_constant(gamma, eps);
  return out;
}

std::string margin_csv_header() { return "id,lhs,rhs,margin,params"; }

std::string margin_csv_row(const MarginReport& m) {
  return fmt::format("{},{:.17g},{:.17g},{:.17g},{}", inequality_name(m.id), m.lhs, m.rhs, m.margin, m.params);
}

}  // namespace wglab
