#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "wglab/norms.hpp"
#include "wglab/operators.hpp"

using namespace wglab;

namespace {

DomainPtr flat_domain(double L = 8.0, double h = 0.1) {
  return build_domain(ProfileSpec::flat(CrossSection::interval(0, kPi)), testutil::radial_interval_grid(L, h, kPi / 16));
}

}  // namespace

TEST_CASE("zero field has zero norms") {
  auto d = flat_domain();
  GridFunction f(d);
  auto r = norm_report(f);
  CHECK(r.X == 0.0);
  CHECK(r.X1 == 0.0);
  CHECK(r.X2 == 0.0);
  CHECK(r.Xstar == 0.0);
  auto m = check_inequality(InequalityId::MCin1, {&f, &f});
  CHECK(m.margin == 0.0);
}

TEST_CASE("single dyadic shell gives one X* term") {
  auto d = flat_domain();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  GridFunction f(d);
  for (std::size_t c = 0; c < d->size(); ++c)
    if (d->radius(c) > 1.0 && d->radius(c) < 2.0) f.values[c] = Complex(nd(rng), nd(rng));
  CHECK(norm_Xstar(f) == doctest::Approx(std::sqrt(2.0) * l2_norm(f)).epsilon(1e-14));
  GridFunction g(d);
  for (std::size_t c = 0; c < d->size(); ++c)
    if (d->radius(c) > 2.0 && d->radius(c) < 4.0) g.values[c] = 1.0;
  CHECK(norm_Xstar(g) == doctest::Approx(2.0 * l2_norm(g)).epsilon(1e-14));
}

TEST_CASE("indicator of the unit ball: X attained at R = 1") {
  auto d = flat_domain();
  GridFunction f(d);
  double omega = 0.0;  // discrete cross-section measure
  for (std::size_t c = 0; c < d->size(); ++c) {
    if (d->radius(c) < 1.0) f.values[c] = 1.0;
  }
  omega = 15 * (kPi / 16);
  // Direct quadrature sweep: M(R) = vol(B_min(R,1)) |omega| for the exact shell volumes.
  double best = 0.0, best_R = 0.0;
  for (int k = 1; k <= 4000; ++k) {
    double R = k * 0.001;
    double rr = std::min(R, 1.0);
    double v = 4.0 * kPi / 3.0 * rr * rr * rr * omega / R;
    if (v > best) {
      best = v;
      best_R = R;
    }
  }
  auto rep = norm_report(f);
  CHECK(rep.X == doctest::Approx(std::sqrt(best)).epsilon(1e-12));
  CHECK(rep.R_X == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(best_R == doctest::Approx(1.0));
}

TEST_CASE("weighted norms") {
  auto d = flat_domain();
  std::mt19937_64 rng(5);
  auto f = testutil::random_field(d, rng);
  CHECK(weighted_norm(f, 0.0, 1.0) == doctest::Approx(l2_norm(f)).epsilon(1e-14));
  CHECK(weighted_norm_fixed(f, 0.0) == doctest::Approx(l2_norm(f)).epsilon(1e-14));

  GridFunction p(d);
  std::size_t c0 = 0;
  for (std::size_t c = 0; c < d->size(); ++c)
    if (d->radius(c) < d->radius(c0)) c0 = c;
  p.values[c0] = Complex(3.0, -4.0);
  double rc = d->radius(c0);
  CHECK(weighted_norm(p, 1.0, 1.0) ==
        doctest::Approx(5.0 * std::sqrt(d->weight(c0)) / std::sqrt(1.0 + rc * rc)).epsilon(1e-14));

  for (int t = 0; t < 20; ++t) {
    auto u = testutil::random_field(d, rng);
    double X = norm_X(u);
    for (double R : dyadic_radii(*d)) CHECK(weighted_norm(u, 1.0, R) <= 4.0 * X);
  }
}

TEST_CASE("homogeneity, comparison and monotonicity") {
  auto d = flat_domain();
  std::mt19937_64 rng(11);
  for (int t = 0; t < 20; ++t) {
    auto f = testutil::random_field(d, rng);
    auto a = norm_report(f);
    GridFunction g(d, f.values * Complex(-2.5, 1.5));
    auto b = norm_report(g);
    double s = std::abs(Complex(-2.5, 1.5));
    CHECK(std::abs(b.X - s * a.X) <= 1e-14 * s * a.X);
    CHECK(std::abs(b.X1 - s * a.X1) <= 1e-14 * s * a.X1);
    CHECK(std::abs(b.X2 - s * a.X2) <= 1e-14 * s * a.X2);
    CHECK(std::abs(b.Xstar - s * a.Xstar) <= 1e-14 * s * a.Xstar);
    CHECK(a.X1 <= a.X2);
    // Enlarging the support.
    GridFunction e = f;
    for (std::size_t c = 0; c < d->size(); ++c)
      if (e.values[c] == Complex(0.0)) e.values[c] = 0.1;
    CHECK(norm_X(e) >= a.X);
    CHECK(norm_Xstar(e) >= a.Xstar);
  }
}

TEST_CASE("inequality suite on random fields") {
  auto d = flat_domain(20.0, 0.1);
  std::mt19937_64 rng(17);
  for (int t = 0; t < 10; ++t) {
    auto f = testutil::random_field(d, rng);
    auto g = testutil::random_field(d, rng);
    auto h = testutil::random_field(d, rng);
    std::vector<MarginReport> reps;
    reps.push_back(check_inequality(InequalityId::MCin1, {&f, &g}));
    reps.push_back(check_inequality(InequalityId::MCin4, {&f, &g, &h}));
    reps.push_back(check_inequality(InequalityId::Comparnorm, {&f}));
    for (double R : {0.25, 1.0, 4.0}) {
      InequalityParams p;
      p.R = R;
      reps.push_back(check_inequality(InequalityId::MCin3, {&f, &g}, p));
      reps.push_back(check_inequality(InequalityId::MCin2, {&f, &g}, p));
      reps.push_back(check_inequality(InequalityId::MCtoweightX, {&f}, p));
      reps.push_back(check_inequality(InequalityId::MCtoweightX1, {&f}, p));
      reps.push_back(check_inequality(InequalityId::WeighttoMC, {&f}, p));
      for (double s : {0.5, 1.0, 3.0}) {
        p.s = s;
        reps.push_back(check_inequality(InequalityId::MCtoweightgen, {&f}, p));
      }
    }
    reps.push_back(check_inequality(InequalityId::Weight1, {&f}));
    for (const auto& r : reps) {
      INFO(inequality_name(r.id), " ", r.params, " lhs=", r.lhs, " rhs=", r.rhs);
      CHECK(r.margin >= -1e-10 * r.rhs);
    }
  }
}

TEST_CASE("arity is enforced") {
  auto d = flat_domain();
  GridFunction f(d);
  CHECK_THROWS_AS(check_inequality(InequalityId::MCin4, {&f, &f}), Error);
  try {
    check_inequality(InequalityId::MCin1, {&f});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ArityMismatch);
  }
}

TEST_CASE("radial and full-tensor L2 norms agree on radial fields") {
  auto prof = ProfileSpec::flat(CrossSection::interval(0, kPi));
  auto rad = build_domain(prof, testutil::radial_interval_grid(4.0, 0.1, kPi / 16));
  GridSpec fs;
  fs.mode = GridMode::FullTensor;
  fs.extent_x = 4.0;
  fs.h_x = 0.1;
  fs.h_y = kPi / 16;
  auto full = build_domain(prof, fs);
  auto fn = [](const CellPoint& p) { return Complex(std::exp(-p.r * p.r) * std::sin(p.y[0]), 0.0); };
  double a = l2_norm(sample(rad, fn));
  double b = l2_norm(sample(full, fn));
  CHECK(std::abs(a - b) <= 0.01 * a);
}

TEST_CASE("weight lemma on multiplication operators") {
  auto d = flat_domain(8.0, 0.1);
  VecD ind(d->size());
  for (std::size_t c = 0; c < d->size(); ++c) ind[c] = (d->radius(c) >= 1.0 && d->radius(c) <= 2.0) ? 1.0 : 0.0;
  LinearMap A;
  A.dim = ind.size();
  A.apply = [&](const VecC& v) -> VecC { return ind.cast<Complex>().cwiseProduct(v); };
  A.apply_adjoint = A.apply;
  std::vector<double> Rs{0.5, 1, 2, 4, 8};
  auto lb = lemma_weights_bound(*d, A, 2.0, 0.1, Rs, Rs);
  // Diagonal oracle: the norm is the largest pointwise factor on the support.
  double oracle = 0.0;
  for (double R : Rs)
    for (double S : Rs)
      for (std::size_t c = 0; c < d->size(); ++c)
        if (ind[c] > 0) {
          double r = d->radius(c);
          oracle = std::max(oracle, 1.0 / ((R + r * r / R) * (S + r * r / S)));
        }
  CHECK(lb.C0 <= 0.25);
  CHECK(lb.C0 == doctest::Approx(oracle).epsilon(1e-6));
  CHECK(std::isfinite(lb.ratio));
  CHECK(lb.ratio <= lb.proof_constant);

  LinearMap Z;
  Z.dim = ind.size();
  Z.apply = [](const VecC& v) -> VecC { return VecC::Zero(v.size()); };
  Z.apply_adjoint = Z.apply;
  auto z = lemma_weights_bound(*d, Z, 2.0, 0.1, Rs, Rs);
  CHECK(z.C0 == 0.0);
  CHECK(z.fixed_weight_norm == 0.0);
}

TEST_CASE("pairwise summation is order independent of chunking") {
  std::vector<double> v(1000);
  for (int i = 0; i < 1000; ++i) v[i] = 1.0 / (i + 1.0);
  double a = pairwise_sum(v);
  double b = pairwise_sum(std::span<const double>(v));
  CHECK(a == b);
}
