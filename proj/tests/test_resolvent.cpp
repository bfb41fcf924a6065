#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "test_util.hpp"
#include "wglab/resolvent.hpp"

using namespace wglab;

namespace {

DomainPtr flat(double L, double hx, double hy) {
  return build_domain(ProfileSpec::flat(CrossSection::interval(0, kPi)), testutil::radial_interval_grid(L, hx, hy));
}

// Expanding profile: narrow core, g' >= 0, perturbation radius L/8 up to 2.
DomainPtr expanding(double L, double hx, double hy) {
  const double w = std::min(2.0, L / 8);
  return build_domain(ProfileSpec::radial(ScaleFunction::bump(1.0, -0.3, w), CrossSection::interval(0, kPi)),
                      testutil::radial_interval_grid(L, hx, hy));
}

GridFunction bump_source(DomainPtr d, double c, double w) {
  return sample(d, [&](const CellPoint& p) -> Complex {
    double s = (p.r - c) / w;
    if (std::abs(s) >= 1) return 0.0;
    return bump_function(std::abs(s)) * Complex(std::sin(p.y[0]) + 0.3 * std::cos(2 * p.y[0]), 0.2 * std::sin(3 * p.y[0]));
  });
}

double rel(const VecC& a, const VecC& b) { return (a - b).norm() / b.norm(); }

// Dense oracle in symmetric coordinates.
VecC dense_solve(const DirichletOperator& H, Complex z, const GridFunction& f) {
  Eigen::MatrixXcd A = Eigen::MatrixXd(Eigen::SparseMatrix<double>(H.S)).cast<Complex>();
  A.diagonal().array() -= z;
  VecC sw = H.sqrt_weight.cast<Complex>();
  VecC w = A.partialPivLu().solve(VecC(sw.cwiseProduct(f.values)));
  return w.cwiseQuotient(sw);
}

}  // namespace

TEST_CASE("manufactured solution") {
  auto d = expanding(8.0, 0.2, kPi / 8);
  auto H = assemble_hamiltonian(d);
  auto g = bump_source(d, 2.0, 1.5);
  for (SpectralPoint z : {SpectralPoint{1.5, 0.1}, SpectralPoint{-2.0, 0.0}, SpectralPoint{3.0, -0.01}}) {
    GridFunction f(d, H.apply(g.values) - z.z() * g.values);
    auto s = solve_resolvent(H, z, f);
    CHECK(s.residual <= 1e-10);
    CHECK(rel(s.u.values, g.values) <= 1e-8);
  }
}

TEST_CASE("negative spectral parameter contracts") {
  auto d = flat(6.0, 0.2, kPi / 8);
  auto H = assemble_hamiltonian(d);
  std::mt19937_64 rng(2);
  for (int t = 0; t < 5; ++t) {
    auto f = testutil::random_field(d, rng);
    auto s = solve_resolvent(H, {-1.0, 0.0}, f);
    CHECK(l2_norm(s.u) <= l2_norm(f));
  }
}

TEST_CASE("direct, Krylov and condensed solves match a dense solve") {
  auto d = expanding(24.0, 0.2, kPi / 8);
  REQUIRE(d->size() <= 2000);
  auto H = assemble_hamiltonian(d);
  auto f = bump_source(d, 1.0, 1.0);
  for (SpectralPoint z : {SpectralPoint{0.5, 1.0}, SpectralPoint{2.5, 0.3}, SpectralPoint{5.0, 0.05}}) {
    VecC ref = dense_solve(H, z.z(), f);
    SolveOptions o;
    o.method = SolveMethod::Direct;
    CHECK(rel(solve_resolvent(H, z, f, o).u.values, ref) <= 1e-10);
    o.method = SolveMethod::Condensed;
    auto c = solve_resolvent(H, z, f, o);
    CHECK(c.stats.method == "condensed");
    CHECK(rel(c.u.values, ref) <= 1e-10);
    o.method = SolveMethod::Krylov;
    o.max_iter = 50000;
    auto k = solve_resolvent(H, z, f, o);
    CHECK(k.stats.method == "cocg");
    CHECK(rel(k.u.values, ref) <= 1e-8);
  }
}

TEST_CASE("tail detection finds the last change of the cross-section") {
  auto d = expanding(24.0, 0.2, kPi / 8);
  auto H = assemble_hamiltonian(d);
  TailStructure t;
  REQUIRE(detect_tail(H, t));
  // Independent count: first layer from which every column mask equals the
  // outermost one (masks are nested, so cell counts decide).
  std::vector<int> per_layer(d->layout().dims()[0], 0);
  for (std::size_t c = 0; c < d->size(); ++c) per_layer[d->x_column(c)]++;
  int k_mask = static_cast<int>(per_layer.size()) - 1;
  while (k_mask > 0 && per_layer[k_mask - 1] == per_layer.back()) --k_mask;
  CHECK(t.K == k_mask);
  CHECK(t.tau.size() == per_layer.back());
  // A radial potential only shifts layers; a y-dependent one extends the core.
  auto Hr = assemble_hamiltonian(d, PotentialField::gaussian_inverse_r(1.0, 4.0));
  TailStructure tv;
  REQUIRE(detect_tail(Hr, tv));
  CHECK(tv.K == t.K);
  std::vector<double> vs(d->size());
  for (std::size_t c = 0; c < d->size(); ++c) {
    auto p = cell_point(*d, c);
    vs[c] = p.r < 5.0 ? 1.0 + std::sin(p.y[0]) : 0.0;
  }
  REQUIRE(detect_tail(assemble_hamiltonian(d, PotentialField::from_samples(vs)), tv));
  CHECK(tv.K == 25);
  auto full = assemble_hamiltonian(
      build_domain(ProfileSpec::flat(CrossSection::interval(0, kPi)),
                   [] {
                     GridSpec g;
                     g.mode = GridMode::FullTensor;
                     g.extent_x = 1.0;
                     g.h_x = 0.25;
                     g.h_y = kPi / 4;
                     return g;
                   }()));
  CHECK_FALSE(detect_tail(full, tv));
}

TEST_CASE("energy identities") {
  auto d = expanding(12.0, 0.2, kPi / 8);
  auto H = assemble_hamiltonian(d, PotentialField::gaussian_inverse_r(0.5, 1.0));
  std::mt19937_64 rng(9);
  for (int t = 0; t < 6; ++t) {
    auto f = testutil::random_field(d, rng);
    SpectralPoint z{-3.0 + 1.5 * t, t % 2 ? 0.01 : 1.0};
    auto s = solve_resolvent(H, z, f);
    auto e = energy_identity_check(H, s);
    CHECK(e.im_defect <= 1e-9 * e.scale);
    CHECK(e.re_defect <= 1e-9 * e.scale);
    // Cauchy-Schwarz consequence of the imaginary identity.
    CHECK(z.eps * l2_norm(s.u) <= l2_norm(f) * (1 + 1e-12));
  }
  GridFunction zero(d);
  auto s0 = solve_resolvent(H, {1.0, 0.5}, zero);
  CHECK(s0.u.values.norm() == 0.0);
  auto e0 = energy_identity_check(H, s0);
  CHECK(e0.im_defect == 0.0);
  CHECK(e0.re_defect == 0.0);
}

TEST_CASE("energy defects scale with the residual of an unconverged solve") {
  auto d = expanding(12.0, 0.2, kPi / 8);
  auto H = assemble_hamiltonian(d);
  auto f = bump_source(d, 1.0, 1.0);
  auto s = solve_resolvent(H, {2.0, 0.2}, f);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  VecC dir(s.u.values.size());
  for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = s.u.values[i] * nd(rng);
  double prev_im = 0, prev_re = 0, prev_res = 0;
  for (double level : {1e-2, 1e-4}) {
    ResolventSolve bad = s;
    bad.u.values += level * dir;
    bad.residual = resolvent_residual(H, bad.z, bad.f, bad.u);
    auto e = energy_identity_check(H, bad);
    // Both defects are components of <r, u>, bounded by ||r|| ||u||.
    double bound = bad.residual * e.scale;
    CHECK(e.im_defect <= bound * (1 + 1e-9));
    CHECK(e.re_defect <= bound * (1 + 1e-9));
    CHECK(e.im_defect > 1e-9 * e.scale);
    if (prev_res > 0) {
      CHECK(prev_res / bad.residual == doctest::Approx(100).epsilon(0.05));
      CHECK(e.im_defect < prev_im);
      CHECK(e.re_defect < prev_re);
    }
    prev_im = e.im_defect;
    prev_re = e.re_defect;
    prev_res = bad.residual;
  }
}

TEST_CASE("conjugate symmetry and the first resolvent identity") {
  auto d = expanding(10.0, 0.2, kPi / 8);
  auto H = assemble_hamiltonian(d);
  auto f = bump_source(d, 1.5, 1.0);
  SpectralPoint z1{2.0, 0.3}, z2{0.5, 0.7};
  auto a = solve_resolvent(H, z1, f);
  GridFunction fc(d, f.values.conjugate());
  auto b = solve_resolvent(H, {z1.lambda, -z1.eps}, fc);
  CHECK(rel(b.u.values, a.u.values.conjugate()) <= 1e-10);

  auto r2 = solve_resolvent(H, z2, f);
  auto r12 = solve_resolvent(H, z1, r2.u);
  VecC lhs = a.u.values - r2.u.values;
  VecC rhs = (z1.z() - z2.z()) * r12.u.values;
  CHECK(rel(lhs, rhs) <= 1e-8);
}

TEST_CASE("real spectral parameter on an eigenvalue") {
  auto d = flat(3.0, 0.25, kPi / 4);
  auto H = assemble_hamiltonian(d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(Eigen::SparseMatrix<double>(H.S)));
  double lam = es.eigenvalues()[0];
  auto f = bump_source(d, 0.5, 1.0);
  try {
    solve_resolvent(H, {lam, 0.0}, f);
    FAIL("expected SpectrumHit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SpectrumHit);
  }
  // Slightly below the bottom the real solve is fine.
  CHECK(solve_resolvent(H, {lam - 0.5, 0.0}, f).residual <= 1e-10);
}

TEST_CASE("gradient magnitude") {
  auto d = flat(4.0, 0.1, kPi / 16);
  auto lin = sample(d, [](const CellPoint& p) -> Complex { return 2.0 * p.r; });
  auto g = grad_x_magnitude(lin);
  int idx[4];
  for (std::size_t c = 0; c < d->size(); ++c) {
    d->indices(c, idx);
    if (idx[0] == 0) continue;
    CHECK(g.values[c].real() == doctest::Approx(2.0).epsilon(1e-12));
  }
  // Angular part of a sector.
  auto one = sample(d, [](const CellPoint&) -> Complex { return 1.0; });
  auto g1 = grad_x_magnitude(one, 1);
  std::size_t c = d->size() / 2;
  CHECK(g1.values[c].real() == doctest::Approx(std::sqrt(2.0) / d->radius(c)).epsilon(1e-12));
}

TEST_CASE("resolvent ratio") {
  auto d = expanding(40.0, 0.2, kPi / 8);
  auto H = assemble_hamiltonian(d);
  GridFunction zero(d);
  auto s0 = solve_resolvent(H, {1.0, 0.1}, zero);
  CHECK_THROWS_AS(resolvent_ratio(H, s0), Error);

  auto sources = make_source_ensemble(4, 2.0, 5);
  for (const auto& src : sources) {
    auto f = src.sample(d);
    auto r = resolvent_ratio(H, solve_resolvent(H, {1.0, 0.1}, f));
    CHECK(r.ratio >= 0.0);
    CHECK(std::isfinite(r.ratio));
    CHECK(r.ratio <= 5000.0 * 9);
    auto rn = resolvent_ratio(H, solve_resolvent(H, {-1.0, 0.1}, f));
    CHECK(rn.ratio_no_z <= 800.0 * 9);
    CHECK(r.weighted > 0.0);
    CHECK(r.weighted_grad > 0.0);
    CHECK(r.weighted_z > 0.0);
  }
}

TEST_CASE("sweep bookkeeping") {
  auto d = expanding(16.0, 0.2, kPi / 8);
  auto H = assemble_hamiltonian(d);
  auto f = make_source_ensemble(1, 2.0, 3)[0].sample(d);
  auto one = sweep_uniformity(H, {1.5}, {0.1}, {f});
  REQUIRE(one.records.size() == 1);
  auto direct = resolvent_ratio(H, solve_resolvent(H, {1.5, 0.1}, f));
  CHECK(one.records[0].ratio == direct.ratio);
  CHECK(one.max_ratio == direct.ratio);

  std::vector<GridFunction> src;
  for (const auto& s : make_source_ensemble(3, 2.0, 8)) src.push_back(s.sample(d));
  auto a = sweep_uniformity(H, {-1.0, 0.5, 2.0}, {1.0, 0.1}, src, 1);
  auto b = sweep_uniformity(H, {-1.0, 0.5, 2.0}, {1.0, 0.1}, src, 3);
  REQUIRE(a.records.size() == 18);
  for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(sweep_csv_row(a.records[i]) == sweep_csv_row(b.records[i]));
  CHECK(sweep_sensitivity(a, b) == 0.0);
  CHECK(a.trend > 0.0);
  CHECK_THROWS_AS(sweep_uniformity(H, {1.0}, {0.0}, src), Error);
}
