#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "test_util.hpp"
#include "wglab/spectral.hpp"

using namespace wglab;

namespace {

constexpr double kJ01 = 2.404825557695773;  // first zero of J_0
constexpr double kJ11 = 3.831705970207512;  // first zero of J_1
constexpr double kAiry1 = 2.338107410459767;  // |a_1|, first zero of Ai

ProfileSpec bulge() {
  return ProfileSpec::radial(ScaleFunction::bump(1.0, 0.3, 6.0), CrossSection::interval(0, kPi));
}

ProfileSpec expanding() {
  return ProfileSpec::radial(ScaleFunction::bump(1.0, -0.3, 2.0), CrossSection::interval(0, kPi));
}

// All eigenvalues of the dense symmetric matrix.
VecD dense_eigs(const DirichletOperator& H) {
  Eigen::MatrixXd A = Eigen::MatrixXd(Eigen::SparseMatrix<double>(H.S));
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A, Eigen::EigenvaluesOnly).eigenvalues();
}

std::vector<double> in_window(const VecD& ev, double a, double b) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] >= a && ev[i] < b) out.push_back(ev[i]);
  return out;
}

}  // namespace

TEST_CASE("interval modes match the discrete sine spectrum") {
  GridSpec g = testutil::radial_interval_grid(1.0, 0.1, kPi / 64);
  auto mb = cross_section_modes(CrossSection::interval(0, kPi), g, 6);
  const double h = g.h_y;
  for (int j = 1; j <= 6; ++j) {
    double exact_discrete = 4.0 / (h * h) * std::pow(std::sin(j * h / 2), 2);
    CHECK(std::abs(mb.values[j - 1] - exact_discrete) <= 1e-10 * j * j);
    CHECK(std::abs(mb.values[j - 1] - j * j) <= 0.02 * j * j);
  }
  CHECK(mb.gram_defect <= 1e-10);
  CHECK(mb.max_residual <= 1e-8);
  // phi_1 against sqrt(2/pi) sin y at the cell nodes.
  double sgn = mb.modes(mb.modes.rows() / 2, 0) > 0 ? 1.0 : -1.0;
  double worst = 0.0;
  for (Eigen::Index c = 0; c < mb.modes.rows(); ++c) {
    double y = g.y_lo + mb.y_index[c] * h;
    worst = std::max(worst, std::abs(sgn * mb.modes(c, 0) - std::sqrt(2 / kPi) * std::sin(y)));
  }
  CHECK(worst <= 1e-3);
  CHECK(essential_threshold(mb) == mb.values[0]);
}

TEST_CASE("disk modes approach the Bessel zeros at second order") {
  double err_prev[2] = {0, 0};
  for (int nrho : {20, 40, 80}) {
    GridSpec g = testutil::radial_disk_grid(1.0, 0.1, nrho, 1.3);
    auto m0 = cross_section_modes(CrossSection::disk(1.0), g, 2, 0);
    auto m1 = cross_section_modes(CrossSection::disk(1.0), g, 1, 1);
    double e0 = std::abs(m0.values[0] - kJ01 * kJ01), e1 = std::abs(m1.values[0] - kJ11 * kJ11);
    CHECK(e0 <= 0.02 * kJ01 * kJ01);
    CHECK(e1 <= 0.02 * kJ11 * kJ11);
    CHECK(m0.gram_defect <= 1e-10);
    CHECK(m1.max_residual <= 1e-8);
    if (nrho > 20) {
      CHECK(err_prev[0] / e0 > 3.0);
      CHECK(err_prev[1] / e1 > 3.0);
    }
    err_prev[0] = e0;
    err_prev[1] = e1;
  }
}

TEST_CASE("mode requests beyond the grid are rejected") {
  GridSpec g = testutil::radial_interval_grid(1.0, 0.1, kPi / 8);
  CHECK_NOTHROW(cross_section_modes(CrossSection::interval(0, kPi), g, 4));
  CHECK_THROWS_AS(cross_section_modes(CrossSection::interval(0, kPi), g, 5), Error);
  CHECK_THROWS_AS(cross_section_modes(CrossSection::interval(0, kPi), g, 8), Error);
  try {
    cross_section_modes(CrossSection::interval(0, kPi), g, 5);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnderResolved);
  }
  CHECK_THROWS_AS(cross_section_modes(CrossSection::interval(0, kPi), g, 1, 1), Error);
}

TEST_CASE("tail modes follow the scaled cross-section") {
  GridSpec g = testutil::radial_interval_grid(48, 0.2, kPi / 16, 1.5 * kPi);
  auto d = build_domain(bulge(), g);
  auto mb = tail_modes(*d, 2);
  auto ref = cross_section_modes(CrossSection::interval(0, kPi), g, 2);
  CHECK(mb.values[0] == doctest::Approx(ref.values[0]).epsilon(1e-12));
  CHECK(mb.values[1] == doctest::Approx(ref.values[1]).epsilon(1e-12));
}

TEST_CASE("inertia counts agree with a dense eigensolve") {
  GridSpec g = testutil::radial_interval_grid(48, 0.6, kPi / 8, 1.5 * kPi);
  auto H = assemble_hamiltonian(build_domain(bulge(), g));
  VecD ev = dense_eigs(H);
  for (double s : {0.3, 0.9, 1.7, 4.2, 11.0}) {
    int dense = static_cast<int>(std::count_if(ev.data(), ev.data() + ev.size(), [&](double e) { return e < s; }));
    CHECK(count_below(H.S, s) == dense);
  }
}

TEST_CASE("bulge: bound state below threshold agrees with the dense oracle") {
  GridSpec g = testutil::radial_interval_grid(48, 0.3, kPi / 8, 1.5 * kPi);
  auto d = build_domain(bulge(), g);
  auto H = assemble_hamiltonian(d);
  const double thr = essential_threshold(tail_modes(*d, 1));
  auto rep = scan_eigenvalues(H, 0.0, thr);
  auto dense = in_window(dense_eigs(H), 0.0, thr);
  REQUIRE(!dense.empty());
  REQUIRE(rep.entries.size() == dense.size());
  CHECK(rep.window_count == static_cast<int>(dense.size()));
  for (std::size_t i = 0; i < dense.size(); ++i) {
    CHECK(std::abs(rep.entries[i].value - dense[i]) <= 0.01 * dense[i]);
    CHECK(rep.entries[i].residual <= 1e-8);
  }
  CHECK(rep.entries[0].localized);
  auto cls = classify_embedded(rep, thr);
  CHECK_FALSE(cls.entries[0].embedded);
  CHECK_FALSE(cls.certificate);
}

TEST_CASE("bulge: scan pipeline keeps the state under box doubling") {
  GridSpec g = testutil::radial_interval_grid(48, 0.1, kPi / 16, 1.5 * kPi);
  auto rep = scan_domain(bulge(), g, PotentialField::zero(), 0, 0, 0.0, 1.0);
  auto bs = rep.bound_states();
  REQUIRE(bs.size() >= 1);
  CHECK(bs[0]->value < rep.threshold);
  CHECK(bs[0]->residual <= 1e-8);
  CHECK(std::abs(bs[0]->doubled_value - bs[0]->value) <= 1e-3 * bs[0]->value);
  CHECK(rep.doubled_extent == 96.0);
}

TEST_CASE("Witsch bump: sector k = 1 state embedded above the global threshold") {
  // Coarse grid for the dense oracle.
  GridSpec g = testutil::radial_disk_grid(16, 0.4, 9, 2.0);
  auto d = build_domain(ProfileSpec::witsch(0.5, 2.0, CrossSection::disk(1.0)), g);
  auto H = assemble_sector(d, 0, 1);
  const double global = essential_threshold(tail_modes(*d, 1, 0));
  const double sector = essential_threshold(tail_modes(*d, 1, 1));
  CHECK(global < sector);
  auto dense = in_window(dense_eigs(H), global, sector);
  REQUIRE(!dense.empty());
  auto rep = classify_embedded(scan_eigenvalues(H, global, sector), global);
  REQUIRE(rep.entries.size() == dense.size());
  CHECK(std::abs(rep.entries[0].value - dense[0]) <= 0.01 * dense[0]);
  CHECK(rep.entries[0].embedded);
  CHECK(rep.entries[0].k_y == 1);
}

TEST_CASE("flat product has nothing below the threshold") {
  GridSpec g = testutil::radial_interval_grid(32, 0.2, kPi / 16);
  auto d = build_domain(ProfileSpec::flat(CrossSection::interval(0, kPi)), g);
  auto H = assemble_hamiltonian(d);
  const double thr = essential_threshold(tail_modes(*d, 1));
  CHECK(count_below(H.S, thr) == 0);
  auto rep = scan_eigenvalues(H, 0.0, thr * (1 - 1e-9));
  CHECK(rep.window_count == 0);
  CHECK(rep.entries.empty());
}

TEST_CASE("expanding domain: absence certificate") {
  GridSpec g = testutil::radial_interval_grid(24, 0.2, kPi / 8);
  auto d = build_domain(expanding(), g);
  const double thr = essential_threshold(tail_modes(*d, 1));
  auto rep = scan_domain(expanding(), g, PotentialField::zero(), 0, 0, 0.0, 4 * thr);
  CHECK(rep.window_count > 0);  // box modes of the truncated continuum
  for (const auto& e : rep.entries) {
    CHECK(e.residual <= 1e-8);
    CHECK(e.r90 > 0.5 * rep.extent_x);
  }
  CHECK(rep.bound_states().empty());
  CHECK(rep.certificate);
  CHECK(rep.certificate_note.find("Krylov dimension 30") != std::string::npos);
}

TEST_CASE("linear well: Airy oracle and second-order refinement") {
  std::vector<double> E;
  for (double h : {0.2, 0.1, 0.05}) {
    GridSpec g = testutil::radial_interval_grid(16, h, kPi / std::round(kPi / h));
    auto d = build_domain(ProfileSpec::flat(CrossSection::interval(0, kPi)), g);
    auto rep = scan_eigenvalues(assemble_hamiltonian(d, PotentialField::linear_r(1.0)), 3.0, 3.6, {.shifts = 4});
    REQUIRE(rep.entries.size() == 1);
    E.push_back(rep.entries[0].value);
  }
  const double exact = 1.0 + kAiry1;
  CHECK(std::abs(E[2] - exact) <= 1e-3);
  double q = (E[1] - E[0]) / (E[2] - E[1]);
  CHECK(q > 3.2);
  CHECK(q < 4.8);
}

TEST_CASE("scan properties: orthonormal vectors, job independence, argument checks") {
  GridSpec g = testutil::radial_interval_grid(16, 0.2, kPi / 8);
  auto d = build_domain(ProfileSpec::flat(CrossSection::interval(0, kPi)), g);
  auto H = assemble_hamiltonian(d);
  auto r1 = scan_eigenvalues(H, 1.0, 3.0);
  ScanOptions o;
  o.jobs = 3;
  auto r3 = scan_eigenvalues(H, 1.0, 3.0, o);
  REQUIRE(r1.entries.size() == r3.entries.size());
  REQUIRE(r1.entries.size() >= 5);
  for (std::size_t i = 0; i < r1.entries.size(); ++i) CHECK(r1.entries[i].value == r3.entries[i].value);
  for (std::size_t i = 0; i < r1.entries.size(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      VecD a = r1.entries[i].vector.cwiseProduct(H.sqrt_weight), b = r1.entries[j].vector.cwiseProduct(H.sqrt_weight);
      CHECK(std::abs(a.dot(b) - (i == j ? 1.0 : 0.0)) <= 1e-8);
    }
  CHECK_THROWS_AS(scan_eigenvalues(H, -1.0, 1.0), Error);
  CHECK_THROWS_AS(scan_eigenvalues(H, 2.0, 2.0), Error);
  ScanOptions tiny;
  tiny.max_count = 2;
  CHECK_THROWS_AS(scan_eigenvalues(H, 1.0, 3.0, tiny), Error);
}
