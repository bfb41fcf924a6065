#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "wglab/geometry.hpp"

using namespace wglab;

namespace {

double ref_bump(double s) { return std::abs(s) < 1 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0; }

GridSpec radial_spec(double L, double hx, double hy) {
  GridSpec g;
  g.mode = GridMode::RadialX;
  g.n = 3;
  g.m = 1;
  g.extent_x = L;
  g.h_x = hx;
  g.h_y = hy;
  g.y_lo = 0.0;
  g.y_hi = kPi;
  return g;
}

GridSpec disk_spec(double L, double hx, int nrho, double box) {
  GridSpec g;
  g.mode = GridMode::RadialXRadialY;
  g.n = 3;
  g.m = 2;
  g.extent_x = L;
  g.h_x = hx;
  g.h_y = 1.0 / (nrho + 0.5);
  g.y_hi = box;
  return g;
}

}  // namespace

TEST_CASE("flat product mask is the product indicator") {
  auto spec = radial_spec(4.0, 0.1, kPi / 16);
  auto d = build_domain(ProfileSpec::flat(CrossSection::interval(0, kPi)), spec);
  // Nodes j = 1..15 lie strictly inside (0, pi); walls j = 0, 16 are inactive.
  CHECK(d->size() == 40u * 15u);
  auto d2 = build_domain(ProfileSpec::radial(ScaleFunction::constant(1.0), CrossSection::interval(0, kPi)), spec);
  REQUIRE(d2->size() == d->size());
  for (std::size_t c = 0; c < d->size(); ++c) CHECK(d->tensor_index(c) == d2->tensor_index(c));
}

TEST_CASE("Witsch bump mask matches a direct indicator count") {
  auto spec = disk_spec(16.0, 0.1, 10, 1.7);
  auto d = build_domain(ProfileSpec::witsch(0.5, 2.0, CrossSection::disk(1.0)), spec);
  auto flat = build_domain(ProfileSpec::flat(CrossSection::disk(1.0)), spec);
  std::size_t count = 0, flat_count = 0;
  const double h = spec.h_y;
  for (int i = 0; i < 160; ++i) {
    double r = (i + 0.5) * 0.1;
    double rho_max = 1.0 + 0.5 * ref_bump(r / 2.0);
    for (int j = 0; (j + 0.5) * h < 1.7; ++j) {
      double rho = (j + 0.5) * h;
      if (rho < rho_max - 1e-12) ++count;
      if (rho < 1.0 - 1e-12) ++flat_count;
    }
  }
  CHECK(d->size() == count);
  CHECK(flat->size() == flat_count);
  CHECK(d->size() > flat->size());
}

TEST_CASE("flat product audit has slack exactly zero") {
  auto d = build_domain(ProfileSpec::flat(CrossSection::interval(0, kPi)), radial_spec(4.0, 0.1, kPi / 16));
  auto rep = audit_repulsivity(*d);
  CHECK(rep.samples > 0);
  CHECK(rep.min_slack == 0.0);
  CHECK(!std::signbit(rep.min_slack));
  CHECK(rep.verdict);
  CHECK(rep.violating_fraction == 0.0);
}

TEST_CASE("expanding profile is repulsive") {
  auto prof = ProfileSpec::radial(ScaleFunction::bump(1.0, -0.3, 2.0), CrossSection::interval(0, kPi));
  auto d = build_domain(prof, radial_spec(16.0, 0.1, kPi / 32));
  auto rep = audit_repulsivity(*d);
  CHECK(rep.verdict);
  CHECK(rep.violating_fraction == 0.0);
  CHECK(rep.min_slack >= 0.0);

  GridSpec full;
  full.mode = GridMode::FullTensor;
  full.extent_x = 16.0;
  full.h_x = 1.0;
  full.h_y = kPi / 8;
  auto df = build_domain(prof, full);
  CHECK(audit_repulsivity(*df).verdict);
}

TEST_CASE("Witsch bump violates repulsivity exactly on the outer slope") {
  auto spec = disk_spec(16.0, 0.05, 20, 1.7);
  auto d = build_domain(ProfileSpec::witsch(0.5, 2.0, CrossSection::disk(1.0)), spec);
  auto rep = audit_repulsivity(*d);
  CHECK_FALSE(rep.verdict);
  CHECK(rep.violating_fraction > 0.0);
  std::size_t checked = 0;
  for (const auto& f : d->boundary_faces()) {
    double nrm = f.nu_r * f.nu_r;
    for (double v : f.nu_y) nrm += v * v;
    CHECK(std::abs(std::sqrt(nrm) - 1.0) <= 1e-12);
    // Level-set oracle: slack = -nu.(x,0) = r rho'(r) / |grad| with rho' < 0 on (0, b).
    double s = f.r / 2.0;
    bool slope = s > 0 && s < 1 && ref_bump(s) > 1e-300;
    double slack = 0.0 - f.x_dot_nu;
    if (slope) {
      CHECK(slack < 0.0);
      ++checked;
    } else {
      CHECK(slack >= -kTolGeom);
    }
  }
  CHECK(checked > 10);
}

TEST_CASE("repulsivity slack converges at first order under refinement") {
  // Oracle: minimum over the analytic boundary of r rho'(r) / sqrt(1 + rho'^2).
  double exact = 0.0;
  for (int k = 1; k < 200000; ++k) {
    double r = 2.0 * k / 200000.0;
    double s = r / 2.0;
    double q = 1.0 - s * s;
    double gp = 0.5 * ref_bump(s) * (-2.0 * s / (q * q)) / 2.0;
    exact = std::min(exact, r * gp / std::sqrt(1.0 + gp * gp));
  }
  std::vector<double> hs{0.2, 0.1, 0.05};
  std::vector<double> err;
  for (double h : hs) {
    auto spec = disk_spec(16.0, h, static_cast<int>(std::lround(0.1 / h * 10)), 1.7);
    auto d = build_domain(ProfileSpec::witsch(0.5, 2.0, CrossSection::disk(1.0)), spec);
    err.push_back(std::abs(audit_repulsivity(*d).min_slack - exact));
  }
  double C = std::max(err[0] / hs[0], 1e-3);
  for (std::size_t k = 0; k < hs.size(); ++k) CHECK(err[k] <= 1.5 * C * hs[k]);
  CHECK(err[2] < err[0]);
}

TEST_CASE("flat tail audit") {
  auto flat = build_domain(ProfileSpec::flat(CrossSection::interval(0, kPi)), radial_spec(4.0, 0.1, kPi / 16));
  auto r0 = audit_flat_tail(*flat);
  CHECK(r0.M == 0.0);
  CHECK(r0.holds);

  auto spec = disk_spec(16.0, 0.1, 10, 1.7);
  auto w = build_domain(ProfileSpec::witsch(0.5, 2.0, CrossSection::disk(1.0)), spec);
  auto r1 = audit_flat_tail(*w);
  CHECK(std::abs(r1.M - 2.0) <= 0.1);
  CHECK(r1.holds);
  CHECK(r1.analytic_M == 2.0);

  auto t = build_domain(ProfileSpec::radial(ScaleFunction::tanh(1.0, 0.5, 1.0), CrossSection::interval(0, kPi)),
                        [] {
                          GridSpec g;
                          g.extent_x = 8.0;
                          g.h_x = 0.1;
                          g.h_y = kPi / 16;
                          g.y_hi = 1.6 * kPi;
                          return g;
                        }());
  CHECK_THROWS_AS(audit_flat_tail(*t), Error);
}

TEST_CASE("build errors") {
  auto spec = radial_spec(4.0, 0.1, kPi);
  try {
    build_domain(ProfileSpec::flat(CrossSection::interval(0, kPi)), spec);
    FAIL("expected EmptyDomain");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyDomain);
  }
  try {
    build_domain(ProfileSpec::witsch(0.5, 2.0, CrossSection::disk(1.0)), disk_spec(10.0, 0.1, 10, 1.7));
    FAIL("expected ProfileOutOfBounds");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ProfileOutOfBounds);
  }
  try {
    build_domain(ProfileSpec::witsch(0.5, 2.0, CrossSection::disk(1.0)), disk_spec(16.0, 0.1, 10, 1.2));
    FAIL("expected ProfileOutOfBounds");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ProfileOutOfBounds);
  }
}

TEST_CASE("mask file round trip") {
  auto d = build_domain(ProfileSpec::witsch(0.5, 2.0, CrossSection::disk(1.0)), disk_spec(16.0, 0.2, 6, 1.7));
  auto path = (std::filesystem::temp_directory_path() / "wglab_mask_test.bin").string();
  write_mask(path, *d);
  auto mf = read_mask(path);
  std::remove(path.c_str());
  REQUIRE(mf.dims.size() == 2);
  CHECK(mf.dims[0] == static_cast<std::uint32_t>(d->layout().dims()[0]));
  std::size_t ones = 0;
  for (std::size_t t = 0; t < mf.bits.size(); ++t) {
    ones += mf.bits[t];
    CHECK((mf.bits[t] != 0) == (d->cell_of(static_cast<std::int64_t>(t)) >= 0));
  }
  CHECK(ones == d->size());
}

TEST_CASE("raster cross-section") {
  GridSpec g = radial_spec(2.0, 0.1, kPi / 8);
  std::vector<std::uint8_t> mask(9, 0);
  for (int j = 2; j <= 5; ++j) mask[j] = 1;
  auto d = build_domain(ProfileSpec::flat(CrossSection::raster(mask)), g);
  CHECK(d->size() == 20u * 4u);
  auto rep = audit_repulsivity(*d);
  CHECK(rep.min_slack == 0.0);
}
