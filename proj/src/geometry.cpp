#include "wglab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <fmt/format.h>

namespace wglab {

const char* grid_mode_name(GridMode mode) {
  switch (mode) {
    case GridMode::FullTensor: return "FullTensor";
    case GridMode::RadialX: return "RadialX";
    case GridMode::RadialXRadialY: return "RadialXRadialY";
  }
  return "?";
}

GridMode parse_grid_mode(const std::string& s) {
  if (s == "FullTensor") return GridMode::FullTensor;
  if (s == "RadialX") return GridMode::RadialX;
  if (s == "RadialXRadialY") return GridMode::RadialXRadialY;
  fail(ErrorCode::InvalidArgument, "unknown grid mode '" + s + "'");
}

// ---------------------------------------------------------------- profiles

double bump_function(double s) {
  double s2 = s * s;
  if (s2 >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - s2));
}

double bump_derivative(double s) {
  double s2 = s * s;
  if (s2 >= 1.0) return 0.0;
  double q = 1.0 - s2;
  return bump_function(s) * (-2.0 * s / (q * q));
}

ScaleFunction ScaleFunction::constant(double c) {
  ScaleFunction f;
  f.kind = Kind::Constant;
  f.base = c;
  return f;
}

ScaleFunction ScaleFunction::bump(double base, double amplitude, double width) {
  ScaleFunction f;
  f.kind = Kind::Bump;
  f.base = base;
  f.amplitude = amplitude;
  f.width = width;
  return f;
}

ScaleFunction ScaleFunction::tanh(double base, double amplitude, double width) {
  ScaleFunction f;
  f.kind = Kind::Tanh;
  f.base = base;
  f.amplitude = amplitude;
  f.width = width;
  return f;
}

double ScaleFunction::value(double r) const {
  switch (kind) {
    case Kind::Constant: return base;
    case Kind::Bump: return base + amplitude * bump_function(r / width);
    case Kind::Tanh: return base + amplitude * std::tanh(r / width);
  }
  return base;
}

double ScaleFunction::derivative(double r) const {
  switch (kind) {
    case Kind::Constant: return 0.0;
    case Kind::Bump: return amplitude * bump_derivative(r / width) / width;
    case Kind::Tanh: {
      double t = std::tanh(r / width);
      return amplitude * (1.0 - t * t) / width;
    }
  }
  return 0.0;
}

std::optional<double> ScaleFunction::flat_radius() const {
  switch (kind) {
    case Kind::Constant: return 0.0;
    case Kind::Bump: return amplitude == 0.0 ? 0.0 : width;
    case Kind::Tanh: return amplitude == 0.0 ? std::optional<double>(0.0) : std::nullopt;
  }
  return std::nullopt;
}

CrossSection CrossSection::interval(double a, double b) {
  CrossSection c;
  c.kind = Kind::Interval;
  c.a = a;
  c.b = b;
  return c;
}

CrossSection CrossSection::disk(double radius) {
  CrossSection c;
  c.kind = Kind::Disk;
  c.radius = radius;
  return c;
}

CrossSection CrossSection::raster(std::vector<std::uint8_t> mask) {
  CrossSection c;
  c.kind = Kind::Mask;
  c.mask = std::move(mask);
  return c;
}

ProfileSpec ProfileSpec::flat(CrossSection section) {
  ProfileSpec p;
  p.variant = Variant::FlatProduct;
  p.section = std::move(section);
  p.scale = ScaleFunction::constant(1.0);
  return p;
}

ProfileSpec ProfileSpec::radial(ScaleFunction g, CrossSection section) {
  ProfileSpec p;
  p.variant = Variant::RadialProfile;
  p.section = std::move(section);
  p.scale = g;
  return p;
}

ProfileSpec ProfileSpec::witsch(double a, double b, CrossSection section) {
  if (!(a > 0.0) || !(b > 0.0)) fail(ErrorCode::InvalidArgument, "Witsch bump needs a > 0 and b > 0");
  ProfileSpec p;
  p.variant = Variant::WitschBump;
  p.section = std::move(section);
  p.scale = ScaleFunction::bump(1.0, a, b);
  return p;
}

std::optional<double> ProfileSpec::flat_radius() const {
  if (variant == Variant::FlatProduct) return 0.0;
  return scale.flat_radius();
}

std::string ProfileSpec::id() const {
  std::string v = variant == Variant::FlatProduct   ? "flat"
                  : variant == Variant::WitschBump ? "witsch"
                                                   : "radial";
  std::string s;
  switch (section.kind) {
    case CrossSection::Kind::Interval: s = fmt::format("interval({:.17g},{:.17g})", section.a, section.b); break;
    case CrossSection::Kind::Disk: s = fmt::format("disk({:.17g})", section.radius); break;
    case CrossSection::Kind::Mask: s = fmt::format("mask({})", section.mask.size()); break;
  }
  const char* k = scale.kind == ScaleFunction::Kind::Constant ? "const"
                  : scale.kind == ScaleFunction::Kind::Bump   ? "bump"
                                                              : "tanh";
  return fmt::format("{}:{}:{}({:.17g},{:.17g},{:.17g})", v, s, k, scale.base, scale.amplitude, scale.width);
}

// ------------------------------------------------------------------ layout

GridLayout::GridLayout(const GridSpec& spec) : spec_(spec) {
  if (spec.n < 3) fail(ErrorCode::InvalidArgument, "n must be >= 3");
  if (spec.m < 1) fail(ErrorCode::InvalidArgument, "m must be >= 1");
  if (!(spec.h_x > 0.0) || !(spec.h_y > 0.0)) fail(ErrorCode::InvalidArgument, "grid spacings must be positive");
  if (!(spec.extent_x > 0.0)) fail(ErrorCode::InvalidArgument, "extent_x must be positive");
  if (spec.mode == GridMode::RadialXRadialY && spec.m != 2)
    fail(ErrorCode::ModeMismatch, "RadialXRadialY requires m = 2");
  if (spec.mode != GridMode::RadialXRadialY && !(spec.y_hi > spec.y_lo))
    fail(ErrorCode::InvalidArgument, "empty y box");

  double q = spec.extent_x / spec.h_x;
  long nx = std::lround(q);
  if (nx < 1 || std::abs(q - nx) > 1e-9 * std::max(1.0, q))
    fail(ErrorCode::InvalidArgument, "extent_x must be an integer multiple of h_x");

  if (radial_x()) {
    x_nodes_.resize(nx);
    for (long i = 0; i < nx; ++i) x_nodes_[i] = (i + 0.5) * spec.h_x;
  } else {
    x_nodes_.resize(2 * nx);
    for (long i = 0; i < 2 * nx; ++i) x_nodes_[i] = -spec.extent_x + (i + 0.5) * spec.h_x;
  }

  if (radial_y()) {
    long ny = static_cast<long>(std::ceil(spec.y_hi / spec.h_y - 1e-9));
    y_nodes_.resize(std::max(1L, ny));
    for (std::size_t j = 0; j < y_nodes_.size(); ++j) y_nodes_[j] = (j + 0.5) * spec.h_y;
  } else {
    long ny = static_cast<long>(std::ceil((spec.y_hi - spec.y_lo) / spec.h_y - 1e-9));
    y_nodes_.resize(ny + 1);
    for (long j = 0; j <= ny; ++j) y_nodes_[j] = spec.y_lo + j * spec.h_y;
  }

  for (int a = 0; a < x_axes(); ++a) dims_.push_back(static_cast<int>(x_nodes_.size()));
  for (int a = 0; a < y_axes(); ++a) dims_.push_back(static_cast<int>(y_nodes_.size()));
  strides_.assign(dims_.size(), 1);
  for (int a = static_cast<int>(dims_.size()) - 2; a >= 0; --a) strides_[a] = strides_[a + 1] * dims_[a + 1];
  tensor_size_ = strides_[0] * dims_[0];
  y_block_ = strides_[x_axes() - 1];
}

double GridLayout::x_measure(int i) const {
  const double h = spec_.h_x;
  if (!radial_x()) return std::pow(h, spec_.n);
  const int n = spec_.n;
  double lo = i * h;
  double hi = (i + 1) * h;
  double pl = 1.0, ph = 1.0;
  for (int k = 0; k < n; ++k) {
    pl *= lo;
    ph *= hi;
  }
  return sphere_area(n) * (ph - pl) / n;
}

double GridLayout::y_measure(int j) const {
  const double h = spec_.h_y;
  if (!radial_y()) return std::pow(h, spec_.m);
  return kPi * h * h * (2.0 * j + 1.0);
}

double GridLayout::x_face(int i) const {
  double r = (i + 1) * spec_.h_x;
  return sphere_area(spec_.n) * std::pow(r, spec_.n - 1);
}

double GridLayout::y_face(int j) const { return 2.0 * kPi * (j + 1) * spec_.h_y; }

void GridLayout::unravel(std::int64_t t, int* idx) const {
  for (std::size_t a = 0; a < dims_.size(); ++a) idx[a] = static_cast<int>((t / strides_[a]) % dims_[a]);
}

double GridLayout::x_radius(const int* idx) const {
  if (radial_x()) return x_nodes_[idx[0]];
  double s = 0.0;
  for (int a = 0; a < spec_.n; ++a) s += x_nodes_[idx[a]] * x_nodes_[idx[a]];
  return std::sqrt(s);
}

// ------------------------------------------------------------------ domain

WaveguideDomain::WaveguideDomain(const ProfileSpec& profile, const GridSpec& spec)
    : profile_(profile), layout_(spec) {}

std::pair<double, double> WaveguideDomain::radial_interval(std::size_t c) const {
  const double h = layout_.spec().h_x;
  const double r = radius_[c];
  if (layout_.radial_x()) {
    double i = std::round(r / h - 0.5);
    return {i * h, (i + 1.0) * h};
  }
  return {std::max(0.0, r - 0.5 * h), r + 0.5 * h};
}

double WaveguideDomain::x_weight(std::size_t c) const {
  int idx[8];
  layout_.unravel(tensor_[c], idx);
  return layout_.x_measure(idx[0]);
}

double WaveguideDomain::level_set(double r, const double* y, double* d_r, double* d_y) const {
  const CrossSection& cs = profile_.section;
  const double g = profile_.g(r);
  const double gp = profile_.g_prime(r);
  switch (cs.kind) {
    case CrossSection::Kind::Interval: {
      double up = y[0] - g * cs.b;
      double lo = g * cs.a - y[0];
      if (up >= lo) {
        if (d_r) *d_r = -gp * cs.b;
        if (d_y) d_y[0] = 1.0;
        return up;
      }
      if (d_r) *d_r = gp * cs.a;
      if (d_y) d_y[0] = -1.0;
      return lo;
    }
    case CrossSection::Kind::Disk: {
      double rho;
      if (layout_.radial_y()) {
        rho = y[0];
        if (d_y) d_y[0] = 1.0;
      } else {
        rho = std::hypot(y[0], y[1]);
        if (d_y) {
          d_y[0] = rho > 0 ? y[0] / rho : 0.0;
          d_y[1] = rho > 0 ? y[1] / rho : 0.0;
        }
      }
      if (d_r) *d_r = -gp * cs.radius;
      return rho - g * cs.radius;
    }
    case CrossSection::Kind::Mask: break;
  }
  fail(ErrorCode::Unsupported, "raster cross-sections have no level set");
}

bool WaveguideDomain::inside(double r, const double* y) const {
  const CrossSection& cs = profile_.section;
  double scale = cs.kind == CrossSection::Kind::Disk ? std::max(1.0, cs.radius)
                                                     : std::max({1.0, std::abs(cs.a), std::abs(cs.b)});
  // Centers within rounding of the wall count as outside.
  return level_set(r, y, nullptr, nullptr) < -1e-12 * scale;
}

namespace {

void check_section(const ProfileSpec& p, const GridLayout& lay) {
  const auto& s = lay.spec();
  switch (p.section.kind) {
    case CrossSection::Kind::Interval:
      if (s.m != 1 || lay.radial_y()) fail(ErrorCode::ModeMismatch, "interval cross-section requires m = 1");
      if (!(p.section.b > p.section.a)) fail(ErrorCode::InvalidArgument, "empty interval cross-section");
      break;
    case CrossSection::Kind::Disk:
      if (s.m != 2) fail(ErrorCode::ModeMismatch, "disk cross-section requires m = 2");
      if (!(p.section.radius > 0)) fail(ErrorCode::InvalidArgument, "disk radius must be positive");
      break;
    case CrossSection::Kind::Mask:
      if (lay.radial_y()) fail(ErrorCode::ModeMismatch, "raster cross-section needs Cartesian y");
      if (p.variant != ProfileSpec::Variant::FlatProduct)
        fail(ErrorCode::Unsupported, "raster cross-sections only support flat products");
      if (static_cast<std::int64_t>(p.section.mask.size()) != lay.y_block())
        fail(ErrorCode::InvalidArgument, fmt::format("mask has {} entries, y grid has {}", p.section.mask.size(), lay.y_block()));
      break;
  }
  if (p.variant != ProfileSpec::Variant::FlatProduct) {
    // g must stay positive; sample densely.
    double L = s.extent_x * (lay.radial_x() ? 1.0 : std::sqrt(double(s.n)));
    for (int k = 0; k <= 4096; ++k) {
      if (!(p.g(L * k / 4096.0) > 0.0)) fail(ErrorCode::InvalidArgument, "profile scale must be positive");
    }
  }
}

}  // namespace

DomainPtr build_domain(const ProfileSpec& profile, const GridSpec& spec) {
  std::shared_ptr<WaveguideDomain> d(new WaveguideDomain(profile, spec));
  const GridLayout& lay = d->layout_;
  check_section(profile, lay);

  if (auto M = profile.flat_radius(); M && *M > 0 && spec.extent_x < 8.0 * *M)
    fail(ErrorCode::ProfileOutOfBounds,
         fmt::format("extent_x = {} is below 8 x perturbation radius {}", spec.extent_x, *M));

  const int xa = lay.x_axes();
  const int ya = lay.y_axes();
  const int na = lay.axes();
  const bool raster = profile.section.kind == CrossSection::Kind::Mask;
  const auto& xn = lay.x_nodes();
  const auto& yn = lay.y_nodes();

  d->lookup_.assign(lay.tensor_size(), -1);
  int idx[8];
  double y[4];
  for (std::int64_t t = 0; t < lay.tensor_size(); ++t) {
    lay.unravel(t, idx);
    double r = lay.x_radius(idx);
    bool in;
    if (raster) {
      in = profile.section.mask[t % lay.y_block()] != 0;
    } else {
      for (int k = 0; k < ya; ++k) y[k] = yn[idx[xa + k]];
      in = d->inside(r, y);
    }
    if (!in) continue;
    for (int k = 0; k < ya; ++k) {
      int j = idx[xa + k];
      bool outer = lay.radial_y() ? (j == lay.dims()[xa + k] - 1) : (j == 0 || j == lay.dims()[xa + k] - 1);
      if (outer) fail(ErrorCode::ProfileOutOfBounds, "cross-section reaches the y bounding box");
    }
    double w = 1.0;
    if (lay.radial_x()) w *= lay.x_measure(idx[0]);
    else w *= lay.x_measure(0);
    if (lay.radial_y()) w *= lay.y_measure(idx[xa]);
    else w *= lay.y_measure(0);
    d->lookup_[t] = static_cast<std::int32_t>(d->tensor_.size());
    d->tensor_.push_back(t);
    d->radius_.push_back(r);
    d->weight_.push_back(w);
  }
  if (d->tensor_.empty()) fail(ErrorCode::EmptyDomain, "no active cells");

  // Connectivity.
  {
    std::vector<std::uint8_t> seen(d->tensor_.size(), 0);
    std::vector<std::int32_t> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      std::int32_t c = stack.back();
      stack.pop_back();
      std::int64_t t = d->tensor_[c];
      lay.unravel(t, idx);
      for (int a = 0; a < na; ++a) {
        for (int dir = -1; dir <= 1; dir += 2) {
          int k = idx[a] + dir;
          if (k < 0 || k >= lay.dims()[a]) continue;
          std::int32_t nb = d->lookup_[t + dir * lay.stride(a)];
          if (nb < 0 || seen[nb]) continue;
          seen[nb] = 1;
          ++count;
          stack.push_back(nb);
        }
      }
    }
    if (count != d->tensor_.size())
      fail(ErrorCode::DisconnectedDomain, fmt::format("{} of {} active cells reachable", count, d->tensor_.size()));
  }

  // Boundary faces with normals from the analytic level set.
  double P[8], Q[8], B[8];
  for (std::size_t c = 0; c < d->tensor_.size(); ++c) {
    std::int64_t t = d->tensor_[c];
    lay.unravel(t, idx);
    for (int a = 0; a < na; ++a) {
      for (int dir = -1; dir <= 1; dir += 2) {
        int k = idx[a] + dir;
        if (k < 0 || k >= lay.dims()[a]) continue;  // truncation wall, origin or axis
        if (d->lookup_[t + dir * lay.stride(a)] >= 0) continue;
        BoundaryFace f;
        f.cell = static_cast<std::int32_t>(c);
        f.axis = a;
        f.dir = dir;
        if (raster) {
          f.r = d->radius_[c];
          f.nu_r = 0.0;
          f.nu_y[a - xa] = dir;
          f.x_dot_nu = 0.0;
          d->faces_.push_back(f);
          continue;
        }
        for (int b = 0; b < na; ++b) {
          P[b] = b < xa ? xn[idx[b]] : yn[idx[b]];
          Q[b] = P[b];
        }
        Q[a] = a < xa ? xn[k] : yn[k];
        auto radius_of = [&](const double* X) {
          if (lay.radial_x()) return X[0];
          double s = 0;
          for (int b = 0; b < xa; ++b) s += X[b] * X[b];
          return std::sqrt(s);
        };
        auto phi_at = [&](double s) {
          for (int b = 0; b < na; ++b) B[b] = P[b] + s * (Q[b] - P[b]);
          return d->level_set(radius_of(B), B + xa, nullptr, nullptr);
        };
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 60; ++it) {
          double mid = 0.5 * (lo + hi);
          if (phi_at(mid) < 0) lo = mid;
          else hi = mid;
        }
        phi_at(0.5 * (lo + hi));
        double rb = radius_of(B);
        double dr = 0.0, dy[4] = {0, 0, 0, 0};
        d->level_set(rb, B + xa, &dr, dy);
        double nrm2 = dr * dr;
        for (int b = 0; b < ya; ++b) nrm2 += dy[b] * dy[b];
        double nrm = std::sqrt(nrm2);
        f.r = rb;
        f.nu_r = dr / nrm;
        for (int b = 0; b < ya; ++b) f.nu_y[b] = dy[b] / nrm;
        f.x_dot_nu = f.nu_r * rb;
        d->faces_.push_back(f);
      }
    }
  }
  return d;
}

RepulsivityReport audit_repulsivity(const WaveguideDomain& domain, double tol_geom) {
  RepulsivityReport rep;
  const auto& faces = domain.boundary_faces();
  rep.samples = faces.size();
  if (faces.empty()) {
    rep.min_slack = std::numeric_limits<double>::infinity();
    return rep;
  }
  double mn = std::numeric_limits<double>::infinity();
  std::size_t bad = 0;
  for (const auto& f : faces) {
    double slack = 0.0 - f.x_dot_nu;
    mn = std::min(mn, slack);
    if (slack < -tol_geom) ++bad;
  }
  rep.min_slack = mn;
  rep.violating_fraction = static_cast<double>(bad) / faces.size();
  rep.verdict = mn >= -tol_geom;
  return rep;
}

FlatTailReport audit_flat_tail(const WaveguideDomain& domain) {
  auto analytic = domain.profile().flat_radius();
  if (!analytic) fail(ErrorCode::NoFlatTail, "profile scale is never constant");
  const GridLayout& lay = domain.layout();
  const std::int64_t yb = lay.y_block();
  const std::int64_t cols = lay.tensor_size() / yb;
  std::vector<double> col_r(cols);
  int idx[8];
  std::int64_t tail = 0;
  for (std::int64_t c = 0; c < cols; ++c) {
    lay.unravel(c * yb, idx);
    col_r[c] = lay.x_radius(idx);
    if (col_r[c] > col_r[tail]) tail = c;
  }
  FlatTailReport rep;
  rep.analytic_M = *analytic;
  rep.tail_cross_section.resize(yb);
  for (std::int64_t j = 0; j < yb; ++j) rep.tail_cross_section[j] = domain.cell_of(tail * yb + j) >= 0;
  double M = 0.0;
  for (std::int64_t c = 0; c < cols; ++c) {
    if (col_r[c] <= M) continue;
    for (std::int64_t j = 0; j < yb; ++j) {
      bool act = domain.cell_of(c * yb + j) >= 0;
      if (act != static_cast<bool>(rep.tail_cross_section[j])) {
        M = col_r[c];
        break;
      }
    }
  }
  rep.M = M;
  double half = 0.5 * domain.spec().extent_x;
  rep.holds = M < half && rep.analytic_M < half;
  return rep;
}

// ------------------------------------------------------------------ masks

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) fail(ErrorCode::Io, "truncated mask file");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_mask(const std::string& path, const WaveguideDomain& domain) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::Io, "cannot open " + path);
  const auto& dims = domain.layout().dims();
  put_u32(os, static_cast<std::uint32_t>(dims.size()));
  for (int d : dims) put_u32(os, static_cast<std::uint32_t>(d));
  const std::int64_t N = domain.layout().tensor_size();
  std::vector<unsigned char> bytes((N + 7) / 8, 0);
  for (std::size_t c = 0; c < domain.size(); ++c) {
    std::int64_t t = domain.tensor_index(c);
    bytes[t / 8] |= static_cast<unsigned char>(1u << (t % 8));
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) fail(ErrorCode::Io, "write failed for " + path);
}

MaskFile read_mask(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::Io, "cannot open " + path);
  MaskFile mf;
  std::uint32_t rank = get_u32(is);
  if (rank == 0 || rank > 8) fail(ErrorCode::Io, "bad mask rank");
  std::int64_t N = 1;
  for (std::uint32_t a = 0; a < rank; ++a) {
    mf.dims.push_back(get_u32(is));
    N *= mf.dims.back();
  }
  std::vector<unsigned char> bytes((N + 7) / 8);
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    fail(ErrorCode::Io, "truncated mask payload");
  mf.bits.resize(N);
  for (std::int64_t t = 0; t < N; ++t) mf.bits[t] = (bytes[t / 8] >> (t % 8)) & 1u;
  return mf;
}

}  // namespace wglab
