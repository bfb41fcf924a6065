#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wglab/common.hpp"

namespace wglab {

enum class GridMode { FullTensor, RadialX, RadialXRadialY };

const char* grid_mode_name(GridMode mode);
GridMode parse_grid_mode(const std::string& s);

// Tensor grid over x (n dims) and y (m dims).
//
// RadialX:        x is the radius r_i = (i + 1/2) h_x, i < extent_x / h_x.
// RadialXRadialY: additionally y is the disk radius rho_j = (j + 1/2) h_y.
// FullTensor:     every x axis is cell centered on [-extent_x, extent_x].
// In the Cartesian y modes the nodes are y_lo + j h_y, j = 0..N, so walls of
// an interval starting at y_lo sit exactly on (inactive) nodes.
struct GridSpec {
  int n = 3;
  int m = 1;
  GridMode mode = GridMode::RadialX;
  double extent_x = 20.0;
  double y_lo = 0.0;
  double y_hi = kPi;  // rho box in RadialXRadialY
  double h_x = 0.1;
  double h_y = kPi / 32.0;
};

struct ScaleFunction {
  enum class Kind { Constant, Bump, Tanh };
  Kind kind = Kind::Constant;
  double base = 1.0;
  double amplitude = 0.0;
  double width = 1.0;

  static ScaleFunction constant(double c = 1.0);
  // base + amplitude * exp(1 - 1/(1 - (r/width)^2)) for r < width
  static ScaleFunction bump(double base, double amplitude, double width);
  static ScaleFunction tanh(double base, double amplitude, double width);

  double value(double r) const;
  double derivative(double r) const;
  // Radius beyond which the scale is exactly constant, if any.
  std::optional<double> flat_radius() const;
};

double bump_function(double s);
double bump_derivative(double s);

struct CrossSection {
  enum class Kind { Interval, Disk, Mask };
  Kind kind = Kind::Interval;
  double a = 0.0;
  double b = kPi;
  double radius = 1.0;
  std::vector<std::uint8_t> mask;  // over the y nodes, row-major

  static CrossSection interval(double a, double b);
  static CrossSection disk(double radius);
  static CrossSection raster(std::vector<std::uint8_t> mask);
};

struct ProfileSpec {
  enum class Variant { FlatProduct, RadialProfile, WitschBump };
  Variant variant = Variant::FlatProduct;
  CrossSection section;
  ScaleFunction scale;

  static ProfileSpec flat(CrossSection section);
  static ProfileSpec radial(ScaleFunction g, CrossSection section);
  static ProfileSpec witsch(double a, double b, CrossSection section);

  double g(double r) const { return scale.value(r); }
  double g_prime(double r) const { return scale.derivative(r); }
  std::optional<double> flat_radius() const;
  std::string id() const;
};

class GridLayout {
 public:
  explicit GridLayout(const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }
  bool radial_x() const { return spec_.mode != GridMode::FullTensor; }
  bool radial_y() const { return spec_.mode == GridMode::RadialXRadialY; }
  int x_axes() const { return radial_x() ? 1 : spec_.n; }
  int y_axes() const { return radial_y() ? 1 : spec_.m; }
  int axes() const { return x_axes() + y_axes(); }

  const std::vector<double>& x_nodes() const { return x_nodes_; }
  const std::vector<double>& y_nodes() const { return y_nodes_; }
  const std::vector<int>& dims() const { return dims_; }
  std::int64_t tensor_size() const { return tensor_size_; }
  std::int64_t y_block() const { return y_block_; }  // tensor entries per x column
  std::int64_t stride(int axis) const { return strides_[axis]; }

  // Measure of one cell along x (radial: shell volume; Cartesian: h^n) and y.
  double x_measure(int i) const;
  double y_measure(int j) const;
  // Radial flux area at the face between radial nodes i and i+1.
  double x_face(int i) const;
  double y_face(int j) const;

  void unravel(std::int64_t t, int* idx) const;
  double x_radius(const int* idx) const;

 private:
  GridSpec spec_;
  std::vector<double> x_nodes_;
  std::vector<double> y_nodes_;
  std::vector<int> dims_;
  std::vector<std::int64_t> strides_;
  std::int64_t tensor_size_ = 0;
  std::int64_t y_block_ = 0;
};

struct BoundaryFace {
  std::int32_t cell = 0;
  int axis = 0;
  int dir = 0;
  double r = 0.0;                    // |x| at the boundary sample
  double nu_r = 0.0;                 // component of nu along x/|x|
  std::array<double, 3> nu_y{};      // y components (rho component in radial y)
  double x_dot_nu = 0.0;             // nu . (x, 0)
};

class WaveguideDomain {
 public:
  const GridSpec& spec() const { return layout_.spec(); }
  const ProfileSpec& profile() const { return profile_; }
  const GridLayout& layout() const { return layout_; }

  std::size_t size() const { return tensor_.size(); }
  std::int64_t tensor_index(std::size_t c) const { return tensor_[c]; }
  std::int32_t cell_of(std::int64_t t) const { return lookup_[t]; }
  double radius(std::size_t c) const { return radius_[c]; }
  double weight(std::size_t c) const { return weight_[c]; }
  const std::vector<double>& weights() const { return weight_; }
  const std::vector<double>& radii() const { return radius_; }
  // Radial interval [a, b] carried by the cell in the layer-cake model.
  std::pair<double, double> radial_interval(std::size_t c) const;
  // Weight of the x part of the cell, so that weight = x_weight * y_weight.
  double x_weight(std::size_t c) const;
  std::int64_t y_index(std::size_t c) const { return tensor_[c] % layout_.y_block(); }
  std::int64_t x_column(std::size_t c) const { return tensor_[c] / layout_.y_block(); }
  void indices(std::size_t c, int* idx) const { layout_.unravel(tensor_[c], idx); }

  const std::vector<BoundaryFace>& boundary_faces() const { return faces_; }

  // Level set of the analytic profile: negative inside. Gradient w.r.t. |x|
  // and the y coordinates of the layout is written when requested.
  double level_set(double r, const double* y, double* d_r, double* d_y) const;
  bool inside(double r, const double* y) const;

  friend std::shared_ptr<const WaveguideDomain> build_domain(const ProfileSpec&, const GridSpec&);

 private:
  WaveguideDomain(const ProfileSpec& profile, const GridSpec& spec);

  ProfileSpec profile_;
  GridLayout layout_;
  std::vector<std::int64_t> tensor_;
  std::vector<std::int32_t> lookup_;
  std::vector<double> radius_;
  std::vector<double> weight_;
  std::vector<BoundaryFace> faces_;
};

using DomainPtr = std::shared_ptr<const WaveguideDomain>;

DomainPtr build_domain(const ProfileSpec& profile, const GridSpec& spec);

struct RepulsivityReport {
  double min_slack = 0.0;
  double violating_fraction = 0.0;
  bool verdict = true;
  std::size_t samples = 0;
};

inline constexpr double kTolGeom = 1e-10;

RepulsivityReport audit_repulsivity(const WaveguideDomain& domain, double tol_geom = kTolGeom);

struct FlatTailReport {
  double M = 0.0;                 // from the mask comparison
  double analytic_M = 0.0;        // radius where the profile becomes constant
  std::vector<std::uint8_t> tail_cross_section;
  bool holds = false;
};

FlatTailReport audit_flat_tail(const WaveguideDomain& domain);

// Binary mask: u32 rank, u32 dims[rank], then the active bits packed
// LSB first in tensor order. All integers little endian.
void write_mask(const std::string& path, const WaveguideDomain& domain);
struct MaskFile {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> bits;  // one byte per tensor cell (0/1)
};
MaskFile read_mask(const std::string& path);

}  // namespace wglab
