#pragma once

#include <functional>

#include "wglab/geometry.hpp"

namespace wglab {

// Complex field on the active cells of a domain. The quadrature weight of a
// cell is its volume including the radial Jacobians of reduced modes.
struct GridFunction {
  DomainPtr domain;
  VecC values;

  GridFunction() = default;
  explicit GridFunction(DomainPtr d);
  GridFunction(DomainPtr d, VecC v);

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

// Coordinates of a cell: |x| plus the layout's x axes (one radial axis or n
// Cartesian axes) and y axes.
struct CellPoint {
  double r = 0.0;
  double x[6] = {0, 0, 0, 0, 0, 0};
  double y[4] = {0, 0, 0, 0};
};

CellPoint cell_point(const WaveguideDomain& d, std::size_t c);

using FieldFn = std::function<Complex(const CellPoint&)>;
GridFunction sample(DomainPtr d, const FieldFn& fn);

Complex inner(const GridFunction& f, const GridFunction& g);  // sum W f conj(g)
double l2_norm(const GridFunction& f);
double l2_norm_sq(const GridFunction& f);

// Coordinates where the operator is symmetric: w = sqrt(W) u.
VecC to_symmetric(const GridFunction& f);
GridFunction from_symmetric(DomainPtr d, const VecC& w);

}  // namespace wglab
