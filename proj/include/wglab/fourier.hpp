#pragma once

#include <functional>
#include <vector>

#include "wglab/grid_function.hpp"

namespace wglab {

using Multiplier = std::function<Complex(double)>;  // m(|xi|)

// Periodic samples on a row-major box (spacing h on every axis) multiplied
// by m(|xi|) in Fourier space. Frequencies are xi_k = 2 pi k / (P h) with k
// in [-P/2, P/2).
VecC periodic_multiplier(const VecC& v, const std::vector<int>& dims, double h, const Multiplier& m);
VecC periodic_abs_derivative(const VecC& v, const std::vector<int>& dims, double h, double s);

struct XMultiplierResult {
  GridFunction u;
  double outer_fraction = 0.0;  // box mass beyond 3/4 of the box radius, relative
  double box_radius = 0.0;
};

// Applies m(|xi_x|) to f in the x variables: f is extended by zero to a
// periodic box of radius box_factor * extent_x, transformed, and restricted
// back. On radial grids (n = 3 only) data is taken as the l = 0 radial part
// and handled through the odd extension of r f, which is exact for radial
// multipliers in three dimensions.
XMultiplierResult x_multiplier(const GridFunction& f, const Multiplier& m, double box_factor = 2.0);

// |D_x|^s f with the doubled box.
GridFunction abs_derivative_x(const GridFunction& f, double s);
GridFunction half_derivative_x(const GridFunction& f);

}  // namespace wglab
