#include "wglab/grid_function.hpp"

#include <cmath>

namespace wglab {

GridFunction::GridFunction(DomainPtr d) : domain(std::move(d)) {
  values = VecC::Zero(static_cast<Eigen::Index>(domain->size()));
}

GridFunction::GridFunction(DomainPtr d, VecC v) : domain(std::move(d)), values(std::move(v)) {
  if (static_cast<std::size_t>(values.size()) != domain->size())
    fail(ErrorCode::InvalidArgument, "field size does not match the domain");
}

CellPoint cell_point(const WaveguideDomain& d, std::size_t c) {
  const GridLayout& lay = d.layout();
  int idx[8];
  d.indices(c, idx);
  CellPoint p;
  p.r = d.radius(c);
  for (int a = 0; a < lay.x_axes(); ++a) p.x[a] = lay.x_nodes()[idx[a]];
  for (int a = 0; a < lay.y_axes(); ++a) p.y[a] = lay.y_nodes()[idx[lay.x_axes() + a]];
  return p;
}

GridFunction sample(DomainPtr d, const FieldFn& fn) {
  GridFunction f(d);
  for (std::size_t c = 0; c < d->size(); ++c) f.values[c] = fn(cell_point(*d, c));
  return f;
}

Complex inner(const GridFunction& f, const GridFunction& g) {
  const auto& w = f.domain->weights();
  std::vector<Complex> t(f.size());
  for (std::size_t c = 0; c < t.size(); ++c) t[c] = w[c] * f.values[c] * std::conj(g.values[c]);
  return pairwise_sum(std::span<const Complex>(t));
}

double l2_norm_sq(const GridFunction& f) {
  const auto& w = f.domain->weights();
  std::vector<double> t(f.size());
  for (std::size_t c = 0; c < t.size(); ++c) t[c] = w[c] * std::norm(f.values[c]);
  return pairwise_sum(t);
}

double l2_norm(const GridFunction& f) { return std::sqrt(l2_norm_sq(f)); }

VecC to_symmetric(const GridFunction& f) {
  const auto& w = f.domain->weights();
  VecC out(f.values.size());
  for (Eigen::Index c = 0; c < out.size(); ++c) out[c] = std::sqrt(w[c]) * f.values[c];
  return out;
}

GridFunction from_symmetric(DomainPtr d, const VecC& v) {
  const auto& w = d->weights();
  VecC out(v.size());
  for (Eigen::Index c = 0; c < out.size(); ++c) out[c] = v[c] / std::sqrt(w[c]);
  return GridFunction(std::move(d), std::move(out));
}

}  // namespace wglab
