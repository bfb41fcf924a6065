#include "wglab/fourier.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include <fmt/format.h>

namespace wglab {

namespace {

// FFTW planning is not thread safe; execution on distinct arrays is.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

fftw_plan plan_for(const std::vector<int>& dims, int sign) {
  static std::map<std::pair<std::vector<int>, int>, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(plan_mutex());
  auto key = std::make_pair(dims, sign);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  std::size_t total = 1;
  for (int d : dims) total *= static_cast<std::size_t>(d);
  fftw_complex* buf = fftw_alloc_complex(total);
  // ESTIMATE keeps the plan, and hence the rounding, independent of timing.
  fftw_plan p = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), buf, buf, sign, FFTW_ESTIMATE);
  fftw_free(buf);
  if (!p) fail(ErrorCode::Unsupported, "FFTW could not plan the transform");
  cache.emplace(key, p);
  return p;
}

struct Buffer {
  explicit Buffer(std::size_t n) : size(n), data(fftw_alloc_complex(n)) {
    std::fill(reinterpret_cast<double*>(data), reinterpret_cast<double*>(data) + 2 * n, 0.0);
  }
  ~Buffer() { fftw_free(data); }
  Buffer(const Buffer&) = delete;
  Buffer& operator=(const Buffer&) = delete;
  Complex& operator[](std::size_t i) { return reinterpret_cast<Complex*>(data)[i]; }
  std::size_t size;
  fftw_complex* data;
};

// In-place multiplier on an FFTW buffer laid out row-major over dims.
void apply_multiplier(Buffer& b, const std::vector<int>& dims, double h, const Multiplier& m) {
  fftw_execute_dft(plan_for(dims, FFTW_FORWARD), b.data, b.data);
  const int rank = static_cast<int>(dims.size());
  std::vector<int> k(rank, 0);
  const double scale = 1.0 / static_cast<double>(b.size);
  std::map<double, Complex> memo;  // multiplier values repeat across the box
  for (std::size_t t = 0; t < b.size; ++t) {
    double xi2 = 0.0;
    for (int a = 0; a < rank; ++a) {
      int q = k[a] < (dims[a] + 1) / 2 ? k[a] : k[a] - dims[a];
      double xi = 2.0 * kPi * q / (dims[a] * h);
      xi2 += xi * xi;
    }
    auto it = memo.find(xi2);
    if (it == memo.end()) it = memo.emplace(xi2, m(std::sqrt(xi2))).first;
    b[t] *= it->second * scale;
    for (int a = rank - 1; a >= 0; --a) {
      if (++k[a] < dims[a]) break;
      k[a] = 0;
    }
  }
  fftw_execute_dft(plan_for(dims, FFTW_BACKWARD), b.data, b.data);
}

}  // namespace

VecC periodic_multiplier(const VecC& v, const std::vector<int>& dims, double h, const Multiplier& m) {
  std::size_t total = 1;
  for (int d : dims) total *= static_cast<std::size_t>(d);
  if (static_cast<std::size_t>(v.size()) != total) fail(ErrorCode::InvalidArgument, "sample count does not match the box");
  Buffer b(total);
  for (std::size_t i = 0; i < total; ++i) b[i] = v[static_cast<Eigen::Index>(i)];
  apply_multiplier(b, dims, h, m);
  VecC out(v.size());
  for (std::size_t i = 0; i < total; ++i) out[static_cast<Eigen::Index>(i)] = b[i];
  return out;
}

VecC periodic_abs_derivative(const VecC& v, const std::vector<int>& dims, double h, double s) {
  return periodic_multiplier(v, dims, h, [s](double xi) { return Complex(xi == 0.0 ? 0.0 : std::pow(xi, s)); });
}

XMultiplierResult x_multiplier(const GridFunction& f, const Multiplier& m, double box_factor) {
  const WaveguideDomain& d = *f.domain;
  const GridLayout& lay = d.layout();
  const GridSpec& sp = d.spec();
  if (!(box_factor >= 1.0)) fail(ErrorCode::InvalidArgument, "box factor must be at least 1");
  const double h = sp.h_x;
  const int xa = lay.x_axes();
  XMultiplierResult res;
  res.u = GridFunction(f.domain);

  // Cells grouped by y index, keeping their x indices.
  std::map<std::int64_t, std::vector<std::size_t>> by_y;
  for (std::size_t c = 0; c < d.size(); ++c) by_y[d.y_index(c)].push_back(c);
  int idx[8];
  long double outer = 0.0L, total = 0.0L;

  if (lay.radial_x()) {
    if (sp.n != 3) fail(ErrorCode::Unsupported, "radial x multipliers are implemented for n = 3");
    const int nr = lay.dims()[0];
    const int M = std::max(nr, static_cast<int>(std::ceil(box_factor * nr)));
    res.box_radius = M * h;
    const std::vector<int> dims{2 * M};
    const int outer_from = static_cast<int>(std::ceil(0.75 * M));
    for (const auto& [y, cells] : by_y) {
      Buffer b(2 * M);
      for (std::size_t c : cells) {
        d.indices(c, idx);
        const int i = idx[0];
        const Complex w = lay.x_nodes()[i] * f.values[static_cast<Eigen::Index>(c)];
        b[M + i] = w;
        b[M - 1 - i] = -w;
      }
      apply_multiplier(b, dims, h, m);
      for (std::size_t c : cells) {
        d.indices(c, idx);
        res.u.values[static_cast<Eigen::Index>(c)] = b[M + idx[0]] / lay.x_nodes()[idx[0]];
      }
      for (int i = 0; i < M; ++i) {
        double a2 = std::norm(b[M + i]);
        total += a2;
        if (i >= outer_from) outer += a2;
      }
    }
  } else {
    const int N = lay.dims()[0];
    const int P = std::max(N, 2 * static_cast<int>(std::ceil(0.5 * box_factor * N)));
    const int off = (P - N) / 2;
    res.box_radius = 0.5 * P * h;
    const std::vector<int> dims(xa, P);
    for (const auto& [y, cells] : by_y) {
      Buffer b(static_cast<std::size_t>(std::pow(P, xa)));
      auto pos = [&](const int* id) {
        std::size_t p = 0;
        for (int a = 0; a < xa; ++a) p = p * P + (id[a] + off);
        return p;
      };
      for (std::size_t c : cells) {
        d.indices(c, idx);
        b[pos(idx)] = f.values[static_cast<Eigen::Index>(c)];
      }
      apply_multiplier(b, dims, h, m);
      for (std::size_t c : cells) {
        d.indices(c, idx);
        res.u.values[static_cast<Eigen::Index>(c)] = b[pos(idx)];
      }
      std::vector<int> k(xa, 0);
      for (std::size_t t = 0; t < b.size; ++t) {
        double a2 = std::norm(b[t]);
        total += a2;
        double far = 0.0;
        for (int a = 0; a < xa; ++a) far = std::max(far, std::abs((k[a] + 0.5) - 0.5 * P));
        if (far > 0.375 * P) outer += a2;
        for (int a = xa - 1; a >= 0; --a) {
          if (++k[a] < P) break;
          k[a] = 0;
        }
      }
    }
  }
  res.outer_fraction = total > 0 ? static_cast<double>(outer / total) : 0.0;
  return res;
}

GridFunction abs_derivative_x(const GridFunction& f, double s) {
  return x_multiplier(f, [s](double xi) { return Complex(xi == 0.0 ? 0.0 : std::pow(xi, s)); }, 2.0).u;
}

GridFunction half_derivative_x(const GridFunction& f) { return abs_derivative_x(f, 0.5); }

}  // namespace wglab
