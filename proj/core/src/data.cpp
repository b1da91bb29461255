#include "rdmd/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace rdmd {

void EightGaussians::validate() const {
  if (!(radius > 0.0) || !(std > 0.0)) throw std::invalid_argument("EightGaussians: radius and std must be positive");
}

PairSet::PairSet(Tensor in, Tensor out) : inputs(std::move(in)), outputs(std::move(out)) {
  if (inputs.shape() != outputs.shape() || inputs.rank() != 2) throw ShapeError("PairSet", inputs.shape(), outputs.shape());
}

Tensor sample_source_gaussian(std::size_t n, Rng& rng, std::size_t dim) {
  if (n == 0) throw std::invalid_argument("sample_source_gaussian: n must be >= 1");
  Tensor out({n, dim});
  rng.fill_normal(out.values());
  return out;
}

Tensor sample_8gaussians(std::size_t n, Rng& rng, const EightGaussians& geometry) {
  if (n == 0) throw std::invalid_argument("sample_8gaussians: n must be >= 1");
  geometry.validate();
  Tensor out({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    const double angle = static_cast<double>(rng.below(8)) * std::numbers::pi / 4.0;
    double z[2];
    rng.fill_normal(z);
    out.at(i, 0) = geometry.radius * std::cos(angle) + geometry.std * z[0];
    out.at(i, 1) = geometry.radius * std::sin(angle) + geometry.std * z[1];
  }
  return out;
}

double transport_cost_sq(const PairSet& pairs) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pairs.inputs.numel(); ++i) {
    const double d = pairs.inputs[i] - pairs.outputs[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pairs.size());
}

double transport_cost_rms(const PairSet& pairs) {
  return std::sqrt(transport_cost_sq(pairs) / static_cast<double>(pairs.dim()));
}

namespace {

double mean_pairwise_distance(const Tensor& a, const Tensor& b) {
  const std::size_t d = a.cols();
  const std::size_t na = a.rows(), nb = b.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < na; ++i) {
    const double* pa = a.data() + i * d;
    double row = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      const double* pb = b.data() + j * d;
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = pa[k] - pb[k];
        s += diff * diff;
      }
      row += std::sqrt(s);
    }
    total += row;
  }
  return total / (static_cast<double>(na) * static_cast<double>(nb));
}

}  // namespace

double energy_distance(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) throw ShapeError("energy_distance", a.shape(), b.shape());
  const double ab = mean_pairwise_distance(a, b);
  const double aa = mean_pairwise_distance(a, a);
  const double bb = mean_pairwise_distance(b, b);
  return 2.0 * ab - aa - bb;
}

namespace {

std::vector<double> project_sorted(const Tensor& x, const std::vector<double>& dir) {
  const std::size_t d = x.cols();
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += x.data()[i * d + k] * dir[k];
    out[i] = s;
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Empirical quantile (left-continuous inverse CDF) at level q in (0, 1).
double quantile(const std::vector<double>& sorted, double q) {
  const auto n = static_cast<double>(sorted.size());
  auto idx = static_cast<std::size_t>(std::ceil(q * n)) ;
  idx = std::clamp<std::size_t>(idx, 1, sorted.size());
  return sorted[idx - 1];
}

}  // namespace

double sliced_w2(const Tensor& a, const Tensor& b, std::size_t n_projections, Rng& rng) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) throw ShapeError("sliced_w2", a.shape(), b.shape());
  if (n_projections == 0) throw std::invalid_argument("sliced_w2: need at least one projection");
  const std::size_t d = a.cols();
  const std::size_t m = std::max(a.rows(), b.rows());
  double total = 0.0;
  std::vector<double> dir(d);
  for (std::size_t p = 0; p < n_projections; ++p) {
    double norm = 0.0;
    do {
      rng.fill_normal(dir);
      norm = std::sqrt(std::inner_product(dir.begin(), dir.end(), dir.begin(), 0.0));
    } while (norm == 0.0);
    for (auto& v : dir) v /= norm;
    const auto pa = project_sorted(a, dir);
    const auto pb = project_sorted(b, dir);
    double acc = 0.0;
    if (pa.size() == pb.size()) {
      for (std::size_t i = 0; i < m; ++i) acc += (pa[i] - pb[i]) * (pa[i] - pb[i]);
    } else {
      for (std::size_t i = 0; i < m; ++i) {
        const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
        const double diff = quantile(pa, q) - quantile(pb, q);
        acc += diff * diff;
      }
    }
    total += acc / static_cast<double>(m);
  }
  return total / static_cast<double>(n_projections);
}

namespace {

double orient(const double* a, const double* b, const double* c) {
  return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

}  // namespace

bool segments_cross(const double* p1, const double* p2, const double* q1, const double* q2) {
  // Strict sign tests: touching endpoints and collinear overlaps do not count.
  const double d1 = orient(q1, q2, p1);
  const double d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1);
  const double d4 = orient(p1, p2, q2);
  return ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0));
}

std::uint64_t crossing_count(const PairSet& pairs, std::size_t m, Rng& rng) {
  if (pairs.dim() != 2) throw std::invalid_argument("crossing_count: segments are only defined in the plane (d = 2)");
  if (m < 2) throw std::invalid_argument("crossing_count: need m >= 2");
  const std::size_t n = pairs.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (m < n) {
    // Partial Fisher-Yates: the first m entries are a uniform subset.
    for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    idx.resize(m);
  }
  std::uint64_t count = 0;
  const double* in = pairs.inputs.data();
  const double* out = pairs.outputs.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const double* p1 = in + 2 * idx[i];
    const double* p2 = out + 2 * idx[i];
    const double minx = std::min(p1[0], p2[0]), maxx = std::max(p1[0], p2[0]);
    const double miny = std::min(p1[1], p2[1]), maxy = std::max(p1[1], p2[1]);
    for (std::size_t j = i + 1; j < idx.size(); ++j) {
      const double* q1 = in + 2 * idx[j];
      const double* q2 = out + 2 * idx[j];
      if (std::max(q1[0], q2[0]) < minx || std::min(q1[0], q2[0]) > maxx) continue;
      if (std::max(q1[1], q2[1]) < miny || std::min(q1[1], q2[1]) > maxy) continue;
      if (segments_cross(p1, p2, q1, q2)) ++count;
    }
  }
  return count;
}

}  // namespace rdmd
