#pragma once

#include <cstddef>
#include <cstdint>

#include "rdmd/rng.hpp"
#include "rdmd/tensor.hpp"

namespace rdmd {

struct EightGaussians {
  double radius = 10.0;
  double std = 0.5;

  void validate() const;
  friend bool operator==(const EightGaussians&, const EightGaussians&) = default;
};

// Inputs and the generator outputs they map to, row for row.
struct PairSet {
  Tensor inputs;
  Tensor outputs;

  PairSet(Tensor in, Tensor out);
  std::size_t size() const { return inputs.rows(); }
  std::size_t dim() const { return inputs.cols(); }
};

Tensor sample_source_gaussian(std::size_t n, Rng& rng, std::size_t dim = 2);
Tensor sample_8gaussians(std::size_t n, Rng& rng, const EightGaussians& geometry = {});

// sqrt of the mean over rows and coordinates of squared differences.
double transport_cost_rms(const PairSet& pairs);
// Mean over rows of ||x - y||^2 (the optimized cost).
double transport_cost_sq(const PairSet& pairs);

// V-statistic 2E|A-B| - E|A-A'| - E|B-B'|, so identical sets give exactly 0.
double energy_distance(const Tensor& a, const Tensor& b);
// Mean over random unit directions of the squared 1D quantile distance.
double sliced_w2(const Tensor& a, const Tensor& b, std::size_t n_projections, Rng& rng);

// Proper intersections among m randomly chosen input->output segments.
// m >= size uses every pair.
std::uint64_t crossing_count(const PairSet& pairs, std::size_t m, Rng& rng);
bool segments_cross(const double* p1, const double* p2, const double* q1, const double* q2);

}  // namespace rdmd
