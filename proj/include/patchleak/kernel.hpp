#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "patchleak/features.hpp"

namespace patchleak {

// Feature vectors here are mostly one-hot blocks, so kernel evaluation works on nonzeros only.
struct SparseVector {
  std::vector<std::uint32_t> index;
  std::vector<double> value;
  double squared_norm = 0.0;
};

SparseVector to_sparse(const FeatureVector& v);
double squared_distance(const SparseVector& a, const SparseVector& b);

// Dense symmetric matrix of pairwise squared distances, stored in single precision.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(std::span<const SparseVector> rows);

  std::size_t size() const { return n_; }
  const float* row(std::size_t i) const { return data_.data() + i * n_; }

 private:
  std::size_t n_;
  std::vector<float> data_;
};

// exp(-gamma * d^2) over a DistanceMatrix.
class KernelMatrix {
 public:
  KernelMatrix(const DistanceMatrix& distances, double gamma);

  std::size_t size() const { return n_; }
  double gamma() const { return gamma_; }
  const float* row(std::size_t i) const { return data_.data() + i * n_; }
  float at(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

 private:
  std::size_t n_;
  double gamma_;
  std::vector<float> data_;
};

// Row-major square kernel block, either a whole KernelMatrix or a gathered sub-block.
struct KernelView {
  const float* data = nullptr;
  std::size_t n = 0;

  const float* row(std::size_t i) const { return data + i * n; }
};

inline KernelView view_of(const KernelMatrix& k) { return {k.row(0), k.size()}; }

// Contiguous copy of the rows and columns of `kernel` listed in `subset`.
std::vector<float> gather(const KernelMatrix& kernel, std::span<const std::uint32_t> subset);

enum class WorkingSetRule {
  max_violating_pair,  // first-order: the most KKT-violating (i, j)
  second_order,        // i as above, j by largest guaranteed objective decrease
};

struct SolverOptions {
  double tolerance = 1e-3;
  std::uint64_t max_iterations = 10'000'000;
  WorkingSetRule working_set = WorkingSetRule::max_violating_pair;
  bool shrinking = true;  // temporarily drop variables stuck at a bound; final answer checked on all
};

struct DualSolution {
  std::vector<double> alpha;  // one per subset element, in [0, C]
  double rho = 0.0;           // decision(x) = sum alpha_i y_i K(x_i, x) - rho
  std::uint64_t iterations = 0;
  bool converged = false;
};

// Two-coordinate sequential minimisation of the C-SVM dual
//   min 1/2 a'Qa - e'a  s.t.  y'a = 0, 0 <= a <= C,  Q_ij = y_i y_j K_ij
// restricted to the rows of `kernel` listed in `subset`. `labels` are +1/-1 per subset element.
DualSolution solve_dual(const KernelMatrix& kernel, std::span<const std::uint32_t> subset,
                        std::span<const std::int8_t> labels, double c, const SolverOptions& options = {});
DualSolution solve_dual(KernelView kernel, std::span<const std::int8_t> labels, double c,
                        const SolverOptions& options = {});

}  // namespace patchleak
