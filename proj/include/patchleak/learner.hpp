#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchleak/features.hpp"
#include "patchleak/kernel.hpp"

namespace patchleak {

struct KernelParams {
  double gamma = 1.0;
  double c = 1.0;

  bool operator==(const KernelParams&) const = default;
};

struct Dataset {
  std::vector<FeatureVector> inputs;
  std::vector<bool> labels;  // true = security

  std::size_t size() const { return inputs.size(); }
};

// P(security | f) = 1 / (1 + exp(a f + b)).
struct SigmoidCalibration {
  double a = 0.0;
  double b = 0.0;
  bool degenerate = false;  // class-prior constant used instead of a fitted slope

  double probability(double decision) const;
  bool operator==(const SigmoidCalibration&) const = default;
};

struct TrainedModel {
  KernelParams params;
  std::vector<FeatureVector> support_vectors;
  std::vector<double> dual_coefficients;  // alpha_i * y_i
  double bias = 0.0;
  std::optional<SigmoidCalibration> calibration;
  bool converged = true;
  std::uint64_t iterations = 0;

  double decision(const FeatureVector& x) const;
  std::vector<double> decisions(std::span<const FeatureVector> xs) const;

  bool operator==(const TrainedModel&) const = default;
};

double rbf_kernel(const FeatureVector& x, const FeatureVector& y, double gamma);

TrainedModel train(const Dataset& data, const KernelParams& params, const SolverOptions& options = {});

// Sigmoid fitted on 3-fold out-of-fold decision values of models trained with the same parameters.
TrainedModel calibrate(TrainedModel model, const Dataset& data, std::uint64_t seed = 0,
                       const SolverOptions& options = {});

// Regularised maximum-likelihood sigmoid fit (Newton with backtracking line search).
SigmoidCalibration fit_sigmoid(std::span<const double> decisions, const std::vector<bool>& labels);

double score(const TrainedModel& model, const FeatureVector& x);

// C in {2^-5, 2^-3, ..., 2^15} x gamma in {2^-15, 2^-13, ..., 2^3}, C-major.
std::vector<KernelParams> default_grid();
// C in {2^-5, 2^-1, 2^3} x gamma in {2^-15, 2^-11, 2^-7, 2^-3}, a subset of default_grid() cheap
// enough to rerun at every training cut of a long simulation.
std::vector<KernelParams> coarse_grid();

struct GridSearchResult {
  KernelParams best;
  std::size_t best_index = 0;
  std::vector<double> accuracy;  // CV accuracy per grid point, grid order
};

GridSearchResult grid_search_detailed(const Dataset& data, std::span<const KernelParams> grid, int folds = 5,
                                      std::uint64_t seed = 0, const SolverOptions& options = {});
KernelParams grid_search(const Dataset& data, std::span<const KernelParams> grid, int folds = 5,
                         std::uint64_t seed = 0, const SolverOptions& options = {});

// Stratified fold assignment: members of each class are shuffled with `seed` and dealt round-robin.
// Throws SingleClassTrainingSet / SingleClassFold / InsufficientData.
std::vector<int> stratified_folds(std::span<const std::int8_t> labels, int folds, std::uint64_t seed);

// Precomputed pairwise distances for one set of inputs, shared by grid search, the final fit and
// calibration. Kernel matrices are cached per gamma.
class KernelWorkspace {
 public:
  explicit KernelWorkspace(std::span<const FeatureVector> inputs);

  std::size_t size() const { return sparse_.size(); }
  std::size_t dimension() const { return dimension_; }
  const SparseVector& sparse(std::size_t i) const { return sparse_[i]; }
  const KernelMatrix& kernel(double gamma);
  void release_kernels() { kernels_.clear(); }

 private:
  std::size_t dimension_ = 0;
  std::vector<SparseVector> sparse_;
  std::unique_ptr<DistanceMatrix> distances_;
  std::map<double, std::unique_ptr<KernelMatrix>> kernels_;
};

GridSearchResult grid_search(KernelWorkspace& ws, std::span<const std::int8_t> labels,
                             std::span<const KernelParams> grid, int folds, std::uint64_t seed,
                             const SolverOptions& options = {});

// Trains on every workspace row and calibrates on out-of-fold decision values.
TrainedModel fit_calibrated(KernelWorkspace& ws, std::span<const FeatureVector> inputs,
                            std::span<const std::int8_t> labels, const KernelParams& params, std::uint64_t seed,
                            const SolverOptions& options = {});

std::string model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const std::string& text);

}  // namespace patchleak
