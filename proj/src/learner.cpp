#include "patchleak/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"

#include "patchleak/errors.hpp"
#include "patchleak/parallel.hpp"

namespace patchleak {

namespace {

constexpr int kCalibrationFolds = 3;
constexpr int kModelFormatVersion = 1;

std::vector<std::int8_t> signed_labels(const std::vector<bool>& labels) {
  std::vector<std::int8_t> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] ? 1 : -1;
  return y;
}

void require_both_classes(std::span<const std::int8_t> y) {
  const bool pos = std::find(y.begin(), y.end(), 1) != y.end();
  const bool neg = std::find(y.begin(), y.end(), -1) != y.end();
  if (!pos || !neg) throw SingleClassTrainingSet("training data must contain both classes");
}

void check_dimensions(std::span<const FeatureVector> inputs) {
  for (const FeatureVector& v : inputs)
    if (v.size() != inputs.front().size()) throw DimensionMismatch("training vectors differ in dimension");
}

// Decision value for kernel row `target` of a solution trained on `subset`.
double subset_decision(const KernelMatrix& k, std::span<const std::uint32_t> subset, std::span<const std::int8_t> y,
                       const DualSolution& sol, std::size_t target) {
  const float* row = k.row(target);
  double sum = 0.0;
  for (std::size_t t = 0; t < subset.size(); ++t)
    if (sol.alpha[t] > 0.0) sum += sol.alpha[t] * y[t] * row[subset[t]];
  return sum - sol.rho;
}

double sparse_kernel(const SparseVector& a, const SparseVector& b, double gamma) {
  return std::exp(-gamma * squared_distance(a, b));
}

double sigmoid_objective(std::span<const double> dec, std::span<const double> target, double a, double b) {
  double f = 0.0;
  for (std::size_t i = 0; i < dec.size(); ++i) {
    const double z = dec[i] * a + b;
    if (z >= 0.0) f += target[i] * z + std::log1p(std::exp(-z));
    else f += (target[i] - 1.0) * z + std::log1p(std::exp(z));
  }
  return f;
}

// Out-of-fold decision values for calibration. A fold whose training part holds one class
// contributes +1 or -1 for that class instead of a trained decision.
std::vector<double> out_of_fold_decisions(KernelWorkspace& ws, std::span<const std::int8_t> y,
                                          const KernelParams& params, std::uint64_t seed,
                                          const SolverOptions& options) {
  const std::size_t n = y.size();
  std::vector<int> fold;
  try {
    fold = stratified_folds(y, kCalibrationFolds, seed);
  } catch (const Error&) {
    fold.resize(n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t r = 0; r < n; ++r) fold[order[r]] = static_cast<int>(r % kCalibrationFolds);
  }

  const KernelMatrix& k = ws.kernel(params.gamma);
  std::vector<double> dec(n, 0.0);
  for (int f = 0; f < kCalibrationFolds; ++f) {
    std::vector<std::uint32_t> subset;
    std::vector<std::int8_t> sub_y;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold[i] == f) continue;
      subset.push_back(static_cast<std::uint32_t>(i));
      sub_y.push_back(y[i]);
    }
    const bool pos = std::find(sub_y.begin(), sub_y.end(), 1) != sub_y.end();
    const bool neg = std::find(sub_y.begin(), sub_y.end(), -1) != sub_y.end();
    if (!pos || !neg) {
      for (std::size_t i = 0; i < n; ++i)
        if (fold[i] == f) dec[i] = pos ? 1.0 : -1.0;
      continue;
    }
    const DualSolution sol = solve_dual(k, subset, sub_y, params.c, options);
    for (std::size_t i = 0; i < n; ++i)
      if (fold[i] == f) dec[i] = subset_decision(k, subset, sub_y, sol, i);
  }
  return dec;
}

TrainedModel model_from_solution(std::span<const FeatureVector> inputs, std::span<const std::int8_t> y,
                                 const KernelParams& params, const DualSolution& sol) {
  TrainedModel m;
  m.params = params;
  m.bias = -sol.rho;
  m.converged = sol.converged;
  m.iterations = sol.iterations;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (sol.alpha[i] <= 0.0) continue;
    m.support_vectors.push_back(inputs[i]);
    m.dual_coefficients.push_back(sol.alpha[i] * y[i]);
  }
  return m;
}

}  // namespace

double SigmoidCalibration::probability(double decision) const {
  const double z = a * decision + b;
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

double rbf_kernel(const FeatureVector& x, const FeatureVector& y, double gamma) {
  if (x.size() != y.size()) throw DimensionMismatch("kernel arguments differ in dimension");
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = x.values[i] - y.values[i];
    d += t * t;
  }
  return std::exp(-gamma * d);
}

double TrainedModel::decision(const FeatureVector& x) const {
  double sum = bias;
  for (std::size_t i = 0; i < support_vectors.size(); ++i)
    sum += dual_coefficients[i] * rbf_kernel(support_vectors[i], x, params.gamma);
  return sum;
}

std::vector<double> TrainedModel::decisions(std::span<const FeatureVector> xs) const {
  std::vector<SparseVector> svs;
  svs.reserve(support_vectors.size());
  for (const FeatureVector& sv : support_vectors) svs.push_back(to_sparse(sv));
  const std::size_t dim = support_vectors.empty() ? 0 : support_vectors.front().size();
  std::vector<double> out(xs.size(), bias);
  for (std::size_t j = 0; j < xs.size(); ++j) {
    if (!svs.empty() && xs[j].size() != dim) throw DimensionMismatch("input dimension differs from the model");
    const SparseVector x = to_sparse(xs[j]);
    double sum = bias;
    for (std::size_t i = 0; i < svs.size(); ++i) sum += dual_coefficients[i] * sparse_kernel(svs[i], x, params.gamma);
    out[j] = sum;
  }
  return out;
}

std::vector<int> stratified_folds(std::span<const std::int8_t> labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw InvalidConfig("cross-validation needs at least 2 folds");
  if (labels.size() < static_cast<std::size_t>(folds))
    throw InsufficientData("cannot split " + std::to_string(labels.size()) + " examples into " +
                           std::to_string(folds) + " folds");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] > 0 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw SingleClassTrainingSet("training data must contain both classes");
  if (pos.size() < 2 || neg.size() < 2)
    throw SingleClassFold("a class with a single member leaves some training fold with one class");

  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  std::vector<int> fold(labels.size());
  std::size_t dealt = 0;
  for (const auto* group : {&pos, &neg})
    for (std::size_t i : *group) fold[i] = static_cast<int>(dealt++ % static_cast<std::size_t>(folds));
  return fold;
}

KernelWorkspace::KernelWorkspace(std::span<const FeatureVector> inputs) {
  if (!inputs.empty()) {
    check_dimensions(inputs);
    dimension_ = inputs.front().size();
  }
  sparse_.reserve(inputs.size());
  for (const FeatureVector& v : inputs) sparse_.push_back(to_sparse(v));
  distances_ = std::make_unique<DistanceMatrix>(sparse_);
}

const KernelMatrix& KernelWorkspace::kernel(double gamma) {
  auto it = kernels_.find(gamma);
  if (it == kernels_.end()) it = kernels_.emplace(gamma, std::make_unique<KernelMatrix>(*distances_, gamma)).first;
  return *it->second;
}

std::vector<KernelParams> default_grid() {
  std::vector<KernelParams> grid;
  for (int c = -5; c <= 15; c += 2)
    for (int g = -15; g <= 3; g += 2) grid.push_back({std::ldexp(1.0, g), std::ldexp(1.0, c)});
  return grid;
}

std::vector<KernelParams> coarse_grid() {
  std::vector<KernelParams> grid;
  for (int c : {-5, -1, 3})
    for (int g : {-15, -11, -7, -3}) grid.push_back({std::ldexp(1.0, g), std::ldexp(1.0, c)});
  return grid;
}

GridSearchResult grid_search(KernelWorkspace& ws, std::span<const std::int8_t> labels,
                             std::span<const KernelParams> grid, int folds, std::uint64_t seed,
                             const SolverOptions& options) {
  if (grid.empty()) throw InvalidConfig("empty parameter grid");
  if (labels.size() != ws.size()) throw DimensionMismatch("labels and workspace differ in size");
  const std::vector<int> fold = stratified_folds(labels, folds, seed);
  const std::size_t n = labels.size();

  struct Split {
    std::vector<std::uint32_t> train;
    std::vector<std::int8_t> train_y;
    std::vector<std::size_t> held_out;
  };
  std::vector<Split> splits(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < n; ++i) {
    for (int f = 0; f < folds; ++f) {
      Split& s = splits[static_cast<std::size_t>(f)];
      if (fold[i] == f) {
        s.held_out.push_back(i);
      } else {
        s.train.push_back(static_cast<std::uint32_t>(i));
        s.train_y.push_back(labels[i]);
      }
    }
  }

  GridSearchResult result;
  result.accuracy.assign(grid.size(), 0.0);
  std::vector<double> gammas;
  for (const KernelParams& p : grid)
    if (std::find(gammas.begin(), gammas.end(), p.gamma) == gammas.end()) gammas.push_back(p.gamma);

  for (double gamma : gammas) {
    std::vector<std::size_t> points;
    for (std::size_t g = 0; g < grid.size(); ++g)
      if (grid[g].gamma == gamma) points.push_back(g);
    const KernelMatrix& k = ws.kernel(gamma);
    std::vector<std::size_t> correct(points.size(), 0);
    for (const Split& s : splits) {
      const std::vector<float> block = gather(k, s.train);
      const KernelView view{block.data(), s.train.size()};
      parallel_for(points.size(), [&](std::size_t p) {
        const DualSolution sol = solve_dual(view, s.train_y, grid[points[p]].c, options);
        for (std::size_t h : s.held_out) {
          const std::int8_t predicted = subset_decision(k, s.train, s.train_y, sol, h) > 0.0 ? 1 : -1;
          if (predicted == labels[h]) ++correct[p];
        }
      });
    }
    for (std::size_t p = 0; p < points.size(); ++p)
      result.accuracy[points[p]] = static_cast<double>(correct[p]) / static_cast<double>(n);
    ws.release_kernels();
  }

  for (std::size_t g = 1; g < grid.size(); ++g)
    if (result.accuracy[g] > result.accuracy[result.best_index]) result.best_index = g;
  result.best = grid[result.best_index];
  return result;
}

GridSearchResult grid_search_detailed(const Dataset& data, std::span<const KernelParams> grid, int folds,
                                      std::uint64_t seed, const SolverOptions& options) {
  if (data.labels.size() != data.inputs.size()) throw DimensionMismatch("inputs and labels differ in length");
  const std::vector<std::int8_t> y = signed_labels(data.labels);
  if (grid.empty()) throw InvalidConfig("empty parameter grid");
  stratified_folds(y, folds, seed);  // validate before building the workspace
  KernelWorkspace ws(data.inputs);
  return grid_search(ws, y, grid, folds, seed, options);
}

KernelParams grid_search(const Dataset& data, std::span<const KernelParams> grid, int folds, std::uint64_t seed,
                         const SolverOptions& options) {
  return grid_search_detailed(data, grid, folds, seed, options).best;
}

TrainedModel train(const Dataset& data, const KernelParams& params, const SolverOptions& options) {
  if (data.labels.size() != data.inputs.size()) throw DimensionMismatch("inputs and labels differ in length");
  if (!(params.gamma > 0.0) || !(params.c > 0.0)) throw InvalidConfig("gamma and C must be positive");
  const std::vector<std::int8_t> y = signed_labels(data.labels);
  require_both_classes(y);
  KernelWorkspace ws(data.inputs);
  std::vector<std::uint32_t> all(data.size());
  std::iota(all.begin(), all.end(), 0u);
  const DualSolution sol = solve_dual(ws.kernel(params.gamma), all, y, params.c, options);
  return model_from_solution(data.inputs, y, params, sol);
}

SigmoidCalibration fit_sigmoid(std::span<const double> dec, const std::vector<bool>& labels) {
  if (dec.size() != labels.size()) throw DimensionMismatch("decision values and labels differ in length");
  if (dec.empty()) throw EmptyInput("cannot calibrate on an empty set");
  const double prior1 = static_cast<double>(std::count(labels.begin(), labels.end(), true));
  const double prior0 = static_cast<double>(labels.size()) - prior1;
  const SigmoidCalibration prior{0.0, std::log((prior0 + 1.0) / (prior1 + 1.0)), true};
  const bool constant = std::all_of(dec.begin(), dec.end(), [&](double d) { return d == dec.front(); });
  if (constant || prior1 == 0.0 || prior0 == 0.0) return prior;

  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(dec.size());
  for (std::size_t i = 0; i < dec.size(); ++i) t[i] = labels[i] ? hi : lo;

  constexpr int kMaxIterations = 100;
  constexpr double kMinStep = 1e-10;
  constexpr double kSigma = 1e-12;
  double a = 0.0;
  double b = prior.b;
  double fval = sigmoid_objective(dec, t, a, b);
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < dec.size(); ++i) {
      const double z = dec[i] * a + b;
      double p, q;
      if (z >= 0.0) {
        const double e = std::exp(-z);
        p = e / (1.0 + e);
        q = 1.0 / (1.0 + e);
      } else {
        const double e = std::exp(z);
        p = 1.0 / (1.0 + e);
        q = e / (1.0 + e);
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;

    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= kMinStep) {
      const double na = a + step * da;
      const double nb = b + step * db;
      const double nf = sigmoid_objective(dec, t, na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;
  }
  // A non-negative slope would invert the decision order.
  if (!(a < 0.0)) return prior;
  return {a, b, false};
}

TrainedModel fit_calibrated(KernelWorkspace& ws, std::span<const FeatureVector> inputs,
                            std::span<const std::int8_t> labels, const KernelParams& params, std::uint64_t seed,
                            const SolverOptions& options) {
  if (inputs.size() != ws.size() || labels.size() != ws.size())
    throw DimensionMismatch("inputs, labels and workspace differ in size");
  require_both_classes(labels);
  std::vector<std::uint32_t> all(ws.size());
  std::iota(all.begin(), all.end(), 0u);
  const DualSolution sol = solve_dual(ws.kernel(params.gamma), all, labels, params.c, options);
  TrainedModel model = model_from_solution(inputs, labels, params, sol);

  const std::vector<double> dec = out_of_fold_decisions(ws, labels, params, seed, options);
  std::vector<bool> truth(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) truth[i] = labels[i] > 0;
  model.calibration = fit_sigmoid(dec, truth);
  return model;
}

TrainedModel calibrate(TrainedModel model, const Dataset& data, std::uint64_t seed, const SolverOptions& options) {
  if (data.labels.size() != data.inputs.size()) throw DimensionMismatch("inputs and labels differ in length");
  const std::vector<std::int8_t> y = signed_labels(data.labels);
  require_both_classes(y);
  KernelWorkspace ws(data.inputs);
  const std::vector<double> dec = out_of_fold_decisions(ws, y, model.params, seed, options);
  model.calibration = fit_sigmoid(dec, data.labels);
  return model;
}

double score(const TrainedModel& model, const FeatureVector& x) {
  if (!model.calibration) throw UncalibratedModel("model has no probability calibration");
  return model.calibration->probability(model.decision(x));
}

std::string model_to_json(const TrainedModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "patchleak-model";
  j["version"] = kModelFormatVersion;
  j["params"] = {{"gamma", model.params.gamma}, {"c", model.params.c}};
  j["bias"] = model.bias;
  j["converged"] = model.converged;
  j["iterations"] = model.iterations;
  j["dual_coefficients"] = model.dual_coefficients;
  j["support_vectors"] = nlohmann::ordered_json::array();
  for (const FeatureVector& sv : model.support_vectors) j["support_vectors"].push_back(sv.values);
  if (model.calibration)
    j["calibration"] = {
        {"a", model.calibration->a}, {"b", model.calibration->b}, {"degenerate", model.calibration->degenerate}};
  else
    j["calibration"] = nullptr;
  return j.dump();
}

TrainedModel model_from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("format") != "patchleak-model") throw ParseError("not a patchleak model document");
    if (j.at("version").get<int>() != kModelFormatVersion)
      throw ParseError("unsupported model version " + j.at("version").dump());
    TrainedModel m;
    m.params = {j.at("params").at("gamma").get<double>(), j.at("params").at("c").get<double>()};
    m.bias = j.at("bias").get<double>();
    m.converged = j.at("converged").get<bool>();
    m.iterations = j.at("iterations").get<std::uint64_t>();
    m.dual_coefficients = j.at("dual_coefficients").get<std::vector<double>>();
    for (const auto& sv : j.at("support_vectors")) m.support_vectors.push_back({sv.get<std::vector<double>>()});
    if (m.support_vectors.size() != m.dual_coefficients.size())
      throw ParseError("support vector and coefficient counts differ");
    if (!j.at("calibration").is_null()) {
      const auto& c = j.at("calibration");
      m.calibration = SigmoidCalibration{c.at("a").get<double>(), c.at("b").get<double>(), c.at("degenerate").get<bool>()};
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model document: ") + e.what());
  }
}

}  // namespace patchleak
