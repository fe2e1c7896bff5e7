#include "patchleak/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "patchleak/errors.hpp"

namespace patchleak {

SparseVector to_sparse(const FeatureVector& v) {
  SparseVector s;
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    if (v.values[i] == 0.0) continue;
    s.index.push_back(static_cast<std::uint32_t>(i));
    s.value.push_back(v.values[i]);
    s.squared_norm += v.values[i] * v.values[i];
  }
  return s;
}

double squared_distance(const SparseVector& a, const SparseVector& b) {
  double sum = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.index.size() && j < b.index.size()) {
    if (a.index[i] == b.index[j]) {
      const double d = a.value[i++] - b.value[j++];
      sum += d * d;
    } else if (a.index[i] < b.index[j]) {
      sum += a.value[i] * a.value[i];
      ++i;
    } else {
      sum += b.value[j] * b.value[j];
      ++j;
    }
  }
  for (; i < a.index.size(); ++i) sum += a.value[i] * a.value[i];
  for (; j < b.index.size(); ++j) sum += b.value[j] * b.value[j];
  return sum;
}

DistanceMatrix::DistanceMatrix(std::span<const SparseVector> rows) : n_(rows.size()), data_(n_ * n_, 0.0f) {
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      const auto d = static_cast<float>(squared_distance(rows[i], rows[j]));
      data_[i * n_ + j] = d;
      data_[j * n_ + i] = d;
    }
  }
}

KernelMatrix::KernelMatrix(const DistanceMatrix& distances, double gamma)
    : n_(distances.size()), gamma_(gamma), data_(n_ * n_) {
  for (std::size_t i = 0; i < n_; ++i) {
    const float* d = distances.row(i);
    float* k = data_.data() + i * n_;
    k[i] = 1.0f;
    for (std::size_t j = i + 1; j < n_; ++j) {
      const auto v = static_cast<float>(std::exp(-gamma * static_cast<double>(d[j])));
      k[j] = v;
      data_[j * n_ + i] = v;
    }
  }
}

std::vector<float> gather(const KernelMatrix& kernel, std::span<const std::uint32_t> subset) {
  const std::size_t m = subset.size();
  std::vector<float> out(m * m);
  for (std::size_t a = 0; a < m; ++a) {
    const float* src = kernel.row(subset[a]);
    float* dst = out.data() + a * m;
    for (std::size_t b = 0; b < m; ++b) dst[b] = src[subset[b]];
  }
  return out;
}

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Shrinking follows the usual scheme: every min(m, 1000) iterations, variables at a bound whose
// gradient says they will stay there leave the active set. G_bar (the gradient contribution of
// variables at the upper bound) lets the full gradient be rebuilt from free variables alone.
class DualSolver {
 public:
  DualSolver(KernelView kernel, std::span<const std::int8_t> y, double c)
      : kernel_(kernel), y_(y), c_(c), m_(y.size()), alpha_(m_, 0.0), grad_(m_, -1.0), grad_bar_(m_, 0.0) {
    active_.resize(m_);
    for (std::size_t t = 0; t < m_; ++t) active_[t] = static_cast<std::uint32_t>(t);
  }

  DualSolution run(const SolverOptions& options) {
    DualSolution out;
    const std::uint64_t period = std::min<std::uint64_t>(m_, 1000);
    std::uint64_t counter = period + 1;
    while (out.iterations < options.max_iterations) {
      if (--counter == 0) {
        counter = period;
        if (options.shrinking) shrink(options.tolerance);
      }
      std::size_t i = 0, j = 0;
      if (!select(options, i, j)) {
        if (active_.size() == m_) {
          out.converged = true;
          break;
        }
        unshrink();
        if (!select(options, i, j)) {
          out.converged = true;
          break;
        }
        counter = 1;
      }
      update(i, j);
      ++out.iterations;
    }
    unshrink();
    out.rho = compute_rho();
    out.alpha = std::move(alpha_);
    return out;
  }

 private:
  bool at_upper(std::size_t t) const { return alpha_[t] >= c_; }
  bool at_lower(std::size_t t) const { return alpha_[t] <= 0.0; }
  bool in_up(std::size_t t) const { return y_[t] > 0 ? !at_upper(t) : !at_lower(t); }
  bool in_low(std::size_t t) const { return y_[t] > 0 ? !at_lower(t) : !at_upper(t); }

  bool select(const SolverOptions& options, std::size_t& out_i, std::size_t& out_j) const {
    double gmax = -kInf;
    std::size_t i = m_;
    for (const std::uint32_t t : active_) {
      if (!in_up(t)) continue;
      const double v = -y_[t] * grad_[t];
      if (v >= gmax) {
        gmax = v;
        i = t;
      }
    }
    double gmax2 = -kInf;
    std::size_t j = m_;
    double best_gain = kInf;
    const float* ki = i < m_ ? kernel_.row(i) : nullptr;
    for (const std::uint32_t t : active_) {
      if (!in_low(t)) continue;
      const double v = y_[t] * grad_[t];
      if (options.working_set == WorkingSetRule::max_violating_pair) {
        if (v >= gmax2) {
          gmax2 = v;
          j = t;
        }
        continue;
      }
      gmax2 = std::max(gmax2, v);
      const double b = gmax + v;
      if (ki && b > 0.0) {
        double a = 2.0 - 2.0 * ki[t];
        if (a <= 0.0) a = kTau;
        const double gain = -(b * b) / a;
        if (gain <= best_gain) {
          best_gain = gain;
          j = t;
        }
      }
    }
    if (i == m_ || j == m_ || gmax + gmax2 < options.tolerance) return false;
    out_i = i;
    out_j = j;
    return true;
  }

  void update(std::size_t i, std::size_t j) {
    const double old_i = alpha_[i];
    const double old_j = alpha_[j];
    const bool was_upper_i = at_upper(i);
    const bool was_upper_j = at_upper(j);
    const float* ki = kernel_.row(i);
    const float* kj = kernel_.row(j);
    const double kij = ki[j];
    const double c = c_;
    if (y_[i] != y_[j]) {
      double quad = 2.0 + 2.0 * kij;  // K_ii + K_jj - 2 Q_ij with Q_ij = -K_ij
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = alpha_[i] - alpha_[j];
      alpha_[i] += delta;
      alpha_[j] += delta;
      if (diff > 0.0) {
        if (alpha_[j] < 0.0) {
          alpha_[j] = 0.0;
          alpha_[i] = diff;
        }
      } else if (alpha_[i] < 0.0) {
        alpha_[i] = 0.0;
        alpha_[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha_[i] > c) {
          alpha_[i] = c;
          alpha_[j] = c - diff;
        }
      } else if (alpha_[j] > c) {
        alpha_[j] = c;
        alpha_[i] = c + diff;
      }
    } else {
      double quad = 2.0 - 2.0 * kij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = alpha_[i] + alpha_[j];
      alpha_[i] -= delta;
      alpha_[j] += delta;
      if (sum > c) {
        if (alpha_[i] > c) {
          alpha_[i] = c;
          alpha_[j] = sum - c;
        }
      } else if (alpha_[j] < 0.0) {
        alpha_[j] = 0.0;
        alpha_[i] = sum;
      }
      if (sum > c) {
        if (alpha_[j] > c) {
          alpha_[j] = c;
          alpha_[i] = sum - c;
        }
      } else if (alpha_[i] < 0.0) {
        alpha_[i] = 0.0;
        alpha_[j] = sum;
      }
    }

    const double di = (alpha_[i] - old_i) * y_[i];
    const double dj = (alpha_[j] - old_j) * y_[j];
    if (active_.size() == m_) {
      for (std::size_t t = 0; t < m_; ++t) grad_[t] += y_[t] * (di * ki[t] + dj * kj[t]);
    } else {
      for (const std::uint32_t t : active_) grad_[t] += y_[t] * (di * ki[t] + dj * kj[t]);
    }
    update_grad_bar(i, was_upper_i, ki);
    update_grad_bar(j, was_upper_j, kj);
  }

  void update_grad_bar(std::size_t i, bool was_upper, const float* ki) {
    const bool now_upper = at_upper(i);
    if (was_upper == now_upper) return;
    const double step = (now_upper ? c_ : -c_) * y_[i];
    for (std::size_t t = 0; t < m_; ++t) grad_bar_[t] += step * y_[t] * ki[t];
  }

  bool can_shrink(std::size_t t, double gmax1, double gmax2) const {
    if (at_upper(t)) return y_[t] > 0 ? -grad_[t] > gmax1 : -grad_[t] > gmax2;
    if (at_lower(t)) return y_[t] > 0 ? grad_[t] > gmax2 : grad_[t] > gmax1;
    return false;
  }

  void shrink(double tolerance) {
    double gmax1 = -kInf;  // max over I_up of -y G
    double gmax2 = -kInf;  // max over I_low of y G
    for (const std::uint32_t t : active_) {
      if (in_up(t)) gmax1 = std::max(gmax1, -y_[t] * grad_[t]);
      if (in_low(t)) gmax2 = std::max(gmax2, y_[t] * grad_[t]);
    }
    if (!unshrunk_ && gmax1 + gmax2 <= tolerance * 10.0) {
      unshrunk_ = true;
      unshrink();
    }
    std::erase_if(active_, [&](std::uint32_t t) { return can_shrink(t, gmax1, gmax2); });
  }

  // Rebuild the gradient of inactive variables and reactivate everything.
  void unshrink() {
    if (active_.size() == m_) return;
    std::vector<char> is_active(m_, 0);
    for (const std::uint32_t t : active_) is_active[t] = 1;
    std::vector<std::uint32_t> inactive;
    for (std::size_t t = 0; t < m_; ++t)
      if (!is_active[t]) inactive.push_back(static_cast<std::uint32_t>(t));
    for (const std::uint32_t t : inactive) grad_[t] = grad_bar_[t] - 1.0;
    for (std::size_t f = 0; f < m_; ++f) {
      if (at_upper(f) || at_lower(f)) continue;
      const float* kf = kernel_.row(f);
      const double w = alpha_[f] * y_[f];
      for (const std::uint32_t t : inactive) grad_[t] += w * y_[t] * kf[t];
    }
    active_.resize(m_);
    for (std::size_t t = 0; t < m_; ++t) active_[t] = static_cast<std::uint32_t>(t);
  }

  double compute_rho() const {
    double ub = kInf;
    double lb = -kInf;
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < m_; ++t) {
      const double yg = y_[t] * grad_[t];
      if (at_upper(t)) {
        if (y_[t] < 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (at_lower(t)) {
        if (y_[t] > 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    if (n_free > 0) return sum_free / static_cast<double>(n_free);
    if (std::isinf(ub) || std::isinf(lb)) return std::isinf(ub) ? lb : ub;
    return (ub + lb) / 2.0;
  }

  KernelView kernel_;
  std::span<const std::int8_t> y_;
  double c_;
  std::size_t m_;
  std::vector<double> alpha_;
  std::vector<double> grad_;
  std::vector<double> grad_bar_;
  std::vector<std::uint32_t> active_;
  bool unshrunk_ = false;
};

bool is_identity(std::span<const std::uint32_t> subset, std::size_t n) {
  if (subset.size() != n) return false;
  for (std::size_t t = 0; t < n; ++t)
    if (subset[t] != t) return false;
  return true;
}

}  // namespace

DualSolution solve_dual(KernelView kernel, std::span<const std::int8_t> labels, double c,
                        const SolverOptions& options) {
  if (kernel.n != labels.size()) throw DimensionMismatch("kernel and labels differ in size");
  if (!(c > 0.0)) throw InvalidConfig("C must be positive");
  for (const std::int8_t y : labels)
    if (y != 1 && y != -1) throw InvalidConfig("labels must be +1 or -1");
  if (labels.empty()) return {};
  return DualSolver(kernel, labels, c).run(options);
}

DualSolution solve_dual(const KernelMatrix& kernel, std::span<const std::uint32_t> subset,
                        std::span<const std::int8_t> labels, double c, const SolverOptions& options) {
  if (subset.size() != labels.size()) throw DimensionMismatch("subset and labels differ in length");
  if (is_identity(subset, kernel.size())) return solve_dual(view_of(kernel), labels, c, options);
  const std::vector<float> block = gather(kernel, subset);
  return solve_dual(KernelView{block.data(), subset.size()}, labels, c, options);
}

}  // namespace patchleak
