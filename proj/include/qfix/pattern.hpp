#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "qfix/errors.hpp"

namespace qfix {

// A tuple of per-argument contraction weights. Valid tuples have every
// component in [0,1] and component sum at most 1, both within kTol.
// Component indices are 1-based throughout the public interface.
class WeightTuple {
 public:
  explicit WeightTuple(std::vector<double> weights) : weights_(std::move(weights)) {
    double sum = 0.0;
    for (double w : weights_) {
      if (w < -kTol || w > 1.0 + kTol)
        fail(Errc::WeightOutOfRange, "weight " + std::to_string(w) + " outside [0,1]");
      sum += w;
    }
    if (sum > 1.0 + kTol)
      fail(Errc::SumExceedsOne, "weights sum to " + std::to_string(sum));
  }

  WeightTuple(std::initializer_list<double> weights)
      : WeightTuple(std::vector<double>(weights)) {}

  std::size_t arity() const noexcept { return weights_.size(); }

  // 1-based component access.
  double at(std::size_t slot) const {
    if (slot < 1 || slot > weights_.size())
      fail(Errc::IndexOutOfRange, "component " + std::to_string(slot) + " of arity " +
                                      std::to_string(weights_.size()) + " tuple");
    return weights_[slot - 1];
  }

  std::span<const double> weights() const noexcept { return weights_; }

  double sum() const noexcept {
    double s = 0.0;
    for (double w : weights_) s += w;
    return s;
  }

 private:
  std::vector<double> weights_;
};

inline bool almost_equal(const WeightTuple& a, const WeightTuple& b) {
  if (a.arity() != b.arity()) return false;
  for (std::size_t k = 0; k < a.arity(); ++k)
    if (std::fabs(a.weights()[k] - b.weights()[k]) > kTol) return false;
  return true;
}

// A finite, nonempty set of weight tuples of a common arity. Duplicate
// tuples (componentwise within kTol) are merged; the set keeps first
// occurrences in insertion order. Equality is tuple-set equality, not
// extensional equality of the induced bounds.
class Pattern {
 public:
  Pattern(std::size_t arity, std::vector<WeightTuple> tuples)
      : arity_(arity), tuples_(std::move(tuples)) {
    if (tuples_.empty()) fail(Errc::EmptyPattern, "pattern needs at least one tuple");
    for (const WeightTuple& t : tuples_)
      if (t.arity() != arity_)
        fail(Errc::ArityMismatch, "tuple arity " + std::to_string(t.arity()) +
                                      " in pattern of arity " + std::to_string(arity_));
    dedup();
  }

  std::size_t arity() const noexcept { return arity_; }
  const std::vector<WeightTuple>& tuples() const noexcept { return tuples_; }
  std::size_t size() const noexcept { return tuples_.size(); }

  bool contains(const WeightTuple& t) const {
    for (const WeightTuple& u : tuples_)
      if (almost_equal(u, t)) return true;
    return false;
  }

  friend bool operator==(const Pattern& a, const Pattern& b) {
    if (a.arity_ != b.arity_ || a.tuples_.size() != b.tuples_.size()) return false;
    for (const WeightTuple& t : a.tuples_)
      if (!b.contains(t)) return false;
    return true;
  }

 private:
  void dedup() {
    std::vector<WeightTuple> kept;
    kept.reserve(tuples_.size());
    for (WeightTuple& t : tuples_) {
      bool dup = false;
      for (const WeightTuple& u : kept)
        if (almost_equal(u, t)) { dup = true; break; }
      if (!dup) kept.push_back(std::move(t));
    }
    tuples_ = std::move(kept);
  }

  std::size_t arity_;
  std::vector<WeightTuple> tuples_;
};

inline Pattern make_pattern(std::vector<WeightTuple> tuples, std::size_t arity) {
  return Pattern(arity, std::move(tuples));
}

// Singleton pattern of the slot-th unit tuple in U_arity.
inline Pattern unit_projection(std::size_t slot, std::size_t arity) {
  if (slot < 1 || slot > arity)
    fail(Errc::IndexOutOfRange, "unit projection slot " + std::to_string(slot) +
                                    " of arity " + std::to_string(arity));
  std::vector<double> w(arity, 0.0);
  w[slot - 1] = 1.0;
  return Pattern(arity, {WeightTuple(std::move(w))});
}

inline Pattern scalar_mul(double r, const Pattern& p) {
  if (r < -kTol || r > 1.0 + kTol)
    fail(Errc::ScalarOutOfRange, "scalar " + std::to_string(r) + " outside [0,1]");
  std::vector<WeightTuple> out;
  out.reserve(p.size());
  for (const WeightTuple& t : p.tuples()) {
    std::vector<double> w(t.weights().begin(), t.weights().end());
    for (double& x : w) x *= r;
    out.emplace_back(std::move(w));
  }
  return Pattern(p.arity(), std::move(out));
}

// All cross-combinations sum_i weights_i * tuple_i with tuple_i drawn from
// patterns[i]. All patterns must share one arity.
inline Pattern subconvex_sum(const WeightTuple& weights, const std::vector<Pattern>& patterns) {
  if (weights.arity() != patterns.size())
    fail(Errc::ArityMismatch, std::to_string(weights.arity()) + " weights for " +
                                  std::to_string(patterns.size()) + " patterns");
  if (patterns.empty()) fail(Errc::EmptyPattern, "subconvex sum of zero patterns");
  const std::size_t n = patterns.front().arity();
  for (const Pattern& p : patterns)
    if (p.arity() != n)
      fail(Errc::ArityMismatch, "patterns of arity " + std::to_string(n) + " and " +
                                    std::to_string(p.arity()));

  std::vector<WeightTuple> out;
  std::vector<std::size_t> choice(patterns.size(), 0);
  while (true) {
    std::vector<double> acc(n, 0.0);
    for (std::size_t i = 0; i < patterns.size(); ++i) {
      const auto w = patterns[i].tuples()[choice[i]].weights();
      const double lam = weights.weights()[i];
      for (std::size_t k = 0; k < n; ++k) acc[k] += lam * w[k];
    }
    out.emplace_back(std::move(acc));
    std::size_t pos = 0;
    while (pos < patterns.size() && ++choice[pos] == patterns[pos].size()) {
      choice[pos] = 0;
      ++pos;
    }
    if (pos == patterns.size()) break;
  }
  return Pattern(n, std::move(out));
}

// Merge component j into component i (i < j), dropping position j.
inline Pattern contract(const Pattern& p, std::size_t i, std::size_t j) {
  if (i < 1 || i > p.arity() || j < 1 || j > p.arity())
    fail(Errc::IndexOutOfRange, "contract(" + std::to_string(i) + "," + std::to_string(j) +
                                    ") on arity " + std::to_string(p.arity()));
  if (i >= j)
    fail(Errc::IndicesNotOrdered, "contract needs i < j, got i=" + std::to_string(i) +
                                      " j=" + std::to_string(j));
  std::vector<WeightTuple> out;
  out.reserve(p.size());
  for (const WeightTuple& t : p.tuples()) {
    std::vector<double> w;
    w.reserve(p.arity() - 1);
    for (std::size_t k = 1; k <= p.arity(); ++k) {
      if (k == j) continue;
      double x = t.at(k);
      if (k == i) x += t.at(j);
      w.push_back(x);
    }
    out.emplace_back(std::move(w));
  }
  return Pattern(p.arity() - 1, std::move(out));
}

// Composition: { sum_i alpha_i * beta^i | alpha in p, beta^i in inner[i] }.
// inner patterns share a common arity, which the result takes. When p has
// arity 0 the result is the all-zero tuple of arity arity_if_empty.
inline Pattern compose(const Pattern& p, const std::vector<Pattern>& inner,
                       std::size_t arity_if_empty = 0) {
  if (inner.size() != p.arity())
    fail(Errc::ArityMismatch, "compose of arity " + std::to_string(p.arity()) + " pattern with " +
                                  std::to_string(inner.size()) + " inner patterns");
  if (inner.empty())
    return Pattern(arity_if_empty, {WeightTuple(std::vector<double>(arity_if_empty, 0.0))});

  const std::size_t m = inner.front().arity();
  for (const Pattern& z : inner)
    if (z.arity() != m)
      fail(Errc::ArityMismatch, "inner patterns of arity " + std::to_string(m) + " and " +
                                    std::to_string(z.arity()));

  std::vector<WeightTuple> out;
  for (const WeightTuple& alpha : p.tuples()) {
    std::vector<std::size_t> choice(inner.size(), 0);
    while (true) {
      std::vector<double> acc(m, 0.0);
      for (std::size_t i = 0; i < inner.size(); ++i) {
        const double a = alpha.weights()[i];
        const auto beta = inner[i].tuples()[choice[i]].weights();
        for (std::size_t k = 0; k < m; ++k) acc[k] += a * beta[k];
      }
      out.emplace_back(std::move(acc));
      std::size_t pos = 0;
      while (pos < inner.size() && ++choice[pos] == inner[pos].size()) {
        choice[pos] = 0;
        ++pos;
      }
      if (pos == inner.size()) break;
    }
  }
  return Pattern(m, std::move(out));
}

// Largest slot-th component across the pattern's tuples. The pattern is
// slot-contractive when the returned modulus is < 1.
inline double contraction_modulus(const Pattern& p, std::size_t slot) {
  if (slot < 1 || slot > p.arity())
    fail(Errc::IndexOutOfRange, "modulus at slot " + std::to_string(slot) + " of arity " +
                                    std::to_string(p.arity()));
  double a = 0.0;
  for (const WeightTuple& t : p.tuples()) a = std::max(a, t.at(slot));
  return a;
}

inline bool is_contractive(const Pattern& p, std::size_t slot) {
  return contraction_modulus(p, slot) < 1.0 - kTol;
}

// Fixed-point pattern: drop position slot and rescale each tuple by
// 1/(1 - alpha_slot). Requires alpha_slot < 1 - kTol in every tuple.
inline Pattern mu_pattern(const Pattern& p, std::size_t slot) {
  if (slot < 1 || slot > p.arity())
    fail(Errc::IndexOutOfRange, "mu at slot " + std::to_string(slot) + " of arity " +
                                    std::to_string(p.arity()));
  std::vector<WeightTuple> out;
  out.reserve(p.size());
  for (const WeightTuple& t : p.tuples()) {
    const double a = t.at(slot);
    if (a >= 1.0 - kTol)
      fail(Errc::NotContractive, "component " + std::to_string(slot) + " has weight " +
                                     std::to_string(a));
    const double scale = 1.0 / (1.0 - a);
    std::vector<double> w;
    w.reserve(p.arity() - 1);
    for (std::size_t k = 1; k <= p.arity(); ++k)
      if (k != slot) w.push_back(scale * t.at(k));
    out.emplace_back(std::move(w));
  }
  return Pattern(p.arity() - 1, std::move(out));
}

// Drops tuples that are componentwise dominated by another tuple in the
// same pattern. Dominated tuples never contribute to a max-of-weighted-sums
// bound. Off by default everywhere; callers opt in.
inline Pattern prune_dominated(const Pattern& p) {
  const auto& ts = p.tuples();
  std::vector<bool> drop(ts.size(), false);
  for (std::size_t a = 0; a < ts.size(); ++a) {
    for (std::size_t b = 0; b < ts.size(); ++b) {
      if (a == b || drop[b]) continue;
      bool dominated = true;
      for (std::size_t k = 0; k < p.arity(); ++k) {
        if (ts[b].weights()[k] < ts[a].weights()[k] - kTol) { dominated = false; break; }
      }
      if (dominated) { drop[a] = true; break; }
    }
  }
  std::vector<WeightTuple> kept;
  for (std::size_t a = 0; a < ts.size(); ++a)
    if (!drop[a]) kept.push_back(ts[a]);
  if (kept.empty()) kept.push_back(ts.front());
  return Pattern(p.arity(), std::move(kept));
}

inline std::string to_string(const WeightTuple& t) {
  std::string s = "<";
  for (std::size_t k = 0; k < t.arity(); ++k) {
    if (k) s += ",";
    s += std::to_string(t.weights()[k]);
  }
  return s + ">";
}

inline std::string to_string(const Pattern& p) {
  std::string s = "{";
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (k) s += ",";
    s += to_string(p.tuples()[k]);
  }
  return s + "}";
}

}  // namespace qfix
