#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qfix/deduction.hpp"
#include "qfix/errors.hpp"
#include "qfix/pattern.hpp"
#include "qfix/rng.hpp"
#include "qfix/term.hpp"

namespace qfix {

// Finite 1-bounded metric space given by a distance matrix. Violations are
// rejected, never clipped.
struct MetricSpace {
  std::vector<std::string> points;
  std::vector<std::vector<double>> dist;

  std::size_t size() const noexcept { return points.size(); }
};

inline MetricSpace make_metric_space(std::vector<std::string> points,
                                     std::vector<std::vector<double>> dist) {
  const std::size_t n = points.size();
  if (n == 0) fail(Errc::EmptySet, "metric space needs at least one point");
  if (dist.size() != n) fail(Errc::DimensionMismatch, "distance matrix rows");
  for (const auto& row : dist)
    if (row.size() != n) fail(Errc::DimensionMismatch, "distance matrix columns");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::fabs(dist[i][i]) > kTol)
      fail(Errc::GroundNotMetric, "nonzero self distance at " + points[i]);
    for (std::size_t j = 0; j < n; ++j) {
      if (dist[i][j] < -kTol || dist[i][j] > 1.0 + kTol)
        fail(Errc::GroundNotMetric, "distance outside [0,1] between " + points[i] + " and " +
                                        points[j]);
      if (std::fabs(dist[i][j] - dist[j][i]) > kTol)
        fail(Errc::GroundNotMetric, "asymmetry between " + points[i] + " and " + points[j]);
      for (std::size_t k = 0; k < n; ++k)
        if (dist[i][j] > dist[i][k] + dist[k][j] + kTol)
          fail(Errc::GroundNotMetric, "triangle violation via " + points[k]);
    }
  }
  return MetricSpace{std::move(points), std::move(dist)};
}

inline double sup_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    fail(Errc::DimensionMismatch, std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  double d = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) d = std::max(d, std::fabs(u[k] - v[k]));
  return d;
}

// Probability distribution over the points of a ground space, stored as a
// full mass vector. Entries are nonnegative and sum to 1 within kTol.
struct FiniteDistribution {
  std::vector<double> masses;

  std::size_t size() const noexcept { return masses.size(); }
};

inline FiniteDistribution make_distribution(std::vector<double> masses) {
  double sum = 0.0;
  for (double m : masses) {
    if (m < -kTol) fail(Errc::MassMismatch, "negative mass " + std::to_string(m));
    sum += m;
  }
  if (std::fabs(sum - 1.0) > kTol) fail(Errc::MassMismatch, "masses sum to " + std::to_string(sum));
  return FiniteDistribution{std::move(masses)};
}

// Nonempty subset of the points of a ground space, stored as sorted indices.
struct FinitePointSet {
  std::vector<std::size_t> indices;

  std::size_t size() const noexcept { return indices.size(); }
};

inline FinitePointSet make_point_set(std::vector<std::size_t> indices, std::size_t ground_size) {
  if (indices.empty()) fail(Errc::EmptySet, "point set must be nonempty");
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  for (std::size_t k : indices)
    if (k >= ground_size) fail(Errc::IndexOutOfRange, "point index " + std::to_string(k));
  return FinitePointSet{std::move(indices)};
}

namespace detail {

// Exact minimum-cost transport between two nonnegative mass vectors of
// equal total, by the transportation simplex with Bland's rule. Zero-mass
// rows and columns are dropped up front.
inline double transport_min_cost(const std::vector<double>& supply,
                                 const std::vector<double>& demand,
                                 const std::vector<std::vector<double>>& cost) {
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < supply.size(); ++i)
    if (supply[i] > 0.0) rows.push_back(i);
  for (std::size_t j = 0; j < demand.size(); ++j)
    if (demand[j] > 0.0) cols.push_back(j);
  const std::size_t m = rows.size(), n = cols.size();
  if (m == 0 || n == 0) return 0.0;

  std::vector<std::vector<double>> c(m, std::vector<double>(n));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i][j] = cost[rows[i]][cols[j]];

  std::vector<std::vector<double>> x(m, std::vector<double>(n, 0.0));
  std::vector<std::vector<bool>> basic(m, std::vector<bool>(n, false));

  // Northwest-corner start: walks from (0,0) to (m-1,n-1) moving one index
  // per step, so exactly m+n-1 cells become basic (some possibly zero).
  {
    std::vector<double> a, b;
    for (std::size_t i : rows) a.push_back(supply[i]);
    for (std::size_t j : cols) b.push_back(demand[j]);
    std::size_t i = 0, j = 0;
    while (true) {
      const double q = std::min(a[i], b[j]);
      x[i][j] = q;
      basic[i][j] = true;
      a[i] -= q;
      b[j] -= q;
      if (i + 1 == m && j + 1 == n) break;
      if (i + 1 == m) ++j;
      else if (j + 1 == n) ++i;
      else if (a[i] <= b[j]) ++i;
      else ++j;
    }
  }

  const std::size_t max_pivots = 64 * (m + n) * (m + n) + 1024;
  for (std::size_t pivot = 0; pivot < max_pivots; ++pivot) {
    // potentials from the spanning tree of basic cells
    std::vector<double> u(m, 0.0), v(n, 0.0);
    std::vector<bool> useen(m, false), vseen(n, false);
    std::deque<std::pair<bool, std::size_t>> queue;  // (is_row, index)
    useen[0] = true;
    queue.emplace_back(true, 0);
    while (!queue.empty()) {
      auto [is_row, k] = queue.front();
      queue.pop_front();
      if (is_row) {
        for (std::size_t j = 0; j < n; ++j)
          if (basic[k][j] && !vseen[j]) {
            v[j] = c[k][j] - u[k];
            vseen[j] = true;
            queue.emplace_back(false, j);
          }
      } else {
        for (std::size_t i = 0; i < m; ++i)
          if (basic[i][k] && !useen[i]) {
            u[i] = c[i][k] - v[k];
            useen[i] = true;
            queue.emplace_back(true, i);
          }
      }
    }

    // Bland: first cell with negative reduced cost enters
    std::size_t ei = m, ej = n;
    for (std::size_t i = 0; i < m && ei == m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (!basic[i][j] && c[i][j] - u[i] - v[j] < -1e-12) {
          ei = i;
          ej = j;
          break;
        }
    if (ei == m) break;  // optimal

    // unique path row ei -> col ej through the basic tree
    struct Node {
      bool is_row;
      std::size_t idx;
      std::size_t parent;
    };
    std::vector<Node> nodes;
    std::vector<bool> rvis(m, false), cvis(n, false);
    nodes.push_back({true, ei, static_cast<std::size_t>(-1)});
    rvis[ei] = true;
    std::size_t goal = static_cast<std::size_t>(-1);
    for (std::size_t head = 0; head < nodes.size() && goal == static_cast<std::size_t>(-1);
         ++head) {
      const Node cur = nodes[head];
      if (cur.is_row) {
        for (std::size_t j = 0; j < n; ++j)
          if (basic[cur.idx][j] && !cvis[j]) {
            cvis[j] = true;
            nodes.push_back({false, j, head});
            if (j == ej) { goal = nodes.size() - 1; break; }
          }
      } else {
        for (std::size_t i = 0; i < m; ++i)
          if (basic[i][cur.idx] && !rvis[i]) {
            rvis[i] = true;
            nodes.push_back({true, i, head});
          }
      }
    }
    if (goal == static_cast<std::size_t>(-1))
      fail(Errc::ModelEvaluationFailure, "transport basis lost connectivity");

    // cells along the cycle, starting with the tree edge leaving row ei;
    // signs alternate -,+,-,... and the entering cell takes +.
    std::vector<std::pair<std::size_t, std::size_t>> path;
    for (std::size_t at = goal; nodes[at].parent != static_cast<std::size_t>(-1);
         at = nodes[at].parent) {
      const Node& child = nodes[at];
      const Node& parent = nodes[child.parent];
      path.emplace_back(child.is_row ? child.idx : parent.idx,
                        child.is_row ? parent.idx : child.idx);
    }
    std::reverse(path.begin(), path.end());

    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = 0;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const auto [i, j] = path[k];
      if (x[i][j] < theta - 1e-15) {
        theta = x[i][j];
        leave = k;
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      const auto [i, j] = path[k];
      if (k % 2 == 0) x[i][j] -= theta;
      else x[i][j] += theta;
    }
    x[ei][ej] = theta;
    basic[ei][ej] = true;
    const auto [li, lj] = path[leave];
    basic[li][lj] = false;
    x[li][lj] = 0.0;
  }

  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) total += x[i][j] * c[i][j];
  return std::max(total, 0.0);
}

}  // namespace detail

// Exact optimal-transport distance between two distributions over the same
// ground space.
inline double kantorovich_distance(const FiniteDistribution& mu, const FiniteDistribution& nu,
                                   const MetricSpace& ground) {
  if (mu.size() != ground.size() || nu.size() != ground.size())
    fail(Errc::DimensionMismatch, "distribution does not match the ground space");
  double smu = 0.0, snu = 0.0;
  for (double w : mu.masses) smu += w;
  for (double w : nu.masses) snu += w;
  if (std::fabs(smu - 1.0) > kTol || std::fabs(snu - 1.0) > kTol)
    fail(Errc::MassMismatch, "masses must sum to 1");
  std::vector<double> a = mu.masses, b = nu.masses;
  for (double& w : a) w = std::max(w, 0.0) / smu;
  for (double& w : b) w = std::max(w, 0.0) / snu;
  return detail::transport_min_cost(a, b, ground.dist);
}

// max-min distance in both directions.
inline double hausdorff_distance(const FinitePointSet& A, const FinitePointSet& B,
                                 const MetricSpace& ground) {
  if (A.indices.empty() || B.indices.empty()) fail(Errc::EmptySet, "hausdorff of empty set");
  auto directed = [&](const FinitePointSet& from, const FinitePointSet& to) {
    double worst = 0.0;
    for (std::size_t p : from.indices) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t q : to.indices) best = std::min(best, ground.dist[p][q]);
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(A, B), directed(B, A));
}

// ----- models ----------------------------------------------------------------
//
// A model interprets the symbols of its signature in a 1-bounded complete
// metric space. All three concrete models satisfy:
//   using element_type = ...;
//   double distance(a, b);  element_type interpret(name, args);
//   element_type sample(Rng&);  element_type origin();
//   const Signature& signature();

// Vectors in [0,1]^dim under the sup metric. Symbols are barycentric mixes
// and nonnegative affine maps.
class VectorModel {
 public:
  using element_type = std::vector<double>;

  explicit VectorModel(std::size_t dim) : dim_(dim) {
    if (dim == 0) fail(Errc::DimensionMismatch, "vector model needs dim >= 1");
  }

  std::size_t dim() const noexcept { return dim_; }

  void bind_barycentric(const std::string& name, double eps) {
    if (eps < -kTol || eps > 1.0 + kTol)
      fail(Errc::ScalarOutOfRange, "barycentric parameter " + std::to_string(eps));
    sig_.add(make_symbol(name, 2, Pattern(2, {WeightTuple{eps, 1.0 - eps}})));
    itps_.push_back(Interp{Interp::Barycentric, eps, {}, {}});
  }

  // f(x_1..x_k) = sum_j M_j x_j + offset. Entries must be nonnegative and
  // every coordinate must stay inside [0,1] on [0,1]^dim inputs. The
  // declared pattern has one tuple of row sums per coordinate.
  void bind_affine(const std::string& name, std::vector<std::vector<std::vector<double>>> mats,
                   std::vector<double> offset) {
    if (mats.empty()) fail(Errc::ArityMismatch, "affine map needs at least one argument");
    if (offset.size() != dim_) fail(Errc::DimensionMismatch, "affine offset size");
    for (const auto& M : mats) {
      if (M.size() != dim_) fail(Errc::DimensionMismatch, "affine matrix rows");
      for (const auto& row : M) {
        if (row.size() != dim_) fail(Errc::DimensionMismatch, "affine matrix columns");
        for (double e : row)
          if (e < -kTol) fail(Errc::PreconditionViolated, "affine entries must be nonnegative");
      }
    }
    for (double e : offset)
      if (e < -kTol) fail(Errc::PreconditionViolated, "affine offset must be nonnegative");
    std::vector<WeightTuple> tuples;
    for (std::size_t i = 0; i < dim_; ++i) {
      double reach = offset[i];
      std::vector<double> w;
      for (const auto& M : mats) {
        double rs = 0.0;
        for (double e : M[i]) rs += e;
        w.push_back(rs);
        reach += rs;
      }
      if (reach > 1.0 + kTol)
        fail(Errc::PreconditionViolated,
             "affine map leaves [0,1] at coordinate " + std::to_string(i + 1));
      tuples.emplace_back(std::move(w));
    }
    sig_.add(make_symbol(name, mats.size(), Pattern(mats.size(), std::move(tuples))));
    itps_.push_back(Interp{Interp::Affine, 0.0, std::move(mats), std::move(offset)});
  }

  double distance(const element_type& a, const element_type& b) const {
    return sup_distance(a, b);
  }

  element_type interpret(std::string_view name, std::span<const element_type> args) const {
    const std::size_t k = index_of(name);
    const Interp& it = itps_[k];
    const FunctionSymbol& sym = sig_.symbols()[k];
    if (args.size() != sym.arity)
      fail(Errc::ArityMismatch, std::string(name) + " expects " + std::to_string(sym.arity));
    for (const element_type& a : args)
      if (a.size() != dim_) fail(Errc::DimensionMismatch, "argument dimension");
    if (it.kind == Interp::Barycentric) {
      element_type out(dim_);
      for (std::size_t i = 0; i < dim_; ++i)
        out[i] = it.eps * args[0][i] + (1.0 - it.eps) * args[1][i];
      return out;
    }
    element_type out = it.offset;
    for (std::size_t j = 0; j < it.mats.size(); ++j)
      for (std::size_t i = 0; i < dim_; ++i) {
        double acc = 0.0;
        for (std::size_t l = 0; l < dim_; ++l) acc += it.mats[j][i][l] * args[j][l];
        out[i] += acc;
      }
    return out;
  }

  element_type sample(Rng& rng) const {
    element_type out(dim_);
    for (double& x : out) x = rng.uniform01();
    return out;
  }

  element_type origin() const { return element_type(dim_, 0.0); }

  const Signature& signature() const noexcept { return sig_; }

 private:
  struct Interp {
    enum Kind { Barycentric, Affine } kind;
    double eps;
    std::vector<std::vector<std::vector<double>>> mats;
    std::vector<double> offset;
  };

  std::size_t index_of(std::string_view name) const {
    for (std::size_t k = 0; k < sig_.symbols().size(); ++k)
      if (sig_.symbols()[k].name == name) return k;
    fail(Errc::UnknownSymbol, std::string(name));
  }

  std::size_t dim_;
  Signature sig_;
  std::vector<Interp> itps_;
};

// Finite-support distributions over a ground space under the Kantorovich
// metric. Symbols are barycentric mixes.
class DistributionModel {
 public:
  using element_type = FiniteDistribution;

  explicit DistributionModel(MetricSpace ground) : ground_(std::move(ground)) {}

  const MetricSpace& ground() const noexcept { return ground_; }

  void bind_barycentric(const std::string& name, double eps) {
    if (eps < -kTol || eps > 1.0 + kTol)
      fail(Errc::ScalarOutOfRange, "barycentric parameter " + std::to_string(eps));
    sig_.add(make_symbol(name, 2, Pattern(2, {WeightTuple{eps, 1.0 - eps}})));
    eps_.push_back(eps);
  }

  // Declares a symbol whose claimed pattern differs from the barycentric
  // one; the interpretation is still the eps-mix. Useful for exercising
  // compliance failures.
  void bind_barycentric_claiming(const std::string& name, double eps, Pattern claimed) {
    sig_.add(make_symbol(name, 2, std::move(claimed)));
    eps_.push_back(eps);
  }

  double distance(const element_type& a, const element_type& b) const {
    return kantorovich_distance(a, b, ground_);
  }

  element_type interpret(std::string_view name, std::span<const element_type> args) const {
    for (std::size_t k = 0; k < sig_.symbols().size(); ++k)
      if (sig_.symbols()[k].name == name) {
        if (args.size() != 2) fail(Errc::ArityMismatch, std::string(name));
        std::vector<double> masses(ground_.size());
        for (std::size_t i = 0; i < ground_.size(); ++i)
          masses[i] = eps_[k] * args[0].masses[i] + (1.0 - eps_[k]) * args[1].masses[i];
        return FiniteDistribution{std::move(masses)};
      }
    fail(Errc::UnknownSymbol, std::string(name));
  }

  element_type sample(Rng& rng) const {
    std::vector<double> masses(ground_.size());
    double sum = 0.0;
    for (double& m : masses) {
      m = rng.uniform01() + 1e-12;
      sum += m;
    }
    for (double& m : masses) m /= sum;
    return FiniteDistribution{std::move(masses)};
  }

  element_type origin() const {
    return FiniteDistribution{
        std::vector<double>(ground_.size(), 1.0 / static_cast<double>(ground_.size()))};
  }

  const Signature& signature() const noexcept { return sig_; }

 private:
  MetricSpace ground_;
  Signature sig_;
  std::vector<double> eps_;
};

// Nonempty finite point sets over a ground space under the Hausdorff
// metric. Symbols are set unions.
class PointSetModel {
 public:
  using element_type = FinitePointSet;

  explicit PointSetModel(MetricSpace ground) : ground_(std::move(ground)) {}

  const MetricSpace& ground() const noexcept { return ground_; }

  void bind_union(const std::string& name) {
    sig_.add(make_symbol(name, 2, Pattern(2, {WeightTuple{1.0, 0.0}, WeightTuple{0.0, 1.0}})));
    names_.push_back(name);
  }

  double distance(const element_type& a, const element_type& b) const {
    return hausdorff_distance(a, b, ground_);
  }

  element_type interpret(std::string_view name, std::span<const element_type> args) const {
    for (const std::string& n : names_)
      if (n == name) {
        if (args.size() != 2) fail(Errc::ArityMismatch, std::string(name));
        std::vector<std::size_t> merged = args[0].indices;
        merged.insert(merged.end(), args[1].indices.begin(), args[1].indices.end());
        return make_point_set(std::move(merged), ground_.size());
      }
    fail(Errc::UnknownSymbol, std::string(name));
  }

  element_type sample(Rng& rng) const {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < ground_.size(); ++k)
      if (rng.coin()) idx.push_back(k);
    if (idx.empty()) idx.push_back(rng.uniform_index(ground_.size()));
    return make_point_set(std::move(idx), ground_.size());
  }

  element_type origin() const { return FinitePointSet{{0}}; }

  const Signature& signature() const noexcept { return sig_; }

 private:
  MetricSpace ground_;
  Signature sig_;
  std::vector<std::string> names_;
};

// ----- pattern compliance -----------------------------------------------------

struct ComplianceReport {
  std::size_t trials = 0;
  double max_slack = 0.0;  // worst observed lhs - rhs over all trials
  bool pass = true;
};

// Samples argument pairs and checks the declared pattern bound
// d(f(a..), f(b..)) <= max over tuples of the weighted argument distances.
// Deterministic given the seed; each trial derives its own sub-seed.
template <class Model>
ComplianceReport check_pattern_compliance(const Model& model, const FunctionSymbol& sym,
                                          std::size_t trials, std::uint64_t seed) {
  using element = typename Model::element_type;
  ComplianceReport report;
  report.trials = trials;
  report.max_slack = -std::numeric_limits<double>::infinity();
  if (trials == 0) {
    report.max_slack = 0.0;
    return report;
  }
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, t));
    std::vector<element> as, bs;
    std::vector<double> eps;
    for (std::size_t k = 0; k < sym.arity; ++k) {
      as.push_back(model.sample(rng));
      bs.push_back(model.sample(rng));
      eps.push_back(model.distance(as.back(), bs.back()));
    }
    const double lhs = model.distance(model.interpret(sym.name, as), model.interpret(sym.name, bs));
    const double rhs = banach_delta(sym.pattern, eps);
    report.max_slack = std::max(report.max_slack, lhs - rhs);
  }
  report.pass = report.max_slack <= kTol;
  return report;
}

}  // namespace qfix
