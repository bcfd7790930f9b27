#pragma once

// Test-only utilities: random generators for patterns, terms and models,
// plus independent oracles for the optimal-transport distance. The oracles
// share no code with the library's transportation simplex.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "qfix/linalg.hpp"
#include "qfix/mdp.hpp"
#include "qfix/metric_models.hpp"
#include "qfix/rng.hpp"
#include "qfix/term.hpp"

namespace qfix::testing {

// Random affine map on [0,1]^dim with arity args and max row-sum modulus
// at most `reach`; offsets keep every coordinate inside [0,1].
inline void bind_random_affine(VectorModel& model, Rng& rng, const std::string& name,
                               std::size_t args, double reach = 0.95) {
  const std::size_t dim = model.dim();
  std::vector<std::vector<std::vector<double>>> mats(
      args, std::vector<std::vector<double>>(dim, std::vector<double>(dim, 0.0)));
  std::vector<double> offset(dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    // split a random budget <= reach across the argument rows
    const double budget = reach * rng.uniform01();
    std::vector<double> cuts(args);
    double total = 0.0;
    for (double& c : cuts) {
      c = rng.uniform01() + 1e-9;
      total += c;
    }
    for (std::size_t a = 0; a < args; ++a) {
      const double row_budget = budget * cuts[a] / total;
      std::vector<double> w(dim);
      double wsum = 0.0;
      for (double& x : w) {
        x = rng.uniform01() + 1e-9;
        wsum += x;
      }
      for (std::size_t l = 0; l < dim; ++l) mats[a][i][l] = row_budget * w[l] / wsum;
    }
    offset[i] = (1.0 - budget) * rng.uniform01();
  }
  model.bind_affine(name, std::move(mats), std::move(offset));
}

// Random mu-free term over the signature with every free slot in 1..ctx.
inline Term random_term(Rng& rng, const Signature& sig, std::size_t ctx, std::size_t depth) {
  if (depth == 0 || sig.symbols().empty() || rng.uniform01() < 0.3)
    return Term::variable(1 + rng.uniform_index(ctx));
  const FunctionSymbol& sym = sig.symbols()[rng.uniform_index(sig.symbols().size())];
  std::vector<Term> args;
  for (std::size_t k = 0; k < sym.arity; ++k)
    args.push_back(random_term(rng, sig, ctx, depth - 1));
  return Term::apply(sym.name, std::move(args));
}

inline FiniteDistribution random_distribution(Rng& rng, std::size_t n) {
  std::vector<double> masses(n);
  double sum = 0.0;
  for (double& m : masses) {
    m = rng.uniform01() + 1e-12;
    sum += m;
  }
  for (double& m : masses) m /= sum;
  return FiniteDistribution{std::move(masses)};
}

// Masses on a grid of the given step, for oracle comparisons.
inline FiniteDistribution random_grid_distribution(Rng& rng, std::size_t n, double step) {
  while (true) {
    std::vector<double> masses(n, 0.0);
    const std::size_t units = static_cast<std::size_t>(std::llround(1.0 / step));
    for (std::size_t u = 0; u < units; ++u) masses[rng.uniform_index(n)] += step;
    double sum = 0.0;
    for (double m : masses) sum += m;
    if (std::fabs(sum - 1.0) <= 1e-12) return FiniteDistribution{std::move(masses)};
  }
}

// Oracle 1: enumerate every basic solution of the transportation polytope
// (spanning subsets of m+n-1 cells), solve the triangular allocation
// system, and take the cheapest feasible one. Exact for small supports.
inline double ot_vertex_enumeration(const std::vector<double>& a, const std::vector<double>& b,
                                    const std::vector<std::vector<double>>& cost) {
  const std::size_t m = a.size(), n = b.size();
  const std::size_t cells = m * n;
  const std::size_t basis_size = m + n - 1;
  double best = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> pick(basis_size);
  // iterate over all subsets of size basis_size
  for (std::size_t k = 0; k < basis_size; ++k) pick[k] = k;
  while (true) {
    // solve for the allocations on the picked cells by elimination:
    // repeatedly find a row/column that contains exactly one unresolved
    // picked cell and fix it from the residual marginal.
    std::vector<double> x(basis_size, 0.0);
    std::vector<bool> done(basis_size, false);
    std::vector<double> ra = a, rb = b;
    bool ok = true;
    for (std::size_t round = 0; round < basis_size; ++round) {
      std::size_t found = basis_size;
      bool by_row = true;
      for (std::size_t i = 0; i < m && found == basis_size; ++i) {
        std::size_t cnt = 0, last = basis_size;
        for (std::size_t k = 0; k < basis_size; ++k)
          if (!done[k] && pick[k] / n == i) { ++cnt; last = k; }
        if (cnt == 1) { found = last; by_row = true; }
      }
      for (std::size_t j = 0; j < n && found == basis_size; ++j) {
        std::size_t cnt = 0, last = basis_size;
        for (std::size_t k = 0; k < basis_size; ++k)
          if (!done[k] && pick[k] % n == j) { ++cnt; last = k; }
        if (cnt == 1) { found = last; by_row = false; }
      }
      if (found == basis_size) { ok = false; break; }  // contains a cycle
      const std::size_t i = pick[found] / n, j = pick[found] % n;
      const double q = by_row ? ra[i] : rb[j];
      x[found] = q;
      ra[i] -= q;
      rb[j] -= q;
      done[found] = true;
    }
    if (ok) {
      bool feasible = true;
      double total = 0.0;
      for (std::size_t k = 0; k < basis_size; ++k) {
        if (x[k] < -1e-9) { feasible = false; break; }
        total += std::max(x[k], 0.0) * cost[pick[k] / n][pick[k] % n];
      }
      for (std::size_t i = 0; i < m && feasible; ++i)
        if (std::fabs(ra[i]) > 1e-9) feasible = false;
      for (std::size_t j = 0; j < n && feasible; ++j)
        if (std::fabs(rb[j]) > 1e-9) feasible = false;
      if (feasible) best = std::min(best, total);
    }
    // next subset
    std::size_t pos = basis_size;
    while (pos-- > 0) {
      if (pick[pos] + (basis_size - pos) < cells) {
        ++pick[pos];
        for (std::size_t k = pos + 1; k < basis_size; ++k) pick[k] = pick[k - 1] + 1;
        break;
      }
      if (pos == 0) return best;
    }
  }
}

// Oracle 2: grid brute force over the dual. Scans 1-Lipschitz potentials
// with f(p_0)=0 on a grid of the given step (Lipschitz slack one step),
// maximizing sum f d(mu-nu). The result is within 2*step of the distance.
// Supports exactly 3 ground points.
inline double ot_dual_grid_3(const FiniteDistribution& mu, const FiniteDistribution& nu,
                             const MetricSpace& ground, double step) {
  const double w1 = mu.masses[1] - nu.masses[1];
  const double w2 = mu.masses[2] - nu.masses[2];
  const double d01 = ground.dist[0][1], d02 = ground.dist[0][2], d12 = ground.dist[1][2];
  double best = 0.0;
  const long units = std::lround(1.0 / step);
  for (long i = -units; i <= units; ++i) {
    const double f1 = static_cast<double>(i) * step;
    if (std::fabs(f1) > d01 + step + 1e-12) continue;
    for (long j = -units; j <= units; ++j) {
      const double f2 = static_cast<double>(j) * step;
      if (std::fabs(f2) > d02 + step + 1e-12) continue;
      if (std::fabs(f1 - f2) > d12 + step + 1e-12) continue;
      best = std::max(best, f1 * w1 + f2 * w2);
    }
  }
  return best;
}

// 2-state chain: s1 steps to the absorbing s2, rewards 0 and 1.
inline DiscountedSetup chain2_setup(double gamma = 0.5) {
  MDP mdp = make_mdp({"s1", "s2"}, {"go"}, {{{0.0, 1.0}, {0.0, 1.0}}}, {{0.0, 1.0}});
  return make_setup(std::move(mdp), gamma);
}

inline DiscountedSetup random_setup(Rng& rng, std::size_t max_states = 5,
                                    std::size_t max_actions = 3, double gamma = 0.9) {
  const std::size_t ns = 1 + rng.uniform_index(max_states);
  const std::size_t na = 1 + rng.uniform_index(max_actions);
  std::vector<std::string> states, actions;
  for (std::size_t s = 0; s < ns; ++s) states.push_back("s" + std::to_string(s));
  for (std::size_t a = 0; a < na; ++a) actions.push_back("a" + std::to_string(a));
  std::vector<std::vector<std::vector<double>>> transitions(
      na, std::vector<std::vector<double>>(ns, std::vector<double>(ns)));
  std::vector<std::vector<double>> rewards(na, std::vector<double>(ns));
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t s = 0; s < ns; ++s) {
      double sum = 0.0;
      for (double& p : transitions[a][s]) {
        p = rng.uniform01() + 1e-9;
        sum += p;
      }
      for (double& p : transitions[a][s]) p /= sum;
      rewards[a][s] = rng.uniform01();
    }
  return make_setup(
      make_mdp(std::move(states), std::move(actions), std::move(transitions), std::move(rewards)),
      gamma);
}

inline PolicyTree random_policy_tree(Rng& rng, const DiscountedSetup& setup, std::size_t depth) {
  if (depth == 0 || rng.uniform01() < 0.35)
    return PolicyTree::leaf(
        sample_policy(rng, setup.mdp.n_states(), setup.mdp.n_actions()));
  return PolicyTree::mix(rng.uniform01(), random_policy_tree(rng, setup, depth - 1),
                         random_policy_tree(rng, setup, depth - 1));
}

}  // namespace qfix::testing
