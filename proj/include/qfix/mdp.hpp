#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qfix/errors.hpp"
#include "qfix/fixpoint.hpp"
#include "qfix/linalg.hpp"
#include "qfix/metric_models.hpp"
#include "qfix/rng.hpp"
#include "qfix/term.hpp"

namespace qfix {

// Finite Markov decision process. transitions[a][s] is the distribution of
// the next state under action a, rewards[a][s] the immediate reward in
// [0,1].
struct MDP {
  std::vector<std::string> states;
  std::vector<std::string> actions;
  std::vector<std::vector<std::vector<double>>> transitions;  // [action][s][s']
  std::vector<std::vector<double>> rewards;                   // [action][s]

  std::size_t n_states() const noexcept { return states.size(); }
  std::size_t n_actions() const noexcept { return actions.size(); }
};

inline MDP make_mdp(std::vector<std::string> states, std::vector<std::string> actions,
                    std::vector<std::vector<std::vector<double>>> transitions,
                    std::vector<std::vector<double>> rewards) {
  const std::size_t ns = states.size(), na = actions.size();
  if (ns == 0) fail(Errc::EmptyStateSet, "no states");
  if (na == 0) fail(Errc::EmptyActionSet, "no actions");
  if (transitions.size() != na || rewards.size() != na)
    fail(Errc::ActionSetMismatch, "transition/reward tables must cover every action");
  for (std::size_t a = 0; a < na; ++a) {
    if (transitions[a].size() != ns)
      fail(Errc::DimensionMismatch, "transition matrix for action " + actions[a]);
    for (std::size_t s = 0; s < ns; ++s) {
      if (transitions[a][s].size() != ns)
        fail(Errc::DimensionMismatch, "transition row " + states[s] + "/" + actions[a]);
      double sum = 0.0;
      for (double p : transitions[a][s]) {
        if (p < -kTol)
          fail(Errc::RowNotStochastic, "negative probability at state " + states[s] +
                                           ", action " + actions[a]);
        sum += p;
      }
      if (std::fabs(sum - 1.0) > kTol)
        fail(Errc::RowNotStochastic, "state " + states[s] + ", action " + actions[a] +
                                         " sums to " + std::to_string(sum));
    }
    if (rewards[a].size() != ns)
      fail(Errc::DimensionMismatch, "reward vector for action " + actions[a]);
    for (double r : rewards[a])
      if (r < -kTol || r > 1.0 + kTol)
        fail(Errc::RewardOutOfRange, "reward " + std::to_string(r) + " for action " + actions[a]);
  }
  return MDP{std::move(states), std::move(actions), std::move(transitions), std::move(rewards)};
}

// Per-state distribution over actions.
struct Policy {
  std::vector<std::vector<double>> probs;  // [state][action]

  friend bool operator==(const Policy& a, const Policy& b) { return a.probs == b.probs; }
};

inline Policy make_policy(std::vector<std::vector<double>> probs, std::size_t n_actions) {
  for (auto& row : probs) {
    if (row.size() != n_actions)
      fail(Errc::ActionSetMismatch, "policy row covers " + std::to_string(row.size()) +
                                        " of " + std::to_string(n_actions) + " actions");
    double sum = 0.0;
    for (double p : row) {
      if (p < -kTol) fail(Errc::MassMismatch, "negative action probability");
      sum += p;
    }
    if (std::fabs(sum - 1.0) > kTol)
      fail(Errc::MassMismatch, "policy row sums to " + std::to_string(sum));
  }
  return Policy{std::move(probs)};
}

// Constant policy playing action index a in every state.
inline Policy dirac_policy(std::size_t n_states, std::size_t n_actions, std::size_t a) {
  if (a >= n_actions) fail(Errc::IndexOutOfRange, "action index " + std::to_string(a));
  std::vector<std::vector<double>> rows(n_states, std::vector<double>(n_actions, 0.0));
  for (auto& row : rows) row[a] = 1.0;
  return Policy{std::move(rows)};
}

inline Policy mix_policies(double eps, const Policy& a, const Policy& b) {
  if (eps < -kTol || eps > 1.0 + kTol) fail(Errc::ScalarOutOfRange, std::to_string(eps));
  if (a.probs.size() != b.probs.size()) fail(Errc::DimensionMismatch, "policy state counts");
  std::vector<std::vector<double>> rows;
  rows.reserve(a.probs.size());
  for (std::size_t s = 0; s < a.probs.size(); ++s) {
    if (a.probs[s].size() != b.probs[s].size())
      fail(Errc::ActionSetMismatch, "policy action counts");
    std::vector<double> row(a.probs[s].size());
    for (std::size_t k = 0; k < row.size(); ++k)
      row[k] = eps * a.probs[s][k] + (1.0 - eps) * b.probs[s][k];
    rows.push_back(std::move(row));
  }
  return Policy{std::move(rows)};
}

struct DiscountedSetup {
  MDP mdp;
  double gamma = 0.5;
};

inline DiscountedSetup make_setup(MDP mdp, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0))
    fail(Errc::PreconditionViolated, "discount factor " + std::to_string(gamma));
  return DiscountedSetup{std::move(mdp), gamma};
}

using ValueFunction = std::vector<double>;

inline void check_policy_shape(const DiscountedSetup& setup, const Policy& pi) {
  if (pi.probs.size() != setup.mdp.n_states())
    fail(Errc::ActionSetMismatch, "policy covers " + std::to_string(pi.probs.size()) + " of " +
                                      std::to_string(setup.mdp.n_states()) + " states");
  for (const auto& row : pi.probs)
    if (row.size() != setup.mdp.n_actions())
      fail(Errc::ActionSetMismatch, "policy row covers " + std::to_string(row.size()) + " of " +
                                        std::to_string(setup.mdp.n_actions()) + " actions");
}

// R^pi(s) = sum_a pi(s)(a) R^a(s).
inline ValueFunction expected_reward(const DiscountedSetup& setup, const Policy& pi) {
  check_policy_shape(setup, pi);
  const MDP& m = setup.mdp;
  ValueFunction out(m.n_states(), 0.0);
  for (std::size_t s = 0; s < m.n_states(); ++s)
    for (std::size_t a = 0; a < m.n_actions(); ++a) out[s] += pi.probs[s][a] * m.rewards[a][s];
  return out;
}

// T^pi(f)(s) = (1-gamma) R^pi(s) + gamma sum_a sum_s' pi(s)(a) P^a(s,s') f(s').
inline ValueFunction bellman_apply(const DiscountedSetup& setup, const Policy& pi,
                                   const ValueFunction& f) {
  check_policy_shape(setup, pi);
  const MDP& m = setup.mdp;
  if (f.size() != m.n_states()) fail(Errc::DimensionMismatch, "value function size");
  const ValueFunction r = expected_reward(setup, pi);
  ValueFunction out(m.n_states(), 0.0);
  for (std::size_t s = 0; s < m.n_states(); ++s) {
    double cont = 0.0;
    for (std::size_t a = 0; a < m.n_actions(); ++a) {
      double step = 0.0;
      for (std::size_t t = 0; t < m.n_states(); ++t) step += m.transitions[a][s][t] * f[t];
      cont += pi.probs[s][a] * step;
    }
    out[s] = (1.0 - setup.gamma) * r[s] + setup.gamma * cont;
  }
  return out;
}

// Direct solve of (I - gamma P^pi) V = (1-gamma) R^pi; strict diagonal
// dominance (row gap 1-gamma) keeps partial pivoting stable.
inline ValueFunction exact_policy_value(const DiscountedSetup& setup, const Policy& pi) {
  check_policy_shape(setup, pi);
  const MDP& m = setup.mdp;
  const std::size_t n = m.n_states();
  Matrix a(n, std::vector<double>(n, 0.0));
  for (std::size_t s = 0; s < n; ++s) {
    a[s][s] = 1.0;
    for (std::size_t act = 0; act < m.n_actions(); ++act)
      for (std::size_t t = 0; t < n; ++t)
        a[s][t] -= setup.gamma * pi.probs[s][act] * m.transitions[act][s][t];
  }
  ValueFunction rhs = expected_reward(setup, pi);
  for (double& x : rhs) x *= 1.0 - setup.gamma;
  return solve_linear(std::move(a), std::move(rhs));
}

// ----- policy trees -----------------------------------------------------------

// Either a policy leaf or a convex mix of two subtrees; the denoted policy
// of mix(e, L, R) is the pointwise combination e*L + (1-e)*R.
class PolicyTree {
 public:
  static PolicyTree leaf(Policy p) {
    PolicyTree t;
    t.node_ = std::make_shared<const Node>(Node{std::move(p), 0.0, nullptr, nullptr});
    return t;
  }

  static PolicyTree mix(double eps, PolicyTree left, PolicyTree right) {
    if (eps < -kTol || eps > 1.0 + kTol) fail(Errc::ScalarOutOfRange, std::to_string(eps));
    PolicyTree t;
    t.node_ = std::make_shared<const Node>(
        Node{std::nullopt, eps, std::move(left.node_), std::move(right.node_)});
    return t;
  }

  bool is_leaf() const noexcept { return node_->policy.has_value(); }
  const Policy& policy() const { return *node_->policy; }
  double eps() const noexcept { return node_->eps; }

  PolicyTree left() const {
    PolicyTree t;
    t.node_ = node_->left;
    return t;
  }

  PolicyTree right() const {
    PolicyTree t;
    t.node_ = node_->right;
    return t;
  }

 private:
  struct Node {
    std::optional<Policy> policy;
    double eps;
    std::shared_ptr<const Node> left, right;
  };

  std::shared_ptr<const Node> node_;
};

inline Policy denoted_policy(const PolicyTree& tree) {
  if (tree.is_leaf()) return tree.policy();
  return mix_policies(tree.eps(), denoted_policy(tree.left()), denoted_policy(tree.right()));
}

// ----- value-function model ----------------------------------------------------

// Value functions [0,1]^S under the sup metric, with the mixing,
// transition and discounted-reward operators bound on demand. Symbols are
// deduplicated by parameter, so repeated binds return the same name.
class ValueFunctionModel {
 public:
  using element_type = ValueFunction;

  explicit ValueFunctionModel(DiscountedSetup setup) : setup_(std::move(setup)) {}

  const DiscountedSetup& setup() const noexcept { return setup_; }

  // f +_eps g
  std::string bind_barycentric(double eps) {
    if (eps < -kTol || eps > 1.0 + kTol) fail(Errc::ScalarOutOfRange, std::to_string(eps));
    for (std::size_t k = 0; k < itps_.size(); ++k)
      if (itps_[k].kind == Interp::Mix && itps_[k].eps == eps) return sig_.symbols()[k].name;
    const std::string name = "mix_" + std::to_string(mix_count_++);
    sig_.add(make_symbol(name, 2, Pattern(2, {WeightTuple{eps, 1.0 - eps}})));
    itps_.push_back(Interp{Interp::Mix, eps, 0});
    return name;
  }

  // <pi> f : one-step expected value under pi
  std::string bind_transition(const Policy& pi) { return bind_policy(Interp::Trans, "step_", pi); }

  // |pi| f = (1-gamma) R^pi + gamma f
  std::string bind_discounted(const Policy& pi) { return bind_policy(Interp::Disc, "disc_", pi); }

  double distance(const element_type& a, const element_type& b) const {
    return sup_distance(a, b);
  }

  element_type interpret(std::string_view name, std::span<const element_type> args) const {
    for (std::size_t k = 0; k < sig_.symbols().size(); ++k) {
      if (sig_.symbols()[k].name != name) continue;
      const Interp& it = itps_[k];
      if (args.size() != sig_.symbols()[k].arity) fail(Errc::ArityMismatch, std::string(name));
      for (const element_type& f : args)
        if (f.size() != setup_.mdp.n_states()) fail(Errc::DimensionMismatch, "value function size");
      switch (it.kind) {
        case Interp::Mix: {
          element_type out(setup_.mdp.n_states());
          for (std::size_t s = 0; s < out.size(); ++s)
            out[s] = it.eps * args[0][s] + (1.0 - it.eps) * args[1][s];
          return out;
        }
        case Interp::Trans: {
          const Policy& pi = policies_[it.policy];
          const MDP& m = setup_.mdp;
          element_type out(m.n_states(), 0.0);
          for (std::size_t s = 0; s < m.n_states(); ++s)
            for (std::size_t a = 0; a < m.n_actions(); ++a) {
              double step = 0.0;
              for (std::size_t t = 0; t < m.n_states(); ++t)
                step += m.transitions[a][s][t] * args[0][t];
              out[s] += pi.probs[s][a] * step;
            }
          return out;
        }
        case Interp::Disc: {
          const Policy& pi = policies_[it.policy];
          const ValueFunction r = expected_reward(setup_, pi);
          element_type out(setup_.mdp.n_states());
          for (std::size_t s = 0; s < out.size(); ++s)
            out[s] = (1.0 - setup_.gamma) * r[s] + setup_.gamma * args[0][s];
          return out;
        }
      }
    }
    fail(Errc::UnknownSymbol, std::string(name));
  }

  element_type sample(Rng& rng) const {
    element_type out(setup_.mdp.n_states());
    for (double& x : out) x = rng.uniform01();
    return out;
  }

  element_type origin() const { return element_type(setup_.mdp.n_states(), 0.0); }

  const Signature& signature() const noexcept { return sig_; }

 private:
  struct Interp {
    enum Kind { Mix, Trans, Disc } kind;
    double eps;
    std::size_t policy;
  };

  std::string bind_policy(Interp::Kind kind, const char* prefix, const Policy& pi) {
    check_policy_shape(setup_, pi);
    for (std::size_t k = 0; k < itps_.size(); ++k)
      if (itps_[k].kind == kind && policies_[itps_[k].policy] == pi)
        return sig_.symbols()[k].name;
    std::size_t pidx = policies_.size();
    for (std::size_t k = 0; k < policies_.size(); ++k)
      if (policies_[k] == pi) { pidx = k; break; }
    if (pidx == policies_.size()) policies_.push_back(pi);
    const std::string name =
        std::string(prefix) + std::to_string(kind == Interp::Trans ? trans_count_++ : disc_count_++);
    const double modulus = kind == Interp::Trans ? 1.0 : setup_.gamma;
    sig_.add(make_symbol(name, 1, Pattern(1, {WeightTuple{modulus}})));
    itps_.push_back(Interp{kind, 0.0, pidx});
    return name;
  }

  DiscountedSetup setup_;
  Signature sig_;
  std::vector<Interp> itps_;
  std::vector<Policy> policies_;
  std::size_t mix_count_ = 0, trans_count_ = 0, disc_count_ = 0;
};

// The syntactic Bellman operator of a policy tree: leaves take the direct
// form |pi|<pi> x1, mixes become barycentric nodes. The inferred pattern of
// the result is {<gamma>}.
struct OTermBuild {
  Term term;
  ValueFunctionModel model;
};

namespace detail {

inline Term build_o_rec(const PolicyTree& tree, ValueFunctionModel& model) {
  if (tree.is_leaf()) {
    const std::string step = model.bind_transition(tree.policy());
    const std::string disc = model.bind_discounted(tree.policy());
    return Term::apply(disc, {Term::apply(step, {Term::variable(1)})});
  }
  const std::string mix = model.bind_barycentric(tree.eps());
  return Term::apply(mix, {build_o_rec(tree.left(), model), build_o_rec(tree.right(), model)});
}

}  // namespace detail

inline OTermBuild build_O_term(const DiscountedSetup& setup, const PolicyTree& tree) {
  ValueFunctionModel model(setup);
  Term term = detail::build_o_rec(tree, model);
  return OTermBuild{std::move(term), std::move(model)};
}

// Certified policy evaluation: solves mu x1. O^pi(x1) in the value-function
// model from the all-zero seed.
inline Certificate<ValueFunction> policy_value(const DiscountedSetup& setup,
                                               const PolicyTree& tree, double epsilon) {
  OTermBuild build = build_O_term(setup, tree);
  return solve_mu(build.model, FocusedTerm{build.term, 1}, {}, epsilon);
}

inline Certificate<ValueFunction> policy_value(const DiscountedSetup& setup, const Policy& pi,
                                               double epsilon) {
  return policy_value(setup, PolicyTree::leaf(pi), epsilon);
}

// ----- axiom suite -------------------------------------------------------------

inline ValueFunction sample_value_function(Rng& rng, std::size_t n) {
  ValueFunction f(n);
  for (double& x : f) x = rng.uniform01();
  return f;
}

// Per-state normalized iid uniforms, so every policy in the simplex
// interior can appear.
inline Policy sample_policy(Rng& rng, std::size_t n_states, std::size_t n_actions) {
  std::vector<std::vector<double>> rows(n_states, std::vector<double>(n_actions));
  for (auto& row : rows) {
    double sum = 0.0;
    for (double& p : row) {
      p = rng.uniform01() + 1e-12;
      sum += p;
    }
    for (double& p : row) p /= sum;
  }
  return Policy{std::move(rows)};
}

struct AxiomResult {
  std::string name;
  double max_violation = 0.0;
  double threshold = 0.0;
  bool pass = true;
};

struct RbaReport {
  std::vector<AxiomResult> axioms;
  bool pass = true;
};

// Randomized check of the barycentric axioms B1, B2, SC, SA, the bound
// axiom BA, and the reward axioms R1, R2, R3 in the value-function model.
// Equality axioms must hold to 1e-12; bound axioms may not be violated by
// more than 1e-12.
inline RbaReport check_rba_axioms(const DiscountedSetup& setup, std::size_t trials,
                                  std::uint64_t seed) {
  const std::size_t ns = setup.mdp.n_states();
  const std::size_t na = setup.mdp.n_actions();
  const double gamma = setup.gamma;

  const auto mix = [&](double e, const ValueFunction& f, const ValueFunction& g) {
    ValueFunction out(ns);
    for (std::size_t s = 0; s < ns; ++s) out[s] = e * f[s] + (1.0 - e) * g[s];
    return out;
  };
  const auto trans = [&](const Policy& pi, const ValueFunction& f) {
    ValueFunction out(ns, 0.0);
    for (std::size_t s = 0; s < ns; ++s)
      for (std::size_t a = 0; a < na; ++a) {
        double step = 0.0;
        for (std::size_t t = 0; t < ns; ++t) step += setup.mdp.transitions[a][s][t] * f[t];
        out[s] += pi.probs[s][a] * step;
      }
    return out;
  };
  const auto disc = [&](const Policy& pi, const ValueFunction& f) {
    const ValueFunction r = expected_reward(setup, pi);
    ValueFunction out(ns);
    for (std::size_t s = 0; s < ns; ++s) out[s] = (1.0 - gamma) * r[s] + gamma * f[s];
    return out;
  };
  const auto d = [](const ValueFunction& f, const ValueFunction& g) {
    return sup_distance(f, g);
  };

  RbaReport report;
  const char* names[] = {"B1", "B2", "SC", "SA", "BA", "R1", "R2", "R3"};
  for (const char* name : names) report.axioms.push_back(AxiomResult{name, 0.0, 1e-12, true});

  for (std::size_t trial = 0; trial < trials; ++trial) {
    Rng rng(derive_seed(seed, trial));
    const ValueFunction f = sample_value_function(rng, ns);
    const ValueFunction g = sample_value_function(rng, ns);
    const ValueFunction h = sample_value_function(rng, ns);
    const ValueFunction f2 = sample_value_function(rng, ns);
    const ValueFunction g2 = sample_value_function(rng, ns);
    const Policy pi = sample_policy(rng, ns, na);
    const Policy pi2 = sample_policy(rng, ns, na);
    const double e = rng.uniform01();
    double e2 = rng.uniform01();
    while (1.0 - e * e2 < 1e-9) e2 = rng.uniform01();

    auto& b1 = report.axioms[0];
    b1.max_violation = std::max(b1.max_violation, d(mix(1.0, f, g), f));
    auto& b2 = report.axioms[1];
    b2.max_violation = std::max(b2.max_violation, d(mix(e, f, f), f));
    auto& sc = report.axioms[2];
    sc.max_violation = std::max(sc.max_violation, d(mix(e, f, g), mix(1.0 - e, g, f)));
    auto& sa = report.axioms[3];
    {
      const double inner = (e2 - e * e2) / (1.0 - e * e2);
      sa.max_violation = std::max(
          sa.max_violation, d(mix(e2, mix(e, f, g), h), mix(e * e2, f, mix(inner, g, h))));
    }
    auto& ba = report.axioms[4];
    {
      const double p = d(f, f2), q = d(g, g2);
      ba.max_violation = std::max(
          ba.max_violation, d(mix(e, f, g), mix(e, f2, g2)) - (e * p + (1.0 - e) * q));
    }
    auto& r1 = report.axioms[5];
    r1.max_violation = std::max(
        r1.max_violation,
        d(trans(mix_policies(e, pi, pi2), f), mix(e, trans(pi, f), trans(pi2, f))));
    auto& r2 = report.axioms[6];
    r2.max_violation = std::max(
        r2.max_violation, d(disc(mix_policies(e, pi, pi2), f), mix(e, disc(pi, f), disc(pi2, f))));
    auto& r3 = report.axioms[7];
    r3.max_violation = std::max(r3.max_violation, d(disc(pi, f), disc(pi, g)) - gamma * d(f, g));
  }

  for (AxiomResult& ax : report.axioms) {
    ax.pass = ax.max_violation <= ax.threshold;
    report.pass = report.pass && ax.pass;
  }
  return report;
}

}  // namespace qfix
