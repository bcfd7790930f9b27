#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qfix/deduction.hpp"
#include "qfix/errors.hpp"
#include "qfix/pattern.hpp"
#include "qfix/rng.hpp"
#include "qfix/term.hpp"

namespace qfix {

inline bool contains_mu(const Term& t) {
  switch (t.kind()) {
    case Term::Kind::Mu:
      return true;
    case Term::Kind::Apply:
      for (const Term& c : t.args())
        if (contains_mu(c)) return true;
      return false;
    default:
      return false;
  }
}

namespace detail {

// Evaluates t to within `accuracy` of its exact value. Applications are
// nonexpansive, so child accuracy carries through; each mu node runs its
// own certified iteration with a quarter of the budget spent on body
// evaluations and half on the residual threshold, which keeps the total
// below the budget. Exact (up to rounding) whenever t has no mu node.
template <class Model>
typename Model::element_type eval_rec(const Model& model, const Term& t,
                                      std::span<const typename Model::element_type> env,
                                      double accuracy,
                                      std::vector<typename Model::element_type>& bound) {
  using element = typename Model::element_type;
  switch (t.kind()) {
    case Term::Kind::Free: {
      if (t.slot() > env.size())
        fail(Errc::SlotOutOfRange, "slot " + std::to_string(t.slot()) + " with environment of " +
                                       std::to_string(env.size()));
      return env[t.slot() - 1];
    }
    case Term::Kind::Bound: {
      if (t.bound_depth() >= bound.size())
        fail(Errc::ModelEvaluationFailure, "unresolved bound variable");
      return bound[bound.size() - 1 - t.bound_depth()];
    }
    case Term::Kind::Apply: {
      std::vector<element> args;
      args.reserve(t.args().size());
      for (const Term& c : t.args()) args.push_back(eval_rec(model, c, env, accuracy, bound));
      return model.interpret(t.symbol_name(), args);
    }
    case Term::Kind::Mu: {
      if (!(accuracy > 0.0))
        fail(Errc::ModelEvaluationFailure, "mu evaluation needs a positive accuracy");
      const Pattern p = infer_rec(t.body(), model.signature(), env.size(), bound.size() + 1);
      const double a = contraction_modulus(p, env.size() + bound.size() + 1);
      if (a >= 1.0 - kTol) fail(Errc::NotContractive, "mu over modulus " + std::to_string(a));
      const double body_accuracy = accuracy * (1.0 - a) / 4.0;
      const double residual_stop = accuracy * (1.0 - a) / 2.0;
      const std::size_t max_steps = required_iterations(a, accuracy / 2.0);
      element x = model.origin();
      bound.push_back(x);
      for (std::size_t k = 0; k <= max_steps; ++k) {
        bound.back() = x;
        element fx = eval_rec(model, t.body(), env, body_accuracy, bound);
        const double residual = model.distance(x, fx);
        x = std::move(fx);
        if (residual <= residual_stop) break;
      }
      bound.pop_back();
      return x;
    }
  }
  fail(Errc::ShapeMismatch, "corrupt term");
}

}  // namespace detail

template <class Model>
typename Model::element_type evaluate(const Model& model, const Term& t,
                                      std::span<const typename Model::element_type> env,
                                      double mu_accuracy = 1e-12) {
  std::vector<typename Model::element_type> bound;
  return detail::eval_rec(model, t, env, mu_accuracy, bound);
}

// An approximate fixed point with provable error bounds. On success
// min(a_priori_bound, a_posteriori_bound) <= target_epsilon, the a-priori
// bound is a^k/(1-a) for the performed iteration count, and the
// a-posteriori bound is residual/(1-a) at the final iterate.
template <class Element>
struct Certificate {
  Element value{};
  std::size_t iterations = 0;
  double a_priori_bound = 0.0;
  double a_posteriori_bound = 0.0;
  double modulus = 0.0;
  double target_epsilon = 0.0;
};

// Banach iteration for the fixed point of t at its focus slot, all other
// slots read from `environment`. Stops at the first k where the a-priori
// bound a^k/(1-a) or the a-posteriori bound residual/(1-a) reaches epsilon.
// The modulus comes from the inferred pattern, never from observation.
// Bodies containing nested mu are evaluated to epsilon/8192 and the
// stopping threshold is tightened by the same amount, so the certificate
// stays valid; mu-free bodies are evaluated exactly.
template <class Model>
Certificate<typename Model::element_type> solve_mu(
    const Model& model, const FocusedTerm& t,
    std::vector<typename Model::element_type> environment, double epsilon,
    std::optional<typename Model::element_type> seed_value = {}) {
  using element = typename Model::element_type;
  if (!(epsilon > 0.0)) fail(Errc::NonpositiveEpsilon, std::to_string(epsilon));
  if (t.focus < 1) fail(Errc::SlotOutOfRange, "focus slots start at 1");
  const std::size_t ctx = std::max(t.term.arity(), t.focus);
  const Pattern theta = infer_pattern(t.term, model.signature(), ctx);
  const double a = contraction_modulus(theta, t.focus);
  if (a >= 1.0 - kTol)
    fail(Errc::NotContractive,
         "modulus " + std::to_string(a) + " at focus " + std::to_string(t.focus));

  const bool nested = contains_mu(t.term);
  const double body_accuracy = nested ? epsilon * (1.0 - a) / 8192.0 : 0.0;
  const double stop_epsilon = nested ? epsilon * (1.0 - 1.0 / 8192.0) : epsilon;

  while (environment.size() < ctx) environment.push_back(model.origin());
  element x = seed_value ? std::move(*seed_value) : model.origin();

  Certificate<element> cert;
  cert.modulus = a;
  cert.target_epsilon = epsilon;
  std::size_t k = 0;
  while (true) {
    const double apriori = std::pow(a, static_cast<double>(k)) / (1.0 - a);
    environment[t.focus - 1] = x;
    element fx = evaluate(model, t.term, environment, body_accuracy);
    const double residual = model.distance(x, fx);
    const double aposteriori = residual / (1.0 - a);
    if (apriori <= stop_epsilon || aposteriori <= stop_epsilon) {
      cert.value = std::move(x);
      cert.iterations = k;
      cert.a_priori_bound = apriori;
      cert.a_posteriori_bound = aposteriori;
      return cert;
    }
    x = std::move(fx);
    ++k;
  }
}

// Two independent solves; the unique fixed point forces the values within
// 2*epsilon of each other, which is enforced.
template <class Model>
std::pair<Certificate<typename Model::element_type>, Certificate<typename Model::element_type>>
solve_mu_two_seeds(const Model& model, const FocusedTerm& t,
                   std::vector<typename Model::element_type> environment, double epsilon,
                   typename Model::element_type seed_a, typename Model::element_type seed_b) {
  auto ca = solve_mu(model, t, environment, epsilon, std::move(seed_a));
  auto cb = solve_mu(model, t, environment, epsilon, std::move(seed_b));
  const double gap = model.distance(ca.value, cb.value);
  if (gap > 2.0 * epsilon + kTol)
    fail(Errc::ModelEvaluationFailure,
         "two-seed solves disagree by " + std::to_string(gap));
  return {std::move(ca), std::move(cb)};
}

// ----- fixed-point laws -------------------------------------------------------

enum class Law { Dinaturality, Diagonal, Amalgamation };

inline const char* law_name(Law l) {
  switch (l) {
    case Law::Dinaturality: return "dinaturality";
    case Law::Diagonal: return "diagonal";
    case Law::Amalgamation: return "amalgamation";
  }
  return "?";
}

struct LawReport {
  Law law = Law::Dinaturality;
  double discrepancy = 0.0;
  double epsilon = 0.0;
  bool pass = false;
};

// mu y. f(g(y))  vs  f(mu x. g(f(x))) for unary f, g. Both composites must
// be contractive, which is checked on the inferred patterns first.
template <class Model>
LawReport verify_dinaturality(const Model& model, const FocusedTerm& f, const FocusedTerm& g,
                              double epsilon) {
  if (f.focus != 1 || g.focus != 1 || f.term.arity() > 1 || g.term.arity() > 1)
    fail(Errc::PreconditionViolated, "dinaturality verifier takes unary maps focused at slot 1");
  const Term fg = splice(f.term, 1, g.term, 1);
  const Term gf = splice(g.term, 1, f.term, 1);
  const double afg = contraction_modulus(infer_pattern(fg, model.signature(), 1), 1);
  const double agf = contraction_modulus(infer_pattern(gf, model.signature(), 1), 1);
  if (afg >= 1.0 - kTol || agf >= 1.0 - kTol)
    fail(Errc::PreconditionViolated, "composite modulus " + std::to_string(std::max(afg, agf)) +
                                         " is not below 1");

  auto left = solve_mu(model, FocusedTerm{fg, 1}, {}, epsilon / 4.0);
  auto inner = solve_mu(model, FocusedTerm{gf, 1}, {}, epsilon / 4.0);
  std::vector<typename Model::element_type> env{inner.value};
  auto right = evaluate(model, f.term, env, epsilon / 8.0);

  LawReport report;
  report.law = Law::Dinaturality;
  report.epsilon = epsilon;
  report.discrepancy = model.distance(left.value, right);
  report.pass = report.discrepancy <= epsilon;
  return report;
}

// mu x. f(x,x)  vs  mu y. mu x. f(x,y) for binary f with alpha_1+alpha_2 < 1
// in every pattern tuple.
template <class Model>
LawReport verify_diagonal(const Model& model, const Term& f, double epsilon) {
  if (f.arity() > 2) fail(Errc::PreconditionViolated, "diagonal verifier takes binary maps");
  const Pattern theta = infer_pattern(f, model.signature(), 2);
  for (const WeightTuple& t : theta.tuples()) {
    const double s = t.at(1) + t.at(2);
    if (s >= 1.0 - kTol)
      fail(Errc::PreconditionViolated,
           "tuple " + to_string(t) + " has alpha_1+alpha_2 = " + std::to_string(s));
  }

  const Term diag = merge_slots(f, 1, 2);
  auto left = solve_mu(model, FocusedTerm{diag, 1}, {}, epsilon / 4.0);
  const Term inner = Term::mu(1, f);
  auto right = solve_mu(model, FocusedTerm{inner, 1}, {}, epsilon / 4.0);

  LawReport report;
  report.law = Law::Diagonal;
  report.epsilon = epsilon;
  report.discrepancy = model.distance(left.value, right.value);
  report.pass = report.discrepancy <= epsilon;
  return report;
}

// Joint fixed point s_i = f_i(s_1..s_n) of an equal-row-sum family against
// mu x. g(x), where every f_i collapses to g on the diagonal. The family
// system is solved by synchronous iteration on the sup-metric product
// space, whose modulus is the shared row sum.
template <class Model>
LawReport verify_amalgamation(const Model& model, const std::vector<Term>& family, const Term& g,
                              double epsilon, std::uint64_t seed = 0) {
  using element = typename Model::element_type;
  const std::size_t n = family.size();
  if (n == 0) fail(Errc::PreconditionViolated, "empty family");
  if (g.arity() > 1) fail(Errc::PreconditionViolated, "g must be unary");

  double alpha = -1.0;
  for (const Term& fi : family) {
    if (fi.arity() > n)
      fail(Errc::PreconditionViolated, "family member arity exceeds family size");
    const Pattern theta = infer_pattern(fi, model.signature(), n);
    for (const WeightTuple& t : theta.tuples()) {
      const double s = t.sum();
      if (alpha < 0.0) alpha = s;
      if (std::fabs(s - alpha) > 1e-9)
        fail(Errc::PreconditionViolated, "row sums differ: " + std::to_string(alpha) + " vs " +
                                             std::to_string(s));
    }
  }
  if (alpha >= 1.0 - kTol)
    fail(Errc::PreconditionViolated, "shared row sum " + std::to_string(alpha) + " is not below 1");
  const double ag = contraction_modulus(infer_pattern(g, model.signature(), 1), 1);
  if (std::fabs(ag - alpha) > 1e-9)
    fail(Errc::PreconditionViolated, "g has modulus " + std::to_string(ag) +
                                         ", family row sum is " + std::to_string(alpha));

  // spot-check the diagonal collapse f_i(x,..,x) = g(x)
  for (std::size_t trial = 0; trial < 8; ++trial) {
    Rng rng(derive_seed(seed, trial));
    const element x = model.sample(rng);
    std::vector<element> diag_env(n, x);
    std::vector<element> gx_env{x};
    const element gx = evaluate(model, g, gx_env, epsilon / 16.0);
    for (const Term& fi : family) {
      const element fx = evaluate(model, fi, diag_env, epsilon / 16.0);
      if (model.distance(fx, gx) > 1e-9 + epsilon / 8.0)
        fail(Errc::PreconditionViolated, "family does not collapse to g on the diagonal");
    }
  }

  bool nested = contains_mu(g);
  for (const Term& fi : family) nested = nested || contains_mu(fi);
  const double body_accuracy = nested ? epsilon * (1.0 - alpha) / 8192.0 : 0.0;
  const double goal = epsilon / 4.0;
  const std::size_t max_steps = required_iterations(alpha, goal);
  std::vector<element> s(n, model.origin());
  for (std::size_t k = 0; k < max_steps; ++k) {
    std::vector<element> next;
    next.reserve(n);
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next.push_back(evaluate(model, family[i], s, body_accuracy));
      residual = std::max(residual, model.distance(next[i], s[i]));
    }
    s = std::move(next);
    if (residual / (1.0 - alpha) <= goal) break;
  }

  auto t_cert = solve_mu(model, FocusedTerm{g, 1}, {}, goal);
  LawReport report;
  report.law = Law::Amalgamation;
  report.epsilon = epsilon;
  for (const element& si : s)
    report.discrepancy = std::max(report.discrepancy, model.distance(si, t_cert.value));
  report.pass = report.discrepancy <= epsilon;
  return report;
}

struct LawSpec {
  Law law = Law::Dinaturality;
  std::optional<FocusedTerm> f;  // dinaturality
  std::optional<FocusedTerm> g;  // dinaturality
  std::optional<Term> diag;      // diagonal
  std::vector<Term> family;      // amalgamation
  std::optional<Term> g_map;     // amalgamation
};

template <class Model>
LawReport verify_law(const Model& model, const LawSpec& spec, double epsilon,
                     std::uint64_t seed = 0) {
  switch (spec.law) {
    case Law::Dinaturality:
      if (!spec.f || !spec.g) fail(Errc::PreconditionViolated, "dinaturality needs f and g");
      return verify_dinaturality(model, *spec.f, *spec.g, epsilon);
    case Law::Diagonal:
      if (!spec.diag) fail(Errc::PreconditionViolated, "diagonal needs the map term");
      return verify_diagonal(model, *spec.diag, epsilon);
    case Law::Amalgamation:
      if (spec.family.empty() || !spec.g_map)
        fail(Errc::PreconditionViolated, "amalgamation needs the family and g");
      return verify_amalgamation(model, spec.family, *spec.g_map, epsilon, seed);
  }
  fail(Errc::PreconditionViolated, "unknown law");
}

}  // namespace qfix
