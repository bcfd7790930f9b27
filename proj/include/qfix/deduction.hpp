#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qfix/errors.hpp"
#include "qfix/pattern.hpp"
#include "qfix/term.hpp"

namespace qfix {

// Quantitative equation left =_eps right.
struct QuantEquation {
  Term left;
  Term right;
  double epsilon = 0.0;
};

inline QuantEquation make_equation(Term left, Term right, double epsilon) {
  if (epsilon < 0.0) fail(Errc::NegativeEpsilon, "equation with epsilon " + std::to_string(epsilon));
  return QuantEquation{std::move(left), std::move(right), epsilon};
}

inline bool same_equation(const QuantEquation& a, const QuantEquation& b) {
  return std::fabs(a.epsilon - b.epsilon) <= kTol && a.left == b.left && a.right == b.right;
}

struct Judgement {
  std::vector<QuantEquation> hypotheses;
  QuantEquation conclusion;
};

// hypotheses(a) as a set contains hypotheses(b)?
inline bool hypotheses_cover(const std::vector<QuantEquation>& outer,
                             const std::vector<QuantEquation>& required) {
  for (const QuantEquation& r : required) {
    bool found = false;
    for (const QuantEquation& h : outer)
      if (same_equation(h, r)) { found = true; break; }
    if (!found) return false;
  }
  return true;
}

// delta = max over tuples of sum_i alpha_i * eps_i.
inline double banach_delta(const Pattern& p, std::span<const double> eps) {
  if (eps.size() != p.arity())
    fail(Errc::ArityMismatch, std::to_string(eps.size()) + " epsilons for pattern of arity " +
                                  std::to_string(p.arity()));
  for (double e : eps)
    if (e < 0.0) fail(Errc::NegativeEpsilon, "epsilon " + std::to_string(e));
  double delta = 0.0;
  for (const WeightTuple& t : p.tuples()) {
    double s = 0.0;
    for (std::size_t k = 0; k < eps.size(); ++k) s += t.weights()[k] * eps[k];
    delta = std::max(delta, s);
  }
  return delta;
}

// From  hyps |- u =_eps t[u at focus]  derive
//       hyps |- u =_{eps/(1-a)} mu focus. t
// where a is the focus modulus of t's inferred pattern.
inline Judgement apply_approx(const Judgement& premise, const FocusedTerm& t,
                              const Signature& sig) {
  const std::size_t ctx = std::max(t.term.arity(), t.focus);
  const Pattern theta = infer_pattern(t.term, sig, ctx);
  const double a = contraction_modulus(theta, t.focus);
  if (a >= 1.0 - kTol)
    fail(Errc::NotContractive, "modulus " + std::to_string(a) + " at focus " +
                                   std::to_string(t.focus));
  const Term& u = premise.conclusion.left;
  const Term expected = substitute(t.term, t.focus, u);
  if (!(premise.conclusion.right == expected))
    fail(Errc::ShapeMismatch, "premise right side is not the focused unfolding");
  QuantEquation out{u, Term::mu(t.focus, t.term), premise.conclusion.epsilon / (1.0 - a)};
  return Judgement{premise.hypotheses, std::move(out)};
}

// Smallest k with a^k/(1-a) <= epsilon.
inline std::size_t required_iterations(double a, double epsilon) {
  if (!(a >= 0.0 && a < 1.0)) fail(Errc::NotContractive, "modulus " + std::to_string(a));
  if (!(epsilon > 0.0)) fail(Errc::NonpositiveEpsilon, std::to_string(epsilon));
  const auto bound = [&](std::size_t k) { return std::pow(a, static_cast<double>(k)) / (1.0 - a); };
  if (bound(0) <= epsilon) return 0;
  if (a == 0.0) return 1;
  double est = std::ceil(std::log(epsilon * (1.0 - a)) / std::log(a));
  std::size_t k = est < 1.0 ? 1 : static_cast<std::size_t>(est);
  while (bound(k) > epsilon) ++k;
  while (k > 0 && bound(k - 1) <= epsilon) --k;
  return k;
}

// eps * a^k * (1-a^l)/(1-a), the distance covered by iterates k..k+l when
// consecutive iterates start eps apart.
inline double iteration_bound(double epsilon, double a, std::size_t k, std::size_t l) {
  if (!(a >= 0.0 && a < 1.0)) fail(Errc::NotContractive, "modulus " + std::to_string(a));
  if (epsilon < 0.0) fail(Errc::NegativeEpsilon, std::to_string(epsilon));
  const double ak = std::pow(a, static_cast<double>(k));
  const double al = std::pow(a, static_cast<double>(l));
  return epsilon * ak * (1.0 - al) / (1.0 - a);
}

// ----- derivation checking --------------------------------------------------

enum class Rule { Refl, Symm, Triang, Max, NExp, Banach, OneBound, Approx, Assumpt, Cut, Subst };

inline const char* rule_name(Rule r) {
  switch (r) {
    case Rule::Refl: return "Refl";
    case Rule::Symm: return "Symm";
    case Rule::Triang: return "Triang";
    case Rule::Max: return "Max";
    case Rule::NExp: return "NExp";
    case Rule::Banach: return "Banach";
    case Rule::OneBound: return "OneBound";
    case Rule::Approx: return "Approx";
    case Rule::Assumpt: return "Assumpt";
    case Rule::Cut: return "Cut";
    case Rule::Subst: return "Subst";
  }
  return "?";
}

inline std::optional<Rule> rule_from_name(std::string_view name) {
  static const std::pair<const char*, Rule> table[] = {
      {"Refl", Rule::Refl},       {"Symm", Rule::Symm},   {"Triang", Rule::Triang},
      {"Max", Rule::Max},         {"NExp", Rule::NExp},   {"Banach", Rule::Banach},
      {"OneBound", Rule::OneBound}, {"Approx", Rule::Approx}, {"Assumpt", Rule::Assumpt},
      {"Cut", Rule::Cut},         {"Subst", Rule::Subst}};
  for (const auto& [n, r] : table)
    if (name == n) return r;
  return std::nullopt;
}

struct DerivationStep {
  Rule rule = Rule::Refl;
  std::vector<std::size_t> premises;
  Judgement conclusion;
  // rule parameters
  std::string symbol;                        // NExp, Banach
  std::optional<FocusedTerm> mu_term;        // Approx
  std::map<std::size_t, Term> substitution;  // Subst
  bool weakened = false;  // accept any conclusion epsilon >= the derived one
};

struct Derivation {
  std::vector<Judgement> axioms;
  std::vector<DerivationStep> steps;
};

struct CheckResult {
  bool accepted = false;
  std::size_t failed_step = 0;  // 1-based step number, valid when !accepted
  std::string code;    // WrongEpsilon, ShapeMismatch, BadPremise, UnknownRule, NotContractive
  std::string reason;  // human-readable detail

  static CheckResult ok() { return CheckResult{true, 0, "", ""}; }
};

namespace detail {

struct StepFailure {
  std::string code;
  std::string reason;
};

inline StepFailure wrong_epsilon(double expected, double found) {
  return {"WrongEpsilon",
          "expected " + std::to_string(expected) + ", found " + std::to_string(found)};
}

// Derived epsilon vs written epsilon: exact within kTol, or >= when the
// step opted into weakening.
inline std::optional<StepFailure> check_epsilon(double derived, double written, bool weakened) {
  if (std::fabs(written - derived) <= kTol) return std::nullopt;
  if (weakened && written >= derived - kTol) return std::nullopt;
  return wrong_epsilon(derived, written);
}

}  // namespace detail

// Validates each step against its rule; the first failing step is
// reported with a structured reason. Premise hypotheses must be carried:
// a conclusion may list extra hypotheses but never drop needed ones.
inline CheckResult check_derivation(const Derivation& d, const Signature& sig) {
  using detail::StepFailure;
  for (std::size_t idx = 0; idx < d.steps.size(); ++idx) {
    const DerivationStep& step = d.steps[idx];
    const Judgement& concl = step.conclusion;

    auto fail_step = [&](StepFailure f) {
      return CheckResult{false, idx + 1, std::move(f.code), std::move(f.reason)};
    };
    auto need_premises = [&](std::size_t n) -> std::optional<StepFailure> {
      if (step.premises.size() != n)
        return StepFailure{"BadPremise", "rule " + std::string(rule_name(step.rule)) +
                                             " takes " + std::to_string(n) + " premises, got " +
                                             std::to_string(step.premises.size())};
      for (std::size_t p : step.premises)
        if (p >= idx) return StepFailure{"BadPremise", "premise " + std::to_string(p) +
                                                           " is not an earlier step"};
      return std::nullopt;
    };
    auto premise = [&](std::size_t k) -> const Judgement& {
      return d.steps[step.premises[k]].conclusion;
    };
    auto check_hyps = [&](const std::vector<QuantEquation>& required)
        -> std::optional<StepFailure> {
      if (!hypotheses_cover(concl.hypotheses, required))
        return StepFailure{"BadPremise", "conclusion drops a needed hypothesis"};
      return std::nullopt;
    };
    auto union_hyps = [&]() {
      std::vector<QuantEquation> all;
      for (std::size_t p : step.premises)
        for (const QuantEquation& h : d.steps[p].conclusion.hypotheses) {
          bool dup = false;
          for (const QuantEquation& e : all)
            if (same_equation(e, h)) { dup = true; break; }
          if (!dup) all.push_back(h);
        }
      return all;
    };

    std::optional<StepFailure> failure;
    try {
      switch (step.rule) {
        case Rule::Refl: {
          failure = need_premises(0);
          if (failure) break;
          if (!(concl.conclusion.left == concl.conclusion.right)) {
            failure = StepFailure{"ShapeMismatch", "Refl needs identical sides"};
            break;
          }
          failure = detail::check_epsilon(0.0, concl.conclusion.epsilon, step.weakened);
          break;
        }
        case Rule::OneBound: {
          failure = need_premises(0);
          if (failure) break;
          failure = detail::check_epsilon(1.0, concl.conclusion.epsilon, step.weakened);
          break;
        }
        case Rule::Assumpt: {
          failure = need_premises(0);
          if (failure) break;
          bool found = false;
          for (const QuantEquation& h : concl.hypotheses)
            if (same_equation(h, concl.conclusion)) { found = true; break; }
          if (!found) {
            for (const Judgement& ax : d.axioms)
              if (same_equation(ax.conclusion, concl.conclusion) &&
                  hypotheses_cover(concl.hypotheses, ax.hypotheses)) {
                found = true;
                break;
              }
          }
          if (!found)
            failure = StepFailure{"ShapeMismatch",
                                  "conclusion is neither a hypothesis nor a header axiom"};
          break;
        }
        case Rule::Symm: {
          failure = need_premises(1);
          if (failure) break;
          const Judgement& p = premise(0);
          if (!(concl.conclusion.left == p.conclusion.right &&
                concl.conclusion.right == p.conclusion.left)) {
            failure = StepFailure{"ShapeMismatch", "Symm must swap the premise sides"};
            break;
          }
          failure = detail::check_epsilon(p.conclusion.epsilon, concl.conclusion.epsilon,
                                          step.weakened);
          if (!failure) failure = check_hyps(p.hypotheses);
          break;
        }
        case Rule::Triang: {
          failure = need_premises(2);
          if (failure) break;
          const Judgement& p1 = premise(0);
          const Judgement& p2 = premise(1);
          if (!(p1.conclusion.right == p2.conclusion.left)) {
            failure = StepFailure{"ShapeMismatch", "Triang premises do not chain"};
            break;
          }
          if (!(concl.conclusion.left == p1.conclusion.left &&
                concl.conclusion.right == p2.conclusion.right)) {
            failure = StepFailure{"ShapeMismatch", "Triang endpoints do not match"};
            break;
          }
          failure = detail::check_epsilon(p1.conclusion.epsilon + p2.conclusion.epsilon,
                                          concl.conclusion.epsilon, step.weakened);
          if (!failure) failure = check_hyps(union_hyps());
          break;
        }
        case Rule::Max: {
          failure = need_premises(1);
          if (failure) break;
          const Judgement& p = premise(0);
          if (!(concl.conclusion.left == p.conclusion.left &&
                concl.conclusion.right == p.conclusion.right)) {
            failure = StepFailure{"ShapeMismatch", "Max must keep the premise sides"};
            break;
          }
          if (concl.conclusion.epsilon < p.conclusion.epsilon - kTol) {
            failure = detail::wrong_epsilon(p.conclusion.epsilon, concl.conclusion.epsilon);
            break;
          }
          failure = check_hyps(p.hypotheses);
          break;
        }
        case Rule::NExp:
        case Rule::Banach: {
          const FunctionSymbol& sym = sig.at(step.symbol);
          failure = need_premises(sym.arity);
          if (failure) break;
          std::vector<Term> lhs, rhs;
          std::vector<double> eps;
          for (std::size_t k = 0; k < sym.arity; ++k) {
            const Judgement& p = premise(k);
            lhs.push_back(p.conclusion.left);
            rhs.push_back(p.conclusion.right);
            eps.push_back(p.conclusion.epsilon);
          }
          double derived = 0.0;
          if (step.rule == Rule::NExp) {
            for (double e : eps)
              if (std::fabs(e - eps.front()) > kTol) {
                failure = StepFailure{"WrongEpsilon", "NExp premises must share one epsilon"};
                break;
              }
            if (failure) break;
            derived = eps.empty() ? 0.0 : eps.front();
          } else {
            derived = banach_delta(sym.pattern, eps);
          }
          if (!(concl.conclusion.left == Term::apply(step.symbol, lhs) &&
                concl.conclusion.right == Term::apply(step.symbol, rhs))) {
            failure = StepFailure{"ShapeMismatch",
                                  "conclusion must apply " + step.symbol + " to the premise sides"};
            break;
          }
          failure = detail::check_epsilon(derived, concl.conclusion.epsilon, step.weakened);
          if (!failure) failure = check_hyps(union_hyps());
          break;
        }
        case Rule::Approx: {
          failure = need_premises(1);
          if (failure) break;
          if (!step.mu_term) {
            failure = StepFailure{"ShapeMismatch", "Approx needs the focused term parameter"};
            break;
          }
          const Judgement expected = apply_approx(premise(0), *step.mu_term, sig);
          if (!(concl.conclusion.left == expected.conclusion.left &&
                concl.conclusion.right == expected.conclusion.right)) {
            failure = StepFailure{"ShapeMismatch", "Approx conclusion shape mismatch"};
            break;
          }
          failure = detail::check_epsilon(expected.conclusion.epsilon, concl.conclusion.epsilon,
                                          step.weakened);
          if (!failure) failure = check_hyps(expected.hypotheses);
          break;
        }
        case Rule::Cut: {
          if (step.premises.empty()) {
            failure = StepFailure{"BadPremise", "Cut takes at least one premise"};
            break;
          }
          bool bad = false;
          for (std::size_t p : step.premises)
            if (p >= idx) { bad = true; break; }
          if (bad) {
            failure = StepFailure{"BadPremise", "premise is not an earlier step"};
            break;
          }
          const Judgement& main = premise(0);
          if (!(concl.conclusion.left == main.conclusion.left &&
                concl.conclusion.right == main.conclusion.right)) {
            failure = StepFailure{"ShapeMismatch", "Cut must keep the main conclusion"};
            break;
          }
          failure = detail::check_epsilon(main.conclusion.epsilon, concl.conclusion.epsilon,
                                          step.weakened);
          if (failure) break;
          // every hypothesis of the main premise must be proven by a side premise
          std::vector<QuantEquation> side;
          for (std::size_t k = 1; k < step.premises.size(); ++k)
            side.push_back(premise(k).conclusion);
          for (const QuantEquation& h : main.hypotheses) {
            bool proven = false;
            for (const QuantEquation& s : side)
              if (same_equation(s, h)) { proven = true; break; }
            if (!proven) {
              failure = StepFailure{"BadPremise", "hypothesis of the main premise not discharged"};
              break;
            }
          }
          if (failure) break;
          std::vector<QuantEquation> needed;
          for (std::size_t k = 1; k < step.premises.size(); ++k)
            for (const QuantEquation& h : premise(k).hypotheses) needed.push_back(h);
          failure = check_hyps(needed);
          break;
        }
        case Rule::Subst: {
          failure = need_premises(1);
          if (failure) break;
          const Judgement& p = premise(0);
          const auto apply_subst = [&](const QuantEquation& e) {
            return QuantEquation{substitute_map(e.left, step.substitution),
                                 substitute_map(e.right, step.substitution), e.epsilon};
          };
          const QuantEquation expected = apply_subst(p.conclusion);
          if (!(concl.conclusion.left == expected.left &&
                concl.conclusion.right == expected.right)) {
            failure = StepFailure{"ShapeMismatch", "Subst conclusion is not the premise image"};
            break;
          }
          failure = detail::check_epsilon(expected.epsilon, concl.conclusion.epsilon,
                                          step.weakened);
          if (failure) break;
          std::vector<QuantEquation> required;
          for (const QuantEquation& h : p.hypotheses) required.push_back(apply_subst(h));
          failure = check_hyps(required);
          break;
        }
      }
    } catch (const Error& e) {
      failure = StepFailure{errc_name(e.code()), e.what()};
    }
    if (failure) return fail_step(*failure);
  }
  return CheckResult::ok();
}

}  // namespace qfix
