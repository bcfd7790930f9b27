// qfix: pattern calculus, derivation checking, certified fixed points and
// MDP policy evaluation from the command line.
//
// Exit codes: 0 success or pass, 1 rejection or failed check, 2 input error.

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "qfix/qfix.hpp"

namespace {

using namespace qfix;

constexpr int kOk = 0;
constexpr int kRejected = 1;
constexpr int kInputError = 2;

int classify(const Error& e) {
  switch (e.code()) {
    case Errc::NotContractive:
    case Errc::PreconditionViolated:
      return kRejected;
    default:
      return kInputError;
  }
}

std::string format_sci(double x) { return format_number(x); }

// ---- pattern ----------------------------------------------------------------

struct PatternArgs {
  std::string op;
  std::string in;
  std::vector<std::string> inner;
  std::string weights;
  std::size_t slot = 1;
  std::size_t i = 1, j = 2;
  double factor = 1.0;
  bool prune = false;
};

int run_pattern(const PatternArgs& args) {
  const Pattern p = pattern_from_json(load_json_file(args.in), args.in);
  std::optional<Pattern> out;
  if (args.op == "validate") {
    out = p;
  } else if (args.op == "mu") {
    out = mu_pattern(p, args.slot);
  } else if (args.op == "scale") {
    out = scalar_mul(args.factor, p);
  } else if (args.op == "contract") {
    out = contract(p, args.i, args.j);
  } else if (args.op == "compose") {
    std::vector<Pattern> inner;
    for (const std::string& path : args.inner)
      inner.push_back(pattern_from_json(load_json_file(path), path));
    out = compose(p, inner);
  } else if (args.op == "sum") {
    std::vector<double> w;
    std::stringstream ss(args.weights);
    for (std::string tok; std::getline(ss, tok, ',');) w.push_back(std::stod(tok));
    std::vector<Pattern> inner{p};
    for (const std::string& path : args.inner)
      inner.push_back(pattern_from_json(load_json_file(path), path));
    out = subconvex_sum(WeightTuple(std::move(w)), inner);
  } else if (args.op == "modulus") {
    std::cout << format_sci(contraction_modulus(p, args.slot)) << "\n";
    return kOk;
  } else {
    std::cerr << "unknown pattern operation " << args.op << "\n";
    return kInputError;
  }
  if (args.prune) out = prune_dominated(*out);
  std::cout << pattern_to_text(*out) << "\n";
  return kOk;
}

// ---- analyze ----------------------------------------------------------------

int run_analyze(const std::string& sig_path, const std::string& term_text,
                const std::string& model_path, std::size_t trials, std::uint64_t seed) {
  Signature sig;
  std::optional<ModelVariant> model;
  if (!model_path.empty()) {
    model = model_from_json(load_json_file(model_path), model_path);
    sig = model_signature(*model);
  } else {
    sig = signature_from_json(load_json_file(sig_path), sig_path);
  }

  if (!term_text.empty()) {
    Term t = parse_term(term_text, sig);
    const Pattern theta = infer_pattern(t, sig);
    std::cout << "arity=" << std::max<std::size_t>(t.arity(), theta.arity()) << "\n";
    std::cout << "pattern=" << pattern_to_text(theta) << "\n";
    for (std::size_t k = 1; k <= theta.arity(); ++k) {
      const double a = contraction_modulus(theta, k);
      std::cout << "slot=" << k << " modulus=" << format_sci(a)
                << (a < 1.0 - kTol ? " contractive" : " not-contractive") << "\n";
    }
  }

  if (model) {
    std::cout << "# sampling: mt19937_64 master seed " << seed
              << ", one derived sub-seed per trial, trials=" << trials << "\n";
    bool all_pass = true;
    std::visit(
        [&](const auto& m) {
          for (const FunctionSymbol& sym : m.signature().symbols()) {
            const ComplianceReport r = check_pattern_compliance(m, sym, trials, seed);
            all_pass = all_pass && r.pass;
            std::cout << "symbol=" << sym.name << " trials=" << r.trials
                      << " max_slack=" << format_sci(r.max_slack)
                      << " verdict=" << (r.pass ? "PASS" : "FAIL") << "\n";
          }
        },
        *model);
    return all_pass ? kOk : kRejected;
  }
  return kOk;
}

// ---- prove ------------------------------------------------------------------

int run_prove(const std::string& path, bool as_json) {
  const DerivationDocument doc = derivation_from_json(load_json_file(path));
  const CheckResult r = check_derivation(doc.derivation, doc.signature);
  if (as_json) {
    std::cout << "{\"accepted\": " << (r.accepted ? "true" : "false");
    if (!r.accepted)
      std::cout << ", \"step\": " << r.failed_step << ", \"reason\": \"" << r.code << "\"";
    std::cout << "}\n";
  } else if (r.accepted) {
    std::cout << "ACCEPTED\n";
  } else {
    std::cout << "REJECTED step=" << r.failed_step << " reason=" << r.code << " detail="
              << r.reason << "\n";
  }
  return r.accepted ? kOk : kRejected;
}

// ---- solve ------------------------------------------------------------------

template <class Model>
int solve_with(const Model& model, const json& term_doc, const std::string& term_path,
               double eps, const std::string& seed_path) {
  const Signature& sig = model.signature();
  Term t = parse_term(jio::text(jio::field(term_doc, "term", term_path), term_path + ".term"),
                      sig);
  FocusedTerm focused = term_doc.contains("focus")
                            ? make_focused(t, jio::natural(term_doc["focus"], term_path + ".focus"))
                            : open_mu(t);

  std::vector<typename Model::element_type> env;
  const std::size_t ctx = std::max(focused.term.arity(), focused.focus);
  env.assign(ctx, model.origin());
  if (term_doc.contains("environment")) {
    const json& e = term_doc["environment"];
    if (!e.is_object())
      fail(Errc::SchemaViolation, term_path + ".environment: expected an object");
    for (auto it = e.begin(); it != e.end(); ++it) {
      std::size_t slot = 0;
      try {
        slot = std::stoul(it.key());
      } catch (...) {
        fail(Errc::SchemaViolation, term_path + ".environment: slot key " + it.key());
      }
      if (slot < 1 || slot > ctx)
        fail(Errc::SchemaViolation, term_path + ".environment: slot " + it.key() +
                                        " outside 1.." + std::to_string(ctx));
      env[slot - 1] =
          model_element_from_json(*it, model, term_path + ".environment." + it.key());
    }
  }

  std::optional<typename Model::element_type> seed;
  if (!seed_path.empty())
    seed = model_element_from_json(load_json_file(seed_path), model, seed_path);

  const auto cert = solve_mu(model, focused, std::move(env), eps, std::move(seed));
  std::cout << "{\"value\": " << element_to_text(cert.value)
            << ", \"iterations\": " << cert.iterations
            << ", \"a_priori\": " << format_sci(cert.a_priori_bound)
            << ", \"a_posteriori\": " << format_sci(cert.a_posteriori_bound)
            << ", \"modulus\": " << format_sci(cert.modulus) << "}\n";
  return kOk;
}

int run_solve(const std::string& model_path, const std::string& term_path, double eps,
              const std::string& seed_path) {
  ModelVariant model = model_from_json(load_json_file(model_path), model_path);
  const json term_doc = load_json_file(term_path);
  return std::visit(
      [&](const auto& m) { return solve_with(m, term_doc, term_path, eps, seed_path); }, model);
}

// ---- laws -------------------------------------------------------------------

int run_laws(const std::string& law_name, const std::string& spec_path, double eps,
             std::uint64_t seed, bool as_json) {
  Law law;
  if (law_name == "dinaturality") law = Law::Dinaturality;
  else if (law_name == "diagonal") law = Law::Diagonal;
  else if (law_name == "amalgamation") law = Law::Amalgamation;
  else {
    std::cerr << "unknown law " << law_name << "\n";
    return kInputError;
  }
  const LawDocument doc = law_from_json(load_json_file(spec_path), law);
  const LawReport r = std::visit(
      [&](const auto& model) { return verify_law(model, doc.spec, eps, seed); }, doc.model);
  if (as_json) {
    std::cout << "{\"law\": \"" << law_name << "\", \"discrepancy\": "
              << format_sci(r.discrepancy) << ", \"eps\": " << format_sci(r.epsilon)
              << ", \"pass\": " << (r.pass ? "true" : "false") << "}\n";
  } else {
    std::cout << "law=" << law_name << " discrepancy=" << format_sci(r.discrepancy)
              << " eps=" << format_sci(r.epsilon) << " verdict=" << (r.pass ? "PASS" : "FAIL")
              << "\n";
  }
  return r.pass ? kOk : kRejected;
}

// ---- mdp --------------------------------------------------------------------

int run_mdp_eval(const std::string& mdp_path, const std::string& policy_path, double eps) {
  const DiscountedSetup setup = setup_from_json(load_json_file(mdp_path), mdp_path);
  const PolicyTree tree =
      policy_tree_from_json(load_json_file(policy_path), setup.mdp, policy_path);
  const auto cert = policy_value(setup, tree, eps);
  std::cout << "{\"value\": " << vector_element_to_text(cert.value)
            << ", \"iterations\": " << cert.iterations
            << ", \"a_priori\": " << format_sci(cert.a_priori_bound)
            << ", \"a_posteriori\": " << format_sci(cert.a_posteriori_bound)
            << ", \"modulus\": " << format_sci(cert.modulus) << "}\n";
  return kOk;
}

int run_mdp_axioms(const std::string& mdp_path, std::size_t trials, std::uint64_t seed,
                   bool as_json) {
  const DiscountedSetup setup = setup_from_json(load_json_file(mdp_path), mdp_path);
  const RbaReport report = check_rba_axioms(setup, trials, seed);
  if (as_json) {
    std::cout << "{\"axioms\": [";
    for (std::size_t k = 0; k < report.axioms.size(); ++k) {
      const AxiomResult& ax = report.axioms[k];
      if (k) std::cout << ", ";
      std::cout << "{\"name\": \"" << ax.name << "\", \"max_violation\": "
                << format_sci(ax.max_violation) << ", \"pass\": " << (ax.pass ? "true" : "false")
                << "}";
    }
    std::cout << "], \"pass\": " << (report.pass ? "true" : "false") << "}\n";
  } else {
    std::cout << "# sampling: mt19937_64 master seed " << seed
              << ", one derived sub-seed per trial; value functions coordinatewise uniform, "
                 "policies normalized uniform, trials="
              << trials << "\n";
    for (const AxiomResult& ax : report.axioms)
      std::cout << "axiom=" << ax.name << " max_violation=" << format_sci(ax.max_violation)
                << " threshold=" << format_sci(ax.threshold)
                << " verdict=" << (ax.pass ? "PASS" : "FAIL") << "\n";
    std::cout << "verdict=" << (report.pass ? "PASS" : "FAIL") << "\n";
  }
  return report.pass ? kOk : kRejected;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantitative fixed points: patterns, proofs, certified solvers"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  double eps = 1e-6;
  bool as_json = false;
  app.add_option("--seed", seed, "master seed for randomized checks");
  app.add_option("--eps", eps, "default accuracy / pass threshold");
  app.add_flag("--json", as_json, "machine-readable output");

  PatternArgs pargs;
  CLI::App* pattern = app.add_subcommand("pattern", "pattern calculus operations");
  pattern->add_option("op", pargs.op, "one of validate|mu|scale|contract|compose|sum|modulus")
      ->required();
  pattern->add_option("--in", pargs.in, "pattern JSON file")->required();
  pattern->add_option("--inner", pargs.inner, "inner pattern files (compose, sum)");
  pattern->add_option("--weights", pargs.weights, "comma-separated weights (sum)");
  pattern->add_option("--slot", pargs.slot, "slot index (mu, modulus)");
  pattern->add_option("--i", pargs.i, "first index (contract)");
  pattern->add_option("--j", pargs.j, "second index (contract)");
  pattern->add_option("--factor", pargs.factor, "scalar (scale)");
  pattern->add_flag("--prune", pargs.prune, "drop dominated tuples from the result");

  std::string sig_path, term_text, model_path;
  std::size_t trials = 1000;
  CLI::App* analyze = app.add_subcommand("analyze", "infer the pattern of a term");
  analyze->add_option("--sig", sig_path, "signature JSON file");
  analyze->add_option("--term", term_text, "term text");
  analyze->add_option("--model", model_path, "model file; also runs compliance sampling");
  analyze->add_option("--trials", trials, "compliance trials per symbol");

  std::string prove_path;
  CLI::App* prove = app.add_subcommand("prove", "check a derivation file");
  prove->add_option("file", prove_path, "derivation JSON file")->required();

  std::string solve_model, solve_term, solve_seed;
  CLI::App* solve = app.add_subcommand("solve", "certified fixed point of a focused term");
  solve->add_option("--model", solve_model, "model JSON file")->required();
  solve->add_option("--term", solve_term, "term JSON file")->required();
  solve->add_option("--eps", eps, "target accuracy");
  solve->add_option("--seed-value", solve_seed, "starting element JSON file");

  std::string law_name, law_spec;
  CLI::App* laws = app.add_subcommand("laws", "verify a fixed-point law numerically");
  laws->add_option("--law", law_name, "dinaturality|diagonal|amalgamation")->required();
  laws->add_option("--spec", law_spec, "law spec JSON file")->required();
  laws->add_option("--eps", eps, "pass threshold");

  CLI::App* mdp = app.add_subcommand("mdp", "Markov decision process tools");
  mdp->require_subcommand(1);
  std::string mdp_path, policy_path;
  CLI::App* mdp_eval = mdp->add_subcommand("eval", "certified policy evaluation");
  mdp_eval->add_option("--mdp", mdp_path, "MDP JSON file")->required();
  mdp_eval->add_option("--policy", policy_path, "policy or policy-tree JSON file")->required();
  mdp_eval->add_option("--eps", eps, "target accuracy");
  CLI::App* mdp_axioms = mdp->add_subcommand("axioms", "randomized axiom suite");
  mdp_axioms->add_option("--mdp", mdp_path, "MDP JSON file")->required();
  mdp_axioms->add_option("--trials", trials, "trials per axiom");

  // the global flags (--seed, --eps, --json) may appear after a subcommand
  for (CLI::App* sub : {pattern, analyze, prove, solve, laws, mdp, mdp_eval, mdp_axioms})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    if (pattern->parsed()) return run_pattern(pargs);
    if (analyze->parsed()) return run_analyze(sig_path, term_text, model_path, trials, seed);
    if (prove->parsed()) return run_prove(prove_path, as_json);
    if (solve->parsed()) return run_solve(solve_model, solve_term, eps, solve_seed);
    if (laws->parsed()) return run_laws(law_name, law_spec, eps, seed, as_json);
    if (mdp->parsed()) {
      if (mdp_eval->parsed()) return run_mdp_eval(mdp_path, policy_path, eps);
      if (mdp_axioms->parsed()) return run_mdp_axioms(mdp_path, trials, seed, as_json);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
