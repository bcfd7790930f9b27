#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qfix/deduction.hpp"
#include "qfix/errors.hpp"
#include "qfix/fixpoint.hpp"
#include "qfix/mdp.hpp"
#include "qfix/metric_models.hpp"
#include "qfix/pattern.hpp"
#include "qfix/term.hpp"

namespace qfix {

using json = nlohmann::json;

// 12 significant digits, the output contract of the CLI.
inline std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::FileNotFound, path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(Errc::SchemaViolation, path + ": " + e.what());
  }
}

namespace jio {

inline const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) fail(Errc::SchemaViolation, path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(Errc::SchemaViolation, path + "." + key + ": missing");
  return *it;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(Errc::SchemaViolation, path + ": expected a number");
  return j.get<double>();
}

inline std::size_t natural(const json& j, const std::string& path) {
  if (!j.is_number_unsigned()) fail(Errc::SchemaViolation, path + ": expected a natural number");
  return j.get<std::size_t>();
}

inline std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) fail(Errc::SchemaViolation, path + ": expected a string");
  return j.get<std::string>();
}

inline const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) fail(Errc::SchemaViolation, path + ": expected an array");
  return j;
}

inline std::vector<double> number_list(const json& j, const std::string& path) {
  array(j, path);
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t k = 0; k < j.size(); ++k)
    out.push_back(number(j[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

inline std::vector<std::vector<double>> number_table(const json& j, const std::string& path) {
  array(j, path);
  std::vector<std::vector<double>> out;
  out.reserve(j.size());
  for (std::size_t k = 0; k < j.size(); ++k)
    out.push_back(number_list(j[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

}  // namespace jio

// ----- patterns and signatures -------------------------------------------------

inline Pattern pattern_from_json(const json& j, const std::string& path = "pattern") {
  const std::size_t arity = jio::natural(jio::field(j, "arity", path), path + ".arity");
  const json& tuples = jio::array(jio::field(j, "tuples", path), path + ".tuples");
  std::vector<WeightTuple> ts;
  for (std::size_t k = 0; k < tuples.size(); ++k) {
    std::vector<double> w =
        jio::number_list(tuples[k], path + ".tuples[" + std::to_string(k) + "]");
    try {
      ts.emplace_back(std::move(w));
    } catch (const Error& e) {
      fail(Errc::SchemaViolation, path + ".tuples[" + std::to_string(k) + "]: " + e.what());
    }
  }
  return make_pattern(std::move(ts), arity);
}

inline json pattern_to_json(const Pattern& p) {
  json tuples = json::array();
  for (const WeightTuple& t : p.tuples()) {
    json row = json::array();
    for (double w : t.weights()) row.push_back(w);
    tuples.push_back(std::move(row));
  }
  return json{{"arity", p.arity()}, {"tuples", std::move(tuples)}};
}

inline std::string pattern_to_text(const Pattern& p) {
  std::string out = "{\"arity\": " + std::to_string(p.arity()) + ", \"tuples\": [";
  for (std::size_t i = 0; i < p.tuples().size(); ++i) {
    if (i) out += ", ";
    out += "[";
    const auto w = p.tuples()[i].weights();
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (k) out += ", ";
      out += format_number(w[k]);
    }
    out += "]";
  }
  return out + "]}";
}

inline Signature signature_from_json(const json& j, const std::string& path = "signature") {
  Signature sig;
  const json& symbols = jio::array(jio::field(j, "symbols", path), path + ".symbols");
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    const std::string p = path + ".symbols[" + std::to_string(k) + "]";
    const std::string name = jio::text(jio::field(symbols[k], "name", p), p + ".name");
    const std::size_t arity = jio::natural(jio::field(symbols[k], "arity", p), p + ".arity");
    Pattern pat = pattern_from_json(jio::field(symbols[k], "pattern", p), p + ".pattern");
    try {
      sig.add(make_symbol(name, arity, std::move(pat)));
    } catch (const Error& e) {
      fail(Errc::SchemaViolation, p + ": " + e.what());
    }
  }
  return sig;
}

inline json signature_to_json(const Signature& sig) {
  json symbols = json::array();
  for (const FunctionSymbol& s : sig.symbols())
    symbols.push_back(json{{"name", s.name}, {"arity", s.arity}, {"pattern", pattern_to_json(s.pattern)}});
  return json{{"symbols", std::move(symbols)}};
}

// ----- judgements and derivations ------------------------------------------------

inline QuantEquation equation_from_json(const json& j, const Signature& sig,
                                        const std::string& path) {
  Term left = parse_term(jio::text(jio::field(j, "left", path), path + ".left"), sig);
  Term right = parse_term(jio::text(jio::field(j, "right", path), path + ".right"), sig);
  const double eps = jio::number(jio::field(j, "eps", path), path + ".eps");
  if (eps < 0.0) fail(Errc::SchemaViolation, path + ".eps: negative");
  return QuantEquation{std::move(left), std::move(right), eps};
}

inline json equation_to_json(const QuantEquation& e) {
  return json{{"left", to_string(e.left)}, {"right", to_string(e.right)}, {"eps", e.epsilon}};
}

inline Judgement judgement_from_json(const json& j, const Signature& sig,
                                     const std::string& path) {
  Judgement out{{}, equation_from_json(jio::field(j, "conclusion", path), sig,
                                       path + ".conclusion")};
  if (j.contains("hypotheses")) {
    const json& hyps = jio::array(j["hypotheses"], path + ".hypotheses");
    for (std::size_t k = 0; k < hyps.size(); ++k)
      out.hypotheses.push_back(
          equation_from_json(hyps[k], sig, path + ".hypotheses[" + std::to_string(k) + "]"));
  }
  return out;
}

inline json judgement_to_json(const Judgement& j) {
  json hyps = json::array();
  for (const QuantEquation& h : j.hypotheses) hyps.push_back(equation_to_json(h));
  return json{{"hypotheses", std::move(hyps)}, {"conclusion", equation_to_json(j.conclusion)}};
}

// The derivation document embeds its signature:
// {"signature": {...}, "axioms": [...], "steps": [...]}
struct DerivationDocument {
  Signature signature;
  Derivation derivation;
};

inline DerivationDocument derivation_from_json(const json& j, const std::string& path = "") {
  DerivationDocument doc;
  doc.signature = signature_from_json(jio::field(j, "signature", path.empty() ? "(root)" : path),
                                      path + "signature");
  const Signature& sig = doc.signature;
  if (j.contains("axioms")) {
    const json& axioms = jio::array(j["axioms"], path + "axioms");
    for (std::size_t k = 0; k < axioms.size(); ++k)
      doc.derivation.axioms.push_back(
          judgement_from_json(axioms[k], sig, path + "axioms[" + std::to_string(k) + "]"));
  }
  const json& steps = jio::array(jio::field(j, "steps", "(root)"), path + "steps");
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const std::string p = path + "steps[" + std::to_string(k) + "]";
    const json& sj = steps[k];
    DerivationStep step;
    const std::string rname = jio::text(jio::field(sj, "rule", p), p + ".rule");
    auto rule = rule_from_name(rname);
    if (!rule) fail(Errc::SchemaViolation, p + ".rule: unknown rule " + rname);
    step.rule = *rule;
    if (sj.contains("premises")) {
      const json& prem = jio::array(sj["premises"], p + ".premises");
      for (std::size_t i = 0; i < prem.size(); ++i)
        step.premises.push_back(
            jio::natural(prem[i], p + ".premises[" + std::to_string(i) + "]"));
    }
    step.conclusion = judgement_from_json(jio::field(sj, "conclusion", p), sig, p + ".conclusion");
    if (sj.contains("weakened")) {
      if (!sj["weakened"].is_boolean()) fail(Errc::SchemaViolation, p + ".weakened: expected bool");
      step.weakened = sj["weakened"].get<bool>();
    }
    if (sj.contains("params")) {
      const json& params = sj["params"];
      if (params.contains("symbol"))
        step.symbol = jio::text(params["symbol"], p + ".params.symbol");
      if (params.contains("term")) {
        Term t = parse_term(jio::text(params["term"], p + ".params.term"), sig);
        const std::size_t focus =
            jio::natural(jio::field(params, "focus", p + ".params"), p + ".params.focus");
        step.mu_term = make_focused(std::move(t), focus);
      }
      if (params.contains("map")) {
        const json& m = params["map"];
        if (!m.is_object()) fail(Errc::SchemaViolation, p + ".params.map: expected object");
        for (auto it = m.begin(); it != m.end(); ++it) {
          std::size_t slot = 0;
          try {
            slot = std::stoul(it.key());
          } catch (...) {
            fail(Errc::SchemaViolation, p + ".params.map: slot key " + it.key());
          }
          step.substitution.emplace(slot,
                                    parse_term(jio::text(*it, p + ".params.map"), sig));
        }
      }
    }
    doc.derivation.steps.push_back(std::move(step));
  }
  return doc;
}

// ----- metric spaces and models ---------------------------------------------------

inline MetricSpace space_from_json(const json& j, const std::string& path = "space") {
  const json& pts = jio::array(jio::field(j, "points", path), path + ".points");
  std::vector<std::string> points;
  for (std::size_t k = 0; k < pts.size(); ++k)
    points.push_back(jio::text(pts[k], path + ".points[" + std::to_string(k) + "]"));
  auto dist = jio::number_table(jio::field(j, "distance", path), path + ".distance");
  try {
    return make_metric_space(std::move(points), std::move(dist));
  } catch (const Error& e) {
    if (e.code() == Errc::GroundNotMetric) throw;
    fail(Errc::SchemaViolation, path + ": " + e.what());
  }
}

using ModelVariant = std::variant<VectorModel, DistributionModel, PointSetModel>;

namespace detail {

struct AffineSpec {
  std::vector<std::vector<std::vector<double>>> mats;
  std::vector<double> offset;
};

// Accepts {"matrices": [...], "offset": [...]} or the shorthand pair
// [matrices, offset].
inline AffineSpec affine_from_json(const json& j, const std::string& path) {
  AffineSpec spec;
  const json* mats = nullptr;
  const json* offset = nullptr;
  if (j.is_array()) {
    if (j.size() != 2) fail(Errc::SchemaViolation, path + ": expected [matrices, offset]");
    mats = &j[0];
    offset = &j[1];
  } else {
    mats = &jio::field(j, "matrices", path);
    offset = &jio::field(j, "offset", path);
  }
  jio::array(*mats, path + ".matrices");
  for (std::size_t k = 0; k < mats->size(); ++k)
    spec.mats.push_back(
        jio::number_table((*mats)[k], path + ".matrices[" + std::to_string(k) + "]"));
  spec.offset = jio::number_list(*offset, path + ".offset");
  return spec;
}

// Interpretation ids: "barycentric:<eps>", "union", "affine:<json>" or the
// equivalent structured object.
inline void bind_symbol(ModelVariant& model, const std::string& name, const json& spec,
                        const std::string& path) {
  std::string id;
  json payload;
  if (spec.is_string()) {
    id = spec.get<std::string>();
    const auto colon = id.find(':');
    if (colon != std::string::npos) {
      const std::string tail = id.substr(colon + 1);
      id = id.substr(0, colon);
      if (id == "barycentric") {
        try {
          payload = json{{"eps", std::stod(tail)}};
        } catch (...) {
          fail(Errc::SchemaViolation, path + ": barycentric parameter " + tail);
        }
      } else if (id == "affine") {
        try {
          payload = json::parse(tail);
        } catch (const json::parse_error& e) {
          fail(Errc::SchemaViolation, path + ": affine payload: " + e.what());
        }
      }
    }
  } else if (spec.is_object()) {
    id = jio::text(jio::field(spec, "kind", path), path + ".kind");
    payload = spec;
  } else {
    fail(Errc::SchemaViolation, path + ": expected a string or object binding");
  }

  if (id == "barycentric") {
    const double eps = jio::number(jio::field(payload, "eps", path), path + ".eps");
    if (auto* vm = std::get_if<VectorModel>(&model)) vm->bind_barycentric(name, eps);
    else if (auto* dm = std::get_if<DistributionModel>(&model)) dm->bind_barycentric(name, eps);
    else fail(Errc::SchemaViolation, path + ": barycentric needs a vector or distribution model");
  } else if (id == "union") {
    if (auto* pm = std::get_if<PointSetModel>(&model)) pm->bind_union(name);
    else fail(Errc::SchemaViolation, path + ": union needs a pointset model");
  } else if (id == "affine") {
    AffineSpec spec2 = affine_from_json(payload, path);
    if (auto* vm = std::get_if<VectorModel>(&model))
      vm->bind_affine(name, std::move(spec2.mats), std::move(spec2.offset));
    else fail(Errc::SchemaViolation, path + ": affine needs a vector model");
  } else {
    fail(Errc::SchemaViolation, path + ": unknown interpretation id " + id);
  }
}

}  // namespace detail

inline ModelVariant model_from_json(const json& j, const std::string& path = "model") {
  const std::string type = jio::text(jio::field(j, "type", path), path + ".type");
  std::optional<ModelVariant> model;
  if (type == "vector") {
    model.emplace(VectorModel(jio::natural(jio::field(j, "dim", path), path + ".dim")));
  } else if (type == "distribution") {
    model.emplace(DistributionModel(space_from_json(jio::field(j, "space", path), path + ".space")));
  } else if (type == "pointset") {
    model.emplace(PointSetModel(space_from_json(jio::field(j, "space", path), path + ".space")));
  } else {
    fail(Errc::SchemaViolation, path + ".type: unknown model type " + type);
  }
  if (j.contains("bind")) {
    const json& bind = j["bind"];
    if (!bind.is_object()) fail(Errc::SchemaViolation, path + ".bind: expected object");
    for (auto it = bind.begin(); it != bind.end(); ++it)
      detail::bind_symbol(*model, it.key(), *it, path + ".bind." + it.key());
  }
  return std::move(*model);
}

inline const Signature& model_signature(const ModelVariant& model) {
  return std::visit([](const auto& m) -> const Signature& { return m.signature(); }, model);
}

// Elements: vector models take plain arrays, distributions {"masses": [...]},
// point sets {"points": [indices...]}.
inline std::vector<double> vector_element_from_json(const json& j, const VectorModel& m,
                                                    const std::string& path) {
  auto v = jio::number_list(j, path);
  if (v.size() != m.dim()) fail(Errc::SchemaViolation, path + ": expected dim " +
                                                            std::to_string(m.dim()));
  for (double x : v)
    if (x < -kTol || x > 1.0 + kTol) fail(Errc::SchemaViolation, path + ": entry outside [0,1]");
  return v;
}

inline FiniteDistribution distribution_element_from_json(const json& j,
                                                         const DistributionModel& m,
                                                         const std::string& path) {
  auto masses = jio::number_list(jio::field(j, "masses", path), path + ".masses");
  if (masses.size() != m.ground().size())
    fail(Errc::SchemaViolation, path + ".masses: expected " + std::to_string(m.ground().size()));
  try {
    return make_distribution(std::move(masses));
  } catch (const Error& e) {
    fail(Errc::SchemaViolation, path + ": " + e.what());
  }
}

inline FinitePointSet pointset_element_from_json(const json& j, const PointSetModel& m,
                                                 const std::string& path) {
  const json& pts = jio::array(jio::field(j, "points", path), path + ".points");
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const std::string p = path + ".points[" + std::to_string(k) + "]";
    if (pts[k].is_string()) {
      const std::string name = pts[k].get<std::string>();
      bool found = false;
      for (std::size_t i = 0; i < m.ground().size(); ++i)
        if (m.ground().points[i] == name) {
          idx.push_back(i);
          found = true;
          break;
        }
      if (!found) fail(Errc::SchemaViolation, p + ": unknown point " + name);
    } else {
      idx.push_back(jio::natural(pts[k], p));
    }
  }
  try {
    return make_point_set(std::move(idx), m.ground().size());
  } catch (const Error& e) {
    fail(Errc::SchemaViolation, path + ": " + e.what());
  }
}

// uniform name for generic code over the model variant
inline std::vector<double> model_element_from_json(const json& j, const VectorModel& m,
                                                   const std::string& path) {
  return vector_element_from_json(j, m, path);
}

inline FiniteDistribution model_element_from_json(const json& j, const DistributionModel& m,
                                                  const std::string& path) {
  return distribution_element_from_json(j, m, path);
}

inline FinitePointSet model_element_from_json(const json& j, const PointSetModel& m,
                                              const std::string& path) {
  return pointset_element_from_json(j, m, path);
}

inline std::string vector_element_to_text(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) out += ", ";
    out += format_number(v[k]);
  }
  return out + "]";
}

inline std::string element_to_text(const std::vector<double>& v) {
  return vector_element_to_text(v);
}

inline std::string element_to_text(const FiniteDistribution& d) {
  return "{\"masses\": " + vector_element_to_text(d.masses) + "}";
}

inline std::string element_to_text(const FinitePointSet& s) {
  std::string out = "{\"points\": [";
  for (std::size_t k = 0; k < s.indices.size(); ++k) {
    if (k) out += ", ";
    out += std::to_string(s.indices[k]);
  }
  return out + "]}";
}

// ----- MDPs -----------------------------------------------------------------------

inline DiscountedSetup setup_from_json(const json& j, const std::string& path = "mdp") {
  const json& st = jio::array(jio::field(j, "states", path), path + ".states");
  std::vector<std::string> states;
  for (std::size_t k = 0; k < st.size(); ++k)
    states.push_back(jio::text(st[k], path + ".states[" + std::to_string(k) + "]"));
  const json& ac = jio::array(jio::field(j, "actions", path), path + ".actions");
  std::vector<std::string> actions;
  for (std::size_t k = 0; k < ac.size(); ++k)
    actions.push_back(jio::text(ac[k], path + ".actions[" + std::to_string(k) + "]"));
  const double gamma = jio::number(jio::field(j, "gamma", path), path + ".gamma");

  const json& tj = jio::field(j, "transitions", path);
  const json& rj = jio::field(j, "rewards", path);
  std::vector<std::vector<std::vector<double>>> transitions;
  std::vector<std::vector<double>> rewards;
  for (const std::string& a : actions) {
    const std::string tp = path + ".transitions." + a;
    if (!tj.contains(a)) fail(Errc::SchemaViolation, tp + ": missing");
    auto rows = jio::number_table(tj[a], tp);
    for (std::size_t s = 0; s < rows.size(); ++s) {
      double sum = 0.0;
      for (double p : rows[s]) sum += p;
      if (std::fabs(sum - 1.0) > kTol)
        fail(Errc::SchemaViolation, tp + "[" + std::to_string(s) + "]: row sums to " +
                                        format_number(sum));
    }
    transitions.push_back(std::move(rows));
    const std::string rp = path + ".rewards." + a;
    if (!rj.contains(a)) fail(Errc::SchemaViolation, rp + ": missing");
    auto rv = jio::number_list(rj[a], rp);
    for (std::size_t s = 0; s < rv.size(); ++s)
      if (rv[s] < -kTol || rv[s] > 1.0 + kTol)
        fail(Errc::SchemaViolation,
             rp + "[" + std::to_string(s) + "]: reward outside [0,1]");
    rewards.push_back(std::move(rv));
  }
  MDP mdp = make_mdp(std::move(states), std::move(actions), std::move(transitions),
                     std::move(rewards));
  return make_setup(std::move(mdp), gamma);
}

inline Policy policy_from_json(const json& j, const MDP& mdp, const std::string& path = "policy") {
  if (!j.is_object()) fail(Errc::SchemaViolation, path + ": expected an object");
  std::vector<std::vector<double>> rows(mdp.n_states(),
                                        std::vector<double>(mdp.n_actions(), 0.0));
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    const std::string& state = mdp.states[s];
    if (!j.contains(state)) fail(Errc::SchemaViolation, path + "." + state + ": missing");
    const json& row = j[state];
    if (!row.is_object()) fail(Errc::SchemaViolation, path + "." + state + ": expected an object");
    for (auto it = row.begin(); it != row.end(); ++it) {
      bool found = false;
      for (std::size_t a = 0; a < mdp.n_actions(); ++a)
        if (mdp.actions[a] == it.key()) {
          rows[s][a] = jio::number(*it, path + "." + state + "." + it.key());
          found = true;
          break;
        }
      if (!found)
        fail(Errc::SchemaViolation, path + "." + state + ": unknown action " + it.key());
    }
  }
  try {
    return make_policy(std::move(rows), mdp.n_actions());
  } catch (const Error& e) {
    fail(Errc::SchemaViolation, path + ": " + e.what());
  }
}

inline PolicyTree policy_tree_from_json(const json& j, const MDP& mdp,
                                        const std::string& path = "policy") {
  if (j.contains("leaf"))
    return PolicyTree::leaf(policy_from_json(j["leaf"], mdp, path + ".leaf"));
  if (j.contains("mix")) {
    const json& m = j["mix"];
    const double eps = jio::number(jio::field(m, "eps", path + ".mix"), path + ".mix.eps");
    return PolicyTree::mix(eps, policy_tree_from_json(jio::field(m, "left", path + ".mix"), mdp,
                                                      path + ".mix.left"),
                           policy_tree_from_json(jio::field(m, "right", path + ".mix"), mdp,
                                                 path + ".mix.right"));
  }
  // plain policy object doubles as a leaf
  return PolicyTree::leaf(policy_from_json(j, mdp, path));
}

// ----- law specs -------------------------------------------------------------------

struct LawDocument {
  ModelVariant model;
  LawSpec spec;
};

inline LawDocument law_from_json(const json& j, Law law, const std::string& path = "") {
  LawDocument doc{model_from_json(jio::field(j, "model", "(root)"), path + "model"), {}};
  const Signature& sig = model_signature(doc.model);
  doc.spec.law = law;
  switch (law) {
    case Law::Dinaturality: {
      const json& fj = jio::field(j, "f", "(root)");
      const json& gj = jio::field(j, "g", "(root)");
      doc.spec.f = make_focused(
          parse_term(jio::text(jio::field(fj, "term", "f"), "f.term"), sig),
          fj.contains("focus") ? jio::natural(fj["focus"], "f.focus") : 1);
      doc.spec.g = make_focused(
          parse_term(jio::text(jio::field(gj, "term", "g"), "g.term"), sig),
          gj.contains("focus") ? jio::natural(gj["focus"], "g.focus") : 1);
      break;
    }
    case Law::Diagonal: {
      const json& fj = jio::field(j, "f", "(root)");
      doc.spec.diag = parse_term(jio::text(jio::field(fj, "term", "f"), "f.term"), sig);
      break;
    }
    case Law::Amalgamation: {
      const json& fam = jio::array(jio::field(j, "family", "(root)"), "family");
      for (std::size_t k = 0; k < fam.size(); ++k)
        doc.spec.family.push_back(
            parse_term(jio::text(fam[k], "family[" + std::to_string(k) + "]"), sig));
      doc.spec.g_map = parse_term(jio::text(jio::field(j, "g", "(root)"), "g"), sig);
      break;
    }
  }
  return doc;
}

}  // namespace qfix
