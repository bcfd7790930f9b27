#pragma once

#include <cctype>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qfix/errors.hpp"
#include "qfix/pattern.hpp"

namespace qfix {

struct FunctionSymbol {
  std::string name;
  std::size_t arity = 0;
  Pattern pattern;
};

inline FunctionSymbol make_symbol(std::string name, std::size_t arity, Pattern pattern) {
  if (pattern.arity() != arity)
    fail(Errc::ArityMismatch, "symbol " + name + " of arity " + std::to_string(arity) +
                                  " with pattern of arity " + std::to_string(pattern.arity()));
  return FunctionSymbol{std::move(name), arity, std::move(pattern)};
}

// Pattern carried by constants: the single empty tuple.
inline Pattern constant_pattern() { return Pattern(0, {WeightTuple(std::vector<double>{})}); }

class Signature {
 public:
  Signature() = default;

  Signature(std::initializer_list<FunctionSymbol> symbols) {
    for (const FunctionSymbol& s : symbols) add(s);
  }

  void add(FunctionSymbol sym) {
    if (find(sym.name) != nullptr) fail(Errc::DuplicateSymbol, sym.name);
    if (reserved(sym.name))
      fail(Errc::PreconditionViolated,
           "symbol name " + sym.name + " is reserved by the term grammar");
    symbols_.push_back(std::move(sym));
  }

  // "mu" and variable-shaped names x<nat> cannot be symbols.
  static bool reserved(std::string_view name) {
    if (name == "mu") return true;
    if (name.size() < 2 || name[0] != 'x') return false;
    for (std::size_t k = 1; k < name.size(); ++k)
      if (name[k] < '0' || name[k] > '9') return false;
    return true;
  }

  const FunctionSymbol* find(std::string_view name) const noexcept {
    for (const FunctionSymbol& s : symbols_)
      if (s.name == name) return &s;
    return nullptr;
  }

  const FunctionSymbol& at(std::string_view name) const {
    const FunctionSymbol* s = find(name);
    if (s == nullptr) fail(Errc::UnknownSymbol, std::string(name));
    return *s;
  }

  const std::vector<FunctionSymbol>& symbols() const noexcept { return symbols_; }

 private:
  std::vector<FunctionSymbol> symbols_;
};

struct FocusedTerm;

// Term over a Banach signature. Free variable slots x1..xm keep their
// 1-based index in the term's outer context at every depth; mu-bound
// occurrences are stored as de Bruijn depths (0 = innermost binder), so
// substitution never captures and never renumbers. Each mu node remembers
// the surface index it was written with, for printing only; structural
// equality ignores it.
class Term {
 public:
  enum class Kind { Free, Bound, Apply, Mu };

  static Term variable(std::size_t slot) {
    if (slot < 1) fail(Errc::SlotOutOfRange, "variable slots start at 1");
    Term t;
    t.kind_ = Kind::Free;
    t.index_ = slot;
    t.arity_ = slot;
    return t;
  }

  static Term apply(std::string symbol, std::vector<Term> args) {
    Term t;
    t.kind_ = Kind::Apply;
    t.symbol_ = std::move(symbol);
    t.children_ = std::move(args);
    for (const Term& c : t.children_) t.arity_ = std::max(t.arity_, c.arity_);
    return t;
  }

  // Binds slot `slot` of `body`; remaining free slots above it shift down.
  static Term mu(std::size_t slot, const Term& body) {
    if (slot < 1) fail(Errc::SlotOutOfRange, "mu binder slots start at 1");
    Term t;
    t.kind_ = Kind::Mu;
    t.index_ = slot;
    t.children_.push_back(close_slot(body, slot, 0));
    t.arity_ = t.children_.front().arity_;
    return t;
  }

  Kind kind() const noexcept { return kind_; }

  // Free: outer slot index. Mu: surface binder index.
  std::size_t slot() const noexcept { return index_; }
  std::size_t bound_depth() const noexcept { return index_; }
  const std::string& symbol_name() const noexcept { return symbol_; }
  const std::vector<Term>& args() const noexcept { return children_; }
  const Term& body() const noexcept { return children_.front(); }

  // Largest free slot mentioned; the least context arity the term can be
  // read over.
  std::size_t arity() const noexcept { return arity_; }

  friend bool operator==(const Term& a, const Term& b) {
    if (a.kind_ != b.kind_) return false;
    switch (a.kind_) {
      case Kind::Free:
      case Kind::Bound:
        return a.index_ == b.index_;
      case Kind::Apply: {
        if (a.symbol_ != b.symbol_ || a.children_.size() != b.children_.size()) return false;
        for (std::size_t k = 0; k < a.children_.size(); ++k)
          if (!(a.children_[k] == b.children_[k])) return false;
        return true;
      }
      case Kind::Mu:
        return a.children_.front() == b.children_.front();
    }
    return false;
  }

 private:
  friend class TermParser;
  friend Term substitute_free(const Term&, const std::map<std::size_t, Term>&);
  friend Term splice(const Term&, std::size_t, const Term&, std::size_t);
  friend Term merge_slots(const Term&, std::size_t, std::size_t);
  friend FocusedTerm open_mu(const Term&);

  // Inverse of close_slot.
  static Term open_walk(const Term& u, std::size_t slot, std::size_t depth) {
    switch (u.kind_) {
      case Kind::Free:
        return u.index_ >= slot ? variable(u.index_ + 1) : u;
      case Kind::Bound:
        return u.index_ == depth ? variable(slot) : u;
      case Kind::Apply: {
        std::vector<Term> kids;
        kids.reserve(u.children_.size());
        for (const Term& c : u.children_) kids.push_back(open_walk(c, slot, depth));
        return apply(u.symbol_, std::move(kids));
      }
      case Kind::Mu:
        return raw_mu(u.index_, open_walk(u.children_.front(), slot, depth + 1));
    }
    fail(Errc::ShapeMismatch, "corrupt term");
  }

  static Term bound(std::size_t depth) {
    Term t;
    t.kind_ = Kind::Bound;
    t.index_ = depth;
    return t;
  }

  static Term raw_mu(std::size_t surface, Term closed_body) {
    Term t;
    t.kind_ = Kind::Mu;
    t.index_ = surface;
    t.arity_ = closed_body.arity_;
    t.children_.push_back(std::move(closed_body));
    return t;
  }

  // Turns free slot `slot` into a bound occurrence at binder distance
  // `depth`, shifting higher free slots down by one.
  static Term close_slot(const Term& t, std::size_t slot, std::size_t depth) {
    switch (t.kind_) {
      case Kind::Free:
        if (t.index_ == slot) return bound(depth);
        if (t.index_ > slot) return variable(t.index_ - 1);
        return t;
      case Kind::Bound:
        return t;
      case Kind::Apply: {
        std::vector<Term> kids;
        kids.reserve(t.children_.size());
        for (const Term& c : t.children_) kids.push_back(close_slot(c, slot, depth));
        return apply(t.symbol_, std::move(kids));
      }
      case Kind::Mu:
        return raw_mu(t.index_, close_slot(t.children_.front(), slot, depth + 1));
    }
    fail(Errc::ShapeMismatch, "corrupt term");
  }

  Kind kind_ = Kind::Free;
  std::size_t index_ = 0;
  std::string symbol_;
  std::vector<Term> children_;
  std::size_t arity_ = 0;
};

struct FocusedTerm {
  Term term;
  std::size_t focus = 1;
};

inline FocusedTerm make_focused(Term term, std::size_t focus) {
  if (focus < 1) fail(Errc::SlotOutOfRange, "focus slots start at 1");
  return FocusedTerm{std::move(term), focus};
}

// Simultaneous substitution of free slots. Bound occurrences are untouched,
// so no capture is possible and unaffected slots keep their numbering.
inline Term substitute_free(const Term& t, const std::map<std::size_t, Term>& sigma) {
  switch (t.kind()) {
    case Term::Kind::Free: {
      auto it = sigma.find(t.slot());
      return it == sigma.end() ? t : it->second;
    }
    case Term::Kind::Bound:
      return t;
    case Term::Kind::Apply: {
      std::vector<Term> kids;
      kids.reserve(t.args().size());
      for (const Term& c : t.args()) kids.push_back(substitute_free(c, sigma));
      return Term::apply(t.symbol_name(), std::move(kids));
    }
    case Term::Kind::Mu:
      return Term::raw_mu(t.slot(), substitute_free(t.body(), sigma));
  }
  fail(Errc::ShapeMismatch, "corrupt term");
}

inline Term substitute(const Term& t, std::size_t slot, const Term& s) {
  if (slot < 1) fail(Errc::SlotOutOfRange, "substitution slots start at 1");
  return substitute_free(t, {{slot, s}});
}

inline Term substitute_map(const Term& t, const std::map<std::size_t, Term>& sigma) {
  for (const auto& [slot, _] : sigma)
    if (slot < 1) fail(Errc::SlotOutOfRange, "substitution slots start at 1");
  return substitute_free(t, sigma);
}

// Splicing substitution: replaces slot `slot` of t by s, inserting s's
// context in place of the slot. Slots of t above `slot` shift up by
// s_arity-1; slot k of s lands at slot+k-1. Result context arity is
// arity(t)+s_arity-1 when slot is used.
inline Term splice(const Term& t, std::size_t slot, const Term& s, std::size_t s_arity) {
  if (slot < 1) fail(Errc::SlotOutOfRange, "splice slots start at 1");
  switch (t.kind()) {
    case Term::Kind::Free: {
      if (t.slot() == slot) {
        std::map<std::size_t, Term> shift;
        for (std::size_t k = 1; k <= s.arity(); ++k)
          shift.emplace(k, Term::variable(slot + k - 1));
        return substitute_free(s, shift);
      }
      if (t.slot() > slot) return Term::variable(t.slot() + s_arity - 1);
      return t;
    }
    case Term::Kind::Bound:
      return t;
    case Term::Kind::Apply: {
      std::vector<Term> kids;
      kids.reserve(t.args().size());
      for (const Term& c : t.args()) kids.push_back(splice(c, slot, s, s_arity));
      return Term::apply(t.symbol_name(), std::move(kids));
    }
    case Term::Kind::Mu:
      return Term::raw_mu(t.slot(), splice(t.body(), slot, s, s_arity));
  }
  fail(Errc::ShapeMismatch, "corrupt term");
}

inline Term splice(const Term& t, std::size_t slot, const Term& s) {
  return splice(t, slot, s, std::max<std::size_t>(s.arity(), 1));
}

// Identifies slot j with slot i (i < j) and drops position j, as in
// f(x..)[x_i/x_j]. Slots above j shift down.
inline Term merge_slots(const Term& t, std::size_t i, std::size_t j) {
  if (i < 1 || j < 1) fail(Errc::SlotOutOfRange, "slots start at 1");
  if (i >= j) fail(Errc::IndicesNotOrdered, "merge needs i < j");
  switch (t.kind()) {
    case Term::Kind::Free:
      if (t.slot() == j) return Term::variable(i);
      if (t.slot() > j) return Term::variable(t.slot() - 1);
      return t;
    case Term::Kind::Bound:
      return t;
    case Term::Kind::Apply: {
      std::vector<Term> kids;
      kids.reserve(t.args().size());
      for (const Term& c : t.args()) kids.push_back(merge_slots(c, i, j));
      return Term::apply(t.symbol_name(), std::move(kids));
    }
    case Term::Kind::Mu:
      return Term::raw_mu(t.slot(), merge_slots(t.body(), i, j));
  }
  fail(Errc::ShapeMismatch, "corrupt term");
}

namespace detail {

inline Pattern infer_rec(const Term& t, const Signature& sig, std::size_t m, std::size_t depth) {
  const std::size_t ctx = m + depth;
  switch (t.kind()) {
    case Term::Kind::Free:
      return unit_projection(t.slot(), ctx);
    case Term::Kind::Bound: {
      if (t.bound_depth() >= depth) fail(Errc::ShapeMismatch, "unresolved bound variable");
      return unit_projection(ctx - t.bound_depth(), ctx);
    }
    case Term::Kind::Apply: {
      const FunctionSymbol& sym = sig.at(t.symbol_name());
      if (sym.arity != t.args().size())
        fail(Errc::ArityMismatch, "symbol " + sym.name + " expects " +
                                      std::to_string(sym.arity) + " arguments, got " +
                                      std::to_string(t.args().size()));
      std::vector<Pattern> inner;
      inner.reserve(t.args().size());
      for (const Term& c : t.args()) inner.push_back(infer_rec(c, sig, m, depth));
      return compose(sym.pattern, inner, ctx);
    }
    case Term::Kind::Mu: {
      Pattern body = infer_rec(t.body(), sig, m, depth + 1);
      return mu_pattern(body, ctx + 1);
    }
  }
  fail(Errc::ShapeMismatch, "corrupt term");
}

}  // namespace detail

// Pattern of a term read over context arity max(context_arity, t.arity()).
// Variables become unit projections, applications compose the symbol
// pattern with the argument patterns (shared projections subsume the
// contraction rule), and mu binders take the fixed-point pattern, which
// requires the bound slot to be contractive.
inline Pattern infer_pattern(const Term& t, const Signature& sig, std::size_t context_arity = 0) {
  const std::size_t m = std::max(context_arity, t.arity());
  return detail::infer_rec(t, sig, m, 0);
}

// Inverse of Term::mu on the outermost binder: reopens the bound slot as
// the free slot the binder was written with.
inline FocusedTerm open_mu(const Term& t) {
  if (t.kind() != Term::Kind::Mu) fail(Errc::ShapeMismatch, "open_mu needs a mu term");
  return FocusedTerm{Term::open_walk(t.body(), t.slot(), 0), t.slot()};
}

// Syntactic k-fold iterate of f at its focus slot, seeded with seed.
inline Term iterate_term(const FocusedTerm& f, std::size_t k, const Term& seed) {
  if (f.focus < 1) fail(Errc::SlotOutOfRange, "focus slots start at 1");
  if (k < 1) fail(Errc::PreconditionViolated, "iterate_term needs k >= 1");
  Term acc = substitute(f.term, f.focus, seed);
  for (std::size_t step = 1; step < k; ++step) acc = substitute(f.term, f.focus, acc);
  return acc;
}

// ----- parsing and printing -------------------------------------------------
//
// term := 'mu' nat '.' term | 'mu' var '.' term | ident '(' term {',' term} ')'
//       | ident
// Variables are x<nat> with nat >= 1; every other ident must resolve in the
// signature.

class TermParser {
 public:
  TermParser(std::string_view text, const Signature& sig) : text_(text), sig_(sig) {}

  Term parse() {
    std::vector<std::size_t> binders;
    Term t = parse_term(binders);
    skip_ws();
    if (pos_ != text_.size()) syntax_error("trailing input");
    return t;
  }

 private:
  [[noreturn]] void syntax_error(const std::string& what) const {
    fail(Errc::SyntaxError, what + " at offset " + std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string ident() {
    skip_ws();
    std::size_t start = pos_;
    auto ok_first = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
    auto ok_rest = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    if (pos_ >= text_.size() || !ok_first(text_[pos_])) syntax_error("expected identifier");
    ++pos_;
    while (pos_ < text_.size() && ok_rest(text_[pos_])) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  std::size_t natural() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == start) syntax_error("expected number");
    std::size_t value = 0;
    for (std::size_t k = start; k < pos_; ++k) value = value * 10 + (text_[k] - '0');
    return value;
  }

  static std::optional<std::size_t> var_index(const std::string& name) {
    if (name.size() < 2 || name[0] != 'x') return std::nullopt;
    std::size_t value = 0;
    for (std::size_t k = 1; k < name.size(); ++k) {
      if (!std::isdigit(static_cast<unsigned char>(name[k]))) return std::nullopt;
      value = value * 10 + (name[k] - '0');
    }
    return value;
  }

  Term parse_term(std::vector<std::size_t>& binders) {
    skip_ws();
    std::size_t mark = pos_;
    std::string head = ident();
    if (head == "mu") {
      std::size_t idx;
      skip_ws();
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        idx = natural();
      } else {
        auto v = var_index(ident());
        if (!v) syntax_error("mu expects a slot index or variable");
        idx = *v;
      }
      if (idx < 1) syntax_error("mu binder slots start at 1");
      if (!eat('.')) syntax_error("expected '.' after mu binder");
      binders.push_back(idx);
      Term body = parse_term(binders);
      binders.pop_back();
      return Term::raw_mu(idx, body);
    }
    if (auto v = var_index(head)) {
      if (*v < 1) { pos_ = mark; syntax_error("variable indices start at 1"); }
      return resolve_variable(*v, binders);
    }
    const FunctionSymbol* sym = sig_.find(head);
    if (sym == nullptr) {
      pos_ = mark;
      fail(Errc::UnknownSymbol, head + " at offset " + std::to_string(mark));
    }
    std::vector<Term> args;
    if (eat('(')) {
      args.push_back(parse_term(binders));
      while (eat(',')) args.push_back(parse_term(binders));
      if (!eat(')')) syntax_error("expected ')'");
    }
    if (args.size() != sym->arity)
      fail(Errc::ArityMismatch, head + " expects " + std::to_string(sym->arity) +
                                    " arguments, got " + std::to_string(args.size()));
    return Term::apply(head, std::move(args));
  }

  // Strips the surface index through the enclosing binders, innermost first.
  static Term resolve_variable(std::size_t u, const std::vector<std::size_t>& binders) {
    std::size_t depth = 0;
    for (auto it = binders.rbegin(); it != binders.rend(); ++it, ++depth) {
      if (u == *it) return Term::bound(depth);
      if (u > *it) --u;
    }
    return Term::variable(u);
  }

  std::string_view text_;
  const Signature& sig_;
  std::size_t pos_ = 0;
};

// Parses and validates: symbols resolved, arities checked, and every mu
// binder contractive at its slot.
inline Term parse_term(std::string_view text, const Signature& sig) {
  Term t = TermParser(text, sig).parse();
  infer_pattern(t, sig);
  return t;
}

namespace detail {

// Reinserts the slots removed by the binders outside the current position,
// outermost first.
inline std::size_t surface_slot(std::size_t stored, const std::vector<std::size_t>& binders,
                                std::size_t from) {
  std::size_t u = stored;
  for (std::size_t k = from; k < binders.size(); ++k)
    if (u >= binders[k]) ++u;
  return u;
}

inline void print_rec(const Term& t, const std::vector<std::size_t>* binders_in,
                      std::string& out) {
  std::vector<std::size_t> local;
  const std::vector<std::size_t>& binders = binders_in ? *binders_in : local;
  switch (t.kind()) {
    case Term::Kind::Free:
      out += "x" + std::to_string(surface_slot(t.slot(), binders, 0));
      return;
    case Term::Kind::Bound: {
      if (t.bound_depth() >= binders.size()) fail(Errc::ShapeMismatch, "unresolved bound variable");
      const std::size_t binder_pos = binders.size() - 1 - t.bound_depth();
      out += "x" + std::to_string(surface_slot(binders[binder_pos], binders, binder_pos + 1));
      return;
    }
    case Term::Kind::Apply: {
      out += t.symbol_name();
      if (!t.args().empty()) {
        out += "(";
        for (std::size_t k = 0; k < t.args().size(); ++k) {
          if (k) out += ", ";
          print_rec(t.args()[k], &binders, out);
        }
        out += ")";
      }
      return;
    }
    case Term::Kind::Mu: {
      out += "mu " + std::to_string(t.slot()) + ". ";
      std::vector<std::size_t> extended = binders;
      extended.push_back(t.slot());
      print_rec(t.body(), &extended, out);
      return;
    }
  }
}

}  // namespace detail

inline std::string to_string(const Term& t) {
  std::string out;
  detail::print_rec(t, nullptr, out);
  return out;
}

}  // namespace qfix
