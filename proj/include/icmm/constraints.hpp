#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "icmm/common.hpp"
#include "icmm/data.hpp"
#include "icmm/linalg.hpp"

namespace icmm {

// ---------------------------------------------------------------------------
// Hypothesis language: comma-separated clauses, each a chain of strict
// inequalities over coefficient names and numeric constants. A bare name is a
// documentation-only mention of an unconstrained parameter.
//   "b1 > b2, b3, b7 < 0"   ->  {b1 > b2}, {b7 < 0}, mention b3
//   "b6 > b4 > b5"          ->  {b6 > b4}, {b4 > b5}

struct Term {
  bool is_coef = false;
  std::string name;    // when is_coef
  double value = 0.0;  // when constant

  static Term coef(std::string n) { return {true, std::move(n), 0.0}; }
  static Term constant(double v) { return {false, {}, v}; }

  bool operator==(const Term& o) const {
    return is_coef == o.is_coef &&
           (is_coef ? name == o.name : value == o.value);
  }
};

// Normalized to strict ">": left > right always.
struct Constraint {
  Term left;
  Term right;
  bool operator==(const Constraint& o) const {
    return left == o.left && right == o.right;
  }
};

struct Hypothesis {
  std::string name;
  std::vector<Constraint> constraints;   // empty = encompassing model
  std::vector<std::string> mentions;     // bare identifiers, no semantics

  bool empty() const { return constraints.empty(); }
};

namespace detail {

struct Token {
  enum Kind { kIdent, kNumber, kGreater, kLess, kComma, kEnd } kind;
  std::string text;
  double value = 0.0;
  std::size_t pos = 0;
};

inline bool ident_start(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}
inline bool ident_char(char c) {
  return ident_start(c) || (c >= '0' && c <= '9');
}

inline std::vector<Token> lex_hypothesis(const std::string& text) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    // UTF-8 for U+2265 / U+2264
    if (static_cast<unsigned char>(c) == 0xE2 && i + 2 < n &&
        static_cast<unsigned char>(text[i + 1]) == 0x89 &&
        (static_cast<unsigned char>(text[i + 2]) == 0xA5 ||
         static_cast<unsigned char>(text[i + 2]) == 0xA4)) {
      throw HypothesisParseError("only strict inequalities supported", i);
    }
    if (c == '=' || ((c == '>' || c == '<') && i + 1 < n && text[i + 1] == '='))
      throw HypothesisParseError("only strict inequalities supported", i);
    if (c == '>') {
      out.push_back({Token::kGreater, ">", 0.0, i});
      ++i;
    } else if (c == '<') {
      out.push_back({Token::kLess, "<", 0.0, i});
      ++i;
    } else if (c == ',') {
      out.push_back({Token::kComma, ",", 0.0, i});
      ++i;
    } else if (ident_start(c)) {
      std::size_t j = i + 1;
      while (j < n && ident_char(text[j])) ++j;
      out.push_back({Token::kIdent, text.substr(i, j - i), 0.0, i});
      i = j;
    } else if ((c >= '0' && c <= '9') || c == '.' || c == '-' || c == '+') {
      const char* s = text.c_str() + i;
      char* end = nullptr;
      const double v = std::strtod(s, &end);
      if (end == s)
        throw HypothesisParseError("unexpected character '" + std::string(1, c) + "'", i);
      out.push_back(
          {Token::kNumber, std::string(s, static_cast<std::size_t>(end - s)), v, i});
      i += static_cast<std::size_t>(end - s);
    } else {
      throw HypothesisParseError("unexpected character '" + std::string(1, c) + "'", i);
    }
  }
  out.push_back({Token::kEnd, "", 0.0, n});
  return out;
}

inline std::string format_constant(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline Hypothesis parse_hypothesis(const std::string& name, const std::string& text) {
  Hypothesis h;
  h.name = name;
  const auto tokens = detail::lex_hypothesis(text);

  auto push_constraint = [&h](const detail::Token& lt, const detail::Token& rt,
                              std::size_t oppos) {
    Term l = (lt.kind == detail::Token::kIdent) ? Term::coef(lt.text)
                                                : Term::constant(lt.value);
    Term r = (rt.kind == detail::Token::kIdent) ? Term::coef(rt.text)
                                                : Term::constant(rt.value);
    if (!l.is_coef && !r.is_coef)
      throw HypothesisParseError("constraint must reference a coefficient", oppos);
    if (l.is_coef && r.is_coef && l.name == r.name)
      throw HypothesisParseError("coefficient compared with itself", oppos);
    Constraint c{std::move(l), std::move(r)};
    if (std::find(h.constraints.begin(), h.constraints.end(), c) ==
        h.constraints.end())
      h.constraints.push_back(std::move(c));
  };

  std::size_t i = 0;
  while (tokens[i].kind != detail::Token::kEnd) {
    // one clause: term (op term)*
    if (tokens[i].kind != detail::Token::kIdent &&
        tokens[i].kind != detail::Token::kNumber)
      throw HypothesisParseError("expected coefficient or constant", tokens[i].pos);
    std::size_t first = i;
    std::size_t nops = 0;
    ++i;
    while (tokens[i].kind == detail::Token::kGreater ||
           tokens[i].kind == detail::Token::kLess) {
      const auto& op = tokens[i];
      const auto& lhs = tokens[i - 1];
      const auto& rhs = tokens[i + 1];
      if (rhs.kind != detail::Token::kIdent && rhs.kind != detail::Token::kNumber)
        throw HypothesisParseError("expected coefficient or constant after '" +
                                       op.text + "'",
                                   rhs.pos);
      if (op.kind == detail::Token::kGreater)
        push_constraint(lhs, rhs, op.pos);
      else
        push_constraint(rhs, lhs, op.pos);
      ++nops;
      i += 2;
    }
    if (nops == 0) {
      const auto& t = tokens[first];
      if (t.kind != detail::Token::kIdent)
        throw HypothesisParseError("dangling constant", t.pos);
      if (std::find(h.mentions.begin(), h.mentions.end(), t.text) ==
          h.mentions.end())
        h.mentions.push_back(t.text);
    }
    if (tokens[i].kind == detail::Token::kComma) {
      ++i;
      if (tokens[i].kind == detail::Token::kEnd)
        throw HypothesisParseError("trailing comma", tokens[i - 1].pos);
    } else if (tokens[i].kind != detail::Token::kEnd) {
      throw HypothesisParseError("expected ',' between clauses", tokens[i].pos);
    }
  }
  return h;
}

// Canonical text form; parsing it back yields an equal constraint set.
inline std::string to_text(const Hypothesis& h) {
  std::string out;
  auto term_text = [](const Term& t) {
    return t.is_coef ? t.name : detail::format_constant(t.value);
  };
  for (const auto& c : h.constraints) {
    if (!out.empty()) out += ", ";
    if (!c.left.is_coef && c.right.is_coef)
      out += c.right.name + " < " + detail::format_constant(c.left.value);
    else
      out += term_text(c.left) + " > " + term_text(c.right);
  }
  for (const auto& m : h.mentions) {
    bool constrained = false;
    for (const auto& c : h.constraints)
      constrained |= (c.left.is_coef && c.left.name == m) ||
                     (c.right.is_coef && c.right.name == m);
    if (!constrained) {
      if (!out.empty()) out += ", ";
      out += m;
    }
  }
  return out;
}

inline bool same_constraint_set(const Hypothesis& a, const Hypothesis& b) {
  if (a.constraints.size() != b.constraints.size()) return false;
  for (const auto& c : a.constraints)
    if (std::find(b.constraints.begin(), b.constraints.end(), c) ==
        b.constraints.end())
      return false;
  return true;
}

// ---------------------------------------------------------------------------
// Validation against a model's coefficient names; precompiles index-based
// constraint and bound tables for the sampler hot path.

class ValidatedHypothesis {
 public:
  ValidatedHypothesis(Hypothesis h, const std::vector<std::string>& coef_names)
      : h_(std::move(h)), ncoef_(static_cast<int>(coef_names.size())) {
    auto index_of = [&](const std::string& n) {
      for (int i = 0; i < ncoef_; ++i)
        if (coef_names[i] == n) return i;
      throw ConfigError("hypothesis '" + h_.name + "': unknown coefficient '" +
                        n + "'");
    };
    for (const auto& m : h_.mentions) index_of(m);

    lower_coefs_.resize(ncoef_);
    upper_coefs_.resize(ncoef_);
    lower_const_.assign(ncoef_, -std::numeric_limits<double>::infinity());
    upper_const_.assign(ncoef_, std::numeric_limits<double>::infinity());

    for (const auto& c : h_.constraints) {
      IdxConstraint ic;
      ic.left_is_coef = c.left.is_coef;
      ic.right_is_coef = c.right.is_coef;
      ic.left = c.left.is_coef ? index_of(c.left.name) : -1;
      ic.right = c.right.is_coef ? index_of(c.right.name) : -1;
      ic.left_const = c.left.value;
      ic.right_const = c.right.value;
      constraints_.push_back(ic);
      if (ic.left_is_coef && ic.right_is_coef) {
        lower_coefs_[ic.left].push_back(ic.right);
        upper_coefs_[ic.right].push_back(ic.left);
      } else if (ic.left_is_coef) {  // coef > const
        lower_const_[ic.left] = std::max(lower_const_[ic.left], ic.right_const);
      } else {  // const > coef
        upper_const_[ic.right] = std::min(upper_const_[ic.right], ic.left_const);
      }
    }

    check_acyclic_and_consistent();
  }

  const Hypothesis& source() const { return h_; }
  const std::string& name() const { return h_.name; }
  int num_coefficients() const { return ncoef_; }
  std::size_t num_constraints() const { return constraints_.size(); }
  bool empty() const { return constraints_.empty(); }

  // True iff every constraint holds strictly; exact ties evaluate false.
  bool satisfies(const VectorXd& beta) const {
    for (const auto& c : constraints_) {
      const double l = c.left_is_coef ? beta(c.left) : c.left_const;
      const double r = c.right_is_coef ? beta(c.right) : c.right_const;
      if (!(l > r)) return false;
    }
    return true;
  }

  // Truncation interval for coefficient p given the rest of beta. Unbounded
  // sides are +-infinity. Throws when the interval is empty, which cannot
  // happen while the chain state stays feasible.
  std::pair<double, double> bounds_for(int p, const VectorXd& beta) const {
    double lo = lower_const_[p];
    double hi = upper_const_[p];
    for (int q : lower_coefs_[p]) lo = std::max(lo, beta(q));
    for (int q : upper_coefs_[p]) hi = std::min(hi, beta(q));
    if (!(lo < hi))
      throw NumericalError("hypothesis '" + h_.name +
                           "': infeasible bounds for coefficient " +
                           std::to_string(p) + " (state outside the region)");
    return {lo, hi};
  }

  // Topological order of the ">" digraph (greater coefficients first);
  // coefficients not in any constraint appear too. Used by feasible-start
  // repair.
  const std::vector<int>& topo_order() const { return topo_; }
  double lower_const(int p) const { return lower_const_[p]; }
  double upper_const(int p) const { return upper_const_[p]; }
  const std::vector<int>& lower_coefs(int p) const { return lower_coefs_[p]; }
  const std::vector<int>& upper_coefs(int p) const { return upper_coefs_[p]; }

 private:
  struct IdxConstraint {
    bool left_is_coef;
    bool right_is_coef;
    int left;
    int right;
    double left_const;
    double right_const;
  };

  void check_acyclic_and_consistent() {
    // Kahn's algorithm on edges p -> q for constraints p > q.
    std::vector<int> indeg(ncoef_, 0);
    for (int p = 0; p < ncoef_; ++p)
      for (int q : lower_coefs_[p]) ++indeg[q];
    std::vector<int> queue;
    for (int p = 0; p < ncoef_; ++p)
      if (indeg[p] == 0) queue.push_back(p);
    topo_.clear();
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int p = queue[head];
      topo_.push_back(p);
      for (int q : lower_coefs_[p])
        if (--indeg[q] == 0) queue.push_back(q);
    }
    if (static_cast<int>(topo_.size()) != ncoef_)
      throw ConfigError("hypothesis '" + h_.name + "': cyclic ordering");

    // Propagate constant bounds along the order: p > q lifts q's lower bound
    // into p and pushes p's upper bound into q. Catches contradictions like
    // {b1 > 3, b1 < 2} and {a > b, b > 3, a < 2}.
    for (auto it = topo_.rbegin(); it != topo_.rend(); ++it)
      for (int q : lower_coefs_[*it])
        lower_const_[*it] = std::max(lower_const_[*it], lower_const_[q]);
    for (int p : topo_)
      for (int q : lower_coefs_[p])
        upper_const_[q] = std::min(upper_const_[q], upper_const_[p]);
    for (int p = 0; p < ncoef_; ++p)
      if (!(lower_const_[p] < upper_const_[p]))
        throw ConfigError("hypothesis '" + h_.name +
                          "': contradictory constant bounds");
  }

  Hypothesis h_;
  int ncoef_;
  std::vector<IdxConstraint> constraints_;
  std::vector<std::vector<int>> lower_coefs_;  // q: p > q
  std::vector<std::vector<int>> upper_coefs_;  // q: q > p
  std::vector<double> lower_const_;
  std::vector<double> upper_const_;
  std::vector<int> topo_;
};

inline ValidatedHypothesis validate(const Hypothesis& h,
                                    const std::vector<std::string>& coef_names) {
  return ValidatedHypothesis(h, coef_names);
}

inline ValidatedHypothesis validate(const Hypothesis& h, const ModelSpec& spec) {
  return ValidatedHypothesis(h, spec.fixed);
}

inline bool satisfies(const ValidatedHypothesis& h, const VectorXd& beta) {
  return h.satisfies(beta);
}

inline std::pair<double, double> bounds_for(const ValidatedHypothesis& h, int p,
                                            const VectorXd& beta) {
  return h.bounds_for(p, beta);
}

}  // namespace icmm
