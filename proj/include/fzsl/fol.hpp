#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fzsl/errors.hpp"

namespace fzsl {

enum class QuantKind { forall, exists };
enum class GuardOp { eq, ne };

/// Argument sorts of the axiom language.
enum class Sort {
  image,
  class_label,
  macro_label,
  attribute_vector,
  seen_class_label,
};

const char* sort_name(Sort s);

struct SourcePos {
  int line = 0;
  int col = 0;
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct PredNode {
  std::string name;
  std::vector<std::string> args;
};

struct NotNode {
  FormulaPtr body;
};

struct ImpliesNode {
  FormulaPtr lhs, rhs;
};

struct AndNode {
  FormulaPtr lhs, rhs;
};

struct OrNode {
  FormulaPtr lhs, rhs;
};

/// diag(v1, v2, ...) binds jointly over paired instances; a plain binding
/// holds exactly one variable.
struct VarBinding {
  bool diag = false;
  std::vector<std::string> vars;
};

/// Label constraint attached to a quantifier: `where l1 == l2`.
struct Guard {
  std::string lhs;
  GuardOp op = GuardOp::eq;
  std::string rhs;
};

struct QuantNode {
  QuantKind kind = QuantKind::forall;
  VarBinding binding;
  std::optional<Guard> guard;
  FormulaPtr body;
};

struct Formula {
  std::variant<PredNode, NotNode, ImpliesNode, AndNode, OrNode, QuantNode> node;
  SourcePos pos;
};

struct Axiom {
  std::string name;
  FormulaPtr formula;
  SourcePos pos;
};

/// Parse a whole axiom file (UTF-8 text, `#` comments, axioms span lines
/// until the next `axiom` keyword). Throws ParseError with line/column.
std::vector<Axiom> parse_axioms(std::string_view text);

/// Parse exactly one `axiom NAME : formula`.
Axiom parse_axiom(std::string_view text);

/// Canonical text form; parse_axiom(format_axiom(a)) is structurally
/// identical to a.
std::string format_axiom(const Axiom& a);
std::string format_formula(const Formula& f);

bool structurally_equal(const Formula& a, const Formula& b);

/// Per-slot acceptable sorts of a predicate.
struct PredSig {
  std::vector<std::set<Sort>> slots;
};

struct Signature {
  std::map<std::string, PredSig> preds;
};

/// The four built-in predicates over {image, class/seen/macro label,
/// attribute vector}.
const Signature& builtin_signature();

/// The six built-in axioms as parser input.
const std::string& builtin_axioms_text();

struct Diagnostic {
  SourcePos pos;
  std::string message;
};

/// Axiom plus resolved variable sorts, ready for grounding.
struct ValidatedAxiom {
  Axiom axiom;
  std::map<std::string, Sort> var_sorts;
};

/// Structural checks against a signature: predicate existence, arity, slot
/// sorts, guard sorts. Never throws; returns diagnostics (empty iff valid).
/// On success fills `out` (if given) with resolved variable sorts.
std::vector<Diagnostic> validate(const Axiom& a, const Signature& sig,
                                 ValidatedAxiom* out = nullptr);

/// validate() every axiom; throws ConfigError summarising any diagnostics.
std::vector<ValidatedAxiom> validate_all(const std::vector<Axiom>& axioms,
                                         const Signature& sig);

/// True if the formula mentions a predicate whose signature uses
/// macro_label (used to auto-disable hierarchy axioms).
bool mentions_macro(const Formula& f, const Signature& sig);

}  // namespace fzsl
