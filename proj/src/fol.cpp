#include "fzsl/fol.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace fzsl {

const char* sort_name(Sort s) {
  switch (s) {
    case Sort::image: return "image";
    case Sort::class_label: return "class_label";
    case Sort::macro_label: return "macro_label";
    case Sort::attribute_vector: return "attribute_vector";
    case Sort::seen_class_label: return "seen_class_label";
  }
  return "?";
}

// ---- tokenizer ---------------------------------------------------------------

namespace {

enum class Tok {
  kw_axiom, kw_forall, kw_exists, kw_diag, kw_where, kw_not, kw_and, kw_or,
  ident, lparen, rparen, comma, dot, colon, arrow, eq_eq, bang_eq, end,
};

struct Token {
  Tok kind = Tok::end;
  std::string text;
  SourcePos pos;
};

const char* tok_name(Tok t) {
  switch (t) {
    case Tok::kw_axiom: return "'axiom'";
    case Tok::kw_forall: return "'forall'";
    case Tok::kw_exists: return "'exists'";
    case Tok::kw_diag: return "'diag'";
    case Tok::kw_where: return "'where'";
    case Tok::kw_not: return "'not'";
    case Tok::kw_and: return "'and'";
    case Tok::kw_or: return "'or'";
    case Tok::ident: return "identifier";
    case Tok::lparen: return "'('";
    case Tok::rparen: return "')'";
    case Tok::comma: return "','";
    case Tok::dot: return "'.'";
    case Tok::colon: return "':'";
    case Tok::arrow: return "'->'";
    case Tok::eq_eq: return "'=='";
    case Tok::bang_eq: return "'!='";
    case Tok::end: return "end of input";
  }
  return "?";
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto bump = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < text.size()) {
    char c = text[i];
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') bump(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      bump(1);
      continue;
    }
    SourcePos pos{line, col};
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = i;
      while (i < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[i])) ||
              text[i] == '_')) {
        bump(1);
      }
      std::string word(text.substr(start, i - start));
      Tok kind = Tok::ident;
      if (word == "axiom") kind = Tok::kw_axiom;
      else if (word == "forall") kind = Tok::kw_forall;
      else if (word == "exists") kind = Tok::kw_exists;
      else if (word == "diag") kind = Tok::kw_diag;
      else if (word == "where") kind = Tok::kw_where;
      else if (word == "not") kind = Tok::kw_not;
      else if (word == "and") kind = Tok::kw_and;
      else if (word == "or") kind = Tok::kw_or;
      out.push_back({kind, std::move(word), pos});
      continue;
    }
    auto two = text.substr(i, 2);
    if (two == "->") { out.push_back({Tok::arrow, "->", pos}); bump(2); continue; }
    if (two == "==") { out.push_back({Tok::eq_eq, "==", pos}); bump(2); continue; }
    if (two == "!=") { out.push_back({Tok::bang_eq, "!=", pos}); bump(2); continue; }
    switch (c) {
      case '(': out.push_back({Tok::lparen, "(", pos}); bump(1); continue;
      case ')': out.push_back({Tok::rparen, ")", pos}); bump(1); continue;
      case ',': out.push_back({Tok::comma, ",", pos}); bump(1); continue;
      case '.': out.push_back({Tok::dot, ".", pos}); bump(1); continue;
      case ':': out.push_back({Tok::colon, ":", pos}); bump(1); continue;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'",
                         line, col);
    }
  }
  out.push_back({Tok::end, "", {line, col}});
  return out;
}

// ---- parser ------------------------------------------------------------------

FormulaPtr make_formula(Formula f) {
  return std::make_shared<Formula>(std::move(f));
}

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(tokenize(text)) {}

  std::vector<Axiom> parse_file() {
    std::vector<Axiom> out;
    while (peek().kind != Tok::end) out.push_back(parse_one());
    if (out.empty()) {
      throw ParseError("no axioms found", peek().pos.line, peek().pos.col);
    }
    return out;
  }

  Axiom parse_one() {
    Token kw = expect(Tok::kw_axiom);
    Token name = expect(Tok::ident);
    expect(Tok::colon);
    FormulaPtr f = parse_formula();
    return Axiom{name.text, std::move(f), kw.pos};
  }

  bool at_end() const { return pos_ >= toks_.size() || toks_[pos_].kind == Tok::end; }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    std::size_t i = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[i];
  }

  Token advance() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  Token expect(Tok kind) {
    const Token& t = peek();
    if (t.kind != kind) {
      throw ParseError(std::string("expected ") + tok_name(kind) + ", found " +
                       tok_name(t.kind), t.pos.line, t.pos.col);
    }
    return advance();
  }

  [[noreturn]] void fail(const std::string& msg) {
    const Token& t = peek();
    throw ParseError(msg, t.pos.line, t.pos.col);
  }

  bool bound(const std::string& name) const {
    return std::find(scope_.begin(), scope_.end(), name) != scope_.end();
  }

  // formula := QUANT | IMPL
  FormulaPtr parse_formula() {
    if (peek().kind == Tok::kw_forall || peek().kind == Tok::kw_exists) {
      return parse_quant();
    }
    return parse_impl();
  }

  FormulaPtr parse_quant() {
    Token q = advance();
    QuantNode node;
    node.kind = (q.kind == Tok::kw_forall) ? QuantKind::forall : QuantKind::exists;
    node.binding = parse_binding();
    for (const std::string& v : node.binding.vars) {
      if (bound(v)) {
        fail("variable '" + v + "' shadows an enclosing binding");
      }
    }
    std::size_t depth = scope_.size();
    scope_.insert(scope_.end(), node.binding.vars.begin(),
                  node.binding.vars.end());
    if (peek().kind == Tok::kw_where) {
      advance();
      node.guard = parse_guard();
    }
    expect(Tok::dot);
    node.body = parse_formula();
    scope_.resize(depth);
    return make_formula({std::move(node), q.pos});
  }

  VarBinding parse_binding() {
    VarBinding b;
    if (peek().kind == Tok::kw_diag) {
      Token d = advance();
      b.diag = true;
      expect(Tok::lparen);
      b.vars.push_back(expect(Tok::ident).text);
      while (peek().kind == Tok::comma) {
        advance();
        b.vars.push_back(expect(Tok::ident).text);
      }
      expect(Tok::rparen);
      if (b.vars.size() < 2) {
        throw ParseError("diag binding needs at least 2 variables",
                         d.pos.line, d.pos.col);
      }
      std::set<std::string> uniq(b.vars.begin(), b.vars.end());
      if (uniq.size() != b.vars.size()) {
        throw ParseError("diag binding repeats a variable", d.pos.line,
                         d.pos.col);
      }
    } else {
      b.vars.push_back(expect(Tok::ident).text);
    }
    return b;
  }

  Guard parse_guard() {
    Guard g;
    Token lhs = expect(Tok::ident);
    if (!bound(lhs.text)) {
      throw ParseError("unbound variable '" + lhs.text + "' in guard",
                       lhs.pos.line, lhs.pos.col);
    }
    g.lhs = lhs.text;
    if (peek().kind == Tok::eq_eq) {
      g.op = GuardOp::eq;
    } else if (peek().kind == Tok::bang_eq) {
      g.op = GuardOp::ne;
    } else {
      fail("expected '==' or '!=' in guard");
    }
    advance();
    Token rhs = expect(Tok::ident);
    if (!bound(rhs.text)) {
      throw ParseError("unbound variable '" + rhs.text + "' in guard",
                       rhs.pos.line, rhs.pos.col);
    }
    g.rhs = rhs.text;
    return g;
  }

  // IMPL := BINARY ["->" formula]; right-associative.
  FormulaPtr parse_impl() {
    FormulaPtr lhs = parse_binary();
    if (peek().kind == Tok::arrow) {
      Token a = advance();
      FormulaPtr rhs = parse_formula();
      return make_formula({ImpliesNode{std::move(lhs), std::move(rhs)}, a.pos});
    }
    return lhs;
  }

  // BINARY := UNARY { ("and"|"or") UNARY }; left-associative, equal precedence.
  FormulaPtr parse_binary() {
    FormulaPtr lhs = parse_unary();
    while (peek().kind == Tok::kw_and || peek().kind == Tok::kw_or) {
      Token op = advance();
      FormulaPtr rhs = parse_unary();
      if (op.kind == Tok::kw_and) {
        lhs = make_formula({AndNode{std::move(lhs), std::move(rhs)}, op.pos});
      } else {
        lhs = make_formula({OrNode{std::move(lhs), std::move(rhs)}, op.pos});
      }
    }
    return lhs;
  }

  // UNARY := "not" UNARY | PRED "(" ids ")" | "(" formula ")"
  FormulaPtr parse_unary() {
    const Token& t = peek();
    if (t.kind == Tok::kw_not) {
      Token n = advance();
      FormulaPtr body = parse_unary();
      return make_formula({NotNode{std::move(body)}, n.pos});
    }
    if (t.kind == Tok::lparen) {
      advance();
      FormulaPtr inner = parse_formula();
      expect(Tok::rparen);
      return inner;
    }
    if (t.kind == Tok::ident) {
      Token name = advance();
      expect(Tok::lparen);
      PredNode p;
      p.name = name.text;
      Token first = expect(Tok::ident);
      check_bound(first);
      p.args.push_back(first.text);
      while (peek().kind == Tok::comma) {
        advance();
        Token arg = expect(Tok::ident);
        check_bound(arg);
        p.args.push_back(arg.text);
      }
      expect(Tok::rparen);
      return make_formula({std::move(p), name.pos});
    }
    fail(std::string("expected a formula, found ") + tok_name(t.kind));
  }

  void check_bound(const Token& arg) {
    if (!bound(arg.text)) {
      throw ParseError("unbound variable '" + arg.text + "'", arg.pos.line,
                       arg.pos.col);
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<std::string> scope_;
};

}  // namespace

std::vector<Axiom> parse_axioms(std::string_view text) {
  return Parser(text).parse_file();
}

Axiom parse_axiom(std::string_view text) {
  Parser p(text);
  Axiom a = p.parse_one();
  if (!p.at_end()) {
    throw ParseError("trailing input after axiom", 0, 0);
  }
  return a;
}

// ---- printer -----------------------------------------------------------------

namespace {

enum class Level { formula, impl_lhs, binary, unary };

void print_formula(const Formula& f, Level level, std::ostream& os);

void print_child(const FormulaPtr& f, Level level, std::ostream& os) {
  print_formula(*f, level, os);
}

bool needs_parens(const Formula& f, Level level) {
  return std::visit(
      [&](const auto& node) -> bool {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, QuantNode>) {
          return level != Level::formula;
        } else if constexpr (std::is_same_v<T, ImpliesNode>) {
          return level == Level::impl_lhs || level == Level::binary ||
                 level == Level::unary;
        } else if constexpr (std::is_same_v<T, AndNode> ||
                             std::is_same_v<T, OrNode>) {
          return level == Level::unary;
        } else {
          return false;
        }
      },
      f.node);
}

void print_formula(const Formula& f, Level level, std::ostream& os) {
  if (needs_parens(f, level)) {
    os << "(";
    print_formula(f, Level::formula, os);
    os << ")";
    return;
  }
  std::visit(
      [&](const auto& node) {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, PredNode>) {
          os << node.name << "(";
          for (std::size_t i = 0; i < node.args.size(); ++i) {
            os << (i ? ", " : "") << node.args[i];
          }
          os << ")";
        } else if constexpr (std::is_same_v<T, NotNode>) {
          os << "not ";
          print_child(node.body, Level::unary, os);
        } else if constexpr (std::is_same_v<T, ImpliesNode>) {
          print_child(node.lhs, Level::impl_lhs, os);
          os << " -> ";
          print_child(node.rhs, Level::formula, os);
        } else if constexpr (std::is_same_v<T, AndNode>) {
          print_child(node.lhs, Level::binary, os);
          os << " and ";
          print_child(node.rhs, Level::unary, os);
        } else if constexpr (std::is_same_v<T, OrNode>) {
          print_child(node.lhs, Level::binary, os);
          os << " or ";
          print_child(node.rhs, Level::unary, os);
        } else if constexpr (std::is_same_v<T, QuantNode>) {
          os << (node.kind == QuantKind::forall ? "forall " : "exists ");
          if (node.binding.diag) {
            os << "diag(";
            for (std::size_t i = 0; i < node.binding.vars.size(); ++i) {
              os << (i ? ", " : "") << node.binding.vars[i];
            }
            os << ")";
          } else {
            os << node.binding.vars[0];
          }
          if (node.guard) {
            os << " where " << node.guard->lhs
               << (node.guard->op == GuardOp::eq ? " == " : " != ")
               << node.guard->rhs;
          }
          os << " . ";
          print_child(node.body, Level::formula, os);
        }
      },
      f.node);
}

}  // namespace

std::string format_formula(const Formula& f) {
  std::ostringstream os;
  print_formula(f, Level::formula, os);
  return os.str();
}

std::string format_axiom(const Axiom& a) {
  return "axiom " + a.name + ": " + format_formula(*a.formula);
}

bool structurally_equal(const Formula& a, const Formula& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& na) -> bool {
        using T = std::decay_t<decltype(na)>;
        const T& nb = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, PredNode>) {
          return na.name == nb.name && na.args == nb.args;
        } else if constexpr (std::is_same_v<T, NotNode>) {
          return structurally_equal(*na.body, *nb.body);
        } else if constexpr (std::is_same_v<T, ImpliesNode> ||
                             std::is_same_v<T, AndNode> ||
                             std::is_same_v<T, OrNode>) {
          return structurally_equal(*na.lhs, *nb.lhs) &&
                 structurally_equal(*na.rhs, *nb.rhs);
        } else if constexpr (std::is_same_v<T, QuantNode>) {
          if (na.kind != nb.kind || na.binding.diag != nb.binding.diag ||
              na.binding.vars != nb.binding.vars) {
            return false;
          }
          if (na.guard.has_value() != nb.guard.has_value()) return false;
          if (na.guard &&
              (na.guard->lhs != nb.guard->lhs || na.guard->op != nb.guard->op ||
               na.guard->rhs != nb.guard->rhs)) {
            return false;
          }
          return structurally_equal(*na.body, *nb.body);
        }
      },
      a.node);
}

// ---- signature and validation --------------------------------------------------

const Signature& builtin_signature() {
  static const Signature sig = [] {
    Signature s;
    s.preds["isOfClass"] =
        PredSig{{{Sort::image}, {Sort::class_label, Sort::seen_class_label}}};
    s.preds["isOfClassMasked"] =
        PredSig{{{Sort::image}, {Sort::seen_class_label}}};
    s.preds["isOfMacro"] = PredSig{{{Sort::image}, {Sort::macro_label}}};
    s.preds["hasSameAttribute"] =
        PredSig{{{Sort::image, Sort::attribute_vector},
                 {Sort::image, Sort::attribute_vector}}};
    return s;
  }();
  return sig;
}

const std::string& builtin_axioms_text() {
  static const std::string text =
      "# built-in knowledge base\n"
      "axiom phi1: forall diag(x, l) . isOfClass(x, l)\n"
      "axiom phi2: forall diag(x, l, q) . isOfClass(x, l) -> isOfMacro(x, q)\n"
      "axiom phi3: forall diag(x1, l1) . forall diag(x2, l2) where l1 == l2 . "
      "hasSameAttribute(x1, x2)\n"
      "axiom phi4: forall diag(x1, l1) . forall diag(x2, l2) where l1 != l2 . "
      "not hasSameAttribute(x1, x2)\n"
      "axiom phi5: forall diag(x, l) . forall diag(a, la) where l == la . "
      "hasSameAttribute(x, a)\n"
      // The existential ranges over the samples of each seen class present
      // in the batch; the guard ties the sample's label to the quantified
      // class.
      "axiom phi6: forall lseen . exists diag(x, lx) where lx == lseen . "
      "isOfClassMasked(x, lseen)\n";
  return text;
}

namespace {

const std::set<Sort> kLabelSorts = {Sort::class_label, Sort::macro_label,
                                    Sort::seen_class_label};

struct SortInference {
  const Signature& sig;
  std::vector<Diagnostic>& diags;
  // candidate sorts per variable; narrowed by each predicate occurrence
  std::map<std::string, std::set<Sort>> candidates;

  void narrow(const std::string& var, const std::set<Sort>& allowed,
              SourcePos pos, const std::string& context) {
    auto it = candidates.find(var);
    if (it == candidates.end()) return;  // unbound; reported elsewhere
    std::set<Sort> next;
    std::set_intersection(it->second.begin(), it->second.end(),
                          allowed.begin(), allowed.end(),
                          std::inserter(next, next.begin()));
    if (next.empty()) {
      std::string have;
      for (Sort s : it->second) {
        have += (have.empty() ? "" : "|");
        have += sort_name(s);
      }
      diags.push_back({pos, "variable '" + var + "' used as " + context +
                                " but earlier uses require " + have});
    } else {
      it->second = std::move(next);
    }
  }

  void walk(const Formula& f) {
    std::visit(
        [&](const auto& node) {
          using T = std::decay_t<decltype(node)>;
          if constexpr (std::is_same_v<T, PredNode>) {
            auto pit = sig.preds.find(node.name);
            if (pit == sig.preds.end()) {
              diags.push_back({f.pos, "unknown predicate '" + node.name + "'"});
              return;
            }
            const PredSig& ps = pit->second;
            if (ps.slots.size() != node.args.size()) {
              diags.push_back(
                  {f.pos, "predicate '" + node.name + "' expects " +
                              std::to_string(ps.slots.size()) +
                              " arguments, got " +
                              std::to_string(node.args.size())});
              return;
            }
            for (std::size_t i = 0; i < node.args.size(); ++i) {
              const std::string& var = node.args[i];
              if (!candidates.count(var)) {
                diags.push_back({f.pos, "unbound variable '" + var + "'"});
                continue;
              }
              std::string ctx;
              for (Sort s : ps.slots[i]) {
                ctx += (ctx.empty() ? "" : "|");
                ctx += sort_name(s);
              }
              narrow(var, ps.slots[i], f.pos,
                     "argument " + std::to_string(i + 1) + " of '" +
                         node.name + "' (" + ctx + ")");
            }
          } else if constexpr (std::is_same_v<T, NotNode>) {
            walk(*node.body);
          } else if constexpr (std::is_same_v<T, ImpliesNode> ||
                               std::is_same_v<T, AndNode> ||
                               std::is_same_v<T, OrNode>) {
            walk(*node.lhs);
            walk(*node.rhs);
          } else if constexpr (std::is_same_v<T, QuantNode>) {
            for (const std::string& v : node.binding.vars) {
              if (candidates.count(v)) {
                diags.push_back(
                    {f.pos, "variable '" + v + "' shadows an earlier binding"});
              }
              candidates[v] = {Sort::image, Sort::class_label,
                               Sort::macro_label, Sort::attribute_vector,
                               Sort::seen_class_label};
            }
            if (node.guard) {
              narrow(node.guard->lhs, kLabelSorts, f.pos,
                     "a guard operand (label)");
              narrow(node.guard->rhs, kLabelSorts, f.pos,
                     "a guard operand (label)");
              if (!candidates.count(node.guard->lhs)) {
                diags.push_back({f.pos, "unbound variable '" +
                                            node.guard->lhs + "' in guard"});
              }
              if (!candidates.count(node.guard->rhs)) {
                diags.push_back({f.pos, "unbound variable '" +
                                            node.guard->rhs + "' in guard"});
              }
            }
            walk(*node.body);
            // bindings stay in `candidates` so the final sorts can be read
            // out; shadowing is rejected above, so names are unique.
          }
        },
        f.node);
  }
};

// Deterministic resolution for variables whose uses leave several sorts
// open. Names starting with 'a' lean attribute_vector (the hasSameAttribute
// slots are the only genuinely ambiguous ones); otherwise prefer image, then
// class_label.
Sort resolve_ambiguous(const std::string& var, const std::set<Sort>& cands) {
  if (cands.size() == 1) return *cands.begin();
  if (!var.empty() && var[0] == 'a' && cands.count(Sort::attribute_vector)) {
    return Sort::attribute_vector;
  }
  if (cands.count(Sort::image)) return Sort::image;
  if (cands.count(Sort::class_label)) return Sort::class_label;
  if (cands.count(Sort::seen_class_label)) return Sort::seen_class_label;
  if (cands.count(Sort::macro_label)) return Sort::macro_label;
  return *cands.begin();
}

}  // namespace

std::vector<Diagnostic> validate(const Axiom& a, const Signature& sig,
                                 ValidatedAxiom* out) {
  std::vector<Diagnostic> diags;
  SortInference inf{sig, diags, {}};
  inf.walk(*a.formula);
  if (diags.empty() && out) {
    out->axiom = a;
    out->var_sorts.clear();
    for (const auto& [var, cands] : inf.candidates) {
      out->var_sorts[var] = resolve_ambiguous(var, cands);
    }
  }
  return diags;
}

std::vector<ValidatedAxiom> validate_all(const std::vector<Axiom>& axioms,
                                         const Signature& sig) {
  std::vector<ValidatedAxiom> out;
  std::string problems;
  for (const Axiom& a : axioms) {
    ValidatedAxiom va;
    auto diags = validate(a, sig, &va);
    if (diags.empty()) {
      out.push_back(std::move(va));
    } else {
      for (const Diagnostic& d : diags) {
        problems += a.name + " @" + std::to_string(d.pos.line) + ":" +
                    std::to_string(d.pos.col) + ": " + d.message + "\n";
      }
    }
  }
  if (!problems.empty()) {
    throw ConfigError("invalid axioms:\n" + problems);
  }
  return out;
}

bool mentions_macro(const Formula& f, const Signature& sig) {
  return std::visit(
      [&](const auto& node) -> bool {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, PredNode>) {
          auto it = sig.preds.find(node.name);
          if (it == sig.preds.end()) return false;
          for (const auto& slot : it->second.slots) {
            if (slot.count(Sort::macro_label)) return true;
          }
          return false;
        } else if constexpr (std::is_same_v<T, NotNode>) {
          return mentions_macro(*node.body, sig);
        } else if constexpr (std::is_same_v<T, ImpliesNode> ||
                             std::is_same_v<T, AndNode> ||
                             std::is_same_v<T, OrNode>) {
          return mentions_macro(*node.lhs, sig) ||
                 mentions_macro(*node.rhs, sig);
        } else if constexpr (std::is_same_v<T, QuantNode>) {
          return mentions_macro(*node.body, sig);
        }
      },
      f.node);
}

}  // namespace fzsl
