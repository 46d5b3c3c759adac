#include "fzsl/grounding.hpp"

#include <algorithm>
#include <set>

namespace fzsl {

std::vector<double> make_mask(std::size_t m, std::size_t k, Rng& rng) {
  if (k > m) {
    throw ParameterError("make_mask: k=" + std::to_string(k) +
                         " exceeds attribute count " + std::to_string(m));
  }
  std::vector<double> mask(m, 1.0);
  std::vector<std::size_t> idx(m);
  for (std::size_t i = 0; i < m; ++i) idx[i] = i;
  for (std::size_t t = 0; t < k; ++t) {
    std::size_t j = t + rng.index(m - t);
    std::swap(idx[t], idx[j]);
    mask[idx[t]] = 0.0;
  }
  return mask;
}

// ---- environment ---------------------------------------------------------------

GroundingEnv::GroundingEnv(Tensor pooled, std::vector<int> labels,
                           std::vector<int> macro_labels, Tensor v,
                           AttributeTable table,
                           std::vector<int> seen_class_order, double alpha)
    : pooled_(std::move(pooled)),
      labels_(std::move(labels)),
      macro_labels_(std::move(macro_labels)),
      v_(std::move(v)),
      table_(std::move(table)),
      seen_order_(std::move(seen_class_order)),
      alpha_(alpha) {
  if (pooled_.dim() != 2 || pooled_.shape()[0] != labels_.size()) {
    throw DimensionError("GroundingEnv: pooled features must be [n, B] with "
                         "one row per label");
  }
  if (!macro_labels_.empty() && macro_labels_.size() != labels_.size()) {
    throw DimensionError("GroundingEnv: macro labels must match batch size");
  }
  if (labels_.empty()) throw ConfigError("GroundingEnv: empty batch");
  for (std::size_t i = 0; i < seen_order_.size(); ++i) {
    seen_pos_[seen_order_[i]] = i;
  }
  std::set<int> classes(labels_.begin(), labels_.end());
  batch_classes_.assign(classes.begin(), classes.end());
  for (int cl : batch_classes_) {
    if (seen_pos_.count(cl)) batch_seen_.push_back(cl);
  }

  const std::size_t m = table_.attr_dim();
  const std::size_t s = seen_order_.size();
  if (!table_.mask.empty() && table_.mask.size() != m) {
    throw DimensionError("GroundingEnv: mask length " +
                         std::to_string(table_.mask.size()) +
                         " does not match attribute dim " + std::to_string(m));
  }
  // Seen-class column blocks of the attribute matrix, raw and masked. Both
  // are constants; an all-ones mask reproduces the raw block bitwise.
  std::vector<double> raw(m * s), masked(m * s);
  auto full = table_.attrs.data();
  const std::size_t c = table_.n_classes();
  for (std::size_t a = 0; a < m; ++a) {
    double keep = table_.mask.empty() ? 1.0 : table_.mask[a];
    for (std::size_t j = 0; j < s; ++j) {
      int cl = seen_order_[j];
      if (cl < 0 || static_cast<std::size_t>(cl) >= c) {
        throw DataError("GroundingEnv: seen class id " + std::to_string(cl) +
                        " outside the attribute table");
      }
      double val = full[a * c + static_cast<std::size_t>(cl)];
      raw[a * s + j] = val;
      masked[a * s + j] = val * keep;
    }
  }
  attrs_seen_ = Tensor::from_data({m, s}, std::move(raw));
  attrs_masked_ = Tensor::from_data({m, s}, std::move(masked));

  predicates["isOfClass"] = [](GroundingEnv& env,
                               const std::vector<ResolvedArg>& args) {
    if (args.size() != 2) throw ConfigError("isOfClass expects 2 arguments");
    if (args[0].axis != AxisKind::batch) {
      throw ConfigError("isOfClass: image argument must range over the batch");
    }
    std::size_t col = env.seen_pos(env.label_value(args[1]));
    return select(env.scores_seen(), args[0].index, col);
  };
  predicates["isOfClassMasked"] = [](GroundingEnv& env,
                                     const std::vector<ResolvedArg>& args) {
    if (args.size() != 2) {
      throw ConfigError("isOfClassMasked expects 2 arguments");
    }
    if (args[0].axis != AxisKind::batch) {
      throw ConfigError(
          "isOfClassMasked: image argument must range over the batch");
    }
    std::size_t col = env.seen_pos(env.label_value(args[1]));
    return select(env.scores_masked(), args[0].index, col);
  };
  predicates["isOfMacro"] = [](GroundingEnv& env,
                               const std::vector<ResolvedArg>& args) {
    if (args.size() != 2) throw ConfigError("isOfMacro expects 2 arguments");
    if (args[0].axis != AxisKind::batch) {
      throw ConfigError("isOfMacro: image argument must range over the batch");
    }
    int q = env.macro_value(args[1]);
    const Tensor& scores = env.scores_macro();
    if (q < 0 || static_cast<std::size_t>(q) >= scores.shape()[1]) {
      throw DataError("isOfMacro: macro id " + std::to_string(q) +
                      " outside [0, " + std::to_string(scores.shape()[1]) +
                      ")");
    }
    return select(scores, args[0].index, static_cast<std::size_t>(q));
  };
  predicates["hasSameAttribute"] = [](GroundingEnv& env,
                                      const std::vector<ResolvedArg>& args) {
    if (args.size() != 2) {
      throw ConfigError("hasSameAttribute expects 2 arguments");
    }
    auto embedding_of = [&env](const ResolvedArg& a) -> Tensor {
      if (a.sort == Sort::attribute_vector) {
        if (a.axis != AxisKind::class_axis) {
          throw ConfigError(
              "hasSameAttribute: attribute argument must range over batch "
              "classes");
        }
        return env.attr_column(env.batch_classes()[a.index]);
      }
      if (a.axis != AxisKind::batch) {
        throw ConfigError(
            "hasSameAttribute: image argument must range over the batch");
      }
      return row(env.embeddings(), a.index);
    };
    return ground_has_same_attribute(embedding_of(args[0]),
                                     embedding_of(args[1]), env.alpha());
  };
}

std::size_t GroundingEnv::axis_length(AxisKind a) const {
  switch (a) {
    case AxisKind::batch: return n();
    case AxisKind::class_axis: return batch_classes_.size();
    case AxisKind::seen_axis: return batch_seen_.size();
  }
  return 0;
}

int GroundingEnv::label_value(const ResolvedArg& arg) const {
  switch (arg.axis) {
    case AxisKind::batch: return labels_[arg.index];
    case AxisKind::class_axis: return batch_classes_[arg.index];
    case AxisKind::seen_axis: return batch_seen_[arg.index];
  }
  return -1;
}

int GroundingEnv::macro_value(const ResolvedArg& arg) const {
  if (arg.axis != AxisKind::batch) {
    throw ConfigError("macro variables must be paired with batch samples");
  }
  if (macro_labels_.empty()) {
    throw ConfigError(
        "macro label requested but the batch carries no hierarchy");
  }
  return macro_labels_[arg.index];
}

std::size_t GroundingEnv::seen_pos(int class_id) const {
  auto it = seen_pos_.find(class_id);
  if (it == seen_pos_.end()) {
    throw DataError("class id " + std::to_string(class_id) +
                    " is not in the seen scoring universe");
  }
  return it->second;
}

const Tensor& GroundingEnv::embeddings() {
  if (!embeddings_.defined()) embeddings_ = matmul(pooled_, v_);
  return embeddings_;
}

const Tensor& GroundingEnv::scores_seen() {
  if (!scores_seen_.defined()) {
    scores_seen_ = softmax_rows(matmul(embeddings(), attrs_seen_));
  }
  return scores_seen_;
}

const Tensor& GroundingEnv::scores_masked() {
  if (!scores_masked_.defined()) {
    scores_masked_ = softmax_rows(matmul(embeddings(), attrs_masked_));
  }
  return scores_masked_;
}

const Tensor& GroundingEnv::scores_macro() {
  if (!scores_macro_.defined()) {
    if (!table_.has_macro()) {
      throw ConfigError(
          "isOfMacro grounding requested without a macro attribute matrix; "
          "disable hierarchy axioms instead");
    }
    scores_macro_ = softmax_rows(matmul(embeddings(), table_.macro));
  }
  return scores_macro_;
}

Tensor GroundingEnv::attr_column(int class_id) {
  auto it = attr_columns_.find(class_id);
  if (it != attr_columns_.end()) return it->second;
  const std::size_t c = table_.n_classes();
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= c) {
    throw DataError("attr_column: class id " + std::to_string(class_id) +
                    " outside [0, " + std::to_string(c) + ")");
  }
  const std::size_t m = table_.attr_dim();
  std::vector<double> col(m);
  auto full = table_.attrs.data();
  for (std::size_t a = 0; a < m; ++a) {
    col[a] = full[a * c + static_cast<std::size_t>(class_id)];
  }
  Tensor t = Tensor::from_data({m}, std::move(col));
  attr_columns_.emplace(class_id, t);
  return t;
}

// ---- spec-level grounding ops ----------------------------------------------------

Tensor class_scores(const Tensor& x, const Tensor& v, const Tensor& attrs) {
  return softmax_rows(matmul(matmul(x, v), attrs));
}

namespace {

Tensor diag_truths(GroundingEnv& env, const char* pred) {
  std::vector<Tensor> truths;
  truths.reserve(env.n());
  auto fn = env.predicates.at(pred);
  for (std::size_t i = 0; i < env.n(); ++i) {
    std::vector<ResolvedArg> args{
        {Sort::image, AxisKind::batch, i},
        {Sort::class_label, AxisKind::batch, i},
    };
    truths.push_back(fn(env, args));
  }
  return stack(truths);
}

}  // namespace

Tensor ground_is_of_class(GroundingEnv& env) {
  return diag_truths(env, "isOfClass");
}

Tensor ground_is_of_class_masked(GroundingEnv& env) {
  return diag_truths(env, "isOfClassMasked");
}

Tensor ground_is_of_macro(GroundingEnv& env) {
  std::vector<Tensor> truths;
  truths.reserve(env.n());
  auto fn = env.predicates.at("isOfMacro");
  for (std::size_t i = 0; i < env.n(); ++i) {
    std::vector<ResolvedArg> args{
        {Sort::image, AxisKind::batch, i},
        {Sort::macro_label, AxisKind::batch, i},
    };
    truths.push_back(fn(env, args));
  }
  return stack(truths);
}

Tensor ground_has_same_attribute(const Tensor& e1, const Tensor& e2,
                                 double alpha) {
  if (alpha <= 0.0) {
    throw ParameterError("ground_has_same_attribute: alpha must be > 0");
  }
  return sigmoid(scale(cosine_similarity(e1, e2), alpha));
}

// ---- formula evaluation ----------------------------------------------------------

namespace {

struct BoundVar {
  AxisKind axis;
  std::size_t index;
  Sort sort;
};

/// One quantifier level of a same-kind chain: the variables of its binding
/// (all on one axis) plus its optional guard.
struct Level {
  const QuantNode* q;
  AxisKind axis;
};

class Evaluator {
 public:
  Evaluator(GroundingEnv& env, const FuzzyConfig& cfg,
            const std::map<std::string, Sort>& sorts)
      : env_(env), cfg_(cfg), sorts_(sorts) {}

  std::optional<Tensor> eval(const Formula& f, bool top) {
    if (const auto* q = std::get_if<QuantNode>(&f.node)) {
      return eval_chain(*q, top);
    }
    if (const auto* p = std::get_if<PredNode>(&f.node)) {
      return eval_pred(*p);
    }
    if (const auto* n = std::get_if<NotNode>(&f.node)) {
      auto v = eval(*n->body, false);
      if (!v) return std::nullopt;
      return fuzzy_not(*v);
    }
    if (const auto* im = std::get_if<ImpliesNode>(&f.node)) {
      auto a = eval(*im->lhs, false);
      auto b = eval(*im->rhs, false);
      if (!a || !b) return std::nullopt;
      return fuzzy_implies(*a, *b);
    }
    if (const auto* an = std::get_if<AndNode>(&f.node)) {
      auto a = eval(*an->lhs, false);
      auto b = eval(*an->rhs, false);
      if (!a || !b) return std::nullopt;
      return fuzzy_and(*a, *b);
    }
    const auto& o = std::get<OrNode>(f.node);
    auto a = eval(*o.lhs, false);
    auto b = eval(*o.rhs, false);
    if (!a || !b) return std::nullopt;
    return fuzzy_or(*a, *b);
  }

 private:
  Sort sort_of(const std::string& var) const {
    auto it = sorts_.find(var);
    if (it == sorts_.end()) {
      throw ConfigError("variable '" + var + "' has no resolved sort");
    }
    return it->second;
  }

  AxisKind axis_of(const std::string& var, const VarBinding& group) const {
    switch (sort_of(var)) {
      case Sort::image: return AxisKind::batch;
      case Sort::attribute_vector: return AxisKind::class_axis;
      case Sort::seen_class_label: return AxisKind::seen_axis;
      case Sort::macro_label: return AxisKind::batch;
      case Sort::class_label: {
        for (const std::string& other : group.vars) {
          if (other != var && sort_of(other) == Sort::image) {
            return AxisKind::batch;
          }
        }
        for (const std::string& other : group.vars) {
          if (other != var && sort_of(other) == Sort::attribute_vector) {
            return AxisKind::class_axis;
          }
        }
        return AxisKind::class_axis;
      }
    }
    return AxisKind::batch;
  }

  AxisKind level_axis(const QuantNode& q) const {
    AxisKind axis = axis_of(q.binding.vars[0], q.binding);
    for (const std::string& v : q.binding.vars) {
      if (axis_of(v, q.binding) != axis) {
        throw ConfigError(
            "diag binding pairs variables over different axes; diag groups "
            "must share one axis");
      }
    }
    return axis;
  }

  bool guard_holds(const Guard& g) const {
    int lhs = label_of(g.lhs);
    int rhs = label_of(g.rhs);
    return g.op == GuardOp::eq ? lhs == rhs : lhs != rhs;
  }

  int label_of(const std::string& var) const {
    auto it = scope_.find(var);
    if (it == scope_.end()) {
      throw ConfigError("guard variable '" + var + "' is not bound");
    }
    const BoundVar& b = it->second;
    if (b.sort == Sort::macro_label) {
      return env_.macro_value({b.sort, b.axis, b.index});
    }
    return env_.label_value({b.sort, b.axis, b.index});
  }

  // Collect the maximal chain of same-kind quantifiers, enumerate the joint
  // guard-filtered index set (same-axis levels take pairwise distinct
  // indices), evaluate the innermost body per assignment, and aggregate once.
  std::optional<Tensor> eval_chain(const QuantNode& first, bool top) {
    std::vector<Level> levels;
    const QuantNode* cur = &first;
    const Formula* body = nullptr;
    while (true) {
      levels.push_back({cur, level_axis(*cur)});
      const auto* inner = std::get_if<QuantNode>(&cur->body->node);
      if (inner && inner->kind == cur->kind) {
        cur = inner;
        continue;
      }
      body = cur->body.get();
      break;
    }

    std::vector<Tensor> truths;
    std::vector<std::size_t> idx(levels.size(), 0);
    enumerate(levels, 0, idx, *body, truths);

    for (const Level& lvl : levels) {
      for (const std::string& v : lvl.q->binding.vars) scope_.erase(v);
    }

    if (truths.empty()) {
      if (first.kind == QuantKind::forall && !top) {
        return Tensor::scalar(1.0);  // vacuous truth inside a larger formula
      }
      return std::nullopt;  // dropped from the enclosing aggregation
    }
    Tensor vals = clamp_truth(stack(truths), cfg_.clamp_eps);
    return first.kind == QuantKind::forall ? agg_forall(vals, cfg_.p_forall)
                                           : agg_exists(vals, cfg_.p_exists);
  }

  void enumerate(const std::vector<Level>& levels, std::size_t depth,
                 std::vector<std::size_t>& idx, const Formula& body,
                 std::vector<Tensor>& out) {
    if (depth == levels.size()) {
      auto v = eval(body, false);
      if (v) out.push_back(*v);
      return;
    }
    const Level& lvl = levels[depth];
    std::size_t len = env_.axis_length(lvl.axis);
    for (std::size_t i = 0; i < len; ++i) {
      // Ordered tuples with pairwise distinct indices per shared axis.
      bool clash = false;
      for (std::size_t d = 0; d < depth; ++d) {
        if (levels[d].axis == lvl.axis && idx[d] == i) {
          clash = true;
          break;
        }
      }
      if (clash) continue;
      idx[depth] = i;
      for (const std::string& v : lvl.q->binding.vars) {
        scope_[v] = BoundVar{lvl.axis, i, sort_of(v)};
      }
      if (lvl.q->guard && !guard_holds(*lvl.q->guard)) continue;
      enumerate(levels, depth + 1, idx, body, out);
    }
  }

  std::optional<Tensor> eval_pred(const PredNode& p) {
    auto it = env_.predicates.find(p.name);
    if (it == env_.predicates.end()) {
      throw ConfigError("predicate '" + p.name + "' has no grounding");
    }
    std::vector<ResolvedArg> args;
    args.reserve(p.args.size());
    for (const std::string& var : p.args) {
      auto sit = scope_.find(var);
      if (sit == scope_.end()) {
        throw ConfigError("variable '" + var + "' is not bound");
      }
      args.push_back({sit->second.sort, sit->second.axis, sit->second.index});
    }
    return it->second(env_, args);
  }

  GroundingEnv& env_;
  const FuzzyConfig& cfg_;
  const std::map<std::string, Sort>& sorts_;
  std::map<std::string, BoundVar> scope_;
};

}  // namespace

EvalResult eval_formula(const ValidatedAxiom& axiom, GroundingEnv& env,
                        const FuzzyConfig& cfg) {
  cfg.validate();
  Evaluator ev(env, cfg, axiom.var_sorts);
  auto v = ev.eval(*axiom.axiom.formula, /*top=*/true);
  if (!v) return {Tensor::scalar(1.0), /*vacuous=*/true};
  return {*v, /*vacuous=*/false};
}

}  // namespace fzsl
