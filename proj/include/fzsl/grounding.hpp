#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fzsl/fol.hpp"
#include "fzsl/fuzzy.hpp"
#include "fzsl/rng.hpp"
#include "fzsl/tensor.hpp"

namespace fzsl {

/// Binary attribute mask with exactly k zero positions drawn uniformly
/// without replacement. Deterministic given the rng state.
std::vector<double> make_mask(std::size_t m, std::size_t k, Rng& rng);

/// Class attribute matrix plus the trainable macro matrix and the current
/// attribute mask.
struct AttributeTable {
  Tensor attrs;              // [M x C], constant
  Tensor macro;              // [M x Q], trainable; undefined without hierarchy
  std::vector<double> mask;  // length M, 1 = keep (empty means all ones)

  std::size_t attr_dim() const { return attrs.shape()[0]; }
  std::size_t n_classes() const { return attrs.shape()[1]; }
  bool has_macro() const { return macro.defined(); }
};

/// Axes a variable can range over: the sample batch, the classes present in
/// the batch, or the seen classes present in the batch.
enum class AxisKind { batch, class_axis, seen_axis };

/// A variable occurrence resolved to a concrete axis position.
struct ResolvedArg {
  Sort sort = Sort::image;
  AxisKind axis = AxisKind::batch;
  std::size_t index = 0;
};

class GroundingEnv;

using GroundingFn =
    std::function<Tensor(GroundingEnv&, const std::vector<ResolvedArg>&)>;

/// Binds the batch to tensors and predicate symbols to grounding functions.
/// Score matrices and embeddings are computed once per environment (one
/// knowledge-base build) and shared by every predicate evaluation.
class GroundingEnv {
 public:
  GroundingEnv(Tensor pooled, std::vector<int> labels,
               std::vector<int> macro_labels, Tensor v, AttributeTable table,
               std::vector<int> seen_class_order, double alpha);

  std::size_t n() const { return labels_.size(); }
  std::size_t axis_length(AxisKind a) const;
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<int>& macro_labels() const { return macro_labels_; }
  const std::vector<int>& batch_classes() const { return batch_classes_; }
  const std::vector<int>& batch_seen() const { return batch_seen_; }
  const std::vector<int>& seen_order() const { return seen_order_; }
  double alpha() const { return alpha_; }
  const AttributeTable& table() const { return table_; }
  const Tensor& pooled() const { return pooled_; }
  const Tensor& v() const { return v_; }

  /// Class id carried by a label-sorted variable at its axis position.
  int label_value(const ResolvedArg& arg) const;
  /// Macro id carried by a macro-sorted variable (batch axis).
  int macro_value(const ResolvedArg& arg) const;
  /// Column of the seen-class scoring universe; DataError if not seen.
  std::size_t seen_pos(int class_id) const;

  const Tensor& embeddings();     // [n, M] = pooled * V
  const Tensor& scores_seen();    // [n, S] softmax over seen classes
  const Tensor& scores_masked();  // [n, S] with masked attribute rows
  const Tensor& scores_macro();   // [n, Q]
  Tensor attr_column(int class_id);  // [M], constant

  std::map<std::string, GroundingFn> predicates;

 private:
  Tensor pooled_;
  std::vector<int> labels_;
  std::vector<int> macro_labels_;
  Tensor v_;
  AttributeTable table_;
  std::vector<int> seen_order_;
  std::map<int, std::size_t> seen_pos_;
  std::vector<int> batch_classes_;
  std::vector<int> batch_seen_;
  double alpha_;
  Tensor embeddings_, scores_seen_, scores_masked_, scores_macro_;
  Tensor attrs_seen_, attrs_masked_;
  std::map<int, Tensor> attr_columns_;
};

/// softmax_rows(x * V * attrs): per-sample class membership scores.
Tensor class_scores(const Tensor& x, const Tensor& v, const Tensor& attrs);

/// Batched diagonal groundings over the batch axis: entry i is the truth of
/// sample i against its own label / macro label.
Tensor ground_is_of_class(GroundingEnv& env);
Tensor ground_is_of_macro(GroundingEnv& env);
Tensor ground_is_of_class_masked(GroundingEnv& env);

/// sigmoid(alpha * cosine(e1, e2)).
Tensor ground_has_same_attribute(const Tensor& e1, const Tensor& e2,
                                 double alpha);

struct EvalResult {
  Tensor truth;
  bool vacuous = false;  // empty quantification; excluded from a KB
};

/// Recursive Real Logic evaluation of a validated formula. Same-kind nested
/// quantifiers aggregate once over their joint guard-filtered index set;
/// quantifiers over the same axis never pair an index with itself; truths
/// are clamped to [clamp_eps, 1-clamp_eps] before aggregation.
EvalResult eval_formula(const ValidatedAxiom& axiom, GroundingEnv& env,
                        const FuzzyConfig& cfg);

}  // namespace fzsl
