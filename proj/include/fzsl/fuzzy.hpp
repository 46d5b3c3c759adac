#pragma once

#include <vector>

#include "fzsl/tensor.hpp"

namespace fzsl {

/// Connective/aggregator configuration. The two exponents are scheduled in
/// lockstep during training but stored separately.
struct FuzzyConfig {
  double p_forall = 2.0;
  double p_exists = 2.0;
  double clamp_eps = 1e-4;

  void validate() const;
};

/// Deterministic, non-decreasing exponent schedule over epochs.
struct PSchedule {
  enum class Mode { every_k_epochs, at_epochs };

  double initial_p = 2.0;
  Mode mode = Mode::every_k_epochs;
  double step = 2.0;
  int every_k = 4;                // every_k_epochs: bump every k epochs
  std::vector<int> epochs;        // at_epochs: bump once each listed epoch
  double cap = 6.0;

  void validate() const;
};

double schedule_p(int epoch, const PSchedule& schedule);

// Connectives of the symmetric configuration: standard negation, Reichenbach
// implication, product conjunction and its De Morgan dual. All require
// entries in [0,1] and return values in [0,1].
Tensor fuzzy_not(const Tensor& a);
Tensor fuzzy_implies(const Tensor& a, const Tensor& b);
Tensor fuzzy_and(const Tensor& a, const Tensor& b);
Tensor fuzzy_or(const Tensor& a, const Tensor& b);

/// Existential aggregator: ((1/n) sum a_i^p)^(1/p). n >= 1, p >= 1,
/// entries in [0,1]. Approaches max as p grows.
Tensor agg_exists(const Tensor& values, double p);

/// Universal aggregator: 1 - ((1/n) sum (1-a_i)^p)^(1/p), computed as
/// 1 - agg_exists(1 - values, p) so duality holds exactly.
Tensor agg_forall(const Tensor& values, double p);

/// Knowledge-base conjunction: agg_forall over the axiom truths.
Tensor sat_aggregate(const Tensor& axiom_truths, double p);

/// Clamp truths into [eps, 1-eps] before aggregation; keeps the 1/p root
/// differentiable at saturation.
Tensor clamp_truth(const Tensor& t, double eps);

}  // namespace fzsl
