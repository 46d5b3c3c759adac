#include "fzsl/fuzzy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fzsl {

namespace {

void check_truth_range(const char* op, const Tensor& t) {
  for (double v : t.data()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError(std::string(op) + ": truth value " +
                        std::to_string(v) + " outside [0,1]");
    }
  }
}

void check_agg_args(const char* op, const Tensor& values, double p) {
  if (values.size() == 0) {
    throw ParameterError(std::string(op) + ": empty input");
  }
  if (values.dim() > 1) {
    throw DimensionError(std::string(op) + ": need a scalar or 1-D tensor");
  }
  if (p < 1.0) {
    throw ParameterError(std::string(op) + ": p must be >= 1, got " +
                         std::to_string(p));
  }
  check_truth_range(op, values);
}

}  // namespace

void FuzzyConfig::validate() const {
  if (p_forall < 1.0 || p_exists < 1.0) {
    throw ParameterError("FuzzyConfig: p_forall and p_exists must be >= 1");
  }
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) {
    throw ParameterError("FuzzyConfig: clamp_eps must lie in (0, 0.5)");
  }
}

void PSchedule::validate() const {
  if (initial_p < 1.0) throw ParameterError("PSchedule: initial_p must be >= 1");
  if (step < 0.0) throw ParameterError("PSchedule: step must be >= 0");
  if (cap < initial_p) throw ParameterError("PSchedule: cap below initial_p");
  if (mode == Mode::every_k_epochs && every_k < 1) {
    throw ParameterError("PSchedule: every_k must be >= 1");
  }
  if (mode == Mode::at_epochs) {
    if (!std::is_sorted(epochs.begin(), epochs.end())) {
      throw ParameterError("PSchedule: at_epochs list must be sorted");
    }
  }
}

double schedule_p(int epoch, const PSchedule& schedule) {
  schedule.validate();
  if (epoch < 0) throw ParameterError("schedule_p: epoch must be >= 0");
  double p = schedule.initial_p;
  if (schedule.mode == PSchedule::Mode::every_k_epochs) {
    p += schedule.step * static_cast<double>(epoch / schedule.every_k);
  } else {
    for (int e : schedule.epochs) {
      if (epoch >= e) p += schedule.step;
    }
  }
  return std::min(p, schedule.cap);
}

Tensor fuzzy_not(const Tensor& a) {
  check_truth_range("fuzzy_not", a);
  return const_minus(1.0, a);
}

Tensor fuzzy_implies(const Tensor& a, const Tensor& b) {
  check_truth_range("fuzzy_implies", a);
  check_truth_range("fuzzy_implies", b);
  // Reichenbach: 1 - a + a*b
  return add(const_minus(1.0, a), mul(a, b));
}

Tensor fuzzy_and(const Tensor& a, const Tensor& b) {
  check_truth_range("fuzzy_and", a);
  check_truth_range("fuzzy_and", b);
  return mul(a, b);
}

Tensor fuzzy_or(const Tensor& a, const Tensor& b) {
  check_truth_range("fuzzy_or", a);
  check_truth_range("fuzzy_or", b);
  // Probabilistic sum via the De Morgan form, so or(a,b) equals
  // 1 - and(1-a, 1-b) bitwise.
  return const_minus(1.0, mul(const_minus(1.0, a), const_minus(1.0, b)));
}

Tensor agg_exists(const Tensor& values, double p) {
  check_agg_args("agg_exists", values, p);
  return root_clamped(mean_pow(values, p), p);
}

Tensor agg_forall(const Tensor& values, double p) {
  check_agg_args("agg_forall", values, p);
  return const_minus(1.0, agg_exists(const_minus(1.0, values), p));
}

Tensor sat_aggregate(const Tensor& axiom_truths, double p) {
  if (!axiom_truths.defined() || axiom_truths.size() == 0) {
    throw ConfigError("sat_aggregate: empty knowledge base");
  }
  return agg_forall(axiom_truths, p);
}

Tensor clamp_truth(const Tensor& t, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) {
    throw ParameterError("clamp_truth: eps must lie in (0, 0.5)");
  }
  return clamp(t, eps, 1.0 - eps);
}

}  // namespace fzsl
