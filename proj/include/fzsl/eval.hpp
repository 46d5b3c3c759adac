#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fzsl/data.hpp"
#include "fzsl/embedder.hpp"
#include "fzsl/fuzzy.hpp"

namespace fzsl {

/// Named tensor map persisted as a JSON index plus one raw little-endian
/// float32 blob. Reloading reproduces evaluation outputs bit-exactly at the
/// stored precision.
struct Checkpoint {
  EmbedderParams params;
  Tensor macro_attrs;  // undefined without hierarchy
  FuzzyConfig fuzzy;
  nlohmann::json config_echo;
  int epoch = 0;
};

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Raw bilinear score x^T V a for every class column; x is the pooled
/// feature vector.
std::vector<double> bilinear_scores(std::span<const double> x, const Tensor& v,
                                    const Tensor& attrs);

/// argmax over the given unseen classes of the raw score; ties break toward
/// the lowest class id.
int predict_zsl(std::span<const double> x, const Tensor& v, const Tensor& attrs,
                const std::vector<int>& unseen_ids);

/// Calibrated stacking: argmax over all candidate classes of score minus
/// gamma on seen columns; ties break toward the lowest class id.
int predict_gzsl(std::span<const double> x, const Tensor& v,
                 const Tensor& attrs, const std::vector<int>& candidate_ids,
                 const std::set<int>& seen, double gamma);

struct EvalReport {
  double t1 = 0.0;  // unseen-only per-class mean top-1
  double u = 0.0;   // GZSL per-class mean over unseen classes
  double s = 0.0;   // GZSL per-class mean over seen classes
  double h = 0.0;   // harmonic mean 2US/(U+S)
  double gamma = 0.0;
  std::map<int, double> per_class_gzsl;  // class id -> accuracy
  std::vector<std::string> warnings;
};

/// Per-class top-1 accuracies; classes without test samples are excluded
/// from their mean and reported as warnings.
EvalReport compute_metrics(const std::vector<int>& gzsl_predictions,
                           const std::vector<int>& gzsl_labels,
                           const std::vector<int>& zsl_predictions,
                           const std::vector<int>& zsl_labels,
                           const std::set<int>& seen,
                           const std::set<int>& unseen, double gamma);

/// Full evaluation of a checkpoint on a dataset at one gamma.
EvalReport evaluate(const Checkpoint& cp, const Dataset& ds, double gamma);

struct SweepRow {
  double gamma = 0.0;
  double u = 0.0, s = 0.0, h = 0.0;
  bool best = false;  // argmax-H row
};

std::vector<SweepRow> gamma_sweep(const Checkpoint& cp, const Dataset& ds,
                                  const std::vector<double>& gammas);

void save_report(const EvalReport& report, const std::vector<SweepRow>& sweep,
                 const std::filesystem::path& path);

}  // namespace fzsl
