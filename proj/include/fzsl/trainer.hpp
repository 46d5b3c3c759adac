#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fzsl/data.hpp"
#include "fzsl/embedder.hpp"
#include "fzsl/fol.hpp"
#include "fzsl/fuzzy.hpp"
#include "fzsl/grounding.hpp"

namespace fzsl {

struct TrainConfig {
  double alpha = 20.0;        // hasSameAttribute scale
  int k_mask = 0;             // attributes dropped per masked-predicate draw
  BatchSpec batch;
  int epochs = 50;
  int pretrain_epochs = 0;    // phase 1 length (hidden transform frozen)
  double lr_pretrain = 1e-3;
  double lr_finetune = 1e-3;
  double lr_decay_base = 0.8;
  int lr_decay_every = 10;
  double weight_decay = 5e-4;
  PSchedule p_schedule;
  // Explicit per-axiom switches; axioms not listed are enabled when their
  // prerequisites (hierarchy) are available.
  std::map<std::string, bool> axiom_flags;
  std::uint64_t seed = 0;
  std::size_t embed_hidden_dim = 0;  // 0 = identity head
  double clamp_eps = 1e-4;

  void validate() const;
};

/// Per-batch knowledge base: the evaluated axioms and the mask drawn for
/// this step. Vacuous axioms are excluded from the aggregation.
struct KnowledgeBase {
  struct Entry {
    std::string name;
    FormulaPtr formula;
    Tensor truth;
  };
  std::vector<Entry> entries;
  std::vector<std::string> vacuous;
  FuzzyConfig fuzzy;
  std::vector<double> mask;
};

/// Evaluates every enabled axiom against the environment. Axioms that need a
/// macro grounding raise ConfigError when the table has none.
KnowledgeBase build_kb(GroundingEnv& env,
                       const std::vector<ValidatedAxiom>& axioms,
                       const FuzzyConfig& cfg);

/// 1 - sat_aggregate(axiom truths, p_forall).
Tensor kb_loss(const KnowledgeBase& kb);

/// Adam moments per parameter tensor.
struct AdamState {
  struct Slot {
    std::vector<double> m, v;
  };
  std::vector<Slot> slots;
  long step = 0;
  long skipped = 0;

  void reset(const std::vector<Tensor>& params);
};

/// One Adam update (beta1=0.9, beta2=0.999, eps=1e-8) over the parameters'
/// accumulated gradients; weight_decay*theta is added to each gradient
/// first. A non-finite gradient skips the whole step (logged in state).
void optimizer_step(std::vector<Tensor>& params, AdamState& state, double lr,
                    double weight_decay);

/// Phase 1: constant pretrain rate. Phase 2: finetune rate decayed by
/// lr_decay_base^(epoch div lr_decay_every).
double lr_schedule(int epoch, int phase, const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // mean over the epoch's steps
  double sat = 0.0;
  double p = 0.0;
  double lr = 0.0;
  std::map<std::string, double> axiom_truth;  // mean truth per axiom
};

using TrainHistory = std::vector<EpochRecord>;

struct TrainResult {
  EmbedderParams params;
  Tensor macro_attrs;  // undefined without hierarchy
  TrainHistory history;
  FuzzyConfig final_fuzzy;
  bool diverged = false;
};

/// Full optimization run: per step, sample a batch, rebuild the knowledge
/// base, minimize 1 - sat. Deterministic given config.seed. On divergence
/// (non-finite loss) returns the last epoch-end parameters.
TrainResult train(const Dataset& ds, const std::optional<Hierarchy>& hierarchy,
                  const std::vector<ValidatedAxiom>& axioms,
                  const TrainConfig& config);

/// Build a grounding environment for dataset rows under the given
/// parameters; used by the trainer and by evaluation/introspection paths.
GroundingEnv make_env(const Dataset& ds,
                      const std::optional<Hierarchy>& hierarchy,
                      const EmbedderParams& params, const Tensor& macro_attrs,
                      const std::vector<std::int32_t>& rows,
                      const std::vector<double>& mask, double alpha);

// Config file IO (JSON object; keys are the TrainConfig fields plus
// dataset/axioms/hierarchy paths).
struct TrainSetup {
  TrainConfig config;
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> axioms;     // default: built-ins
  std::optional<std::filesystem::path> hierarchy;  // default: manifest's
};
TrainSetup load_train_setup(const std::filesystem::path& config_path);

void save_history(const TrainHistory& h, const std::filesystem::path& path);

}  // namespace fzsl
