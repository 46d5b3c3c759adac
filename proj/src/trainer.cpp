#include "fzsl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include <json.hpp>

namespace fzsl {

using nlohmann::json;

void TrainConfig::validate() const {
  if (alpha <= 0.0) throw ParameterError("TrainConfig: alpha must be > 0");
  if (k_mask < 0) throw ParameterError("TrainConfig: k_mask must be >= 0");
  if (epochs < 0) throw ParameterError("TrainConfig: epochs must be >= 0");
  if (pretrain_epochs < 0) {
    throw ParameterError("TrainConfig: pretrain_epochs must be >= 0");
  }
  if (lr_pretrain <= 0.0 || lr_finetune <= 0.0) {
    throw ParameterError("TrainConfig: learning rates must be positive");
  }
  if (lr_decay_base <= 0.0 || lr_decay_every < 1) {
    throw ParameterError("TrainConfig: bad lr decay settings");
  }
  if (weight_decay < 0.0) {
    throw ParameterError("TrainConfig: weight_decay must be >= 0");
  }
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) {
    throw ParameterError("TrainConfig: clamp_eps must lie in (0, 0.5)");
  }
  if (batch.n_pos < 1 || batch.n_neg < 0) {
    throw ParameterError("TrainConfig: batch spec needs n_pos >= 1, n_neg >= 0");
  }
  p_schedule.validate();
}

// ---- knowledge base --------------------------------------------------------------

KnowledgeBase build_kb(GroundingEnv& env,
                       const std::vector<ValidatedAxiom>& axioms,
                       const FuzzyConfig& cfg) {
  if (axioms.empty()) throw ConfigError("build_kb: no axioms enabled");
  KnowledgeBase kb;
  kb.fuzzy = cfg;
  kb.mask = env.table().mask;
  for (const ValidatedAxiom& ax : axioms) {
    EvalResult r = eval_formula(ax, env, cfg);
    if (r.vacuous) {
      kb.vacuous.push_back(ax.axiom.name);
    } else {
      kb.entries.push_back({ax.axiom.name, ax.axiom.formula, r.truth});
    }
  }
  return kb;
}

Tensor kb_loss(const KnowledgeBase& kb) {
  if (kb.entries.empty()) {
    throw ConfigError("kb_loss: every axiom was vacuous; nothing to optimize");
  }
  std::vector<Tensor> truths;
  truths.reserve(kb.entries.size());
  for (const auto& e : kb.entries) truths.push_back(e.truth);
  Tensor stacked = clamp_truth(stack(truths), kb.fuzzy.clamp_eps);
  return const_minus(1.0, sat_aggregate(stacked, kb.fuzzy.p_forall));
}

// ---- optimizer -------------------------------------------------------------------

void AdamState::reset(const std::vector<Tensor>& params) {
  slots.assign(params.size(), {});
  for (std::size_t i = 0; i < params.size(); ++i) {
    slots[i].m.assign(params[i].size(), 0.0);
    slots[i].v.assign(params[i].size(), 0.0);
  }
  step = 0;
  skipped = 0;
}

void optimizer_step(std::vector<Tensor>& params, AdamState& state, double lr,
                    double weight_decay) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  if (state.slots.size() != params.size()) state.reset(params);

  // Effective gradients with the L2 term folded in; skip the whole step if
  // anything is non-finite.
  std::vector<std::vector<double>> grads(params.size());
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto g = params[pi].grad();
    auto x = params[pi].data();
    grads[pi].resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      double gi = g[i] + weight_decay * x[i];
      if (!std::isfinite(gi)) {
        ++state.skipped;
        if (state.skipped == 1) {
          std::cerr << "optimizer_step: non-finite gradient, step skipped\n";
        }
        return;
      }
      grads[pi][i] = gi;
    }
  }

  ++state.step;
  double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& slot = state.slots[pi];
    auto& x = params[pi].raw_data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      double g = grads[pi][i];
      slot.m[i] = kBeta1 * slot.m[i] + (1.0 - kBeta1) * g;
      slot.v[i] = kBeta2 * slot.v[i] + (1.0 - kBeta2) * g * g;
      double mhat = slot.m[i] / bc1;
      double vhat = slot.v[i] / bc2;
      x[i] -= lr * mhat / (std::sqrt(vhat) + kEps);
    }
  }
}

double lr_schedule(int epoch, int phase, const TrainConfig& config) {
  if (epoch < 0) throw ParameterError("lr_schedule: epoch must be >= 0");
  if (phase == 1) return config.lr_pretrain;
  int k = epoch / config.lr_decay_every;
  return config.lr_finetune * std::pow(config.lr_decay_base, k);
}

// ---- training loop ---------------------------------------------------------------

namespace {

/// Clamp the global gradient norm at 10; aggregator exponents can spike
/// gradients early in training.
void clip_gradients(std::vector<Tensor>& params) {
  constexpr double kMaxNorm = 10.0;
  double sq = 0.0;
  for (Tensor& p : params) {
    for (double g : p.grad()) sq += g * g;
  }
  double norm = std::sqrt(sq);
  if (norm <= kMaxNorm || norm == 0.0) return;
  double s = kMaxNorm / norm;
  for (Tensor& p : params) {
    for (double& g : p.raw_grad()) g *= s;
  }
}

std::vector<int> macro_labels_for(const Dataset& ds,
                                  const std::optional<Hierarchy>& hierarchy,
                                  const std::vector<std::int32_t>& rows) {
  std::vector<int> out;
  if (!hierarchy) return out;
  out.reserve(rows.size());
  for (std::int32_t r : rows) {
    out.push_back(
        hierarchy->class_to_macro.at(ds.labels[static_cast<std::size_t>(r)]));
  }
  return out;
}

std::vector<double> snapshot(const Tensor& t) {
  if (!t.defined()) return {};
  return std::vector<double>(t.data().begin(), t.data().end());
}

void restore(Tensor& t, const std::vector<double>& snap) {
  if (!t.defined()) return;
  t.raw_data() = snap;
}

}  // namespace

GroundingEnv make_env(const Dataset& ds,
                      const std::optional<Hierarchy>& hierarchy,
                      const EmbedderParams& params, const Tensor& macro_attrs,
                      const std::vector<std::int32_t>& rows,
                      const std::vector<double>& mask, double alpha) {
  Tensor features = ds.feature_rows(rows);
  Tensor pooled = embed_batch(params, features);
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (std::int32_t r : rows) {
    labels.push_back(ds.labels[static_cast<std::size_t>(r)]);
  }
  AttributeTable table;
  table.attrs = ds.attribute_matrix();
  table.macro = macro_attrs;
  table.mask = mask;
  return GroundingEnv(pooled, std::move(labels),
                      macro_labels_for(ds, hierarchy, rows), params.V,
                      std::move(table), ds.sorted_seen(), alpha);
}

TrainResult train(const Dataset& ds, const std::optional<Hierarchy>& hierarchy,
                  const std::vector<ValidatedAxiom>& axioms,
                  const TrainConfig& config) {
  config.validate();
  ds.validate_invariants();
  if (ds.train_idx.empty()) throw ConfigError("train: empty train split");

  // Axiom selection: explicit flags win; otherwise hierarchy axioms are
  // enabled only when a hierarchy is present.
  std::vector<ValidatedAxiom> active;
  for (const ValidatedAxiom& ax : axioms) {
    bool needs_macro = mentions_macro(*ax.axiom.formula, builtin_signature());
    auto it = config.axiom_flags.find(ax.axiom.name);
    bool enabled = (it != config.axiom_flags.end())
                       ? it->second
                       : (!needs_macro || hierarchy.has_value());
    if (!enabled) continue;
    if (needs_macro && !hierarchy) {
      throw ConfigError("train: axiom '" + ax.axiom.name +
                        "' needs a class hierarchy but none is configured");
    }
    active.push_back(ax);
  }
  if (active.empty()) throw ConfigError("train: no axioms enabled");

  Rng master(config.seed);
  Rng init_rng = master.fork(0);
  Rng batch_rng = master.fork(1);
  Rng mask_rng = master.fork(2);

  TrainResult result;
  bool hidden = config.embed_hidden_dim > 0;
  std::size_t b = hidden ? config.embed_hidden_dim : ds.b_in;
  result.params =
      init_params(ds.b_in, b, ds.m, init_rng.next_u64(), hidden);
  if (hierarchy) {
    // Near-zero init keeps the initial macro softmax close to uniform.
    std::size_t q = hierarchy->n_macros();
    std::vector<double> macro(ds.m * q);
    Rng macro_rng = master.fork(3);
    for (double& v : macro) v = macro_rng.normal(0.0, 0.01);
    result.macro_attrs = Tensor::from_data({ds.m, q}, std::move(macro), true);
  }

  const int batch_size = config.batch.n_pos + config.batch.n_neg;
  const int steps_per_epoch = static_cast<int>(
      (ds.train_idx.size() + static_cast<std::size_t>(batch_size) - 1) /
      static_cast<std::size_t>(batch_size));

  AdamState adam;
  FuzzyConfig fuzzy;
  fuzzy.clamp_eps = config.clamp_eps;
  result.final_fuzzy = fuzzy;

  std::vector<double> good_v = snapshot(result.params.V);
  std::vector<double> good_hw = snapshot(result.params.hidden_w);
  std::vector<double> good_hb = snapshot(result.params.hidden_b);
  std::vector<double> good_macro = snapshot(result.macro_attrs);

  int last_phase = 0;
  std::vector<Tensor> trainable;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double p = schedule_p(epoch, config.p_schedule);
    fuzzy.p_forall = p;
    fuzzy.p_exists = p;
    int phase = epoch < config.pretrain_epochs ? 1 : 2;
    double lr = lr_schedule(epoch, phase, config);
    result.params.train_hidden = (phase == 2);

    if (phase != last_phase) {
      // The trainable set changes at the phase boundary; moments restart.
      trainable = {result.params.V};
      if (result.macro_attrs.defined()) {
        trainable.push_back(result.macro_attrs);
      }
      if (result.params.has_hidden() && result.params.train_hidden) {
        trainable.push_back(result.params.hidden_w);
        trainable.push_back(result.params.hidden_b);
      }
      adam.reset(trainable);
      last_phase = phase;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.p = p;
    rec.lr = lr;
    std::map<std::string, double> truth_sums;
    std::map<std::string, int> truth_counts;
    bool aborted = false;

    for (int step = 0; step < steps_per_epoch; ++step) {
      Batch batch = sample_batch(ds, config.batch, batch_rng);
      std::vector<double> mask =
          make_mask(ds.m, static_cast<std::size_t>(config.k_mask), mask_rng);
      GroundingEnv env =
          make_env(ds, hierarchy, result.params, result.macro_attrs,
                   batch.indices, mask, config.alpha);
      KnowledgeBase kb = build_kb(env, active, fuzzy);
      Tensor loss = kb_loss(kb);
      double loss_v = loss.value();
      if (!std::isfinite(loss_v)) {
        std::cerr << "train: non-finite loss at epoch " << epoch
                  << ", restoring last epoch-end parameters\n";
        restore(result.params.V, good_v);
        restore(result.params.hidden_w, good_hw);
        restore(result.params.hidden_b, good_hb);
        restore(result.macro_attrs, good_macro);
        result.diverged = true;
        aborted = true;
        break;
      }
      rec.loss += loss_v;
      rec.sat += 1.0 - loss_v;
      for (const auto& e : kb.entries) {
        truth_sums[e.name] += e.truth.value();
        truth_counts[e.name] += 1;
      }

      for (Tensor& t : trainable) t.zero_grad();
      backward(loss);
      clip_gradients(trainable);
      optimizer_step(trainable, adam, lr, config.weight_decay);
    }
    if (aborted) break;

    rec.loss /= steps_per_epoch;
    rec.sat /= steps_per_epoch;
    for (const auto& [name, total] : truth_sums) {
      rec.axiom_truth[name] = total / truth_counts[name];
    }
    result.history.push_back(std::move(rec));

    good_v = snapshot(result.params.V);
    good_hw = snapshot(result.params.hidden_w);
    good_hb = snapshot(result.params.hidden_b);
    good_macro = snapshot(result.macro_attrs);
  }

  result.final_fuzzy = fuzzy;
  return result;
}

// ---- config / history IO ---------------------------------------------------------

namespace {

PSchedule schedule_from_json(const json& j) {
  PSchedule s;
  if (j.contains("initial_p")) s.initial_p = j.at("initial_p").get<double>();
  std::string mode = j.value("mode", "every_k_epochs");
  if (mode == "every_k_epochs") {
    s.mode = PSchedule::Mode::every_k_epochs;
    s.every_k = j.value("k", s.every_k);
  } else if (mode == "at_epochs") {
    s.mode = PSchedule::Mode::at_epochs;
    s.epochs = j.at("epochs").get<std::vector<int>>();
  } else {
    throw ConfigError("p_schedule.mode must be every_k_epochs or at_epochs");
  }
  s.step = j.value("step", s.step);
  s.cap = j.value("cap", s.cap);
  s.validate();
  return s;
}

}  // namespace

TrainSetup load_train_setup(const std::filesystem::path& config_path) {
  std::ifstream f(config_path);
  if (!f) throw ConfigError("missing config file: " + config_path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + config_path.string() + ": " +
                      e.what());
  }
  TrainSetup setup;
  TrainConfig& c = setup.config;
  try {
    c.alpha = j.value("alpha", c.alpha);
    c.k_mask = j.value("k_mask", c.k_mask);
    c.batch.n_pos = j.value("n_pos", c.batch.n_pos);
    c.batch.n_neg = j.value("n_neg", c.batch.n_neg);
    c.epochs = j.value("epochs", c.epochs);
    c.pretrain_epochs = j.value("pretrain_epochs", c.pretrain_epochs);
    c.lr_pretrain = j.value("lr_pretrain", c.lr_pretrain);
    c.lr_finetune = j.value("lr_finetune", c.lr_finetune);
    c.lr_decay_base = j.value("lr_decay_base", c.lr_decay_base);
    c.lr_decay_every = j.value("lr_decay_every", c.lr_decay_every);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.seed = j.value("seed", c.seed);
    c.embed_hidden_dim = j.value("embed_hidden_dim", c.embed_hidden_dim);
    c.clamp_eps = j.value("clamp_eps", c.clamp_eps);
    if (j.contains("p_schedule")) {
      c.p_schedule = schedule_from_json(j.at("p_schedule"));
    }
    if (j.contains("axiom_flags")) {
      for (auto it = j.at("axiom_flags").begin();
           it != j.at("axiom_flags").end(); ++it) {
        c.axiom_flags[it.key()] = it.value().get<bool>();
      }
    }
    if (!j.contains("dataset")) {
      throw ConfigError("config: missing 'dataset' path");
    }
    std::filesystem::path base = config_path.parent_path();
    setup.dataset = base / j.at("dataset").get<std::string>();
    if (j.contains("axioms") && !j.at("axioms").is_null()) {
      setup.axioms = base / j.at("axioms").get<std::string>();
    }
    if (j.contains("hierarchy") && !j.at("hierarchy").is_null()) {
      setup.hierarchy = base / j.at("hierarchy").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ConfigError("config field error: " + std::string(e.what()));
  }
  c.validate();
  return setup;
}

void save_history(const TrainHistory& h, const std::filesystem::path& path) {
  json arr = json::array();
  for (const EpochRecord& r : h) {
    json rec;
    rec["epoch"] = r.epoch;
    rec["loss"] = r.loss;
    rec["sat"] = r.sat;
    rec["p"] = r.p;
    rec["lr"] = r.lr;
    rec["axiom_truth"] = r.axiom_truth;
    arr.push_back(std::move(rec));
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write history: " + path.string());
  f << arr.dump(2) << "\n";
}

}  // namespace fzsl
