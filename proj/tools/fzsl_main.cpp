// fzsl command line: synthetic data generation, training, evaluation,
// knowledge-base introspection, gradient checking, axiom validation.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fzsl/data.hpp"
#include "fzsl/embedder.hpp"
#include "fzsl/eval.hpp"
#include "fzsl/fol.hpp"
#include "fzsl/grounding.hpp"
#include "fzsl/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<fzsl::Axiom> load_axioms(const std::optional<fs::path>& path) {
  if (!path) return fzsl::parse_axioms(fzsl::builtin_axioms_text());
  std::ifstream f(*path);
  if (!f) throw fzsl::DataError("missing axiom file: " + path->string());
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return fzsl::parse_axioms(text);
}

json config_echo_json(const fzsl::TrainConfig& c) {
  json j;
  j["alpha"] = c.alpha;
  j["k_mask"] = c.k_mask;
  j["n_pos"] = c.batch.n_pos;
  j["n_neg"] = c.batch.n_neg;
  j["epochs"] = c.epochs;
  j["pretrain_epochs"] = c.pretrain_epochs;
  j["lr_pretrain"] = c.lr_pretrain;
  j["lr_finetune"] = c.lr_finetune;
  j["lr_decay_base"] = c.lr_decay_base;
  j["lr_decay_every"] = c.lr_decay_every;
  j["weight_decay"] = c.weight_decay;
  j["seed"] = c.seed;
  j["embed_hidden_dim"] = c.embed_hidden_dim;
  j["clamp_eps"] = c.clamp_eps;
  json sched;
  sched["initial_p"] = c.p_schedule.initial_p;
  sched["mode"] = c.p_schedule.mode == fzsl::PSchedule::Mode::every_k_epochs
                      ? "every_k_epochs"
                      : "at_epochs";
  sched["step"] = c.p_schedule.step;
  sched["k"] = c.p_schedule.every_k;
  sched["epochs"] = c.p_schedule.epochs;
  sched["cap"] = c.p_schedule.cap;
  j["p_schedule"] = std::move(sched);
  if (!c.axiom_flags.empty()) j["axiom_flags"] = c.axiom_flags;
  return j;
}

int cmd_gen_data(const fs::path& out, int seen, int unseen, int attr_dim,
                 int feat_dim, int per_class, double noise, std::uint64_t seed,
                 int macros) {
  fzsl::Dataset ds = fzsl::generate_synthetic(
      seen, unseen, static_cast<std::size_t>(attr_dim),
      static_cast<std::size_t>(feat_dim), per_class, noise, seed);
  if (macros > 0) {
    fzsl::Hierarchy h;
    for (int q = 0; q < macros; ++q) {
      h.macro_names.push_back("macro" + std::to_string(q));
    }
    for (std::size_t cl = 0; cl < ds.c; ++cl) {
      h.class_to_macro[static_cast<int>(cl)] = static_cast<int>(cl) % macros;
    }
    fs::create_directories(out);
    fzsl::save_hierarchy(h, out / "hierarchy.json");
    ds.hierarchy_file = out / "hierarchy.json";
  }
  fzsl::save_dataset(ds, out);
  std::cout << "wrote " << (out / "manifest.json").string() << " (n=" << ds.n
            << ", seen=" << ds.seen.size() << ", unseen=" << ds.unseen.size()
            << ")\n";
  return 0;
}

int cmd_train(const fs::path& config_path, const fs::path& out) {
  fzsl::TrainSetup setup = fzsl::load_train_setup(config_path);
  fzsl::Dataset ds = fzsl::load_dataset(setup.dataset);
  std::optional<fs::path> hpath = setup.hierarchy;
  if (!hpath && ds.hierarchy_file) hpath = ds.hierarchy_file;
  std::optional<fzsl::Hierarchy> hierarchy;
  if (hpath) hierarchy = fzsl::load_hierarchy(*hpath, ds);

  std::vector<fzsl::Axiom> axioms = load_axioms(setup.axioms);
  std::vector<fzsl::ValidatedAxiom> validated =
      fzsl::validate_all(axioms, fzsl::builtin_signature());

  fzsl::TrainResult result = fzsl::train(ds, hierarchy, validated, setup.config);

  fs::create_directories(out);
  fzsl::Checkpoint cp;
  cp.params = result.params;
  cp.macro_attrs = result.macro_attrs;
  cp.fuzzy = result.final_fuzzy;
  cp.config_echo = config_echo_json(setup.config);
  cp.epoch = result.history.empty() ? 0 : result.history.back().epoch + 1;
  fzsl::save_checkpoint(cp, out);
  fzsl::save_history(result.history, out / "history.json");

  if (!result.history.empty()) {
    const auto& last = result.history.back();
    std::printf("epoch %d  loss %.6f  sat %.6f  p %.1f\n", last.epoch,
                last.loss, last.sat, last.p);
  }
  if (result.diverged) {
    std::cerr << "training diverged; checkpoint holds the last stable "
                 "parameters\n";
  }
  std::cout << "wrote checkpoint to " << out.string() << "\n";
  return 0;
}

int cmd_eval(const fs::path& cp_dir, const fs::path& data_dir, double gamma,
             const std::vector<double>& sweep) {
  fzsl::Checkpoint cp = fzsl::load_checkpoint(cp_dir);
  fzsl::Dataset ds = fzsl::load_dataset(data_dir / "manifest.json");
  fzsl::EvalReport report = fzsl::evaluate(cp, ds, gamma);
  std::vector<fzsl::SweepRow> rows;
  if (!sweep.empty()) rows = fzsl::gamma_sweep(cp, ds, sweep);
  fzsl::save_report(report, rows, cp_dir / "report.json");

  std::printf("%-8s %-8s %-8s %-8s %-8s\n", "gamma", "U", "S", "H", "T1");
  std::printf("%-8.3f %-8.4f %-8.4f %-8.4f %-8.4f\n", report.gamma, report.u,
              report.s, report.h, report.t1);
  if (!rows.empty()) {
    std::printf("\nsweep:\n%-8s %-8s %-8s %-8s\n", "gamma", "U", "S", "H");
    for (const auto& r : rows) {
      std::printf("%-8.3f %-8.4f %-8.4f %-8.4f%s\n", r.gamma, r.u, r.s, r.h,
                  r.best ? "  <- best H" : "");
    }
  }
  for (const std::string& w : report.warnings) {
    std::cerr << "warning: " << w << "\n";
  }
  std::cout << "wrote " << (cp_dir / "report.json").string() << "\n";
  return 0;
}

int cmd_sat(const fs::path& cp_dir, const fs::path& data_dir,
            const std::optional<fs::path>& axioms_path, std::uint64_t seed) {
  fzsl::Checkpoint cp = fzsl::load_checkpoint(cp_dir);
  fzsl::Dataset ds = fzsl::load_dataset(data_dir / "manifest.json");
  std::optional<fzsl::Hierarchy> hierarchy;
  if (ds.hierarchy_file) hierarchy = fzsl::load_hierarchy(*ds.hierarchy_file, ds);

  std::vector<fzsl::Axiom> axioms = load_axioms(axioms_path);
  std::vector<fzsl::ValidatedAxiom> validated =
      fzsl::validate_all(axioms, fzsl::builtin_signature());
  std::vector<fzsl::ValidatedAxiom> active;
  for (const auto& ax : validated) {
    if (fzsl::mentions_macro(*ax.axiom.formula, fzsl::builtin_signature()) &&
        !cp.macro_attrs.defined()) {
      std::cerr << "skipping '" << ax.axiom.name
                << "': checkpoint has no macro attributes\n";
      continue;
    }
    active.push_back(ax);
  }
  if (active.empty()) throw fzsl::ConfigError("sat: no evaluable axioms");

  int k_mask = cp.config_echo.is_object() ? cp.config_echo.value("k_mask", 0) : 0;
  double alpha =
      cp.config_echo.is_object() ? cp.config_echo.value("alpha", 1.0) : 1.0;
  fzsl::Rng rng(seed);
  std::vector<double> mask =
      fzsl::make_mask(ds.m, static_cast<std::size_t>(k_mask), rng);

  fzsl::GroundingEnv env = fzsl::make_env(ds, hierarchy, cp.params,
                                          cp.macro_attrs, ds.train_idx, mask,
                                          alpha);
  fzsl::KnowledgeBase kb = fzsl::build_kb(env, active, cp.fuzzy);
  for (const auto& e : kb.entries) {
    std::printf("%-12s %.6f\n", e.name.c_str(), e.truth.value());
  }
  for (const std::string& name : kb.vacuous) {
    std::printf("%-12s vacuous\n", name.c_str());
  }
  fzsl::Tensor loss = fzsl::kb_loss(kb);
  std::printf("%-12s %.6f\n", "sat", 1.0 - loss.value());
  return 0;
}

int cmd_parse(const fs::path& axioms_path) {
  std::ifstream f(axioms_path);
  if (!f) throw fzsl::DataError("missing axiom file: " + axioms_path.string());
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  std::vector<fzsl::Axiom> axioms = fzsl::parse_axioms(text);
  bool ok = true;
  for (const fzsl::Axiom& a : axioms) {
    auto diags = fzsl::validate(a, fzsl::builtin_signature());
    if (diags.empty()) {
      std::cout << fzsl::format_axiom(a) << "\n";
    } else {
      ok = false;
      for (const auto& d : diags) {
        std::cerr << axioms_path.string() << ":" << d.pos.line << ":"
                  << d.pos.col << ": " << a.name << ": " << d.message << "\n";
      }
    }
  }
  return ok ? 0 : 2;
}

// Gradient checks over every differentiable primitive plus a small
// all-axioms knowledge base.
int cmd_check_grad(std::uint64_t seed) {
  using namespace fzsl;
  Rng rng(seed);
  double eps = 1e-5;
  double worst = 0.0;
  auto report = [&](const char* name, double err) {
    std::printf("%-24s %.3e\n", name, err);
    worst = std::max(worst, err);
  };
  auto randv = [&rng](std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = scale * rng.normal();
    return v;
  };

  {
    Tensor a = Tensor::from_data({2, 3}, randv(6), true);
    Tensor b = Tensor::from_data({3, 2}, randv(6), true);
    report("matmul", grad_check([&] { return sum(matmul(a, b)); }, {a, b}, eps));
    report("softmax_rows", grad_check(
        [&] {
          Tensor s = softmax_rows(matmul(a, b));
          return sum(mul(s, s));
        },
        {a, b}, eps));
  }
  {
    Tensor x = Tensor::from_data({4}, randv(4), true);
    report("sigmoid", grad_check([&] { return sum(sigmoid(x)); }, {x}, eps));
    report("tanh", grad_check([&] { return sum(tanh(x)); }, {x}, eps));
  }
  {
    Tensor u = Tensor::from_data({5}, randv(5), true);
    Tensor v = Tensor::from_data({5}, randv(5), true);
    report("cosine_similarity",
           grad_check([&] { return cosine_similarity(u, v); }, {u, v}, eps));
  }
  {
    Tensor g = Tensor::from_data({2, 2, 3}, randv(12), true);
    report("mean_pool", grad_check([&] { return sum(mean_pool(g)); }, {g}, eps));
  }
  {
    std::vector<double> pos(6);
    for (double& x : pos) x = 0.05 + 0.9 * rng.uniform();
    Tensor t = Tensor::from_data({6}, pos, true);
    report("pow_clamped",
           grad_check([&] { return sum(pow_clamped(t, 2.5)); }, {t}, eps));
    report("root_clamped",
           grad_check([&] { return sum(root_clamped(t, 3.0)); }, {t}, eps));
    report("agg_exists", grad_check([&] { return agg_exists(t, 4.0); }, {t}, eps));
    report("agg_forall", grad_check([&] { return agg_forall(t, 4.0); }, {t}, eps));
  }

  // Four-sample knowledge base with every axiom enabled.
  {
    Dataset ds = generate_synthetic(3, 1, 6, 5, 4, 0.05, seed + 17);
    Hierarchy h;
    h.macro_names = {"m0", "m1"};
    for (std::size_t cl = 0; cl < ds.c; ++cl) {
      h.class_to_macro[static_cast<int>(cl)] = static_cast<int>(cl) % 2;
    }
    EmbedderParams params = init_params(ds.b_in, ds.b_in, ds.m, seed + 1);
    std::vector<double> macro(ds.m * 2);
    for (double& x : macro) x = 0.05 * rng.normal();
    Tensor macro_attrs = Tensor::from_data({ds.m, 2}, macro, true);

    std::vector<std::int32_t> rows;
    std::map<int, int> taken;
    for (std::int32_t i : ds.train_idx) {
      int cl = ds.labels[static_cast<std::size_t>(i)];
      if (taken[cl] < 2 && rows.size() < 4) {
        rows.push_back(i);
        ++taken[cl];
      }
    }
    Rng mask_rng(seed + 2);
    std::vector<double> mask = make_mask(ds.m, 1, mask_rng);
    auto axioms = validate_all(parse_axioms(builtin_axioms_text()),
                               builtin_signature());
    FuzzyConfig cfg;
    cfg.p_forall = 2.0;
    cfg.p_exists = 2.0;
    auto loss_fn = [&] {
      std::optional<Hierarchy> hier = h;
      GroundingEnv env = make_env(ds, hier, params, macro_attrs, rows, mask,
                                  1.0);
      KnowledgeBase kb = build_kb(env, axioms, cfg);
      return kb_loss(kb);
    };
    report("kb_loss", grad_check(loss_fn, {params.V, macro_attrs}, eps));
  }

  std::printf("%-24s %.3e\n", "max", worst);
  return worst <= 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentiable fuzzy logic engine for zero-shot classification"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  std::string gen_out;
  int gen_seen = 8, gen_unseen = 4, gen_attr = 16, gen_feat = 32, gen_per = 25;
  int gen_macros = 0;
  double gen_noise = 0.1;
  std::uint64_t gen_seed = 7;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--seen", gen_seen, "seen classes");
  gen->add_option("--unseen", gen_unseen, "unseen classes");
  gen->add_option("--attr-dim", gen_attr, "attribute dimension M");
  gen->add_option("--feat-dim", gen_feat, "feature dimension B");
  gen->add_option("--per-class", gen_per, "samples per class");
  gen->add_option("--noise", gen_noise, "feature noise stddev");
  gen->add_option("--seed", gen_seed, "rng seed");
  gen->add_option("--macros", gen_macros,
                  "also write a hierarchy with this many macroclasses");

  // train
  auto* tr = app.add_subcommand("train", "train on a dataset");
  std::string tr_config, tr_out;
  tr->add_option("--config", tr_config, "JSON config file")->required();
  tr->add_option("--out", tr_out, "output directory")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_cp, ev_data;
  double ev_gamma = 0.0;
  std::string ev_sweep;
  ev->add_option("--checkpoint", ev_cp, "checkpoint directory")->required();
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--gamma", ev_gamma, "calibrated stacking offset");
  ev->add_option("--sweep", ev_sweep, "comma-separated gamma values");

  // sat
  auto* sat = app.add_subcommand("sat", "print per-axiom truth values");
  std::string sat_cp, sat_data, sat_axioms;
  std::uint64_t sat_seed = 0;
  sat->add_option("--checkpoint", sat_cp, "checkpoint directory")->required();
  sat->add_option("--data", sat_data, "dataset directory")->required();
  sat->add_option("--axioms", sat_axioms, "axiom file (default: built-ins)");
  sat->add_option("--seed", sat_seed, "mask seed");

  // check-grad
  auto* cg = app.add_subcommand("check-grad", "finite-difference suite");
  std::uint64_t cg_seed = 0;
  cg->add_option("--seed", cg_seed, "rng seed");

  // parse
  auto* pr = app.add_subcommand("parse", "validate and pretty-print axioms");
  std::string pr_axioms;
  pr->add_option("--axioms", pr_axioms, "axiom file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_gen_data(gen_out, gen_seen, gen_unseen, gen_attr, gen_feat,
                          gen_per, gen_noise, gen_seed, gen_macros);
    }
    if (tr->parsed()) return cmd_train(tr_config, tr_out);
    if (ev->parsed()) {
      std::vector<double> sweep;
      if (!ev_sweep.empty()) {
        std::stringstream ss(ev_sweep);
        std::string item;
        while (std::getline(ss, item, ',')) sweep.push_back(std::stod(item));
      }
      return cmd_eval(ev_cp, ev_data, ev_gamma, sweep);
    }
    if (sat->parsed()) {
      std::optional<fs::path> ax;
      if (!sat_axioms.empty()) ax = sat_axioms;
      return cmd_sat(sat_cp, sat_data, ax, sat_seed);
    }
    if (cg->parsed()) return cmd_check_grad(cg_seed);
    if (pr->parsed()) return cmd_parse(pr_axioms);
  } catch (const fzsl::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fzsl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
