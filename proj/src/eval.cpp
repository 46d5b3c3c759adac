#include "fzsl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace fzsl {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- checkpoint ------------------------------------------------------------------

namespace {

void append_entry(json& index, std::vector<float>& blob, const std::string& name,
                  const Tensor& t) {
  if (!t.defined()) return;
  json e;
  e["name"] = name;
  e["shape"] = t.shape();
  e["offset"] = blob.size();
  for (double v : t.data()) blob.push_back(static_cast<float>(v));
  index.push_back(std::move(e));
}

Tensor take_entry(const json& index, const std::vector<float>& blob,
                  const std::string& name, bool trainable) {
  for (const json& e : index) {
    if (e.at("name").get<std::string>() != name) continue;
    Shape shape = e.at("shape").get<Shape>();
    std::size_t offset = e.at("offset").get<std::size_t>();
    std::size_t count = shape_numel(shape);
    if (offset + count > blob.size()) {
      throw DataError("checkpoint: tensor '" + name + "' overruns the blob");
    }
    std::vector<double> data(blob.begin() + static_cast<std::ptrdiff_t>(offset),
                             blob.begin() +
                                 static_cast<std::ptrdiff_t>(offset + count));
    return Tensor::from_data(std::move(shape), std::move(data), trainable);
  }
  return Tensor();
}

}  // namespace

void save_checkpoint(const Checkpoint& cp, const fs::path& dir) {
  fs::create_directories(dir);
  json index = json::array();
  std::vector<float> blob;
  append_entry(index, blob, "V", cp.params.V);
  append_entry(index, blob, "hidden_w", cp.params.hidden_w);
  append_entry(index, blob, "hidden_b", cp.params.hidden_b);
  append_entry(index, blob, "macro_attrs", cp.macro_attrs);
  json j;
  j["tensors"] = std::move(index);
  j["blob_file"] = "checkpoint.bin";
  j["epoch"] = cp.epoch;
  j["fuzzy"] = {{"p_forall", cp.fuzzy.p_forall},
                {"p_exists", cp.fuzzy.p_exists},
                {"clamp_eps", cp.fuzzy.clamp_eps}};
  j["config"] = cp.config_echo;
  write_f32(dir / "checkpoint.bin", blob);
  std::ofstream f(dir / "checkpoint.json", std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint in " + dir.string());
  f << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const fs::path& dir) {
  fs::path index_path = dir / "checkpoint.json";
  std::ifstream f(index_path);
  if (!f) throw DataError("missing checkpoint: " + index_path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw DataError("checkpoint parse error: " + std::string(e.what()));
  }
  std::size_t total = 0;
  for (const json& e : j.at("tensors")) {
    total += shape_numel(e.at("shape").get<Shape>());
  }
  std::vector<float> blob =
      read_f32(dir / j.at("blob_file").get<std::string>(), total);
  Checkpoint cp;
  cp.params.V = take_entry(j.at("tensors"), blob, "V", true);
  if (!cp.params.V.defined()) {
    throw DataError("checkpoint: missing projection tensor V");
  }
  cp.params.hidden_w = take_entry(j.at("tensors"), blob, "hidden_w", true);
  cp.params.hidden_b = take_entry(j.at("tensors"), blob, "hidden_b", true);
  cp.macro_attrs = take_entry(j.at("tensors"), blob, "macro_attrs", true);
  cp.epoch = j.value("epoch", 0);
  if (j.contains("fuzzy")) {
    cp.fuzzy.p_forall = j["fuzzy"].value("p_forall", cp.fuzzy.p_forall);
    cp.fuzzy.p_exists = j["fuzzy"].value("p_exists", cp.fuzzy.p_exists);
    cp.fuzzy.clamp_eps = j["fuzzy"].value("clamp_eps", cp.fuzzy.clamp_eps);
  }
  if (j.contains("config")) cp.config_echo = j["config"];
  return cp;
}

// ---- prediction ------------------------------------------------------------------

std::vector<double> bilinear_scores(std::span<const double> x, const Tensor& v,
                                    const Tensor& attrs) {
  const Shape& vs = v.shape();
  const Shape& as = attrs.shape();
  if (vs.size() != 2 || as.size() != 2 || vs[1] != as[0] ||
      x.size() != vs[0]) {
    throw DimensionError("bilinear_scores: x" +
                         std::to_string(x.size()) + ", V" + shape_str(vs) +
                         ", attrs" + shape_str(as) + " do not conform");
  }
  std::size_t b = vs[0], m = vs[1], c = as[1];
  std::vector<double> proj(m, 0.0);  // V^T x
  auto vd = v.data();
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < m; ++j) proj[j] += vd[i * m + j] * x[i];
  }
  std::vector<double> scores(c, 0.0);
  auto ad = attrs.data();
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t cl = 0; cl < c; ++cl) {
      scores[cl] += proj[j] * ad[j * c + cl];
    }
  }
  return scores;
}

int predict_zsl(std::span<const double> x, const Tensor& v, const Tensor& attrs,
                const std::vector<int>& unseen_ids) {
  if (unseen_ids.empty()) {
    throw ParameterError("predict_zsl: need at least one unseen class");
  }
  std::vector<double> scores = bilinear_scores(x, v, attrs);
  int best = -1;
  double best_score = 0.0;
  for (int id : unseen_ids) {
    double s = scores[static_cast<std::size_t>(id)];
    if (best < 0 || s > best_score || (s == best_score && id < best)) {
      best = id;
      best_score = s;
    }
  }
  return best;
}

int predict_gzsl(std::span<const double> x, const Tensor& v,
                 const Tensor& attrs, const std::vector<int>& candidate_ids,
                 const std::set<int>& seen, double gamma) {
  if (gamma < 0.0) throw ParameterError("predict_gzsl: gamma must be >= 0");
  if (candidate_ids.empty()) {
    throw ParameterError("predict_gzsl: empty candidate set");
  }
  std::vector<double> scores = bilinear_scores(x, v, attrs);
  int best = -1;
  double best_score = 0.0;
  for (int id : candidate_ids) {
    double s = scores[static_cast<std::size_t>(id)];
    if (seen.count(id)) s -= gamma;
    if (best < 0 || s > best_score || (s == best_score && id < best)) {
      best = id;
      best_score = s;
    }
  }
  return best;
}

// ---- metrics ---------------------------------------------------------------------

namespace {

double per_class_mean(const std::vector<int>& preds,
                      const std::vector<int>& labels,
                      const std::set<int>& classes,
                      std::map<int, double>* per_class,
                      std::vector<std::string>* warnings) {
  double total = 0.0;
  int counted = 0;
  for (int cl : classes) {
    int n = 0, correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != cl) continue;
      ++n;
      if (preds[i] == cl) ++correct;
    }
    if (n == 0) {
      if (warnings) {
        warnings->push_back("class " + std::to_string(cl) +
                            " has no test samples; excluded from its mean");
      }
      continue;
    }
    double acc = static_cast<double>(correct) / n;
    if (per_class) (*per_class)[cl] = acc;
    total += acc;
    ++counted;
  }
  return counted ? total / counted : 0.0;
}

}  // namespace

EvalReport compute_metrics(const std::vector<int>& gzsl_predictions,
                           const std::vector<int>& gzsl_labels,
                           const std::vector<int>& zsl_predictions,
                           const std::vector<int>& zsl_labels,
                           const std::set<int>& seen,
                           const std::set<int>& unseen, double gamma) {
  if (gzsl_predictions.size() != gzsl_labels.size() ||
      zsl_predictions.size() != zsl_labels.size()) {
    throw DimensionError("compute_metrics: predictions misaligned with labels");
  }
  EvalReport r;
  r.gamma = gamma;
  r.u = per_class_mean(gzsl_predictions, gzsl_labels, unseen, &r.per_class_gzsl,
                       &r.warnings);
  r.s = per_class_mean(gzsl_predictions, gzsl_labels, seen, &r.per_class_gzsl,
                       &r.warnings);
  r.h = (r.u + r.s > 0.0) ? 2.0 * r.u * r.s / (r.u + r.s) : 0.0;
  r.t1 = per_class_mean(zsl_predictions, zsl_labels, unseen, nullptr, nullptr);
  return r;
}

namespace {

/// Pooled feature rows for an index list, through the checkpoint's head.
std::vector<std::vector<double>> pooled_rows(
    const Checkpoint& cp, const Dataset& ds,
    const std::vector<std::int32_t>& idx) {
  Tensor rows = ds.feature_rows(idx);
  Tensor pooled = embed_batch(cp.params, rows);
  std::vector<std::vector<double>> out(idx.size());
  auto d = pooled.data();
  std::size_t b = pooled.shape()[1];
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out[i].assign(d.begin() + static_cast<std::ptrdiff_t>(i * b),
                  d.begin() + static_cast<std::ptrdiff_t>((i + 1) * b));
  }
  return out;
}

}  // namespace

EvalReport evaluate(const Checkpoint& cp, const Dataset& ds, double gamma) {
  Tensor attrs = ds.attribute_matrix();
  std::vector<int> all_ids;
  for (std::size_t cl = 0; cl < ds.c; ++cl) all_ids.push_back(static_cast<int>(cl));
  std::vector<int> unseen_ids = ds.sorted_unseen();

  std::vector<int> gzsl_preds, gzsl_labels, zsl_preds, zsl_labels;
  auto run_gzsl = [&](const std::vector<std::int32_t>& idx) {
    auto pooled = pooled_rows(cp, ds, idx);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      gzsl_preds.push_back(predict_gzsl(pooled[i], cp.params.V, attrs, all_ids,
                                        ds.seen, gamma));
      gzsl_labels.push_back(ds.labels[static_cast<std::size_t>(idx[i])]);
    }
  };
  run_gzsl(ds.test_seen_idx);
  run_gzsl(ds.test_unseen_idx);

  if (!unseen_ids.empty() && !ds.test_unseen_idx.empty()) {
    auto pooled = pooled_rows(cp, ds, ds.test_unseen_idx);
    for (std::size_t i = 0; i < ds.test_unseen_idx.size(); ++i) {
      zsl_preds.push_back(
          predict_zsl(pooled[i], cp.params.V, attrs, unseen_ids));
      zsl_labels.push_back(
          ds.labels[static_cast<std::size_t>(ds.test_unseen_idx[i])]);
    }
  }
  return compute_metrics(gzsl_preds, gzsl_labels, zsl_preds, zsl_labels,
                         ds.seen, ds.unseen, gamma);
}

std::vector<SweepRow> gamma_sweep(const Checkpoint& cp, const Dataset& ds,
                                  const std::vector<double>& gammas) {
  if (gammas.empty()) throw ParameterError("gamma_sweep: empty gamma list");
  std::vector<SweepRow> rows;
  rows.reserve(gammas.size());
  for (double g : gammas) {
    EvalReport r = evaluate(cp, ds, g);
    rows.push_back({g, r.u, r.s, r.h, false});
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].h > rows[best].h) best = i;
  }
  rows[best].best = true;
  return rows;
}

void save_report(const EvalReport& report, const std::vector<SweepRow>& sweep,
                 const fs::path& path) {
  json j;
  j["t1"] = report.t1;
  j["u"] = report.u;
  j["s"] = report.s;
  j["h"] = report.h;
  j["gamma"] = report.gamma;
  json per_class = json::object();
  for (const auto& [cl, acc] : report.per_class_gzsl) {
    per_class[std::to_string(cl)] = acc;
  }
  j["per_class"] = std::move(per_class);
  if (!report.warnings.empty()) j["warnings"] = report.warnings;
  if (!sweep.empty()) {
    json rows = json::array();
    for (const SweepRow& r : sweep) {
      rows.push_back({{"gamma", r.gamma},
                      {"u", r.u},
                      {"s", r.s},
                      {"h", r.h},
                      {"best", r.best}});
    }
    j["sweep"] = std::move(rows);
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write report: " + path.string());
  f << j.dump(2) << "\n";
}

}  // namespace fzsl
