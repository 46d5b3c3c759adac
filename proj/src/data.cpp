#include "fzsl/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>

#include <json.hpp>

namespace fzsl {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// ---- binary IO -----------------------------------------------------------------

namespace {

static_assert(sizeof(float) == 4 && sizeof(std::int32_t) == 4);

template <typename T>
void write_raw_le(const fs::path& p, const std::vector<T>& v) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + p.string());
  for (T x : v) {
    std::uint32_t bits;
    std::memcpy(&bits, &x, 4);
    if constexpr (std::endian::native == std::endian::big) {
      bits = __builtin_bswap32(bits);
    }
    char buf[4];
    std::memcpy(buf, &bits, 4);
    f.write(buf, 4);
  }
  if (!f) throw DataError("write failed: " + p.string());
}

template <typename T>
std::vector<T> read_raw_le(const fs::path& p, std::size_t expected) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw DataError("missing file: " + p.string());
  f.seekg(0, std::ios::end);
  auto bytes = static_cast<std::size_t>(f.tellg());
  f.seekg(0);
  if (bytes != expected * 4) {
    throw DataError("size mismatch in " + p.string() + ": manifest expects " +
                    std::to_string(expected) + " values (" +
                    std::to_string(expected * 4) + " bytes), file holds " +
                    std::to_string(bytes / 4) + " (" + std::to_string(bytes) +
                    " bytes)");
  }
  std::vector<T> out(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    char buf[4];
    f.read(buf, 4);
    std::uint32_t bits;
    std::memcpy(&bits, buf, 4);
    if constexpr (std::endian::native == std::endian::big) {
      bits = __builtin_bswap32(bits);
    }
    std::memcpy(&out[i], &bits, 4);
  }
  if (!f) throw DataError("read failed: " + p.string());
  return out;
}

std::vector<int> as_sorted(const std::set<int>& s) {
  return std::vector<int>(s.begin(), s.end());
}

}  // namespace

void write_f32(const fs::path& p, const std::vector<float>& v) {
  write_raw_le(p, v);
}

void write_i32(const fs::path& p, const std::vector<std::int32_t>& v) {
  write_raw_le(p, v);
}

std::vector<float> read_f32(const fs::path& p, std::size_t expected) {
  return read_raw_le<float>(p, expected);
}

std::vector<std::int32_t> read_i32(const fs::path& p, std::size_t expected) {
  return read_raw_le<std::int32_t>(p, expected);
}

// ---- Dataset -------------------------------------------------------------------

void Dataset::validate_invariants() const {
  if (features.size() != n * b_in) {
    throw DataError("dataset '" + name + "': feature array holds " +
                    std::to_string(features.size() / std::max<std::size_t>(b_in, 1)) +
                    " rows, manifest says n=" + std::to_string(n));
  }
  if (labels.size() != n) {
    throw DataError("dataset '" + name + "': label array holds " +
                    std::to_string(labels.size()) + " entries, manifest says n=" +
                    std::to_string(n));
  }
  if (attributes.size() != m * c) {
    throw DataError("dataset '" + name + "': attribute matrix size " +
                    std::to_string(attributes.size()) + " != m*c = " +
                    std::to_string(m * c));
  }
  for (int s : seen) {
    if (unseen.count(s)) {
      throw DataError("dataset '" + name + "': class " + std::to_string(s) +
                      " is both seen and unseen");
    }
  }
  auto check_class = [&](int label, const char* what) {
    if (label < 0 || static_cast<std::size_t>(label) >= c) {
      throw DataError("dataset '" + name + "': " + what + " label " +
                      std::to_string(label) + " outside [0, " +
                      std::to_string(c) + ")");
    }
    if (!seen.count(label) && !unseen.count(label)) {
      throw DataError("dataset '" + name + "': " + what + " label " +
                      std::to_string(label) + " is neither seen nor unseen");
    }
  };
  for (std::int32_t l : labels) check_class(l, "sample");
  auto check_idx = [&](const std::vector<std::int32_t>& idx, const char* what) {
    for (std::int32_t i : idx) {
      if (i < 0 || static_cast<std::size_t>(i) >= n) {
        throw DataError("dataset '" + name + "': " + what + " index " +
                        std::to_string(i) + " outside [0, " +
                        std::to_string(n) + ")");
      }
    }
  };
  check_idx(train_idx, "train");
  check_idx(test_seen_idx, "test_seen");
  check_idx(test_unseen_idx, "test_unseen");
  for (std::int32_t i : train_idx) {
    if (!seen.count(labels[static_cast<std::size_t>(i)])) {
      throw DataError("dataset '" + name + "': train index " +
                      std::to_string(i) + " carries unseen label " +
                      std::to_string(labels[static_cast<std::size_t>(i)]));
    }
  }
}

Tensor Dataset::feature_rows(const std::vector<std::int32_t>& idx) const {
  std::vector<double> out;
  out.reserve(idx.size() * b_in);
  for (std::int32_t i : idx) {
    const float* rowp = features.data() + static_cast<std::size_t>(i) * b_in;
    for (std::size_t j = 0; j < b_in; ++j) out.push_back(rowp[j]);
  }
  return Tensor::from_data({idx.size(), b_in}, std::move(out));
}

Tensor Dataset::attribute_matrix() const {
  std::vector<double> out(attributes.begin(), attributes.end());
  return Tensor::from_data({m, c}, std::move(out));
}

std::vector<int> Dataset::sorted_seen() const { return as_sorted(seen); }
std::vector<int> Dataset::sorted_unseen() const { return as_sorted(unseen); }

// ---- manifest load/save --------------------------------------------------------

namespace {

std::vector<std::int32_t> idx_list(const json& j, const char* field) {
  if (!j.contains(field)) {
    throw DataError(std::string("manifest: missing splits field '") + field +
                    "'");
  }
  return j.at(field).get<std::vector<std::int32_t>>();
}

}  // namespace

Dataset load_dataset(const fs::path& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw DataError("missing manifest: " + manifest_path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw DataError("manifest parse error in " + manifest_path.string() + ": " +
                    e.what());
  }
  Dataset ds;
  try {
    ds.name = j.at("name").get<std::string>();
    ds.n = j.at("n").get<std::size_t>();
    ds.b_in = j.at("b_in").get<std::size_t>();
    ds.m = j.at("m").get<std::size_t>();
    ds.c = j.at("c").get<std::size_t>();
    for (int s : j.at("seen").get<std::vector<int>>()) ds.seen.insert(s);
    for (int u : j.at("unseen").get<std::vector<int>>()) ds.unseen.insert(u);
    const json& splits = j.at("splits");
    ds.train_idx = idx_list(splits, "train");
    ds.test_seen_idx = idx_list(splits, "test_seen");
    ds.test_unseen_idx = idx_list(splits, "test_unseen");
  } catch (const json::exception& e) {
    throw DataError("manifest field error in " + manifest_path.string() + ": " +
                    e.what());
  }
  fs::path dir = manifest_path.parent_path();
  ds.features =
      read_f32(dir / j.at("feature_file").get<std::string>(), ds.n * ds.b_in);
  ds.attributes =
      read_f32(dir / j.at("attribute_file").get<std::string>(), ds.m * ds.c);
  ds.labels = read_i32(dir / j.at("label_file").get<std::string>(), ds.n);
  if (j.contains("hierarchy_file") && !j.at("hierarchy_file").is_null()) {
    ds.hierarchy_file = dir / j.at("hierarchy_file").get<std::string>();
  }
  ds.validate_invariants();
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  write_f32(dir / "features.f32", ds.features);
  write_f32(dir / "attributes.f32", ds.attributes);
  write_i32(dir / "labels.i32", ds.labels);
  json j;
  j["name"] = ds.name;
  j["n"] = ds.n;
  j["b_in"] = ds.b_in;
  j["m"] = ds.m;
  j["c"] = ds.c;
  j["feature_file"] = "features.f32";
  j["attribute_file"] = "attributes.f32";
  j["label_file"] = "labels.i32";
  j["seen"] = as_sorted(ds.seen);
  j["unseen"] = as_sorted(ds.unseen);
  j["splits"] = {{"train", ds.train_idx},
                 {"test_seen", ds.test_seen_idx},
                 {"test_unseen", ds.test_unseen_idx}};
  if (ds.hierarchy_file) {
    j["hierarchy_file"] = ds.hierarchy_file->filename().string();
  }
  std::ofstream f(dir / "manifest.json", std::ios::trunc);
  if (!f) throw DataError("cannot write manifest in " + dir.string());
  f << j.dump(2) << "\n";
}

// ---- synthetic generator -------------------------------------------------------

Dataset generate_synthetic(int c_seen, int c_unseen, std::size_t m,
                           std::size_t b_in, int n_per_class, double noise_std,
                           std::uint64_t seed) {
  if (c_seen <= 0 || c_unseen < 0 || m == 0 || b_in == 0 || n_per_class <= 0) {
    throw ParameterError("generate_synthetic: counts must be positive");
  }
  if (noise_std < 0.0) {
    throw ParameterError("generate_synthetic: noise_std must be >= 0");
  }
  Rng master(seed);
  Rng attr_rng = master.fork(1);
  Rng w_rng = master.fork(2);
  Rng noise_rng = master.fork(3);

  std::size_t c = static_cast<std::size_t>(c_seen + c_unseen);
  Dataset ds;
  ds.name = "synthetic";
  ds.b_in = b_in;
  ds.m = m;
  ds.c = c;

  // Distinct binary attribute columns, Bernoulli(0.5) per entry.
  std::vector<std::vector<float>> cols(c);
  std::set<std::vector<float>> uniq;
  for (std::size_t cl = 0; cl < c; ++cl) {
    int attempts = 0;
    while (true) {
      std::vector<float> col(m);
      for (float& v : col) v = attr_rng.bernoulli(0.5) ? 1.0f : 0.0f;
      if (uniq.insert(col).second) {
        cols[cl] = std::move(col);
        break;
      }
      if (++attempts >= 1000) {
        throw DataError(
            "generate_synthetic: could not draw distinct attribute columns "
            "after 1000 attempts; raise the attribute dimension");
      }
    }
  }
  ds.attributes.assign(m * c, 0.0f);
  for (std::size_t cl = 0; cl < c; ++cl) {
    for (std::size_t a = 0; a < m; ++a) ds.attributes[a * c + cl] = cols[cl][a];
  }

  // Fixed random linear map; feature scale ~1 per coordinate for binary
  // attribute vectors of weight ~m/2.
  double w_std = std::sqrt(2.0 / static_cast<double>(m));
  std::vector<double> w(b_in * m);
  for (double& v : w) v = w_rng.normal(0.0, w_std);

  ds.n = c * static_cast<std::size_t>(n_per_class);
  ds.features.reserve(ds.n * b_in);
  ds.labels.reserve(ds.n);
  for (std::size_t cl = 0; cl < c; ++cl) ds.seen.insert(static_cast<int>(cl));
  for (std::size_t cl = static_cast<std::size_t>(c_seen); cl < c; ++cl) {
    ds.seen.erase(static_cast<int>(cl));
    ds.unseen.insert(static_cast<int>(cl));
  }

  for (std::size_t cl = 0; cl < c; ++cl) {
    for (int s = 0; s < n_per_class; ++s) {
      for (std::size_t bdim = 0; bdim < b_in; ++bdim) {
        double acc = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
          acc += w[bdim * m + a] * cols[cl][a];
        }
        if (noise_std > 0.0) acc += noise_rng.normal(0.0, noise_std);
        ds.features.push_back(static_cast<float>(acc));
      }
      ds.labels.push_back(static_cast<std::int32_t>(cl));
    }
  }

  // Seen classes: 80/20 train/test_seen per class. Unseen: all test_unseen.
  for (std::size_t cl = 0; cl < c; ++cl) {
    std::int32_t base = static_cast<std::int32_t>(cl) * n_per_class;
    if (ds.seen.count(static_cast<int>(cl))) {
      int n_train = std::max(1, (n_per_class * 4) / 5);
      for (int s = 0; s < n_per_class; ++s) {
        (s < n_train ? ds.train_idx : ds.test_seen_idx).push_back(base + s);
      }
    } else {
      for (int s = 0; s < n_per_class; ++s) {
        ds.test_unseen_idx.push_back(base + s);
      }
    }
  }
  ds.validate_invariants();
  return ds;
}

// ---- hierarchy -----------------------------------------------------------------

Hierarchy load_hierarchy(const fs::path& path, const Dataset& ds) {
  std::ifstream f(path);
  if (!f) throw DataError("missing hierarchy file: " + path.string());
  ordered_json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw DataError("hierarchy parse error in " + path.string() + ": " +
                    e.what());
  }
  if (!j.is_object()) {
    throw DataError("hierarchy file must be a JSON object: " + path.string());
  }
  Hierarchy h;
  for (auto it = j.begin(); it != j.end(); ++it) {
    int macro_id = static_cast<int>(h.macro_names.size());
    h.macro_names.push_back(it.key());
    for (int cl : it.value().get<std::vector<int>>()) {
      if (cl < 0 || static_cast<std::size_t>(cl) >= ds.c) {
        throw DataError("hierarchy: unknown class id " + std::to_string(cl));
      }
      auto [pos, inserted] = h.class_to_macro.emplace(cl, macro_id);
      if (!inserted) {
        throw DataError("hierarchy: class " + std::to_string(cl) +
                        " assigned to both '" +
                        h.macro_names[static_cast<std::size_t>(pos->second)] +
                        "' and '" + it.key() + "'");
      }
    }
  }
  std::string missing;
  for (std::size_t cl = 0; cl < ds.c; ++cl) {
    if (!h.class_to_macro.count(static_cast<int>(cl))) {
      missing += (missing.empty() ? "" : ", ") + std::to_string(cl);
    }
  }
  if (!missing.empty()) {
    throw ConfigError("hierarchy: classes absent from the file: " + missing);
  }
  return h;
}

void save_hierarchy(const Hierarchy& h, const fs::path& path) {
  ordered_json j = ordered_json::object();
  for (std::size_t q = 0; q < h.macro_names.size(); ++q) {
    std::vector<int> classes;
    for (const auto& [cl, mq] : h.class_to_macro) {
      if (mq == static_cast<int>(q)) classes.push_back(cl);
    }
    j[h.macro_names[q]] = classes;
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write hierarchy: " + path.string());
  f << j.dump(2) << "\n";
}

// ---- batch sampling ------------------------------------------------------------

Batch sample_batch(const Dataset& ds, const BatchSpec& spec, Rng& rng) {
  if (spec.n_pos < 1 || spec.n_neg < 0) {
    throw ParameterError("sample_batch: need n_pos >= 1 and n_neg >= 0");
  }
  if (ds.train_idx.empty()) {
    throw DataError("sample_batch: dataset has no train split");
  }
  // Per-class train rows.
  std::map<int, std::vector<std::int32_t>> by_class;
  for (std::int32_t i : ds.train_idx) {
    by_class[ds.labels[static_cast<std::size_t>(i)]].push_back(i);
  }
  std::vector<int> classes;
  classes.reserve(by_class.size());
  for (const auto& [cl, rows] : by_class) classes.push_back(cl);

  Batch b;
  b.anchor_class = classes[rng.index(classes.size())];
  const auto& pos_pool = by_class.at(b.anchor_class);

  if (pos_pool.size() >= static_cast<std::size_t>(spec.n_pos)) {
    // Partial Fisher-Yates draw without replacement.
    std::vector<std::int32_t> pool = pos_pool;
    for (int k = 0; k < spec.n_pos; ++k) {
      std::size_t j = k + rng.index(pool.size() - static_cast<std::size_t>(k));
      std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
      b.indices.push_back(pool[static_cast<std::size_t>(k)]);
    }
  } else {
    static bool warned = false;
    if (!warned) {
      std::cerr << "sample_batch: class " << b.anchor_class << " has only "
                << pos_pool.size() << " train samples, sampling " << spec.n_pos
                << " positives with replacement\n";
      warned = true;
    }
    for (int k = 0; k < spec.n_pos; ++k) {
      b.indices.push_back(pos_pool[rng.index(pos_pool.size())]);
    }
  }

  std::vector<std::int32_t> neg_pool;
  for (const auto& [cl, rows] : by_class) {
    if (cl != b.anchor_class) {
      neg_pool.insert(neg_pool.end(), rows.begin(), rows.end());
    }
  }
  if (spec.n_neg > 0 && neg_pool.empty()) {
    throw DataError("sample_batch: no other seen class to draw negatives from");
  }
  if (neg_pool.size() >= static_cast<std::size_t>(spec.n_neg)) {
    std::vector<std::int32_t> pool = neg_pool;
    for (int k = 0; k < spec.n_neg; ++k) {
      std::size_t j = k + rng.index(pool.size() - static_cast<std::size_t>(k));
      std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
      b.indices.push_back(pool[static_cast<std::size_t>(k)]);
    }
  } else {
    for (int k = 0; k < spec.n_neg; ++k) {
      b.indices.push_back(neg_pool[rng.index(neg_pool.size())]);
    }
  }
  return b;
}

}  // namespace fzsl
