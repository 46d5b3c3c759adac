#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fzsl/rng.hpp"
#include "fzsl/tensor.hpp"

namespace fzsl {

/// Feature/attribute/label dataset with seen/unseen class splits. Storage is
/// 32-bit (the file format); values are widened to double when they enter the
/// engine.
struct Dataset {
  std::string name;
  std::size_t n = 0;      // samples
  std::size_t b_in = 0;   // raw feature dimension
  std::size_t m = 0;      // attribute dimension
  std::size_t c = 0;      // classes
  std::vector<float> features;    // n x b_in, row-major
  std::vector<std::int32_t> labels;
  std::vector<float> attributes;  // m x c, row-major (row = attribute)
  std::set<int> seen, unseen;
  std::vector<std::int32_t> train_idx, test_seen_idx, test_unseen_idx;
  std::optional<std::filesystem::path> hierarchy_file;  // resolved path

  void validate_invariants() const;

  Tensor feature_rows(const std::vector<std::int32_t>& idx) const;  // [k, b_in]
  Tensor attribute_matrix() const;                                  // [m, c]
  std::vector<int> sorted_seen() const;
  std::vector<int> sorted_unseen() const;
};

/// Load from a JSON manifest; sidecar arrays are raw little-endian
/// float32/int32, resolved relative to the manifest.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Write manifest.json plus sidecar binaries into dir.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Synthetic ZSL task: distinct Bernoulli(0.5) binary attribute columns, a
/// fixed random linear map W, per-sample features W*a_class + noise.
/// Deterministic given seed; unseen classes appear only in test_unseen.
Dataset generate_synthetic(int c_seen, int c_unseen, std::size_t m,
                           std::size_t b_in, int n_per_class, double noise_std,
                           std::uint64_t seed);

/// Class -> macroclass grouping.
struct Hierarchy {
  std::vector<std::string> macro_names;    // macro id -> name
  std::map<int, int> class_to_macro;       // total over dataset classes

  std::size_t n_macros() const { return macro_names.size(); }
};

/// JSON object {macro name: [class ids]}; must cover every dataset class
/// exactly once.
Hierarchy load_hierarchy(const std::filesystem::path& path, const Dataset& ds);
void save_hierarchy(const Hierarchy& h, const std::filesystem::path& path);

struct BatchSpec {
  int n_pos = 12;
  int n_neg = 12;
};

struct Batch {
  std::vector<std::int32_t> indices;  // dataset rows: positives then negatives
  int anchor_class = -1;
};

/// Anchor class uniform over seen classes; n_pos samples from it (without
/// replacement when possible) plus n_neg from the other seen classes.
Batch sample_batch(const Dataset& ds, const BatchSpec& spec, Rng& rng);

// Raw little-endian binary IO used by the manifest format.
void write_f32(const std::filesystem::path& p, const std::vector<float>& v);
void write_i32(const std::filesystem::path& p,
               const std::vector<std::int32_t>& v);
std::vector<float> read_f32(const std::filesystem::path& p,
                            std::size_t expected_count);
std::vector<std::int32_t> read_i32(const std::filesystem::path& p,
                                   std::size_t expected_count);

}  // namespace fzsl
