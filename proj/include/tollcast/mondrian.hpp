#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace tollcast {

/// Fixed per-forest description of the inputs: named numeric features plus
/// named categorical features with declared cardinalities. Categoricals are
/// one-hot encoded into the axis-aligned split space internally.
struct FeatureSchema {
  std::vector<std::string> numeric;
  std::vector<std::pair<std::string, int>> categorical;

  bool operator==(const FeatureSchema& o) const {
    return numeric == o.numeric && categorical == o.categorical;
  }
};

struct FeatureVector {
  std::vector<double> numeric;
  std::vector<int> categorical;
};

enum class ForestTask { Classification, Regression };

struct RegressionPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

namespace detail {

/// Axis-aligned box over the encoded space. Numeric dims keep float bounds;
/// one-hot dims only ever hold {0}, {1} or {0,1} and are bit-packed.
struct Box {
  std::vector<float> num_lo, num_hi;
  std::vector<std::uint64_t> has0, has1;

  void init(std::size_t numeric_dims, std::size_t onehot_dims);
  bool get(const std::vector<std::uint64_t>& bits, std::size_t d) const {
    return (bits[d >> 6] >> (d & 63)) & 1u;
  }
  void set(std::vector<std::uint64_t>& bits, std::size_t d) {
    bits[d >> 6] |= (std::uint64_t{1} << (d & 63));
  }
};

struct Node {
  std::int32_t parent = -1;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t split_dim = -1;
  float split_loc = 0.0f;
  double tau = 0.0;  // split time; internal nodes only
  Box box;
  std::int64_t count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  std::vector<std::pair<std::int32_t, std::int64_t>> class_counts;
  std::vector<std::int32_t> points;  // leaf only

  bool is_leaf() const { return left < 0; }
};

struct Tree {
  std::int32_t root = -1;
  std::vector<Node> nodes;
  std::mt19937_64 rng;
};

}  // namespace detail

/// Online random forest of Mondrian trees. Classification heads admit new
/// labels as they appear; regression predicts mean plus a between/within
/// tree variance estimate. Updates are deterministic given the seed.
class MondrianForest {
 public:
  MondrianForest(FeatureSchema schema, ForestTask task, int trees = 25,
                 std::uint64_t seed = 1,
                 double budget = std::numeric_limits<double>::infinity());

  void update(const FeatureVector& x, const std::string& label);
  void update(const FeatureVector& x, double target);

  /// Class posterior averaged over trees; sums to 1.
  std::map<std::string, double> predict_class(const FeatureVector& x) const;
  std::string predict_label(const FeatureVector& x) const;
  RegressionPrediction predict_value(const FeatureVector& x) const;

  /// Normalized per-feature importance from impurity-weighted splits.
  std::map<std::string, double> feature_importance() const;

  const FeatureSchema& schema() const { return schema_; }
  ForestTask task() const { return task_; }
  std::size_t update_count() const { return data_num_.size(); }
  int tree_count() const { return static_cast<int>(trees_.size()); }
  const std::vector<std::string>& labels() const { return label_table_; }

  nlohmann::json to_json() const;
  static MondrianForest from_json(const nlohmann::json& j);
  void save_file(const std::string& path) const;
  static MondrianForest load_file(const std::string& path);

  /// Structural checks used by tests: tau increases root to leaf and every
  /// stored point lies inside the boxes of all nodes on its path.
  bool check_invariants() const;

 private:
  struct PointRef {
    std::span<const float> num;
    std::span<const std::int32_t> cat;
  };

  FeatureSchema schema_;
  ForestTask task_;
  double budget_;
  std::uint64_t seed_;
  std::size_t numeric_dims_ = 0;
  std::size_t onehot_dims_ = 0;
  std::vector<std::size_t> cat_offset_;            // block start per categorical
  std::vector<std::pair<int, int>> onehot_decode_;  // one-hot dim -> (cat, value)

  std::vector<detail::Tree> trees_;
  // Training points, stored once and shared by all trees.
  std::vector<std::vector<float>> data_num_;
  std::vector<std::vector<std::int32_t>> data_cat_;
  std::vector<std::int32_t> labels_int_;
  std::vector<double> targets_;
  std::vector<std::string> label_table_;
  std::map<std::string, int> label_idx_;

  PointRef point(std::int32_t id) const {
    return {data_num_[id], data_cat_[id]};
  }
  double coord(const PointRef& p, std::size_t dim) const;
  void validate(const FeatureVector& x) const;
  std::int32_t store_point(const FeatureVector& x);
  void add_point_stats(detail::Node& node, std::int32_t point_id);
  void extend_box(detail::Box& box, const PointRef& p);
  double extension_rate(const detail::Box& box, const PointRef& p) const;
  void box_from_point(detail::Box& box, const PointRef& p);
  void insert_into_tree(detail::Tree& tree, std::int32_t point_id);
  void grow_leaf(detail::Tree& tree, std::int32_t node_id, double parent_tau);
  bool leaf_paused(const detail::Node& node) const;
  std::vector<double> smooth_posterior(const detail::Node& node,
                                       const std::vector<double>& parent) const;
};

}  // namespace tollcast
