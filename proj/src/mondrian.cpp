#include "tollcast/mondrian.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tollcast/errors.hpp"

namespace tollcast {

using detail::Box;
using detail::Node;
using detail::Tree;

namespace {

constexpr double kSmoothingDiscount = 0.5;
// Regression leaves keep enough points to average label noise away.
constexpr std::int64_t kMinRegressionSplit = 16;

void bump_count(std::vector<std::pair<std::int32_t, std::int64_t>>& counts,
                std::int32_t label) {
  for (auto& [l, c] : counts) {
    if (l == label) {
      ++c;
      return;
    }
  }
  counts.emplace_back(label, 1);
  std::sort(counts.begin(), counts.end());
}

}  // namespace

void Box::init(std::size_t numeric_dims, std::size_t onehot_dims) {
  num_lo.assign(numeric_dims, 0.0f);
  num_hi.assign(numeric_dims, 0.0f);
  std::size_t words = (onehot_dims + 63) / 64;
  has0.assign(words, 0);
  has1.assign(words, 0);
}

MondrianForest::MondrianForest(FeatureSchema schema, ForestTask task,
                               int trees, std::uint64_t seed, double budget)
    : schema_(std::move(schema)), task_(task), budget_(budget), seed_(seed) {
  if (trees < 1) throw std::invalid_argument("forest needs at least one tree");
  numeric_dims_ = schema_.numeric.size();
  onehot_dims_ = 0;
  for (std::size_t c = 0; c < schema_.categorical.size(); ++c) {
    int card = schema_.categorical[c].second;
    if (card < 2)
      throw std::invalid_argument("categorical cardinality must be >= 2");
    cat_offset_.push_back(onehot_dims_);
    for (int v = 0; v < card; ++v)
      onehot_decode_.emplace_back(static_cast<int>(c), v);
    onehot_dims_ += card;
  }
  trees_.resize(trees);
  for (int t = 0; t < trees; ++t)
    trees_[t].rng.seed(seed_ + 0x9e3779b97f4a7c15ull * (t + 1));
}

double MondrianForest::coord(const PointRef& p, std::size_t dim) const {
  if (dim < numeric_dims_) return p.num[dim];
  auto [c, v] = onehot_decode_[dim - numeric_dims_];
  return p.cat[c] == v ? 1.0 : 0.0;
}

void MondrianForest::validate(const FeatureVector& x) const {
  if (x.numeric.size() != schema_.numeric.size() ||
      x.categorical.size() != schema_.categorical.size())
    throw SchemaError("feature vector does not match schema arity");
  for (double v : x.numeric)
    if (!std::isfinite(v)) throw SchemaError("non-finite numeric feature");
  for (std::size_t c = 0; c < x.categorical.size(); ++c)
    if (x.categorical[c] < 0 ||
        x.categorical[c] >= schema_.categorical[c].second)
      throw SchemaError("categorical value outside declared cardinality");
}

std::int32_t MondrianForest::store_point(const FeatureVector& x) {
  std::vector<float> num(x.numeric.begin(), x.numeric.end());
  std::vector<std::int32_t> cat(x.categorical.begin(), x.categorical.end());
  data_num_.push_back(std::move(num));
  data_cat_.push_back(std::move(cat));
  return static_cast<std::int32_t>(data_num_.size() - 1);
}

void MondrianForest::add_point_stats(Node& node, std::int32_t point_id) {
  ++node.count;
  if (task_ == ForestTask::Classification) {
    bump_count(node.class_counts, labels_int_[point_id]);
  } else {
    double y = targets_[point_id];
    node.sum += y;
    node.sum_sq += y * y;
  }
}

void MondrianForest::box_from_point(Box& box, const PointRef& p) {
  box.init(numeric_dims_, onehot_dims_);
  for (std::size_t d = 0; d < numeric_dims_; ++d) {
    box.num_lo[d] = p.num[d];
    box.num_hi[d] = p.num[d];
  }
  for (std::size_t d = 0; d < onehot_dims_; ++d) {
    auto [c, v] = onehot_decode_[d];
    if (p.cat[c] == v)
      box.set(box.has1, d);
    else
      box.set(box.has0, d);
  }
}

void MondrianForest::extend_box(Box& box, const PointRef& p) {
  for (std::size_t d = 0; d < numeric_dims_; ++d) {
    box.num_lo[d] = std::min(box.num_lo[d], static_cast<float>(p.num[d]));
    box.num_hi[d] = std::max(box.num_hi[d], static_cast<float>(p.num[d]));
  }
  for (std::size_t d = 0; d < onehot_dims_; ++d) {
    auto [c, v] = onehot_decode_[d];
    if (p.cat[c] == v)
      box.set(box.has1, d);
    else
      box.set(box.has0, d);
  }
}

double MondrianForest::extension_rate(const Box& box, const PointRef& p) const {
  double rate = 0.0;
  for (std::size_t d = 0; d < numeric_dims_; ++d) {
    double x = p.num[d];
    rate += std::max(0.0, box.num_lo[d] - x) + std::max(0.0, x - box.num_hi[d]);
  }
  for (std::size_t d = 0; d < onehot_dims_; ++d) {
    auto [c, v] = onehot_decode_[d];
    bool hot = (p.cat[c] == v);
    if (hot && !box.get(box.has1, d)) rate += 1.0;
    if (!hot && !box.get(box.has0, d)) rate += 1.0;
  }
  return rate;
}

bool MondrianForest::leaf_paused(const Node& node) const {
  if (task_ == ForestTask::Classification)
    return node.class_counts.size() < 2;
  if (node.count < kMinRegressionSplit) return true;
  double mean = node.sum / static_cast<double>(node.count);
  return node.sum_sq - mean * node.sum < 1e-12;
}

void MondrianForest::grow_leaf(Tree& tree, std::int32_t node_id,
                               double parent_tau) {
  // Resumes the Mondrian process on a leaf whose points are separable.
  std::vector<std::int32_t> stack{node_id};
  std::vector<double> taus{parent_tau};
  while (!stack.empty()) {
    std::int32_t id = stack.back();
    double ptau = taus.back();
    stack.pop_back();
    taus.pop_back();
    Node& node = tree.nodes[id];
    if (leaf_paused(node)) continue;

    double dim_rate = 0.0;
    for (std::size_t d = 0; d < numeric_dims_; ++d)
      dim_rate += node.box.num_hi[d] - node.box.num_lo[d];
    for (std::size_t d = 0; d < onehot_dims_; ++d)
      if (node.box.get(node.box.has0, d) && node.box.get(node.box.has1, d))
        dim_rate += 1.0;
    if (dim_rate <= 0.0) continue;  // identical points, nothing to split

    double split_tau =
        ptau + std::exponential_distribution<double>(dim_rate)(tree.rng);
    if (split_tau >= budget_) continue;

    // Split dimension proportional to box extent, location uniform in it.
    double pick = std::uniform_real_distribution<double>(0.0, dim_rate)(tree.rng);
    std::int32_t split_dim = -1;
    float split_loc = 0.0f;
    double acc = 0.0;
    for (std::size_t d = 0; d < numeric_dims_ && split_dim < 0; ++d) {
      double ext = node.box.num_hi[d] - node.box.num_lo[d];
      if (ext <= 0) continue;
      acc += ext;
      if (acc >= pick) {
        split_dim = static_cast<std::int32_t>(d);
        split_loc = std::uniform_real_distribution<float>(
            node.box.num_lo[d], node.box.num_hi[d])(tree.rng);
      }
    }
    for (std::size_t d = 0; d < onehot_dims_ && split_dim < 0; ++d) {
      if (!(node.box.get(node.box.has0, d) && node.box.get(node.box.has1, d)))
        continue;
      acc += 1.0;
      if (acc >= pick) {
        split_dim = static_cast<std::int32_t>(numeric_dims_ + d);
        split_loc =
            std::uniform_real_distribution<float>(0.0f, 1.0f)(tree.rng);
        if (split_loc <= 0.0f) split_loc = 0.5f;
      }
    }
    if (split_dim < 0) continue;

    // Partition the leaf's points into two child leaves.
    std::vector<std::int32_t> left_pts, right_pts;
    for (auto pid : node.points) {
      if (coord(point(pid), split_dim) <= split_loc)
        left_pts.push_back(pid);
      else
        right_pts.push_back(pid);
    }
    if (left_pts.empty() || right_pts.empty()) continue;

    auto make_child = [&](std::vector<std::int32_t> pts) {
      Node child;
      child.parent = id;
      child.points = std::move(pts);
      box_from_point(child.box, point(child.points.front()));
      for (auto pid : child.points) {
        extend_box(child.box, point(pid));
        add_point_stats(child, pid);
      }
      tree.nodes.push_back(std::move(child));
      return static_cast<std::int32_t>(tree.nodes.size() - 1);
    };
    std::int32_t left_id = make_child(std::move(left_pts));
    std::int32_t right_id = make_child(std::move(right_pts));
    Node& parent = tree.nodes[id];  // re-borrow after potential realloc
    parent.left = left_id;
    parent.right = right_id;
    parent.split_dim = split_dim;
    parent.split_loc = split_loc;
    parent.tau = split_tau;
    parent.points.clear();
    parent.points.shrink_to_fit();

    stack.push_back(left_id);
    taus.push_back(split_tau);
    stack.push_back(right_id);
    taus.push_back(split_tau);
  }
}

void MondrianForest::insert_into_tree(Tree& tree, std::int32_t point_id) {
  PointRef x = point(point_id);
  if (tree.root < 0) {
    Node leaf;
    leaf.points.push_back(point_id);
    box_from_point(leaf.box, x);
    add_point_stats(leaf, point_id);
    tree.nodes.push_back(std::move(leaf));
    tree.root = 0;
    return;
  }

  std::int32_t id = tree.root;
  double parent_tau = 0.0;
  while (true) {
    Node& node = tree.nodes[id];
    double rate = extension_rate(node.box, x);
    double node_tau = node.is_leaf()
                          ? std::numeric_limits<double>::infinity()
                          : node.tau;
    double split_time = std::numeric_limits<double>::infinity();
    if (rate > 0.0)
      split_time =
          parent_tau + std::exponential_distribution<double>(rate)(tree.rng);

    // small regression leaves absorb instead of splitting above
    bool absorbing_leaf = node.is_leaf() &&
                          task_ == ForestTask::Regression &&
                          node.count < kMinRegressionSplit;
    if (!absorbing_leaf && split_time < node_tau && split_time < budget_) {
      // Introduce a split above this node in one of the extended dims.
      double pick =
          std::uniform_real_distribution<double>(0.0, rate)(tree.rng);
      std::int32_t split_dim = -1;
      float split_loc = 0.0f;
      double acc = 0.0;
      for (std::size_t d = 0; d < numeric_dims_ && split_dim < 0; ++d) {
        double xv = x.num[d];
        double ext = std::max(0.0, node.box.num_lo[d] - xv) +
                     std::max(0.0, xv - node.box.num_hi[d]);
        if (ext <= 0) continue;
        acc += ext;
        if (acc >= pick) {
          split_dim = static_cast<std::int32_t>(d);
          if (xv > node.box.num_hi[d])
            split_loc = static_cast<float>(std::uniform_real_distribution<double>(
                node.box.num_hi[d], xv)(tree.rng));
          else
            split_loc = static_cast<float>(std::uniform_real_distribution<double>(
                xv, node.box.num_lo[d])(tree.rng));
        }
      }
      for (std::size_t d = 0; d < onehot_dims_ && split_dim < 0; ++d) {
        auto [c, v] = onehot_decode_[d];
        bool hot = (x.cat[c] == v);
        bool extends = (hot && !node.box.get(node.box.has1, d)) ||
                       (!hot && !node.box.get(node.box.has0, d));
        if (!extends) continue;
        acc += 1.0;
        if (acc >= pick) {
          split_dim = static_cast<std::int32_t>(numeric_dims_ + d);
          split_loc =
              std::uniform_real_distribution<float>(0.0f, 1.0f)(tree.rng);
          if (split_loc <= 0.0f) split_loc = 0.5f;
        }
      }
      if (split_dim >= 0) {
        Node parent_node;
        parent_node.parent = node.parent;
        parent_node.split_dim = split_dim;
        parent_node.split_loc = split_loc;
        parent_node.tau = split_time;
        parent_node.box = node.box;
        extend_box(parent_node.box, x);
        parent_node.count = node.count;
        parent_node.sum = node.sum;
        parent_node.sum_sq = node.sum_sq;
        parent_node.class_counts = node.class_counts;
        add_point_stats(parent_node, point_id);

        Node sibling;
        sibling.points.push_back(point_id);
        box_from_point(sibling.box, x);
        add_point_stats(sibling, point_id);

        tree.nodes.push_back(std::move(parent_node));
        std::int32_t new_parent = static_cast<std::int32_t>(tree.nodes.size() - 1);
        tree.nodes.push_back(std::move(sibling));
        std::int32_t new_leaf = static_cast<std::int32_t>(tree.nodes.size() - 1);

        Node& old_node = tree.nodes[id];
        std::int32_t grand = old_node.parent;
        old_node.parent = new_parent;
        tree.nodes[new_leaf].parent = new_parent;
        bool x_left = coord(x, split_dim) <= split_loc;
        tree.nodes[new_parent].left = x_left ? new_leaf : id;
        tree.nodes[new_parent].right = x_left ? id : new_leaf;
        if (grand < 0) {
          tree.root = new_parent;
        } else {
          Node& g = tree.nodes[grand];
          if (g.left == id)
            g.left = new_parent;
          else
            g.right = new_parent;
        }
        return;
      }
      // No extended dim found (numerically empty rate); fall through.
    }

    // Absorb the point: stretch the box and continue downward.
    extend_box(node.box, x);
    add_point_stats(node, point_id);
    if (node.is_leaf()) {
      node.points.push_back(point_id);
      if (!leaf_paused(node)) grow_leaf(tree, id, parent_tau);
      return;
    }
    parent_tau = node.tau;
    id = coord(x, node.split_dim) <= node.split_loc ? node.left : node.right;
  }
}

void MondrianForest::update(const FeatureVector& x, const std::string& label) {
  if (task_ != ForestTask::Classification)
    throw SchemaError("label update on a regression forest");
  validate(x);
  auto it = label_idx_.find(label);
  int lbl;
  if (it == label_idx_.end()) {
    lbl = static_cast<int>(label_table_.size());
    label_table_.push_back(label);
    label_idx_[label] = lbl;
  } else {
    lbl = it->second;
  }
  std::int32_t pid = store_point(x);
  labels_int_.push_back(lbl);
  targets_.push_back(0.0);
  for (auto& tree : trees_) insert_into_tree(tree, pid);
}

void MondrianForest::update(const FeatureVector& x, double target) {
  if (task_ != ForestTask::Regression)
    throw SchemaError("numeric update on a classification forest");
  if (!std::isfinite(target)) throw SchemaError("non-finite regression target");
  validate(x);
  std::int32_t pid = store_point(x);
  labels_int_.push_back(-1);
  targets_.push_back(target);
  for (auto& tree : trees_) insert_into_tree(tree, pid);
}

std::vector<double> MondrianForest::smooth_posterior(
    const Node& node, const std::vector<double>& parent) const {
  double n = static_cast<double>(node.count);
  double discounted = 0.0;
  for (const auto& [lbl, c] : node.class_counts)
    discounted += std::min(static_cast<double>(c), kSmoothingDiscount);
  std::vector<double> post(parent.size());
  for (std::size_t k = 0; k < parent.size(); ++k)
    post[k] = discounted * parent[k] / n;
  for (const auto& [lbl, c] : node.class_counts)
    post[lbl] += std::max(static_cast<double>(c) - kSmoothingDiscount, 0.0) / n;
  return post;
}

std::map<std::string, double> MondrianForest::predict_class(
    const FeatureVector& x) const {
  if (task_ != ForestTask::Classification)
    throw SchemaError("class prediction on a regression forest");
  if (data_num_.empty()) throw std::logic_error("untrained forest");
  validate(x);
  std::vector<float> num(x.numeric.begin(), x.numeric.end());
  std::vector<std::int32_t> cat(x.categorical.begin(), x.categorical.end());
  PointRef p{num, cat};

  std::size_t n_labels = label_table_.size();
  std::vector<double> result(n_labels, 0.0);
  std::vector<double> prior(n_labels, 1.0 / static_cast<double>(n_labels));

  for (const auto& tree : trees_) {
    double not_separated = 1.0;
    double parent_tau = 0.0;
    std::vector<double> parent_post = prior;
    std::int32_t id = tree.root;
    while (id >= 0) {
      const Node& node = tree.nodes[id];
      double eta = extension_rate(node.box, p);
      double node_tau = node.is_leaf()
                            ? std::numeric_limits<double>::infinity()
                            : node.tau;
      double p_sep = 0.0;
      if (eta > 0.0) {
        double delta = node_tau - parent_tau;
        p_sep = std::isinf(delta) ? 1.0 : 1.0 - std::exp(-delta * eta);
      }
      auto post = smooth_posterior(node, parent_post);
      if (p_sep > 0.0)
        for (std::size_t k = 0; k < n_labels; ++k)
          result[k] += not_separated * p_sep * post[k] / trees_.size();
      not_separated *= (1.0 - p_sep);
      if (node.is_leaf()) {
        for (std::size_t k = 0; k < n_labels; ++k)
          result[k] += not_separated * post[k] / trees_.size();
        break;
      }
      parent_tau = node.tau;
      parent_post = std::move(post);
      id = coord(p, node.split_dim) <= node.split_loc ? node.left : node.right;
    }
  }
  double total = std::accumulate(result.begin(), result.end(), 0.0);
  std::map<std::string, double> out;
  for (std::size_t k = 0; k < n_labels; ++k)
    out[label_table_[k]] = total > 0 ? result[k] / total : result[k];
  return out;
}

std::string MondrianForest::predict_label(const FeatureVector& x) const {
  auto post = predict_class(x);
  std::string best;
  double best_p = -1.0;
  for (const auto& [name, v] : post) {
    if (v > best_p) {
      best_p = v;
      best = name;
    }
  }
  return best;
}

RegressionPrediction MondrianForest::predict_value(
    const FeatureVector& x) const {
  if (task_ != ForestTask::Regression)
    throw SchemaError("value prediction on a classification forest");
  if (data_num_.empty()) throw std::logic_error("untrained forest");
  validate(x);
  std::vector<float> num(x.numeric.begin(), x.numeric.end());
  std::vector<std::int32_t> cat(x.categorical.begin(), x.categorical.end());
  PointRef p{num, cat};

  std::vector<double> tree_means;
  double within = 0.0;
  for (const auto& tree : trees_) {
    double not_separated = 1.0;
    double parent_tau = 0.0;
    double mean = 0.0;
    double var = 0.0;
    std::int32_t id = tree.root;
    while (id >= 0) {
      const Node& node = tree.nodes[id];
      double eta = extension_rate(node.box, p);
      double node_tau = node.is_leaf()
                            ? std::numeric_limits<double>::infinity()
                            : node.tau;
      double p_sep = 0.0;
      if (eta > 0.0) {
        double delta = node_tau - parent_tau;
        p_sep = std::isinf(delta) ? 1.0 : 1.0 - std::exp(-delta * eta);
      }
      double node_mean = node.sum / static_cast<double>(node.count);
      double node_var =
          std::max(0.0, node.sum_sq / node.count - node_mean * node_mean);
      double w = not_separated * (node.is_leaf() ? 1.0 : p_sep);
      mean += w * node_mean;
      var += w * node_var;
      if (node.is_leaf()) break;
      not_separated *= (1.0 - p_sep);
      parent_tau = node.tau;
      id = coord(p, node.split_dim) <= node.split_loc ? node.left : node.right;
    }
    tree_means.push_back(mean);
    within += var / trees_.size();
  }
  RegressionPrediction out;
  for (double m : tree_means) out.mean += m;
  out.mean /= tree_means.size();
  double between = 0.0;
  for (double m : tree_means) between += (m - out.mean) * (m - out.mean);
  between /= tree_means.size();
  out.variance = between + within;
  return out;
}

namespace {

double gini(const std::vector<std::pair<std::int32_t, std::int64_t>>& counts,
            std::int64_t n) {
  double g = 1.0;
  for (const auto& [lbl, c] : counts) {
    double p = static_cast<double>(c) / n;
    g -= p * p;
  }
  return g;
}

double node_variance(const Node& n) {
  double mean = n.sum / n.count;
  return std::max(0.0, n.sum_sq / n.count - mean * mean);
}

}  // namespace

std::map<std::string, double> MondrianForest::feature_importance() const {
  // Split counts alone cannot rank features: Mondrian split dimensions are
  // label-blind, so splits are weighted by their impurity decrease.
  if (data_num_.empty()) throw std::logic_error("untrained forest");
  std::map<std::string, double> importance;
  for (const auto& n : schema_.numeric) importance[n] = 0.0;
  for (const auto& [n, card] : schema_.categorical) importance[n] = 0.0;
  double total = 0.0;
  for (const auto& tree : trees_) {
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) continue;
      const Node& l = tree.nodes[node.left];
      const Node& r = tree.nodes[node.right];
      double wl = static_cast<double>(l.count) / node.count;
      double wr = static_cast<double>(r.count) / node.count;
      double gain;
      if (task_ == ForestTask::Classification) {
        gain = gini(node.class_counts, node.count) -
               wl * gini(l.class_counts, l.count) -
               wr * gini(r.class_counts, r.count);
      } else {
        gain = node_variance(node) - wl * node_variance(l) -
               wr * node_variance(r);
      }
      double w = std::max(0.0, gain) * static_cast<double>(node.count);
      if (w <= 0.0) continue;
      std::string name;
      if (node.split_dim < static_cast<std::int32_t>(numeric_dims_)) {
        name = schema_.numeric[node.split_dim];
      } else {
        auto [c, v] = onehot_decode_[node.split_dim - numeric_dims_];
        name = schema_.categorical[c].first;
      }
      importance[name] += w;
      total += w;
    }
  }
  if (total > 0)
    for (auto& [name, v] : importance) v /= total;
  return importance;
}

bool MondrianForest::check_invariants() const {
  for (const auto& tree : trees_) {
    if (tree.root < 0) continue;
    // tau strictly increases along every root-to-leaf chain of splits.
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const Node& n = tree.nodes[i];
      if (n.is_leaf()) continue;
      for (std::int32_t child : {n.left, n.right}) {
        const Node& c = tree.nodes[child];
        if (!c.is_leaf() && c.tau <= n.tau) return false;
      }
    }
    // every stored point lies inside the box of each node on its path
    std::function<bool(std::int32_t)> walk = [&](std::int32_t id) -> bool {
      const Node& n = tree.nodes[id];
      std::vector<std::int32_t> pts;
      if (n.is_leaf()) {
        pts = n.points;
      } else {
        if (!walk(n.left) || !walk(n.right)) return false;
        return true;
      }
      for (auto pid : pts) {
        std::int32_t cur = id;
        while (cur >= 0) {
          const Node& a = tree.nodes[cur];
          PointRef p = point(pid);
          for (std::size_t d = 0; d < numeric_dims_; ++d)
            if (p.num[d] < a.box.num_lo[d] - 1e-6f ||
                p.num[d] > a.box.num_hi[d] + 1e-6f)
              return false;
          for (std::size_t d = 0; d < onehot_dims_; ++d) {
            auto [c, v] = onehot_decode_[d];
            bool hot = p.cat[c] == v;
            if (hot && !a.box.get(a.box.has1, d)) return false;
            if (!hot && !a.box.get(a.box.has0, d)) return false;
          }
          cur = a.parent;
        }
      }
      return true;
    };
    if (!walk(tree.root)) return false;
  }
  return true;
}

namespace {

nlohmann::json box_to_json(const Box& box) {
  return {{"nl", box.num_lo},
          {"nh", box.num_hi},
          {"h0", box.has0},
          {"h1", box.has1}};
}

Box box_from_json(const nlohmann::json& j) {
  Box b;
  b.num_lo = j.at("nl").get<std::vector<float>>();
  b.num_hi = j.at("nh").get<std::vector<float>>();
  b.has0 = j.at("h0").get<std::vector<std::uint64_t>>();
  b.has1 = j.at("h1").get<std::vector<std::uint64_t>>();
  return b;
}

}  // namespace

nlohmann::json MondrianForest::to_json() const {
  nlohmann::json j;
  j["format"] = 1;
  j["task"] = task_ == ForestTask::Classification ? "classification"
                                                  : "regression";
  j["seed"] = seed_;
  j["budget_finite"] = std::isfinite(budget_);
  if (std::isfinite(budget_)) j["budget"] = budget_;
  j["schema"]["numeric"] = schema_.numeric;
  j["schema"]["categorical"] = schema_.categorical;
  j["labels"] = label_table_;
  j["points_num"] = data_num_;
  j["points_cat"] = data_cat_;
  j["labels_int"] = labels_int_;
  j["targets"] = targets_;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : trees_) {
    nlohmann::json tj;
    tj["root"] = tree.root;
    std::ostringstream rng_state;
    rng_state << tree.rng;
    tj["rng"] = rng_state.str();
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
      nlohmann::json nj;
      nj["p"] = n.parent;
      nj["l"] = n.left;
      nj["r"] = n.right;
      nj["d"] = n.split_dim;
      nj["x"] = n.split_loc;
      nj["t"] = n.tau;
      nj["b"] = box_to_json(n.box);
      nj["c"] = n.count;
      nj["s"] = n.sum;
      nj["q"] = n.sum_sq;
      nj["cc"] = n.class_counts;
      nj["pts"] = n.points;
      nodes.push_back(std::move(nj));
    }
    tj["nodes"] = std::move(nodes);
    trees.push_back(std::move(tj));
  }
  j["trees"] = std::move(trees);
  return j;
}

MondrianForest MondrianForest::from_json(const nlohmann::json& j) {
  FeatureSchema schema;
  schema.numeric = j.at("schema").at("numeric").get<std::vector<std::string>>();
  schema.categorical =
      j.at("schema")
          .at("categorical")
          .get<std::vector<std::pair<std::string, int>>>();
  ForestTask task = j.at("task") == "classification"
                        ? ForestTask::Classification
                        : ForestTask::Regression;
  double budget = std::numeric_limits<double>::infinity();
  if (j.at("budget_finite").get<bool>()) budget = j.at("budget").get<double>();
  MondrianForest f(schema, task, static_cast<int>(j.at("trees").size()),
                   j.at("seed").get<std::uint64_t>(), budget);
  f.label_table_ = j.at("labels").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < f.label_table_.size(); ++i)
    f.label_idx_[f.label_table_[i]] = static_cast<int>(i);
  f.data_num_ = j.at("points_num").get<std::vector<std::vector<float>>>();
  f.data_cat_ =
      j.at("points_cat").get<std::vector<std::vector<std::int32_t>>>();
  f.labels_int_ = j.at("labels_int").get<std::vector<std::int32_t>>();
  f.targets_ = j.at("targets").get<std::vector<double>>();
  f.trees_.clear();
  for (const auto& tj : j.at("trees")) {
    Tree tree;
    tree.root = tj.at("root").get<std::int32_t>();
    std::istringstream rng_state(tj.at("rng").get<std::string>());
    rng_state >> tree.rng;
    for (const auto& nj : tj.at("nodes")) {
      Node n;
      n.parent = nj.at("p").get<std::int32_t>();
      n.left = nj.at("l").get<std::int32_t>();
      n.right = nj.at("r").get<std::int32_t>();
      n.split_dim = nj.at("d").get<std::int32_t>();
      n.split_loc = nj.at("x").get<float>();
      n.tau = nj.at("t").get<double>();
      n.box = box_from_json(nj.at("b"));
      n.count = nj.at("c").get<std::int64_t>();
      n.sum = nj.at("s").get<double>();
      n.sum_sq = nj.at("q").get<double>();
      n.class_counts =
          nj.at("cc")
              .get<std::vector<std::pair<std::int32_t, std::int64_t>>>();
      n.points = nj.at("pts").get<std::vector<std::int32_t>>();
      tree.nodes.push_back(std::move(n));
    }
    f.trees_.push_back(std::move(tree));
  }
  return f;
}

void MondrianForest::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write forest file " + path);
  out << to_json().dump();
}

MondrianForest MondrianForest::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open forest file " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

}  // namespace tollcast
