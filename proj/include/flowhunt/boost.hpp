#pragma once

#include "flowhunt/feature_matrix.hpp"
#include "flowhunt/labeling.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace flowhunt {

struct BoostParams {
    int n_rounds = 100;
    double learning_rate = 0.3;
    int max_depth = 6;
    double lambda = 1.0;          // L2 penalty on leaf weights
    double gamma = 0.0;           // minimum realized gain kept by pruning
    double min_child_weight = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const BoostParams&) const = default;
};

/// Internal nodes have feature >= 0; a row goes left when its value is
/// below the threshold, and to the default side when the value is missing.
/// Every node keeps the (learning-rate scaled) weight it would have as a leaf
/// and the gain of its split, so pruning can collapse it in place.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    bool default_left = true;
    int left = -1;
    int right = -1;
    double weight = 0.0;
    double gain = 0.0;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct Tree {
    std::vector<TreeNode> nodes; // nodes[0] is the root

    double predict(std::span<const double> row) const;
    /// Index of the leaf a row ends in.
    int leaf_index(std::span<const double> row) const;
    int depth() const;
    std::size_t n_leaves() const;
    bool operator==(const Tree&) const = default;
};

struct Split {
    int feature = -1;
    double threshold = 0.0;
    bool default_left = true;
    double gain = 0.0;
    double g_left = 0.0, h_left = 0.0, g_right = 0.0, h_right = 0.0;
};

struct BoostedModel {
    int n_classes = 0;
    std::vector<std::vector<Tree>> rounds; // rounds[r][c]
    double base_score = 0.0;
    BoostParams params;
    std::vector<std::string> feature_names;
    std::vector<double> train_logloss; // before round 1, then after each round

    bool operator==(const BoostedModel&) const = default;
};

/// Row-major n x C class probabilities.
struct Probabilities {
    std::size_t n_rows = 0;
    std::size_t n_classes = 0;
    std::vector<double> values;

    std::span<const double> row(std::size_t r) const { return {values.data() + r * n_classes, n_classes}; }
    double at(std::size_t r, std::size_t c) const { return values[r * n_classes + c]; }
};

namespace boost {

struct GradHess {
    std::vector<double> g;
    std::vector<double> h;
};

/// Softmax cross-entropy derivatives: g_c = p_c - [c = y], h_c = p_c (1 - p_c).
GradHess softmax_grad_hess(std::span<const double> logits, int true_class);

std::vector<double> softmax(std::span<const double> logits);

/// -log softmax(logits)[true_class], computed via log-sum-exp.
double logloss(std::span<const double> logits, int true_class);

/// Regularized split gain minus gamma.
double split_gain(double g_left, double h_left, double g_right, double h_right, double lambda, double gamma);

/// Exact greedy search. Candidates are visited by feature, then ascending
/// threshold (midpoints between distinct present values), then missing-left
/// before missing-right; a later candidate wins only with strictly larger
/// gain. When the node has no missing values for a feature only the
/// missing-left variant is considered. Returns nullopt when no candidate has
/// positive gain with both children meeting min_child_weight.
std::optional<Split> find_best_split(const FeatureMatrix& x, std::span<const std::size_t> rows,
                                     std::span<const double> g, std::span<const double> h,
                                     const BoostParams& params);

/// Grows to max_depth accepting any positive-gain split, then prunes
/// bottom-up every split whose children are leaves and whose gain is below
/// gamma.
Tree grow_tree(const FeatureMatrix& x, std::span<const std::size_t> rows, std::span<const double> g,
               std::span<const double> h, const BoostParams& params);

/// Collapses low-gain splits; exposed for tests.
Tree prune(Tree tree, double gamma);

BoostedModel fit(const PseudoLabeledDataset& ds, const BoostParams& params);

Probabilities predict_proba(const BoostedModel& model, const FeatureMatrix& x);
std::vector<int> predict(const BoostedModel& model, const FeatureMatrix& x);

/// Raw summed scores (base score plus leaf weights) for one row.
std::vector<double> margins(const BoostedModel& model, std::span<const double> row);

double mean_logloss(const BoostedModel& model, const FeatureMatrix& x, const std::vector<int>& labels);

} // namespace boost
} // namespace flowhunt
