#include "flowhunt/boost.hpp"

#include "flowhunt/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <set>

namespace flowhunt {

void BoostParams::validate() const {
    if (n_rounds < 0) throw ConfigError("n_rounds must be non-negative");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("learning_rate must lie in (0, 1]");
    if (max_depth < 0) throw ConfigError("max_depth must be non-negative");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
    if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
    if (!(min_child_weight >= 0.0)) throw ConfigError("min_child_weight must be non-negative");
}

int Tree::leaf_index(std::span<const double> row) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
        const TreeNode& n = nodes[static_cast<std::size_t>(i)];
        const double v = row[static_cast<std::size_t>(n.feature)];
        const bool left = std::isnan(v) ? n.default_left : v < n.threshold;
        i = left ? n.left : n.right;
    }
    return i;
}

double Tree::predict(std::span<const double> row) const {
    return nodes[static_cast<std::size_t>(leaf_index(row))].weight;
}

int Tree::depth() const {
    std::function<int(int)> walk = [&](int i) -> int {
        const TreeNode& n = nodes[static_cast<std::size_t>(i)];
        if (n.is_leaf()) return 0;
        return 1 + std::max(walk(n.left), walk(n.right));
    };
    return nodes.empty() ? 0 : walk(0);
}

std::size_t Tree::n_leaves() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

namespace boost {
namespace {

using RowList = std::vector<std::uint32_t>;

/// Per-feature lists of a node's non-missing rows in ascending value order
/// (ties by row index).
struct NodeRows {
    RowList rows; // ascending row index
    std::vector<RowList> sorted;
};

NodeRows sort_rows(const FeatureMatrix& x, std::span<const std::size_t> rows) {
    NodeRows out;
    out.rows.reserve(rows.size());
    for (std::size_t r : rows) {
        if (r >= x.n_rows()) throw DataError("row index out of range");
        out.rows.push_back(static_cast<std::uint32_t>(r));
    }
    std::sort(out.rows.begin(), out.rows.end());
    out.sorted.resize(x.n_features());
    for (std::size_t f = 0; f < x.n_features(); ++f) {
        RowList& list = out.sorted[f];
        for (std::uint32_t r : out.rows) {
            if (!x.is_missing(r, f)) list.push_back(r);
        }
        std::stable_sort(list.begin(), list.end(),
                         [&](std::uint32_t a, std::uint32_t b) { return x.at(a, f) < x.at(b, f); });
    }
    return out;
}

double midpoint(double a, double b) {
    const double m = a + (b - a) / 2.0;
    return (m > a && m <= b) ? m : b;
}

double leaf_weight(double G, double H, const BoostParams& p) {
    const double denom = H + p.lambda;
    return denom > 0.0 ? -G / denom * p.learning_rate : 0.0;
}

std::optional<Split> best_split(const FeatureMatrix& x, const NodeRows& node, std::span<const double> g,
                                std::span<const double> h, const BoostParams& p) {
    double G = 0.0, H = 0.0;
    for (std::uint32_t r : node.rows) {
        G += g[r];
        H += h[r];
    }

    std::optional<Split> best;
    double best_gain = 0.0;
    auto consider = [&](int f, double thr, bool left, double gl, double hl, double gr, double hr) {
        if (hl < p.min_child_weight || hr < p.min_child_weight) return;
        if (hl + p.lambda <= 0.0 || hr + p.lambda <= 0.0) return;
        const double gain = split_gain(gl, hl, gr, hr, p.lambda, p.gamma);
        if (gain > best_gain) {
            best_gain = gain;
            best = Split{f, thr, left, gain, gl, hl, gr, hr};
        }
    };

    for (std::size_t f = 0; f < node.sorted.size(); ++f) {
        const RowList& list = node.sorted[f];
        if (list.size() < 2) continue;
        const bool has_missing = list.size() < node.rows.size();
        double g_present = 0.0, h_present = 0.0;
        for (std::uint32_t r : list) {
            g_present += g[r];
            h_present += h[r];
        }
        const double g_missing = G - g_present;
        const double h_missing = H - h_present;

        double gp = 0.0, hp = 0.0;
        for (std::size_t i = 0; i + 1 < list.size(); ++i) {
            gp += g[list[i]];
            hp += h[list[i]];
            const double v = x.at(list[i], f);
            const double vn = x.at(list[i + 1], f);
            if (!(vn > v)) continue;
            const double thr = midpoint(v, vn);
            const double gl = gp + (has_missing ? g_missing : 0.0);
            const double hl = hp + (has_missing ? h_missing : 0.0);
            consider(static_cast<int>(f), thr, true, gl, hl, G - gl, H - hl);
            if (has_missing) consider(static_cast<int>(f), thr, false, gp, hp, G - gp, H - hp);
        }
    }
    return best;
}

class TreeGrower {
public:
    TreeGrower(const FeatureMatrix& x, std::span<const double> g, std::span<const double> h, const BoostParams& p)
        : x_(x), g_(g), h_(h), params_(p), goes_left_(x.n_rows(), 0) {
        growth_ = p;
        growth_.gamma = 0.0;
    }

    Tree grow(NodeRows root) {
        build(std::move(root), 0);
        return std::move(tree_);
    }

private:
    int build(NodeRows node, int depth) {
        double G = 0.0, H = 0.0;
        for (std::uint32_t r : node.rows) {
            G += g_[r];
            H += h_[r];
        }
        const int index = static_cast<int>(tree_.nodes.size());
        TreeNode leaf;
        leaf.weight = leaf_weight(G, H, params_);
        tree_.nodes.push_back(leaf);

        if (depth >= params_.max_depth || node.rows.size() < 2) return index;
        auto split = best_split(x_, node, g_, h_, growth_);
        if (!split) return index;

        const auto f = static_cast<std::size_t>(split->feature);
        for (std::uint32_t r : node.rows) {
            goes_left_[r] = x_.is_missing(r, f) ? split->default_left : x_.at(r, f) < split->threshold;
        }
        NodeRows left, right;
        for (std::uint32_t r : node.rows) (goes_left_[r] ? left.rows : right.rows).push_back(r);
        left.sorted.resize(node.sorted.size());
        right.sorted.resize(node.sorted.size());
        for (std::size_t j = 0; j < node.sorted.size(); ++j) {
            for (std::uint32_t r : node.sorted[j]) (goes_left_[r] ? left.sorted[j] : right.sorted[j]).push_back(r);
            RowList().swap(node.sorted[j]);
        }

        const int l = build(std::move(left), depth + 1);
        const int rr = build(std::move(right), depth + 1);
        TreeNode& n = tree_.nodes[static_cast<std::size_t>(index)];
        n.feature = split->feature;
        n.threshold = split->threshold;
        n.default_left = split->default_left;
        n.gain = split->gain;
        n.left = l;
        n.right = rr;
        return index;
    }

    const FeatureMatrix& x_;
    std::span<const double> g_;
    std::span<const double> h_;
    BoostParams params_;
    BoostParams growth_;
    std::vector<unsigned char> goes_left_;
    Tree tree_;
};

void check_gradients(const FeatureMatrix& x, std::span<const double> g, std::span<const double> h) {
    if (g.size() != x.n_rows() || h.size() != x.n_rows()) {
        throw DataError("gradient/hessian length does not match row count");
    }
}

} // namespace

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.size());
    if (logits.empty()) return p;
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        p[c] = std::exp(logits[c] - top);
        sum += p[c];
    }
    for (double& v : p) v /= sum;
    return p;
}

GradHess softmax_grad_hess(std::span<const double> logits, int true_class) {
    if (true_class < 0 || static_cast<std::size_t>(true_class) >= logits.size()) {
        throw DataError("class " + std::to_string(true_class) + " outside [0, " + std::to_string(logits.size()) + ")");
    }
    GradHess out;
    const auto p = softmax(logits);
    out.g.resize(p.size());
    out.h.resize(p.size());
    for (std::size_t c = 0; c < p.size(); ++c) {
        out.g[c] = p[c] - (static_cast<int>(c) == true_class ? 1.0 : 0.0);
        out.h[c] = p[c] * (1.0 - p[c]);
    }
    return out;
}

double logloss(std::span<const double> logits, int true_class) {
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - top);
    return top + std::log(sum) - logits[static_cast<std::size_t>(true_class)];
}

double split_gain(double g_left, double h_left, double g_right, double h_right, double lambda, double gamma) {
    const double g = g_left + g_right;
    const double h = h_left + h_right;
    return 0.5 * (g_left * g_left / (h_left + lambda) + g_right * g_right / (h_right + lambda) - g * g / (h + lambda)) -
           gamma;
}

std::optional<Split> find_best_split(const FeatureMatrix& x, std::span<const std::size_t> rows,
                                     std::span<const double> g, std::span<const double> h,
                                     const BoostParams& params) {
    check_gradients(x, g, h);
    if (rows.size() < 2) return std::nullopt;
    return best_split(x, sort_rows(x, rows), g, h, params);
}

Tree prune(Tree tree, double gamma) {
    auto& nodes = tree.nodes;
    if (nodes.empty()) return tree;
    std::function<void(int)> visit = [&](int i) {
        TreeNode& n = nodes[static_cast<std::size_t>(i)];
        if (n.is_leaf()) return;
        visit(n.left);
        visit(n.right);
        TreeNode& m = nodes[static_cast<std::size_t>(i)];
        if (nodes[static_cast<std::size_t>(m.left)].is_leaf() && nodes[static_cast<std::size_t>(m.right)].is_leaf() &&
            m.gain < gamma) {
            m.feature = -1;
            m.left = m.right = -1;
            m.threshold = 0.0;
            m.default_left = true;
            m.gain = 0.0;
        }
    };
    visit(0);

    // Re-index reachable nodes in pre-order.
    Tree compact;
    std::function<int(int)> copy = [&](int i) -> int {
        const int index = static_cast<int>(compact.nodes.size());
        compact.nodes.push_back(nodes[static_cast<std::size_t>(i)]);
        if (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
            const int l = copy(nodes[static_cast<std::size_t>(i)].left);
            const int r = copy(nodes[static_cast<std::size_t>(i)].right);
            compact.nodes[static_cast<std::size_t>(index)].left = l;
            compact.nodes[static_cast<std::size_t>(index)].right = r;
        }
        return index;
    };
    copy(0);
    return compact;
}

Tree grow_tree(const FeatureMatrix& x, std::span<const std::size_t> rows, std::span<const double> g,
               std::span<const double> h, const BoostParams& params) {
    params.validate();
    check_gradients(x, g, h);
    if (rows.empty()) throw DataError("grow_tree needs at least one row");
    TreeGrower grower(x, g, h, params);
    return prune(grower.grow(sort_rows(x, rows)), params.gamma);
}

BoostedModel fit(const PseudoLabeledDataset& ds, const BoostParams& params) {
    params.validate();
    const FeatureMatrix& x = ds.features;
    const std::size_t n = x.n_rows();
    if (ds.labels.size() != n) throw DataError("label count does not match row count");
    const std::set<int> present(ds.labels.begin(), ds.labels.end());
    if (ds.k < 2 || present.size() < 2) {
        throw DataError("classifier needs at least two classes; got a single-class training set");
    }
    if (n < 2) throw DataError("classifier needs at least two training rows");
    for (int l : ds.labels) {
        if (l < 0 || l >= ds.k) throw DataError("label " + std::to_string(l) + " outside [0, k)");
    }

    const auto C = static_cast<std::size_t>(ds.k);
    BoostedModel model;
    model.n_classes = ds.k;
    model.params = params;
    model.feature_names = x.feature_names();

    std::vector<double> logits(n * C, model.base_score);
    auto mean_loss = [&] {
        double total = 0.0;
        for (std::size_t r = 0; r < n; ++r) total += logloss({logits.data() + r * C, C}, ds.labels[r]);
        return total / static_cast<double>(n);
    };
    model.train_logloss.push_back(mean_loss());

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const NodeRows root = sort_rows(x, all);

    std::vector<double> g(n * C), h(n * C), gc(n), hc(n);
    for (int round = 0; round < params.n_rounds; ++round) {
        for (std::size_t r = 0; r < n; ++r) {
            const GradHess gh = softmax_grad_hess({logits.data() + r * C, C}, ds.labels[r]);
            std::copy(gh.g.begin(), gh.g.end(), g.begin() + static_cast<std::ptrdiff_t>(r * C));
            std::copy(gh.h.begin(), gh.h.end(), h.begin() + static_cast<std::ptrdiff_t>(r * C));
        }
        std::vector<Tree> trees;
        trees.reserve(C);
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t r = 0; r < n; ++r) {
                gc[r] = g[r * C + c];
                hc[r] = h[r * C + c];
            }
            TreeGrower grower(x, gc, hc, params);
            trees.push_back(prune(grower.grow(root), params.gamma));
        }
        for (std::size_t r = 0; r < n; ++r) {
            const auto row = x.row(r);
            for (std::size_t c = 0; c < C; ++c) logits[r * C + c] += trees[c].predict(row);
        }
        model.rounds.push_back(std::move(trees));
        model.train_logloss.push_back(mean_loss());
    }
    return model;
}

std::vector<double> margins(const BoostedModel& model, std::span<const double> row) {
    std::vector<double> z(static_cast<std::size_t>(model.n_classes), model.base_score);
    for (const auto& round : model.rounds) {
        for (std::size_t c = 0; c < round.size(); ++c) z[c] += round[c].predict(row);
    }
    return z;
}

namespace {

void check_features(const BoostedModel& model, const FeatureMatrix& x) {
    if (x.n_features() != model.feature_names.size()) {
        throw DataError("matrix has " + std::to_string(x.n_features()) + " features, model expects " +
                        std::to_string(model.feature_names.size()));
    }
    if (x.feature_names() != model.feature_names) {
        throw DataError("matrix feature names differ from the model's");
    }
}

} // namespace

Probabilities predict_proba(const BoostedModel& model, const FeatureMatrix& x) {
    check_features(model, x);
    Probabilities out;
    out.n_rows = x.n_rows();
    out.n_classes = static_cast<std::size_t>(model.n_classes);
    out.values.reserve(out.n_rows * out.n_classes);
    for (std::size_t r = 0; r < x.n_rows(); ++r) {
        const auto p = softmax(margins(model, x.row(r)));
        out.values.insert(out.values.end(), p.begin(), p.end());
    }
    return out;
}

std::vector<int> predict(const BoostedModel& model, const FeatureMatrix& x) {
    const Probabilities p = predict_proba(model, x);
    std::vector<int> out(p.n_rows, 0);
    for (std::size_t r = 0; r < p.n_rows; ++r) {
        const auto row = p.row(r);
        out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

double mean_logloss(const BoostedModel& model, const FeatureMatrix& x, const std::vector<int>& labels) {
    check_features(model, x);
    if (labels.size() != x.n_rows()) throw DataError("label count does not match row count");
    double total = 0.0;
    for (std::size_t r = 0; r < x.n_rows(); ++r) total += logloss(margins(model, x.row(r)), labels[r]);
    return x.n_rows() ? total / static_cast<double>(x.n_rows()) : 0.0;
}

} // namespace boost
} // namespace flowhunt
