#include "flowhunt/metrics.hpp"

#include "flowhunt/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace flowhunt {

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
    return t;
}

std::uint64_t ConfusionMatrix::row_sum(int t) const {
    const auto& row = counts.at(static_cast<std::size_t>(t));
    return std::accumulate(row.begin(), row.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::col_sum(int p) const {
    std::uint64_t s = 0;
    for (const auto& row : counts) s += row.at(static_cast<std::size_t>(p));
    return s;
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) s += counts[i][i];
    return s;
}

namespace metrics {
namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

} // namespace

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, int n_classes) {
    if (y_true.size() != y_pred.size()) {
        throw DataError("truth and prediction lengths differ (" + std::to_string(y_true.size()) + " vs " +
                        std::to_string(y_pred.size()) + ")");
    }
    if (n_classes < 2) throw DataError("confusion matrix needs at least two classes");
    ConfusionMatrix cm;
    cm.n_classes = n_classes;
    cm.counts.assign(static_cast<std::size_t>(n_classes), std::vector<std::uint64_t>(static_cast<std::size_t>(n_classes), 0));
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i];
        const int p = y_pred[i];
        if (t < 0 || t >= n_classes || p < 0 || p >= n_classes) {
            throw DataError("label out of range at row " + std::to_string(i) + " (true " + std::to_string(t) +
                            ", predicted " + std::to_string(p) + ")");
        }
        ++cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
    return cm;
}

ClassReport class_report(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    if (cm.n_classes < 1 || total == 0) throw DataError("class report of an empty confusion matrix");
    const auto n = static_cast<double>(total);

    ClassReport rep;
    rep.total = total;
    rep.accuracy = static_cast<double>(cm.trace()) / n;

    double pe = 0.0;
    std::size_t active = 0;
    for (int c = 0; c < cm.n_classes; ++c) {
        const auto tp = static_cast<double>(cm.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]);
        const auto rows = static_cast<double>(cm.row_sum(c));
        const auto cols = static_cast<double>(cm.col_sum(c));
        const double fp = cols - tp;
        const double fn = rows - tp;
        const double tn = n - tp - fp - fn;

        ClassStats s;
        s.precision = ratio(tp, cols);
        s.recall = ratio(tp, rows);
        s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
        s.support = cm.row_sum(c);
        s.specificity = ratio(tn, tn + fp);
        s.npv = ratio(tn, tn + fn);
        s.accuracy = (tp + tn) / n;
        rep.classes.push_back(s);

        pe += rows * cols;
        if (rows > 0.0 || cols > 0.0) {
            ++active;
            rep.macro_precision += s.precision;
            rep.macro_recall += s.recall;
            rep.macro_f1 += s.f1;
        }
    }
    rep.macro_precision /= static_cast<double>(active);
    rep.macro_recall /= static_cast<double>(active);
    rep.macro_f1 /= static_cast<double>(active);

    pe /= n * n;
    rep.expected_agreement = pe;
    rep.kappa = pe < 1.0 ? (rep.accuracy - pe) / (1.0 - pe) : 0.0;
    return rep;
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> y_true, int positive_class) {
    if (scores.size() != y_true.size()) throw DataError("score and truth lengths differ");
    std::size_t pos = 0;
    for (int y : y_true) pos += y == positive_class;
    const std::size_t neg = y_true.size() - pos;
    if (pos == 0 || neg == 0) {
        throw DataError("ROC for class " + std::to_string(positive_class) + " needs both positive and negative rows");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve roc;
    roc.points.emplace_back(0.0, 0.0);
    std::size_t tp = 0, fp = 0;
    double auc = 0.0;
    double prev_fpr = 0.0, prev_tpr = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (y_true[order[i]] == positive_class ? tp : fp) += 1;
            ++i;
        }
        const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
        const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        roc.points.emplace_back(fpr, tpr);
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    roc.auc = auc;
    return roc;
}

MultiClassRoc roc_one_vs_rest(const Probabilities& proba, std::span<const int> y_true) {
    if (proba.n_rows != y_true.size()) throw DataError("probability rows and truth length differ");
    MultiClassRoc out;
    double sum = 0.0;
    std::size_t defined = 0;
    std::vector<double> col(proba.n_rows);
    for (std::size_t c = 0; c < proba.n_classes; ++c) {
        const auto cls = static_cast<int>(c);
        const auto pos = std::count(y_true.begin(), y_true.end(), cls);
        if (pos == 0 || static_cast<std::size_t>(pos) == y_true.size()) {
            out.per_class.emplace_back(std::nullopt);
            continue;
        }
        for (std::size_t r = 0; r < proba.n_rows; ++r) col[r] = proba.at(r, c);
        out.per_class.emplace_back(roc_curve(col, y_true, cls));
        sum += out.per_class.back()->auc;
        ++defined;
    }
    out.macro_auc = defined ? sum / static_cast<double>(defined) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw DataError("partitions have different lengths");
    const auto n = static_cast<double>(a.size());
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> ca, cb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        ca[a[i]] += 1.0;
        cb[b[i]] += 1.0;
    }
    auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
    double sum_joint = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [key, v] : joint) sum_joint += pairs(v);
    for (const auto& [key, v] : ca) sum_a += pairs(v);
    for (const auto& [key, v] : cb) sum_b += pairs(v);
    const double expected = n > 1.0 ? sum_a * sum_b / pairs(n) : 0.0;
    const double max_index = (sum_a + sum_b) / 2.0;
    if (max_index == expected) return 1.0;
    return (sum_joint - expected) / (max_index - expected);
}

namespace {

// Hungarian algorithm (shortest augmenting path, O(n^3)) on a square cost
// matrix; returns the column assigned to each row.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> assignment(n, -1);
    for (std::size_t j = 1; j <= n; ++j) {
        if (p[j]) assignment[p[j] - 1] = static_cast<int>(j - 1);
    }
    return assignment;
}

} // namespace

std::vector<int> align_labels(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) throw DataError("label vectors have different lengths");
    if (predicted.empty()) return {};
    const int np = *std::max_element(predicted.begin(), predicted.end()) + 1;
    const int nt = *std::max_element(truth.begin(), truth.end()) + 1;
    if (*std::min_element(predicted.begin(), predicted.end()) < 0 || *std::min_element(truth.begin(), truth.end()) < 0) {
        throw DataError("labels must be non-negative");
    }
    const auto size = static_cast<std::size_t>(std::max(np, nt));
    std::vector<std::vector<double>> overlap(size, std::vector<double>(size, 0.0));
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        overlap[static_cast<std::size_t>(predicted[i])][static_cast<std::size_t>(truth[i])] += 1.0;
    }
    std::vector<std::vector<double>> cost(size, std::vector<double>(size));
    for (std::size_t i = 0; i < size; ++i) {
        for (std::size_t j = 0; j < size; ++j) cost[i][j] = -overlap[i][j];
    }
    const auto match = hungarian(cost);
    std::vector<int> mapping(static_cast<std::size_t>(np), 0);
    for (std::size_t i = 0; i < static_cast<std::size_t>(np); ++i) {
        if (match[i] >= 0 && match[i] < nt) {
            mapping[i] = match[i];
        } else {
            const auto& row = overlap[i];
            mapping[i] = static_cast<int>(std::max_element(row.begin(), row.begin() + nt) - row.begin());
        }
    }
    return mapping;
}

} // namespace metrics
} // namespace flowhunt
