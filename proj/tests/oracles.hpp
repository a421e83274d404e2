#pragma once

// Slow, direct reference implementations used to check the library.

#include "flowhunt/feature_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace oracle {

// Neumaier-compensated sum of squared differences.
inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double sum = 0.0, comp = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double term = (a[i] - b[i]) * (a[i] - b[i]);
        const double t = sum + term;
        comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
        sum = t;
    }
    return sum + comp;
}

inline std::vector<double> row(const flowhunt::FeatureMatrix& m, std::size_t r) {
    return {m.row(r).begin(), m.row(r).end()};
}

// Within-cluster sum of squares of a labelling, using each cluster's mean.
inline double partition_cost(const flowhunt::FeatureMatrix& m, const std::vector<int>& labels, int k) {
    const std::size_t d = m.n_features();
    double total = 0.0;
    for (int c = 0; c < k; ++c) {
        std::vector<double> mean(d, 0.0);
        std::size_t count = 0;
        for (std::size_t r = 0; r < m.n_rows(); ++r) {
            if (labels[r] != c) continue;
            ++count;
            for (std::size_t j = 0; j < d; ++j) mean[j] += m.at(r, j);
        }
        if (count == 0) continue;
        for (double& v : mean) v /= static_cast<double>(count);
        for (std::size_t r = 0; r < m.n_rows(); ++r) {
            if (labels[r] == c) total += squared_distance(row(m, r), mean);
        }
    }
    return total;
}

// Minimum over all k^n labellings.
inline double best_partition_cost(const flowhunt::FeatureMatrix& m, int k) {
    const std::size_t n = m.n_rows();
    std::vector<int> labels(n, 0);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        best = std::min(best, partition_cost(m, labels, k));
        std::size_t i = 0;
        while (i < n && ++labels[i] == k) labels[i++] = 0;
        if (i == n) break;
    }
    return best;
}

// Area under the ROC curve as the fraction of (positive, negative) pairs
// ranked correctly, ties counting one half.
inline double pair_auc(const std::vector<double>& scores, const std::vector<int>& positive) {
    double good = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!positive[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (positive[j]) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) good += 1.0;
            else if (scores[i] == scores[j]) good += 0.5;
        }
    }
    return good / pairs;
}

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    bool default_left = true;
    double gain = 0.0;
};

// Enumerates every (feature, threshold, missing direction) and scores each
// candidate from scratch. Visiting order and the strict-improvement rule
// match the documented tie-breaking.
inline std::optional<SplitChoice> best_split(const flowhunt::FeatureMatrix& x, const std::vector<std::size_t>& rows,
                                             const std::vector<double>& g, const std::vector<double>& h,
                                             double lambda, double gamma, double min_child_weight) {
    auto score = [&](double gs, double hs) { return gs * gs / (hs + lambda); };
    double G = 0.0, H = 0.0;
    for (auto r : rows) {
        G += g[r];
        H += h[r];
    }
    std::optional<SplitChoice> best;
    double best_gain = 0.0;
    for (std::size_t f = 0; f < x.n_features(); ++f) {
        std::vector<double> values;
        bool any_missing = false;
        for (auto r : rows) {
            if (x.is_missing(r, f)) any_missing = true;
            else values.push_back(x.at(r, f));
        }
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t i = 0; i + 1 < values.size(); ++i) {
            const double thr = values[i] + (values[i + 1] - values[i]) / 2.0;
            for (bool left : {true, false}) {
                if (!left && !any_missing) continue;
                double gl = 0.0, hl = 0.0;
                for (auto r : rows) {
                    const bool goes_left = x.is_missing(r, f) ? left : x.at(r, f) < thr;
                    if (goes_left) {
                        gl += g[r];
                        hl += h[r];
                    }
                }
                const double gr = G - gl, hr = H - hl;
                if (hl < min_child_weight || hr < min_child_weight) continue;
                const double gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(G, H)) - gamma;
                if (gain > best_gain) {
                    best_gain = gain;
                    best = SplitChoice{static_cast<int>(f), thr, left, gain};
                }
            }
        }
    }
    return best;
}

// -log softmax(z)[y] in extended precision.
inline long double softmax_loss(const std::vector<long double>& z, int y) {
    long double top = z[0];
    for (long double v : z) top = std::max(top, v);
    long double sum = 0.0L;
    for (long double v : z) sum += std::exp(v - top);
    return -(z[static_cast<std::size_t>(y)] - top - std::log(sum));
}

// Central differences of the loss along each logit: first derivative and
// diagonal second derivative.
inline void finite_difference(const std::vector<double>& logits, int y, std::vector<double>& g, std::vector<double>& h) {
    const long double eps = 1e-4L;
    std::vector<long double> z(logits.begin(), logits.end());
    const long double f0 = softmax_loss(z, y);
    g.assign(z.size(), 0.0);
    h.assign(z.size(), 0.0);
    for (std::size_t c = 0; c < z.size(); ++c) {
        auto plus = z, minus = z;
        plus[c] += eps;
        minus[c] -= eps;
        const long double fp = softmax_loss(plus, y);
        const long double fm = softmax_loss(minus, y);
        g[c] = static_cast<double>((fp - fm) / (2.0L * eps));
        h[c] = static_cast<double>((fp - 2.0L * f0 + fm) / (eps * eps));
    }
}

} // namespace oracle
