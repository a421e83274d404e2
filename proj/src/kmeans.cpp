#include "flowhunt/kmeans.hpp"

#include "flowhunt/error.hpp"
#include "flowhunt/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace flowhunt {

void ClusterConfig::validate() const {
    if (k < 1) throw ConfigError("k must be at least 1");
    if (max_iter < 1) throw ConfigError("max_iter must be at least 1");
    if (!(tol >= 0.0)) throw ConfigError("tol must be non-negative");
    if (n_restarts < 1) throw ConfigError("n_restarts must be at least 1");
}

namespace kmeans {
namespace {

void require_complete(const FeatureMatrix& points) {
    if (points.missing_count() != 0) {
        throw DataError("k-means input contains missing cells; clean the data first");
    }
}

void require_width(const FeatureMatrix& points, const Centroids& c) {
    if (c.dim != points.n_features()) {
        throw DataError("centroid width " + std::to_string(c.dim) + " does not match " +
                        std::to_string(points.n_features()) + " features");
    }
}

std::vector<int> assign_unchecked(const FeatureMatrix& points, const Centroids& centroids) {
    std::vector<int> labels(points.n_rows(), 0);
    for (std::size_t r = 0; r < points.n_rows(); ++r) {
        const auto x = points.row(r);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.k; ++c) {
            const double d = squared_distance(x, centroids.row(c));
            if (d < best) {
                best = d;
                labels[r] = static_cast<int>(c);
            }
        }
    }
    return labels;
}

Centroids means(const FeatureMatrix& points, const std::vector<int>& labels, std::size_t k,
                const std::vector<std::size_t>& sizes) {
    Centroids out(k, points.n_features());
    for (std::size_t r = 0; r < points.n_rows(); ++r) {
        auto dst = out.row(static_cast<std::size_t>(labels[r]));
        const auto x = points.row(r);
        for (std::size_t j = 0; j < x.size(); ++j) dst[j] += x[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] == 0) continue;
        const double inv = static_cast<double>(sizes[c]);
        for (double& v : out.row(c)) v /= inv;
    }
    return out;
}

double max_shift(const Centroids& a, const Centroids& b) {
    double worst = 0.0;
    for (std::size_t c = 0; c < a.k; ++c) worst = std::max(worst, euclidean_distance(a.row(c), b.row(c)));
    return worst;
}

} // namespace

double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DataError("distance between vectors of length " + std::to_string(a.size()) + " and " +
                        std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t u = 0; u < a.size(); ++u) {
        const double d = a[u] - b[u];
        s += d * d;
    }
    return s;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

std::vector<int> assign(const FeatureMatrix& points, const Centroids& centroids) {
    require_width(points, centroids);
    require_complete(points);
    if (centroids.k == 0) throw DataError("assign: no centroids");
    return assign_unchecked(points, centroids);
}

CentroidUpdate update_centroids(const FeatureMatrix& points, const std::vector<int>& labels, int k) {
    if (k < 1) throw ConfigError("k must be at least 1");
    if (labels.size() != points.n_rows()) throw DataError("label count does not match row count");
    const auto kk = static_cast<std::size_t>(k);
    CentroidUpdate out;
    out.labels = labels;
    out.cluster_sizes.assign(kk, 0);
    for (int l : labels) {
        if (l < 0 || l >= k) throw DataError("label " + std::to_string(l) + " outside [0, k)");
        ++out.cluster_sizes[static_cast<std::size_t>(l)];
    }

    for (std::size_t empty = 0; empty < kk; ++empty) {
        if (out.cluster_sizes[empty] != 0) continue;
        const Centroids current = means(points, out.labels, kk, out.cluster_sizes);
        double far = -1.0;
        std::size_t donor_row = points.n_rows();
        for (std::size_t r = 0; r < points.n_rows(); ++r) {
            const auto c = static_cast<std::size_t>(out.labels[r]);
            if (out.cluster_sizes[c] < 2) continue;
            const double d = squared_distance(points.row(r), current.row(c));
            if (d > far) {
                far = d;
                donor_row = r;
            }
        }
        if (donor_row == points.n_rows()) break; // fewer rows than clusters
        --out.cluster_sizes[static_cast<std::size_t>(out.labels[donor_row])];
        out.labels[donor_row] = static_cast<int>(empty);
        out.cluster_sizes[empty] = 1;
        out.reseeded.push_back(static_cast<int>(empty));
    }

    out.centroids = means(points, out.labels, kk, out.cluster_sizes);
    return out;
}

double inertia(const FeatureMatrix& points, const std::vector<int>& labels, const Centroids& centroids) {
    double total = 0.0;
    for (std::size_t r = 0; r < points.n_rows(); ++r) {
        total += squared_distance(points.row(r), centroids.row(static_cast<std::size_t>(labels[r])));
    }
    return total;
}

Centroids init_centroids(const FeatureMatrix& points, int k, InitMethod method, std::uint64_t seed) {
    const std::size_t n = points.n_rows();
    const auto kk = static_cast<std::size_t>(k);
    if (k < 1) throw ConfigError("k must be at least 1");
    if (n < kk) {
        throw DataError("cannot form " + std::to_string(k) + " clusters from " + std::to_string(n) + " rows");
    }
    Centroids c(kk, points.n_features());
    auto take = [&](std::size_t slot, std::size_t row) {
        std::copy(points.row(row).begin(), points.row(row).end(), c.row(slot).begin());
    };
    Rng rng(seed);

    switch (method) {
    case InitMethod::first_k:
        for (std::size_t i = 0; i < kk; ++i) take(i, i);
        break;
    case InitMethod::random: {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = 0; i < kk; ++i) {
            std::swap(idx[i], idx[i + static_cast<std::size_t>(rng.index(n - i))]);
            take(i, idx[i]);
        }
        break;
    }
    case InitMethod::kmeans_pp: {
        take(0, static_cast<std::size_t>(rng.index(n)));
        std::vector<double> d2(n);
        for (std::size_t r = 0; r < n; ++r) d2[r] = squared_distance(points.row(r), c.row(0));
        for (std::size_t i = 1; i < kk; ++i) {
            const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
            std::size_t pick = 0;
            if (total > 0.0) {
                const double target = rng.uniform() * total;
                double acc = 0.0;
                pick = n - 1;
                for (std::size_t r = 0; r < n; ++r) {
                    acc += d2[r];
                    if (acc > target && d2[r] > 0.0) {
                        pick = r;
                        break;
                    }
                }
                while (d2[pick] == 0.0 && pick > 0) --pick;
            } else {
                pick = static_cast<std::size_t>(rng.index(n));
            }
            take(i, pick);
            for (std::size_t r = 0; r < n; ++r) d2[r] = std::min(d2[r], squared_distance(points.row(r), c.row(i)));
        }
        break;
    }
    }
    return c;
}

ClusterFit lloyd(const FeatureMatrix& points, Centroids initial, int max_iter, double tol) {
    require_width(points, initial);
    require_complete(points);
    const int k = static_cast<int>(initial.k);
    if (points.n_rows() < initial.k) {
        throw DataError("cannot form " + std::to_string(k) + " clusters from " + std::to_string(points.n_rows()) +
                        " rows");
    }

    ClusterFit fit;
    Centroids centroids = std::move(initial);
    std::vector<int> labels;
    std::vector<std::size_t> sizes;
    int iter = 0;
    bool converged = false;

    while (iter < max_iter) {
        std::vector<int> next = assign_unchecked(points, centroids);
        if (iter > 0 && next == labels) {
            converged = true;
            break;
        }
        CentroidUpdate upd = update_centroids(points, next, k);
        fit.reseeds += static_cast<int>(upd.reseeded.size());
        const double shift = max_shift(centroids, upd.centroids);
        centroids = std::move(upd.centroids);
        labels = std::move(upd.labels);
        sizes = std::move(upd.cluster_sizes);
        ++iter;
        fit.inertia_trace.push_back(inertia(points, labels, centroids));
        if (shift < tol) {
            converged = true;
            break;
        }
    }

    fit.model.centroids = std::move(centroids);
    fit.model.cluster_sizes = std::move(sizes);
    fit.model.n_iterations = iter;
    fit.model.converged = converged;
    fit.model.inertia = fit.inertia_trace.back();
    fit.labels = std::move(labels);
    return fit;
}

ClusterFit fit(const FeatureMatrix& points, const ClusterConfig& cfg) {
    cfg.validate();
    if (points.n_rows() < static_cast<std::size_t>(cfg.k)) {
        throw DataError("cannot form " + std::to_string(cfg.k) + " clusters from " +
                        std::to_string(points.n_rows()) + " rows");
    }
    require_complete(points);
    ClusterFit best;
    for (int r = 0; r < cfg.n_restarts; ++r) {
        const std::uint64_t seed = mix_seed(cfg.seed + static_cast<std::uint64_t>(r));
        ClusterFit run = lloyd(points, init_centroids(points, cfg.k, cfg.init, seed), cfg.max_iter, cfg.tol);
        run.best_restart = r;
        if (r == 0 || run.model.inertia < best.model.inertia) best = std::move(run);
    }
    return best;
}

ClusterFit fit_from(const FeatureMatrix& points, const Centroids& initial, const ClusterConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(initial.k) != cfg.k) throw ConfigError("initial centroid count does not match k");
    return lloyd(points, initial, cfg.max_iter, cfg.tol);
}

std::vector<int> predict(const ClusterModel& model, const FeatureMatrix& points) {
    return assign(points, model.centroids);
}

double silhouette(const FeatureMatrix& points, const std::vector<int>& labels) {
    const std::size_t n = points.n_rows();
    if (labels.size() != n) throw DataError("label count does not match row count");
    if (n == 0) return 0.0;
    const int k = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int l : labels) {
        if (l < 0) throw DataError("negative cluster label");
        ++sizes[static_cast<std::size_t>(l)];
    }
    if (std::count_if(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; }) < 2) {
        throw DataError("silhouette needs at least two non-empty clusters");
    }

    double total = 0.0;
    std::vector<double> sum(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(sum.begin(), sum.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            sum[static_cast<std::size_t>(labels[j])] += euclidean_distance(points.row(i), points.row(j));
        }
        const auto own = static_cast<std::size_t>(labels[i]);
        if (sizes[own] < 2) continue; // s(i) = 0
        const double a = sum[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sizes.size(); ++c) {
            if (c == own || sizes[c] == 0) continue;
            b = std::min(b, sum[c] / static_cast<double>(sizes[c]));
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

std::vector<ScanPoint> inertia_scan(const FeatureMatrix& points, int k_min, int k_max, const ClusterConfig& cfg) {
    if (k_min < 1 || k_max < k_min) throw ConfigError("k range is empty");
    std::vector<ScanPoint> out;
    for (int k = k_min; k <= k_max; ++k) {
        ClusterConfig c = cfg;
        c.k = k;
        ClusterFit f = fit(points, c);
        ScanPoint p;
        p.k = k;
        p.inertia = f.model.inertia;
        const bool enough = std::count_if(f.model.cluster_sizes.begin(), f.model.cluster_sizes.end(),
                                          [](std::size_t s) { return s > 0; }) >= 2;
        p.silhouette = enough ? silhouette(points, f.labels) : std::numeric_limits<double>::quiet_NaN();
        out.push_back(p);
    }
    return out;
}

std::string to_string(InitMethod m) {
    switch (m) {
    case InitMethod::first_k: return "first-k";
    case InitMethod::random: return "random";
    case InitMethod::kmeans_pp: return "kmeans++";
    }
    return "?";
}

InitMethod parse_init_method(const std::string& s) {
    if (s == "first-k") return InitMethod::first_k;
    if (s == "random") return InitMethod::random;
    if (s == "kmeans++" || s == "kmeanspp") return InitMethod::kmeans_pp;
    throw ConfigError("unknown init method '" + s + "'");
}

} // namespace kmeans
} // namespace flowhunt
