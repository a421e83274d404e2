#pragma once

#include "flowhunt/feature_matrix.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace flowhunt {

enum class InitMethod { first_k, random, kmeans_pp };

struct ClusterConfig {
    int k = 2;
    InitMethod init = InitMethod::kmeans_pp;
    int max_iter = 300;
    double tol = 1e-6;  // max centroid shift treated as converged
    int n_restarts = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Row-major k x d centroid matrix.
struct Centroids {
    std::size_t k = 0;
    std::size_t dim = 0;
    std::vector<double> values;

    Centroids() = default;
    Centroids(std::size_t k_, std::size_t dim_) : k(k_), dim(dim_), values(k_ * dim_, 0.0) {}

    std::span<const double> row(std::size_t c) const { return {values.data() + c * dim, dim}; }
    std::span<double> row(std::size_t c) { return {values.data() + c * dim, dim}; }
    bool operator==(const Centroids&) const = default;
};

struct ClusterModel {
    Centroids centroids;
    double inertia = 0.0;
    int n_iterations = 0;
    std::vector<std::size_t> cluster_sizes;
    bool converged = false;

    int k() const { return static_cast<int>(centroids.k); }
    bool operator==(const ClusterModel&) const = default;
};

/// Everything a fit produces: the model, the final assignment of the fitted
/// rows, the inertia after each assign/update pair, and how many
/// empty-cluster reseeds were needed.
struct ClusterFit {
    ClusterModel model;
    std::vector<int> labels;
    std::vector<double> inertia_trace;
    int reseeds = 0;
    int best_restart = 0;
};

struct CentroidUpdate {
    Centroids centroids;
    std::vector<std::size_t> cluster_sizes;
    std::vector<int> labels;        // possibly changed by reseeding
    std::vector<int> reseeded;      // clusters that were empty and got reseeded
};

namespace kmeans {

double euclidean_distance(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);

/// Nearest centroid per row; ties go to the lowest centroid index.
std::vector<int> assign(const FeatureMatrix& points, const Centroids& centroids);

/// Mean of each cluster's members. An empty cluster is reseeded with the row
/// farthest from its current centroid (taken from a cluster with more than
/// one member); that row is moved into the empty cluster.
CentroidUpdate update_centroids(const FeatureMatrix& points, const std::vector<int>& labels, int k);

/// Sum of squared distances from each row to its assigned centroid.
double inertia(const FeatureMatrix& points, const std::vector<int>& labels, const Centroids& centroids);

Centroids init_centroids(const FeatureMatrix& points, int k, InitMethod method, std::uint64_t seed);

/// Lloyd iterations from the given centroids (one run, no restarts).
ClusterFit lloyd(const FeatureMatrix& points, Centroids initial, int max_iter, double tol);

/// Best-of-n_restarts Lloyd run. Restart r uses seed derived from (seed, r).
ClusterFit fit(const FeatureMatrix& points, const ClusterConfig& cfg);

/// Fit from explicit initial centroids.
ClusterFit fit_from(const FeatureMatrix& points, const Centroids& initial, const ClusterConfig& cfg);

std::vector<int> predict(const ClusterModel& model, const FeatureMatrix& points);

/// Mean silhouette coefficient. Zero denominators give s(i) = 0;
/// singleton clusters give s(i) = 0.
double silhouette(const FeatureMatrix& points, const std::vector<int>& labels);

struct ScanPoint {
    int k = 0;
    double inertia = 0.0;
    double silhouette = 0.0;
};

/// Fits each k in [k_min, k_max] with cfg (k overridden). silhouette is NaN
/// for k = 1.
std::vector<ScanPoint> inertia_scan(const FeatureMatrix& points, int k_min, int k_max, const ClusterConfig& cfg);

std::string to_string(InitMethod m);
InitMethod parse_init_method(const std::string& s);

} // namespace kmeans
} // namespace flowhunt
