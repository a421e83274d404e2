#pragma once

#include "flowhunt/feature_matrix.hpp"
#include "flowhunt/kmeans.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace flowhunt {

/// Feature rows joined with their cluster-derived class (the
/// "Cluster_Labels" column).
struct PseudoLabeledDataset {
    FeatureMatrix features;
    std::vector<int> labels;
    int k = 0;
};

/// (label, count) pairs, descending count, ties by ascending label.
using ClassDistribution = std::vector<std::pair<int, std::size_t>>;

namespace labeling {

inline constexpr const char* label_column = "Cluster_Labels";

PseudoLabeledDataset label_dataset(const FeatureMatrix& m, const ClusterModel& model);

/// Wraps existing labels; checks lengths and that every label is in [0, k).
PseudoLabeledDataset make_dataset(FeatureMatrix m, std::vector<int> labels, int k);

ClassDistribution class_distribution(const std::vector<int>& labels);

} // namespace labeling
} // namespace flowhunt
