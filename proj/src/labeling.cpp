#include "flowhunt/labeling.hpp"

#include "flowhunt/error.hpp"

#include <algorithm>
#include <map>

namespace flowhunt::labeling {

PseudoLabeledDataset label_dataset(const FeatureMatrix& m, const ClusterModel& model) {
    PseudoLabeledDataset ds;
    ds.labels = kmeans::predict(model, m);
    ds.k = model.k();
    ds.features = m;
    return ds;
}

PseudoLabeledDataset make_dataset(FeatureMatrix m, std::vector<int> labels, int k) {
    if (labels.size() != m.n_rows()) {
        throw DataError(std::to_string(labels.size()) + " labels for " + std::to_string(m.n_rows()) + " rows");
    }
    if (k < 1) throw DataError("label count k must be positive");
    for (int l : labels) {
        if (l < 0 || l >= k) throw DataError("label " + std::to_string(l) + " outside [0, " + std::to_string(k) + ")");
    }
    return {std::move(m), std::move(labels), k};
}

ClassDistribution class_distribution(const std::vector<int>& labels) {
    std::map<int, std::size_t> counts;
    for (int l : labels) ++counts[l];
    ClassDistribution out(counts.begin(), counts.end());
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

} // namespace flowhunt::labeling
