#pragma once

#include "flowhunt/feature_matrix.hpp"
#include "flowhunt/rng.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace testing {

inline flowhunt::FeatureMatrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed, double lo = -1.0,
                                             double hi = 1.0) {
    flowhunt::Rng rng(seed);
    std::vector<std::string> names;
    for (std::size_t j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));
    std::vector<double> v(n * d);
    for (double& x : v) x = lo + (hi - lo) * rng.uniform();
    return flowhunt::FeatureMatrix(n, names, v);
}

inline flowhunt::FeatureMatrix matrix(const std::vector<std::vector<double>>& rows) {
    const std::size_t d = rows.empty() ? 0 : rows.front().size();
    std::vector<std::string> names;
    for (std::size_t j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));
    std::vector<double> v;
    for (const auto& r : rows) v.insert(v.end(), r.begin(), r.end());
    return flowhunt::FeatureMatrix(rows.size(), names, v);
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("flowhunt_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace testing
