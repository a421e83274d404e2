#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace flowhunt {

/// Ordinal code table for one categorical column: categories[i] encodes to i.
struct CategoricalEncoding {
    std::string column;
    std::vector<std::string> categories;

    bool operator==(const CategoricalEncoding&) const = default;
};

/// Dense row-major matrix of flow features. Missing cells hold NaN and are
/// flagged in the mask.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::size_t n_rows, std::vector<std::string> feature_names);
    /// Builds from row-major values; NaN cells become missing.
    FeatureMatrix(std::size_t n_rows, std::vector<std::string> feature_names, std::vector<double> values);

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_features() const { return names_.size(); }
    const std::vector<std::string>& feature_names() const { return names_; }

    double at(std::size_t r, std::size_t c) const { return values_[r * n_features() + c]; }
    bool is_missing(std::size_t r, std::size_t c) const { return missing_[r * n_features() + c] != 0; }
    void set(std::size_t r, std::size_t c, double v);
    void set_missing(std::size_t r, std::size_t c);

    std::span<const double> row(std::size_t r) const {
        return {values_.data() + r * n_features(), n_features()};
    }
    const std::vector<double>& values() const { return values_; }
    std::size_t missing_count() const;

    const std::vector<CategoricalEncoding>& encodings() const { return encodings_; }
    void set_encodings(std::vector<CategoricalEncoding> enc) { encodings_ = std::move(enc); }

    FeatureMatrix select_rows(const std::vector<std::size_t>& rows) const;

    /// Cell-wise equality treating two missing cells as equal.
    bool operator==(const FeatureMatrix& other) const;

private:
    std::size_t n_rows_ = 0;
    std::vector<std::string> names_;
    std::vector<double> values_;
    std::vector<unsigned char> missing_;
    std::vector<CategoricalEncoding> encodings_;
};

} // namespace flowhunt
