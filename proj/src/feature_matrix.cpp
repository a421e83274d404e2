#include "flowhunt/feature_matrix.hpp"

#include "flowhunt/error.hpp"

#include <algorithm>

namespace flowhunt {

FeatureMatrix::FeatureMatrix(std::size_t n_rows, std::vector<std::string> feature_names)
    : n_rows_(n_rows), names_(std::move(feature_names)),
      values_(n_rows_ * names_.size(), 0.0), missing_(n_rows_ * names_.size(), 0) {}

FeatureMatrix::FeatureMatrix(std::size_t n_rows, std::vector<std::string> feature_names, std::vector<double> values)
    : n_rows_(n_rows), names_(std::move(feature_names)), values_(std::move(values)) {
    if (values_.size() != n_rows_ * names_.size()) {
        throw DataError("feature matrix: " + std::to_string(values_.size()) + " values for " +
                        std::to_string(n_rows_) + " x " + std::to_string(names_.size()));
    }
    missing_.resize(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) missing_[i] = std::isnan(values_[i]) ? 1 : 0;
}

void FeatureMatrix::set(std::size_t r, std::size_t c, double v) {
    const std::size_t i = r * n_features() + c;
    values_[i] = v;
    missing_[i] = std::isnan(v) ? 1 : 0;
}

void FeatureMatrix::set_missing(std::size_t r, std::size_t c) {
    const std::size_t i = r * n_features() + c;
    values_[i] = std::numeric_limits<double>::quiet_NaN();
    missing_[i] = 1;
}

std::size_t FeatureMatrix::missing_count() const {
    return static_cast<std::size_t>(std::count(missing_.begin(), missing_.end(), 1));
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<std::size_t>& rows) const {
    FeatureMatrix out(rows.size(), names_);
    const std::size_t d = n_features();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= n_rows_) throw DataError("row index out of range");
        std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(rows[i] * d), d,
                    out.values_.begin() + static_cast<std::ptrdiff_t>(i * d));
        std::copy_n(missing_.begin() + static_cast<std::ptrdiff_t>(rows[i] * d), d,
                    out.missing_.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    out.encodings_ = encodings_;
    return out;
}

bool FeatureMatrix::operator==(const FeatureMatrix& other) const {
    if (n_rows_ != other.n_rows_ || names_ != other.names_ || missing_ != other.missing_ ||
        encodings_ != other.encodings_) {
        return false;
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!missing_[i] && values_[i] != other.values_[i]) return false;
    }
    return true;
}

} // namespace flowhunt
