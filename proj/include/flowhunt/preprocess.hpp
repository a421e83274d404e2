#pragma once

#include "flowhunt/feature_matrix.hpp"
#include "flowhunt/ingest.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace flowhunt {

enum class MissingMode { drop_column, drop_row, impute_median };

struct MissingPolicy {
    MissingMode mode = MissingMode::drop_column;
    /// drop_column removes columns whose missing fraction exceeds this.
    double column_drop_threshold = 0.0;

    void validate() const;
};

/// Fill value learned by impute_median for one column.
struct ImputeValue {
    std::string column;
    bool numeric = true;
    double number = 0.0;
    std::string text;

    bool operator==(const ImputeValue&) const = default;
};

struct CleanResult {
    RawTable table;
    std::vector<std::string> dropped_columns;
    std::vector<std::size_t> kept_rows;   // indices into the input table
    std::vector<ImputeValue> fill_values; // impute_median only
};

enum class ScaleMethod { none, min_max, z_score };

/// Per-feature affine transform. For min_max `offset`/`range` are min and
/// max; for z_score they are mean and (population) stddev.
struct Scaler {
    ScaleMethod method = ScaleMethod::none;
    std::vector<std::string> feature_names;
    std::vector<double> offset;
    std::vector<double> spread;

    bool operator==(const Scaler&) const = default;
};

struct SplitSpec {
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
    bool stratify = true;

    void validate() const;
};

struct SplitResult {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::vector<std::string> warnings;
};

namespace prep {

CleanResult clean_report(const RawTable& table, const MissingPolicy& policy);
RawTable clean(const RawTable& table, const MissingPolicy& policy);

/// Replaces missing cells of the named columns with stored fill values.
RawTable apply_fill(const RawTable& table, const std::vector<ImputeValue>& fill);

/// Numeric columns are copied; categorical columns get a fresh ordinal
/// encoding over their sorted distinct values.
FeatureMatrix digitize(const RawTable& table);

/// Applies stored encodings; an unseen category is a DataError.
FeatureMatrix digitize(const RawTable& table, const std::vector<CategoricalEncoding>& encodings);

/// Fits on `rows` only (all rows when empty). Missing cells are ignored.
Scaler fit_scaler(const FeatureMatrix& m, ScaleMethod method, const std::vector<std::size_t>& rows = {});
FeatureMatrix apply_scaler(const Scaler& s, const FeatureMatrix& m);
FeatureMatrix inverse_scaler(const Scaler& s, const FeatureMatrix& m);

/// Disjoint train/test indices (each ascending). |test| = round(f * n).
/// With labels and spec.stratify, classes are apportioned by largest remainder.
SplitResult split(std::size_t n_rows, const std::optional<std::vector<int>>& labels, const SplitSpec& spec);

std::string to_string(MissingMode m);
std::string to_string(ScaleMethod m);
MissingMode parse_missing_mode(const std::string& s);
ScaleMethod parse_scale_method(const std::string& s);

} // namespace prep
} // namespace flowhunt
