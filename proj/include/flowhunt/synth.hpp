#pragma once

#include "flowhunt/feature_matrix.hpp"
#include "flowhunt/ingest.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace flowhunt {

/// Independent per-feature Gaussian model of one traffic class.
struct AttackProfile {
    std::string name;
    std::vector<double> mean;
    std::vector<double> stddev;
    std::size_t row_count = 0;
};

struct ProfileSet {
    std::vector<std::string> feature_names;
    std::vector<unsigned char> nonnegative; // clip draws at 0 for these features
    std::vector<AttackProfile> profiles;

    void validate() const;
};

struct SynthData {
    FeatureMatrix features;
    std::vector<int> truth;              // index into class_names
    std::vector<std::string> class_names; // profile names, in profile order
};

namespace synth {

/// The 78 flow features left after dropping identifiers and the
/// rate column that carries Infinity/NaN in real exports.
const std::vector<std::string>& default_feature_names();

/// Seven classes (benign plus six attack behaviours), 78 features,
/// `rows_per_class` rows each. Class means differ from each other by at
/// least 6 within-class standard deviations on many features.
ProfileSet default_profiles(std::size_t rows_per_class = 700);

/// Key-value profile format:
///
///   # comment
///   [features]
///   names = a, b, c
///   nonnegative = all          (or none, or a comma list of names)
///
///   [profile]
///   name = dos
///   rows = 700
///   mean = 1, 2.5, 0*10        (value*count repeats a value)
///   stddev = 0.1*13
///
/// Keys are case-sensitive; unknown keys and sections are errors.
ProfileSet parse_profiles(std::string_view text);
ProfileSet load_profiles(const std::filesystem::path& path);
std::string format_profiles(const ProfileSet& set);

/// Replaces every profile's row count.
ProfileSet with_rows_per_class(ProfileSet set, std::size_t rows);

/// Draws each profile's rows, clips non-negative features at 0, then
/// shuffles all rows; a pure function of (set, seed).
SynthData generate(const ProfileSet& set, std::uint64_t seed);

/// Features plus a trailing text column holding the generating profile name.
RawTable to_table(const SynthData& data, const std::string& label_column = "Label");

} // namespace synth
} // namespace flowhunt
