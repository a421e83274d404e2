#pragma once

#include "flowhunt/boost.hpp"
#include "flowhunt/ingest.hpp"
#include "flowhunt/kmeans.hpp"
#include "flowhunt/labeling.hpp"
#include "flowhunt/metrics.hpp"
#include "flowhunt/preprocess.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace flowhunt {

/// Every tunable of the end-to-end run. Stage seeds are not configured
/// directly; they are derived from `seed` (see stage_seeds()).
struct PipelineConfig {
    IngestConfig ingest;
    /// Optional column holding externally known classes; it is never used
    /// as a feature, only for extra evaluation when present.
    std::string truth_column = "Label";

    MissingPolicy missing;
    ScaleMethod scale = ScaleMethod::min_max;
    double test_fraction = 0.2;
    bool stratify = true;

    ClusterConfig cluster;
    BoostParams boost;
    bool roc = true;

    std::uint64_t seed = 0;

    void validate() const;
};

struct StageSeeds {
    std::uint64_t cluster;
    std::uint64_t split;
    std::uint64_t boost;
};

/// derive_seed(seed, "cluster" | "split" | "boost").
StageSeeds stage_seeds(std::uint64_t seed);

nlohmann::json to_json(const PipelineConfig& cfg);
/// Unknown keys are ConfigErrors; missing keys keep their defaults.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);

/// Everything needed to turn a raw CSV into the classifier's input and to
/// classify it.
struct ModelBundle {
    static constexpr int schema_version = 1;

    IngestConfig ingest;
    std::string truth_column;
    std::vector<std::string> dropped_identifiers;
    std::vector<std::string> dropped_columns;    // by the missing-value policy
    std::vector<std::string> feature_columns;    // raw columns used, in order
    MissingPolicy missing;
    std::vector<ImputeValue> fill_values;
    std::vector<CategoricalEncoding> encodings;
    Scaler scaler;
    std::optional<ClusterModel> cluster;
    BoostedModel booster;
    /// cluster index -> truth class name, when a truth column was available
    std::vector<std::string> truth_alignment;
    nlohmann::json config;
    std::string input_sha256;
};

nlohmann::json to_json(const ModelBundle& b);
/// Verifies format tag, schema version and checksum.
ModelBundle bundle_from_json(const nlohmann::json& j);
std::string serialize_bundle(const ModelBundle& b);
ModelBundle parse_bundle(const std::string& text);
ModelBundle load_bundle(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// Output of ingest + clean + digitize + scale on a training file.
struct PreparedData {
    RawTable loaded;                         // as read, all columns
    std::vector<std::string> dropped_identifiers;
    std::vector<std::string> missing_identifiers;
    std::optional<std::vector<std::string>> truth; // per loaded row
    CleanResult cleaned;
    FeatureMatrix digitized;
    Scaler scaler;
    FeatureMatrix scaled;
    std::string input_sha256;
};

/// `exclude` lists extra columns (e.g. a label column) removed before cleaning.
PreparedData prepare(const PipelineConfig& cfg, const std::filesystem::path& input,
                     const std::vector<std::string>& exclude = {});
PreparedData prepare_text(const PipelineConfig& cfg, const std::string& bytes,
                          const std::vector<std::string>& exclude = {});

struct Evaluation {
    ConfusionMatrix confusion;
    ClassReport report;
    std::optional<MultiClassRoc> roc;
};

Evaluation evaluate(const Probabilities& proba, const std::vector<int>& predicted, const std::vector<int>& truth,
                    int n_classes, bool with_roc);

nlohmann::json to_json(const Evaluation& e);

struct PipelineResult {
    ModelBundle bundle;
    nlohmann::json report;
    Evaluation evaluation;                    // against pseudo-labels, test split
    std::optional<Evaluation> truth_evaluation;
    ClusterFit cluster_fit;
    std::vector<int> pseudo_labels;           // per cleaned row
    std::vector<std::size_t> test_rows;       // input row indices
    std::vector<int> test_predictions;
};

/// ingest -> clean -> digitize -> scale -> k-means -> pseudo-label ->
/// split -> boost -> evaluate. Stage failures are rethrown with the stage
/// name prefixed.
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& input);

/// Classifier-only variant: labels come from `label_column` of the input.
PipelineResult run_training(const PipelineConfig& cfg, const std::filesystem::path& input,
                            const std::string& label_column);

/// Writes bundle.json, report.json, confusion.csv and roc_class_<c>.csv into
/// `dir`. Files are staged under temporary names and renamed at the end;
/// on failure nothing new is left behind.
void write_outputs(const PipelineResult& result, const std::filesystem::path& dir);

std::string confusion_csv(const ConfusionMatrix& cm);
std::string roc_csv(const RocCurve& roc);

struct ScoreResult {
    std::vector<int> predicted;
    Probabilities proba;
    std::optional<std::vector<std::string>> truth; // bundle's truth column when present
};

/// Applies the bundle's recorded drops, fills, encodings and scaler, then
/// the classifier. Never refits anything.
ScoreResult score(const ModelBundle& bundle, const std::filesystem::path& input);
ScoreResult score_text(const ModelBundle& bundle, const std::string& bytes);

std::string scores_csv(const ScoreResult& s);

/// Atomically replaces `path` with `contents`.
void write_file(const std::filesystem::path& path, const std::string& contents);

} // namespace flowhunt
