#include "flowhunt/pipeline.hpp"

#include "flowhunt/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

namespace flowhunt {

using nlohmann::json;

namespace {

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const DataError& e) {
        throw DataError(std::string("stage '") + name + "': " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("stage '") + name + "': " + e.what());
    }
}

json stage_entry(const char* name, std::size_t rows, std::size_t cols) {
    spdlog::info("{:<10} rows={} columns={}", name, rows, cols);
    return {{"stage", name}, {"rows", rows}, {"columns", cols}};
}

json distribution_json(const ClassDistribution& d) {
    json out = json::array();
    for (const auto& [label, count] : d) out.push_back({label, count});
    return out;
}

std::vector<int> select(const std::vector<int>& v, const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(v[i]);
    return out;
}

} // namespace

PreparedData prepare_text(const PipelineConfig& cfg, const std::string& bytes, const std::vector<std::string>& exclude) {
    cfg.validate();
    PreparedData out;
    out.input_sha256 = sha256_hex(bytes);

    RawTable table = stage("ingest", [&] {
        out.loaded = ingest::parse_table(bytes, cfg.ingest);
        for (const auto& id : cfg.ingest.identifier_columns) {
            (out.loaded.contains(id) ? out.dropped_identifiers : out.missing_identifiers).push_back(id);
        }
        RawTable t = ingest::drop_identifiers(out.loaded, cfg.ingest);
        if (!cfg.truth_column.empty() && t.contains(cfg.truth_column)) {
            const Column& c = t.column(t.find(cfg.truth_column));
            std::vector<std::string> truth(t.n_rows());
            for (std::size_t r = 0; r < t.n_rows(); ++r) {
                if (c.missing[r]) continue;
                truth[r] = c.type == ColumnType::numeric ? ingest::format_double(c.numeric[r]) : c.text[r];
            }
            out.truth = std::move(truth);
            t = ingest::drop_columns(t, {cfg.truth_column});
        }
        for (const auto& name : exclude) {
            if (!t.contains(name)) throw DataError("input has no column '" + name + "'");
        }
        return ingest::drop_columns(t, exclude);
    });

    stage("clean", [&] { out.cleaned = prep::clean_report(table, cfg.missing); });
    stage("digitize", [&] { out.digitized = prep::digitize(out.cleaned.table); });
    stage("scale", [&] {
        out.scaler = prep::fit_scaler(out.digitized, cfg.scale);
        out.scaled = prep::apply_scaler(out.scaler, out.digitized);
    });
    return out;
}

PreparedData prepare(const PipelineConfig& cfg, const std::filesystem::path& input, const std::vector<std::string>& exclude) {
    const std::string bytes = stage("ingest", [&] {
        std::string b = read_file(input);
        if (b.empty()) throw DataError("input file '" + input.string() + "' is empty");
        return b;
    });
    return prepare_text(cfg, bytes, exclude);
}

Evaluation evaluate(const Probabilities& proba, const std::vector<int>& predicted, const std::vector<int>& truth,
                    int n_classes, bool with_roc) {
    Evaluation e;
    e.confusion = metrics::confusion(truth, predicted, n_classes);
    e.report = metrics::class_report(e.confusion);
    if (with_roc) e.roc = metrics::roc_one_vs_rest(proba, truth);
    return e;
}

json to_json(const Evaluation& e) {
    json classes = json::array();
    for (std::size_t c = 0; c < e.report.classes.size(); ++c) {
        const ClassStats& s = e.report.classes[c];
        classes.push_back({{"class", c},
                           {"precision", s.precision},
                           {"recall", s.recall},
                           {"f1", s.f1},
                           {"support", s.support},
                           {"ppv", s.precision},
                           {"npv", s.npv},
                           {"sensitivity", s.recall},
                           {"specificity", s.specificity},
                           {"one_vs_rest_accuracy", s.accuracy}});
    }
    json out = {{"total", e.report.total},
                {"accuracy", e.report.accuracy},
                {"macro_precision", e.report.macro_precision},
                {"macro_recall", e.report.macro_recall},
                {"macro_f1", e.report.macro_f1},
                {"kappa", e.report.kappa},
                {"expected_agreement", e.report.expected_agreement},
                {"zero_division", 0},
                {"classes", std::move(classes)},
                {"confusion", e.confusion.counts}};
    if (e.roc) {
        json auc = json::array();
        for (const auto& r : e.roc->per_class) auc.push_back(r ? json(r->auc) : json(nullptr));
        out["roc"] = {{"auc", std::move(auc)}, {"macro_auc", e.roc->macro_auc}};
    }
    return out;
}

namespace {

ModelBundle base_bundle(const PipelineConfig& cfg, const PreparedData& data) {
    ModelBundle b;
    b.ingest = cfg.ingest;
    b.truth_column = cfg.truth_column;
    b.dropped_identifiers = data.dropped_identifiers;
    b.dropped_columns = data.cleaned.dropped_columns;
    b.feature_columns = data.cleaned.table.column_names();
    b.missing = cfg.missing;
    b.fill_values = data.cleaned.fill_values;
    b.encodings = data.digitized.encodings();
    b.scaler = data.scaler;
    b.config = to_json(cfg);
    b.input_sha256 = data.input_sha256;
    return b;
}

json base_report(const PipelineConfig& cfg, const PreparedData& data) {
    json stages = json::array();
    stages.push_back(stage_entry("ingest", data.loaded.n_rows(), data.loaded.n_cols()));
    stages.push_back(stage_entry("clean", data.cleaned.table.n_rows(), data.cleaned.table.n_cols()));
    stages.push_back(stage_entry("digitize", data.digitized.n_rows(), data.digitized.n_features()));
    stages.push_back(stage_entry("scale", data.scaled.n_rows(), data.scaled.n_features()));
    return {{"format", "flowhunt-report"},
            {"schema_version", 1},
            {"config", to_json(cfg)},
            {"input", {{"sha256", data.input_sha256}, {"rows", data.loaded.n_rows()}, {"columns", data.loaded.n_cols()}}},
            {"stages", std::move(stages)},
            {"ingest",
             {{"dropped_identifiers", data.dropped_identifiers},
              {"missing_identifiers", data.missing_identifiers},
              {"truth_column", data.truth ? json(cfg.truth_column) : json(nullptr)}}},
            {"preprocess",
             {{"dropped_columns", data.cleaned.dropped_columns},
              {"rows_kept", data.cleaned.table.n_rows()},
              {"features", data.scaled.n_features()},
              {"scale", prep::to_string(cfg.scale)}}}};
}

// Split, fit the classifier on the training part and evaluate on the rest.
void train_and_evaluate(const PipelineConfig& cfg, const PreparedData& data, const std::vector<int>& labels, int k,
                        PipelineResult& result) {
    const StageSeeds seeds = stage_seeds(cfg.seed);
    const FeatureMatrix& x = data.scaled;

    const SplitResult parts = stage("split", [&] {
        return prep::split(x.n_rows(), labels, SplitSpec{cfg.test_fraction, seeds.split, cfg.stratify});
    });
    result.report["stages"].push_back(stage_entry("split", parts.train.size(), x.n_features()));

    BoostParams params = cfg.boost;
    params.seed = seeds.boost;
    result.bundle.booster = stage("train", [&] {
        const auto ds = labeling::make_dataset(x.select_rows(parts.train), select(labels, parts.train), k);
        return boost::fit(ds, params);
    });
    result.report["stages"].push_back(stage_entry("train", parts.train.size(), x.n_features()));

    stage("evaluate", [&] {
        const FeatureMatrix test = x.select_rows(parts.test);
        const Probabilities proba = boost::predict_proba(result.bundle.booster, test);
        result.test_predictions = boost::predict(result.bundle.booster, test);
        const std::vector<int> test_labels = select(labels, parts.test);
        result.evaluation = evaluate(proba, result.test_predictions, test_labels, k, cfg.roc);
        result.test_rows.clear();
        for (std::size_t i : parts.test) result.test_rows.push_back(data.cleaned.kept_rows[i]);

        if (data.truth) {
            std::vector<std::string> names;
            for (std::size_t r : data.cleaned.kept_rows) names.push_back((*data.truth)[r]);
            std::vector<std::string> classes = names;
            std::sort(classes.begin(), classes.end());
            classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
            if (classes.size() >= 2) {
                std::vector<int> truth_idx;
                for (const auto& n : names) {
                    truth_idx.push_back(static_cast<int>(std::lower_bound(classes.begin(), classes.end(), n) - classes.begin()));
                }
                const auto mapping = metrics::align_labels(labels, truth_idx);
                std::vector<int> aligned;
                for (int p : result.test_predictions) {
                    aligned.push_back(static_cast<std::size_t>(p) < mapping.size() ? mapping[static_cast<std::size_t>(p)] : 0);
                }
                const std::vector<int> truth_test = select(truth_idx, parts.test);
                result.truth_evaluation = evaluate(proba, aligned, truth_test, static_cast<int>(classes.size()), false);
                result.bundle.truth_alignment.clear();
                for (int c = 0; c < k; ++c) {
                    result.bundle.truth_alignment.push_back(
                        static_cast<std::size_t>(c) < mapping.size() ? classes[static_cast<std::size_t>(mapping[static_cast<std::size_t>(c)])] : "");
                }
                json gt = to_json(*result.truth_evaluation);
                gt["classes_by_name"] = classes;
                gt["label_ari"] = metrics::adjusted_rand_index(labels, truth_idx);
                gt["alignment"] = result.bundle.truth_alignment;
                result.report["ground_truth"] = std::move(gt);
            } else {
                result.report["ground_truth"] = nullptr;
            }
        } else {
            result.report["ground_truth"] = nullptr;
        }
    });

    result.report["train"] = {{"rows", parts.train.size()},
                              {"test_rows", parts.test.size()},
                              {"split_warnings", parts.warnings},
                              {"logloss", result.bundle.booster.train_logloss}};
    json ev = to_json(result.evaluation);
    ev["reference"] = "pseudo-labels";
    result.report["evaluation"] = std::move(ev);
    result.report["test_predictions"] = {{"rows", result.test_rows}, {"predicted", result.test_predictions}};
    result.report["bundle_sha256"] = sha256_hex(serialize_bundle(result.bundle));
}

} // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& input) {
    PreparedData data = prepare(cfg, input);
    PipelineResult result;
    result.bundle = base_bundle(cfg, data);
    result.report = base_report(cfg, data);

    ClusterConfig ccfg = cfg.cluster;
    ccfg.seed = stage_seeds(cfg.seed).cluster;
    result.cluster_fit = stage("cluster", [&] { return kmeans::fit(data.scaled, ccfg); });
    result.report["stages"].push_back(stage_entry("cluster", data.scaled.n_rows(), data.scaled.n_features()));
    result.bundle.cluster = result.cluster_fit.model;

    const PseudoLabeledDataset ds = stage("label", [&] { return labeling::label_dataset(data.scaled, result.cluster_fit.model); });
    result.pseudo_labels = ds.labels;
    result.report["stages"].push_back(stage_entry("label", ds.labels.size(), data.scaled.n_features() + 1));

    const ClusterModel& m = result.cluster_fit.model;
    result.report["cluster"] = {{"k", m.k()},
                                {"inertia", m.inertia},
                                {"iterations", m.n_iterations},
                                {"converged", m.converged},
                                {"cluster_sizes", m.cluster_sizes},
                                {"reseeds", result.cluster_fit.reseeds},
                                {"best_restart", result.cluster_fit.best_restart},
                                {"inertia_trace", result.cluster_fit.inertia_trace},
                                {"distribution", distribution_json(labeling::class_distribution(ds.labels))}};

    train_and_evaluate(cfg, data, ds.labels, ds.k, result);
    return result;
}

PipelineResult run_training(const PipelineConfig& cfg, const std::filesystem::path& input, const std::string& label_column) {
    PreparedData data = prepare(cfg, input, {label_column});
    const std::vector<int> labels = stage("label", [&] {
        const Column& c = data.loaded.column(data.loaded.find(label_column));
        if (c.type != ColumnType::numeric) throw DataError("label column '" + label_column + "' is not numeric");
        std::vector<int> out;
        for (std::size_t r : data.cleaned.kept_rows) {
            const double v = c.numeric[r];
            if (c.missing[r] || v < 0 || v != static_cast<double>(static_cast<int>(v))) {
                throw DataError("row " + std::to_string(r) + " has no valid class label");
            }
            out.push_back(static_cast<int>(v));
        }
        return out;
    });
    const int k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;

    PipelineResult result;
    result.bundle = base_bundle(cfg, data);
    result.report = base_report(cfg, data);
    result.pseudo_labels = labels;
    result.report["labels"] = {{"column", label_column}, {"k", k},
                               {"distribution", distribution_json(labeling::class_distribution(labels))}};
    train_and_evaluate(cfg, data, labels, k, result);
    return result;
}

std::string confusion_csv(const ConfusionMatrix& cm) {
    std::string out = "true\\predicted";
    for (int c = 0; c < cm.n_classes; ++c) out += "," + std::to_string(c);
    out += "\n";
    for (int t = 0; t < cm.n_classes; ++t) {
        out += std::to_string(t);
        for (auto v : cm.counts[static_cast<std::size_t>(t)]) out += "," + std::to_string(v);
        out += "\n";
    }
    return out;
}

std::string roc_csv(const RocCurve& roc) {
    std::string out = "fpr,tpr\n";
    for (const auto& [fpr, tpr] : roc.points) out += ingest::format_double(fpr) + "," + ingest::format_double(tpr) + "\n";
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write '" + tmp.string() + "'");
        out << contents;
        if (!out) throw DataError("write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

void write_outputs(const PipelineResult& result, const std::filesystem::path& dir) {
    std::vector<std::pair<std::string, std::string>> files;
    files.emplace_back("bundle.json", serialize_bundle(result.bundle));
    files.emplace_back("report.json", result.report.dump(2) + "\n");
    files.emplace_back("confusion.csv", confusion_csv(result.evaluation.confusion));
    if (result.evaluation.roc) {
        for (std::size_t c = 0; c < result.evaluation.roc->per_class.size(); ++c) {
            const auto& r = result.evaluation.roc->per_class[c];
            if (r) files.emplace_back("roc_class_" + std::to_string(c) + ".csv", roc_csv(*r));
        }
    }

    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());

    std::vector<std::filesystem::path> staged;
    try {
        for (const auto& [name, body] : files) {
            const auto tmp = dir / (name + ".tmp");
            std::ofstream out(tmp, std::ios::binary);
            if (!out) throw DataError("cannot write '" + tmp.string() + "'");
            staged.push_back(tmp);
            out << body;
            if (!out) throw DataError("write to '" + tmp.string() + "' failed");
        }
    } catch (...) {
        for (const auto& p : staged) std::filesystem::remove(p, ec);
        throw;
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("roc_class_", 0) == 0 && entry.path().extension() == ".csv") std::filesystem::remove(entry.path(), ec);
    }
    for (const auto& [name, body] : files) std::filesystem::rename(dir / (name + ".tmp"), dir / name);
}

ScoreResult score_text(const ModelBundle& bundle, const std::string& bytes) {
    IngestConfig ic = bundle.ingest;
    for (const auto& e : bundle.encodings) ic.categorical_columns.push_back(e.column);
    const RawTable loaded = ingest::parse_table(bytes, ic);

    ScoreResult out;
    if (!bundle.truth_column.empty() && loaded.contains(bundle.truth_column)) {
        const Column& c = loaded.column(loaded.find(bundle.truth_column));
        std::vector<std::string> truth(loaded.n_rows());
        for (std::size_t r = 0; r < loaded.n_rows(); ++r) {
            if (!c.missing[r]) truth[r] = c.type == ColumnType::numeric ? ingest::format_double(c.numeric[r]) : c.text[r];
        }
        out.truth = std::move(truth);
    }

    std::vector<std::string> absent;
    std::vector<Column> cols;
    for (const auto& name : bundle.feature_columns) {
        const std::size_t j = loaded.find(name);
        if (j == RawTable::npos) {
            absent.push_back(name);
        } else {
            cols.push_back(loaded.column(j));
        }
    }
    if (!absent.empty()) {
        std::string msg = "input lacks feature column";
        msg += absent.size() > 1 ? "s " : " ";
        for (std::size_t i = 0; i < absent.size(); ++i) msg += (i ? ", '" : "'") + absent[i] + "'";
        throw DataError(msg);
    }
    RawTable table(std::move(cols), loaded.n_rows());
    if (!bundle.fill_values.empty()) table = prep::apply_fill(table, bundle.fill_values);
    const FeatureMatrix x = prep::apply_scaler(bundle.scaler, prep::digitize(table, bundle.encodings));
    out.proba = boost::predict_proba(bundle.booster, x);
    out.predicted.resize(out.proba.n_rows);
    for (std::size_t r = 0; r < out.proba.n_rows; ++r) {
        const auto row = out.proba.row(r);
        out.predicted[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

ScoreResult score(const ModelBundle& bundle, const std::filesystem::path& input) {
    return score_text(bundle, read_file(input));
}

std::string scores_csv(const ScoreResult& s) {
    std::string out = "row,predicted";
    for (std::size_t c = 0; c < s.proba.n_classes; ++c) out += ",p_" + std::to_string(c);
    out += "\n";
    for (std::size_t r = 0; r < s.proba.n_rows; ++r) {
        out += std::to_string(r) + "," + std::to_string(s.predicted[r]);
        for (double p : s.proba.row(r)) out += "," + ingest::format_double(p);
        out += "\n";
    }
    return out;
}

} // namespace flowhunt
