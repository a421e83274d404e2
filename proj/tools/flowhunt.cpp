// flowhunt: discover traffic classes in flow CSVs with k-means and train a
// boosted-tree classifier on the discovered labels.

#include "flowhunt/error.hpp"
#include "flowhunt/pipeline.hpp"
#include "flowhunt/synth.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fh = flowhunt;
using nlohmann::json;

namespace {

std::vector<std::string> split_list(const std::string& s, bool keep_empty) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = s.find(',', start);
        std::string item = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (keep_empty || !item.empty()) out.push_back(std::move(item));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

// Flag values that, when given, replace the corresponding config field.
struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;

    std::optional<std::string> drop_cols, na_tokens, categorical, truth_col;
    std::optional<char> delimiter;
    bool no_header = false;

    std::optional<std::string> missing, scale;
    std::optional<double> drop_threshold, test_frac;
    bool no_stratify = false;

    std::optional<int> k, max_iter, restarts;
    std::optional<std::string> init;
    std::optional<double> tol;

    std::optional<int> rounds, max_depth;
    std::optional<double> eta, lambda, gamma, min_child_weight;

    bool no_roc = false;
};

void add_ingest_flags(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config_path, "JSON config file; flags override its values")->check(CLI::ExistingFile);
    app->add_option("--drop-cols", o.drop_cols, "comma list of identifier columns to drop (replaces the default list)");
    app->add_option("--na-tokens", o.na_tokens, "comma list of cell values treated as missing");
    app->add_option("--delimiter", o.delimiter, "field delimiter");
    app->add_flag("--no-header", o.no_header, "first line is data; columns are named c0, c1, ...");
    app->add_option("--categorical", o.categorical, "comma list of columns always read as text");
    app->add_option("--truth-col", o.truth_col, "column with known classes, excluded from features (empty to disable)");
}

void add_prep_flags(CLI::App* app, Overrides& o) {
    app->add_option("--missing", o.missing, "missing-value policy")->check(CLI::IsMember({"drop-col", "drop-row", "impute"}));
    app->add_option("--drop-threshold", o.drop_threshold, "drop-col removes columns whose missing fraction exceeds this");
    app->add_option("--scale", o.scale, "feature scaling")->check(CLI::IsMember({"minmax", "zscore", "none"}));
    app->add_option("--seed", o.seed, "global seed; stage seeds are derived from it");
}

void add_cluster_flags(CLI::App* app, Overrides& o) {
    app->add_option("--k", o.k, "number of clusters");
    app->add_option("--init", o.init, "centroid initialisation")->check(CLI::IsMember({"first-k", "random", "kmeans++"}));
    app->add_option("--max-iter", o.max_iter, "Lloyd iteration cap");
    app->add_option("--tol", o.tol, "stop once no centroid moves more than this");
    app->add_option("--restarts", o.restarts, "independent restarts; lowest inertia wins");
}

void add_boost_flags(CLI::App* app, Overrides& o) {
    app->add_option("--test-frac", o.test_frac, "held-out fraction");
    app->add_flag("--no-stratify", o.no_stratify, "plain random split instead of a stratified one");
    app->add_option("--rounds", o.rounds, "boosting rounds");
    app->add_option("--eta", o.eta, "learning rate");
    app->add_option("--max-depth", o.max_depth, "maximum tree depth");
    app->add_option("--lambda", o.lambda, "L2 penalty on leaf weights");
    app->add_option("--gamma", o.gamma, "minimum split gain kept by pruning");
    app->add_option("--min-child-weight", o.min_child_weight, "minimum hessian sum per child");
    app->add_flag("--no-roc", o.no_roc, "skip ROC curves");
}

fh::PipelineConfig resolve(const Overrides& o) {
    fh::PipelineConfig c = o.config_path.empty() ? fh::PipelineConfig{} : fh::load_config(o.config_path);
    if (o.seed) c.seed = *o.seed;
    if (o.drop_cols) c.ingest.identifier_columns = split_list(*o.drop_cols, false);
    if (o.na_tokens) c.ingest.na_tokens = split_list(*o.na_tokens, true);
    if (o.categorical) c.ingest.categorical_columns = split_list(*o.categorical, false);
    if (o.truth_col) c.truth_column = *o.truth_col;
    if (o.delimiter) c.ingest.delimiter = *o.delimiter;
    if (o.no_header) c.ingest.has_header = false;
    if (o.missing) c.missing.mode = fh::prep::parse_missing_mode(*o.missing);
    if (o.drop_threshold) c.missing.column_drop_threshold = *o.drop_threshold;
    if (o.scale) c.scale = fh::prep::parse_scale_method(*o.scale);
    if (o.test_frac) c.test_fraction = *o.test_frac;
    if (o.no_stratify) c.stratify = false;
    if (o.k) c.cluster.k = *o.k;
    if (o.init) c.cluster.init = fh::kmeans::parse_init_method(*o.init);
    if (o.max_iter) c.cluster.max_iter = *o.max_iter;
    if (o.tol) c.cluster.tol = *o.tol;
    if (o.restarts) c.cluster.n_restarts = *o.restarts;
    if (o.rounds) c.boost.n_rounds = *o.rounds;
    if (o.eta) c.boost.learning_rate = *o.eta;
    if (o.max_depth) c.boost.max_depth = *o.max_depth;
    if (o.lambda) c.boost.lambda = *o.lambda;
    if (o.gamma) c.boost.gamma = *o.gamma;
    if (o.min_child_weight) c.boost.min_child_weight = *o.min_child_weight;
    if (o.no_roc) c.roc = false;
    c.validate();
    return c;
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
    } else {
        fh::write_file(out_path, text);
    }
}

fh::ClusterConfig seeded_cluster(const fh::PipelineConfig& cfg) {
    fh::ClusterConfig c = cfg.cluster;
    c.seed = fh::stage_seeds(cfg.seed).cluster;
    return c;
}

// Kept input rows (identifiers included) followed by one extra column.
fh::RawTable with_column(const fh::PreparedData& d, fh::Column extra) {
    const fh::RawTable kept = fh::ingest::select_rows(d.loaded, d.cleaned.kept_rows);
    std::vector<fh::Column> cols = kept.columns();
    if (kept.contains(extra.name)) {
        throw fh::DataError("input already has a column named '" + extra.name + "'");
    }
    cols.push_back(std::move(extra));
    return fh::RawTable(std::move(cols), kept.n_rows());
}

fh::Column int_column(std::string name, const std::vector<int>& values) {
    fh::Column c;
    c.name = std::move(name);
    c.type = fh::ColumnType::numeric;
    for (int v : values) c.numeric.push_back(v);
    c.missing.assign(values.size(), 0);
    return c;
}

json distribution_json(const std::vector<int>& labels) {
    json out = json::object();
    for (const auto& [label, count] : fh::labeling::class_distribution(labels)) out[std::to_string(label)] = count;
    return out;
}

std::pair<int, int> parse_range(const std::string& s) {
    const auto dots = s.find("..");
    if (dots == std::string::npos) throw fh::ConfigError("--scan-k expects a..b, got '" + s + "'");
    try {
        return {std::stoi(s.substr(0, dots)), std::stoi(s.substr(dots + 2))};
    } catch (const std::exception&) {
        throw fh::ConfigError("--scan-k expects a..b, got '" + s + "'");
    }
}

// Evaluates `bundle` on a labelled file. Labels come from an integer column
// (pseudo-labels) or, if absent, from the bundle's truth column.
json evaluate_bundle(const fh::ModelBundle& bundle, const std::string& input, const std::string& label_col,
                     bool roc, const std::string& out_dir) {
    const std::string bytes = fh::read_file(input);
    const fh::ScoreResult s = fh::score_text(bundle, bytes);
    const int n_classes = bundle.booster.n_classes;

    fh::IngestConfig ic = bundle.ingest;
    const fh::RawTable raw = fh::ingest::parse_table(bytes, ic);
    std::vector<int> truth;
    std::vector<int> predicted = s.predicted;
    std::string reference;
    if (raw.contains(label_col)) {
        const fh::Column& c = raw.column(raw.find(label_col));
        if (c.type != fh::ColumnType::numeric) throw fh::DataError("label column '" + label_col + "' is not numeric");
        for (std::size_t r = 0; r < raw.n_rows(); ++r) {
            const double v = c.numeric[r];
            if (c.missing[r] || v < 0 || v >= n_classes || v != static_cast<int>(v)) {
                throw fh::DataError("row " + std::to_string(r) + ": label outside [0, " + std::to_string(n_classes) + ")");
            }
            truth.push_back(static_cast<int>(v));
        }
        reference = label_col;
    } else if (s.truth && !bundle.truth_alignment.empty()) {
        std::vector<std::string> classes = bundle.truth_alignment;
        std::sort(classes.begin(), classes.end());
        classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
        auto index_of = [&](const std::string& name) {
            const auto it = std::lower_bound(classes.begin(), classes.end(), name);
            if (it == classes.end() || *it != name) throw fh::DataError("class '" + name + "' is unknown to the bundle");
            return static_cast<int>(it - classes.begin());
        };
        for (const auto& name : *s.truth) truth.push_back(index_of(name));
        for (int& p : predicted) p = index_of(bundle.truth_alignment[static_cast<std::size_t>(p)]);
        reference = bundle.truth_column;
        roc = false;
        json ev = fh::to_json(fh::evaluate(s.proba, predicted, truth, static_cast<int>(classes.size()), false));
        ev["reference"] = reference;
        ev["classes_by_name"] = classes;
        if (!out_dir.empty()) {
            std::filesystem::create_directories(out_dir);
            fh::write_file(std::filesystem::path(out_dir) / "confusion.csv",
                           fh::confusion_csv(fh::metrics::confusion(truth, predicted, static_cast<int>(classes.size()))));
        }
        return ev;
    } else {
        throw fh::DataError("input has neither label column '" + label_col + "' nor the bundle's truth column");
    }

    const fh::Evaluation e = fh::evaluate(s.proba, predicted, truth, n_classes, roc);
    json ev = fh::to_json(e);
    ev["reference"] = reference;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        fh::write_file(std::filesystem::path(out_dir) / "confusion.csv", fh::confusion_csv(e.confusion));
        if (e.roc) {
            for (std::size_t c = 0; c < e.roc->per_class.size(); ++c) {
                if (e.roc->per_class[c]) {
                    fh::write_file(std::filesystem::path(out_dir) / ("roc_class_" + std::to_string(c) + ".csv"),
                                   fh::roc_csv(*e.roc->per_class[c]));
                }
            }
        }
    }
    return ev;
}

int run(int argc, char** argv) {
    CLI::App app{"flowhunt: cluster flow records into traffic classes and train a boosted-tree classifier"};
    app.require_subcommand(1);
    bool verbose = false;
    bool quiet = false;
    app.add_flag("-v,--verbose", verbose, "debug logging");
    app.add_flag("-q,--quiet", quiet, "warnings and errors only");

    Overrides o;
    std::string input, out, out_dir, bundle_path, profiles_path, write_profiles, scan_k;
    std::string label_col = fh::labeling::label_column;
    std::size_t n_per_class = 0;
    std::uint64_t synth_seed = 0;
    bool dist = false;
    bool print_config = false;

    auto* ingest_cmd = app.add_subcommand("ingest", "read a CSV, drop identifier columns, write the result");
    ingest_cmd->add_option("--input", input, "input CSV")->required();
    ingest_cmd->add_option("--out", out, "output CSV (default stdout)");
    add_ingest_flags(ingest_cmd, o);

    auto* prep_cmd = app.add_subcommand("preprocess", "ingest, clean, encode and scale; write the feature CSV");
    prep_cmd->add_option("--input", input, "input CSV")->required();
    prep_cmd->add_option("--out", out, "output CSV (default stdout)");
    add_ingest_flags(prep_cmd, o);
    add_prep_flags(prep_cmd, o);

    auto* cluster_cmd = app.add_subcommand("cluster", "fit k-means and print a JSON summary");
    cluster_cmd->add_option("--input", input, "input CSV")->required();
    cluster_cmd->add_option("--out", out, "output file (default stdout)");
    cluster_cmd->add_option("--scan-k", scan_k, "a..b: write k,inertia,silhouette CSV instead");
    add_ingest_flags(cluster_cmd, o);
    add_prep_flags(cluster_cmd, o);
    add_cluster_flags(cluster_cmd, o);

    auto* label_cmd = app.add_subcommand("label", "append cluster labels to the input rows");
    label_cmd->add_option("--input", input, "input CSV")->required();
    label_cmd->add_option("--out", out, "output CSV (default stdout)");
    label_cmd->add_flag("--dist", dist, "print the label distribution as JSON instead of the CSV");
    add_ingest_flags(label_cmd, o);
    add_prep_flags(label_cmd, o);
    add_cluster_flags(label_cmd, o);

    auto* train_cmd = app.add_subcommand("train", "train the classifier on an integer label column");
    train_cmd->add_option("--input", input, "labelled CSV, e.g. the output of `label`")->required();
    train_cmd->add_option("--label-col", label_col, "integer class column")->capture_default_str();
    train_cmd->add_option("--out-dir", out_dir, "directory for bundle, report, confusion and ROC files")->required();
    add_ingest_flags(train_cmd, o);
    add_prep_flags(train_cmd, o);
    add_boost_flags(train_cmd, o);

    auto* eval_cmd = app.add_subcommand("evaluate", "score a labelled CSV with a bundle and report metrics");
    eval_cmd->add_option("--bundle", bundle_path, "bundle.json")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--input", input, "labelled CSV")->required();
    eval_cmd->add_option("--label-col", label_col, "integer class column; falls back to the truth column")
        ->capture_default_str();
    eval_cmd->add_option("--out", out, "JSON report (default stdout)");
    eval_cmd->add_option("--out-dir", out_dir, "also write confusion and ROC CSVs here");
    eval_cmd->add_flag("--no-roc", o.no_roc, "skip ROC curves");

    auto* pipe_cmd = app.add_subcommand("pipeline", "ingest through evaluation in one run");
    pipe_cmd->add_option("--input", input, "input CSV");
    pipe_cmd->add_option("--out-dir", out_dir, "directory for bundle, report, confusion and ROC files");
    pipe_cmd->add_flag("--print-config", print_config, "print the effective config as JSON and exit");
    add_ingest_flags(pipe_cmd, o);
    add_prep_flags(pipe_cmd, o);
    add_cluster_flags(pipe_cmd, o);
    add_boost_flags(pipe_cmd, o);

    auto* score_cmd = app.add_subcommand("score", "classify rows with a trained bundle");
    score_cmd->add_option("--bundle", bundle_path, "bundle.json")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--input", input, "CSV to classify")->required();
    score_cmd->add_option("--out", out, "output CSV (default stdout)");

    auto* synth_cmd = app.add_subcommand("synth", "generate a labelled synthetic flow CSV");
    synth_cmd->add_option("--profiles", profiles_path, "profile file (default: built-in seven-class set)")
        ->check(CLI::ExistingFile);
    synth_cmd->add_option("--n-per-class", n_per_class, "rows per profile (default: as in the profile file)");
    synth_cmd->add_option("--seed", synth_seed, "generator seed")->capture_default_str();
    synth_cmd->add_option("--out", out, "output CSV (default stdout)");
    synth_cmd->add_option("--write-profiles", write_profiles, "write the profile set to this file and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    auto logger = spdlog::stderr_color_mt("flowhunt");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(quiet ? spdlog::level::warn : verbose ? spdlog::level::debug : spdlog::level::info);

    if (*ingest_cmd) {
        const fh::PipelineConfig cfg = resolve(o);
        std::vector<std::string> warnings;
        const fh::RawTable loaded = fh::ingest::load_csv(input, cfg.ingest);
        const fh::RawTable kept = fh::ingest::drop_identifiers(loaded, cfg.ingest, &warnings);
        for (const auto& w : warnings) spdlog::warn("{}", w);
        spdlog::info("ingest: {} rows, {} -> {} columns", loaded.n_rows(), loaded.n_cols(), kept.n_cols());
        emit(out, fh::ingest::to_csv(kept, cfg.ingest.delimiter));
    } else if (*prep_cmd) {
        const fh::PipelineConfig cfg = resolve(o);
        const fh::PreparedData d = fh::prepare(cfg, input);
        const fh::FeatureMatrix& x = d.scaled;
        std::vector<fh::Column> cols;
        for (std::size_t j = 0; j < x.n_features(); ++j) {
            fh::Column c;
            c.name = x.feature_names()[j];
            for (std::size_t r = 0; r < x.n_rows(); ++r) {
                c.numeric.push_back(x.at(r, j));
                c.missing.push_back(x.is_missing(r, j) ? 1 : 0);
            }
            cols.push_back(std::move(c));
        }
        if (d.truth) {
            fh::Column c;
            c.name = cfg.truth_column;
            c.type = fh::ColumnType::categorical;
            for (std::size_t r : d.cleaned.kept_rows) {
                c.text.push_back((*d.truth)[r]);
                c.missing.push_back(0);
            }
            cols.push_back(std::move(c));
        }
        emit(out, fh::ingest::to_csv(fh::RawTable(std::move(cols), x.n_rows()), cfg.ingest.delimiter));
    } else if (*cluster_cmd) {
        const fh::PipelineConfig cfg = resolve(o);
        const fh::PreparedData d = fh::prepare(cfg, input);
        if (!scan_k.empty()) {
            const auto [lo, hi] = parse_range(scan_k);
            std::string csv = "k,inertia,silhouette\n";
            for (const auto& p : fh::kmeans::inertia_scan(d.scaled, lo, hi, seeded_cluster(cfg))) {
                csv += std::to_string(p.k) + "," + fh::ingest::format_double(p.inertia) + "," +
                       (std::isnan(p.silhouette) ? std::string() : fh::ingest::format_double(p.silhouette)) + "\n";
            }
            emit(out, csv);
        } else {
            const fh::ClusterFit fit = fh::kmeans::fit(d.scaled, seeded_cluster(cfg));
            const auto& m = fit.model;
            json centroids = json::array();
            for (int c = 0; c < m.k(); ++c) {
                const auto row = m.centroids.row(static_cast<std::size_t>(c));
                centroids.push_back(std::vector<double>(row.begin(), row.end()));
            }
            const json summary = {{"k", m.k()},
                                  {"inertia", m.inertia},
                                  {"iterations", m.n_iterations},
                                  {"converged", m.converged},
                                  {"cluster_sizes", m.cluster_sizes},
                                  {"best_restart", fit.best_restart},
                                  {"features", d.scaled.feature_names()},
                                  {"centroids", centroids}};
            emit(out, summary.dump(2) + "\n");
        }
    } else if (*label_cmd) {
        const fh::PipelineConfig cfg = resolve(o);
        const fh::PreparedData d = fh::prepare(cfg, input);
        const fh::ClusterFit fit = fh::kmeans::fit(d.scaled, seeded_cluster(cfg));
        const fh::PseudoLabeledDataset ds = fh::labeling::label_dataset(d.scaled, fit.model);
        if (dist) {
            emit(out, distribution_json(ds.labels).dump(2) + "\n");
        } else {
            const fh::RawTable t = with_column(d, int_column(fh::labeling::label_column, ds.labels));
            emit(out, fh::ingest::to_csv(t, cfg.ingest.delimiter));
        }
    } else if (*train_cmd) {
        const fh::PipelineConfig cfg = resolve(o);
        const fh::PipelineResult r = fh::run_training(cfg, input, label_col);
        fh::write_outputs(r, out_dir);
        spdlog::info("macro F1 {:.4f} on {} held-out rows", r.evaluation.report.macro_f1, r.test_rows.size());
    } else if (*eval_cmd) {
        const fh::ModelBundle bundle = fh::load_bundle(bundle_path);
        const json ev = evaluate_bundle(bundle, input, label_col, !o.no_roc, out_dir);
        emit(out, ev.dump(2) + "\n");
    } else if (*pipe_cmd) {
        const fh::PipelineConfig cfg = resolve(o);
        if (print_config) {
            std::cout << fh::to_json(cfg).dump(2) << "\n";
            return 0;
        }
        if (input.empty() || out_dir.empty()) throw fh::ConfigError("pipeline needs --input and --out-dir");
        const fh::PipelineResult r = fh::run_pipeline(cfg, input);
        fh::write_outputs(r, out_dir);
        spdlog::info("macro F1 {:.4f} vs cluster labels on {} held-out rows", r.evaluation.report.macro_f1,
                     r.test_rows.size());
        if (r.truth_evaluation) {
            spdlog::info("macro F1 {:.4f} vs '{}'", r.truth_evaluation->report.macro_f1, cfg.truth_column);
        }
    } else if (*score_cmd) {
        const fh::ModelBundle bundle = fh::load_bundle(bundle_path);
        emit(out, fh::scores_csv(fh::score(bundle, input)));
    } else if (*synth_cmd) {
        fh::ProfileSet set = profiles_path.empty() ? fh::synth::default_profiles() : fh::synth::load_profiles(profiles_path);
        if (n_per_class > 0) set = fh::synth::with_rows_per_class(std::move(set), n_per_class);
        if (!write_profiles.empty()) {
            fh::write_file(write_profiles, fh::synth::format_profiles(set));
            return 0;
        }
        const fh::SynthData data = fh::synth::generate(set, synth_seed);
        emit(out, fh::ingest::to_csv(fh::synth::to_table(data)));
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const fh::ConfigError& e) {
        std::fprintf(stderr, "flowhunt: %s\n", e.what());
        return 1;
    } catch (const fh::DataError& e) {
        std::fprintf(stderr, "flowhunt: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "flowhunt: internal error: %s\n", e.what());
        return 3;
    }
}
