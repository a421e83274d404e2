// JSON forms of configs and fitted models, and the checksummed bundle file.

#include "flowhunt/error.hpp"
#include "flowhunt/pipeline.hpp"
#include "flowhunt/rng.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <set>
#include <sstream>

namespace flowhunt {

using nlohmann::json;

namespace {

constexpr const char* bundle_format = "flowhunt-model-bundle";

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError("'" + where + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in '" + where + "'");
    }
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

json ingest_json(const IngestConfig& c) {
    return {{"identifier_columns", c.identifier_columns},
            {"na_tokens", c.na_tokens},
            {"delimiter", std::string(1, c.delimiter)},
            {"has_header", c.has_header},
            {"categorical_columns", c.categorical_columns}};
}

IngestConfig ingest_from(const json& j, const std::string& where) {
    reject_unknown(j, {"identifier_columns", "na_tokens", "delimiter", "has_header", "categorical_columns",
                       "truth_column"},
                   where);
    IngestConfig c;
    read_if(j, "identifier_columns", c.identifier_columns);
    read_if(j, "na_tokens", c.na_tokens);
    read_if(j, "has_header", c.has_header);
    read_if(j, "categorical_columns", c.categorical_columns);
    if (j.contains("delimiter")) {
        const auto d = j.at("delimiter").get<std::string>();
        if (d.size() != 1) throw ConfigError("delimiter must be a single character");
        c.delimiter = d.front();
    }
    return c;
}

json boost_params_json(const BoostParams& p) {
    return {{"rounds", p.n_rounds},  {"eta", p.learning_rate}, {"max_depth", p.max_depth},
            {"lambda", p.lambda},    {"gamma", p.gamma},       {"min_child_weight", p.min_child_weight},
            {"seed", p.seed}};
}

BoostParams boost_params_from(const json& j, const std::string& where) {
    reject_unknown(j, {"rounds", "eta", "max_depth", "lambda", "gamma", "min_child_weight", "seed"}, where);
    BoostParams p;
    read_if(j, "rounds", p.n_rounds);
    read_if(j, "eta", p.learning_rate);
    read_if(j, "max_depth", p.max_depth);
    read_if(j, "lambda", p.lambda);
    read_if(j, "gamma", p.gamma);
    read_if(j, "min_child_weight", p.min_child_weight);
    read_if(j, "seed", p.seed);
    return p;
}

json tree_json(const Tree& t) {
    json j = {{"feature", json::array()}, {"threshold", json::array()}, {"default_left", json::array()},
              {"left", json::array()},    {"right", json::array()},     {"weight", json::array()},
              {"gain", json::array()}};
    for (const auto& n : t.nodes) {
        j["feature"].push_back(n.feature);
        j["threshold"].push_back(n.threshold);
        j["default_left"].push_back(n.default_left);
        j["left"].push_back(n.left);
        j["right"].push_back(n.right);
        j["weight"].push_back(n.weight);
        j["gain"].push_back(n.gain);
    }
    return j;
}

Tree tree_from(const json& j) {
    Tree t;
    const auto& f = j.at("feature");
    t.nodes.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        TreeNode& n = t.nodes[i];
        n.feature = f.at(i).get<int>();
        n.threshold = j.at("threshold").at(i).get<double>();
        n.default_left = j.at("default_left").at(i).get<bool>();
        n.left = j.at("left").at(i).get<int>();
        n.right = j.at("right").at(i).get<int>();
        n.weight = j.at("weight").at(i).get<double>();
        n.gain = j.at("gain").at(i).get<double>();
        const auto size = static_cast<int>(f.size());
        if (!n.is_leaf() && (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) || n.left >= size ||
                             n.right >= size)) {
            throw DataError("malformed tree in bundle");
        }
    }
    if (t.nodes.empty()) throw DataError("empty tree in bundle");
    return t;
}

json booster_json(const BoostedModel& m) {
    json rounds = json::array();
    for (const auto& round : m.rounds) {
        json trees = json::array();
        for (const auto& t : round) trees.push_back(tree_json(t));
        rounds.push_back(std::move(trees));
    }
    return {{"n_classes", m.n_classes},         {"base_score", m.base_score},
            {"params", boost_params_json(m.params)}, {"feature_names", m.feature_names},
            {"train_logloss", m.train_logloss}, {"rounds", std::move(rounds)}};
}

BoostedModel booster_from(const json& j) {
    BoostedModel m;
    m.n_classes = j.at("n_classes").get<int>();
    m.base_score = j.at("base_score").get<double>();
    m.params = boost_params_from(j.at("params"), "booster.params");
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.train_logloss = j.at("train_logloss").get<std::vector<double>>();
    for (const auto& round : j.at("rounds")) {
        std::vector<Tree> trees;
        for (const auto& t : round) trees.push_back(tree_from(t));
        if (static_cast<int>(trees.size()) != m.n_classes) throw DataError("bundle round has wrong tree count");
        m.rounds.push_back(std::move(trees));
    }
    return m;
}

json cluster_json(const ClusterModel& m) {
    json rows = json::array();
    for (std::size_t c = 0; c < m.centroids.k; ++c) {
        const auto r = m.centroids.row(c);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return {{"k", m.centroids.k},           {"dim", m.centroids.dim},
            {"centroids", std::move(rows)}, {"inertia", m.inertia},
            {"n_iterations", m.n_iterations}, {"cluster_sizes", m.cluster_sizes},
            {"converged", m.converged}};
}

ClusterModel cluster_from(const json& j) {
    ClusterModel m;
    m.centroids = Centroids(j.at("k").get<std::size_t>(), j.at("dim").get<std::size_t>());
    const auto& rows = j.at("centroids");
    if (rows.size() != m.centroids.k) throw DataError("bundle centroid count mismatch");
    for (std::size_t c = 0; c < m.centroids.k; ++c) {
        const auto v = rows.at(c).get<std::vector<double>>();
        if (v.size() != m.centroids.dim) throw DataError("bundle centroid width mismatch");
        std::copy(v.begin(), v.end(), m.centroids.row(c).begin());
    }
    m.inertia = j.at("inertia").get<double>();
    m.n_iterations = j.at("n_iterations").get<int>();
    m.cluster_sizes = j.at("cluster_sizes").get<std::vector<std::size_t>>();
    m.converged = j.at("converged").get<bool>();
    return m;
}

} // namespace

StageSeeds stage_seeds(std::uint64_t seed) {
    return {derive_seed(seed, "cluster"), derive_seed(seed, "split"), derive_seed(seed, "boost")};
}

void PipelineConfig::validate() const {
    ingest.validate();
    missing.validate();
    SplitSpec{test_fraction, 0, stratify}.validate();
    cluster.validate();
    boost.validate();
}

json to_json(const PipelineConfig& cfg) {
    json ingest = ingest_json(cfg.ingest);
    ingest["truth_column"] = cfg.truth_column;
    json boost = boost_params_json(cfg.boost);
    boost.erase("seed");
    return {{"seed", cfg.seed},
            {"ingest", std::move(ingest)},
            {"preprocess",
             {{"missing", prep::to_string(cfg.missing.mode)},
              {"column_drop_threshold", cfg.missing.column_drop_threshold},
              {"scale", prep::to_string(cfg.scale)},
              {"test_fraction", cfg.test_fraction},
              {"stratify", cfg.stratify}}},
            {"cluster",
             {{"k", cfg.cluster.k},
              {"init", kmeans::to_string(cfg.cluster.init)},
              {"max_iter", cfg.cluster.max_iter},
              {"tol", cfg.cluster.tol},
              {"restarts", cfg.cluster.n_restarts}}},
            {"boost", std::move(boost)},
            {"evaluate", {{"roc", cfg.roc}}}};
}

PipelineConfig config_from_json(const json& j) {
    reject_unknown(j, {"seed", "ingest", "preprocess", "cluster", "boost", "evaluate"}, "config");
    PipelineConfig cfg;
    read_if(j, "seed", cfg.seed);
    if (j.contains("ingest")) {
        const json& ij = j.at("ingest");
        cfg.ingest = ingest_from(ij, "ingest");
        read_if(ij, "truth_column", cfg.truth_column);
    }
    if (j.contains("preprocess")) {
        const json& p = j.at("preprocess");
        reject_unknown(p, {"missing", "column_drop_threshold", "scale", "test_fraction", "stratify"}, "preprocess");
        if (p.contains("missing")) cfg.missing.mode = prep::parse_missing_mode(p.at("missing").get<std::string>());
        read_if(p, "column_drop_threshold", cfg.missing.column_drop_threshold);
        if (p.contains("scale")) cfg.scale = prep::parse_scale_method(p.at("scale").get<std::string>());
        read_if(p, "test_fraction", cfg.test_fraction);
        read_if(p, "stratify", cfg.stratify);
    }
    if (j.contains("cluster")) {
        const json& c = j.at("cluster");
        reject_unknown(c, {"k", "init", "max_iter", "tol", "restarts"}, "cluster");
        read_if(c, "k", cfg.cluster.k);
        if (c.contains("init")) cfg.cluster.init = kmeans::parse_init_method(c.at("init").get<std::string>());
        read_if(c, "max_iter", cfg.cluster.max_iter);
        read_if(c, "tol", cfg.cluster.tol);
        read_if(c, "restarts", cfg.cluster.n_restarts);
    }
    if (j.contains("boost")) {
        json b = j.at("boost");
        if (b.contains("seed")) throw ConfigError("boost.seed is derived from the global seed");
        cfg.boost = boost_params_from(b, "boost");
    }
    if (j.contains("evaluate")) {
        const json& e = j.at("evaluate");
        reject_unknown(e, {"roc"}, "evaluate");
        read_if(e, "roc", cfg.roc);
    }
    cfg.validate();
    return cfg;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path.string() + "': " + e.what());
    }
    return config_from_json(j);
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 computation failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

json to_json(const ModelBundle& b) {
    json fills = json::array();
    for (const auto& f : b.fill_values) {
        fills.push_back({{"column", f.column}, {"numeric", f.numeric}, {"number", f.number}, {"text", f.text}});
    }
    json encodings = json::array();
    for (const auto& e : b.encodings) encodings.push_back({{"column", e.column}, {"categories", e.categories}});

    json payload = {
        {"ingest", ingest_json(b.ingest)},
        {"truth_column", b.truth_column},
        {"dropped_identifiers", b.dropped_identifiers},
        {"dropped_columns", b.dropped_columns},
        {"feature_columns", b.feature_columns},
        {"missing", {{"mode", prep::to_string(b.missing.mode)}, {"column_drop_threshold", b.missing.column_drop_threshold}}},
        {"fill_values", std::move(fills)},
        {"encodings", std::move(encodings)},
        {"scaler",
         {{"method", prep::to_string(b.scaler.method)},
          {"feature_names", b.scaler.feature_names},
          {"offset", b.scaler.offset},
          {"spread", b.scaler.spread}}},
        {"cluster", b.cluster ? cluster_json(*b.cluster) : json(nullptr)},
        {"booster", booster_json(b.booster)},
        {"truth_alignment", b.truth_alignment},
        {"config", b.config},
        {"input_sha256", b.input_sha256},
    };
    const std::string checksum = sha256_hex(payload.dump());
    return {{"format", bundle_format},
            {"schema_version", ModelBundle::schema_version},
            {"checksum", "sha256:" + checksum},
            {"payload", std::move(payload)}};
}

ModelBundle bundle_from_json(const json& j) {
    try {
        if (!j.is_object() || j.value("format", "") != bundle_format) throw DataError("not a flowhunt model bundle");
        const int version = j.at("schema_version").get<int>();
        if (version != ModelBundle::schema_version) {
            throw DataError("unsupported bundle schema version " + std::to_string(version));
        }
        const json& p = j.at("payload");
        if (j.at("checksum").get<std::string>() != "sha256:" + sha256_hex(p.dump())) {
            throw DataError("bundle checksum mismatch");
        }

        ModelBundle b;
        b.ingest = ingest_from(p.at("ingest"), "bundle.ingest");
        b.truth_column = p.at("truth_column").get<std::string>();
        b.dropped_identifiers = p.at("dropped_identifiers").get<std::vector<std::string>>();
        b.dropped_columns = p.at("dropped_columns").get<std::vector<std::string>>();
        b.feature_columns = p.at("feature_columns").get<std::vector<std::string>>();
        b.missing.mode = prep::parse_missing_mode(p.at("missing").at("mode").get<std::string>());
        b.missing.column_drop_threshold = p.at("missing").at("column_drop_threshold").get<double>();
        for (const auto& f : p.at("fill_values")) {
            b.fill_values.push_back({f.at("column").get<std::string>(), f.at("numeric").get<bool>(),
                                     f.at("number").get<double>(), f.at("text").get<std::string>()});
        }
        for (const auto& e : p.at("encodings")) {
            b.encodings.push_back({e.at("column").get<std::string>(), e.at("categories").get<std::vector<std::string>>()});
        }
        const json& s = p.at("scaler");
        b.scaler.method = prep::parse_scale_method(s.at("method").get<std::string>());
        b.scaler.feature_names = s.at("feature_names").get<std::vector<std::string>>();
        b.scaler.offset = s.at("offset").get<std::vector<double>>();
        b.scaler.spread = s.at("spread").get<std::vector<double>>();
        if (!p.at("cluster").is_null()) b.cluster = cluster_from(p.at("cluster"));
        b.booster = booster_from(p.at("booster"));
        b.truth_alignment = p.at("truth_alignment").get<std::vector<std::string>>();
        b.config = p.at("config");
        b.input_sha256 = p.at("input_sha256").get<std::string>();
        return b;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed model bundle: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("malformed model bundle: ") + e.what());
    }
}

std::string serialize_bundle(const ModelBundle& b) { return to_json(b).dump() + "\n"; }

ModelBundle parse_bundle(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("model bundle is not valid JSON: ") + e.what());
    }
    return bundle_from_json(j);
}

ModelBundle load_bundle(const std::filesystem::path& path) { return parse_bundle(read_file(path)); }

} // namespace flowhunt
