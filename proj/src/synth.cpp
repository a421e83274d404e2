#include "flowhunt/synth.hpp"

#include "flowhunt/error.hpp"
#include "flowhunt/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace flowhunt {

void ProfileSet::validate() const {
    const std::size_t d = feature_names.size();
    if (d == 0) throw DataError("profile set defines no features");
    if (nonnegative.size() != d) throw DataError("nonnegative mask length does not match feature count");
    if (profiles.empty()) throw DataError("profile set has no profiles");
    std::set<std::string> names;
    for (const auto& p : profiles) {
        if (!names.insert(p.name).second) throw DataError("duplicate profile name '" + p.name + "'");
        if (p.mean.size() != d || p.stddev.size() != d) {
            throw DataError("profile '" + p.name + "' has " + std::to_string(p.mean.size()) + " means and " +
                            std::to_string(p.stddev.size()) + " stddevs for " + std::to_string(d) + " features");
        }
        for (double s : p.stddev) {
            if (!(s >= 0.0) || !std::isfinite(s)) throw DataError("profile '" + p.name + "' has a negative stddev");
        }
        for (double m : p.mean) {
            if (!std::isfinite(m)) throw DataError("profile '" + p.name + "' has a non-finite mean");
        }
    }
}

namespace synth {

const std::vector<std::string>& default_feature_names() {
    static const std::vector<std::string> names = {
        "Src Port", "Dst Port", "Protocol", "Flow Duration", "Tot Fwd Pkts", "Tot Bwd Pkts",
        "TotLen Fwd Pkts", "TotLen Bwd Pkts", "Fwd Pkt Len Max", "Fwd Pkt Len Min", "Fwd Pkt Len Mean",
        "Fwd Pkt Len Std", "Bwd Pkt Len Max", "Bwd Pkt Len Min", "Bwd Pkt Len Mean", "Bwd Pkt Len Std",
        "Flow Pkts/s", "Flow IAT Mean", "Flow IAT Std", "Flow IAT Max", "Flow IAT Min", "Fwd IAT Tot",
        "Fwd IAT Mean", "Fwd IAT Std", "Fwd IAT Max", "Fwd IAT Min", "Bwd IAT Tot", "Bwd IAT Mean",
        "Bwd IAT Std", "Bwd IAT Max", "Bwd IAT Min", "Fwd PSH Flags", "Bwd PSH Flags", "Fwd URG Flags",
        "Bwd URG Flags", "Fwd Header Len", "Bwd Header Len", "Fwd Pkts/s", "Bwd Pkts/s", "Pkt Len Min",
        "Pkt Len Max", "Pkt Len Mean", "Pkt Len Std", "Pkt Len Var", "FIN Flag Cnt", "SYN Flag Cnt",
        "RST Flag Cnt", "PSH Flag Cnt", "ACK Flag Cnt", "URG Flag Cnt", "CWE Flag Count", "ECE Flag Cnt",
        "Down/Up Ratio", "Pkt Size Avg", "Fwd Seg Size Avg", "Bwd Seg Size Avg", "Fwd Byts/b Avg",
        "Fwd Pkts/b Avg", "Fwd Blk Rate Avg", "Bwd Byts/b Avg", "Bwd Pkts/b Avg", "Bwd Blk Rate Avg",
        "Subflow Fwd Pkts", "Subflow Fwd Byts", "Subflow Bwd Pkts", "Subflow Bwd Byts", "Init Fwd Win Byts",
        "Init Bwd Win Byts", "Fwd Act Data Pkts", "Fwd Seg Size Min", "Active Mean", "Active Std",
        "Active Max", "Active Min", "Idle Mean", "Idle Std", "Idle Max", "Idle Min",
    };
    return names;
}

namespace {

bool has(const std::string& s, std::string_view part) { return s.find(part) != std::string::npos; }

// Typical magnitude of a feature, by the kind of quantity it measures.
double feature_scale(const std::string& name) {
    if (has(name, "Port")) return 1000.0;
    if (name == "Protocol") return 6.0;
    if (has(name, "Duration") || has(name, "IAT") || has(name, "Active") || has(name, "Idle")) return 1e5;
    if (has(name, "/s") || has(name, "/b") || has(name, "Blk Rate")) return 1e3;
    if (has(name, "Flag") || has(name, "Ratio")) return 1.0;
    if (has(name, "Len") || has(name, "Byts") || has(name, "Size")) return 500.0;
    return 20.0; // packet counts
}

} // namespace

ProfileSet default_profiles(std::size_t rows_per_class) {
    static const char* names[] = {"benign", "dos", "brute-force", "tcp-flood", "udp-flood", "port-scan", "slowloris"};
    ProfileSet set;
    set.feature_names = default_feature_names();
    set.nonnegative.assign(set.feature_names.size(), 1);

    // Each attack class sits at one of three levels per feature: the benign
    // level, or 2 or 4 scale units above it. Adjacent levels are 2/0.3 ~ 6.7
    // within-class stddevs apart.
    for (std::size_t c = 0; c < std::size(names); ++c) {
        AttackProfile p;
        p.name = names[c];
        p.row_count = rows_per_class;
        for (std::size_t f = 0; f < set.feature_names.size(); ++f) {
            const double scale = feature_scale(set.feature_names[f]);
            const std::uint64_t level = c == 0 ? 0 : mix_seed(c * 1000 + f) % 3;
            p.mean.push_back(scale * (1.0 + 2.0 * static_cast<double>(level)));
            p.stddev.push_back(0.3 * scale);
        }
        set.profiles.push_back(std::move(p));
    }
    return set;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_number(const std::string& token, int line) {
    double v = 0.0;
    const char* first = token.data();
    if (!token.empty() && token.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw DataError("profiles line " + std::to_string(line) + ": '" + token + "' is not a number");
    }
    return v;
}

std::vector<double> parse_values(std::string_view s, int line) {
    std::vector<double> out;
    for (const auto& tok : split_list(s)) {
        const auto star = tok.find('*');
        if (star == std::string::npos) {
            out.push_back(parse_number(tok, line));
            continue;
        }
        const double v = parse_number(trim(tok.substr(0, star)), line);
        const double count = parse_number(trim(tok.substr(star + 1)), line);
        if (count < 1 || count != std::floor(count)) {
            throw DataError("profiles line " + std::to_string(line) + ": bad repeat count in '" + tok + "'");
        }
        out.insert(out.end(), static_cast<std::size_t>(count), v);
    }
    return out;
}

} // namespace

ProfileSet parse_profiles(std::string_view text) {
    ProfileSet set;
    enum class Section { none, features, profile } section = Section::none;
    std::string nonneg_spec = "all";
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string l = trim(raw);
        if (l.empty() || l.front() == '#') continue;
        if (l == "[features]") {
            section = Section::features;
            continue;
        }
        if (l == "[profile]") {
            section = Section::profile;
            set.profiles.emplace_back();
            continue;
        }
        if (l.front() == '[') throw DataError("profiles line " + std::to_string(line) + ": unknown section " + l);
        const auto eq = l.find('=');
        if (eq == std::string::npos) throw DataError("profiles line " + std::to_string(line) + ": expected key = value");
        const std::string key = trim(l.substr(0, eq));
        const std::string value = trim(l.substr(eq + 1));

        if (section == Section::features) {
            if (key == "names") {
                set.feature_names = split_list(value);
            } else if (key == "nonnegative") {
                nonneg_spec = value;
            } else {
                throw DataError("profiles line " + std::to_string(line) + ": unknown key '" + key + "'");
            }
        } else if (section == Section::profile) {
            AttackProfile& p = set.profiles.back();
            if (key == "name") {
                p.name = value;
            } else if (key == "rows") {
                const double v = parse_number(value, line);
                if (v < 0 || v != std::floor(v)) throw DataError("profiles line " + std::to_string(line) + ": bad row count");
                p.row_count = static_cast<std::size_t>(v);
            } else if (key == "mean") {
                p.mean = parse_values(value, line);
            } else if (key == "stddev") {
                p.stddev = parse_values(value, line);
            } else {
                throw DataError("profiles line " + std::to_string(line) + ": unknown key '" + key + "'");
            }
        } else {
            throw DataError("profiles line " + std::to_string(line) + ": key outside a section");
        }
    }

    const std::size_t d = set.feature_names.size();
    if (nonneg_spec == "all") {
        set.nonnegative.assign(d, 1);
    } else if (nonneg_spec == "none") {
        set.nonnegative.assign(d, 0);
    } else {
        set.nonnegative.assign(d, 0);
        for (const auto& n : split_list(nonneg_spec)) {
            auto it = std::find(set.feature_names.begin(), set.feature_names.end(), n);
            if (it == set.feature_names.end()) throw DataError("nonnegative names unknown feature '" + n + "'");
            set.nonnegative[static_cast<std::size_t>(it - set.feature_names.begin())] = 1;
        }
    }
    set.validate();
    return set;
}

ProfileSet load_profiles(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open profile file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_profiles(buf.str());
}

std::string format_profiles(const ProfileSet& set) {
    set.validate();
    auto join_values = [](const std::vector<double>& v) {
        std::string out;
        for (std::size_t i = 0; i < v.size();) {
            std::size_t j = i;
            while (j < v.size() && v[j] == v[i]) ++j;
            if (!out.empty()) out += ", ";
            out += ingest::format_double(v[i]);
            if (j - i > 1) out += "*" + std::to_string(j - i);
            i = j;
        }
        return out;
    };
    std::string out = "# flowhunt traffic profiles\n[features]\nnames = ";
    for (std::size_t i = 0; i < set.feature_names.size(); ++i) out += (i ? ", " : "") + set.feature_names[i];
    out += "\nnonnegative = ";
    if (std::all_of(set.nonnegative.begin(), set.nonnegative.end(), [](unsigned char b) { return b; })) {
        out += "all";
    } else if (std::none_of(set.nonnegative.begin(), set.nonnegative.end(), [](unsigned char b) { return b; })) {
        out += "none";
    } else {
        bool first = true;
        for (std::size_t i = 0; i < set.feature_names.size(); ++i) {
            if (!set.nonnegative[i]) continue;
            out += (first ? "" : ", ") + set.feature_names[i];
            first = false;
        }
    }
    out += "\n";
    for (const auto& p : set.profiles) {
        out += "\n[profile]\nname = " + p.name + "\nrows = " + std::to_string(p.row_count) +
               "\nmean = " + join_values(p.mean) + "\nstddev = " + join_values(p.stddev) + "\n";
    }
    return out;
}

ProfileSet with_rows_per_class(ProfileSet set, std::size_t rows) {
    for (auto& p : set.profiles) p.row_count = rows;
    return set;
}

SynthData generate(const ProfileSet& set, std::uint64_t seed) {
    set.validate();
    std::size_t total = 0;
    for (const auto& p : set.profiles) total += p.row_count;
    if (total == 0) throw DataError("profiles request zero rows");

    const std::size_t d = set.feature_names.size();
    Rng rng(seed);
    std::vector<double> values;
    values.reserve(total * d);
    std::vector<int> truth;
    truth.reserve(total);
    for (std::size_t c = 0; c < set.profiles.size(); ++c) {
        const AttackProfile& p = set.profiles[c];
        for (std::size_t r = 0; r < p.row_count; ++r) {
            for (std::size_t f = 0; f < d; ++f) {
                double v = p.mean[f] + p.stddev[f] * rng.normal();
                if (set.nonnegative[f] && v < 0.0) v = 0.0;
                values.push_back(v);
            }
            truth.push_back(static_cast<int>(c));
        }
    }

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    SynthData out;
    std::vector<double> shuffled(total * d);
    out.truth.resize(total);
    for (std::size_t i = 0; i < total; ++i) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(order[i] * d), d,
                    shuffled.begin() + static_cast<std::ptrdiff_t>(i * d));
        out.truth[i] = truth[order[i]];
    }
    out.features = FeatureMatrix(total, set.feature_names, std::move(shuffled));
    for (const auto& p : set.profiles) out.class_names.push_back(p.name);
    return out;
}

RawTable to_table(const SynthData& data, const std::string& label_column) {
    const FeatureMatrix& m = data.features;
    std::vector<Column> cols;
    for (std::size_t f = 0; f < m.n_features(); ++f) {
        Column c;
        c.name = m.feature_names()[f];
        c.type = ColumnType::numeric;
        c.missing.assign(m.n_rows(), 0);
        c.numeric.resize(m.n_rows());
        for (std::size_t r = 0; r < m.n_rows(); ++r) c.numeric[r] = m.at(r, f);
        cols.push_back(std::move(c));
    }
    Column label;
    label.name = label_column;
    label.type = ColumnType::categorical;
    label.missing.assign(m.n_rows(), 0);
    for (int t : data.truth) label.text.push_back(data.class_names[static_cast<std::size_t>(t)]);
    cols.push_back(std::move(label));
    return RawTable(std::move(cols), m.n_rows());
}

} // namespace synth
} // namespace flowhunt
