#include "flowhunt/preprocess.hpp"

#include "flowhunt/error.hpp"
#include "flowhunt/rng.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

namespace flowhunt {

void MissingPolicy::validate() const {
    if (!(column_drop_threshold >= 0.0 && column_drop_threshold <= 1.0)) {
        throw ConfigError("column_drop_threshold must lie in [0, 1]");
    }
}

void SplitSpec::validate() const {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("test_fraction must lie strictly between 0 and 1");
    }
}

namespace prep {
namespace {

ImputeValue learn_fill(const Column& c) {
    ImputeValue v;
    v.column = c.name;
    v.numeric = c.type == ColumnType::numeric;
    if (v.numeric) {
        std::vector<double> present;
        for (std::size_t r = 0; r < c.size(); ++r) {
            if (!c.missing[r]) present.push_back(c.numeric[r]);
        }
        if (present.empty()) {
            spdlog::warn("column '{}' is entirely missing; imputing 0", c.name);
            return v;
        }
        std::sort(present.begin(), present.end());
        const std::size_t n = present.size();
        v.number = n % 2 ? present[n / 2] : (present[n / 2 - 1] + present[n / 2]) / 2.0;
    } else {
        std::map<std::string, std::size_t> counts;
        for (std::size_t r = 0; r < c.size(); ++r) {
            if (!c.missing[r]) ++counts[c.text[r]];
        }
        std::size_t best = 0;
        for (const auto& [value, count] : counts) {
            if (count > best) {
                best = count;
                v.text = value;
            }
        }
        if (counts.empty()) {
            spdlog::warn("column '{}' is entirely missing; imputing \"missing\"", c.name);
            v.text = "missing";
        }
    }
    return v;
}

} // namespace

CleanResult clean_report(const RawTable& table, const MissingPolicy& policy) {
    policy.validate();
    CleanResult out;
    const std::size_t n = table.n_rows();

    switch (policy.mode) {
    case MissingMode::drop_column: {
        std::vector<Column> kept;
        for (const auto& c : table.columns()) {
            const double frac = n ? static_cast<double>(c.missing_count()) / static_cast<double>(n) : 0.0;
            if (frac > policy.column_drop_threshold) {
                out.dropped_columns.push_back(c.name);
            } else {
                kept.push_back(c);
            }
        }
        if (kept.empty()) throw DataError("missing-value policy drops every column");
        out.table = RawTable(std::move(kept), n);
        out.kept_rows.resize(n);
        std::iota(out.kept_rows.begin(), out.kept_rows.end(), std::size_t{0});
        break;
    }
    case MissingMode::drop_row: {
        for (std::size_t r = 0; r < n; ++r) {
            bool any = false;
            for (const auto& c : table.columns()) any = any || c.missing[r];
            if (!any) out.kept_rows.push_back(r);
        }
        if (out.kept_rows.empty()) throw DataError("missing-value policy drops every row");
        out.table = ingest::select_rows(table, out.kept_rows);
        break;
    }
    case MissingMode::impute_median: {
        for (const auto& c : table.columns()) {
            if (c.missing_count()) out.fill_values.push_back(learn_fill(c));
        }
        out.table = apply_fill(table, out.fill_values);
        out.kept_rows.resize(n);
        std::iota(out.kept_rows.begin(), out.kept_rows.end(), std::size_t{0});
        break;
    }
    }
    if (out.table.n_cols() == 0) throw DataError("missing-value policy drops every column");
    if (out.table.n_rows() == 0) throw DataError("missing-value policy drops every row");
    return out;
}

RawTable clean(const RawTable& table, const MissingPolicy& policy) { return clean_report(table, policy).table; }

RawTable apply_fill(const RawTable& table, const std::vector<ImputeValue>& fill) {
    std::vector<Column> cols = table.columns();
    for (const auto& f : fill) {
        auto it = std::find_if(cols.begin(), cols.end(), [&](const Column& c) { return c.name == f.column; });
        if (it == cols.end()) continue;
        for (std::size_t r = 0; r < it->size(); ++r) {
            if (!it->missing[r]) continue;
            it->missing[r] = 0;
            if (it->type == ColumnType::numeric) {
                it->numeric[r] = f.numeric ? f.number : 0.0;
            } else {
                it->text[r] = f.numeric ? ingest::format_double(f.number) : f.text;
            }
        }
    }
    return RawTable(std::move(cols), table.n_rows());
}

namespace {

FeatureMatrix digitize_impl(const RawTable& table, const std::vector<CategoricalEncoding>* stored) {
    const std::size_t n = table.n_rows();
    FeatureMatrix m(n, table.column_names());
    std::vector<CategoricalEncoding> encodings;

    for (std::size_t j = 0; j < table.n_cols(); ++j) {
        const Column& c = table.column(j);
        if (c.type == ColumnType::numeric) {
            for (std::size_t r = 0; r < n; ++r) {
                if (c.missing[r]) {
                    m.set_missing(r, j);
                } else {
                    m.set(r, j, c.numeric[r]);
                }
            }
            continue;
        }

        CategoricalEncoding enc;
        if (stored) {
            auto it = std::find_if(stored->begin(), stored->end(),
                                   [&](const CategoricalEncoding& e) { return e.column == c.name; });
            if (it == stored->end()) {
                throw DataError("column '" + c.name + "' is categorical but has no stored encoding");
            }
            enc = *it;
        } else {
            enc.column = c.name;
            for (std::size_t r = 0; r < n; ++r) {
                if (!c.missing[r]) enc.categories.push_back(c.text[r]);
            }
            std::sort(enc.categories.begin(), enc.categories.end());
            enc.categories.erase(std::unique(enc.categories.begin(), enc.categories.end()), enc.categories.end());
        }

        std::unordered_map<std::string, double> code;
        for (std::size_t i = 0; i < enc.categories.size(); ++i) code.emplace(enc.categories[i], static_cast<double>(i));
        for (std::size_t r = 0; r < n; ++r) {
            if (c.missing[r]) {
                m.set_missing(r, j);
                continue;
            }
            auto it = code.find(c.text[r]);
            if (it == code.end()) {
                throw DataError("unseen category '" + c.text[r] + "' in column '" + c.name + "'");
            }
            m.set(r, j, it->second);
        }
        encodings.push_back(std::move(enc));
    }

    if (stored) {
        // Stored encodings for columns that now parse as numeric (e.g. every
        // value of the scored file happens to look like a number) are still
        // carried so the bundle round-trips.
        for (const auto& e : *stored) {
            const bool present = std::any_of(encodings.begin(), encodings.end(),
                                             [&](const CategoricalEncoding& x) { return x.column == e.column; });
            if (!present) encodings.push_back(e);
        }
    }
    m.set_encodings(std::move(encodings));
    return m;
}

} // namespace

FeatureMatrix digitize(const RawTable& table) { return digitize_impl(table, nullptr); }

FeatureMatrix digitize(const RawTable& table, const std::vector<CategoricalEncoding>& encodings) {
    return digitize_impl(table, &encodings);
}

Scaler fit_scaler(const FeatureMatrix& m, ScaleMethod method, const std::vector<std::size_t>& rows) {
    Scaler s;
    s.method = method;
    s.feature_names = m.feature_names();
    const std::size_t d = m.n_features();
    s.offset.assign(d, 0.0);
    s.spread.assign(d, 0.0);
    if (method == ScaleMethod::none) return s;

    std::vector<std::size_t> use = rows;
    if (use.empty()) {
        use.resize(m.n_rows());
        std::iota(use.begin(), use.end(), std::size_t{0});
    }

    for (std::size_t j = 0; j < d; ++j) {
        if (method == ScaleMethod::min_max) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (std::size_t r : use) {
                if (m.is_missing(r, j)) continue;
                lo = std::min(lo, m.at(r, j));
                hi = std::max(hi, m.at(r, j));
            }
            if (lo > hi) lo = hi = 0.0; // no observed values
            s.offset[j] = lo;
            s.spread[j] = hi;
        } else {
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t r : use) {
                if (m.is_missing(r, j)) continue;
                sum += m.at(r, j);
                ++count;
            }
            const double mean = count ? sum / static_cast<double>(count) : 0.0;
            double ss = 0.0;
            for (std::size_t r : use) {
                if (m.is_missing(r, j)) continue;
                const double dv = m.at(r, j) - mean;
                ss += dv * dv;
            }
            s.offset[j] = mean;
            s.spread[j] = count ? std::sqrt(ss / static_cast<double>(count)) : 0.0;
        }
    }
    return s;
}

namespace {

void check_names(const Scaler& s, const FeatureMatrix& m) {
    if (s.feature_names != m.feature_names()) {
        throw DataError("scaler was fit on different features than the matrix provides");
    }
}

} // namespace

FeatureMatrix apply_scaler(const Scaler& s, const FeatureMatrix& m) {
    check_names(s, m);
    FeatureMatrix out = m;
    if (s.method == ScaleMethod::none) return out;
    for (std::size_t j = 0; j < m.n_features(); ++j) {
        const double a = s.offset[j];
        const double b = s.spread[j];
        const double width = s.method == ScaleMethod::min_max ? b - a : b;
        for (std::size_t r = 0; r < m.n_rows(); ++r) {
            if (m.is_missing(r, j)) continue;
            out.set(r, j, width > 0.0 ? (m.at(r, j) - a) / width : 0.0);
        }
    }
    return out;
}

FeatureMatrix inverse_scaler(const Scaler& s, const FeatureMatrix& m) {
    check_names(s, m);
    FeatureMatrix out = m;
    if (s.method == ScaleMethod::none) return out;
    for (std::size_t j = 0; j < m.n_features(); ++j) {
        const double a = s.offset[j];
        const double b = s.spread[j];
        const double width = s.method == ScaleMethod::min_max ? b - a : b;
        for (std::size_t r = 0; r < m.n_rows(); ++r) {
            if (m.is_missing(r, j)) continue;
            out.set(r, j, width > 0.0 ? m.at(r, j) * width + a : a);
        }
    }
    return out;
}

SplitResult split(std::size_t n_rows, const std::optional<std::vector<int>>& labels, const SplitSpec& spec) {
    spec.validate();
    if (labels && labels->size() != n_rows) {
        throw DataError("split: " + std::to_string(labels->size()) + " labels for " + std::to_string(n_rows) + " rows");
    }
    SplitResult out;
    Rng rng(spec.seed);
    const auto total_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n_rows)));
    std::vector<unsigned char> is_test(n_rows, 0);

    if (!labels || !spec.stratify) {
        std::vector<std::size_t> order(n_rows);
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        for (std::size_t i = 0; i < total_test; ++i) is_test[order[i]] = 1;
    } else {
        std::map<int, std::vector<std::size_t>> members;
        for (std::size_t i = 0; i < n_rows; ++i) members[(*labels)[i]].push_back(i);

        struct Share {
            std::vector<std::size_t>* rows;
            std::size_t quota;
            double remainder;
        };
        std::vector<Share> shares;
        std::size_t eligible = 0;
        for (auto& [label, rows] : members) {
            if (rows.size() < 2) {
                out.warnings.push_back("class " + std::to_string(label) + " has fewer than 2 rows; kept in train");
                spdlog::warn("{}", out.warnings.back());
                continue;
            }
            eligible += rows.size();
            shares.push_back({&rows, 0, 0.0});
        }
        std::size_t assigned = 0;
        for (auto& s : shares) {
            const double exact = static_cast<double>(total_test) * static_cast<double>(s.rows->size()) /
                                 static_cast<double>(eligible);
            s.quota = std::min(static_cast<std::size_t>(std::floor(exact)), s.rows->size() - 1);
            s.remainder = exact - std::floor(exact);
            assigned += s.quota;
        }
        std::vector<std::size_t> order(shares.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return shares[a].remainder > shares[b].remainder; });
        for (std::size_t pass = 0; pass < 2 && assigned < total_test; ++pass) {
            for (std::size_t i : order) {
                if (assigned >= total_test) break;
                if (shares[i].quota + 1 < shares[i].rows->size()) {
                    ++shares[i].quota;
                    ++assigned;
                }
            }
        }
        for (auto& s : shares) {
            std::vector<std::size_t> rows = *s.rows;
            rng.shuffle(rows);
            for (std::size_t i = 0; i < s.quota; ++i) is_test[rows[i]] = 1;
        }
    }

    for (std::size_t i = 0; i < n_rows; ++i) (is_test[i] ? out.test : out.train).push_back(i);
    return out;
}

std::string to_string(MissingMode m) {
    switch (m) {
    case MissingMode::drop_column: return "drop-col";
    case MissingMode::drop_row: return "drop-row";
    case MissingMode::impute_median: return "impute";
    }
    return "?";
}

std::string to_string(ScaleMethod m) {
    switch (m) {
    case ScaleMethod::none: return "none";
    case ScaleMethod::min_max: return "minmax";
    case ScaleMethod::z_score: return "zscore";
    }
    return "?";
}

MissingMode parse_missing_mode(const std::string& s) {
    if (s == "drop-col" || s == "drop-column") return MissingMode::drop_column;
    if (s == "drop-row") return MissingMode::drop_row;
    if (s == "impute" || s == "impute-median") return MissingMode::impute_median;
    throw ConfigError("unknown missing-value mode '" + s + "'");
}

ScaleMethod parse_scale_method(const std::string& s) {
    if (s == "none") return ScaleMethod::none;
    if (s == "minmax" || s == "min-max") return ScaleMethod::min_max;
    if (s == "zscore" || s == "z-score") return ScaleMethod::z_score;
    throw ConfigError("unknown scaling method '" + s + "'");
}

} // namespace prep
} // namespace flowhunt
