#include "flowhunt/ingest.hpp"

#include "flowhunt/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace flowhunt {

std::size_t Column::missing_count() const {
    return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), 1));
}

RawTable::RawTable(std::vector<Column> columns, std::size_t n_rows)
    : columns_(std::move(columns)), n_rows_(n_rows) {
    std::unordered_set<std::string> seen;
    for (const auto& c : columns_) {
        if (!seen.insert(c.name).second) {
            throw DataError("duplicate column name '" + c.name + "'");
        }
        const std::size_t expected_payload = c.type == ColumnType::numeric ? c.numeric.size() : c.text.size();
        if (c.missing.size() != n_rows_ || expected_payload != n_rows_) {
            throw DataError("column '" + c.name + "' has " + std::to_string(c.missing.size()) +
                            " entries, expected " + std::to_string(n_rows_));
        }
    }
}

std::vector<std::string> RawTable::column_names() const {
    std::vector<std::string> names;
    names.reserve(columns_.size());
    for (const auto& c : columns_) names.push_back(c.name);
    return names;
}

std::size_t RawTable::find(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (columns_[i].name == name) return i;
    }
    return npos;
}

void IngestConfig::validate() const {
    std::set<std::string> seen;
    for (const auto& id : identifier_columns) {
        if (!seen.insert(id).second) throw ConfigError("identifier column listed twice: '" + id + "'");
    }
    if (delimiter == '"' || delimiter == '\n' || delimiter == '\r') {
        throw ConfigError("invalid CSV delimiter");
    }
}

namespace ingest {
namespace {

std::string_view trim(std::string_view s) {
    const auto not_blank = [](char c) { return c != ' ' && c != '\t'; };
    auto b = std::find_if(s.begin(), s.end(), not_blank);
    auto e = std::find_if(s.rbegin(), s.rend(), not_blank).base();
    if (b >= e) return {};
    return s.substr(static_cast<std::size_t>(b - s.begin()), static_cast<std::size_t>(e - b));
}

bool parse_finite(std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last && std::isfinite(out);
}

} // namespace

std::vector<std::vector<std::string>> parse_csv(std::string_view text, char delimiter) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;      // field started with a quote
    bool in_quotes = false;   // currently inside quotes
    bool field_started = false;

    auto finish_field = [&] {
        record.push_back(quoted ? field : std::string(trim(field)));
        field.clear();
        quoted = false;
        field_started = false;
    };
    auto finish_record = [&] {
        finish_field();
        const bool blank = record.size() == 1 && record.front().empty() && !quoted;
        if (!blank) records.push_back(std::move(record));
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = true;
            in_quotes = true;
            field_started = true;
            field.clear();
        } else if (c == delimiter) {
            finish_field();
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            // CRLF: the '\n' closes the record
        } else if (c == '\n') {
            finish_record();
        } else {
            if (quoted) continue; // stray characters after a closing quote are dropped
            if (c != ' ' && c != '\t') field_started = true;
            field.push_back(c);
        }
    }
    if (in_quotes) throw DataError("unterminated quoted field at end of input");
    if (!field.empty() || !record.empty() || quoted) finish_record();
    return records;
}

RawTable parse_table(std::string_view text, const IngestConfig& cfg) {
    cfg.validate();
    auto records = parse_csv(text, cfg.delimiter);
    if (records.empty()) throw DataError("input is empty");

    std::vector<std::string> names;
    std::size_t first_data = 0;
    if (cfg.has_header) {
        names = records.front();
        first_data = 1;
    } else {
        for (std::size_t j = 0; j < records.front().size(); ++j) names.push_back("col" + std::to_string(j));
    }
    {
        std::set<std::string> seen;
        for (const auto& n : names) {
            if (!seen.insert(n).second) throw DataError("duplicate header name '" + n + "'");
        }
    }

    const std::size_t width = names.size();
    const std::size_t n_rows = records.size() - first_data;
    for (std::size_t r = first_data; r < records.size(); ++r) {
        if (records[r].size() != width) {
            throw DataError("ragged row " + std::to_string(r - first_data) + ": " +
                            std::to_string(records[r].size()) + " fields, header has " + std::to_string(width));
        }
    }

    const std::unordered_set<std::string> na(cfg.na_tokens.begin(), cfg.na_tokens.end());
    const std::unordered_set<std::string> forced(cfg.categorical_columns.begin(), cfg.categorical_columns.end());
    std::vector<Column> columns(width);
    for (std::size_t j = 0; j < width; ++j) {
        Column& col = columns[j];
        col.name = names[j];
        col.missing.assign(n_rows, 0);
        std::vector<double> parsed(n_rows, 0.0);
        bool numeric = !forced.count(col.name);
        for (std::size_t r = 0; r < n_rows; ++r) {
            const std::string& cell = records[first_data + r][j];
            if (na.count(cell)) {
                col.missing[r] = 1;
            } else if (numeric && !parse_finite(cell, parsed[r])) {
                numeric = false;
            }
        }
        if (numeric) {
            col.type = ColumnType::numeric;
            col.numeric = std::move(parsed);
        } else {
            col.type = ColumnType::categorical;
            col.text.resize(n_rows);
            for (std::size_t r = 0; r < n_rows; ++r) {
                if (!col.missing[r]) col.text[r] = records[first_data + r][j];
            }
        }
    }
    return RawTable(std::move(columns), n_rows);
}

RawTable load_csv(const std::filesystem::path& path, const IngestConfig& cfg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open input file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    if (text.empty()) throw DataError("input file '" + path.string() + "' is empty");
    return parse_table(text, cfg);
}

RawTable drop_columns(const RawTable& table, const std::vector<std::string>& names) {
    const std::unordered_set<std::string> drop(names.begin(), names.end());
    std::vector<Column> kept;
    for (const auto& c : table.columns()) {
        if (!drop.count(c.name)) kept.push_back(c);
    }
    return RawTable(std::move(kept), table.n_rows());
}

RawTable drop_identifiers(const RawTable& table, const IngestConfig& cfg, std::vector<std::string>* warnings) {
    std::string absent;
    for (const auto& id : cfg.identifier_columns) {
        if (!table.contains(id)) absent += (absent.empty() ? "'" : ", '") + id + "'";
    }
    if (!absent.empty()) {
        std::string msg = "identifier columns not present, skipped: " + absent;
        spdlog::warn("{}", msg);
        if (warnings) warnings->push_back(std::move(msg));
    }
    return drop_columns(table, cfg.identifier_columns);
}

RawTable select_rows(const RawTable& table, const std::vector<std::size_t>& rows) {
    std::vector<Column> out;
    out.reserve(table.n_cols());
    for (const auto& c : table.columns()) {
        Column s;
        s.name = c.name;
        s.type = c.type;
        s.missing.reserve(rows.size());
        for (std::size_t r : rows) {
            if (r >= table.n_rows()) throw DataError("row index out of range");
            s.missing.push_back(c.missing[r]);
            if (c.type == ColumnType::numeric) {
                s.numeric.push_back(c.numeric[r]);
            } else {
                s.text.push_back(c.text[r]);
            }
        }
        out.push_back(std::move(s));
    }
    return RawTable(std::move(out), rows.size());
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string csv_escape(std::string_view field, char delimiter) {
    const bool needs_quotes = field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string_view::npos ||
                              (!field.empty() && (field.front() == ' ' || field.back() == ' '));
    if (!needs_quotes) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string to_csv(const RawTable& table, char delimiter, std::string_view missing_token) {
    std::string out;
    const auto& cols = table.columns();
    for (std::size_t j = 0; j < cols.size(); ++j) {
        if (j) out.push_back(delimiter);
        out += csv_escape(cols[j].name, delimiter);
    }
    out.push_back('\n');
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            if (j) out.push_back(delimiter);
            const Column& c = cols[j];
            if (c.missing[r]) {
                out += missing_token;
            } else if (c.type == ColumnType::numeric) {
                out += format_double(c.numeric[r]);
            } else {
                out += csv_escape(c.text[r], delimiter);
            }
        }
        out.push_back('\n');
    }
    return out;
}

void write_csv(const RawTable& table, const std::filesystem::path& path, char delimiter,
               std::string_view missing_token) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << to_csv(table, delimiter, missing_token);
}

} // namespace ingest
} // namespace flowhunt
