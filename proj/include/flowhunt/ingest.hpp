#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace flowhunt {

enum class ColumnType { numeric, categorical };

/// One column of a loaded flow table. Missing cells are flagged in
/// `missing`; their slot in `numeric` holds 0.0 and in `text` holds "".
struct Column {
    std::string name;
    ColumnType type = ColumnType::numeric;
    std::vector<double> numeric;
    std::vector<std::string> text;
    std::vector<unsigned char> missing;

    std::size_t size() const { return missing.size(); }
    std::size_t missing_count() const;
    bool operator==(const Column&) const = default;
};

/// Column-oriented table as read from a flow CSV.
class RawTable {
public:
    RawTable() = default;
    /// Validates that names are unique and every column has n_rows entries.
    RawTable(std::vector<Column> columns, std::size_t n_rows);

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return columns_.size(); }
    const std::vector<Column>& columns() const { return columns_; }
    const Column& column(std::size_t i) const { return columns_.at(i); }
    std::vector<std::string> column_names() const;

    /// Index of the named column, or npos.
    std::size_t find(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name) != npos; }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    bool operator==(const RawTable&) const = default;

private:
    std::vector<Column> columns_;
    std::size_t n_rows_ = 0;
};

struct IngestConfig {
    std::vector<std::string> identifier_columns{"Flow ID", "Src IP", "Dst IP", "Timestamp"};
    std::vector<std::string> na_tokens{"", "NaN", "nan", "Infinity", "-Infinity", "inf", "-inf"};
    char delimiter = ',';
    bool has_header = true;
    /// Columns read as text even when every value parses as a number.
    std::vector<std::string> categorical_columns;

    /// Throws ConfigError on duplicate identifier names.
    void validate() const;
};

namespace ingest {

/// Splits CSV text into records (RFC 4180 quoting, CRLF or LF endings).
/// Unquoted fields are trimmed of surrounding blanks.
std::vector<std::vector<std::string>> parse_csv(std::string_view text, char delimiter);

RawTable load_csv(const std::filesystem::path& path, const IngestConfig& cfg);

/// Same as load_csv but over in-memory bytes.
RawTable parse_table(std::string_view text, const IngestConfig& cfg);

/// Removes every column listed in cfg.identifier_columns. Names that are not
/// present produce a warning (logged and, when given, appended to `warnings`).
RawTable drop_identifiers(const RawTable& table, const IngestConfig& cfg,
                          std::vector<std::string>* warnings = nullptr);

/// Removes the named columns; absent names are ignored.
RawTable drop_columns(const RawTable& table, const std::vector<std::string>& names);

/// Keeps only the listed rows, in the given order.
RawTable select_rows(const RawTable& table, const std::vector<std::size_t>& rows);

/// Serializes with `missing_token` for missing cells. Numbers use the
/// shortest representation that round-trips.
std::string to_csv(const RawTable& table, char delimiter = ',', std::string_view missing_token = "");

void write_csv(const RawTable& table, const std::filesystem::path& path, char delimiter = ',',
               std::string_view missing_token = "");

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// Quotes a field when it contains the delimiter, a quote or a line break.
std::string csv_escape(std::string_view field, char delimiter);

} // namespace ingest
} // namespace flowhunt
