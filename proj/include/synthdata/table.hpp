#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "synthdata/errors.hpp"

namespace synthdata {

enum class ColumnKind { continuous, categorical };

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::continuous;
    std::vector<std::string> levels;  // categorical: level dictionary, index = stored cell value
    bool levels_declared = false;     // true: observed values must be a subset of `levels`

    int level_index(const std::string& level) const;  // -1 if unknown
};

class Schema {
public:
    Schema() = default;
    explicit Schema(std::vector<Column> columns);

    size_t size() const { return columns_.size(); }
    const Column& at(size_t i) const { return columns_.at(i); }
    Column& at(size_t i) { return columns_.at(i); }
    const std::vector<Column>& columns() const { return columns_; }

    bool has(const std::string& name) const;
    size_t index_of(const std::string& name) const;  // throws validation_error if unknown

private:
    std::vector<Column> columns_;
};

// Column-typed rectangular dataset. Continuous cells are doubles; categorical
// cells are dense level indices into the schema's per-column dictionary.
// Immutable in spirit: mutating accessors exist for construction and transform
// application, which always build a fresh Table.
class Table {
public:
    Table() = default;
    explicit Table(Schema schema);

    const Schema& schema() const { return schema_; }
    Schema& schema() { return schema_; }
    size_t rows() const { return rows_; }
    size_t cols() const { return schema_.size(); }

    std::vector<double>& numeric(size_t col);
    const std::vector<double>& numeric(size_t col) const;
    std::vector<int32_t>& categorical(size_t col);
    const std::vector<int32_t>& categorical(size_t col) const;

    std::vector<double>& numeric(const std::string& name) { return numeric(schema_.index_of(name)); }
    const std::vector<double>& numeric(const std::string& name) const { return numeric(schema_.index_of(name)); }
    std::vector<int32_t>& categorical(const std::string& name) { return categorical(schema_.index_of(name)); }
    const std::vector<int32_t>& categorical(const std::string& name) const { return categorical(schema_.index_of(name)); }

    void set_rows(size_t n);  // resizes every column store
    void append_numeric_column(const Column& col, std::vector<double> values);
    void append_categorical_column(const Column& col, std::vector<int32_t> values);
    void drop_column(size_t col);
    void retype_to_categorical(size_t col, std::vector<std::string> levels, std::vector<int32_t> values);
    void retype_to_numeric(size_t col, std::vector<double> values);

    Table select_rows(const std::vector<size_t>& indices) const;

    std::vector<size_t> categorical_columns() const;
    std::vector<size_t> continuous_columns() const;

private:
    Schema schema_;
    size_t rows_ = 0;
    std::vector<std::vector<double>> num_;    // populated iff kind == continuous
    std::vector<std::vector<int32_t>> cat_;   // populated iff kind == categorical
};

struct CsvOptions {
    char delimiter = ',';
    bool header = true;  // header row is required by the format; kept for symmetry
};

struct CsvReadResult {
    Table table;
    size_t rejected_rows = 0;
};

// RFC-4180-style reader. Header must cover all schema columns (extra file
// columns are ignored). Rows with unparseable continuous cells, non-finite
// values, or unknown levels (when levels are declared) are rejected and counted.
CsvReadResult read_csv(const std::string& path, const Schema& schema, const CsvOptions& options = {});
CsvReadResult read_csv_string(const std::string& text, const Schema& schema, const CsvOptions& options = {});

// Emits columns in schema order; continuous values with round-trip-exact
// shortest decimal formatting.
void write_csv(const Table& table, const std::string& path, const CsvOptions& options = {});
std::string write_csv_string(const Table& table, const CsvOptions& options = {});

struct FoldAssignment {
    int k = 0;
    std::vector<int32_t> fold_of_row;
    uint64_t seed = 0;

    size_t fold_size(int fold) const;
};

// Seeded shuffle of row indices, then round-robin slicing. Deterministic in
// (n, k, seed); fold sizes differ by at most one.
FoldAssignment kfold_split(const Table& table, int k, uint64_t seed);

// (analysis, assessment): assessment is exactly fold k_index, analysis its complement.
std::pair<Table, Table> analysis_assessment(const Table& table, const FoldAssignment& folds, int k_index);

// Empirical probability per level index (schema order); sums to 1.
std::vector<double> level_frequencies(const Table& table, const std::string& column);
std::vector<size_t> level_counts(const Table& table, size_t col);

}  // namespace synthdata
