#include "synthdata/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "synthdata/rng.hpp"

namespace synthdata {

int Column::level_index(const std::string& level) const {
    for (size_t i = 0; i < levels.size(); ++i)
        if (levels[i] == level) return static_cast<int>(i);
    return -1;
}

Schema::Schema(std::vector<Column> columns) : columns_(std::move(columns)) {
    std::unordered_set<std::string> seen;
    for (const auto& c : columns_) {
        if (c.name.empty()) throw validation_error("schema: column names must be nonempty");
        if (!seen.insert(c.name).second)
            throw validation_error("schema: duplicate column name '" + c.name + "'");
    }
}

bool Schema::has(const std::string& name) const {
    for (const auto& c : columns_)
        if (c.name == name) return true;
    return false;
}

size_t Schema::index_of(const std::string& name) const {
    for (size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].name == name) return i;
    throw validation_error("schema: unknown column '" + name + "'");
}

Table::Table(Schema schema) : schema_(std::move(schema)) {
    num_.resize(schema_.size());
    cat_.resize(schema_.size());
}

std::vector<double>& Table::numeric(size_t col) {
    if (schema_.at(col).kind != ColumnKind::continuous)
        throw validation_error("table: column '" + schema_.at(col).name + "' is not continuous");
    return num_[col];
}

const std::vector<double>& Table::numeric(size_t col) const {
    if (schema_.at(col).kind != ColumnKind::continuous)
        throw validation_error("table: column '" + schema_.at(col).name + "' is not continuous");
    return num_[col];
}

std::vector<int32_t>& Table::categorical(size_t col) {
    if (schema_.at(col).kind != ColumnKind::categorical)
        throw validation_error("table: column '" + schema_.at(col).name + "' is not categorical");
    return cat_[col];
}

const std::vector<int32_t>& Table::categorical(size_t col) const {
    if (schema_.at(col).kind != ColumnKind::categorical)
        throw validation_error("table: column '" + schema_.at(col).name + "' is not categorical");
    return cat_[col];
}

void Table::set_rows(size_t n) {
    rows_ = n;
    for (size_t j = 0; j < schema_.size(); ++j) {
        if (schema_.at(j).kind == ColumnKind::continuous)
            num_[j].resize(n);
        else
            cat_[j].resize(n);
    }
}

void Table::append_numeric_column(const Column& col, std::vector<double> values) {
    if (values.size() != rows_ && !(rows_ == 0 && cols() == 0))
        throw validation_error("table: new column '" + col.name + "' has wrong row count");
    if (schema_.has(col.name))
        throw validation_error("table: column '" + col.name + "' already exists");
    if (rows_ == 0 && cols() == 0) rows_ = values.size();
    std::vector<Column> cs = schema_.columns();
    Column c = col;
    c.kind = ColumnKind::continuous;
    cs.push_back(c);
    schema_ = Schema(std::move(cs));
    num_.push_back(std::move(values));
    cat_.emplace_back();
}

void Table::append_categorical_column(const Column& col, std::vector<int32_t> values) {
    if (values.size() != rows_ && !(rows_ == 0 && cols() == 0))
        throw validation_error("table: new column '" + col.name + "' has wrong row count");
    if (schema_.has(col.name))
        throw validation_error("table: column '" + col.name + "' already exists");
    if (rows_ == 0 && cols() == 0) rows_ = values.size();
    std::vector<Column> cs = schema_.columns();
    Column c = col;
    c.kind = ColumnKind::categorical;
    cs.push_back(c);
    schema_ = Schema(std::move(cs));
    num_.emplace_back();
    cat_.push_back(std::move(values));
}

void Table::drop_column(size_t col) {
    if (col >= schema_.size()) throw validation_error("table: drop_column index out of range");
    std::vector<Column> cs = schema_.columns();
    cs.erase(cs.begin() + static_cast<long>(col));
    schema_ = Schema(std::move(cs));
    num_.erase(num_.begin() + static_cast<long>(col));
    cat_.erase(cat_.begin() + static_cast<long>(col));
}

void Table::retype_to_categorical(size_t col, std::vector<std::string> levels, std::vector<int32_t> values) {
    if (values.size() != rows_) throw validation_error("table: retype value count mismatch");
    Column& c = schema_.at(col);
    c.kind = ColumnKind::categorical;
    c.levels = std::move(levels);
    c.levels_declared = true;
    num_[col].clear();
    cat_[col] = std::move(values);
}

void Table::retype_to_numeric(size_t col, std::vector<double> values) {
    if (values.size() != rows_) throw validation_error("table: retype value count mismatch");
    Column& c = schema_.at(col);
    c.kind = ColumnKind::continuous;
    c.levels.clear();
    c.levels_declared = false;
    cat_[col].clear();
    num_[col] = std::move(values);
}

Table Table::select_rows(const std::vector<size_t>& indices) const {
    Table out(schema_);
    out.set_rows(indices.size());
    for (size_t j = 0; j < schema_.size(); ++j) {
        if (schema_.at(j).kind == ColumnKind::continuous) {
            const auto& src = num_[j];
            auto& dst = out.num_[j];
            for (size_t i = 0; i < indices.size(); ++i) dst[i] = src[indices[i]];
        } else {
            const auto& src = cat_[j];
            auto& dst = out.cat_[j];
            for (size_t i = 0; i < indices.size(); ++i) dst[i] = src[indices[i]];
        }
    }
    return out;
}

std::vector<size_t> Table::categorical_columns() const {
    std::vector<size_t> out;
    for (size_t j = 0; j < schema_.size(); ++j)
        if (schema_.at(j).kind == ColumnKind::categorical) out.push_back(j);
    return out;
}

std::vector<size_t> Table::continuous_columns() const {
    std::vector<size_t> out;
    for (size_t j = 0; j < schema_.size(); ++j)
        if (schema_.at(j).kind == ColumnKind::continuous) out.push_back(j);
    return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

// Splits RFC-4180 records: quoted fields may contain delimiters, escaped
// quotes ("") and newlines. Returns one record per entry.
std::vector<std::vector<std::string>> parse_csv(const std::string& text, char delim) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    size_t i = 0;
    const size_t n = text.size();
    auto end_field = [&]() {
        record.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_record = [&]() {
        end_field();
        if (record.size() > 1 || !record[0].empty()) records.push_back(record);
        record.clear();
    };
    while (i < n) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == delim) {
            end_field();
        } else if (c == '\r') {
            // handled by the \n that follows; lone \r treated as record end
            if (i + 1 >= n || text[i + 1] != '\n') end_record();
        } else if (c == '\n') {
            end_record();
        } else {
            field.push_back(c);
            field_started = true;
        }
        ++i;
    }
    if (!field.empty() || !record.empty()) end_record();
    return records;
}

bool parse_double(const std::string& s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
    if (first == last) return false;
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string& s, char delim) {
    bool needs_quote = s.find(delim) != std::string::npos || s.find('"') != std::string::npos ||
                       s.find('\n') != std::string::npos || s.find('\r') != std::string::npos;
    if (!needs_quote) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

}  // namespace

CsvReadResult read_csv_string(const std::string& text, const Schema& schema, const CsvOptions& options) {
    auto records = parse_csv(text, options.delimiter);
    if (records.empty()) throw validation_error("csv: empty input (header row required)");

    const auto& header = records[0];
    std::vector<size_t> file_col(schema.size());
    for (size_t j = 0; j < schema.size(); ++j) {
        const std::string& want = schema.at(j).name;
        auto it = std::find(header.begin(), header.end(), want);
        if (it == header.end())
            throw validation_error("csv: missing column '" + want + "' in header");
        file_col[j] = static_cast<size_t>(it - header.begin());
    }

    // Working level dictionaries; grown for undeclared categorical columns.
    std::vector<Column> cols = schema.columns();
    std::vector<std::unordered_map<std::string, int>> level_of(schema.size());
    for (size_t j = 0; j < cols.size(); ++j)
        for (size_t l = 0; l < cols[j].levels.size(); ++l)
            level_of[j][cols[j].levels[l]] = static_cast<int>(l);

    std::vector<std::vector<double>> num(schema.size());
    std::vector<std::vector<int32_t>> cat(schema.size());
    size_t rejected = 0;

    std::vector<double> row_num(schema.size());
    std::vector<int32_t> row_cat(schema.size());
    for (size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        bool ok = true;
        // pass 1: validate the whole row before committing any cell
        std::vector<std::pair<size_t, std::string>> new_levels;
        for (size_t j = 0; j < schema.size() && ok; ++j) {
            if (file_col[j] >= rec.size()) { ok = false; break; }
            const std::string& cell = rec[file_col[j]];
            if (cols[j].kind == ColumnKind::continuous) {
                double v;
                if (!parse_double(cell, v) || !std::isfinite(v)) { ok = false; break; }
                row_num[j] = v;
            } else {
                auto it = level_of[j].find(cell);
                if (it != level_of[j].end()) {
                    row_cat[j] = it->second;
                } else if (cols[j].levels_declared) {
                    ok = false;  // unknown level against a declared dictionary
                } else {
                    new_levels.emplace_back(j, cell);
                    row_cat[j] = -1;  // patched below
                }
            }
        }
        if (!ok) {
            ++rejected;
            continue;
        }
        for (auto& [j, lvl] : new_levels) {
            int idx = static_cast<int>(cols[j].levels.size());
            cols[j].levels.push_back(lvl);
            level_of[j][lvl] = idx;
            row_cat[j] = idx;
        }
        for (size_t j = 0; j < schema.size(); ++j) {
            if (cols[j].kind == ColumnKind::continuous)
                num[j].push_back(row_num[j]);
            else
                cat[j].push_back(row_cat[j]);
        }
    }

    Table table{Schema(cols)};
    size_t n = 0;
    for (size_t j = 0; j < cols.size(); ++j)
        n = std::max(n, std::max(num[j].size(), cat[j].size()));
    table.set_rows(n);
    for (size_t j = 0; j < cols.size(); ++j) {
        if (cols[j].kind == ColumnKind::continuous)
            table.numeric(j) = std::move(num[j]);
        else
            table.categorical(j) = std::move(cat[j]);
    }
    return {std::move(table), rejected};
}

CsvReadResult read_csv(const std::string& path, const Schema& schema, const CsvOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("csv: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return read_csv_string(ss.str(), schema, options);
}

std::string write_csv_string(const Table& table, const CsvOptions& options) {
    std::string out;
    const Schema& schema = table.schema();
    for (size_t j = 0; j < schema.size(); ++j) {
        if (j) out.push_back(options.delimiter);
        out += csv_escape(schema.at(j).name, options.delimiter);
    }
    out.push_back('\n');
    for (size_t i = 0; i < table.rows(); ++i) {
        for (size_t j = 0; j < schema.size(); ++j) {
            if (j) out.push_back(options.delimiter);
            if (schema.at(j).kind == ColumnKind::continuous) {
                out += format_double(table.numeric(j)[i]);
            } else {
                int32_t idx = table.categorical(j)[i];
                out += csv_escape(schema.at(j).levels.at(static_cast<size_t>(idx)), options.delimiter);
            }
        }
        out.push_back('\n');
    }
    return out;
}

void write_csv(const Table& table, const std::string& path, const CsvOptions& options) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw runtime_failure("csv: cannot write '" + path + "'");
    out << write_csv_string(table, options);
}

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

size_t FoldAssignment::fold_size(int fold) const {
    size_t n = 0;
    for (int32_t f : fold_of_row)
        if (f == fold) ++n;
    return n;
}

FoldAssignment kfold_split(const Table& table, int k, uint64_t seed) {
    const size_t n = table.rows();
    if (k < 2) throw validation_error("kfold_split: k must be >= 2");
    if (static_cast<size_t>(k) > n) throw validation_error("kfold_split: k exceeds row count");
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    RandomStream rng(hash_combine(seed, 0x6b666f6c64ull));  // namespaced stream
    rng.shuffle(order);
    FoldAssignment fa;
    fa.k = k;
    fa.seed = seed;
    fa.fold_of_row.resize(n);
    for (size_t pos = 0; pos < n; ++pos)
        fa.fold_of_row[order[pos]] = static_cast<int32_t>(pos % static_cast<size_t>(k));
    return fa;
}

std::pair<Table, Table> analysis_assessment(const Table& table, const FoldAssignment& folds, int k_index) {
    if (k_index < 0 || k_index >= folds.k)
        throw validation_error("analysis_assessment: fold index out of range");
    if (folds.fold_of_row.size() != table.rows())
        throw validation_error("analysis_assessment: fold assignment does not match table");
    std::vector<size_t> analysis, assessment;
    for (size_t i = 0; i < table.rows(); ++i) {
        if (folds.fold_of_row[i] == k_index)
            assessment.push_back(i);
        else
            analysis.push_back(i);
    }
    return {table.select_rows(analysis), table.select_rows(assessment)};
}

std::vector<size_t> level_counts(const Table& table, size_t col) {
    const Column& c = table.schema().at(col);
    if (c.kind != ColumnKind::categorical)
        throw validation_error("level_counts: column '" + c.name + "' is not categorical");
    std::vector<size_t> counts(c.levels.size(), 0);
    for (int32_t v : table.categorical(col)) counts.at(static_cast<size_t>(v))++;
    return counts;
}

std::vector<double> level_frequencies(const Table& table, const std::string& column) {
    size_t col = table.schema().index_of(column);
    if (table.rows() == 0) throw validation_error("level_frequencies: empty table");
    auto counts = level_counts(table, col);
    std::vector<double> freq(counts.size());
    const double n = static_cast<double>(table.rows());
    for (size_t i = 0; i < counts.size(); ++i) freq[i] = static_cast<double>(counts[i]) / n;
    return freq;
}

}  // namespace synthdata
