#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthdata/table.hpp"

namespace synthdata {

enum class StepKind {
    clamp_upper,
    clamp_lower,
    clamp_both,
    log_transform,
    bin_numeric,
    bin_categorical,
    to_categorical,
    to_numeric,
    rate_from_counts,
    counts_from_rate,
};

// One declarative column transform. Which fields apply depends on `kind`; the
// constructors below build validated steps.
struct TransformStep {
    StepKind kind;
    std::string column;

    double lo = 0.0;  // clamp_lower / clamp_both bound
    double hi = 0.0;  // clamp_upper / clamp_both bound

    std::vector<double> cut_points;        // bin_numeric, strictly ascending
    std::vector<std::string> bin_labels;   // |cuts|+1 open-ended, or |cuts|-1 bounded

    std::vector<std::pair<std::string, std::string>> level_map;  // bin_categorical: level -> group
    std::vector<std::pair<double, std::string>> value_to_level;  // to_categorical
    std::vector<std::pair<std::string, double>> level_to_value;  // to_numeric

    std::string exposure_column;  // rate_from_counts / counts_from_rate
    std::string output_column;    // name of the created column

    static TransformStep ClampUpper(std::string column, double bound);
    static TransformStep ClampLower(std::string column, double bound);
    static TransformStep ClampBoth(std::string column, double lo, double hi);
    static TransformStep LogTransform(std::string column);
    static TransformStep BinNumeric(std::string column, std::vector<double> cuts,
                                    std::vector<std::string> labels);
    static TransformStep BinCategorical(std::string column,
                                        std::vector<std::pair<std::string, std::string>> level_map);
    static TransformStep ToCategorical(std::string column,
                                       std::vector<std::pair<double, std::string>> value_to_level);
    static TransformStep ToNumeric(std::string column,
                                   std::vector<std::pair<std::string, double>> level_to_value);
    // Creates `rate_column` = count/exposure and drops the count column.
    static TransformStep RateFromCounts(std::string count_column, std::string exposure_column,
                                        std::string rate_column);
    // Creates `count_column` = clamp(round(rate*exposure), 0, floor(exposure))
    // and drops the rate column. Rounding is half-away-from-zero.
    static TransformStep CountsFromRate(std::string rate_column, std::string exposure_column,
                                        std::string count_column);
};

struct TransformPipeline {
    std::vector<TransformStep> pre;
    std::vector<TransformStep> post;
};

// Applies steps in order; the output schema reflects created/retyped columns.
Table apply(const std::vector<TransformStep>& steps, const Table& table);

// Shipped recipes (Tables 1-2 style). Bin cut points are defaults; the JSON
// recipe files under recipes/ carry the same content in editable form.
TransformPipeline tpl_recipe();
TransformPipeline lapse_recipe();

nlohmann::json pipeline_to_json(const TransformPipeline& p);
TransformPipeline pipeline_from_json(const nlohmann::json& j);
TransformPipeline load_recipe(const std::string& path);

}  // namespace synthdata
