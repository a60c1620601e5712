#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthdata/gan.hpp"
#include "synthdata/glm.hpp"
#include "synthdata/table.hpp"
#include "synthdata/transforms.hpp"

namespace synthdata {

struct StudyConfig {
    std::string label = "study";
    int k = 10;
    TransformPipeline recipe;
    GlmFormula formula;
    TrainConfig train;
    uint64_t seed = 0;
    // |T_syn| matches the full analysis set instead of the training subsample
    bool syn_match_full_analysis = false;
    std::vector<std::string> relativity_variables;  // default: all categorical predictors
    int workers = 1;

    nlohmann::json to_json() const;
    // recipe is not part of the JSON config; the caller supplies it
    static StudyConfig from_json(const nlohmann::json& j);
};

struct CategoricalComparison {
    std::vector<std::string> levels;
    std::vector<double> p_real;
    std::vector<double> p_syn;
    double tv_distance = 0.0;
};

struct ContinuousComparison {
    std::vector<double> quantiles;  // probe points 0.0 .. 1.0
    std::vector<double> q_real;
    std::vector<double> q_syn;
    double ks_statistic = 0.0;
};

struct ColumnComparison {
    std::string column;
    bool is_categorical = false;
    CategoricalComparison categorical;
    ContinuousComparison continuous;
};

struct DistributionReport {
    std::vector<ColumnComparison> columns;
};

// Per-column comparison of two same-schema tables: level proportions and
// total-variation distance for categoricals, deciles and the two-sample KS
// statistic for continuous columns.
DistributionReport distribution_report(const Table& real, const Table& syn);

struct FoldResult {
    int fold = 0;
    bool failed = false;
    std::string failure;
    double rmse_real = 0.0;
    double rmse_syn = 0.0;
    size_t analysis_rows = 0;
    size_t trained_rows = 0;
    size_t syn_rows = 0;
    size_t assessment_rows = 0;
    size_t unseen_levels_syn = 0;  // scoring rows mapped to reference by M_syn
    GlmModel model_real;
    GlmModel model_syn;
    DistributionReport distributions;  // trained subsample vs T_syn, pre-processed space
    std::optional<Synthesizer> synthesizer;
};

struct RelativityStats {
    std::string variable;
    std::vector<std::string> levels;  // common base level first
    std::vector<double> mean_real, var_real;
    std::vector<double> mean_syn, var_syn;
    std::vector<double> var_ratio;  // syn/real, 0 when var_real == 0
};

// Cross-fold relativity statistics. Each fold's table is re-based to a common
// reference level (predictions are invariant to this reparameterization), so
// means and variances are comparable across folds.
std::vector<RelativityStats> relativity_report(const std::vector<FoldResult>& folds,
                                               const std::vector<std::string>& variables);

struct StudyReport {
    std::string label;
    std::vector<FoldResult> folds;
    int failed_folds = 0;
    double mean_rmse_real = 0.0;
    double mean_rmse_syn = 0.0;
    double relative_difference = 0.0;  // (syn - real) / real
    std::vector<RelativityStats> relativities;

    nlohmann::json to_json() const;
};

// "X.XX%" with two decimals from the unrounded fraction.
std::string format_percent(double fraction);

// One metrics row: label, mean rmse real, mean rmse syn, relative difference.
std::string metrics_csv(const StudyReport& report);

// The full Fig.-3 style study: per-fold synthesizer training, same-size
// generation, dual GLM fitting, out-of-fold scoring. `raw` is the unprocessed
// modeling dataset; the recipe's pre steps are applied once up front.
StudyReport run_study(const Table& raw, const StudyConfig& config, const ProgressFn& progress = {});

// Persists report.json, metrics.csv, distributions/<column>.csv,
// relativities/<variable>.csv, per-fold model JSONs and synthesizer files.
void write_study_report(const StudyReport& report, const StudyConfig& config,
                        const std::string& directory);

}  // namespace synthdata
