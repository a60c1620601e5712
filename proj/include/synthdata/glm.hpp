#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "synthdata/table.hpp"

namespace synthdata {

struct GlmFormula {
    std::string response;
    std::string offset;  // exposure column; enters as log(offset)
    std::vector<std::string> predictors;
};

// How a fitted design maps columns to coefficients. Categorical levels are
// listed reference-first (reference = first-observed level in the training
// table); only observed levels get dummies.
struct DesignInfo {
    struct CatPredictor {
        std::string name;
        std::vector<std::string> levels;  // [0] is the reference
    };
    std::vector<std::string> labels;  // size p: "(Intercept)", "Var=Level", continuous names
    std::vector<CatPredictor> categorical;
    std::vector<std::string> continuous;
};

struct DesignResult {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::VectorXd log_offset;
    DesignInfo info;
    GlmFormula formula;
    size_t unseen_mapped_to_reference = 0;  // scoring-time only
};

// Fit-time design: dummy coding with first-observed reference levels.
DesignResult build_design(const Table& table, const GlmFormula& formula);
// Scoring-time design against a fixed coefficient layout; unseen levels map
// to the reference and are counted.
DesignResult build_design(const Table& table, const GlmFormula& formula, const DesignInfo& info);

struct GlmControls {
    double rel_tolerance = 1e-10;
    int max_iterations = 50;
    int max_halvings = 10;
};

struct GlmModel {
    Eigen::VectorXd beta;
    DesignInfo info;
    GlmFormula formula;
    int iterations = 0;
    bool converged = false;
    double deviance = 0.0;
    double last_rel_change = 0.0;

    nlohmann::json to_json() const;
};

// IRLS for the Poisson log-link model with offset. Throws runtime_failure when
// the deviance keeps increasing through damped steps (divergence).
GlmModel fit_poisson(const DesignResult& design, const GlmControls& controls = {});

// mu_i = exposure_i * exp(x_i' beta). `unseen_warned` (optional) accumulates
// the count of scoring rows whose level fell back to the reference.
Eigen::VectorXd predict(const GlmModel& model, const Table& table, size_t* unseen_warned = nullptr);

double rmse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual);

struct RelativityTable {
    std::string variable;
    std::vector<std::string> levels;   // reference first
    std::vector<double> relativity;    // reference pinned at 1.0
};

RelativityTable relativities(const GlmModel& model, const std::string& variable);

}  // namespace synthdata
