#include "synthdata/glm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace synthdata {

using nlohmann::json;

namespace {

// first-observed level order, reference first
std::vector<int> observation_order(const std::vector<int32_t>& cells, size_t n_levels) {
    std::vector<int> order;
    std::vector<bool> seen(n_levels, false);
    for (int32_t v : cells) {
        if (!seen[static_cast<size_t>(v)]) {
            seen[static_cast<size_t>(v)] = true;
            order.push_back(v);
            if (order.size() == n_levels) break;
        }
    }
    return order;
}

void check_rank(const Eigen::MatrixXd& X, const std::vector<std::string>& labels) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    const Eigen::Index rank = qr.rank();
    if (rank < X.cols()) {
        const auto& perm = qr.colsPermutation().indices();
        std::ostringstream msg;
        msg << "design matrix is rank deficient (rank " << rank << " of " << X.cols()
            << "); dependent columns:";
        for (Eigen::Index i = rank; i < X.cols(); ++i) msg << " '" << labels[static_cast<size_t>(perm[i])] << "'";
        throw validation_error(msg.str());
    }
}

double poisson_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
    double dev = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double yi = y[i];
        const double mi = mu[i];
        dev += yi > 0.0 ? yi * std::log(yi / mi) - (yi - mi) : mi;
    }
    return 2.0 * dev;
}

}  // namespace

DesignResult build_design(const Table& table, const GlmFormula& formula) {
    const Schema& schema = table.schema();

    DesignInfo info;
    info.labels.push_back("(Intercept)");
    for (const auto& pred : formula.predictors) {
        size_t ci = schema.index_of(pred);
        if (schema.at(ci).kind == ColumnKind::categorical) {
            const Column& col = schema.at(ci);
            auto order = observation_order(table.categorical(ci), col.levels.size());
            if (order.empty()) throw validation_error("build_design: predictor '" + pred + "' has no data");
            DesignInfo::CatPredictor cp;
            cp.name = pred;
            for (int lvl : order) cp.levels.push_back(col.levels[static_cast<size_t>(lvl)]);
            for (size_t l = 1; l < cp.levels.size(); ++l)
                info.labels.push_back(pred + "=" + cp.levels[l]);
            info.categorical.push_back(std::move(cp));
        } else {
            info.continuous.push_back(pred);
            info.labels.push_back(pred);
        }
    }
    DesignResult out = build_design(table, formula, info);
    out.unseen_mapped_to_reference = 0;  // fit-time design cannot have unseen levels
    check_rank(out.X, out.info.labels);
    return out;
}

DesignResult build_design(const Table& table, const GlmFormula& formula, const DesignInfo& info) {
    const size_t n = table.rows();
    const Schema& schema = table.schema();
    DesignResult out;
    out.info = info;
    out.formula = formula;
    const size_t p = info.labels.size();
    out.X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    out.X.col(0).setOnes();

    // response
    {
        const auto& yv = table.numeric(formula.response);
        out.y.resize(static_cast<Eigen::Index>(n));
        for (size_t i = 0; i < n; ++i) {
            const double v = yv[i];
            if (v < 0.0 || std::abs(v - std::round(v)) > 1e-9)
                throw validation_error("build_design: response '" + formula.response +
                                       "' must be a nonnegative integer (row " + std::to_string(i) + ")");
            out.y[static_cast<Eigen::Index>(i)] = v;
        }
    }
    // offset
    {
        const auto& ev = table.numeric(formula.offset);
        out.log_offset.resize(static_cast<Eigen::Index>(n));
        for (size_t i = 0; i < n; ++i) {
            if (!(ev[i] > 0.0))
                throw validation_error("build_design: offset '" + formula.offset +
                                       "' must be positive (row " + std::to_string(i) + ")");
            out.log_offset[static_cast<Eigen::Index>(i)] = std::log(ev[i]);
        }
    }

    size_t col_at = 1;
    size_t cat_at = 0;
    for (const auto& pred : formula.predictors) {
        size_t ci = schema.index_of(pred);
        if (schema.at(ci).kind == ColumnKind::categorical) {
            const Column& col = schema.at(ci);
            const auto& cp = info.categorical.at(cat_at++);
            if (cp.name != pred)
                throw validation_error("build_design: design info does not match formula order");
            // level index in the table -> dummy column (or reference / unseen)
            std::vector<int> dummy_of(col.levels.size(), -2);
            for (size_t l = 0; l < col.levels.size(); ++l) {
                for (size_t m = 0; m < cp.levels.size(); ++m) {
                    if (col.levels[l] == cp.levels[m]) {
                        dummy_of[l] = m == 0 ? -1 : static_cast<int>(col_at + m - 1);
                        break;
                    }
                }
            }
            const auto& cells = table.categorical(ci);
            for (size_t i = 0; i < n; ++i) {
                int d = dummy_of[static_cast<size_t>(cells[i])];
                if (d == -2) {
                    ++out.unseen_mapped_to_reference;  // unseen at scoring: reference row
                } else if (d >= 0) {
                    out.X(static_cast<Eigen::Index>(i), d) = 1.0;
                }
            }
            col_at += cp.levels.size() - 1;
        } else {
            const auto& vals = table.numeric(ci);
            for (size_t i = 0; i < n; ++i)
                out.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col_at)) = vals[i];
            ++col_at;
        }
    }
    return out;
}

GlmModel fit_poisson(const DesignResult& design, const GlmControls& controls) {
    const Eigen::MatrixXd& X = design.X;
    const Eigen::VectorXd& y = design.y;
    const Eigen::VectorXd& off = design.log_offset;
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (n == 0) throw validation_error("fit_poisson: empty design");

    const double sum_y = y.sum();
    const double sum_expo = off.array().exp().sum();
    if (!(sum_y > 0.0)) throw validation_error("fit_poisson: response is identically zero");

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    beta[0] = std::log(sum_y / sum_expo);

    Eigen::VectorXd eta = X * beta + off;
    Eigen::VectorXd mu = eta.array().exp();
    double dev = poisson_deviance(y, mu);

    GlmModel model;
    model.info = design.info;
    model.formula = design.formula;
    std::vector<double> dev_trace{dev};
    int consecutive_bad = 0;

    int iter = 0;
    for (; iter < controls.max_iterations; ++iter) {
        Eigen::VectorXd w = mu.cwiseMax(1e-12);
        Eigen::VectorXd z = (eta - off) + (y - mu).cwiseQuotient(w);
        Eigen::MatrixXd xtwx = X.transpose() * w.asDiagonal() * X;
        Eigen::VectorXd xtwz = X.transpose() * (w.asDiagonal() * z);
        Eigen::VectorXd beta_new = xtwx.ldlt().solve(xtwz);

        // step-halving when the full IRLS step increases the deviance
        Eigen::VectorXd candidate = beta_new;
        double dev_new = 0.0;
        bool improved = false;
        for (int h = 0; h <= controls.max_halvings; ++h) {
            eta = X * candidate + off;
            mu = eta.array().exp();
            dev_new = poisson_deviance(y, mu);
            if (std::isfinite(dev_new) && dev_new <= dev + 1e-12) {
                improved = true;
                break;
            }
            candidate = 0.5 * (candidate + beta);
        }
        beta = candidate;
        if (!improved) {
            if (++consecutive_bad >= 3) {
                std::ostringstream msg;
                msg << "fit_poisson: deviance increased for 3 consecutive damped steps; trace:";
                for (double d : dev_trace) msg << " " << d;
                msg << " -> " << dev_new;
                throw runtime_failure(msg.str());
            }
        } else {
            consecutive_bad = 0;
        }
        const double rel = std::abs(dev - dev_new) / (std::abs(dev_new) + 0.1);
        dev = dev_new;
        dev_trace.push_back(dev);
        model.last_rel_change = rel;
        if (rel < controls.rel_tolerance) {
            model.converged = true;
            ++iter;
            break;
        }
    }

    model.beta = beta;
    model.iterations = iter;
    model.deviance = dev;
    return model;
}

Eigen::VectorXd predict(const GlmModel& model, const Table& table, size_t* unseen_warned) {
    DesignResult d = build_design(table, model.formula, model.info);
    if (unseen_warned) *unseen_warned += d.unseen_mapped_to_reference;
    Eigen::VectorXd eta = d.X * model.beta + d.log_offset;
    return eta.array().exp();
}

double rmse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual) {
    if (predicted.size() != actual.size()) throw validation_error("rmse: length mismatch");
    if (predicted.size() == 0) throw validation_error("rmse: empty input");
    return std::sqrt((predicted - actual).squaredNorm() / static_cast<double>(predicted.size()));
}

RelativityTable relativities(const GlmModel& model, const std::string& variable) {
    for (const auto& cp : model.info.categorical) {
        if (cp.name != variable) continue;
        RelativityTable out;
        out.variable = variable;
        out.levels = cp.levels;
        out.relativity.push_back(1.0);
        for (size_t l = 1; l < cp.levels.size(); ++l) {
            const std::string label = variable + "=" + cp.levels[l];
            auto it = std::find(model.info.labels.begin(), model.info.labels.end(), label);
            if (it == model.info.labels.end())
                throw validation_error("relativities: missing coefficient for " + label);
            out.relativity.push_back(std::exp(model.beta[it - model.info.labels.begin()]));
        }
        return out;
    }
    throw validation_error("relativities: '" + variable + "' was not a categorical predictor");
}

json GlmModel::to_json() const {
    json j;
    j["coefficients"] = json::object();
    for (size_t i = 0; i < info.labels.size(); ++i)
        j["coefficients"][info.labels[i]] = beta[static_cast<Eigen::Index>(i)];
    j["formula"] = {{"response", formula.response},
                    {"offset", formula.offset},
                    {"predictors", formula.predictors}};
    j["convergence"] = {{"iterations", iterations},
                        {"converged", converged},
                        {"deviance", deviance},
                        {"last_rel_change", last_rel_change}};
    json cats = json::array();
    for (const auto& cp : info.categorical) cats.push_back({{"name", cp.name}, {"levels", cp.levels}});
    j["categorical_predictors"] = cats;
    return j;
}

}  // namespace synthdata
