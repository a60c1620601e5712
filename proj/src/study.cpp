#include "synthdata/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

namespace synthdata {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// StudyConfig
// ---------------------------------------------------------------------------

json StudyConfig::to_json() const {
    json j;
    j["label"] = label;
    j["k"] = k;
    j["formula"] = {{"response", formula.response},
                    {"offset", formula.offset},
                    {"predictors", formula.predictors}};
    j["train"] = train.to_json();
    j["seed"] = seed;
    j["syn_match_full_analysis"] = syn_match_full_analysis;
    j["relativity_variables"] = relativity_variables;
    j["workers"] = workers;
    return j;
}

StudyConfig StudyConfig::from_json(const json& j) {
    StudyConfig c;
    if (j.contains("label")) c.label = j.at("label").get<std::string>();
    if (j.contains("k")) c.k = j.at("k").get<int>();
    const auto& f = j.at("formula");
    c.formula.response = f.at("response").get<std::string>();
    c.formula.offset = f.at("offset").get<std::string>();
    c.formula.predictors = f.at("predictors").get<std::vector<std::string>>();
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("syn_match_full_analysis"))
        c.syn_match_full_analysis = j.at("syn_match_full_analysis").get<bool>();
    if (j.contains("relativity_variables"))
        c.relativity_variables = j.at("relativity_variables").get<std::vector<std::string>>();
    if (j.contains("workers")) c.workers = j.at("workers").get<int>();
    if (c.k < 2) throw validation_error("study config: k must be >= 2");
    if (c.workers < 1) throw validation_error("study config: workers must be >= 1");
    return c;
}

// ---------------------------------------------------------------------------
// Distribution comparison
// ---------------------------------------------------------------------------

namespace {

double quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const size_t lo = static_cast<size_t>(std::floor(h));
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    size_t i = 0, j = 0;
    double ks = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        ks = std::max(ks, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return ks;
}

}  // namespace

DistributionReport distribution_report(const Table& real, const Table& syn) {
    const Schema& rs = real.schema();
    const Schema& ss = syn.schema();
    if (rs.size() != ss.size()) throw validation_error("distribution_report: schema mismatch");
    for (size_t j = 0; j < rs.size(); ++j)
        if (rs.at(j).name != ss.at(j).name || rs.at(j).kind != ss.at(j).kind)
            throw validation_error("distribution_report: schema mismatch at column '" +
                                   rs.at(j).name + "'");

    DistributionReport out;
    for (size_t j = 0; j < rs.size(); ++j) {
        ColumnComparison cc;
        cc.column = rs.at(j).name;
        if (rs.at(j).kind == ColumnKind::categorical) {
            cc.is_categorical = true;
            // compare over the union level set; level dictionaries may differ in order
            std::vector<std::string> levels = rs.at(j).levels;
            for (const auto& l : ss.at(j).levels)
                if (std::find(levels.begin(), levels.end(), l) == levels.end()) levels.push_back(l);
            auto proportions = [&](const Table& t) {
                std::vector<double> p(levels.size(), 0.0);
                const Column& col = t.schema().at(j);
                const auto& cells = t.categorical(j);
                for (int32_t v : cells) {
                    const std::string& name = col.levels[static_cast<size_t>(v)];
                    const size_t idx = static_cast<size_t>(
                        std::find(levels.begin(), levels.end(), name) - levels.begin());
                    p[idx] += 1.0;
                }
                if (!cells.empty())
                    for (double& x : p) x /= static_cast<double>(cells.size());
                return p;
            };
            cc.categorical.levels = levels;
            cc.categorical.p_real = proportions(real);
            cc.categorical.p_syn = proportions(syn);
            double tv = 0.0;
            for (size_t l = 0; l < levels.size(); ++l)
                tv += std::abs(cc.categorical.p_real[l] - cc.categorical.p_syn[l]);
            cc.categorical.tv_distance = 0.5 * tv;
        } else {
            std::vector<double> a = real.numeric(j);
            std::vector<double> b = syn.numeric(j);
            cc.continuous.ks_statistic = ks_two_sample(a, b);
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            for (int d = 0; d <= 10; ++d) {
                const double q = static_cast<double>(d) / 10.0;
                cc.continuous.quantiles.push_back(q);
                cc.continuous.q_real.push_back(quantile(a, q));
                cc.continuous.q_syn.push_back(quantile(b, q));
            }
        }
        out.columns.push_back(std::move(cc));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Relativity statistics
// ---------------------------------------------------------------------------

namespace {

struct LevelAccumulator {
    std::vector<double> real_vals;
    std::vector<double> syn_vals;
};

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

// relativities re-based so `base` has relativity exactly 1
std::optional<std::vector<std::pair<std::string, double>>> rebased_relativities(
    const GlmModel& model, const std::string& variable, const std::string& base) {
    RelativityTable t;
    try {
        t = relativities(model, variable);
    } catch (const validation_error&) {
        return std::nullopt;
    }
    double base_rel = 0.0;
    for (size_t i = 0; i < t.levels.size(); ++i)
        if (t.levels[i] == base) base_rel = t.relativity[i];
    if (base_rel == 0.0) return std::nullopt;  // base level absent from this fold
    std::vector<std::pair<std::string, double>> out;
    for (size_t i = 0; i < t.levels.size(); ++i)
        out.emplace_back(t.levels[i], t.relativity[i] / base_rel);
    return out;
}

}  // namespace

std::vector<RelativityStats> relativity_report(const std::vector<FoldResult>& folds,
                                               const std::vector<std::string>& variables) {
    size_t ok = 0;
    for (const auto& f : folds)
        if (!f.failed) ++ok;
    if (ok < 2) throw validation_error("relativity_report: needs at least 2 successful folds");

    std::vector<RelativityStats> out;
    for (const auto& var : variables) {
        // common base: the first successful fold's real-model reference
        std::string base;
        std::vector<std::string> levels;
        for (const auto& f : folds) {
            if (f.failed) continue;
            RelativityTable t = relativities(f.model_real, var);  // throws if var unknown
            if (base.empty()) {
                base = t.levels[0];
                levels = t.levels;
            } else {
                for (const auto& l : t.levels)
                    if (std::find(levels.begin(), levels.end(), l) == levels.end())
                        levels.push_back(l);
            }
        }

        std::vector<LevelAccumulator> acc(levels.size());
        for (const auto& f : folds) {
            if (f.failed) continue;
            auto real_rel = rebased_relativities(f.model_real, var, base);
            auto syn_rel = rebased_relativities(f.model_syn, var, base);
            for (size_t l = 0; l < levels.size(); ++l) {
                if (real_rel)
                    for (const auto& [name, v] : *real_rel)
                        if (name == levels[l]) acc[l].real_vals.push_back(v);
                if (syn_rel)
                    for (const auto& [name, v] : *syn_rel)
                        if (name == levels[l]) acc[l].syn_vals.push_back(v);
            }
        }

        RelativityStats st;
        st.variable = var;
        st.levels = levels;
        for (size_t l = 0; l < levels.size(); ++l) {
            st.mean_real.push_back(mean_of(acc[l].real_vals));
            st.var_real.push_back(variance_of(acc[l].real_vals));
            st.mean_syn.push_back(mean_of(acc[l].syn_vals));
            st.var_syn.push_back(variance_of(acc[l].syn_vals));
            st.var_ratio.push_back(st.var_real[l] > 0.0 ? st.var_syn[l] / st.var_real[l] : 0.0);
        }
        out.push_back(std::move(st));
    }
    return out;
}

// ---------------------------------------------------------------------------
// run_study
// ---------------------------------------------------------------------------

namespace {

Table subsample_rows(const Table& t, size_t cap, uint64_t seed) {
    if (t.rows() <= cap) return t;
    std::vector<size_t> rows(t.rows());
    std::iota(rows.begin(), rows.end(), size_t{0});
    RandomStream rng(hash_combine(seed, 0x737562ull));
    rng.shuffle(rows);
    rows.resize(cap);
    std::sort(rows.begin(), rows.end());
    return t.select_rows(rows);
}

FoldResult run_fold(const Table& pre, const FoldAssignment& folds, int fold,
                    const StudyConfig& config, const ProgressFn& progress) {
    FoldResult r;
    r.fold = fold;
    const uint64_t fold_seed = hash_combine(config.seed, static_cast<uint64_t>(fold));
    try {
        auto [analysis, assessment] = analysis_assessment(pre, folds, fold);
        r.analysis_rows = analysis.rows();
        r.assessment_rows = assessment.rows();

        // subsample here so the same rows feed training, |T_syn| and the
        // distribution comparison
        Table trained = subsample_rows(analysis, config.train.subsample_cap, fold_seed);
        r.trained_rows = trained.rows();

        TrainConfig tc = config.train;
        tc.seed = fold_seed;
        Synthesizer synth = train(trained, tc, progress);

        const size_t syn_n = config.syn_match_full_analysis ? analysis.rows() : trained.rows();
        Table syn = generate(synth, syn_n, hash_combine(fold_seed, 0x67656eull));
        r.syn_rows = syn.rows();
        r.distributions = distribution_report(trained, syn);

        Table syn_post = synthdata::apply(config.recipe.post, syn);
        Table analysis_post = synthdata::apply(config.recipe.post, analysis);
        Table assess_post = synthdata::apply(config.recipe.post, assessment);

        r.model_real = fit_poisson(build_design(analysis_post, config.formula));
        if (!r.model_real.converged)
            throw runtime_failure("GLM on real analysis data did not converge");
        r.model_syn = fit_poisson(build_design(syn_post, config.formula));
        if (!r.model_syn.converged)
            throw runtime_failure("GLM on synthetic data did not converge");

        DesignResult score = build_design(assess_post, config.formula, r.model_real.info);
        Eigen::VectorXd y = score.y;
        Eigen::VectorXd mu_real = predict(r.model_real, assess_post);
        size_t unseen = 0;
        Eigen::VectorXd mu_syn = predict(r.model_syn, assess_post, &unseen);
        r.unseen_levels_syn = unseen;
        r.rmse_real = rmse(mu_real, y);
        r.rmse_syn = rmse(mu_syn, y);
        r.synthesizer = std::move(synth);
    } catch (const std::exception& e) {
        r.failed = true;
        r.failure = e.what();
    }
    return r;
}

}  // namespace

StudyReport run_study(const Table& raw, const StudyConfig& config, const ProgressFn& progress) {
    if (config.k < 2) throw validation_error("run_study: k must be >= 2");
    Table pre = synthdata::apply(config.recipe.pre, raw);
    FoldAssignment folds = kfold_split(pre, config.k, hash_combine(config.seed, 0x666f6c6473ull));

    StudyReport report;
    report.label = config.label;
    report.folds.resize(static_cast<size_t>(config.k));

    const int workers = std::max(1, std::min(config.workers, config.k));
    if (workers == 1) {
        for (int f = 0; f < config.k; ++f)
            report.folds[static_cast<size_t>(f)] = run_fold(pre, folds, f, config, progress);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (;;) {
                    const int f = next.fetch_add(1);
                    if (f >= config.k) break;
                    report.folds[static_cast<size_t>(f)] = run_fold(pre, folds, f, config, {});
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    double sum_real = 0.0, sum_syn = 0.0;
    int ok = 0;
    for (const auto& f : report.folds) {
        if (f.failed) {
            ++report.failed_folds;
            continue;
        }
        sum_real += f.rmse_real;
        sum_syn += f.rmse_syn;
        ++ok;
    }
    if (ok > 0) {
        report.mean_rmse_real = sum_real / ok;
        report.mean_rmse_syn = sum_syn / ok;
        report.relative_difference =
            report.mean_rmse_real != 0.0
                ? (report.mean_rmse_syn - report.mean_rmse_real) / report.mean_rmse_real
                : 0.0;
    }

    std::vector<std::string> rel_vars = config.relativity_variables;
    if (rel_vars.empty()) {
        // default: every categorical predictor of the first successful fold
        for (const auto& f : report.folds) {
            if (f.failed) continue;
            for (const auto& cp : f.model_real.info.categorical) rel_vars.push_back(cp.name);
            break;
        }
    }
    if (ok >= 2 && !rel_vars.empty()) report.relativities = relativity_report(report.folds, rel_vars);
    return report;
}

// ---------------------------------------------------------------------------
// Report output
// ---------------------------------------------------------------------------

std::string format_percent(double fraction) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f%%", fraction * 100.0);
    return buf;
}

std::string metrics_csv(const StudyReport& report) {
    std::string out = "dataset,mean_rmse_real,mean_rmse_syn,relative_difference\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%s\n", report.label.c_str(),
                  report.mean_rmse_real, report.mean_rmse_syn,
                  format_percent(report.relative_difference).c_str());
    out += buf;
    return out;
}

json StudyReport::to_json() const {
    json j;
    j["label"] = label;
    j["failed_folds"] = failed_folds;
    j["mean_rmse_real"] = mean_rmse_real;
    j["mean_rmse_syn"] = mean_rmse_syn;
    j["relative_difference"] = relative_difference;
    j["relative_difference_formatted"] = format_percent(relative_difference);
    json jf = json::array();
    for (const auto& f : folds) {
        json e;
        e["fold"] = f.fold;
        e["failed"] = f.failed;
        if (f.failed) {
            e["failure"] = f.failure;
        } else {
            e["rmse_real"] = f.rmse_real;
            e["rmse_syn"] = f.rmse_syn;
            e["analysis_rows"] = f.analysis_rows;
            e["trained_rows"] = f.trained_rows;
            e["syn_rows"] = f.syn_rows;
            e["assessment_rows"] = f.assessment_rows;
            e["unseen_levels_syn"] = f.unseen_levels_syn;
            json dist = json::array();
            for (const auto& c : f.distributions.columns) {
                json d;
                d["column"] = c.column;
                if (c.is_categorical)
                    d["tv_distance"] = c.categorical.tv_distance;
                else
                    d["ks_statistic"] = c.continuous.ks_statistic;
                dist.push_back(d);
            }
            e["distributions"] = dist;
        }
        jf.push_back(e);
    }
    j["folds"] = jf;
    json jr = json::array();
    for (const auto& st : relativities) {
        json e;
        e["variable"] = st.variable;
        json lv = json::array();
        for (size_t l = 0; l < st.levels.size(); ++l) {
            lv.push_back({{"level", st.levels[l]},
                          {"mean_real", st.mean_real[l]},
                          {"var_real", st.var_real[l]},
                          {"mean_syn", st.mean_syn[l]},
                          {"var_syn", st.var_syn[l]},
                          {"var_ratio", st.var_ratio[l]}});
        }
        e["levels"] = lv;
        jr.push_back(e);
    }
    j["relativities"] = jr;
    return j;
}

namespace {

std::string sanitize(const std::string& name) {
    std::string out;
    for (char c : name) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

void write_study_report(const StudyReport& report, const StudyConfig& config,
                        const std::string& directory) {
    fs::create_directories(directory);
    fs::create_directories(directory + "/distributions");
    fs::create_directories(directory + "/relativities");

    {
        json j = report.to_json();
        j["config"] = config.to_json();
        std::ofstream os(directory + "/report.json");
        os << j.dump(2) << "\n";
    }
    {
        std::ofstream os(directory + "/metrics.csv");
        os << metrics_csv(report);
    }

    // per-column distribution files: one row per (fold, level/decile)
    if (!report.folds.empty()) {
        std::vector<std::string> columns;
        for (const auto& f : report.folds) {
            if (f.failed) continue;
            for (const auto& c : f.distributions.columns) columns.push_back(c.column);
            break;
        }
        for (const auto& col : columns) {
            std::ofstream os(directory + "/distributions/" + sanitize(col) + ".csv");
            bool header = false;
            for (const auto& f : report.folds) {
                if (f.failed) continue;
                for (const auto& c : f.distributions.columns) {
                    if (c.column != col) continue;
                    if (c.is_categorical) {
                        if (!header) {
                            os << "fold,level,p_real,p_syn,tv_distance\n";
                            header = true;
                        }
                        for (size_t l = 0; l < c.categorical.levels.size(); ++l)
                            os << f.fold << "," << c.categorical.levels[l] << ","
                               << num(c.categorical.p_real[l]) << "," << num(c.categorical.p_syn[l])
                               << "," << num(c.categorical.tv_distance) << "\n";
                    } else {
                        if (!header) {
                            os << "fold,quantile,q_real,q_syn,ks_statistic\n";
                            header = true;
                        }
                        for (size_t q = 0; q < c.continuous.quantiles.size(); ++q)
                            os << f.fold << "," << num(c.continuous.quantiles[q]) << ","
                               << num(c.continuous.q_real[q]) << "," << num(c.continuous.q_syn[q])
                               << "," << num(c.continuous.ks_statistic) << "\n";
                    }
                }
            }
        }
    }

    for (const auto& st : report.relativities) {
        std::ofstream os(directory + "/relativities/" + sanitize(st.variable) + ".csv");
        os << "level,mean_real,var_real,mean_syn,var_syn,var_ratio\n";
        for (size_t l = 0; l < st.levels.size(); ++l)
            os << st.levels[l] << "," << num(st.mean_real[l]) << "," << num(st.var_real[l]) << ","
               << num(st.mean_syn[l]) << "," << num(st.var_syn[l]) << "," << num(st.var_ratio[l])
               << "\n";
    }

    for (const auto& f : report.folds) {
        if (f.failed) continue;
        const std::string stem = directory + "/fold_" + std::to_string(f.fold);
        {
            std::ofstream os(stem + "_model_real.json");
            os << f.model_real.to_json().dump(2) << "\n";
        }
        {
            std::ofstream os(stem + "_model_syn.json");
            os << f.model_syn.to_json().dump(2) << "\n";
        }
        if (f.synthesizer) save(*f.synthesizer, stem + ".synth", SaveMode::full);
    }
}

}  // namespace synthdata
