#include "synthdata/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace synthdata {

using nlohmann::json;

namespace {

double round_half_away(double v) {
    return v < 0.0 ? std::ceil(v - 0.5) : std::floor(v + 0.5);
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

}  // namespace

TransformStep TransformStep::ClampUpper(std::string column, double bound) {
    TransformStep s;
    s.kind = StepKind::clamp_upper;
    s.column = std::move(column);
    s.hi = bound;
    return s;
}

TransformStep TransformStep::ClampLower(std::string column, double bound) {
    TransformStep s;
    s.kind = StepKind::clamp_lower;
    s.column = std::move(column);
    s.lo = bound;
    return s;
}

TransformStep TransformStep::ClampBoth(std::string column, double lo, double hi) {
    if (!(lo < hi)) throw validation_error("ClampBoth: requires lo < hi");
    TransformStep s;
    s.kind = StepKind::clamp_both;
    s.column = std::move(column);
    s.lo = lo;
    s.hi = hi;
    return s;
}

TransformStep TransformStep::LogTransform(std::string column) {
    TransformStep s;
    s.kind = StepKind::log_transform;
    s.column = std::move(column);
    return s;
}

TransformStep TransformStep::BinNumeric(std::string column, std::vector<double> cuts,
                                        std::vector<std::string> labels) {
    for (size_t i = 1; i < cuts.size(); ++i)
        if (!(cuts[i - 1] < cuts[i])) throw validation_error("BinNumeric: cut points must be strictly ascending");
    if (labels.size() != cuts.size() + 1 && !(cuts.size() >= 2 && labels.size() == cuts.size() - 1))
        throw validation_error("BinNumeric: need |cuts|+1 labels (open ends) or |cuts|-1 (bounded)");
    std::vector<std::string> seen;
    for (const auto& l : labels) {
        if (std::find(seen.begin(), seen.end(), l) != seen.end())
            throw validation_error("BinNumeric: duplicate bin label '" + l + "'");
        seen.push_back(l);
    }
    TransformStep s;
    s.kind = StepKind::bin_numeric;
    s.column = std::move(column);
    s.cut_points = std::move(cuts);
    s.bin_labels = std::move(labels);
    return s;
}

TransformStep TransformStep::BinCategorical(std::string column,
                                            std::vector<std::pair<std::string, std::string>> level_map) {
    TransformStep s;
    s.kind = StepKind::bin_categorical;
    s.column = std::move(column);
    s.level_map = std::move(level_map);
    return s;
}

TransformStep TransformStep::ToCategorical(std::string column,
                                           std::vector<std::pair<double, std::string>> value_to_level) {
    TransformStep s;
    s.kind = StepKind::to_categorical;
    s.column = std::move(column);
    s.value_to_level = std::move(value_to_level);
    return s;
}

TransformStep TransformStep::ToNumeric(std::string column,
                                       std::vector<std::pair<std::string, double>> level_to_value) {
    TransformStep s;
    s.kind = StepKind::to_numeric;
    s.column = std::move(column);
    s.level_to_value = std::move(level_to_value);
    return s;
}

TransformStep TransformStep::RateFromCounts(std::string count_column, std::string exposure_column,
                                            std::string rate_column) {
    TransformStep s;
    s.kind = StepKind::rate_from_counts;
    s.column = std::move(count_column);
    s.exposure_column = std::move(exposure_column);
    s.output_column = std::move(rate_column);
    return s;
}

TransformStep TransformStep::CountsFromRate(std::string rate_column, std::string exposure_column,
                                            std::string count_column) {
    TransformStep s;
    s.kind = StepKind::counts_from_rate;
    s.column = std::move(rate_column);
    s.exposure_column = std::move(exposure_column);
    s.output_column = std::move(count_column);
    return s;
}

namespace {

void apply_step(const TransformStep& s, Table& t) {
    switch (s.kind) {
        case StepKind::clamp_upper: {
            for (double& v : t.numeric(s.column)) v = std::min(v, s.hi);
            break;
        }
        case StepKind::clamp_lower: {
            for (double& v : t.numeric(s.column)) v = std::max(v, s.lo);
            break;
        }
        case StepKind::clamp_both: {
            for (double& v : t.numeric(s.column)) v = std::clamp(v, s.lo, s.hi);
            break;
        }
        case StepKind::log_transform: {
            auto& col = t.numeric(s.column);
            for (size_t i = 0; i < col.size(); ++i) {
                if (!(col[i] > 0.0))
                    throw runtime_failure("log_transform: nonpositive value " + fmt(col[i]) +
                                          " in column '" + s.column + "' at row " + std::to_string(i));
                col[i] = std::log(col[i]);
            }
            break;
        }
        case StepKind::bin_numeric: {
            size_t ci = t.schema().index_of(s.column);
            const auto& vals = t.numeric(ci);
            const bool open_ends = s.bin_labels.size() == s.cut_points.size() + 1;
            std::vector<int32_t> out(vals.size());
            for (size_t i = 0; i < vals.size(); ++i) {
                double v = vals[i];
                // bin b covers [cut[b-1], cut[b]) with open outer bins when open_ends
                size_t b = static_cast<size_t>(
                    std::upper_bound(s.cut_points.begin(), s.cut_points.end(), v) - s.cut_points.begin());
                if (open_ends) {
                    out[i] = static_cast<int32_t>(b);
                } else {
                    if (b == 0 || b > s.bin_labels.size())
                        throw runtime_failure("bin_numeric: value " + fmt(v) + " in column '" + s.column +
                                              "' falls outside all bins");
                    out[i] = static_cast<int32_t>(b - 1);
                }
            }
            t.retype_to_categorical(ci, s.bin_labels, std::move(out));
            break;
        }
        case StepKind::bin_categorical: {
            size_t ci = t.schema().index_of(s.column);
            const Column& c = t.schema().at(ci);
            if (c.kind != ColumnKind::categorical)
                throw validation_error("bin_categorical: column '" + s.column + "' is not categorical");
            // new level list: groups in map order, then unmapped levels pass through
            std::vector<std::string> new_levels;
            auto find_new = [&](const std::string& name) -> int {
                for (size_t i = 0; i < new_levels.size(); ++i)
                    if (new_levels[i] == name) return static_cast<int>(i);
                return -1;
            };
            std::vector<int32_t> old_to_new(c.levels.size(), -1);
            for (size_t l = 0; l < c.levels.size(); ++l) {
                std::string target = c.levels[l];
                for (const auto& [from, to] : s.level_map)
                    if (from == c.levels[l]) { target = to; break; }
                int idx = find_new(target);
                if (idx < 0) {
                    idx = static_cast<int>(new_levels.size());
                    new_levels.push_back(target);
                }
                old_to_new[l] = idx;
            }
            std::vector<int32_t> vals = t.categorical(ci);
            for (auto& v : vals) v = old_to_new[static_cast<size_t>(v)];
            t.retype_to_categorical(ci, std::move(new_levels), std::move(vals));
            break;
        }
        case StepKind::to_categorical: {
            size_t ci = t.schema().index_of(s.column);
            const auto& vals = t.numeric(ci);
            std::vector<std::string> levels;
            for (const auto& [v, lvl] : s.value_to_level) {
                (void)v;
                levels.push_back(lvl);
            }
            std::vector<int32_t> out(vals.size());
            for (size_t i = 0; i < vals.size(); ++i) {
                int match = -1;
                for (size_t m = 0; m < s.value_to_level.size(); ++m) {
                    if (std::abs(vals[i] - s.value_to_level[m].first) <= 1e-9) {
                        match = static_cast<int>(m);
                        break;
                    }
                }
                if (match < 0)
                    throw runtime_failure("to_categorical: value " + fmt(vals[i]) + " in column '" +
                                          s.column + "' has no mapped level (row " + std::to_string(i) + ")");
                out[i] = match;
            }
            t.retype_to_categorical(ci, std::move(levels), std::move(out));
            break;
        }
        case StepKind::to_numeric: {
            size_t ci = t.schema().index_of(s.column);
            const Column& c = t.schema().at(ci);
            if (c.kind != ColumnKind::categorical)
                throw validation_error("to_numeric: column '" + s.column + "' is not categorical");
            std::vector<double> mapped(c.levels.size());
            std::vector<bool> have(c.levels.size(), false);
            for (size_t l = 0; l < c.levels.size(); ++l) {
                for (const auto& [lvl, v] : s.level_to_value) {
                    if (lvl == c.levels[l]) {
                        mapped[l] = v;
                        have[l] = true;
                        break;
                    }
                }
            }
            const auto& vals = t.categorical(ci);
            std::vector<double> out(vals.size());
            for (size_t i = 0; i < vals.size(); ++i) {
                size_t l = static_cast<size_t>(vals[i]);
                if (!have[l])
                    throw runtime_failure("to_numeric: level '" + c.levels[l] + "' of column '" +
                                          s.column + "' has no mapped value");
                out[i] = mapped[l];
            }
            t.retype_to_numeric(ci, std::move(out));
            break;
        }
        case StepKind::rate_from_counts: {
            const auto counts = t.numeric(s.column);
            const auto& expo = t.numeric(s.exposure_column);
            std::vector<double> rate(counts.size());
            for (size_t i = 0; i < counts.size(); ++i) {
                if (expo[i] == 0.0)
                    throw runtime_failure("rate_from_counts: zero exposure at row " + std::to_string(i));
                rate[i] = counts[i] / expo[i];
            }
            size_t ci = t.schema().index_of(s.column);
            t.drop_column(ci);
            Column rc;
            rc.name = s.output_column;
            t.append_numeric_column(rc, std::move(rate));
            break;
        }
        case StepKind::counts_from_rate: {
            const auto rate = t.numeric(s.column);
            const auto& expo = t.numeric(s.exposure_column);
            std::vector<double> counts(rate.size());
            for (size_t i = 0; i < rate.size(); ++i) {
                double c = round_half_away(rate[i] * expo[i]);
                counts[i] = std::clamp(c, 0.0, std::floor(expo[i]));
            }
            size_t ci = t.schema().index_of(s.column);
            t.drop_column(ci);
            Column cc;
            cc.name = s.output_column;
            t.append_numeric_column(cc, std::move(counts));
            break;
        }
    }
}

}  // namespace

Table apply(const std::vector<TransformStep>& steps, const Table& table) {
    Table out = table;
    for (const auto& s : steps) apply_step(s, out);
    return out;
}

// ---------------------------------------------------------------------------
// Shipped recipes
// ---------------------------------------------------------------------------

TransformPipeline tpl_recipe() {
    TransformPipeline p;
    std::vector<std::pair<double, std::string>> claim_levels = {
        {0, "0"}, {1, "1"}, {2, "2"}, {3, "3"}, {4, "4"}};
    std::vector<std::pair<std::string, double>> claim_back;
    for (const auto& [v, l] : claim_levels) claim_back.emplace_back(l, v);

    p.pre.push_back(TransformStep::ClampUpper("ClaimNb", 4.0));
    p.pre.push_back(TransformStep::ToCategorical("ClaimNb", claim_levels));
    p.pre.push_back(TransformStep::BinNumeric("VehPower", {4.5, 5.5, 6.5, 7.5, 8.5},
                                              {"4", "5", "6", "7", "8", "9+"}));
    p.pre.push_back(TransformStep::BinNumeric("VehAge", {1.0, 10.0}, {"[0,1)", "[1,10)", "10+"}));
    p.pre.push_back(TransformStep::BinNumeric("BonusMalus", {70.0, 90.0, 110.0, 130.0},
                                              {"[50,70)", "[70,90)", "[90,110)", "[110,130)", "130+"}));
    p.pre.push_back(TransformStep::LogTransform("Density"));
    p.pre.push_back(TransformStep::ClampUpper("Exposure", 1.0));

    p.post.push_back(TransformStep::ToNumeric("ClaimNb", claim_back));
    p.post.push_back(TransformStep::ClampBoth("Exposure", 1.0 / 365.0, 1.0));
    return p;
}

TransformPipeline lapse_recipe() {
    TransformPipeline p;
    p.pre.push_back(TransformStep::RateFromCounts("LapseCount", "Exposure", "LapseRate"));
    p.pre.push_back(TransformStep::BinCategorical(
        "RiskClass", {{"Super-Pref NS", "Preferred NS"},
                      {"Pref NS", "Preferred NS"},
                      {"Super-Std NS", "Standard NS"},
                      {"Std NS", "Standard NS"},
                      {"Pref SM", "Smoker"},
                      {"Std SM", "Smoker"}}));
    p.pre.push_back(TransformStep::ToNumeric(
        "IssueAge", {{"0-19", 10.0}, {"20-29", 25.0}, {"30-39", 35.0}, {"40-49", 45.0},
                     {"50-59", 55.0}, {"60-69", 65.0}, {"70+", 75.0}}));
    p.pre.push_back(TransformStep::ToNumeric(
        "PremiumJumpRatio", {{"1.01-2.00", 1.5}, {"2.01-3.00", 2.5}, {"3.01-4.00", 3.5},
                             {"4.01-5.00", 4.5}, {"5.01-6.00", 5.5}, {"6.01-7.00", 6.5},
                             {"7.01-8.00", 7.5}, {"8.01+", 9.0}}));

    p.post.push_back(TransformStep::ClampLower("Exposure", 1.0));
    p.post.push_back(TransformStep::ClampBoth("LapseRate", 0.0, 1.0));
    p.post.push_back(TransformStep::CountsFromRate("LapseRate", "Exposure", "LapseCount"));
    return p;
}

// ---------------------------------------------------------------------------
// JSON recipe format
// ---------------------------------------------------------------------------

namespace {

const char* kind_name(StepKind k) {
    switch (k) {
        case StepKind::clamp_upper: return "clamp_upper";
        case StepKind::clamp_lower: return "clamp_lower";
        case StepKind::clamp_both: return "clamp_both";
        case StepKind::log_transform: return "log";
        case StepKind::bin_numeric: return "bin_numeric";
        case StepKind::bin_categorical: return "bin_categorical";
        case StepKind::to_categorical: return "to_categorical";
        case StepKind::to_numeric: return "to_numeric";
        case StepKind::rate_from_counts: return "rate_from_counts";
        case StepKind::counts_from_rate: return "counts_from_rate";
    }
    return "?";
}

json step_to_json(const TransformStep& s) {
    json j;
    j["op"] = kind_name(s.kind);
    j["column"] = s.column;
    switch (s.kind) {
        case StepKind::clamp_upper: j["bound"] = s.hi; break;
        case StepKind::clamp_lower: j["bound"] = s.lo; break;
        case StepKind::clamp_both:
            j["lo"] = s.lo;
            j["hi"] = s.hi;
            break;
        case StepKind::log_transform: break;
        case StepKind::bin_numeric:
            j["cuts"] = s.cut_points;
            j["labels"] = s.bin_labels;
            break;
        case StepKind::bin_categorical: {
            json m = json::array();
            for (const auto& [from, to] : s.level_map) m.push_back({{"from", from}, {"to", to}});
            j["map"] = m;
            break;
        }
        case StepKind::to_categorical: {
            json m = json::array();
            for (const auto& [v, lvl] : s.value_to_level) m.push_back({{"value", v}, {"level", lvl}});
            j["map"] = m;
            break;
        }
        case StepKind::to_numeric: {
            json m = json::array();
            for (const auto& [lvl, v] : s.level_to_value) m.push_back({{"level", lvl}, {"value", v}});
            j["map"] = m;
            break;
        }
        case StepKind::rate_from_counts:
        case StepKind::counts_from_rate:
            j["exposure"] = s.exposure_column;
            j["output"] = s.output_column;
            break;
    }
    return j;
}

TransformStep step_from_json(const json& j) {
    const std::string op = j.at("op").get<std::string>();
    const std::string column = j.at("column").get<std::string>();
    if (op == "clamp_upper") return TransformStep::ClampUpper(column, j.at("bound").get<double>());
    if (op == "clamp_lower") return TransformStep::ClampLower(column, j.at("bound").get<double>());
    if (op == "clamp_both")
        return TransformStep::ClampBoth(column, j.at("lo").get<double>(), j.at("hi").get<double>());
    if (op == "log") return TransformStep::LogTransform(column);
    if (op == "bin_numeric")
        return TransformStep::BinNumeric(column, j.at("cuts").get<std::vector<double>>(),
                                         j.at("labels").get<std::vector<std::string>>());
    if (op == "bin_categorical") {
        std::vector<std::pair<std::string, std::string>> m;
        for (const auto& e : j.at("map"))
            m.emplace_back(e.at("from").get<std::string>(), e.at("to").get<std::string>());
        return TransformStep::BinCategorical(column, std::move(m));
    }
    if (op == "to_categorical") {
        std::vector<std::pair<double, std::string>> m;
        for (const auto& e : j.at("map"))
            m.emplace_back(e.at("value").get<double>(), e.at("level").get<std::string>());
        return TransformStep::ToCategorical(column, std::move(m));
    }
    if (op == "to_numeric") {
        std::vector<std::pair<std::string, double>> m;
        for (const auto& e : j.at("map"))
            m.emplace_back(e.at("level").get<std::string>(), e.at("value").get<double>());
        return TransformStep::ToNumeric(column, std::move(m));
    }
    if (op == "rate_from_counts")
        return TransformStep::RateFromCounts(column, j.at("exposure").get<std::string>(),
                                             j.at("output").get<std::string>());
    if (op == "counts_from_rate")
        return TransformStep::CountsFromRate(column, j.at("exposure").get<std::string>(),
                                             j.at("output").get<std::string>());
    throw validation_error("recipe: unknown step op '" + op + "'");
}

}  // namespace

json pipeline_to_json(const TransformPipeline& p) {
    json j;
    j["pre"] = json::array();
    j["post"] = json::array();
    for (const auto& s : p.pre) j["pre"].push_back(step_to_json(s));
    for (const auto& s : p.post) j["post"].push_back(step_to_json(s));
    return j;
}

TransformPipeline pipeline_from_json(const json& j) {
    TransformPipeline p;
    for (const auto& s : j.at("pre")) p.pre.push_back(step_from_json(s));
    for (const auto& s : j.at("post")) p.post.push_back(step_from_json(s));
    return p;
}

TransformPipeline load_recipe(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("recipe: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw validation_error("recipe: invalid JSON in '" + path + "': " + e.what());
    }
    return pipeline_from_json(j);
}

}  // namespace synthdata
