#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "synthdata/rng.hpp"
#include "synthdata/transforms.hpp"

using namespace synthdata;

namespace {

Table numeric_table(const std::vector<std::pair<std::string, std::vector<double>>>& cols) {
    std::vector<Column> cs;
    for (const auto& [name, _] : cols) cs.push_back({name, ColumnKind::continuous, {}, false});
    Table t{Schema(cs)};
    t.set_rows(cols.front().second.size());
    for (size_t j = 0; j < cols.size(); ++j) t.numeric(j) = cols[j].second;
    return t;
}

}  // namespace

TEST_CASE("clamp steps") {
    Table t = numeric_table({{"v", {7.0, 4.0, -1.0, 2.5}}});
    SUBCASE("upper bound by four") {
        Table r = synthdata::apply({TransformStep::ClampUpper("v", 4.0)}, t);
        CHECK(r.numeric(0) == std::vector<double>{4.0, 4.0, -1.0, 2.5});
    }
    SUBCASE("lower") {
        Table r = synthdata::apply({TransformStep::ClampLower("v", 0.0)}, t);
        CHECK(r.numeric(0)[2] == 0.0);
    }
    SUBCASE("both") {
        Table r = synthdata::apply({TransformStep::ClampBoth("v", 0.0, 1.0)}, t);
        CHECK(r.numeric(0) == std::vector<double>{1.0, 1.0, 0.0, 1.0});
    }
    SUBCASE("clamping twice is idempotent") {
        auto steps = {TransformStep::ClampUpper("v", 4.0)};
        Table once = synthdata::apply(steps, t);
        Table twice = synthdata::apply(steps, once);
        CHECK(once.numeric(0) == twice.numeric(0));
    }
    SUBCASE("ClampBoth requires lo < hi") {
        CHECK_THROWS_AS(TransformStep::ClampBoth("v", 1.0, 1.0), validation_error);
    }
}

TEST_CASE("log transform") {
    Table t = numeric_table({{"d", {1.0, std::exp(2.0)}}});
    Table r = synthdata::apply({TransformStep::LogTransform("d")}, t);
    CHECK(r.numeric(0)[0] == doctest::Approx(0.0));
    CHECK(r.numeric(0)[1] == doctest::Approx(2.0));

    Table bad = numeric_table({{"d", {1.0, 0.0}}});
    CHECK_THROWS_WITH_AS(synthdata::apply({TransformStep::LogTransform("d")}, bad).rows(),
                         doctest::Contains("row 1"), runtime_failure);
}

TEST_CASE("rate and count round trips") {
    SUBCASE("rate from counts: 3 lapses over 12 exposures") {
        Table t = numeric_table({{"lapses", {3.0}}, {"exposure", {12.0}}});
        Table r = synthdata::apply({TransformStep::RateFromCounts("lapses", "exposure", "rate")}, t);
        CHECK_FALSE(r.schema().has("lapses"));
        CHECK(r.numeric("rate")[0] == doctest::Approx(0.25));
    }
    SUBCASE("zero exposure is a row-level error") {
        Table t = numeric_table({{"lapses", {1.0}}, {"exposure", {0.0}}});
        CHECK_THROWS_AS(synthdata::apply({TransformStep::RateFromCounts("lapses", "exposure", "rate")}, t).rows(),
                        runtime_failure);
    }
    SUBCASE("counts from rate rounds to nearest") {
        Table t = numeric_table({{"rate", {0.24999, 0.0, 1.0}}, {"exposure", {8.0, 17.0, 40.0}}});
        Table r = synthdata::apply({TransformStep::CountsFromRate("rate", "exposure", "count")}, t);
        CHECK(r.numeric("count") == std::vector<double>{2.0, 0.0, 40.0});
    }
    SUBCASE("round trip reproduces integer counts when 0 <= count <= exposure") {
        RandomStream rng(11);
        std::vector<double> counts, expo;
        for (int i = 0; i < 500; ++i) {
            double e = 1.0 + static_cast<double>(rng.below(50));
            double c = static_cast<double>(rng.below(static_cast<uint64_t>(e) + 1));
            expo.push_back(e);
            counts.push_back(c);
        }
        Table t = numeric_table({{"count", counts}, {"exposure", expo}});
        Table r = synthdata::apply({TransformStep::RateFromCounts("count", "exposure", "rate"),
                         TransformStep::CountsFromRate("rate", "exposure", "count")},
                        t);
        CHECK(r.numeric("count") == counts);
    }
}

TEST_CASE("to_categorical and to_numeric invert each other") {
    std::vector<std::pair<double, std::string>> to_level = {{0, "0"}, {1, "1"}, {2, "2"}};
    std::vector<std::pair<std::string, double>> to_value = {{"0", 0}, {"1", 1}, {"2", 2}};
    Table t = numeric_table({{"n", {2.0, 0.0, 1.0, 2.0}}});
    Table cat = synthdata::apply({TransformStep::ToCategorical("n", to_level)}, t);
    CHECK(cat.schema().at(0).kind == ColumnKind::categorical);
    Table back = synthdata::apply({TransformStep::ToNumeric("n", to_value)}, cat);
    CHECK(back.numeric(0) == t.numeric(0));

    SUBCASE("unmapped value errors with the value named") {
        Table bad = numeric_table({{"n", {5.0}}});
        CHECK_THROWS_WITH_AS(synthdata::apply({TransformStep::ToCategorical("n", to_level)}, bad).rows(),
                             doctest::Contains("5"), runtime_failure);
    }
}

TEST_CASE("bin_numeric") {
    Table t = numeric_table({{"age", {0.5, 1.0, 5.0, 30.0}}});
    SUBCASE("open-ended bins") {
        Table r = synthdata::apply({TransformStep::BinNumeric("age", {1.0, 10.0}, {"young", "mid", "old"})}, t);
        const auto& col = r.categorical(0);
        CHECK(r.schema().at(0).levels == std::vector<std::string>{"young", "mid", "old"});
        CHECK(col == std::vector<int32_t>{0, 1, 1, 2});
    }
    SUBCASE("bounded bins reject out-of-range values") {
        Table bad = numeric_table({{"age", {50.0}}});
        CHECK_THROWS_WITH_AS(
            synthdata::apply({TransformStep::BinNumeric("age", {0.0, 10.0, 20.0}, {"a", "b"})}, bad).rows(),
            doctest::Contains("50"), runtime_failure);
    }
    SUBCASE("cut points must ascend") {
        CHECK_THROWS_AS(TransformStep::BinNumeric("age", {2.0, 1.0}, {"a", "b", "c"}),
                        validation_error);
    }
}

TEST_CASE("bin_categorical groups levels") {
    Column c{"r", ColumnKind::categorical, {"p1", "p2", "s1"}, true};
    Table t{Schema({c})};
    t.set_rows(3);
    t.categorical(0) = {0, 1, 2};
    Table r = synthdata::apply({TransformStep::BinCategorical("r", {{"p1", "pref"}, {"p2", "pref"}})}, t);
    CHECK(r.schema().at(0).levels == std::vector<std::string>{"pref", "s1"});
    CHECK(r.categorical(0) == std::vector<int32_t>{0, 0, 1});
}

TEST_CASE("tpl recipe") {
    TransformPipeline p = tpl_recipe();

    SUBCASE("pre: claim clamp + retype, density log, exposure cap") {
        Table t = numeric_table({{"ClaimNb", {7.0, 4.0, 0.0}},
                                 {"VehPower", {4.0, 6.0, 12.0}},
                                 {"VehAge", {0.0, 3.0, 15.0}},
                                 {"BonusMalus", {50.0, 95.0, 190.0}},
                                 {"Density", {1.0, 100.0, 27000.0}},
                                 {"Exposure", {1.5, 0.4, 1.0}}});
        Table r = synthdata::apply(p.pre, t);
        CHECK(r.schema().at(0).kind == ColumnKind::categorical);
        CHECK(r.schema().at(0).levels[r.categorical("ClaimNb")[0]] == "4");  // clamped 7 -> "4"
        CHECK(r.schema().at(0).levels[r.categorical("ClaimNb")[1]] == "4");  // fixed point
        CHECK(r.numeric("Density")[0] == doctest::Approx(0.0));
        CHECK(r.numeric("Exposure")[0] == doctest::Approx(1.0));
    }
    SUBCASE("post: claim back to integer, exposure floored at one day") {
        Column claims{"ClaimNb", ColumnKind::categorical, {"0", "1", "2", "3", "4"}, true};
        Column expo{"Exposure", ColumnKind::continuous, {}, false};
        Table t{Schema({claims, expo})};
        t.set_rows(2);
        t.categorical(0) = {3, 4};
        t.numeric(1) = {0.0001, 1.4};
        Table r = synthdata::apply(p.post, t);
        CHECK(r.numeric("ClaimNb")[0] == doctest::Approx(3.0));
        CHECK(r.numeric("ClaimNb")[1] == doctest::Approx(4.0));
        CHECK(r.numeric("Exposure")[0] == doctest::Approx(1.0 / 365.0));
        CHECK(r.numeric("Exposure")[1] == doctest::Approx(1.0));
    }
    SUBCASE("post invariants on noisy synthetic-like data") {
        RandomStream rng(3);
        Column claims{"ClaimNb", ColumnKind::categorical, {"0", "1", "2", "3", "4"}, true};
        Column expo{"Exposure", ColumnKind::continuous, {}, false};
        Table t{Schema({claims, expo})};
        t.set_rows(1000);
        for (size_t i = 0; i < 1000; ++i) {
            t.categorical(0)[i] = static_cast<int32_t>(rng.below(5));
            t.numeric(1)[i] = rng.uniform(-0.5, 1.8);
        }
        Table r = synthdata::apply(p.post, t);
        for (size_t i = 0; i < 1000; ++i) {
            CHECK(r.numeric("Exposure")[i] >= 1.0 / 365.0);
            CHECK(r.numeric("Exposure")[i] <= 1.0);
            CHECK(r.numeric("ClaimNb")[i] >= 0.0);
            CHECK(r.numeric("ClaimNb")[i] <= 4.0);
        }
    }
}

TEST_CASE("lapse recipe") {
    TransformPipeline p = lapse_recipe();

    SUBCASE("issue-age map is invertible on its range") {
        // ToNumeric then a matching ToCategorical restores the levels
        std::vector<std::pair<double, std::string>> inverse;
        for (const auto& s : p.pre) {
            if (s.kind == StepKind::to_numeric && s.column == "IssueAge")
                for (const auto& [lvl, v] : s.level_to_value) inverse.emplace_back(v, lvl);
        }
        REQUIRE(!inverse.empty());
        Column age{"IssueAge", ColumnKind::categorical, {}, false};
        std::vector<std::string> levels;
        for (const auto& [v, l] : inverse) levels.push_back(l);
        Column age2{"IssueAge", ColumnKind::categorical, levels, true};
        Table t{Schema({age2})};
        t.set_rows(levels.size());
        for (size_t i = 0; i < levels.size(); ++i) t.categorical(0)[i] = static_cast<int32_t>(i);
        Table num = synthdata::apply({*std::find_if(p.pre.begin(), p.pre.end(),
                                         [](const TransformStep& s) {
                                             return s.kind == StepKind::to_numeric &&
                                                    s.column == "IssueAge";
                                         })},
                          t);
        Table back = synthdata::apply({TransformStep::ToCategorical("IssueAge", inverse)}, num);
        for (size_t i = 0; i < levels.size(); ++i)
            CHECK(back.schema().at(0).levels[back.categorical(0)[i]] == levels[i]);
    }
    SUBCASE("post bounds then multiply-and-round") {
        Column rate{"LapseRate", ColumnKind::continuous, {}, false};
        Column expo{"Exposure", ColumnKind::continuous, {}, false};
        Table t{Schema({rate, expo})};
        t.set_rows(3);
        t.numeric(0) = {1.3, 0.0, 0.24999};
        t.numeric(1) = {40.0, 17.0, 8.0};
        Table r = synthdata::apply(p.post, t);
        CHECK(r.numeric("LapseCount") == std::vector<double>{40.0, 0.0, 2.0});
    }
    SUBCASE("post invariants: 0 <= count <= exposure, exposure >= 1") {
        RandomStream rng(9);
        Column rate{"LapseRate", ColumnKind::continuous, {}, false};
        Column expo{"Exposure", ColumnKind::continuous, {}, false};
        Table t{Schema({rate, expo})};
        t.set_rows(2000);
        for (size_t i = 0; i < 2000; ++i) {
            t.numeric(0)[i] = rng.uniform(-0.4, 1.6);
            t.numeric(1)[i] = rng.uniform(-2.0, 300.0);
        }
        Table r = synthdata::apply(p.post, t);
        for (size_t i = 0; i < 2000; ++i) {
            const double e = r.numeric("Exposure")[i];
            const double c = r.numeric("LapseCount")[i];
            CHECK(e >= 1.0);
            CHECK(c >= 0.0);
            CHECK(c <= e);
        }
    }
}

TEST_CASE("shipped recipe files match the built-in pipelines") {
    const char* recipes_env = std::getenv("SYNTHDATA_RECIPES");
    std::string dir = recipes_env ? recipes_env : "../recipes";
    for (auto [file, pipeline] :
         {std::pair{std::string("tpl.recipe.json"), tpl_recipe()},
          std::pair{std::string("lapse.recipe.json"), lapse_recipe()}}) {
        std::ifstream in(dir + "/" + file);
        if (!in) {
            in.open("recipes/" + file);
        }
        REQUIRE_MESSAGE(in.good(), "recipe file not found: ", file);
        nlohmann::json j;
        in >> j;
        TransformPipeline loaded = pipeline_from_json(j);
        CHECK(pipeline_to_json(loaded) == pipeline_to_json(pipeline));
    }
}

TEST_CASE("recipe json round trip") {
    TransformPipeline p = lapse_recipe();
    TransformPipeline q = pipeline_from_json(pipeline_to_json(p));
    CHECK(pipeline_to_json(q) == pipeline_to_json(p));
}
