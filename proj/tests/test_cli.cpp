#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "synthdata/rng.hpp"
#include "synthdata/table.hpp"
#include "synthdata/transforms.hpp"

using namespace synthdata;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* env = std::getenv("SYNTHDATA_CLI");
    return env ? env : "../synthdata";
}

struct RunResult {
    int code;
    std::string out;
    std::string err;
};

RunResult run(const std::string& args) {
    const std::string out_file = "cli_stdout.tmp";
    const std::string err_file = "cli_stderr.tmp";
    const std::string cmd = cli_path() + " " + args + " >" + out_file + " 2>" + err_file;
    int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    auto slurp = [](const std::string& p) {
        std::ifstream in(p);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    std::remove(out_file.c_str());
    std::remove(err_file.c_str());
    return r;
}

std::string slurp_file(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// builds data + config files for a small end-to-end run
struct Fixture {
    std::string dir = "cli_fixture";

    Fixture() {
        fs::remove_all(dir);
        fs::create_directories(dir);

        // toy claims dataset
        Column y{"claims", ColumnKind::continuous, {}, false};
        Column g{"group", ColumnKind::categorical, {"g0", "g1", "g2"}, true};
        Column x{"score", ColumnKind::continuous, {}, false};
        Column e{"exposure", ColumnKind::continuous, {}, false};
        Table t{Schema({y, g, x, e})};
        t.set_rows(1200);
        RandomStream rng(2718);
        const double effect[3] = {0.0, 0.5, -0.4};
        for (size_t i = 0; i < 1200; ++i) {
            const double u = rng.uniform();
            const int32_t gi = u < 0.6 ? 0 : (u < 0.85 ? 1 : 2);
            const double xi = rng.normal(gi == 0 ? -1.0 : 2.0, 0.6);
            const double ei = rng.uniform(0.3, 1.0);
            t.numeric(0)[i] =
                static_cast<double>(rng.poisson(ei * std::exp(-0.3 + effect[gi] + 0.15 * xi)));
            t.categorical(1)[i] = gi;
            t.numeric(2)[i] = xi;
            t.numeric(3)[i] = ei;
        }
        write_csv(t, dir + "/data.csv");

        json schema = {{"columns",
                        {{{"name", "claims"}, {"kind", "continuous"}},
                         {{"name", "group"}, {"kind", "categorical"}, {"levels", {"g0", "g1", "g2"}}},
                         {{"name", "score"}, {"kind", "continuous"}},
                         {{"name", "exposure"}, {"kind", "continuous"}}}}};
        std::ofstream(dir + "/schema.json") << schema.dump(2);

        TransformPipeline p;
        std::vector<std::pair<double, std::string>> to_level = {
            {0, "0"}, {1, "1"}, {2, "2"}, {3, "3"}, {4, "4"}};
        std::vector<std::pair<std::string, double>> to_value;
        for (const auto& [v, l] : to_level) to_value.emplace_back(l, v);
        p.pre.push_back(TransformStep::ClampUpper("claims", 4.0));
        p.pre.push_back(TransformStep::ToCategorical("claims", to_level));
        p.post.push_back(TransformStep::ToNumeric("claims", to_value));
        p.post.push_back(TransformStep::ClampBoth("exposure", 1.0 / 365.0, 1.0));
        std::ofstream(dir + "/recipe.json") << pipeline_to_json(p).dump(2);

        json train = {{"epochs", 3},           {"batch_size", 100},
                      {"pac", 5},              {"noise_dim", 16},
                      {"generator_hidden", {32, 32}}, {"critic_hidden", {32, 32}},
                      {"seed", 7}};
        std::ofstream(dir + "/train.json") << train.dump(2);

        json study = {{"label", "toy"},
                      {"k", 3},
                      {"formula",
                       {{"response", "claims"}, {"offset", "exposure"}, {"predictors", {"group", "score"}}}},
                      {"train", train},
                      {"seed", 1234}};
        std::ofstream(dir + "/study.json") << study.dump(2);
    }
    ~Fixture() { fs::remove_all(dir); }

    std::string arg_io() const {
        return "--data " + dir + "/data.csv --schema " + dir + "/schema.json --recipe " + dir +
               "/recipe.json";
    }
};

}  // namespace

TEST_CASE("fit produces a model and manifest; double run is byte-identical") {
    Fixture fx;
    auto r1 = run("fit " + fx.arg_io() + " --train-config " + fx.dir + "/train.json --out " +
                  fx.dir + "/run1 --seed 5 --quiet");
    CAPTURE(r1.err);
    REQUIRE(r1.code == 0);
    CHECK(fs::exists(fx.dir + "/run1/model.synth"));
    CHECK(fs::exists(fx.dir + "/run1/model.synth.meta.json"));
    CHECK(fs::exists(fx.dir + "/run1/manifest.json"));

    // identical command re-run: byte-identical artifacts, manifest included
    const std::string model_bytes = slurp_file(fx.dir + "/run1/model.synth");
    const std::string meta_bytes = slurp_file(fx.dir + "/run1/model.synth.meta.json");
    const std::string manifest_bytes = slurp_file(fx.dir + "/run1/manifest.json");
    auto r1b = run("fit " + fx.arg_io() + " --train-config " + fx.dir + "/train.json --out " +
                   fx.dir + "/run1 --seed 5 --quiet");
    REQUIRE(r1b.code == 0);
    CHECK(slurp_file(fx.dir + "/run1/model.synth") == model_bytes);
    CHECK(slurp_file(fx.dir + "/run1/model.synth.meta.json") == meta_bytes);
    CHECK(slurp_file(fx.dir + "/run1/manifest.json") == manifest_bytes);

    // a different out dir still yields the identical model payload
    auto r2 = run("fit " + fx.arg_io() + " --train-config " + fx.dir + "/train.json --out " +
                  fx.dir + "/run2 --seed 5 --quiet");
    REQUIRE(r2.code == 0);
    CHECK(slurp_file(fx.dir + "/run2/model.synth") == model_bytes);

    SUBCASE("sample: same seed gives byte-identical CSVs satisfying the recipe ranges") {
        auto s1 = run("sample --synth " + fx.dir + "/run1/model.synth --n 500 --recipe " + fx.dir +
                      "/recipe.json --out " + fx.dir + "/sample1.csv --seed 11");
        REQUIRE(s1.code == 0);
        auto s2 = run("sample --synth " + fx.dir + "/run1/model.synth --n 500 --recipe " + fx.dir +
                      "/recipe.json --out " + fx.dir + "/sample2.csv --seed 11");
        REQUIRE(s2.code == 0);
        CHECK(slurp_file(fx.dir + "/sample1.csv") == slurp_file(fx.dir + "/sample2.csv"));
        CHECK(fs::exists(fx.dir + "/sample1.csv.manifest.json"));

        Schema out_schema({{"claims", ColumnKind::continuous, {}, false},
                           {"group", ColumnKind::categorical, {"g0", "g1", "g2"}, true},
                           {"score", ColumnKind::continuous, {}, false},
                           {"exposure", ColumnKind::continuous, {}, false}});
        auto parsed = read_csv(fx.dir + "/sample1.csv", out_schema);
        REQUIRE(parsed.table.rows() == 500);
        CHECK(parsed.rejected_rows == 0);
        for (size_t i = 0; i < 500; ++i) {
            CHECK(parsed.table.numeric("claims")[i] >= 0.0);
            CHECK(parsed.table.numeric("claims")[i] <= 4.0);
            CHECK(parsed.table.numeric("exposure")[i] >= 1.0 / 365.0);
            CHECK(parsed.table.numeric("exposure")[i] <= 1.0);
        }
    }

    SUBCASE("generator-only model refuses resume with exit code 1") {
        auto g = run("fit " + fx.arg_io() + " --train-config " + fx.dir + "/train.json --out " +
                     fx.dir + "/gen_only --generator-only --seed 5 --quiet");
        REQUIRE(g.code == 0);
        auto res = run("fit " + fx.arg_io() + " --train-config " + fx.dir + "/train.json --out " +
                       fx.dir + "/resumed --resume " + fx.dir + "/gen_only/model.synth --quiet");
        CHECK(res.code == 1);
        CHECK(res.err.find("critic absent") != std::string::npos);
        // full model resumes fine
        auto res2 = run("fit " + fx.arg_io() + " --train-config " + fx.dir + "/train.json --out " +
                        fx.dir + "/resumed2 --resume " + fx.dir + "/run1/model.synth --quiet");
        CHECK(res2.code == 0);
    }
}

TEST_CASE("evaluate writes a report directory and report summarizes it") {
    Fixture fx;
    auto r = run("evaluate " + fx.arg_io() + " --study-config " + fx.dir + "/study.json --out " +
                 fx.dir + "/study_out --quiet");
    CAPTURE(r.err);
    REQUIRE(r.code == 0);
    CHECK(fs::exists(fx.dir + "/study_out/report.json"));
    CHECK(fs::exists(fx.dir + "/study_out/metrics.csv"));
    CHECK(fs::exists(fx.dir + "/study_out/manifest.json"));
    // metrics.csv: header + one row
    std::istringstream metrics(slurp_file(fx.dir + "/study_out/metrics.csv"));
    std::string line;
    int lines = 0;
    while (std::getline(metrics, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 2);
    CHECK(r.out.find("toy,") != std::string::npos);

    SUBCASE("report renders the metrics") {
        auto rep = run("report --study " + fx.dir + "/study_out");
        REQUIRE(rep.code == 0);
        CHECK(rep.out.find("study: toy") != std::string::npos);
        CHECK(rep.out.find("relative difference") != std::string::npos);
        CHECK(rep.out.find("top distribution divergences") != std::string::npos);
    }
    SUBCASE("--folds override changes the fold count") {
        auto r2 = run("evaluate " + fx.arg_io() + " --study-config " + fx.dir +
                      "/study.json --out " + fx.dir + "/study_k2 --folds 2 --quiet");
        REQUIRE(r2.code == 0);
        json j;
        std::ifstream(fx.dir + "/study_k2/report.json") >> j;
        CHECK(j.at("folds").size() == 2);
    }
}

TEST_CASE("error contract") {
    Fixture fx;
    SUBCASE("missing schema column: exit 2 with the column named on stderr") {
        json schema = {{"columns", {{{"name", "not_there"}, {"kind", "continuous"}}}}};
        std::ofstream(fx.dir + "/bad_schema.json") << schema.dump();
        auto r = run("fit --data " + fx.dir + "/data.csv --schema " + fx.dir +
                     "/bad_schema.json --recipe " + fx.dir + "/recipe.json --out " + fx.dir +
                     "/bad --quiet");
        CHECK(r.code == 2);
        json err = json::parse(r.err.substr(r.err.find('{')));
        CHECK(err.at("code") == 2);
        CHECK(err.at("error").get<std::string>().find("not_there") != std::string::npos);
    }
    SUBCASE("report on a directory without report.json: exit 2") {
        fs::create_directories(fx.dir + "/empty");
        auto r = run("report --study " + fx.dir + "/empty");
        CHECK(r.code == 2);
    }
    SUBCASE("unknown flag: exit 2") {
        auto r = run("fit --nope");
        CHECK(r.code == 2);
    }
    SUBCASE("version-mismatched synth file: nonzero exit") {
        std::ofstream(fx.dir + "/bad.synth", std::ios::binary) << "JUNKJUNKJUNKJUNK";
        auto r = run("sample --synth " + fx.dir + "/bad.synth --n 5 --recipe " + fx.dir +
                     "/recipe.json --out " + fx.dir + "/x.csv");
        CHECK(r.code == 1);
    }
}
