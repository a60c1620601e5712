// Command-line entry point: fit / sample / evaluate / report.
//
// Every command is a pure function of (inputs, config, seed, workers) to
// output bytes: manifests carry no timestamps unless --record-timings is
// passed. Errors print a single machine-readable JSON line on stderr;
// exit codes: 0 success, 1 runtime failure, 2 usage/validation error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "synthdata/gan.hpp"
#include "synthdata/study.hpp"
#include "synthdata/table.hpp"
#include "synthdata/transforms.hpp"
#include "synthdata/version.hpp"

using namespace synthdata;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Schema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("schema: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw validation_error("schema: invalid JSON in '" + path + "': " + e.what());
    }
    std::vector<Column> cols;
    for (const auto& jc : j.at("columns")) {
        Column c;
        c.name = jc.at("name").get<std::string>();
        const std::string kind = jc.at("kind").get<std::string>();
        if (kind == "continuous") {
            c.kind = ColumnKind::continuous;
        } else if (kind == "categorical") {
            c.kind = ColumnKind::categorical;
            if (jc.contains("levels")) {
                c.levels = jc.at("levels").get<std::vector<std::string>>();
                c.levels_declared = true;
            }
        } else {
            throw validation_error("schema: unknown kind '" + kind + "' for column '" + c.name + "'");
        }
        cols.push_back(std::move(c));
    }
    return Schema(std::move(cols));
}

json load_json(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw validation_error(std::string(what) + ": cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw validation_error(std::string(what) + ": invalid JSON in '" + path + "': " + e.what());
    }
    return j;
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void write_manifest(const std::string& path, json manifest, bool record_timings, double seconds) {
    manifest["tool_version"] = SYNTHDATA_VERSION;
    manifest["timings"] = record_timings ? json{{"wall_seconds", seconds}} : json(nullptr);
    std::ofstream os(path);
    if (!os) throw runtime_failure("manifest: cannot write '" + path + "'");
    os << manifest.dump(2) << "\n";
}

ProgressFn epoch_logger() {
    return [](const TrainProgress& p) {
        std::cerr << "epoch " << p.epoch << "/" << p.total_epochs << " critic=" << p.critic_loss
                  << " generator=" << p.generator_loss << " penalty=" << p.penalty << "\n";
    };
}

// ---------------------------------------------------------------------------

int cmd_fit(const std::string& data_path, const std::string& schema_path,
            const std::string& recipe_path, const std::string& train_config_path,
            const std::string& out_dir, bool generator_only, const std::string& resume_path,
            bool have_seed, uint64_t seed, bool record_timings, bool quiet) {
    Timer timer;
    Schema schema = load_schema(schema_path);
    TransformPipeline recipe = load_recipe(recipe_path);
    TrainConfig cfg;
    if (!train_config_path.empty())
        cfg = TrainConfig::from_json(load_json(train_config_path, "train config"));
    if (have_seed) cfg.seed = seed;

    CsvReadResult read = read_csv(data_path, schema);
    if (read.rejected_rows > 0)
        std::cerr << "rejected " << read.rejected_rows << " rows during ingestion\n";
    Table pre = synthdata::apply(recipe.pre, read.table);

    Synthesizer synth;
    if (resume_path.empty()) {
        synth = train(pre, cfg, quiet ? ProgressFn{} : epoch_logger());
    } else {
        synth = load(resume_path);
        if (have_seed) synth.config.seed = seed;
        resume(synth, pre, cfg.epochs, quiet ? ProgressFn{} : epoch_logger());
    }

    fs::create_directories(out_dir);
    const std::string model_path = out_dir + "/model.synth";
    save(synth, model_path, generator_only ? SaveMode::generator_only : SaveMode::full);

    json manifest;
    manifest["command"] = "fit";
    manifest["inputs"] = {{"data", data_path},
                          {"schema", schema_path},
                          {"recipe", recipe_path},
                          {"train_config", train_config_path},
                          {"resume", resume_path}};
    manifest["resolved_config"] = synth.config.to_json();
    manifest["seed"] = synth.config.seed;
    manifest["rejected_rows"] = read.rejected_rows;
    manifest["generator_only"] = generator_only;
    manifest["artifacts"] = {{"model", model_path}};
    write_manifest(out_dir + "/manifest.json", std::move(manifest), record_timings, timer.seconds());
    return 0;
}

int cmd_sample(const std::string& synth_path, size_t n, const std::string& recipe_path,
               const std::string& out_csv, bool have_seed, uint64_t seed, bool record_timings) {
    Timer timer;
    if (n < 1) throw validation_error("sample: --n must be >= 1");
    Synthesizer synth = load(synth_path);
    TransformPipeline recipe = load_recipe(recipe_path);
    const uint64_t use_seed = have_seed ? seed : synth.config.seed;
    Table raw = generate(synth, n, use_seed);
    Table post = synthdata::apply(recipe.post, raw);
    const fs::path parent = fs::path(out_csv).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    write_csv(post, out_csv);

    json manifest;
    manifest["command"] = "sample";
    manifest["inputs"] = {{"synth", synth_path}, {"recipe", recipe_path}};
    manifest["n"] = n;
    manifest["seed"] = use_seed;
    manifest["artifacts"] = {{"csv", out_csv}};
    write_manifest(out_csv + ".manifest.json", std::move(manifest), record_timings, timer.seconds());
    return 0;
}

int cmd_evaluate(const std::string& data_path, const std::string& schema_path,
                 const std::string& recipe_path, const std::string& study_config_path,
                 const std::string& out_dir, bool have_seed, uint64_t seed, int folds_override,
                 int workers_override, bool record_timings, bool quiet) {
    Timer timer;
    Schema schema = load_schema(schema_path);
    StudyConfig cfg = StudyConfig::from_json(load_json(study_config_path, "study config"));
    cfg.recipe = load_recipe(recipe_path);
    if (have_seed) cfg.seed = seed;
    if (folds_override > 0) cfg.k = folds_override;
    if (workers_override > 0) cfg.workers = workers_override;

    CsvReadResult read = read_csv(data_path, schema);
    if (read.rejected_rows > 0)
        std::cerr << "rejected " << read.rejected_rows << " rows during ingestion\n";

    StudyReport report =
        run_study(read.table, cfg, quiet ? ProgressFn{} : [](const TrainProgress& p) {
            if (p.epoch == p.total_epochs)
                std::cerr << "fold training pass complete (" << p.total_epochs << " epochs)\n";
        });
    write_study_report(report, cfg, out_dir);

    json manifest;
    manifest["command"] = "evaluate";
    manifest["inputs"] = {{"data", data_path},
                          {"schema", schema_path},
                          {"recipe", recipe_path},
                          {"study_config", study_config_path}};
    manifest["resolved_config"] = cfg.to_json();
    manifest["seed"] = cfg.seed;
    manifest["rejected_rows"] = read.rejected_rows;
    manifest["artifacts"] = {{"report", out_dir + "/report.json"},
                             {"metrics", out_dir + "/metrics.csv"}};
    write_manifest(out_dir + "/manifest.json", std::move(manifest), record_timings, timer.seconds());

    if (report.failed_folds > 0)
        std::cerr << report.failed_folds << " fold(s) failed; see report.json\n";
    std::cout << metrics_csv(report);
    return 0;
}

int cmd_report(const std::string& study_dir) {
    const std::string path = study_dir + "/report.json";
    if (!fs::exists(path)) throw validation_error("report: missing '" + path + "'");
    json j;
    try {
        std::ifstream in(path);
        in >> j;
        if (j.is_discarded() || !j.is_object()) throw validation_error("not a JSON object");
    } catch (const validation_error&) {
        throw;
    } catch (const std::exception& e) {
        throw validation_error("report: corrupt '" + path + "': " + e.what());
    }

    std::cout << "study: " << j.value("label", std::string("?")) << "\n";
    const int failed = j.value("failed_folds", 0);
    if (failed > 0) std::cout << failed << " fold(s) failed\n";
    std::cout << "\nmetrics\n";
    std::cout << "  mean rmse (real data):      " << j.at("mean_rmse_real").get<double>() << "\n";
    std::cout << "  mean rmse (synthetic data): " << j.at("mean_rmse_syn").get<double>() << "\n";
    std::cout << "  relative difference:        "
              << j.value("relative_difference_formatted", std::string("?")) << "\n";

    // top divergences averaged over successful folds
    std::map<std::string, std::pair<double, int>> acc;
    std::map<std::string, bool> is_cat;
    for (const auto& f : j.at("folds")) {
        if (f.value("failed", false)) continue;
        for (const auto& d : f.at("distributions")) {
            const std::string col = d.at("column").get<std::string>();
            const bool cat = d.contains("tv_distance");
            const double v =
                cat ? d.at("tv_distance").get<double>() : d.at("ks_statistic").get<double>();
            acc[col].first += v;
            acc[col].second += 1;
            is_cat[col] = cat;
        }
    }
    struct Entry {
        std::string column;
        double value;
        bool categorical;
    };
    std::vector<Entry> entries;
    for (const auto& [col, sums] : acc)
        entries.push_back({col, sums.first / sums.second, is_cat[col]});
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.value > b.value; });
    std::cout << "\ntop distribution divergences (mean over folds)\n";
    for (size_t i = 0; i < entries.size() && i < 5; ++i)
        std::cout << "  " << entries[i].column << ": " << (entries[i].categorical ? "tv=" : "ks=")
                  << entries[i].value << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tabular data synthesizer and ML-efficacy evaluation"};
    app.require_subcommand(1);

    uint64_t seed = 0;
    int workers = 0;
    bool record_timings = false;
    bool quiet = false;

    std::string data_path, schema_path, recipe_path, config_path, out_path, synth_path, study_dir,
        resume_path;
    size_t n = 0;
    bool generator_only = false;
    int folds_override = 0;

    auto* fit = app.add_subcommand("fit", "pre-process data and train a synthesizer");
    fit->add_option("--data", data_path, "input CSV")->required();
    fit->add_option("--schema", schema_path, "schema JSON")->required();
    fit->add_option("--recipe", recipe_path, "transform recipe JSON")->required();
    fit->add_option("--train-config", config_path, "train config JSON");
    fit->add_option("--out", out_path, "output directory")->required();
    fit->add_flag("--generator-only", generator_only, "save without the critic");
    fit->add_option("--resume", resume_path, "continue training an existing .synth file");
    auto* fit_seed = fit->add_option("--seed", seed, "train seed (overrides config)");
    fit->add_flag("--record-timings", record_timings);
    fit->add_flag("--quiet", quiet);

    auto* sample = app.add_subcommand("sample", "generate and post-process synthetic rows");
    sample->add_option("--synth", synth_path, ".synth file")->required();
    sample->add_option("--n", n, "rows to generate")->required();
    sample->add_option("--recipe", recipe_path, "transform recipe JSON")->required();
    sample->add_option("--out", out_path, "output CSV path")->required();
    auto* sample_seed = sample->add_option("--seed", seed, "generation seed");
    sample->add_flag("--record-timings", record_timings);

    auto* evaluate = app.add_subcommand("evaluate", "run the cross-validated efficacy study");
    evaluate->add_option("--data", data_path, "input CSV")->required();
    evaluate->add_option("--schema", schema_path, "schema JSON")->required();
    evaluate->add_option("--recipe", recipe_path, "transform recipe JSON")->required();
    evaluate->add_option("--study-config", config_path, "study config JSON")->required();
    evaluate->add_option("--out", out_path, "report directory")->required();
    auto* eval_seed = evaluate->add_option("--seed", seed, "master seed (overrides config)");
    evaluate->add_option("--folds", folds_override, "fold count override");
    evaluate->add_option("--workers", workers, "parallel fold workers");
    evaluate->add_flag("--record-timings", record_timings);
    evaluate->add_flag("--quiet", quiet);

    auto* report = app.add_subcommand("report", "summarize a study directory");
    report->add_option("--study", study_dir, "study report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        std::cerr << json{{"error", e.what()}, {"code", 2}}.dump() << "\n";
        return 2;
    }

    try {
        if (fit->parsed())
            return cmd_fit(data_path, schema_path, recipe_path, config_path, out_path,
                           generator_only, resume_path, fit_seed->count() > 0, seed, record_timings,
                           quiet);
        if (sample->parsed())
            return cmd_sample(synth_path, n, recipe_path, out_path, sample_seed->count() > 0, seed,
                              record_timings);
        if (evaluate->parsed())
            return cmd_evaluate(data_path, schema_path, recipe_path, config_path, out_path,
                                eval_seed->count() > 0, seed, folds_override, workers,
                                record_timings, quiet);
        if (report->parsed()) return cmd_report(study_dir);
    } catch (const validation_error& e) {
        std::cerr << json{{"error", e.what()}, {"code", 2}}.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}, {"code", 1}}.dump() << "\n";
        return 1;
    }
    return 2;
}
