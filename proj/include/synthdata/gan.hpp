#pragma once

#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "synthdata/encoder.hpp"
#include "synthdata/nn.hpp"
#include "synthdata/table.hpp"

namespace synthdata {

struct TrainConfig {
    int epochs = 300;
    int batch_size = 500;
    int critic_steps = 1;       // critic updates per generator update
    double gp_lambda = 10.0;    // gradient penalty weight
    int pac = 10;               // samples packed per critic input
    FrequencyMode frequency_mode = FrequencyMode::true_frequency;
    uint64_t seed = 0;
    int threads = 1;
    size_t subsample_cap = 100000;  // rows used for encoder fitting and training

    int noise_dim = 128;
    std::vector<int> generator_hidden = {256, 256};
    std::vector<int> critic_hidden = {256, 256};
    double leaky_slope = 0.2;
    double critic_dropout = 0.5;
    double gumbel_tau = 0.2;
    double generator_lr = 2e-4;
    double critic_lr = 2e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.9;
    double critic_weight_decay = 1e-6;
    double cond_loss_weight = 1.0;
    EncoderOptions encoder;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainReport {
    size_t trained_rows = 0;          // after subsampling
    bool with_replacement = false;    // batch exceeded the data
    size_t resampled_conditions = 0;  // empty-match condition redraws
    int iterations = 0;
    double final_critic_loss = 0.0;
    double final_generator_loss = 0.0;
    double final_penalty = 0.0;
};

struct TrainProgress {
    int epoch = 0;
    int total_epochs = 0;
    double critic_loss = 0.0;
    double generator_loss = 0.0;
    double penalty = 0.0;
};

struct Synthesizer {
    RowEncoder encoder;
    nn::GeneratorNet generator;
    std::optional<nn::CriticNet> critic;  // absent in generator-only exports
    TrainConfig config;
    TrainReport report;
    uint32_t format_version = 1;

    bool generator_only() const { return !critic.has_value(); }
};

using ProgressFn = std::function<void(const TrainProgress&)>;

// Conditional WGAN-GP training with PacGAN packing. `table` must already be
// pre-processed (recipe pre steps applied by the caller). Deterministic for a
// fixed (seed, thread count).
Synthesizer train(const Table& table, const TrainConfig& config, const ProgressFn& progress = {});

// Continues training an existing synthesizer on (pre-processed) data with the
// same schema. Throws if the critic is absent (generator-only export).
void resume(Synthesizer& synth, const Table& table, int more_epochs, const ProgressFn& progress = {});

// n decoded rows in pre-processed space; one-hots hardened by argmax.
Table generate(const Synthesizer& synth, size_t n, uint64_t seed);

// Fraction of m conditioned generations whose decoded conditioned column
// equals the requested level.
double condition_adherence(const Synthesizer& synth, size_t m, uint64_t seed);

enum class SaveMode { full, generator_only };

void save(const Synthesizer& synth, const std::string& path, SaveMode mode = SaveMode::full);
Synthesizer load(const std::string& path);

}  // namespace synthdata
