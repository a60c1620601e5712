#include "synthdata/gan.hpp"

#include "synthdata/version.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace synthdata {

using ad::Mat;
using ad::Tape;
using nlohmann::json;

// ---------------------------------------------------------------------------
// TrainConfig
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (epochs < 0) throw validation_error("train config: epochs must be >= 0");
    if (batch_size < 1) throw validation_error("train config: batch_size must be >= 1");
    if (critic_steps < 1) throw validation_error("train config: critic_steps must be >= 1");
    if (pac < 1) throw validation_error("train config: pac must be >= 1");
    if (batch_size % pac != 0)
        throw validation_error("train config: batch_size must be divisible by pac");
    if (subsample_cap < static_cast<size_t>(batch_size))
        throw validation_error("train config: subsample_cap must be >= batch_size");
    if (noise_dim < 1) throw validation_error("train config: noise_dim must be >= 1");
    if (gp_lambda < 0.0) throw validation_error("train config: gp_lambda must be >= 0");
    if (threads < 1) throw validation_error("train config: threads must be >= 1");
}

json TrainConfig::to_json() const {
    json j;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["critic_steps"] = critic_steps;
    j["gp_lambda"] = gp_lambda;
    j["pac"] = pac;
    j["frequency_mode"] = to_string(frequency_mode);
    j["seed"] = seed;
    j["threads"] = threads;
    j["subsample_cap"] = subsample_cap;
    j["noise_dim"] = noise_dim;
    j["generator_hidden"] = generator_hidden;
    j["critic_hidden"] = critic_hidden;
    j["leaky_slope"] = leaky_slope;
    j["critic_dropout"] = critic_dropout;
    j["gumbel_tau"] = gumbel_tau;
    j["generator_lr"] = generator_lr;
    j["critic_lr"] = critic_lr;
    j["adam_beta1"] = adam_beta1;
    j["adam_beta2"] = adam_beta2;
    j["critic_weight_decay"] = critic_weight_decay;
    j["cond_loss_weight"] = cond_loss_weight;
    j["encoder"] = {{"max_modes", encoder.vgm.max_modes},
                    {"weight_threshold", encoder.vgm.weight_threshold},
                    {"low_cardinality_threshold", encoder.low_cardinality_threshold}};
    return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
    TrainConfig c;
    auto opt = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    opt("epochs", c.epochs);
    opt("batch_size", c.batch_size);
    opt("critic_steps", c.critic_steps);
    opt("gp_lambda", c.gp_lambda);
    opt("pac", c.pac);
    if (j.contains("frequency_mode"))
        c.frequency_mode = frequency_mode_from_string(j.at("frequency_mode").get<std::string>());
    opt("seed", c.seed);
    opt("threads", c.threads);
    opt("subsample_cap", c.subsample_cap);
    opt("noise_dim", c.noise_dim);
    opt("generator_hidden", c.generator_hidden);
    opt("critic_hidden", c.critic_hidden);
    opt("leaky_slope", c.leaky_slope);
    opt("critic_dropout", c.critic_dropout);
    opt("gumbel_tau", c.gumbel_tau);
    opt("generator_lr", c.generator_lr);
    opt("critic_lr", c.critic_lr);
    opt("adam_beta1", c.adam_beta1);
    opt("adam_beta2", c.adam_beta2);
    opt("critic_weight_decay", c.critic_weight_decay);
    opt("cond_loss_weight", c.cond_loss_weight);
    if (j.contains("encoder")) {
        const auto& e = j.at("encoder");
        if (e.contains("max_modes")) c.encoder.vgm.max_modes = e.at("max_modes").get<int>();
        if (e.contains("weight_threshold"))
            c.encoder.vgm.weight_threshold = e.at("weight_threshold").get<double>();
        if (e.contains("low_cardinality_threshold"))
            c.encoder.low_cardinality_threshold = e.at("low_cardinality_threshold").get<size_t>();
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Output activations
// ---------------------------------------------------------------------------

namespace {

void softmax_rows_inplace(Eigen::Ref<Mat> block) {
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
        const double m = block.row(r).maxCoeff();
        block.row(r) = (block.row(r).array() - m).exp();
        block.row(r) /= block.row(r).sum();
    }
}

// Numeric path for detached samples: tanh on alpha cells, (gumbel-)softmax on
// one-hot segments. rng == nullptr means eval mode (plain softmax, no noise).
Mat activate_numeric(const Mat& head, const RowEncoder& enc, double tau, RandomStream* rng) {
    Mat out = head;
    for (const Segment& seg : enc.segments()) {
        Eigen::Index off = static_cast<Eigen::Index>(seg.offset);
        Eigen::Index w = static_cast<Eigen::Index>(seg.width);
        Eigen::Index oh_off = off;
        Eigen::Index oh_w = w;
        if (seg.kind == SegmentKind::continuous_vgm) {
            out.col(off) = out.col(off).array().tanh();
            oh_off = off + 1;
            oh_w = w - 1;
        }
        auto block = out.middleCols(oh_off, oh_w);
        if (rng) {
            for (Eigen::Index r = 0; r < block.rows(); ++r)
                for (Eigen::Index c = 0; c < oh_w; ++c)
                    block(r, c) = (block(r, c) + rng->gumbel()) / tau;
        }
        softmax_rows_inplace(block);
    }
    return out;
}

int gumbel_softmax_tape(Tape& t, int logits, double tau, RandomStream& rng) {
    const Mat& v = t.value(logits);
    Mat noise(v.rows(), v.cols());
    for (Eigen::Index r = 0; r < v.rows(); ++r)
        for (Eigen::Index c = 0; c < v.cols(); ++c) noise(r, c) = rng.gumbel();
    return t.softmax_rows(t.scale(t.add_const(logits, std::move(noise)), 1.0 / tau));
}

int activate_tape(Tape& t, int head, const RowEncoder& enc, double tau, RandomStream& rng) {
    int out = -1;
    for (const Segment& seg : enc.segments()) {
        Eigen::Index off = static_cast<Eigen::Index>(seg.offset);
        Eigen::Index w = static_cast<Eigen::Index>(seg.width);
        int part;
        if (seg.kind == SegmentKind::continuous_vgm) {
            int alpha = t.tanh_fn(t.slice_cols(head, off, off + 1));
            int modes = gumbel_softmax_tape(t, t.slice_cols(head, off + 1, off + w), tau, rng);
            part = t.concat_cols(alpha, modes);
        } else {
            part = gumbel_softmax_tape(t, t.slice_cols(head, off, off + w), tau, rng);
        }
        out = out < 0 ? part : t.concat_cols(out, part);
    }
    return out;
}

// Cross-entropy between the generated one-hot segment of each conditioned
// column and the condition's level, averaged over the batch. Computed on the
// pre-activation logits.
int cond_loss_tape(Tape& t, int head, const RowEncoder& enc,
                   const std::vector<ConditionVector>& conds, Eigen::Index batch) {
    int total = -1;
    for (const auto& slot : enc.cond_slots()) {
        const Segment& seg = enc.segment_for(slot.column);
        Mat mask = Mat::Zero(batch, static_cast<Eigen::Index>(seg.width));
        bool any = false;
        for (size_t i = 0; i < conds.size(); ++i) {
            if (conds[i].column == slot.column) {
                mask(static_cast<Eigen::Index>(i), conds[i].level) = 1.0;
                any = true;
            }
        }
        if (!any) continue;
        Eigen::Index off = static_cast<Eigen::Index>(seg.offset);
        int lsm = t.log_softmax_rows(t.slice_cols(head, off, off + static_cast<Eigen::Index>(seg.width)));
        int picked = t.mul_mask(lsm, std::move(mask));
        int ce = t.scale(t.sum_all(picked), -1.0 / static_cast<double>(batch));
        total = total < 0 ? ce : t.add(total, ce);
    }
    return total;
}

Mat pack_numeric(const Mat& x, int pac) {
    const Eigen::Index groups = x.rows() / pac;
    const Eigen::Index m = x.cols();
    Mat out(groups, static_cast<Eigen::Index>(pac) * m);
    for (Eigen::Index g = 0; g < groups; ++g)
        for (int q = 0; q < pac; ++q)
            out.block(g, static_cast<Eigen::Index>(q) * m, 1, m) = x.row(g * pac + q);
    return out;
}

struct BatchDraw {
    Mat gen_input;  // batch x (noise + cond width)
    Mat cond;       // batch x cond width
    std::vector<ConditionVector> conds;
};

BatchDraw draw_batch(int batch, int noise_dim, const RowEncoder& enc, ConditionSampler& sampler,
                     bool conditional, RandomStream& rng) {
    BatchDraw b;
    const Eigen::Index cw = static_cast<Eigen::Index>(enc.cond_width());
    b.cond = Mat::Zero(batch, cw);
    if (conditional) {
        b.conds.reserve(static_cast<size_t>(batch));
        for (int i = 0; i < batch; ++i) {
            ConditionVector cv = sampler.sample_matched(rng);
            b.cond(i, static_cast<Eigen::Index>(cv.offset)) = 1.0;
            b.conds.push_back(cv);
        }
    }
    Mat z(batch, noise_dim);
    for (Eigen::Index r = 0; r < z.rows(); ++r)
        for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = rng.normal();
    if (cw == 0) {
        b.gen_input = std::move(z);
    } else {
        b.gen_input.resize(batch, noise_dim + cw);
        b.gen_input << z, b.cond;
    }
    return b;
}

void train_loop(Synthesizer& synth, const Table& data, const Mat& encoded, ConditionSampler& sampler,
                int epochs, uint64_t loop_seed, const ProgressFn& progress) {
    const TrainConfig& cfg = synth.config;
    const RowEncoder& enc = synth.encoder;
    nn::GeneratorNet& gen = synth.generator;
    nn::CriticNet& critic = *synth.critic;
    const bool conditional = !sampler.unconditional();
    const size_t W = enc.width();
    const Eigen::Index cw = static_cast<Eigen::Index>(enc.cond_width());
    const int batch = cfg.batch_size;

    nn::AdamConfig gen_adam{cfg.generator_lr, cfg.adam_beta1, cfg.adam_beta2, 1e-8, 0.0};
    nn::AdamConfig critic_adam{cfg.critic_lr, cfg.adam_beta1, cfg.adam_beta2, 1e-8,
                               cfg.critic_weight_decay};
    nn::AdamState gen_state, critic_state;
    gen_state.init(gen.params);
    critic_state.init(critic.params);

    const int steps_per_epoch =
        std::max<int>(static_cast<int>(data.rows() / static_cast<size_t>(batch)), 1);

    RandomStream rng(loop_seed);
    Tape tape;
    std::vector<size_t> perm(static_cast<size_t>(batch));

    auto materialize = [&](const std::vector<int>& ids, const nn::ParameterSet& ps) {
        std::vector<Mat> out(ids.size());
        for (size_t i = 0; i < ids.size(); ++i)
            out[i] = ids[i] >= 0 ? tape.value(ids[i])
                                 : Mat::Zero(ps.values[i].rows(), ps.values[i].cols());
        return out;
    };

    double c_loss = 0.0, g_loss = 0.0, pen_val = 0.0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (int step = 0; step < steps_per_epoch; ++step) {
            for (int cs = 0; cs < cfg.critic_steps; ++cs) {
                // ---- critic update ----
                BatchDraw b = draw_batch(batch, cfg.noise_dim, enc, sampler, conditional, rng);
                Mat head = gen.forward_eval(b.gen_input);
                Mat fake = activate_numeric(head, enc, cfg.gumbel_tau, &rng);

                // real rows matched to a permutation of the same conditions
                std::iota(perm.begin(), perm.end(), size_t{0});
                if (conditional) rng.shuffle(perm);
                Mat real(batch, static_cast<Eigen::Index>(W));
                Mat c2 = Mat::Zero(batch, cw);
                for (int i = 0; i < batch; ++i) {
                    size_t row;
                    if (conditional) {
                        const ConditionVector& cv = b.conds[perm[static_cast<size_t>(i)]];
                        row = sampler.matching_row(cv, rng);
                        c2(i, static_cast<Eigen::Index>(cv.offset)) = 1.0;
                    } else {
                        row = static_cast<size_t>(rng.below(data.rows()));
                    }
                    real.row(i) = encoded.row(static_cast<Eigen::Index>(row));
                }

                Mat fake_full, real_full;
                if (cw == 0) {
                    fake_full = std::move(fake);
                    real_full = std::move(real);
                } else {
                    fake_full.resize(batch, static_cast<Eigen::Index>(W) + cw);
                    fake_full << fake, b.cond;
                    real_full.resize(batch, static_cast<Eigen::Index>(W) + cw);
                    real_full << real, c2;
                }
                Mat fake_packed = pack_numeric(fake_full, cfg.pac);
                Mat real_packed = pack_numeric(real_full, cfg.pac);

                Mat xhat(fake_packed.rows(), fake_packed.cols());
                for (Eigen::Index g = 0; g < xhat.rows(); ++g) {
                    const double eps = rng.uniform();
                    xhat.row(g) = eps * real_packed.row(g) + (1.0 - eps) * fake_packed.row(g);
                }

                tape.clear();
                auto cparams = nn::push_params(tape, critic.params, true);
                int nreal = tape.constant(std::move(real_packed));
                int nfake = tape.constant(std::move(fake_packed));
                int nhat = tape.leaf(std::move(xhat), true);
                int sreal = critic.forward_tape(tape, nreal, cparams, true, rng);
                int sfake = critic.forward_tape(tape, nfake, cparams, true, rng);
                int shat = critic.forward_tape(tape, nhat, cparams, true, rng);

                int loss = tape.sub(tape.mean_all(sfake), tape.mean_all(sreal));
                // gradient penalty via a second, differentiable sweep
                int gx = tape.grad(tape.sum_all(shat), {nhat})[0];
                int norm = tape.sqrt_fn(tape.add_scalar(tape.row_sum(tape.mul(gx, gx)), 1e-24));
                int pen = tape.mean_all(tape.mul(tape.add_scalar(norm, -1.0), tape.add_scalar(norm, -1.0)));
                loss = tape.add(loss, tape.scale(pen, cfg.gp_lambda));

                auto grad_ids = tape.grad(loss, cparams);
                c_loss = tape.value(loss)(0, 0);
                pen_val = tape.value(pen)(0, 0);
                if (!std::isfinite(c_loss))
                    throw runtime_failure("train: non-finite critic loss at epoch " +
                                          std::to_string(epoch) + " step " + std::to_string(step));
                nn::adam_step(critic.params, materialize(grad_ids, critic.params), critic_state,
                              critic_adam);
            }

            // ---- generator update ----
            BatchDraw b = draw_batch(batch, cfg.noise_dim, enc, sampler, conditional, rng);
            tape.clear();
            auto gparams = nn::push_params(tape, gen.params, true);
            auto cparams = nn::push_params(tape, critic.params, false);
            int ninput = tape.constant(b.gen_input);
            int head = gen.forward_tape(tape, ninput, gparams);
            int data_node = activate_tape(tape, head, enc, cfg.gumbel_tau, rng);
            int full = cw == 0 ? data_node : tape.concat_cols(data_node, tape.constant(b.cond));
            int packed = tape.pack_rows(full, cfg.pac);
            int score = critic.forward_tape(tape, packed, cparams, true, rng);
            int loss = tape.scale(tape.mean_all(score), -1.0);
            if (conditional) {
                int ce = cond_loss_tape(tape, head, enc, b.conds, batch);
                if (ce >= 0) loss = tape.add(loss, tape.scale(ce, cfg.cond_loss_weight));
            }
            auto grad_ids = tape.grad(loss, gparams);
            g_loss = tape.value(loss)(0, 0);
            if (!std::isfinite(g_loss))
                throw runtime_failure("train: non-finite generator loss at epoch " +
                                      std::to_string(epoch) + " step " + std::to_string(step));
            nn::adam_step(gen.params, materialize(grad_ids, gen.params), gen_state, gen_adam);
            synth.report.iterations += 1;
        }
        if (progress) progress({epoch + 1, epochs, c_loss, g_loss, pen_val});
    }
    synth.report.resampled_conditions += sampler.resampled_conditions();
    synth.report.final_critic_loss = c_loss;
    synth.report.final_generator_loss = g_loss;
    synth.report.final_penalty = pen_val;
}

}  // namespace

// ---------------------------------------------------------------------------
// train / resume
// ---------------------------------------------------------------------------

Synthesizer train(const Table& table, const TrainConfig& config, const ProgressFn& progress) {
    config.validate();
    if (table.rows() == 0) throw validation_error("train: empty table");

    Synthesizer synth;
    synth.config = config;

    // subsample before encoder fitting, so the encoder sees what the GAN sees
    const Table* data = &table;
    Table sub;
    if (table.rows() > config.subsample_cap) {
        std::vector<size_t> rows(table.rows());
        std::iota(rows.begin(), rows.end(), size_t{0});
        RandomStream srs(hash_combine(config.seed, 0x737562ull));
        srs.shuffle(rows);
        rows.resize(config.subsample_cap);
        std::sort(rows.begin(), rows.end());
        sub = table.select_rows(rows);
        data = &sub;
    }

    synth.encoder = RowEncoder::fit(*data, config.encoder, hash_combine(config.seed, 0x656e63ull));
    synth.report.trained_rows = data->rows();
    synth.report.with_replacement = static_cast<size_t>(config.batch_size) > data->rows();

    RandomStream enc_rng(hash_combine(config.seed, 0x656e6372ull));
    std::vector<size_t> all(data->rows());
    std::iota(all.begin(), all.end(), size_t{0});
    Mat encoded = synth.encoder.encode_rows(*data, all, enc_rng);
    ConditionSampler sampler(synth.encoder, *data, config.frequency_mode);

    RandomStream init_rng(hash_combine(config.seed, 0x696e6974ull));
    const int gen_in = config.noise_dim + static_cast<int>(synth.encoder.cond_width());
    const int critic_in =
        config.pac * static_cast<int>(synth.encoder.width() + synth.encoder.cond_width());
    synth.generator = nn::GeneratorNet(gen_in, config.generator_hidden,
                                       static_cast<int>(synth.encoder.width()), init_rng);
    synth.critic = nn::CriticNet(critic_in, config.critic_hidden, config.leaky_slope,
                                 config.critic_dropout, init_rng);

    train_loop(synth, *data, encoded, sampler, config.epochs,
               hash_combine(config.seed, 0x6c6f6f70ull), progress);
    return synth;
}

void resume(Synthesizer& synth, const Table& table, int more_epochs, const ProgressFn& progress) {
    if (synth.generator_only())
        throw runtime_failure("resume: critic absent (generator-only synthesizer)");
    if (table.rows() == 0) throw validation_error("resume: empty table");
    // schema must match the fitted encoder
    const Schema& want = synth.encoder.schema();
    const Schema& got = table.schema();
    if (want.size() != got.size()) throw validation_error("resume: schema mismatch");
    for (size_t j = 0; j < want.size(); ++j) {
        if (want.at(j).name != got.at(j).name || want.at(j).kind != got.at(j).kind)
            throw validation_error("resume: schema mismatch at column '" + got.at(j).name + "'");
    }

    const Table* data = &table;
    Table sub;
    if (table.rows() > synth.config.subsample_cap) {
        std::vector<size_t> rows(table.rows());
        std::iota(rows.begin(), rows.end(), size_t{0});
        RandomStream srs(hash_combine(synth.config.seed, 0x73756232ull));
        srs.shuffle(rows);
        rows.resize(synth.config.subsample_cap);
        std::sort(rows.begin(), rows.end());
        sub = table.select_rows(rows);
        data = &sub;
    }
    RandomStream enc_rng(hash_combine(synth.config.seed, 0x656e6333ull));
    std::vector<size_t> all(data->rows());
    std::iota(all.begin(), all.end(), size_t{0});
    Mat encoded = synth.encoder.encode_rows(*data, all, enc_rng);
    ConditionSampler sampler(synth.encoder, *data, synth.config.frequency_mode);
    train_loop(synth, *data, encoded, sampler, more_epochs,
               hash_combine(synth.config.seed,
                            0x726573756d65ull + static_cast<uint64_t>(synth.report.iterations)),
               progress);
}

// ---------------------------------------------------------------------------
// generate / condition_adherence
// ---------------------------------------------------------------------------

namespace {

// Generates n rows; fills `requested` (when non-null) with the condition used
// per row.
Table generate_rows(const Synthesizer& synth, size_t n, uint64_t seed,
                    std::vector<std::optional<ConditionVector>>* requested) {
    const RowEncoder& enc = synth.encoder;
    ConditionSampler sampler(enc, synth.config.frequency_mode);
    const bool conditional = !sampler.unconditional();
    const Eigen::Index cw = static_cast<Eigen::Index>(enc.cond_width());
    RandomStream rng(hash_combine(seed, 0x67656e6572ull));

    Table out(enc.schema());
    out.set_rows(n);
    if (requested) requested->assign(n, std::nullopt);

    const size_t batch_cap = static_cast<size_t>(std::max(synth.config.batch_size, 1));
    std::vector<double> buf(enc.width());
    size_t done = 0;
    while (done < n) {
        const size_t bs = std::min(batch_cap, n - done);
        Mat cond = Mat::Zero(static_cast<Eigen::Index>(bs), cw);
        std::vector<ConditionVector> conds(bs);
        if (conditional) {
            for (size_t i = 0; i < bs; ++i) {
                ConditionVector cv = *sampler.sample(rng);
                conds[i] = cv;
                cond(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cv.offset)) = 1.0;
                if (requested) (*requested)[done + i] = cv;
            }
        }
        Mat z(static_cast<Eigen::Index>(bs), synth.config.noise_dim);
        for (Eigen::Index r = 0; r < z.rows(); ++r)
            for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = rng.normal();
        Mat input;
        if (cw == 0) {
            input = std::move(z);
        } else {
            input.resize(static_cast<Eigen::Index>(bs), z.cols() + cw);
            input << z, cond;
        }
        Mat head = synth.generator.forward_eval(input);
        Mat activated = activate_numeric(head, enc, synth.config.gumbel_tau, nullptr);
        for (size_t i = 0; i < bs; ++i) {
            for (size_t c = 0; c < enc.width(); ++c)
                buf[c] = activated(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
            enc.decode_row(buf.data(), out, done + i);
        }
        done += bs;
    }
    return out;
}

}  // namespace

Table generate(const Synthesizer& synth, size_t n, uint64_t seed) {
    if (n < 1) throw validation_error("generate: n must be >= 1");
    return generate_rows(synth, n, seed, nullptr);
}

double condition_adherence(const Synthesizer& synth, size_t m, uint64_t seed) {
    if (m < 1) throw validation_error("condition_adherence: m must be >= 1");
    if (synth.encoder.cond_slots().empty())
        throw validation_error("condition_adherence: no categorical columns");
    std::vector<std::optional<ConditionVector>> requested;
    Table t = generate_rows(synth, m, seed, &requested);
    size_t hits = 0;
    for (size_t i = 0; i < m; ++i) {
        const ConditionVector& cv = *requested[i];
        if (t.categorical(cv.column)[i] == cv.level) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(m);
}

// ---------------------------------------------------------------------------
// Serialization: versioned envelope with a JSON metadata block and a
// length-prefixed binary parameter section (raw little-endian doubles).
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'T', 'A', 'B', 'S', 'Y', 'N', '0', '1'};
constexpr uint32_t kFormatVersion = 1;

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 4)) throw runtime_failure("synth file: truncated");
    return v;
}

uint64_t read_u64(std::istream& is) {
    uint64_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 8)) throw runtime_failure("synth file: truncated");
    return v;
}

void write_params(std::ostream& os, const nn::ParameterSet& ps) {
    write_u32(os, static_cast<uint32_t>(ps.values.size()));
    for (size_t i = 0; i < ps.values.size(); ++i) {
        const std::string& name = ps.names[i];
        write_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        const Mat& m = ps.values[i];
        write_u64(os, static_cast<uint64_t>(m.rows()));
        write_u64(os, static_cast<uint64_t>(m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                double v = m(r, c);
                os.write(reinterpret_cast<const char*>(&v), 8);
            }
    }
}

nn::ParameterSet read_params(std::istream& is) {
    nn::ParameterSet ps;
    const uint32_t count = read_u32(is);
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw runtime_failure("synth file: truncated");
        const uint64_t rows = read_u64(is);
        const uint64_t cols = read_u64(is);
        Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                double v;
                if (!is.read(reinterpret_cast<char*>(&v), 8))
                    throw runtime_failure("synth file: truncated");
                m(r, c) = v;
            }
        ps.names.push_back(std::move(name));
        ps.values.push_back(std::move(m));
    }
    return ps;
}

}  // namespace

void save(const Synthesizer& synth, const std::string& path, SaveMode mode) {
    const bool gen_only = mode == SaveMode::generator_only || synth.generator_only();
    json meta;
    meta["format_version"] = kFormatVersion;
    meta["generator_only"] = gen_only;
    meta["config"] = synth.config.to_json();
    meta["encoder"] = synth.encoder.to_json();
    meta["generator"] = {{"input_dim", synth.generator.input_dim},
                         {"hidden", synth.generator.hidden},
                         {"output_dim", synth.generator.output_dim}};
    if (!gen_only)
        meta["critic"] = {{"input_dim", synth.critic->input_dim},
                          {"hidden", synth.critic->hidden},
                          {"leaky_slope", synth.critic->leaky_slope},
                          {"dropout", synth.critic->dropout}};
    meta["report"] = {{"trained_rows", synth.report.trained_rows},
                      {"with_replacement", synth.report.with_replacement},
                      {"resampled_conditions", synth.report.resampled_conditions},
                      {"iterations", synth.report.iterations}};

    std::ofstream os(path, std::ios::binary);
    if (!os) throw runtime_failure("save: cannot write '" + path + "'");
    os.write(kMagic, 8);
    write_u32(os, kFormatVersion);
    const std::string meta_str = meta.dump();
    write_u64(os, meta_str.size());
    os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    write_params(os, synth.generator.params);
    if (!gen_only) write_params(os, synth.critic->params);
    if (!os) throw runtime_failure("save: write failed for '" + path + "'");

    // run-metadata sidecar
    json side;
    side["tool"] = "synthdata";
    side["tool_version"] = SYNTHDATA_VERSION;
    side["format_version"] = kFormatVersion;
    side["seed"] = synth.config.seed;
    side["threads"] = synth.config.threads;
    side["config"] = synth.config.to_json();
    side["generator_only"] = gen_only;
    std::ofstream ms(path + ".meta.json");
    ms << side.dump(2) << "\n";
}

Synthesizer load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw runtime_failure("load: cannot open '" + path + "'");
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw runtime_failure("load: '" + path + "' is not a synthesizer file");
    const uint32_t version = read_u32(is);
    if (version != kFormatVersion)
        throw runtime_failure("load: unsupported synthesizer format version " +
                              std::to_string(version));
    const uint64_t meta_len = read_u64(is);
    std::string meta_str(meta_len, '\0');
    if (!is.read(meta_str.data(), static_cast<std::streamsize>(meta_len)))
        throw runtime_failure("synth file: truncated");
    json meta;
    try {
        meta = json::parse(meta_str);
    } catch (const std::exception& e) {
        throw runtime_failure(std::string("load: corrupt metadata block: ") + e.what());
    }

    Synthesizer synth;
    synth.format_version = version;
    synth.config = TrainConfig::from_json(meta.at("config"));
    synth.encoder = RowEncoder::from_json(meta.at("encoder"));

    synth.generator.input_dim = meta.at("generator").at("input_dim").get<int>();
    synth.generator.hidden = meta.at("generator").at("hidden").get<std::vector<int>>();
    synth.generator.output_dim = meta.at("generator").at("output_dim").get<int>();
    synth.generator.params = read_params(is);

    const bool gen_only = meta.at("generator_only").get<bool>();
    if (!gen_only) {
        nn::CriticNet critic;
        critic.input_dim = meta.at("critic").at("input_dim").get<int>();
        critic.hidden = meta.at("critic").at("hidden").get<std::vector<int>>();
        critic.leaky_slope = meta.at("critic").at("leaky_slope").get<double>();
        critic.dropout = meta.at("critic").at("dropout").get<double>();
        critic.params = read_params(is);
        synth.critic = std::move(critic);
    }
    if (meta.contains("report")) {
        synth.report.trained_rows = meta["report"].value("trained_rows", size_t{0});
        synth.report.with_replacement = meta["report"].value("with_replacement", false);
        synth.report.resampled_conditions = meta["report"].value("resampled_conditions", size_t{0});
        synth.report.iterations = meta["report"].value("iterations", 0);
    }
    return synth;
}

}  // namespace synthdata
