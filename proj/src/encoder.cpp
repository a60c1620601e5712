#include "synthdata/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace synthdata {

using nlohmann::json;

FrequencyMode frequency_mode_from_string(const std::string& s) {
    if (s == "true" || s == "true_frequency") return FrequencyMode::true_frequency;
    if (s == "log" || s == "log_frequency") return FrequencyMode::log_frequency;
    throw validation_error("unknown frequency mode '" + s + "'");
}

std::string to_string(FrequencyMode m) {
    return m == FrequencyMode::true_frequency ? "true_frequency" : "log_frequency";
}

EncodedContinuous encode_continuous(const VgmColumnModel& model, double value, RandomStream& rng) {
    const std::vector<double> resp = model.responsibilities(value);
    const size_t mode = resp.size() == 1 ? 0 : rng.categorical(resp);
    const VgmComponent& c = model.active_component(mode);
    double alpha = (value - c.mean) / (4.0 * c.std);
    alpha = std::clamp(alpha, -1.0, 1.0);
    return {alpha, mode};
}

double decode_continuous(const VgmColumnModel& model, double alpha, size_t mode) {
    if (mode >= model.active.size()) throw validation_error("decode_continuous: invalid mode index");
    const VgmComponent& c = model.active_component(mode);
    return c.mean + 4.0 * c.std * alpha;
}

// ---------------------------------------------------------------------------
// RowEncoder
// ---------------------------------------------------------------------------

void RowEncoder::build_layout() {
    segments_.clear();
    cond_slots_.clear();
    width_ = 0;
    cond_width_ = 0;
    for (size_t j = 0; j < schema_.size(); ++j) {
        Segment seg;
        seg.column = j;
        seg.offset = width_;
        if (schema_.at(j).kind == ColumnKind::categorical) {
            seg.kind = SegmentKind::categorical;
            seg.width = schema_.at(j).levels.size();
            cond_slots_.push_back({j, cond_width_, seg.width});
            cond_width_ += seg.width;
        } else if (!discrete_values_[j].empty()) {
            seg.kind = SegmentKind::discrete_numeric;
            seg.width = discrete_values_[j].size();
        } else {
            seg.kind = SegmentKind::continuous_vgm;
            seg.width = 1 + vgm_[j].active.size();
        }
        width_ += seg.width;
        segments_.push_back(seg);
    }
}

RowEncoder RowEncoder::fit(const Table& table, const EncoderOptions& options, uint64_t seed) {
    if (table.rows() == 0) throw validation_error("RowEncoder::fit: empty table");
    RowEncoder enc;
    enc.schema_ = table.schema();
    enc.vgm_.resize(enc.schema_.size());
    enc.discrete_values_.resize(enc.schema_.size());
    enc.level_counts_.resize(enc.schema_.size());
    for (size_t j = 0; j < enc.schema_.size(); ++j) {
        const Column& col = enc.schema_.at(j);
        if (col.kind == ColumnKind::categorical) {
            enc.level_counts_[j] = level_counts(table, j);
            continue;
        }
        const auto& vals = table.numeric(j);
        if (options.low_cardinality_threshold > 0) {
            std::set<double> uniq(vals.begin(), vals.end());
            if (uniq.size() <= options.low_cardinality_threshold) {
                enc.discrete_values_[j].assign(uniq.begin(), uniq.end());
                continue;
            }
        }
        if (vals.size() < 2) {
            // single-row table: degenerate single-mode model
            VgmColumnModel m;
            m.column = col.name;
            m.components = {{1.0, vals.empty() ? 0.0 : vals[0], options.vgm.std_floor}};
            m.active = {0};
            enc.vgm_[j] = std::move(m);
        } else {
            enc.vgm_[j] = fit_vgm(vals, options.vgm.max_modes, options.vgm.weight_threshold,
                                  hash_combine(seed, j), options.vgm);
            enc.vgm_[j].column = col.name;
        }
    }
    enc.build_layout();
    return enc;
}

const Segment& RowEncoder::segment_for(size_t column) const {
    for (const auto& s : segments_)
        if (s.column == column) return s;
    throw validation_error("RowEncoder: no segment for column index " + std::to_string(column));
}

const VgmColumnModel& RowEncoder::vgm_for(size_t column) const {
    const Segment& s = segment_for(column);
    if (s.kind != SegmentKind::continuous_vgm)
        throw validation_error("RowEncoder: column has no VGM model");
    return vgm_[column];
}

const std::vector<double>& RowEncoder::discrete_values_for(size_t column) const {
    return discrete_values_.at(column);
}

const std::vector<size_t>& RowEncoder::level_counts_for(size_t column) const {
    return level_counts_.at(column);
}

void RowEncoder::encode_row_into(const Table& t, size_t row, RandomStream& rng, double* out) const {
    for (const Segment& seg : segments_) {
        double* cell = out + seg.offset;
        std::fill(cell, cell + seg.width, 0.0);
        switch (seg.kind) {
            case SegmentKind::categorical: {
                int32_t lvl = t.categorical(seg.column)[row];
                cell[static_cast<size_t>(lvl)] = 1.0;
                break;
            }
            case SegmentKind::discrete_numeric: {
                const double v = t.numeric(seg.column)[row];
                const auto& vals = discrete_values_[seg.column];
                size_t best = 0;
                double bestd = std::abs(v - vals[0]);
                for (size_t i = 1; i < vals.size(); ++i) {
                    double d = std::abs(v - vals[i]);
                    if (d < bestd) {
                        bestd = d;
                        best = i;
                    }
                }
                cell[best] = 1.0;
                break;
            }
            case SegmentKind::continuous_vgm: {
                const double v = t.numeric(seg.column)[row];
                EncodedContinuous e = encode_continuous(vgm_[seg.column], v, rng);
                cell[0] = e.alpha;
                cell[1 + e.mode] = 1.0;
                break;
            }
        }
    }
}

std::vector<double> RowEncoder::encode_row(const Table& t, size_t row, RandomStream& rng) const {
    std::vector<double> out(width_);
    encode_row_into(t, row, rng, out.data());
    return out;
}

Eigen::MatrixXd RowEncoder::encode_rows(const Table& t, const std::vector<size_t>& rows,
                                        RandomStream& rng) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width_));
    std::vector<double> buf(width_);
    for (size_t i = 0; i < rows.size(); ++i) {
        encode_row_into(t, rows[i], rng, buf.data());
        for (size_t c = 0; c < width_; ++c) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = buf[c];
    }
    return out;
}

void RowEncoder::decode_row(const double* enc, Table& out, size_t row) const {
    for (const Segment& seg : segments_) {
        const double* cell = enc + seg.offset;
        auto argmax = [&](size_t from, size_t count) {
            size_t best = 0;
            for (size_t i = 1; i < count; ++i)
                if (cell[from + i] > cell[from + best]) best = i;
            return best;
        };
        switch (seg.kind) {
            case SegmentKind::categorical: {
                out.categorical(seg.column)[row] = static_cast<int32_t>(argmax(0, seg.width));
                break;
            }
            case SegmentKind::discrete_numeric: {
                out.numeric(seg.column)[row] = discrete_values_[seg.column][argmax(0, seg.width)];
                break;
            }
            case SegmentKind::continuous_vgm: {
                const double alpha = std::clamp(cell[0], -1.0, 1.0);
                const size_t mode = argmax(1, seg.width - 1);
                out.numeric(seg.column)[row] = decode_continuous(vgm_[seg.column], alpha, mode);
                break;
            }
        }
    }
}

Table RowEncoder::decode_rows(const Eigen::MatrixXd& encoded) const {
    if (static_cast<size_t>(encoded.cols()) != width_)
        throw validation_error("decode_rows: width mismatch");
    Table out(schema_);
    out.set_rows(static_cast<size_t>(encoded.rows()));
    std::vector<double> buf(width_);
    for (Eigen::Index i = 0; i < encoded.rows(); ++i) {
        for (size_t c = 0; c < width_; ++c) buf[c] = encoded(i, static_cast<Eigen::Index>(c));
        decode_row(buf.data(), out, static_cast<size_t>(i));
    }
    return out;
}

json RowEncoder::to_json() const {
    json cols = json::array();
    for (size_t j = 0; j < schema_.size(); ++j) {
        const Column& c = schema_.at(j);
        json jc;
        jc["name"] = c.name;
        jc["kind"] = c.kind == ColumnKind::categorical ? "categorical" : "continuous";
        if (c.kind == ColumnKind::categorical) {
            jc["levels"] = c.levels;
            jc["level_counts"] = level_counts_[j];
        } else if (!discrete_values_[j].empty()) {
            jc["discrete_values"] = discrete_values_[j];
        } else {
            json comps = json::array();
            for (const auto& comp : vgm_[j].components)
                comps.push_back({{"weight", comp.weight}, {"mean", comp.mean}, {"std", comp.std}});
            jc["vgm"] = {{"components", comps}, {"active", vgm_[j].active}};
        }
        cols.push_back(jc);
    }
    return json{{"columns", cols}};
}

RowEncoder RowEncoder::from_json(const json& j) {
    RowEncoder enc;
    std::vector<Column> cols;
    const auto& jcols = j.at("columns");
    enc.vgm_.resize(jcols.size());
    enc.discrete_values_.resize(jcols.size());
    enc.level_counts_.resize(jcols.size());
    for (size_t i = 0; i < jcols.size(); ++i) {
        const auto& jc = jcols[i];
        Column c;
        c.name = jc.at("name").get<std::string>();
        if (jc.at("kind").get<std::string>() == "categorical") {
            c.kind = ColumnKind::categorical;
            c.levels = jc.at("levels").get<std::vector<std::string>>();
            c.levels_declared = true;
            enc.level_counts_[i] = jc.at("level_counts").get<std::vector<size_t>>();
        } else {
            c.kind = ColumnKind::continuous;
            if (jc.contains("discrete_values")) {
                enc.discrete_values_[i] = jc.at("discrete_values").get<std::vector<double>>();
            } else {
                VgmColumnModel m;
                m.column = c.name;
                for (const auto& jcomp : jc.at("vgm").at("components"))
                    m.components.push_back({jcomp.at("weight").get<double>(), jcomp.at("mean").get<double>(),
                                            jcomp.at("std").get<double>()});
                m.active = jc.at("vgm").at("active").get<std::vector<int>>();
                enc.vgm_[i] = std::move(m);
            }
        }
        cols.push_back(c);
    }
    enc.schema_ = Schema(std::move(cols));
    enc.build_layout();
    return enc;
}

// ---------------------------------------------------------------------------
// ConditionSampler
// ---------------------------------------------------------------------------

void ConditionSampler::init_weights(const RowEncoder& encoder, FrequencyMode mode) {
    for (const auto& slot : encoder.cond_slots()) {
        slots_.push_back({slot.column, slot.offset});
        const auto& counts = encoder.level_counts_for(slot.column);
        std::vector<double> w(counts.size());
        for (size_t l = 0; l < counts.size(); ++l) {
            w[l] = mode == FrequencyMode::true_frequency
                       ? static_cast<double>(counts[l])
                       : std::log1p(static_cast<double>(counts[l]));
        }
        weights_.push_back(std::move(w));
    }
}

ConditionSampler::ConditionSampler(const RowEncoder& encoder, const Table& table, FrequencyMode mode) {
    init_weights(encoder, mode);
    rows_.resize(slots_.size());
    for (size_t s = 0; s < slots_.size(); ++s) {
        const auto& col = table.categorical(slots_[s].column);
        rows_[s].resize(weights_[s].size());
        for (size_t i = 0; i < col.size(); ++i) rows_[s][static_cast<size_t>(col[i])].push_back(i);
    }
    has_rows_ = true;
}

ConditionSampler::ConditionSampler(const RowEncoder& encoder, FrequencyMode mode) {
    init_weights(encoder, mode);
}

std::optional<ConditionVector> ConditionSampler::sample(RandomStream& rng) const {
    if (slots_.empty()) return std::nullopt;
    const size_t s = slots_.size() == 1 ? 0 : static_cast<size_t>(rng.below(slots_.size()));
    const size_t level = rng.categorical(weights_[s]);
    return ConditionVector{slots_[s].column, static_cast<int32_t>(level), slots_[s].cond_offset + level};
}

size_t ConditionSampler::match_count(const ConditionVector& cv) const {
    if (!has_rows_) throw validation_error("ConditionSampler: built without row lists");
    for (size_t s = 0; s < slots_.size(); ++s)
        if (slots_[s].column == cv.column) return rows_[s][static_cast<size_t>(cv.level)].size();
    throw validation_error("ConditionSampler: condition references unknown column");
}

ConditionVector ConditionSampler::sample_matched(RandomStream& rng) {
    if (slots_.empty()) throw validation_error("ConditionSampler: no categorical columns");
    for (;;) {
        auto cv = sample(rng);
        if (match_count(*cv) > 0) return *cv;
        ++resampled_;  // level with zero rows: draw a fresh condition
    }
}

size_t ConditionSampler::matching_row(const ConditionVector& cv, RandomStream& rng) const {
    if (!has_rows_) throw validation_error("ConditionSampler: built without row lists");
    for (size_t s = 0; s < slots_.size(); ++s) {
        if (slots_[s].column == cv.column) {
            const auto& ids = rows_[s][static_cast<size_t>(cv.level)];
            if (ids.empty()) throw runtime_failure("ConditionSampler: empty match set");
            return ids[ids.size() == 1 ? 0 : static_cast<size_t>(rng.below(ids.size()))];
        }
    }
    throw validation_error("ConditionSampler: condition references unknown column");
}

}  // namespace synthdata
