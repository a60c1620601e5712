#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "synthdata/rng.hpp"
#include "synthdata/table.hpp"
#include "synthdata/vgm.hpp"

namespace synthdata {

enum class FrequencyMode { true_frequency, log_frequency };

FrequencyMode frequency_mode_from_string(const std::string& s);
std::string to_string(FrequencyMode m);

struct EncoderOptions {
    VgmOptions vgm;
    // >0: continuous columns with at most this many distinct values are
    // encoded as a plain one-hot over those values instead of a VGM.
    size_t low_cardinality_threshold = 0;
};

enum class SegmentKind { continuous_vgm, discrete_numeric, categorical };

// One column's slice of the encoded row. continuous_vgm: scalar alpha followed
// by a one-hot over active modes; the other kinds are a single one-hot.
struct Segment {
    SegmentKind kind = SegmentKind::categorical;
    size_t column = 0;  // schema index
    size_t offset = 0;
    size_t width = 0;
};

// (alpha, mode) pair produced for one continuous cell.
struct EncodedContinuous {
    double alpha = 0.0;
    size_t mode = 0;  // index into the model's active set
};

// Mode sampled from posterior responsibilities; alpha = (v - mean)/(4 std),
// clipped to [-1, 1].
EncodedContinuous encode_continuous(const VgmColumnModel& model, double value, RandomStream& rng);
double decode_continuous(const VgmColumnModel& model, double alpha, size_t mode);

// Selected (categorical column, level) pair. The dense form is a one-hot over
// the concatenated level sets of all categorical columns.
struct ConditionVector {
    size_t column = 0;   // schema index
    int32_t level = 0;   // level index within that column
    size_t offset = 0;   // position of the 1 in the dense form
};

// Fitted per-column encoders plus the encoded-row and condition layouts.
class RowEncoder {
public:
    RowEncoder() = default;

    static RowEncoder fit(const Table& table, const EncoderOptions& options, uint64_t seed);

    const Schema& schema() const { return schema_; }
    size_t width() const { return width_; }
    size_t cond_width() const { return cond_width_; }
    const std::vector<Segment>& segments() const { return segments_; }
    const Segment& segment_for(size_t column) const;
    const VgmColumnModel& vgm_for(size_t column) const;
    const std::vector<double>& discrete_values_for(size_t column) const;
    const std::vector<size_t>& level_counts_for(size_t column) const;

    struct CondSlot {
        size_t column = 0;  // schema index
        size_t offset = 0;  // start within the condition vector
        size_t width = 0;   // number of levels
    };
    const std::vector<CondSlot>& cond_slots() const { return cond_slots_; }

    void encode_row_into(const Table& t, size_t row, RandomStream& rng, double* out) const;
    std::vector<double> encode_row(const Table& t, size_t row, RandomStream& rng) const;
    Eigen::MatrixXd encode_rows(const Table& t, const std::vector<size_t>& rows, RandomStream& rng) const;

    // Inverse of encode for one row; one-hot parts resolved by argmax.
    void decode_row(const double* enc, Table& out, size_t row) const;
    Table decode_rows(const Eigen::MatrixXd& encoded) const;

    nlohmann::json to_json() const;
    static RowEncoder from_json(const nlohmann::json& j);

private:
    Schema schema_;
    std::vector<Segment> segments_;
    std::vector<VgmColumnModel> vgm_;                  // per schema column; empty unless continuous_vgm
    std::vector<std::vector<double>> discrete_values_; // per schema column; discrete_numeric only
    std::vector<std::vector<size_t>> level_counts_;    // per schema column; categorical only
    std::vector<CondSlot> cond_slots_;
    size_t width_ = 0;
    size_t cond_width_ = 0;

    void build_layout();
};

// Training-by-sampling source: condition vectors drawn per the frequency mode
// and real rows matching a condition drawn uniformly with replacement.
class ConditionSampler {
public:
    // Build from a training table (keeps per-level row index lists).
    ConditionSampler(const RowEncoder& encoder, const Table& table, FrequencyMode mode);
    // Generation-time variant: level weights from the encoder's stored counts.
    ConditionSampler(const RowEncoder& encoder, FrequencyMode mode);

    bool unconditional() const { return slots_.empty(); }

    // nullopt iff the table has no categorical columns.
    std::optional<ConditionVector> sample(RandomStream& rng) const;

    // Condition with a nonempty match set; resamples (and counts) conditions
    // whose level has no rows. Requires row lists.
    ConditionVector sample_matched(RandomStream& rng);
    size_t matching_row(const ConditionVector& cv, RandomStream& rng) const;
    size_t match_count(const ConditionVector& cv) const;

    size_t resampled_conditions() const { return resampled_; }
    const std::vector<double>& level_weights(size_t slot) const { return weights_.at(slot); }

private:
    struct Slot {
        size_t column;
        size_t cond_offset;
    };
    std::vector<Slot> slots_;
    std::vector<std::vector<double>> weights_;               // per slot, per level
    std::vector<std::vector<std::vector<size_t>>> rows_;     // per slot, per level: row ids
    size_t resampled_ = 0;
    bool has_rows_ = false;

    void init_weights(const RowEncoder& encoder, FrequencyMode mode);
};

}  // namespace synthdata
