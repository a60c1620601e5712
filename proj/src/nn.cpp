#include "synthdata/nn.hpp"

#include <cmath>

namespace synthdata::nn {

int ParameterSet::add(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                      RandomStream& rng) {
    const double k = 1.0 / std::sqrt(static_cast<double>(rows));
    Mat w(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = rng.uniform(-k, k);
    names.push_back(name);
    values.push_back(std::move(w));
    return static_cast<int>(values.size()) - 1;
}

int ParameterSet::add_zero(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    names.push_back(name);
    values.push_back(Mat::Zero(rows, cols));
    return static_cast<int>(values.size()) - 1;
}

size_t ParameterSet::scalar_count() const {
    size_t n = 0;
    for (const auto& v : values) n += static_cast<size_t>(v.size());
    return n;
}

std::vector<int> push_params(Tape& tape, const ParameterSet& params, bool requires_grad) {
    std::vector<int> ids;
    ids.reserve(params.values.size());
    for (const auto& v : params.values) ids.push_back(tape.leaf(v, requires_grad));
    return ids;
}

void AdamState::init(const ParameterSet& params) {
    m.clear();
    v.clear();
    for (const auto& p : params.values) {
        m.push_back(Mat::Zero(p.rows(), p.cols()));
        v.push_back(Mat::Zero(p.rows(), p.cols()));
    }
    t = 0;
}

void adam_step(ParameterSet& params, const std::vector<Mat>& grads, AdamState& state,
               const AdamConfig& cfg) {
    if (grads.size() != params.values.size())
        throw validation_error("adam_step: gradient count mismatch");
    if (state.m.size() != params.values.size()) state.init(params);
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < params.values.size(); ++i) {
        Mat& p = params.values[i];
        Mat g = grads[i].size() == 0 ? Mat::Zero(p.rows(), p.cols()) : grads[i];
        if (cfg.weight_decay != 0.0) g += cfg.weight_decay * p;
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        const Mat mhat = state.m[i] / bc1;
        const Mat vhat = state.v[i] / bc2;
        p.array() -= cfg.lr * mhat.array() / (vhat.array().sqrt() + cfg.eps);
    }
}

// ---------------------------------------------------------------------------
// GeneratorNet
// ---------------------------------------------------------------------------

GeneratorNet::GeneratorNet(int input_dim_, std::vector<int> hidden_, int output_dim_,
                           RandomStream& rng)
    : input_dim(input_dim_), output_dim(output_dim_), hidden(std::move(hidden_)) {
    int w = input_dim;
    for (size_t i = 0; i < hidden.size(); ++i) {
        params.add("gen.fc" + std::to_string(i) + ".W", w, hidden[i], rng);
        params.add("gen.fc" + std::to_string(i) + ".b", 1, hidden[i], rng);
        w += hidden[i];  // residual concatenation widens the stream
    }
    params.add("gen.head.W", w, output_dim, rng);
    params.add("gen.head.b", 1, output_dim, rng);
}

int GeneratorNet::forward_tape(Tape& tape, int input, const std::vector<int>& param_nodes) const {
    int x = input;
    size_t p = 0;
    for (size_t i = 0; i < hidden.size(); ++i) {
        int W = param_nodes[p++];
        int b = param_nodes[p++];
        int h = tape.relu(tape.add_rowvec(tape.matmul(x, W), b));
        x = tape.concat_cols(h, x);
    }
    int W = param_nodes[p++];
    int b = param_nodes[p++];
    return tape.add_rowvec(tape.matmul(x, W), b);
}

Mat GeneratorNet::forward_eval(const Mat& input) const {
    Mat x = input;
    size_t p = 0;
    for (size_t i = 0; i < hidden.size(); ++i) {
        const Mat& W = params.values[p++];
        const Mat& b = params.values[p++];
        Mat h = (x * W).rowwise() + b.row(0);
        h = h.cwiseMax(0.0);
        Mat next(x.rows(), h.cols() + x.cols());
        next << h, x;
        x = std::move(next);
    }
    const Mat& W = params.values[p++];
    const Mat& b = params.values[p++];
    return (x * W).rowwise() + b.row(0);
}

// ---------------------------------------------------------------------------
// CriticNet
// ---------------------------------------------------------------------------

CriticNet::CriticNet(int input_dim_, std::vector<int> hidden_, double leaky_slope_, double dropout_,
                     RandomStream& rng)
    : input_dim(input_dim_), hidden(std::move(hidden_)), leaky_slope(leaky_slope_),
      dropout(dropout_) {
    int w = input_dim;
    for (size_t i = 0; i < hidden.size(); ++i) {
        params.add("critic.fc" + std::to_string(i) + ".W", w, hidden[i], rng);
        params.add("critic.fc" + std::to_string(i) + ".b", 1, hidden[i], rng);
        w = hidden[i];
    }
    params.add("critic.head.W", w, 1, rng);
    params.add("critic.head.b", 1, 1, rng);
}

int CriticNet::forward_tape(Tape& tape, int input, const std::vector<int>& param_nodes, bool train,
                            RandomStream& rng) const {
    int x = input;
    size_t p = 0;
    for (size_t i = 0; i < hidden.size(); ++i) {
        int W = param_nodes[p++];
        int b = param_nodes[p++];
        x = tape.leaky_relu(tape.add_rowvec(tape.matmul(x, W), b), leaky_slope);
        if (train && dropout > 0.0) {
            const Mat& v = tape.value(x);
            const double keep = 1.0 - dropout;
            Mat mask(v.rows(), v.cols());
            for (Eigen::Index r = 0; r < v.rows(); ++r)
                for (Eigen::Index c = 0; c < v.cols(); ++c)
                    mask(r, c) = rng.uniform() < keep ? 1.0 / keep : 0.0;
            x = tape.mul_mask(x, std::move(mask));
        }
    }
    int W = param_nodes[p++];
    int b = param_nodes[p++];
    return tape.add_rowvec(tape.matmul(x, W), b);
}

Mat CriticNet::forward_eval(const Mat& input) const {
    Mat x = input;
    size_t p = 0;
    for (size_t i = 0; i < hidden.size(); ++i) {
        const Mat& W = params.values[p++];
        const Mat& b = params.values[p++];
        Mat h = (x * W).rowwise() + b.row(0);
        x = h.unaryExpr([s = leaky_slope](double v) { return v > 0.0 ? v : s * v; });
    }
    const Mat& W = params.values[p++];
    const Mat& b = params.values[p++];
    return (x * W).rowwise() + b.row(0);
}

}  // namespace synthdata::nn
