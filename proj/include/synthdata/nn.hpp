#pragma once

#include <string>
#include <vector>

#include "synthdata/rng.hpp"
#include "synthdata/tensor.hpp"

namespace synthdata::nn {

using ad::Mat;
using ad::Tape;

struct ParameterSet {
    std::vector<std::string> names;
    std::vector<Mat> values;

    // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init
    int add(const std::string& name, Eigen::Index rows, Eigen::Index cols, RandomStream& rng);
    int add_zero(const std::string& name, Eigen::Index rows, Eigen::Index cols);
    size_t count() const { return values.size(); }
    size_t scalar_count() const;
};

// Pushes every parameter as a tape leaf; returns node ids in parameter order.
std::vector<int> push_params(Tape& tape, const ParameterSet& params, bool requires_grad);

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.9;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct AdamState {
    std::vector<Mat> m;
    std::vector<Mat> v;
    long t = 0;

    void init(const ParameterSet& params);
};

// Standard Adam with bias correction; weight decay added to the gradient
// (L2 style). Empty gradients are treated as zero.
void adam_step(ParameterSet& params, const std::vector<Mat>& grads, AdamState& state,
               const AdamConfig& cfg);

// Generator: hidden relu layers with residual concatenation
// (x <- concat(relu(W x + b), x)), then an affine head producing the
// pre-activation encoded row. Output activations (tanh / gumbel-softmax per
// segment) are applied by the caller, which owns the encoded-row layout.
struct GeneratorNet {
    int input_dim = 0;
    int output_dim = 0;
    std::vector<int> hidden;
    ParameterSet params;

    GeneratorNet() = default;
    GeneratorNet(int input_dim, std::vector<int> hidden, int output_dim, RandomStream& rng);

    // param_nodes: from push_params over `params`
    int forward_tape(Tape& tape, int input, const std::vector<int>& param_nodes) const;
    Mat forward_eval(const Mat& input) const;
};

// Critic: hidden leaky-relu layers with dropout, affine head to one score per
// (packed) input row.
struct CriticNet {
    int input_dim = 0;
    std::vector<int> hidden;
    double leaky_slope = 0.2;
    double dropout = 0.5;
    ParameterSet params;

    CriticNet() = default;
    CriticNet(int input_dim, std::vector<int> hidden, double leaky_slope, double dropout,
              RandomStream& rng);

    // train=true applies fresh dropout masks drawn from rng (inverted dropout).
    int forward_tape(Tape& tape, int input, const std::vector<int>& param_nodes, bool train,
                     RandomStream& rng) const;
    Mat forward_eval(const Mat& input) const;
};

}  // namespace synthdata::nn
