#pragma once

#include <vector>

#include <Eigen/Dense>

#include "synthdata/errors.hpp"

namespace synthdata::ad {

using Mat = Eigen::MatrixXd;

enum class Op {
    leaf,
    add,
    sub,
    mul,
    div,
    scale,
    add_scalar,
    matmul,
    transpose,
    relu,
    leaky_relu,
    tanh_fn,
    exp_fn,
    log_fn,
    sqrt_fn,
    row_sum,
    col_sum,
    bcast_cols,
    bcast_rows,
    concat_cols,
    slice_cols,
    pad_cols,
    mul_mask,
    add_const,
    pack_rows,
    unpack_rows,
};

struct Node {
    Op op = Op::leaf;
    int a = -1;
    int b = -1;
    double c = 0.0;      // scalar for scale/add_scalar, slope for leaky_relu
    int i0 = 0, i1 = 0;  // slice/pad/pack parameters
    Mat value;
    Mat aux;             // constant mask / additive constant
    bool requires_grad = false;
};

// Recorded operation graph over dense matrices. The reverse sweep emits its
// adjoint computations as ordinary nodes on the same tape, so gradients are
// themselves differentiable (double backprop for the gradient penalty).
// All values are 2-D; vectors are n x 1 or 1 x m, scalars 1 x 1.
class Tape {
public:
    int leaf(Mat value, bool requires_grad);
    int constant(Mat value) { return leaf(std::move(value), false); }

    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);  // elementwise
    int div(int a, int b);  // elementwise
    int scale(int a, double c);
    int add_scalar(int a, double c);
    int matmul(int a, int b);
    int transpose(int a);
    int relu(int a);
    int leaky_relu(int a, double slope);
    int tanh_fn(int a);
    int exp_fn(int a);
    int log_fn(int a);
    int sqrt_fn(int a);
    int row_sum(int a);                    // n x m -> n x 1
    int col_sum(int a);                    // n x m -> 1 x m
    int bcast_cols(int a, Eigen::Index m); // n x 1 -> n x m
    int bcast_rows(int a, Eigen::Index n); // 1 x m -> n x m
    int concat_cols(int a, int b);
    int slice_cols(int a, Eigen::Index from, Eigen::Index to);
    int pad_cols(int a, Eigen::Index offset, Eigen::Index total);
    int mul_mask(int a, Mat mask);   // elementwise by a constant matrix
    int add_const(int a, Mat c);     // add a constant matrix
    int pack_rows(int a, int pac);   // n x m -> n/pac x pac*m, rows side by side
    int unpack_rows(int a, int pac); // inverse of pack_rows

    // composites
    int softmax_rows(int a);      // numerically stable; exact shift invariance
    int log_softmax_rows(int a);
    int sum_all(int a);           // -> 1 x 1
    int mean_all(int a);
    int add_rowvec(int a, int b); // a: n x m, b: 1 x m

    const Mat& value(int id) const { return nodes_.at(static_cast<size_t>(id)).value; }
    bool requires_grad(int id) const { return nodes_.at(static_cast<size_t>(id)).requires_grad; }
    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }
    void reserve(size_t n) { nodes_.reserve(n); }

    // Reverse sweep from a scalar root; returns one gradient node id per
    // requested node (-1 when the root does not depend on it). The returned
    // nodes can feed further tape ops, including another grad() call.
    std::vector<int> grad(int root, const std::vector<int>& wrt);

private:
    std::vector<Node> nodes_;

    int push(Node n);
    const Node& at(int id) const { return nodes_.at(static_cast<size_t>(id)); }
    void check(int id) const;
};

}  // namespace synthdata::ad
