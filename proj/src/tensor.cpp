#include "synthdata/tensor.hpp"

#include <string>

namespace synthdata::ad {

namespace {

std::string shape_str(const Mat& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

void Tape::check(int id) const {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
        throw validation_error("tape: invalid node id " + std::to_string(id));
}

int Tape::push(Node n) {
    if (n.a >= 0 && at(n.a).requires_grad) n.requires_grad = true;
    if (n.b >= 0 && at(n.b).requires_grad) n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Mat value, bool requires_grad) {
    Node n;
    n.op = Op::leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::add(int a, int b) {
    check(a);
    check(b);
    if (at(a).value.rows() != at(b).value.rows() || at(a).value.cols() != at(b).value.cols())
        throw validation_error("tape add: shape mismatch " + shape_str(at(a).value) + " vs " +
                               shape_str(at(b).value));
    Node n;
    n.op = Op::add;
    n.a = a;
    n.b = b;
    n.value = at(a).value + at(b).value;
    return push(std::move(n));
}

int Tape::sub(int a, int b) {
    check(a);
    check(b);
    if (at(a).value.rows() != at(b).value.rows() || at(a).value.cols() != at(b).value.cols())
        throw validation_error("tape sub: shape mismatch");
    Node n;
    n.op = Op::sub;
    n.a = a;
    n.b = b;
    n.value = at(a).value - at(b).value;
    return push(std::move(n));
}

int Tape::mul(int a, int b) {
    check(a);
    check(b);
    if (at(a).value.rows() != at(b).value.rows() || at(a).value.cols() != at(b).value.cols())
        throw validation_error("tape mul: shape mismatch");
    Node n;
    n.op = Op::mul;
    n.a = a;
    n.b = b;
    n.value = at(a).value.cwiseProduct(at(b).value);
    return push(std::move(n));
}

int Tape::div(int a, int b) {
    check(a);
    check(b);
    if (at(a).value.rows() != at(b).value.rows() || at(a).value.cols() != at(b).value.cols())
        throw validation_error("tape div: shape mismatch");
    Node n;
    n.op = Op::div;
    n.a = a;
    n.b = b;
    n.value = at(a).value.cwiseQuotient(at(b).value);
    return push(std::move(n));
}

int Tape::scale(int a, double c) {
    check(a);
    Node n;
    n.op = Op::scale;
    n.a = a;
    n.c = c;
    n.value = at(a).value * c;
    return push(std::move(n));
}

int Tape::add_scalar(int a, double c) {
    check(a);
    Node n;
    n.op = Op::add_scalar;
    n.a = a;
    n.c = c;
    n.value = at(a).value.array() + c;
    return push(std::move(n));
}

int Tape::matmul(int a, int b) {
    check(a);
    check(b);
    if (at(a).value.cols() != at(b).value.rows())
        throw validation_error("tape matmul: inner dimension mismatch " + shape_str(at(a).value) +
                               " * " + shape_str(at(b).value));
    Node n;
    n.op = Op::matmul;
    n.a = a;
    n.b = b;
    n.value.noalias() = at(a).value * at(b).value;
    return push(std::move(n));
}

int Tape::transpose(int a) {
    check(a);
    Node n;
    n.op = Op::transpose;
    n.a = a;
    n.value = at(a).value.transpose();
    return push(std::move(n));
}

int Tape::relu(int a) {
    check(a);
    Node n;
    n.op = Op::relu;
    n.a = a;
    n.value = at(a).value.cwiseMax(0.0);
    return push(std::move(n));
}

int Tape::leaky_relu(int a, double slope) {
    check(a);
    Node n;
    n.op = Op::leaky_relu;
    n.a = a;
    n.c = slope;
    n.value = at(a).value.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
    return push(std::move(n));
}

int Tape::tanh_fn(int a) {
    check(a);
    Node n;
    n.op = Op::tanh_fn;
    n.a = a;
    n.value = at(a).value.array().tanh();
    return push(std::move(n));
}

int Tape::exp_fn(int a) {
    check(a);
    Node n;
    n.op = Op::exp_fn;
    n.a = a;
    n.value = at(a).value.array().exp();
    return push(std::move(n));
}

int Tape::log_fn(int a) {
    check(a);
    Node n;
    n.op = Op::log_fn;
    n.a = a;
    n.value = at(a).value.array().log();
    return push(std::move(n));
}

int Tape::sqrt_fn(int a) {
    check(a);
    Node n;
    n.op = Op::sqrt_fn;
    n.a = a;
    n.value = at(a).value.array().sqrt();
    return push(std::move(n));
}

int Tape::row_sum(int a) {
    check(a);
    Node n;
    n.op = Op::row_sum;
    n.a = a;
    n.value = at(a).value.rowwise().sum();
    return push(std::move(n));
}

int Tape::col_sum(int a) {
    check(a);
    Node n;
    n.op = Op::col_sum;
    n.a = a;
    n.value = at(a).value.colwise().sum();
    return push(std::move(n));
}

int Tape::bcast_cols(int a, Eigen::Index m) {
    check(a);
    if (at(a).value.cols() != 1) throw validation_error("tape bcast_cols: input must be n x 1");
    Node n;
    n.op = Op::bcast_cols;
    n.a = a;
    n.i0 = static_cast<int>(m);
    n.value = at(a).value.replicate(1, m);
    return push(std::move(n));
}

int Tape::bcast_rows(int a, Eigen::Index r) {
    check(a);
    if (at(a).value.rows() != 1) throw validation_error("tape bcast_rows: input must be 1 x m");
    Node n;
    n.op = Op::bcast_rows;
    n.a = a;
    n.i0 = static_cast<int>(r);
    n.value = at(a).value.replicate(r, 1);
    return push(std::move(n));
}

int Tape::concat_cols(int a, int b) {
    check(a);
    check(b);
    if (at(a).value.rows() != at(b).value.rows())
        throw validation_error("tape concat_cols: row mismatch");
    Node n;
    n.op = Op::concat_cols;
    n.a = a;
    n.b = b;
    n.value.resize(at(a).value.rows(), at(a).value.cols() + at(b).value.cols());
    n.value << at(a).value, at(b).value;
    return push(std::move(n));
}

int Tape::slice_cols(int a, Eigen::Index from, Eigen::Index to) {
    check(a);
    if (from < 0 || to > at(a).value.cols() || from >= to)
        throw validation_error("tape slice_cols: bad range");
    Node n;
    n.op = Op::slice_cols;
    n.a = a;
    n.i0 = static_cast<int>(from);
    n.i1 = static_cast<int>(to);
    n.value = at(a).value.middleCols(from, to - from);
    return push(std::move(n));
}

int Tape::pad_cols(int a, Eigen::Index offset, Eigen::Index total) {
    check(a);
    if (offset < 0 || offset + at(a).value.cols() > total)
        throw validation_error("tape pad_cols: bad range");
    Node n;
    n.op = Op::pad_cols;
    n.a = a;
    n.i0 = static_cast<int>(offset);
    n.i1 = static_cast<int>(total);
    n.value = Mat::Zero(at(a).value.rows(), total);
    n.value.middleCols(offset, at(a).value.cols()) = at(a).value;
    return push(std::move(n));
}

int Tape::mul_mask(int a, Mat mask) {
    check(a);
    if (mask.rows() != at(a).value.rows() || mask.cols() != at(a).value.cols())
        throw validation_error("tape mul_mask: shape mismatch");
    Node n;
    n.op = Op::mul_mask;
    n.a = a;
    n.value = at(a).value.cwiseProduct(mask);
    n.aux = std::move(mask);
    return push(std::move(n));
}

int Tape::add_const(int a, Mat cmat) {
    check(a);
    if (cmat.rows() != at(a).value.rows() || cmat.cols() != at(a).value.cols())
        throw validation_error("tape add_const: shape mismatch");
    Node n;
    n.op = Op::add_const;
    n.a = a;
    n.value = at(a).value + cmat;
    n.aux = std::move(cmat);
    return push(std::move(n));
}

int Tape::pack_rows(int a, int pac) {
    check(a);
    const Mat& v = at(a).value;
    if (pac <= 0 || v.rows() % pac != 0)
        throw validation_error("tape pack_rows: rows not divisible by pac");
    Node n;
    n.op = Op::pack_rows;
    n.a = a;
    n.i0 = pac;
    const Eigen::Index groups = v.rows() / pac;
    const Eigen::Index m = v.cols();
    n.value.resize(groups, static_cast<Eigen::Index>(pac) * m);
    for (Eigen::Index g = 0; g < groups; ++g)
        for (int q = 0; q < pac; ++q)
            n.value.block(g, static_cast<Eigen::Index>(q) * m, 1, m) = v.row(g * pac + q);
    return push(std::move(n));
}

int Tape::unpack_rows(int a, int pac) {
    check(a);
    const Mat& v = at(a).value;
    if (pac <= 0 || v.cols() % pac != 0)
        throw validation_error("tape unpack_rows: cols not divisible by pac");
    Node n;
    n.op = Op::unpack_rows;
    n.a = a;
    n.i0 = pac;
    const Eigen::Index m = v.cols() / pac;
    n.value.resize(v.rows() * pac, m);
    for (Eigen::Index g = 0; g < v.rows(); ++g)
        for (int q = 0; q < pac; ++q)
            n.value.row(g * pac + q) = v.block(g, static_cast<Eigen::Index>(q) * m, 1, m);
    return push(std::move(n));
}

// softmax(x) is shift invariant, so subtracting the per-row max as a constant
// leaves values and derivatives of every order unchanged while keeping exp in
// range.
int Tape::softmax_rows(int a) {
    check(a);
    const Mat& v = at(a).value;
    Mat shift = (-v.rowwise().maxCoeff()).replicate(1, v.cols());
    int z = add_const(a, std::move(shift));
    int e = exp_fn(z);
    int s = row_sum(e);
    return div(e, bcast_cols(s, v.cols()));
}

int Tape::log_softmax_rows(int a) {
    check(a);
    const Mat& v = at(a).value;
    Mat shift = (-v.rowwise().maxCoeff()).replicate(1, v.cols());
    int z = add_const(a, std::move(shift));
    int lse = log_fn(row_sum(exp_fn(z)));
    return sub(z, bcast_cols(lse, v.cols()));
}

int Tape::sum_all(int a) {
    check(a);
    return col_sum(row_sum(a));
}

int Tape::mean_all(int a) {
    check(a);
    const Mat& v = at(a).value;
    return scale(sum_all(a), 1.0 / static_cast<double>(v.rows() * v.cols()));
}

int Tape::add_rowvec(int a, int b) {
    check(a);
    check(b);
    return add(a, bcast_rows(b, at(a).value.rows()));
}

std::vector<int> Tape::grad(int root, const std::vector<int>& wrt) {
    check(root);
    if (at(root).value.rows() != 1 || at(root).value.cols() != 1)
        throw validation_error("tape grad: root must be scalar (1x1)");

    const int snapshot = root;  // nodes appended by this sweep are never revisited
    std::vector<int> adj(static_cast<size_t>(snapshot) + 1, -1);
    adj[static_cast<size_t>(root)] = constant(Mat::Ones(1, 1));

    auto accumulate = [&](int target, int contribution) {
        if (target > snapshot) throw validation_error("tape grad: adjoint into future node");
        int& slot = adj[static_cast<size_t>(target)];
        slot = slot < 0 ? contribution : add(slot, contribution);
    };

    for (int id = snapshot; id >= 0; --id) {
        const int g = adj[static_cast<size_t>(id)];
        if (g < 0) continue;
        // copy fields: pushing nodes may reallocate the vector
        const Op op = at(id).op;
        const int ia = at(id).a;
        const int ib = at(id).b;
        const double c = at(id).c;
        const int i0 = at(id).i0;
        const int i1 = at(id).i1;
        const bool need_a = ia >= 0 && at(ia).requires_grad;
        const bool need_b = ib >= 0 && at(ib).requires_grad;
        if (!need_a && !need_b) continue;

        switch (op) {
            case Op::leaf:
                break;
            case Op::add:
                if (need_a) accumulate(ia, g);
                if (need_b) accumulate(ib, g);
                break;
            case Op::sub:
                if (need_a) accumulate(ia, g);
                if (need_b) accumulate(ib, scale(g, -1.0));
                break;
            case Op::mul:
                if (need_a) accumulate(ia, mul(g, ib));
                if (need_b) accumulate(ib, mul(g, ia));
                break;
            case Op::div:
                if (need_a) accumulate(ia, div(g, ib));
                if (need_b) accumulate(ib, scale(div(mul(g, id), ib), -1.0));
                break;
            case Op::scale:
                if (need_a) accumulate(ia, scale(g, c));
                break;
            case Op::add_scalar:
                if (need_a) accumulate(ia, g);
                break;
            case Op::matmul:
                if (need_a) accumulate(ia, matmul(g, transpose(ib)));
                if (need_b) accumulate(ib, matmul(transpose(ia), g));
                break;
            case Op::transpose:
                if (need_a) accumulate(ia, transpose(g));
                break;
            case Op::relu:
                if (need_a) {
                    // heaviside of the forward input; second derivative 0 a.e.
                    Mat mask = at(ia).value.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
                    accumulate(ia, mul_mask(g, std::move(mask)));
                }
                break;
            case Op::leaky_relu:
                if (need_a) {
                    Mat mask = at(ia).value.unaryExpr([c](double v) { return v > 0.0 ? 1.0 : c; });
                    accumulate(ia, mul_mask(g, std::move(mask)));
                }
                break;
            case Op::tanh_fn:
                if (need_a) accumulate(ia, sub(g, mul(g, mul(id, id))));
                break;
            case Op::exp_fn:
                if (need_a) accumulate(ia, mul(g, id));
                break;
            case Op::log_fn:
                if (need_a) accumulate(ia, div(g, ia));
                break;
            case Op::sqrt_fn:
                if (need_a) accumulate(ia, scale(div(g, id), 0.5));
                break;
            case Op::row_sum:
                if (need_a) accumulate(ia, bcast_cols(g, at(ia).value.cols()));
                break;
            case Op::col_sum:
                if (need_a) accumulate(ia, bcast_rows(g, at(ia).value.rows()));
                break;
            case Op::bcast_cols:
                if (need_a) accumulate(ia, row_sum(g));
                break;
            case Op::bcast_rows:
                if (need_a) accumulate(ia, col_sum(g));
                break;
            case Op::concat_cols:
                if (need_a) accumulate(ia, slice_cols(g, 0, at(ia).value.cols()));
                if (need_b)
                    accumulate(ib, slice_cols(g, at(ia).value.cols(),
                                              at(ia).value.cols() + at(ib).value.cols()));
                break;
            case Op::slice_cols:
                if (need_a) accumulate(ia, pad_cols(g, i0, at(ia).value.cols()));
                break;
            case Op::pad_cols:
                if (need_a) accumulate(ia, slice_cols(g, i0, i0 + at(ia).value.cols()));
                break;
            case Op::mul_mask:
                if (need_a) accumulate(ia, mul_mask(g, at(id).aux));
                break;
            case Op::add_const:
                if (need_a) accumulate(ia, g);
                break;
            case Op::pack_rows:
                if (need_a) accumulate(ia, unpack_rows(g, i0));
                break;
            case Op::unpack_rows:
                if (need_a) accumulate(ia, pack_rows(g, i0));
                break;
        }
        (void)i1;
    }

    std::vector<int> out(wrt.size(), -1);
    for (size_t i = 0; i < wrt.size(); ++i) {
        check(wrt[i]);
        if (wrt[i] <= snapshot) out[i] = adj[static_cast<size_t>(wrt[i])];
    }
    return out;
}

}  // namespace synthdata::ad
