#include "lba/autograd.hpp"

#include <memory>

#include "lba/kernels.hpp"

namespace lba {

Tape::Node& Tape::node(Var v) {
    require(v.valid() && v.id < static_cast<int>(nodes_.size()), "Tape: invalid var");
    return nodes_[static_cast<std::size_t>(v.id)];
}

const Tape::Node& Tape::node(Var v) const {
    require(v.valid() && v.id < static_cast<int>(nodes_.size()), "Tape: invalid var");
    return nodes_[static_cast<std::size_t>(v.id)];
}

Var Tape::leaf(Tensor v) { return push(Value(std::move(v)), nullptr); }
Var Tape::leaf(Matrix3 v) { return push(Value(std::move(v)), nullptr); }

Var Tape::param(ParamStore& ps, const std::string& name) {
    Var v = leaf(ps.value(name));
    bindings_.push_back({v.id, &ps, name});
    return v;
}

Var Tape::push(Value v, BackFn back) {
    Node n;
    n.value = std::move(v);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::tensor(Var v) const {
    const Node& n = node(v);
    require(std::holds_alternative<Tensor>(n.value), "Tape: var is not a rank-4 tensor");
    return std::get<Tensor>(n.value);
}

const Matrix3& Tape::matrix(Var v) const {
    const Node& n = node(v);
    require(std::holds_alternative<Matrix3>(n.value), "Tape: var is not a Matrix3");
    return std::get<Matrix3>(n.value);
}

const Tensor& Tape::grad_tensor(Var v) const {
    const Node& n = node(v);
    require(n.has_grad, "Tape: gradient not populated (backward not run or node off-path)");
    return std::get<Tensor>(n.grad);
}

const Matrix3& Tape::grad_matrix(Var v) const {
    const Node& n = node(v);
    require(n.has_grad, "Tape: gradient not populated (backward not run or node off-path)");
    return std::get<Matrix3>(n.grad);
}

void Tape::accum_grad(Var v, const Tensor& g) {
    Node& n = node(v);
    if (!n.has_grad) {
        n.grad = Value(g);
        n.has_grad = true;
        return;
    }
    Tensor& dst = std::get<Tensor>(n.grad);
    require(dst.shape() == g.shape(), "Tape: gradient shape mismatch");
    kernels::active().add(dst.data(), dst.data(), g.data(), static_cast<std::size_t>(g.numel()));
}

void Tape::accum_grad(Var v, const Matrix3& g) {
    Node& n = node(v);
    if (!n.has_grad) {
        n.grad = Value(g);
        n.has_grad = true;
        return;
    }
    Matrix3& dst = std::get<Matrix3>(n.grad);
    require(dst.shape() == g.shape(), "Tape: gradient shape mismatch");
    kernels::active().add(dst.data(), dst.data(), g.data(), static_cast<std::size_t>(g.numel()));
}

void Tape::backward(Var root, double seed, std::vector<int>* visit_log) {
    require(!nodes_.empty(), "Tape::backward: no forward pass recorded");
    require(!ran_backward_, "Tape::backward: tape already replayed");
    const Tensor& rv = tensor(root);
    require(rv.numel() == 1, "Tape::backward: root is not a scalar");
    ran_backward_ = true;

    accum_grad(root, Tensor::scalar(seed));
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.back) continue;
        if (visit_log != nullptr) visit_log->push_back(id);
        if (!n.has_grad) continue; // off the path to the root
        n.back(*this, id);
    }
}

void Tape::write_param_grads() {
    for (const ParamBinding& b : bindings_) {
        const Node& n = nodes_[static_cast<std::size_t>(b.node)];
        if (!n.has_grad) continue;
        const Tensor& g = std::get<Tensor>(n.grad);
        Tensor& dst = b.store->grad(b.name);
        kernels::active().add(dst.data(), dst.data(), g.data(), static_cast<std::size_t>(g.numel()));
    }
}

namespace ad {

Var conv2d(Tape& t, Var x, Var kernel, Var bias, int stride, PadMode pad) {
    Tensor out = ops::conv2d(t.tensor(x), t.tensor(kernel), t.tensor(bias), stride, pad);
    return t.push(std::move(out), [x, kernel, bias, stride, pad](Tape& tp, int self) {
        const Tensor& g = tp.grad_tensor(Var{self});
        tp.accum_grad(x, ops::conv2d_grad_x(g, tp.tensor(x), tp.tensor(kernel), stride, pad));
        tp.accum_grad(kernel, ops::conv2d_grad_kernel(g, tp.tensor(x), tp.tensor(kernel), stride, pad));
        tp.accum_grad(bias, ops::conv2d_grad_bias(g));
    });
}

Var conv_transpose2d(Tape& t, Var x, Var kernel, Var bias, int stride) {
    Tensor out = ops::conv_transpose2d(t.tensor(x), t.tensor(kernel), t.tensor(bias), stride);
    return t.push(std::move(out), [x, kernel, bias, stride](Tape& tp, int self) {
        const Tensor& g = tp.grad_tensor(Var{self});
        tp.accum_grad(x, ops::conv_transpose2d_grad_x(g, tp.tensor(x), tp.tensor(kernel), stride));
        tp.accum_grad(kernel, ops::conv_transpose2d_grad_kernel(g, tp.tensor(x), tp.tensor(kernel), stride));
        tp.accum_grad(bias, ops::conv_transpose2d_grad_bias(g));
    });
}

Var fully_connected(Tape& t, Var x, Var weight, Var bias) {
    Tensor out = ops::fully_connected(t.tensor(x), t.tensor(weight), t.tensor(bias));
    return t.push(std::move(out), [x, weight, bias](Tape& tp, int self) {
        const Tensor& g = tp.grad_tensor(Var{self});
        tp.accum_grad(x, ops::fully_connected_grad_x(g, tp.tensor(weight)));
        tp.accum_grad(weight, ops::fully_connected_grad_weight(g, tp.tensor(x)));
        tp.accum_grad(bias, ops::fully_connected_grad_bias(g));
    });
}

namespace {

Var elementwise_rec(Tape& t, ops::EwOp op, Var a, Var b) {
    Tensor out = ops::elementwise(op, t.tensor(a), t.tensor(b));
    return t.push(std::move(out), [op, a, b](Tape& tp, int self) {
        const Tensor& g = tp.grad_tensor(Var{self});
        tp.accum_grad(a, ops::elementwise_grad_a(op, g, tp.tensor(a), tp.tensor(b)));
        tp.accum_grad(b, ops::elementwise_grad_b(op, g, tp.tensor(a), tp.tensor(b)));
    });
}

} // namespace

Var add(Tape& t, Var a, Var b) { return elementwise_rec(t, ops::EwOp::add, a, b); }
Var sub(Tape& t, Var a, Var b) { return elementwise_rec(t, ops::EwOp::sub, a, b); }
Var mul(Tape& t, Var a, Var b) { return elementwise_rec(t, ops::EwOp::mul, a, b); }

Var add_scalar(Tape& t, Var a, double s) {
    Tensor out = ops::add_scalar(t.tensor(a), s);
    return t.push(std::move(out), [a](Tape& tp, int self) {
        tp.accum_grad(a, tp.grad_tensor(Var{self}));
    });
}

Var sigmoid(Tape& t, Var x) {
    Tensor out = ops::sigmoid(t.tensor(x));
    return t.push(std::move(out), [x](Tape& tp, int self) {
        tp.accum_grad(x, ops::sigmoid_grad(tp.grad_tensor(Var{self}), tp.tensor(Var{self})));
    });
}

Var relu(Tape& t, Var x) {
    Tensor out = ops::relu(t.tensor(x));
    return t.push(std::move(out), [x](Tape& tp, int self) {
        tp.accum_grad(x, ops::relu_grad(tp.grad_tensor(Var{self}), tp.tensor(x)));
    });
}

Var channel_max(Tape& t, Var x) {
    Tensor out = ops::channel_max(t.tensor(x));
    return t.push(std::move(out), [x](Tape& tp, int self) {
        tp.accum_grad(x, ops::channel_max_grad(tp.grad_tensor(Var{self}), tp.tensor(x), tp.tensor(Var{self})));
    });
}

Var global_avg_pool(Tape& t, Var x) {
    Tensor out = ops::global_avg_pool(t.tensor(x));
    const Shape4 xs = t.tensor(x).shape();
    return t.push(std::move(out), [x, xs](Tape& tp, int self) {
        tp.accum_grad(x, ops::global_avg_pool_grad(tp.grad_tensor(Var{self}), xs));
    });
}

Var resize_bilinear(Tape& t, Var x, i64 oh, i64 ow) {
    Tensor out = ops::resize_bilinear(t.tensor(x), oh, ow);
    const Shape4 xs = t.tensor(x).shape();
    return t.push(std::move(out), [x, xs](Tape& tp, int self) {
        tp.accum_grad(x, ops::resize_bilinear_grad(tp.grad_tensor(Var{self}), xs));
    });
}

Var upsample_bilinear(Tape& t, Var x, i64 oh, i64 ow) {
    const Shape4 xs = t.tensor(x).shape();
    require(oh >= xs.h && ow >= xs.w, "upsample_bilinear: downscale request");
    return resize_bilinear(t, x, oh, ow);
}

Var batchnorm(Tape& t, Var x, Var gamma, Var beta, double eps) {
    auto state = std::make_shared<ops::BnState>();
    Tensor out = ops::batchnorm(t.tensor(x), t.tensor(gamma), t.tensor(beta), eps, state.get());
    return t.push(std::move(out), [x, gamma, beta, state](Tape& tp, int self) {
        const Tensor& g = tp.grad_tensor(Var{self});
        tp.accum_grad(x, ops::batchnorm_grad_x(g, tp.tensor(x), tp.tensor(gamma), *state));
        tp.accum_grad(gamma, ops::batchnorm_grad_gamma(g, tp.tensor(x), *state));
        tp.accum_grad(beta, ops::batchnorm_grad_beta(g));
    });
}

Var concat_channels(Tape& t, Var a, Var b) {
    Tensor out = ops::concat_channels(t.tensor(a), t.tensor(b));
    const i64 ca = t.tensor(a).shape().c, cb = t.tensor(b).shape().c;
    return t.push(std::move(out), [a, b, ca, cb](Tape& tp, int self) {
        auto [ga, gb] = ops::concat_channels_grad(tp.grad_tensor(Var{self}), ca, cb);
        tp.accum_grad(a, ga);
        tp.accum_grad(b, gb);
    });
}

Var sobel_magnitude(Tape& t, Var x) {
    auto state = std::make_shared<ops::SobelState>();
    Tensor out = ops::sobel_magnitude(t.tensor(x), state.get());
    return t.push(std::move(out), [x, state](Tape& tp, int self) {
        tp.accum_grad(x, ops::sobel_magnitude_grad(tp.grad_tensor(Var{self}), *state));
    });
}

Var sum_all(Tape& t, Var x) {
    Tensor out = ops::sum_all(t.tensor(x));
    const Shape4 xs = t.tensor(x).shape();
    return t.push(std::move(out), [x, xs](Tape& tp, int self) {
        tp.accum_grad(x, ops::sum_all_grad(tp.grad_tensor(Var{self}), xs));
    });
}

Var bce(Tape& t, Var pred, Var target, double eps) {
    Tensor out = ops::bce(t.tensor(pred), t.tensor(target), eps);
    return t.push(std::move(out), [pred, target, eps](Tape& tp, int self) {
        tp.accum_grad(pred, ops::bce_grad_pred(tp.grad_tensor(Var{self}), tp.tensor(pred), tp.tensor(target), eps));
    });
}

Var flatten_spatial(Tape& t, Var x) {
    Matrix3 out = ops::flatten_spatial(t.tensor(x));
    const Shape4 xs = t.tensor(x).shape();
    return t.push(std::move(out), [x, xs](Tape& tp, int self) {
        tp.accum_grad(x, ops::unflatten_spatial(tp.grad_matrix(Var{self}), xs.h, xs.w));
    });
}

Var unflatten_spatial(Tape& t, Var m, i64 h, i64 w) {
    Tensor out = ops::unflatten_spatial(t.matrix(m), h, w);
    return t.push(std::move(out), [m](Tape& tp, int self) {
        tp.accum_grad(m, ops::flatten_spatial(tp.grad_tensor(Var{self})));
    });
}

Var transpose_last(Tape& t, Var m) {
    Matrix3 out = ops::transpose_last(t.matrix(m));
    return t.push(std::move(out), [m](Tape& tp, int self) {
        tp.accum_grad(m, ops::transpose_last(tp.grad_matrix(Var{self})));
    });
}

Var softmax_lastdim(Tape& t, Var m) {
    Matrix3 out = ops::softmax_lastdim(t.matrix(m));
    return t.push(std::move(out), [m](Tape& tp, int self) {
        tp.accum_grad(m, ops::softmax_lastdim_grad(tp.grad_matrix(Var{self}), tp.matrix(Var{self})));
    });
}

Var bmm(Tape& t, Var a, Var b) {
    Matrix3 out = ops::bmm(t.matrix(a), t.matrix(b));
    return t.push(std::move(out), [a, b](Tape& tp, int self) {
        const Matrix3& g = tp.grad_matrix(Var{self});
        tp.accum_grad(a, ops::bmm_grad_a(g, tp.matrix(b)));
        tp.accum_grad(b, ops::bmm_grad_b(g, tp.matrix(a)));
    });
}

Var add_scalars(Tape& t, const std::vector<Var>& xs) {
    require(!xs.empty(), "add_scalars: empty");
    double total = 0.0;
    for (Var v : xs) total += t.tensor(v).item();
    std::vector<Var> captured = xs;
    return t.push(Tensor::scalar(total), [captured](Tape& tp, int self) {
        const double g = tp.grad_tensor(Var{self}).item();
        for (Var v : captured) tp.accum_grad(v, Tensor::scalar(g));
    });
}

Var cbr(Tape& t, Var x, Var kernel, Var gamma, Var beta, int stride) {
    const i64 co = t.tensor(kernel).shape().n;
    Var zero_bias = t.leaf(Tensor({co, 1, 1, 1}));
    Var c = conv2d(t, x, kernel, zero_bias, stride, PadMode::zero);
    Var b = batchnorm(t, c, gamma, beta);
    return relu(t, b);
}

} // namespace ad
} // namespace lba
