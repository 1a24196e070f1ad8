#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "lba/params.hpp"
#include "lba/tensor.hpp"
#include "lba/tensor_ops.hpp"

// Reverse-mode tape. Forward functions in lba::ad compute via lba::ops and
// record one node per operation; Tape::backward replays the nodes once, in
// reverse execution order, accumulating vector-Jacobian products.
//
// A tape is single-writer: one forward/backward pass at a time. Values are
// immutable once recorded.

namespace lba {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

class Tape {
public:
    using Value = std::variant<Tensor, Matrix3>;

    Var leaf(Tensor v);
    Var leaf(Matrix3 v);
    // Leaf backed by a ParamStore entry; write_param_grads() adds the node
    // gradient into the entry's grad buffer after backward().
    Var param(ParamStore& ps, const std::string& name);

    const Tensor& tensor(Var v) const;
    const Matrix3& matrix(Var v) const;
    const Tensor& grad_tensor(Var v) const;
    const Matrix3& grad_matrix(Var v) const;

    // Seeds d(root)/d(root) = seed (root must be a scalar tensor) and runs
    // every recorded node's VJP once, newest to oldest. visit_log, when
    // given, receives the node ids in visit order.
    void backward(Var root, double seed = 1.0, std::vector<int>* visit_log = nullptr);

    void write_param_grads();

    std::size_t size() const { return nodes_.size(); }

    // --- recording interface (used by lba::ad) ---
    using BackFn = std::function<void(Tape&, int self)>;
    Var push(Value v, BackFn back);
    void accum_grad(Var v, const Tensor& g);
    void accum_grad(Var v, const Matrix3& g);
    bool has_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].has_grad; }

private:
    struct Node {
        Value value;
        Value grad;
        bool has_grad = false;
        BackFn back;
    };

    struct ParamBinding {
        int node;
        ParamStore* store;
        std::string name;
    };

    Node& node(Var v);
    const Node& node(Var v) const;

    std::vector<Node> nodes_;
    std::vector<ParamBinding> bindings_;
    bool ran_backward_ = false;
};

// Lazily binds ParamStore entries as tape leaves; repeated lookups of one
// name return the same Var so gradients accumulate on a single node.
class ParamBank {
public:
    ParamBank(Tape& t, ParamStore& ps) : tape_(&t), store_(&ps) {}

    Var operator()(const std::string& name) {
        auto it = cache_.find(name);
        if (it != cache_.end()) return it->second;
        Var v = tape_->param(*store_, name);
        cache_[name] = v;
        return v;
    }

    ParamStore& store() { return *store_; }

private:
    Tape* tape_;
    ParamStore* store_;
    std::unordered_map<std::string, Var> cache_;
};

namespace ad {

// rank-4 tensor ops
Var conv2d(Tape& t, Var x, Var kernel, Var bias, int stride, PadMode pad);
Var conv_transpose2d(Tape& t, Var x, Var kernel, Var bias, int stride);
Var fully_connected(Tape& t, Var x, Var weight, Var bias);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var add_scalar(Tape& t, Var a, double s);
Var sigmoid(Tape& t, Var x);
Var relu(Tape& t, Var x);
Var channel_max(Tape& t, Var x);
Var global_avg_pool(Tape& t, Var x);
Var resize_bilinear(Tape& t, Var x, i64 oh, i64 ow);
Var upsample_bilinear(Tape& t, Var x, i64 oh, i64 ow);
Var batchnorm(Tape& t, Var x, Var gamma, Var beta, double eps = 1e-5);
Var concat_channels(Tape& t, Var a, Var b);
Var sobel_magnitude(Tape& t, Var x);
Var sum_all(Tape& t, Var x);
Var bce(Tape& t, Var pred, Var target, double eps = 1e-7);

// Matrix3 bridges and ops
Var flatten_spatial(Tape& t, Var x);
Var unflatten_spatial(Tape& t, Var m, i64 h, i64 w);
Var transpose_last(Tape& t, Var m);
Var softmax_lastdim(Tape& t, Var m);
Var bmm(Tape& t, Var a, Var b);

// scalar combine: sum of scalar vars
Var add_scalars(Tape& t, const std::vector<Var>& xs);

// convenience: conv + batchnorm + relu (convolution carries no bias here,
// the BN shift covers it)
Var cbr(Tape& t, Var x, Var kernel, Var gamma, Var beta, int stride = 1);

} // namespace ad
} // namespace lba
