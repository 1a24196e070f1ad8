#include "lba/layers.hpp"

#include <cmath>

namespace lba::layers {

namespace {

Tensor kaiming_uniform(Rng& rng, Shape4 shape, i64 fan_in) {
    Tensor t(shape);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& v : t.vec()) v = rng.uniform(-bound, bound);
    return t;
}

} // namespace

void init_conv(ParamStore& ps, Rng& rng, const std::string& prefix, i64 co, i64 ci, i64 k, bool bias) {
    ps.add(prefix + ".w", kaiming_uniform(rng, {co, ci, k, k}, ci * k * k));
    if (bias) ps.add(prefix + ".b", Tensor({co, 1, 1, 1}));
}

void init_deconv(ParamStore& ps, Rng& rng, const std::string& prefix, i64 ci, i64 co, i64 k) {
    ps.add(prefix + ".w", kaiming_uniform(rng, {ci, co, k, k}, ci * k * k));
    ps.add(prefix + ".b", Tensor({co, 1, 1, 1}));
}

void init_bn(ParamStore& ps, const std::string& prefix, i64 c) {
    ps.add(prefix + ".gamma", Tensor::full({c, 1, 1, 1}, 1.0));
    ps.add(prefix + ".beta", Tensor({c, 1, 1, 1}));
}

void init_cbr(ParamStore& ps, Rng& rng, const std::string& prefix, i64 co, i64 ci, i64 k) {
    init_conv(ps, rng, prefix, co, ci, k, /*bias=*/false);
    init_bn(ps, prefix + ".bn", co);
}

void init_fc(ParamStore& ps, Rng& rng, const std::string& prefix, i64 out, i64 in) {
    ps.add(prefix + ".w", kaiming_uniform(rng, {out, in, 1, 1}, in));
    ps.add(prefix + ".b", Tensor({out, 1, 1, 1}));
}

i64 se_hidden(i64 c) { return std::max<i64>(c / 16, 4); }

void init_se(ParamStore& ps, Rng& rng, const std::string& prefix, i64 c) {
    const i64 hidden = se_hidden(c);
    init_fc(ps, rng, prefix + ".fc1", hidden, c);
    init_fc(ps, rng, prefix + ".fc2", c, hidden);
}

Var conv(Tape& t, ParamBank& pb, const std::string& prefix, Var x, int stride, PadMode pad) {
    Var w = pb(prefix + ".w");
    Var b;
    if (pb.store().contains(prefix + ".b")) {
        b = pb(prefix + ".b");
    } else {
        b = t.leaf(Tensor({t.tensor(w).shape().n, 1, 1, 1}));
    }
    return ad::conv2d(t, x, w, b, stride, pad);
}

Var deconv(Tape& t, ParamBank& pb, const std::string& prefix, Var x, int stride) {
    return ad::conv_transpose2d(t, x, pb(prefix + ".w"), pb(prefix + ".b"), stride);
}

Var bn(Tape& t, ParamBank& pb, const std::string& prefix, Var x) {
    return ad::batchnorm(t, x, pb(prefix + ".gamma"), pb(prefix + ".beta"));
}

Var cbr(Tape& t, ParamBank& pb, const std::string& prefix, Var x, int stride) {
    Var c = conv(t, pb, prefix, x, stride, PadMode::zero);
    Var b = bn(t, pb, prefix + ".bn", c);
    return ad::relu(t, b);
}

Var fc(Tape& t, ParamBank& pb, const std::string& prefix, Var x) {
    return ad::fully_connected(t, x, pb(prefix + ".w"), pb(prefix + ".b"));
}

Var se(Tape& t, ParamBank& pb, const std::string& prefix, Var x, bool gate_identity) {
    if (gate_identity) return x;
    Var g = ad::global_avg_pool(t, x);
    g = ad::relu(t, fc(t, pb, prefix + ".fc1", g));
    g = ad::sigmoid(t, fc(t, pb, prefix + ".fc2", g));
    return ad::mul(t, x, g); // gate broadcasts over space
}

} // namespace lba::layers
