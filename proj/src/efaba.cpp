#include "lba/efaba.hpp"

namespace lba::efaba {

void init_params(ParamStore& ps, Rng& rng, const std::array<i64, 3>& channels) {
    for (int i = 1; i <= 2; ++i) {
        const i64 c = channels[static_cast<std::size_t>(i - 1)];
        layers::init_conv(ps, rng, strprintf("efaba.ecd%d.refine", i), c, c, 3);
        layers::init_cbr(ps, rng, strprintf("efaba.ecd%d.fuse", i), 1, c, 1);
    }
    layers::init_cbr(ps, rng, "efaba.att.b1", 1, 1, 1);
    layers::init_cbr(ps, rng, "efaba.att.b2", 1, 1, 1);
    layers::init_conv(ps, rng, "efaba.att.out", 1, 2, 1);
    for (int i = 1; i <= 3; ++i) {
        const i64 c = channels[static_cast<std::size_t>(i - 1)];
        layers::init_conv(ps, rng, strprintf("efaba.sat%d", i), 1, 1, 7);
        layers::init_se(ps, rng, strprintf("efaba.ct%d", i), c);
    }
}

Var edge_gate(Tape& t, Var f) {
    Var g = ad::sobel_magnitude(t, f);
    return ad::mul(t, ad::sigmoid(t, g), f);
}

Var edge_fuse(Tape& t, ParamBank& pb, int stage, Var e, Var f) {
    require(t.tensor(e).shape() == t.tensor(f).shape(),
            strprintf("edge_fuse: e %s != f %s", t.tensor(e).shape().str().c_str(),
                      t.tensor(f).shape().str().c_str()));
    Var refined = layers::conv(t, pb, strprintf("efaba.ecd%d.refine", stage), e);
    Var merged = ad::add(t, refined, f);
    return layers::cbr(t, pb, strprintf("efaba.ecd%d.fuse", stage), merged);
}

Var edge_attention(Tape& t, ParamBank& pb, Var e1f, Var e2f) {
    const Shape4 s1 = t.tensor(e1f).shape(), s2 = t.tensor(e2f).shape();
    require(s1.h == 2 * s2.h && s1.w == 2 * s2.w,
            strprintf("edge_attention: stage extents %s vs %s violate the 2x geometry",
                      s1.str().c_str(), s2.str().c_str()));
    Var up = ad::upsample_bilinear(t, e2f, s1.h, s1.w);
    Var b1 = layers::cbr(t, pb, "efaba.att.b1", e1f);
    Var b2 = layers::cbr(t, pb, "efaba.att.b2", up);
    Var cat = ad::concat_channels(t, b1, b2);
    return ad::sigmoid(t, layers::conv(t, pb, "efaba.att.out", cat));
}

Var spatial_attention(Tape& t, ParamBank& pb, int stage, Var e_att, Var f) {
    const Shape4 fs = t.tensor(f).shape();
    Var att = ad::resize_bilinear(t, e_att, fs.h, fs.w);
    Var gated = ad::mul(t, f, att); // att broadcasts over channels
    Var m = ad::channel_max(t, gated);
    return ad::sigmoid(t, layers::conv(t, pb, strprintf("efaba.sat%d", stage), m));
}

Var faba_balance(Tape& t, ParamBank& pb, int stage, Var sat, Var f, bool ct_identity) {
    Var shifted = ad::add_scalar(t, sat, 1.0);
    Var aligned = ad::mul(t, f, shifted);
    Var calibrated = layers::se(t, pb, strprintf("efaba.ct%d", stage), aligned, ct_identity);
    return ad::mul(t, f, calibrated);
}

Outputs forward(Tape& t, ParamBank& pb, Var f1, Var f2, Var f3) {
    Var e1 = edge_gate(t, f1);
    Var e2 = edge_gate(t, f2);
    Var e1f = edge_fuse(t, pb, 1, e1, f1);
    Var e2f = edge_fuse(t, pb, 2, e2, f2);
    Var e_att = edge_attention(t, pb, e1f, e2f);

    Outputs out;
    out.e_att = e_att;
    const Var fs[3] = {f1, f2, f3};
    Var* dst[3] = {&out.f1, &out.f2, &out.f3};
    for (int i = 0; i < 3; ++i) {
        Var sat = spatial_attention(t, pb, i + 1, e_att, fs[i]);
        *dst[i] = faba_balance(t, pb, i + 1, sat, fs[i]);
    }
    return out;
}

} // namespace lba::efaba
