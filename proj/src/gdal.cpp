#include "lba/gdal.hpp"

namespace lba::gdal {

void init_params(ParamStore& ps, Rng& rng, const std::array<i64, 3>& channels, i64 c4) {
    layers::init_fc(ps, rng, "gdal.fc", c4, c4);
    layers::init_conv(ps, rng, "gdal.st", 1, 1, 7); // shared spatial-attention conv
    for (int i = 1; i <= 3; ++i) {
        const i64 c = channels[static_cast<std::size_t>(i - 1)];
        layers::init_conv(ps, rng, strprintf("gdal.eal%d.proj", i), c, c4, 1);
        layers::init_se(ps, rng, strprintf("gdal.eal%d.se", i), c);
        layers::init_conv(ps, rng, strprintf("gdal.ial%d.proj", i), c, c4, 1);
        layers::init_cbr(ps, rng, strprintf("gdal.ial%d.skip", i), c, c4, 1);
        layers::init_cbr(ps, rng, strprintf("gdal.fuse%d.a", i), 2 * c, 2 * c, 3);
        layers::init_cbr(ps, rng, strprintf("gdal.fuse%d.b", i), c, 2 * c, 1);
    }
}

Var image_descriptor(Tape& t, ParamBank& pb, Var f4) {
    Var pooled = ad::global_avg_pool(t, f4);
    return layers::fc(t, pb, "gdal.fc", pooled);
}

Var explicit_affinity(Tape& t, ParamBank& pb, int stage, Var f, Var desc) {
    const Shape4 fs = t.tensor(f).shape();
    Var proj = layers::conv(t, pb, strprintf("gdal.eal%d.proj", stage), desc);
    Var spread = ad::resize_bilinear(t, proj, fs.h, fs.w); // 1x1 -> constant planes
    Var st = ad::sigmoid(t, layers::conv(t, pb, "gdal.st", ad::channel_max(t, spread)));
    Var assoc = ad::sigmoid(t, ad::mul(t, f, st));
    return layers::se(t, pb, strprintf("gdal.eal%d.se", stage), ad::mul(t, assoc, f));
}

Var implicit_attention(Tape& t, Var desc_proj) {
    return ad::softmax_lastdim(t, ad::flatten_spatial(t, desc_proj));
}

Var semantic_assignment(Tape& t, Var m, Var desc_flat) {
    const Shape3 ms = t.matrix(m).shape(), ds = t.matrix(desc_flat).shape();
    require(ms.c == ds.c,
            strprintf("semantic_assignment: spatial length %lld != %lld", (long long)ms.c, (long long)ds.c));
    return ad::bmm(t, desc_flat, ad::transpose_last(t, m));
}

Var implicit_affinity(Tape& t, ParamBank& pb, int stage, Var assignment, Var f, Var f4,
                      bool include_skip) {
    const Shape4 fs = t.tensor(f).shape();
    Var flat = ad::flatten_spatial(t, f);
    Var mixed = ad::unflatten_spatial(t, ad::bmm(t, assignment, flat), fs.h, fs.w);
    if (!include_skip) return mixed;
    Var resized = ad::resize_bilinear(t, f4, fs.h, fs.w);
    Var skip = layers::cbr(t, pb, strprintf("gdal.ial%d.skip", stage), resized);
    return ad::add(t, mixed, skip);
}

Var gdal_fuse(Tape& t, ParamBank& pb, int stage, Var imp, Var exp) {
    require(t.tensor(imp).shape() == t.tensor(exp).shape(),
            strprintf("gdal_fuse: %s != %s", t.tensor(imp).shape().str().c_str(),
                      t.tensor(exp).shape().str().c_str()));
    Var cat = ad::concat_channels(t, imp, exp);
    Var a = layers::cbr(t, pb, strprintf("gdal.fuse%d.a", stage), cat);
    return layers::cbr(t, pb, strprintf("gdal.fuse%d.b", stage), a);
}

Outputs forward(Tape& t, ParamBank& pb, Var f1, Var f2, Var f3, Var f4) {
    Var desc = image_descriptor(t, pb, f4);

    Outputs out;
    const Var fs[3] = {f1, f2, f3};
    Var* dst[3] = {&out.g1, &out.g2, &out.g3};
    for (int i = 0; i < 3; ++i) {
        const int stage = i + 1;
        Var exp = explicit_affinity(t, pb, stage, fs[i], desc);
        Var proj = layers::conv(t, pb, strprintf("gdal.ial%d.proj", stage), f4);
        Var m = implicit_attention(t, proj);
        Var assignment = semantic_assignment(t, m, ad::flatten_spatial(t, proj));
        Var imp = implicit_affinity(t, pb, stage, assignment, fs[i], f4);
        *dst[i] = gdal_fuse(t, pb, stage, imp, exp);
    }
    return out;
}

} // namespace lba::gdal
