#include "lba/network.hpp"

#include <cmath>

namespace lba::network {

namespace {
constexpr std::array<i64, 4> kBaseChannels = {64, 128, 320, 512};
}

NetworkConfig config_for(Ablation a, i64 input_size, double channel_scale, std::uint64_t seed) {
    NetworkConfig cfg;
    cfg.input_size = input_size;
    cfg.channel_scale = channel_scale;
    cfg.seed = seed;
    cfg.enable_efaba = a == Ablation::efaba || a == Ablation::full;
    cfg.enable_gdal = a == Ablation::gdal || a == Ablation::full;
    return cfg;
}

Ablation ablation_from_string(const std::string& s) {
    if (s == "baseline") return Ablation::baseline;
    if (s == "efaba") return Ablation::efaba;
    if (s == "gdal") return Ablation::gdal;
    if (s == "full") return Ablation::full;
    fail("unknown ablation '%s' (expected baseline|efaba|gdal|full)", s.c_str());
}

std::string ablation_name(Ablation a) {
    switch (a) {
        case Ablation::baseline: return "baseline";
        case Ablation::efaba: return "efaba";
        case Ablation::gdal: return "gdal";
        case Ablation::full: return "full";
    }
    return "?";
}

std::array<StageSpec, 4> stage_specs(double channel_scale) {
    require(channel_scale > 0.0 && channel_scale <= 1.0,
            strprintf("channel_scale %g outside (0,1]", channel_scale));
    std::array<StageSpec, 4> specs{};
    for (int i = 0; i < 4; ++i) {
        const i64 c = static_cast<i64>(std::llround(
            static_cast<double>(kBaseChannels[static_cast<std::size_t>(i)]) * channel_scale));
        require(c >= 4 && c % 4 == 0,
                strprintf("scaled stage-%d channels %lld must be >= 4 and divisible by 4", i + 1, (long long)c));
        specs[static_cast<std::size_t>(i)] = {i + 1, c, 1 << (i + 2), 1 << (3 - i)};
    }
    return specs;
}

void init_params(const NetworkConfig& cfg, ParamStore& ps) {
    const auto specs = stage_specs(cfg.channel_scale);
    const std::array<i64, 3> c123 = {specs[0].channels, specs[1].channels, specs[2].channels};
    const i64 c4 = specs[3].channels;
    Rng rng(cfg.seed);

    i64 prev = 3;
    for (int i = 1; i <= 4; ++i) {
        const i64 c = specs[static_cast<std::size_t>(i - 1)].channels;
        layers::init_cbr(ps, rng, strprintf("enc.s%d.c1", i), c, prev, 3);
        layers::init_cbr(ps, rng, strprintf("enc.s%d.c2", i), c, c, 3);
        prev = c;
    }
    if (cfg.enable_efaba) efaba::init_params(ps, rng, c123);
    if (cfg.enable_gdal) gdal::init_params(ps, rng, c123, c4);
    for (int i = 1; i <= 3; ++i)
        layers::init_cbr(ps, rng, strprintf("fg%d", i), c123[static_cast<std::size_t>(i - 1)],
                         c123[static_cast<std::size_t>(i - 1)], 3);
    layers::init_cbr(ps, rng, "dec.d4", c4, c4, 3);
    i64 upper = c4;
    for (int i = 3; i >= 1; --i) {
        const i64 c = c123[static_cast<std::size_t>(i - 1)];
        layers::init_deconv(ps, rng, strprintf("dec.up%d", i), upper, c, 2);
        layers::init_cbr(ps, rng, strprintf("dec.d%d", i), c, c, 3);
        upper = c;
    }
    for (int i = 1; i <= 4; ++i) {
        const i64 c = specs[static_cast<std::size_t>(i - 1)].channels;
        layers::init_conv(ps, rng, strprintf("dec.head%d", i), 1, c, 1);
    }
}

EncoderVars stub_encoder(Tape& t, ParamBank& pb, Var image, const NetworkConfig& cfg) {
    const Shape4 is = t.tensor(image).shape();
    require(is.c == 3, strprintf("stub_encoder: expected 3 input channels, got %lld", (long long)is.c));
    require(is.h % 32 == 0 && is.w % 32 == 0,
            strprintf("stub_encoder: input %lldx%lld not divisible by 32", (long long)is.h, (long long)is.w));
    (void)cfg;

    EncoderVars out;
    Var x = image;
    Var* dst[4] = {&out.f1, &out.f2, &out.f3, &out.f4};
    for (int i = 1; i <= 4; ++i) {
        x = layers::cbr(t, pb, strprintf("enc.s%d.c1", i), x, /*stride=*/2);
        x = layers::cbr(t, pb, strprintf("enc.s%d.c2", i), x, /*stride=*/i == 1 ? 2 : 1);
        *dst[i - 1] = x;
    }
    return out;
}

Var fuse_fg(Tape& t, ParamBank& pb, int stage, Var f, Var g) {
    require(t.tensor(f).shape() == t.tensor(g).shape(),
            strprintf("fuse_fg: %s != %s", t.tensor(f).shape().str().c_str(),
                      t.tensor(g).shape().str().c_str()));
    return layers::cbr(t, pb, strprintf("fg%d", stage), ad::add(t, f, g));
}

ForwardVars decoder(Tape& t, ParamBank& pb, Var fg1, Var fg2, Var fg3, Var f4, i64 out_h, i64 out_w) {
    Var d4 = layers::cbr(t, pb, "dec.d4", f4);
    const Var fgs[3] = {fg1, fg2, fg3};
    Var d[4];
    d[3] = d4;
    for (int i = 3; i >= 1; --i) {
        Var up = layers::deconv(t, pb, strprintf("dec.up%d", i), d[i], 2);
        d[i - 1] = layers::cbr(t, pb, strprintf("dec.d%d", i), ad::add(t, fgs[i - 1], up));
    }

    ForwardVars out;
    Var* heads[4] = {&out.p1, &out.p2, &out.p3, &out.p4};
    for (int i = 1; i <= 4; ++i) {
        Var logits = layers::conv(t, pb, strprintf("dec.head%d", i), d[i - 1]);
        Var up = ad::upsample_bilinear(t, logits, out_h, out_w);
        *heads[i - 1] = ad::sigmoid(t, up);
    }
    return out;
}

ForwardVars forward(Tape& t, ParamBank& pb, Var image, const NetworkConfig& cfg) {
    const Shape4 is = t.tensor(image).shape();
    EncoderVars enc = stub_encoder(t, pb, image, cfg);

    Var f[3] = {enc.f1, enc.f2, enc.f3};
    Var g[3] = {enc.f1, enc.f2, enc.f3};
    std::optional<Var> e_att;
    if (cfg.enable_efaba) {
        efaba::Outputs eo = efaba::forward(t, pb, enc.f1, enc.f2, enc.f3);
        f[0] = eo.f1;
        f[1] = eo.f2;
        f[2] = eo.f3;
        e_att = eo.e_att;
    }
    if (cfg.enable_gdal) {
        gdal::Outputs go = gdal::forward(t, pb, enc.f1, enc.f2, enc.f3, enc.f4);
        g[0] = go.g1;
        g[1] = go.g2;
        g[2] = go.g3;
    }

    Var fg1 = fuse_fg(t, pb, 1, f[0], g[0]);
    Var fg2 = fuse_fg(t, pb, 2, f[1], g[1]);
    Var fg3 = fuse_fg(t, pb, 3, f[2], g[2]);

    ForwardVars out = decoder(t, pb, fg1, fg2, fg3, enc.f4, is.h, is.w);
    if (e_att.has_value())
        out.e_att = ad::upsample_bilinear(t, *e_att, is.h, is.w);
    return out;
}

ForwardOutputs forward_eval(const NetworkConfig& cfg, ParamStore& ps, const Tensor& image) {
    Tape t;
    ParamBank pb(t, ps);
    Var img = t.leaf(image);
    ForwardVars v = forward(t, pb, img, cfg);

    ForwardOutputs out;
    out.p1 = t.tensor(v.p1);
    out.p2 = t.tensor(v.p2);
    out.p3 = t.tensor(v.p3);
    out.p4 = t.tensor(v.p4);
    if (v.e_att.has_value()) out.e_att = t.tensor(*v.e_att);
    return out;
}

Var loss(Tape& t, const ForwardVars& out, Var gt, Var gt_edge) {
    require(t.tensor(out.p1).shape() == t.tensor(gt).shape(),
            strprintf("loss: prediction %s != gt %s", t.tensor(out.p1).shape().str().c_str(),
                      t.tensor(gt).shape().str().c_str()));
    std::vector<Var> terms = {
        ad::bce(t, out.p1, gt), ad::bce(t, out.p2, gt), ad::bce(t, out.p3, gt), ad::bce(t, out.p4, gt)};
    if (out.e_att.has_value()) terms.push_back(ad::bce(t, *out.e_att, gt_edge));
    return ad::add_scalars(t, terms);
}

Tensor make_gt_edge(const Tensor& gt) {
    const Shape4 s = gt.shape();
    require(s.c == 1, "make_gt_edge: expected single-channel mask");
    for (const double v : gt.vec())
        require(v == 0.0 || v == 1.0, "make_gt_edge: mask is not binary");

    Tensor edge(s);
    for (i64 n = 0; n < s.n; ++n) {
        const double* g = gt.plane(n, 0);
        double* e = edge.plane(n, 0);
        for (i64 y = 0; y < s.h; ++y) {
            for (i64 x = 0; x < s.w; ++x) {
                double dil = 0.0, ero = 1.0;
                for (i64 dy = -1; dy <= 1; ++dy) {
                    for (i64 dx = -1; dx <= 1; ++dx) {
                        const i64 yy = y + dy, xx = x + dx;
                        // outside the mask counts as background
                        const double v =
                            (yy >= 0 && yy < s.h && xx >= 0 && xx < s.w) ? g[yy * s.w + xx] : 0.0;
                        dil = std::max(dil, v);
                        ero = std::min(ero, v);
                    }
                }
                e[y * s.w + x] = dil - ero;
            }
        }
    }
    return edge;
}

double train_step(ParamStore& ps, AdamState& adam, const NetworkConfig& cfg,
                  const Tensor& images, const Tensor& gts, double lr) {
    require(images.shape().n == gts.shape().n, "train_step: batch size mismatch");
    if (adam.m.empty()) {
        adam.m.resize(ps.size());
        adam.v.resize(ps.size());
        for (std::size_t i = 0; i < ps.size(); ++i) {
            adam.m[i].assign(static_cast<std::size_t>(ps.at(i).value.numel()), 0.0);
            adam.v[i].assign(static_cast<std::size_t>(ps.at(i).value.numel()), 0.0);
        }
    }
    require(adam.m.size() == ps.size(), "train_step: optimizer state does not match the store");

    ps.zero_grads();
    Tape t;
    ParamBank pb(t, ps);
    Var img = t.leaf(images);
    ForwardVars out = forward(t, pb, img, cfg);
    Var gt = t.leaf(gts);
    Var gt_edge = t.leaf(make_gt_edge(gts));
    Var l = loss(t, out, gt, gt_edge);

    const double loss_value = t.tensor(l).item();
    require(std::isfinite(loss_value), strprintf("train_step: non-finite loss %g", loss_value));

    t.backward(l);
    t.write_param_grads();

    adam.step += 1;
    const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.step));
    const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.step));
    for (std::size_t i = 0; i < ps.size(); ++i) {
        auto& e = ps.at(i);
        double* theta = e.value.data();
        const double* grad = e.grad.data();
        double* m = adam.m[i].data();
        double* v = adam.v[i].data();
        const i64 n = e.value.numel();
        for (i64 j = 0; j < n; ++j) {
            m[j] = adam.beta1 * m[j] + (1.0 - adam.beta1) * grad[j];
            v[j] = adam.beta2 * v[j] + (1.0 - adam.beta2) * grad[j] * grad[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            theta[j] -= lr * mhat / (std::sqrt(vhat) + adam.eps);
        }
    }
    return loss_value;
}

} // namespace lba::network
