#include "lba/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "lba/kernels.hpp"

namespace lba::ops {

namespace {

struct PadSpec {
    i64 before = 0, after = 0, out = 0;
};

// Same-size padding: out = ceil(in/stride), pad split floor(total/2) before.
PadSpec same_pad(i64 in, i64 k, i64 stride) {
    PadSpec p;
    p.out = (in + stride - 1) / stride;
    const i64 total = std::max<i64>((p.out - 1) * stride + k - in, 0);
    p.before = total / 2;
    p.after = total - p.before;
    return p;
}

Tensor pad_input(const Tensor& x, i64 pt, i64 pb, i64 pl, i64 pr, PadMode mode) {
    const Shape4 s = x.shape();
    Tensor out({s.n, s.c, s.h + pt + pb, s.w + pl + pr});
    const i64 hp = s.h + pt + pb, wp = s.w + pl + pr;
    for (i64 n = 0; n < s.n; ++n) {
        for (i64 c = 0; c < s.c; ++c) {
            const double* src = x.plane(n, c);
            double* dst = out.plane(n, c);
            for (i64 y = 0; y < hp; ++y) {
                for (i64 xx = 0; xx < wp; ++xx) {
                    const i64 sy = y - pt, sx = xx - pl;
                    double v = 0.0;
                    if (mode == PadMode::replicate) {
                        const i64 cy = std::clamp<i64>(sy, 0, s.h - 1);
                        const i64 cx = std::clamp<i64>(sx, 0, s.w - 1);
                        v = src[cy * s.w + cx];
                    } else if (sy >= 0 && sy < s.h && sx >= 0 && sx < s.w) {
                        v = src[sy * s.w + sx];
                    }
                    dst[y * wp + xx] = v;
                }
            }
        }
    }
    return out;
}

// Gradient of pad_input: crop for zero padding, fold border contributions
// onto the clamped source pixel for replicate.
Tensor unpad_accumulate(const Tensor& gpad, i64 pt, i64 pl, const Shape4& xshape, PadMode mode) {
    Tensor gx(xshape);
    const Shape4 ps = gpad.shape();
    for (i64 n = 0; n < xshape.n; ++n) {
        for (i64 c = 0; c < xshape.c; ++c) {
            const double* gp = gpad.plane(n, c);
            double* gd = gx.plane(n, c);
            for (i64 y = 0; y < ps.h; ++y) {
                for (i64 xx = 0; xx < ps.w; ++xx) {
                    const i64 sy = y - pt, sx = xx - pl;
                    if (mode == PadMode::replicate) {
                        const i64 cy = std::clamp<i64>(sy, 0, xshape.h - 1);
                        const i64 cx = std::clamp<i64>(sx, 0, xshape.w - 1);
                        gd[cy * xshape.w + cx] += gp[y * ps.w + xx];
                    } else if (sy >= 0 && sy < xshape.h && sx >= 0 && sx < xshape.w) {
                        gd[sy * xshape.w + sx] += gp[y * ps.w + xx];
                    }
                }
            }
        }
    }
    return gx;
}

void check_conv_args(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride) {
    const Shape4 ks = kernel.shape();
    require(stride >= 1, strprintf("conv2d: stride %d < 1", stride));
    require(ks.h % 2 == 1 && ks.w % 2 == 1,
            strprintf("conv2d: kernel extent (%lld,%lld) must be odd", (long long)ks.h, (long long)ks.w));
    require(x.shape().c == ks.c,
            strprintf("conv2d: input channels %lld != kernel ci %lld", (long long)x.shape().c, (long long)ks.c));
    require(bias.shape() == Shape4{ks.n, 1, 1, 1},
            strprintf("conv2d: bias shape %s != (co=%lld,1,1,1)", bias.shape().str().c_str(), (long long)ks.n));
}

} // namespace

// ---- conv2d ----------------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride, PadMode pad) {
    check_conv_args(x, kernel, bias, stride);
    const Shape4 xs = x.shape(), ks = kernel.shape();
    const PadSpec py = same_pad(xs.h, ks.h, stride), px = same_pad(xs.w, ks.w, stride);
    const Tensor xp = pad_input(x, py.before, py.after, px.before, px.after, pad);
    const i64 oh = py.out, ow = px.out, wp = xp.shape().w;
    const auto& K = kernels::active();

    Tensor out({xs.n, ks.n, oh, ow});
    for (i64 n = 0; n < xs.n; ++n) {
        for (i64 oc = 0; oc < ks.n; ++oc) {
            double* op = out.plane(n, oc);
            const double b = bias.data()[oc];
            for (i64 i = 0; i < oh * ow; ++i) op[i] = b;
            for (i64 ic = 0; ic < ks.c; ++ic) {
                const double* ip = xp.plane(n, ic);
                const double* kp = kernel.plane(oc, ic);
                for (i64 ky = 0; ky < ks.h; ++ky) {
                    for (i64 kx = 0; kx < ks.w; ++kx) {
                        const double wv = kp[ky * ks.w + kx];
                        if (wv == 0.0) continue;
                        for (i64 oy = 0; oy < oh; ++oy) {
                            const double* irow = ip + (oy * stride + ky) * wp + kx;
                            double* orow = op + oy * ow;
                            if (stride == 1) {
                                K.axpy(orow, irow, wv, static_cast<std::size_t>(ow));
                            } else {
                                for (i64 ox = 0; ox < ow; ++ox) orow[ox] += wv * irow[ox * stride];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor conv2d_grad_x(const Tensor& gout, const Tensor& x, const Tensor& kernel, int stride, PadMode pad) {
    const Shape4 xs = x.shape(), ks = kernel.shape(), gs = gout.shape();
    const PadSpec py = same_pad(xs.h, ks.h, stride), px = same_pad(xs.w, ks.w, stride);
    const i64 wp = xs.w + px.before + px.after, hp = xs.h + py.before + py.after;
    const auto& K = kernels::active();

    Tensor gpad({xs.n, xs.c, hp, wp});
    for (i64 n = 0; n < xs.n; ++n) {
        for (i64 oc = 0; oc < ks.n; ++oc) {
            const double* gp = gout.plane(n, oc);
            for (i64 ic = 0; ic < ks.c; ++ic) {
                double* dp = gpad.plane(n, ic);
                const double* kp = kernel.plane(oc, ic);
                for (i64 ky = 0; ky < ks.h; ++ky) {
                    for (i64 kx = 0; kx < ks.w; ++kx) {
                        const double wv = kp[ky * ks.w + kx];
                        if (wv == 0.0) continue;
                        for (i64 oy = 0; oy < gs.h; ++oy) {
                            double* drow = dp + (oy * stride + ky) * wp + kx;
                            const double* grow = gp + oy * gs.w;
                            if (stride == 1) {
                                K.axpy(drow, grow, wv, static_cast<std::size_t>(gs.w));
                            } else {
                                for (i64 ox = 0; ox < gs.w; ++ox) drow[ox * stride] += wv * grow[ox];
                            }
                        }
                    }
                }
            }
        }
    }
    return unpad_accumulate(gpad, py.before, px.before, xs, pad);
}

Tensor conv2d_grad_kernel(const Tensor& gout, const Tensor& x, const Tensor& kernel, int stride, PadMode pad) {
    const Shape4 xs = x.shape(), ks = kernel.shape(), gs = gout.shape();
    const PadSpec py = same_pad(xs.h, ks.h, stride), px = same_pad(xs.w, ks.w, stride);
    const Tensor xp = pad_input(x, py.before, py.after, px.before, px.after, pad);
    const i64 wp = xp.shape().w;
    const auto& K = kernels::active();

    Tensor gk(ks);
    for (i64 n = 0; n < xs.n; ++n) {
        for (i64 oc = 0; oc < ks.n; ++oc) {
            const double* gp = gout.plane(n, oc);
            for (i64 ic = 0; ic < ks.c; ++ic) {
                const double* ip = xp.plane(n, ic);
                double* kp = gk.plane(oc, ic);
                for (i64 ky = 0; ky < ks.h; ++ky) {
                    for (i64 kx = 0; kx < ks.w; ++kx) {
                        double acc = 0.0;
                        for (i64 oy = 0; oy < gs.h; ++oy) {
                            const double* irow = ip + (oy * stride + ky) * wp + kx;
                            const double* grow = gp + oy * gs.w;
                            if (stride == 1) {
                                acc += K.dot(grow, irow, static_cast<std::size_t>(gs.w));
                            } else {
                                for (i64 ox = 0; ox < gs.w; ++ox) acc += grow[ox] * irow[ox * stride];
                            }
                        }
                        kp[ky * ks.w + kx] += acc;
                    }
                }
            }
        }
    }
    return gk;
}

Tensor conv2d_grad_bias(const Tensor& gout) {
    const Shape4 gs = gout.shape();
    Tensor gb({gs.c, 1, 1, 1});
    const auto& K = kernels::active();
    for (i64 n = 0; n < gs.n; ++n)
        for (i64 c = 0; c < gs.c; ++c)
            gb.data()[c] += K.sum(gout.plane(n, c), static_cast<std::size_t>(gs.h * gs.w));
    return gb;
}

// ---- conv_transpose2d ------------------------------------------------------

Tensor conv_transpose2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride) {
    const Shape4 xs = x.shape(), ks = kernel.shape();
    require(stride >= 1, "conv_transpose2d: stride < 1");
    require(xs.c == ks.n,
            strprintf("conv_transpose2d: input channels %lld != kernel ci %lld", (long long)xs.c, (long long)ks.n));
    require(bias.shape() == Shape4{ks.c, 1, 1, 1},
            strprintf("conv_transpose2d: bias shape %s != (co=%lld,1,1,1)", bias.shape().str().c_str(), (long long)ks.c));
    const i64 oh = (xs.h - 1) * stride + ks.h, ow = (xs.w - 1) * stride + ks.w;

    Tensor out({xs.n, ks.c, oh, ow});
    for (i64 n = 0; n < xs.n; ++n) {
        for (i64 oc = 0; oc < ks.c; ++oc) {
            double* op = out.plane(n, oc);
            const double b = bias.data()[oc];
            for (i64 i = 0; i < oh * ow; ++i) op[i] = b;
            for (i64 ic = 0; ic < ks.n; ++ic) {
                const double* ip = x.plane(n, ic);
                const double* kp = kernel.plane(ic, oc);
                for (i64 ky = 0; ky < ks.h; ++ky) {
                    for (i64 kx = 0; kx < ks.w; ++kx) {
                        const double wv = kp[ky * ks.w + kx];
                        if (wv == 0.0) continue;
                        for (i64 iy = 0; iy < xs.h; ++iy) {
                            const double* irow = ip + iy * xs.w;
                            double* orow = op + (iy * stride + ky) * ow + kx;
                            for (i64 ix = 0; ix < xs.w; ++ix) orow[ix * stride] += wv * irow[ix];
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor conv_transpose2d_grad_x(const Tensor& gout, const Tensor& x, const Tensor& kernel, int stride) {
    const Shape4 xs = x.shape(), ks = kernel.shape(), gs = gout.shape();
    Tensor gx(xs);
    for (i64 n = 0; n < xs.n; ++n) {
        for (i64 ic = 0; ic < ks.n; ++ic) {
            double* dp = gx.plane(n, ic);
            for (i64 oc = 0; oc < ks.c; ++oc) {
                const double* gp = gout.plane(n, oc);
                const double* kp = kernel.plane(ic, oc);
                for (i64 ky = 0; ky < ks.h; ++ky) {
                    for (i64 kx = 0; kx < ks.w; ++kx) {
                        const double wv = kp[ky * ks.w + kx];
                        if (wv == 0.0) continue;
                        for (i64 iy = 0; iy < xs.h; ++iy) {
                            double* drow = dp + iy * xs.w;
                            const double* grow = gp + (iy * stride + ky) * gs.w + kx;
                            for (i64 ix = 0; ix < xs.w; ++ix) drow[ix] += wv * grow[ix * stride];
                        }
                    }
                }
            }
        }
    }
    return gx;
}

Tensor conv_transpose2d_grad_kernel(const Tensor& gout, const Tensor& x, const Tensor& kernel, int stride) {
    const Shape4 xs = x.shape(), ks = kernel.shape(), gs = gout.shape();
    Tensor gk(ks);
    for (i64 n = 0; n < xs.n; ++n) {
        for (i64 ic = 0; ic < ks.n; ++ic) {
            const double* ip = x.plane(n, ic);
            for (i64 oc = 0; oc < ks.c; ++oc) {
                const double* gp = gout.plane(n, oc);
                double* kp = gk.plane(ic, oc);
                for (i64 ky = 0; ky < ks.h; ++ky) {
                    for (i64 kx = 0; kx < ks.w; ++kx) {
                        double acc = 0.0;
                        for (i64 iy = 0; iy < xs.h; ++iy) {
                            const double* irow = ip + iy * xs.w;
                            const double* grow = gp + (iy * stride + ky) * gs.w + kx;
                            for (i64 ix = 0; ix < xs.w; ++ix) acc += irow[ix] * grow[ix * stride];
                        }
                        kp[ky * ks.w + kx] += acc;
                    }
                }
            }
        }
    }
    return gk;
}

Tensor conv_transpose2d_grad_bias(const Tensor& gout) { return conv2d_grad_bias(gout); }

// ---- fully connected -------------------------------------------------------

Tensor fully_connected(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    const Shape4 xs = x.shape(), ws = weight.shape();
    require(xs.h == 1 && xs.w == 1, strprintf("fully_connected: input spatial %lldx%lld != 1x1", (long long)xs.h, (long long)xs.w));
    require(ws.c == xs.c, strprintf("fully_connected: weight in features %lld != input channels %lld", (long long)ws.c, (long long)xs.c));
    require(bias.shape() == Shape4{ws.n, 1, 1, 1}, "fully_connected: bias shape mismatch");
    const auto& K = kernels::active();

    Tensor out({xs.n, ws.n, 1, 1});
    for (i64 n = 0; n < xs.n; ++n) {
        const double* xn = x.data() + n * xs.c;
        double* on = out.data() + n * ws.n;
        for (i64 o = 0; o < ws.n; ++o)
            on[o] = K.dot(weight.data() + o * ws.c, xn, static_cast<std::size_t>(ws.c)) + bias.data()[o];
    }
    return out;
}

Tensor fully_connected_grad_x(const Tensor& gout, const Tensor& weight) {
    const Shape4 ws = weight.shape(), gs = gout.shape();
    const auto& K = kernels::active();
    Tensor gx({gs.n, ws.c, 1, 1});
    for (i64 n = 0; n < gs.n; ++n) {
        double* gxn = gx.data() + n * ws.c;
        const double* gn = gout.data() + n * ws.n;
        for (i64 o = 0; o < ws.n; ++o)
            K.axpy(gxn, weight.data() + o * ws.c, gn[o], static_cast<std::size_t>(ws.c));
    }
    return gx;
}

Tensor fully_connected_grad_weight(const Tensor& gout, const Tensor& x) {
    const Shape4 xs = x.shape(), gs = gout.shape();
    const auto& K = kernels::active();
    Tensor gw({gs.c, xs.c, 1, 1});
    for (i64 n = 0; n < gs.n; ++n) {
        const double* xn = x.data() + n * xs.c;
        const double* gn = gout.data() + n * gs.c;
        for (i64 o = 0; o < gs.c; ++o)
            K.axpy(gw.data() + o * xs.c, xn, gn[o], static_cast<std::size_t>(xs.c));
    }
    return gw;
}

Tensor fully_connected_grad_bias(const Tensor& gout) {
    const Shape4 gs = gout.shape();
    Tensor gb({gs.c, 1, 1, 1});
    for (i64 n = 0; n < gs.n; ++n)
        for (i64 o = 0; o < gs.c; ++o) gb.data()[o] += gout.data()[n * gs.c + o];
    return gb;
}

// ---- elementwise -----------------------------------------------------------

bool broadcastable(const Shape4& a, const Shape4& b) {
    const bool n_ok = b.n == a.n || b.n == 1;
    const bool c_ok = b.c == a.c || b.c == 1;
    const bool s_ok = (b.h == a.h && b.w == a.w) || (b.h == 1 && b.w == 1);
    return n_ok && c_ok && s_ok;
}

Tensor elementwise(EwOp op, const Tensor& a, const Tensor& b) {
    const Shape4 as = a.shape(), bs = b.shape();
    require(broadcastable(as, bs),
            strprintf("elementwise: shape %s not broadcastable to %s", bs.str().c_str(), as.str().c_str()));
    const auto& K = kernels::active();
    const std::size_t hw = static_cast<std::size_t>(as.h * as.w);
    const bool b_spatial = bs.h == as.h && bs.w == as.w;

    Tensor out(as);
    for (i64 n = 0; n < as.n; ++n) {
        const i64 bn = bs.n == 1 ? 0 : n;
        for (i64 c = 0; c < as.c; ++c) {
            const i64 bc = bs.c == 1 ? 0 : c;
            const double* ap = a.plane(n, c);
            const double* bp = b.plane(bn, bc);
            double* dst = out.plane(n, c);
            if (b_spatial) {
                switch (op) {
                    case EwOp::add: K.add(dst, ap, bp, hw); break;
                    case EwOp::sub: K.sub(dst, ap, bp, hw); break;
                    case EwOp::mul: K.mul(dst, ap, bp, hw); break;
                }
            } else {
                const double bv = bp[0];
                switch (op) {
                    case EwOp::add: K.add_scalar(dst, ap, bv, hw); break;
                    case EwOp::sub: K.add_scalar(dst, ap, -bv, hw); break;
                    case EwOp::mul: K.mul_scalar(dst, ap, bv, hw); break;
                }
            }
        }
    }
    return out;
}

namespace {

// Sum `full` (shaped like a) down to b's shape.
Tensor reduce_to(const Tensor& full, const Shape4& bshape) {
    const Shape4 fs = full.shape();
    Tensor out(bshape);
    for (i64 n = 0; n < fs.n; ++n) {
        const i64 bn = bshape.n == 1 ? 0 : n;
        for (i64 c = 0; c < fs.c; ++c) {
            const i64 bc = bshape.c == 1 ? 0 : c;
            const double* fp = full.plane(n, c);
            double* bp = out.plane(bn, bc);
            if (bshape.h == fs.h && bshape.w == fs.w) {
                kernels::active().add(bp, bp, fp, static_cast<std::size_t>(fs.h * fs.w));
            } else {
                bp[0] += kernels::active().sum(fp, static_cast<std::size_t>(fs.h * fs.w));
            }
        }
    }
    return out;
}

} // namespace

Tensor elementwise_grad_a(EwOp op, const Tensor& gout, const Tensor& a, const Tensor& b) {
    (void)a;
    switch (op) {
        case EwOp::add:
        case EwOp::sub: return gout;
        case EwOp::mul: return elementwise(EwOp::mul, gout, b);
    }
    fail("elementwise_grad_a: bad op");
}

Tensor elementwise_grad_b(EwOp op, const Tensor& gout, const Tensor& a, const Tensor& b) {
    switch (op) {
        case EwOp::add: return reduce_to(gout, b.shape());
        case EwOp::sub: {
            Tensor neg(gout.shape());
            kernels::active().mul_scalar(neg.data(), gout.data(), -1.0, static_cast<std::size_t>(gout.numel()));
            return reduce_to(neg, b.shape());
        }
        case EwOp::mul: return reduce_to(elementwise(EwOp::mul, gout, a), b.shape());
    }
    fail("elementwise_grad_b: bad op");
}

Tensor add_scalar(const Tensor& a, double s) {
    Tensor out(a.shape());
    kernels::active().add_scalar(out.data(), a.data(), s, static_cast<std::size_t>(a.numel()));
    return out;
}

// ---- activations -----------------------------------------------------------

namespace {

// Clamping at +/-36.5 keeps exp() in range and the output strictly in (0,1).
double sigmoid1(double v) {
    if (v >= 0.0) {
        const double t = std::exp(-std::min(v, 36.5));
        return 1.0 / (1.0 + t);
    }
    const double t = std::exp(std::max(v, -36.5));
    return t / (1.0 + t);
}

} // namespace

Tensor sigmoid(const Tensor& x) {
    Tensor out(x.shape());
    const double* xp = x.data();
    double* op = out.data();
    const i64 n = x.numel();
    for (i64 i = 0; i < n; ++i) op[i] = sigmoid1(xp[i]);
    return out;
}

Tensor sigmoid_grad(const Tensor& gout, const Tensor& y) {
    Tensor gx(y.shape());
    const double* gp = gout.data();
    const double* yp = y.data();
    double* dp = gx.data();
    const i64 n = y.numel();
    for (i64 i = 0; i < n; ++i) dp[i] = gp[i] * yp[i] * (1.0 - yp[i]);
    return gx;
}

Tensor relu(const Tensor& x) {
    Tensor out(x.shape());
    kernels::active().relu(out.data(), x.data(), static_cast<std::size_t>(x.numel()));
    return out;
}

Tensor relu_grad(const Tensor& gout, const Tensor& x) {
    Tensor gx(x.shape());
    const double* gp = gout.data();
    const double* xp = x.data();
    double* dp = gx.data();
    const i64 n = x.numel();
    for (i64 i = 0; i < n; ++i) dp[i] = xp[i] > 0.0 ? gp[i] : 0.0;
    return gx;
}

// ---- reductions / pooling --------------------------------------------------

Tensor channel_max(const Tensor& x) {
    const Shape4 xs = x.shape();
    require(xs.c >= 1, "channel_max: no channels");
    const std::size_t hw = static_cast<std::size_t>(xs.h * xs.w);
    Tensor out({xs.n, 1, xs.h, xs.w});
    for (i64 n = 0; n < xs.n; ++n) {
        double* op = out.plane(n, 0);
        std::memcpy(op, x.plane(n, 0), hw * sizeof(double));
        for (i64 c = 1; c < xs.c; ++c) kernels::active().maxv(op, x.plane(n, c), hw);
    }
    return out;
}

// Routes to the first channel attaining the maximum (deterministic on ties).
Tensor channel_max_grad(const Tensor& gout, const Tensor& x, const Tensor& y) {
    const Shape4 xs = x.shape();
    Tensor gx(xs);
    const i64 hw = xs.h * xs.w;
    for (i64 n = 0; n < xs.n; ++n) {
        const double* yp = y.plane(n, 0);
        const double* gp = gout.plane(n, 0);
        for (i64 i = 0; i < hw; ++i) {
            for (i64 c = 0; c < xs.c; ++c) {
                if (x.plane(n, c)[i] == yp[i]) {
                    gx.plane(n, c)[i] = gp[i];
                    break;
                }
            }
        }
    }
    return gx;
}

Tensor global_avg_pool(const Tensor& x) {
    const Shape4 xs = x.shape();
    require(xs.h * xs.w >= 1, "global_avg_pool: empty plane");
    const double inv = 1.0 / static_cast<double>(xs.h * xs.w);
    Tensor out({xs.n, xs.c, 1, 1});
    for (i64 n = 0; n < xs.n; ++n)
        for (i64 c = 0; c < xs.c; ++c)
            out.data()[n * xs.c + c] =
                kernels::active().sum(x.plane(n, c), static_cast<std::size_t>(xs.h * xs.w)) * inv;
    return out;
}

Tensor global_avg_pool_grad(const Tensor& gout, const Shape4& xshape) {
    Tensor gx(xshape);
    const double inv = 1.0 / static_cast<double>(xshape.h * xshape.w);
    const i64 hw = xshape.h * xshape.w;
    for (i64 n = 0; n < xshape.n; ++n) {
        for (i64 c = 0; c < xshape.c; ++c) {
            const double g = gout.data()[n * xshape.c + c] * inv;
            double* dp = gx.plane(n, c);
            for (i64 i = 0; i < hw; ++i) dp[i] = g;
        }
    }
    return gx;
}

Tensor sum_all(const Tensor& x) {
    return Tensor::scalar(kernels::active().sum(x.data(), static_cast<std::size_t>(x.numel())));
}

Tensor sum_all_grad(const Tensor& gout, const Shape4& xshape) {
    return Tensor::full(xshape, gout.item());
}

// ---- resize ----------------------------------------------------------------

namespace {

struct LinTap {
    i64 i0, i1;
    double f; // weight of i1
};

std::vector<LinTap> make_taps(i64 in, i64 out) {
    std::vector<LinTap> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (i64 o = 0; o < out; ++o) {
        double s = (static_cast<double>(o) + 0.5) * scale - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(in - 1));
        const i64 i0 = static_cast<i64>(std::floor(s));
        taps[static_cast<std::size_t>(o)] = {i0, std::min<i64>(i0 + 1, in - 1), s - static_cast<double>(i0)};
    }
    return taps;
}

} // namespace

Tensor resize_bilinear(const Tensor& x, i64 out_h, i64 out_w) {
    const Shape4 xs = x.shape();
    require(out_h >= 1 && out_w >= 1, "resize_bilinear: empty output");
    if (out_h == xs.h && out_w == xs.w) return x; // bit-exact identity
    const auto ty = make_taps(xs.h, out_h), tx = make_taps(xs.w, out_w);

    Tensor out({xs.n, xs.c, out_h, out_w});
    for (i64 n = 0; n < xs.n; ++n) {
        for (i64 c = 0; c < xs.c; ++c) {
            const double* ip = x.plane(n, c);
            double* op = out.plane(n, c);
            for (i64 oy = 0; oy < out_h; ++oy) {
                const LinTap& y = ty[static_cast<std::size_t>(oy)];
                const double* r0 = ip + y.i0 * xs.w;
                const double* r1 = ip + y.i1 * xs.w;
                for (i64 ox = 0; ox < out_w; ++ox) {
                    const LinTap& t = tx[static_cast<std::size_t>(ox)];
                    const double top = r0[t.i0] + t.f * (r0[t.i1] - r0[t.i0]);
                    const double bot = r1[t.i0] + t.f * (r1[t.i1] - r1[t.i0]);
                    op[oy * out_w + ox] = top + y.f * (bot - top);
                }
            }
        }
    }
    return out;
}

Tensor resize_bilinear_grad(const Tensor& gout, const Shape4& xshape) {
    const Shape4 gs = gout.shape();
    if (gs.h == xshape.h && gs.w == xshape.w) return gout;
    const auto ty = make_taps(xshape.h, gs.h), tx = make_taps(xshape.w, gs.w);

    Tensor gx(xshape);
    for (i64 n = 0; n < xshape.n; ++n) {
        for (i64 c = 0; c < xshape.c; ++c) {
            const double* gp = gout.plane(n, c);
            double* dp = gx.plane(n, c);
            for (i64 oy = 0; oy < gs.h; ++oy) {
                const LinTap& y = ty[static_cast<std::size_t>(oy)];
                for (i64 ox = 0; ox < gs.w; ++ox) {
                    const LinTap& t = tx[static_cast<std::size_t>(ox)];
                    const double g = gp[oy * gs.w + ox];
                    dp[y.i0 * xshape.w + t.i0] += (1.0 - y.f) * (1.0 - t.f) * g;
                    dp[y.i0 * xshape.w + t.i1] += (1.0 - y.f) * t.f * g;
                    dp[y.i1 * xshape.w + t.i0] += y.f * (1.0 - t.f) * g;
                    dp[y.i1 * xshape.w + t.i1] += y.f * t.f * g;
                }
            }
        }
    }
    return gx;
}

Tensor upsample_bilinear(const Tensor& x, i64 out_h, i64 out_w) {
    require(out_h >= x.shape().h && out_w >= x.shape().w,
            strprintf("upsample_bilinear: downscale request %lldx%lld -> %lldx%lld",
                      (long long)x.shape().h, (long long)x.shape().w, (long long)out_h, (long long)out_w));
    return resize_bilinear(x, out_h, out_w);
}

// ---- batchnorm ---------------------------------------------------------------

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps, BnState* state) {
    const Shape4 xs = x.shape();
    require(gamma.shape() == Shape4{xs.c, 1, 1, 1} && beta.shape() == Shape4{xs.c, 1, 1, 1},
            strprintf("batchnorm: gamma/beta must be (%lld,1,1,1)", (long long)xs.c));
    require(xs.n * xs.h * xs.w >= 1, "batchnorm: empty population");
    const auto& K = kernels::active();
    const std::size_t hw = static_cast<std::size_t>(xs.h * xs.w);
    const double invN = 1.0 / static_cast<double>(xs.n * xs.h * xs.w);

    std::vector<double> mean(static_cast<std::size_t>(xs.c)), istd(static_cast<std::size_t>(xs.c));
    for (i64 c = 0; c < xs.c; ++c) {
        double s = 0.0;
        for (i64 n = 0; n < xs.n; ++n) s += K.sum(x.plane(n, c), hw);
        const double m = s * invN;
        double sq = 0.0;
        for (i64 n = 0; n < xs.n; ++n) sq += K.sumsq_shift(x.plane(n, c), m, hw);
        mean[static_cast<std::size_t>(c)] = m;
        istd[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(sq * invN + eps);
    }

    Tensor out(xs);
    for (i64 n = 0; n < xs.n; ++n) {
        for (i64 c = 0; c < xs.c; ++c) {
            const double a = gamma.data()[c] * istd[static_cast<std::size_t>(c)];
            const double b = beta.data()[c] - a * mean[static_cast<std::size_t>(c)];
            const double* ip = x.plane(n, c);
            double* op = out.plane(n, c);
            K.mul_scalar(op, ip, a, hw);
            K.add_scalar(op, op, b, hw);
        }
    }
    if (state != nullptr) {
        state->mean = std::move(mean);
        state->inv_std = std::move(istd);
    }
    return out;
}

Tensor batchnorm_grad_x(const Tensor& gout, const Tensor& x, const Tensor& gamma, const BnState& st) {
    const Shape4 xs = x.shape();
    const double invN = 1.0 / static_cast<double>(xs.n * xs.h * xs.w);
    const i64 hw = xs.h * xs.w;
    Tensor gx(xs);
    for (i64 c = 0; c < xs.c; ++c) {
        const double m = st.mean[static_cast<std::size_t>(c)];
        const double is = st.inv_std[static_cast<std::size_t>(c)];
        double sum_g = 0.0, sum_gxh = 0.0;
        for (i64 n = 0; n < xs.n; ++n) {
            const double* gp = gout.plane(n, c);
            const double* xp = x.plane(n, c);
            for (i64 i = 0; i < hw; ++i) {
                sum_g += gp[i];
                sum_gxh += gp[i] * (xp[i] - m) * is;
            }
        }
        const double mg = sum_g * invN, mgxh = sum_gxh * invN;
        const double a = gamma.data()[c] * is;
        for (i64 n = 0; n < xs.n; ++n) {
            const double* gp = gout.plane(n, c);
            const double* xp = x.plane(n, c);
            double* dp = gx.plane(n, c);
            for (i64 i = 0; i < hw; ++i) {
                const double xh = (xp[i] - m) * is;
                dp[i] = a * (gp[i] - mg - xh * mgxh);
            }
        }
    }
    return gx;
}

Tensor batchnorm_grad_gamma(const Tensor& gout, const Tensor& x, const BnState& st) {
    const Shape4 xs = x.shape();
    Tensor gg({xs.c, 1, 1, 1});
    const i64 hw = xs.h * xs.w;
    for (i64 c = 0; c < xs.c; ++c) {
        const double m = st.mean[static_cast<std::size_t>(c)];
        const double is = st.inv_std[static_cast<std::size_t>(c)];
        double acc = 0.0;
        for (i64 n = 0; n < xs.n; ++n) {
            const double* gp = gout.plane(n, c);
            const double* xp = x.plane(n, c);
            for (i64 i = 0; i < hw; ++i) acc += gp[i] * (xp[i] - m) * is;
        }
        gg.data()[c] = acc;
    }
    return gg;
}

Tensor batchnorm_grad_beta(const Tensor& gout) {
    const Shape4 gs = gout.shape();
    Tensor gb({gs.c, 1, 1, 1});
    for (i64 n = 0; n < gs.n; ++n)
        for (i64 c = 0; c < gs.c; ++c)
            gb.data()[c] += kernels::active().sum(gout.plane(n, c), static_cast<std::size_t>(gs.h * gs.w));
    return gb;
}

// ---- concat ------------------------------------------------------------------

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const Shape4 as = a.shape(), bs = b.shape();
    require(as.n == bs.n && as.h == bs.h && as.w == bs.w,
            strprintf("concat_channels: %s vs %s", as.str().c_str(), bs.str().c_str()));
    Tensor out({as.n, as.c + bs.c, as.h, as.w});
    const std::size_t hw = static_cast<std::size_t>(as.h * as.w) * sizeof(double);
    for (i64 n = 0; n < as.n; ++n) {
        for (i64 c = 0; c < as.c; ++c) std::memcpy(out.plane(n, c), a.plane(n, c), hw);
        for (i64 c = 0; c < bs.c; ++c) std::memcpy(out.plane(n, as.c + c), b.plane(n, c), hw);
    }
    return out;
}

std::pair<Tensor, Tensor> concat_channels_grad(const Tensor& gout, i64 ca, i64 cb) {
    const Shape4 gs = gout.shape();
    require(gs.c == ca + cb, "concat_channels_grad: channel split mismatch");
    Tensor ga({gs.n, ca, gs.h, gs.w}), gb({gs.n, cb, gs.h, gs.w});
    const std::size_t hw = static_cast<std::size_t>(gs.h * gs.w) * sizeof(double);
    for (i64 n = 0; n < gs.n; ++n) {
        for (i64 c = 0; c < ca; ++c) std::memcpy(ga.plane(n, c), gout.plane(n, c), hw);
        for (i64 c = 0; c < cb; ++c) std::memcpy(gb.plane(n, c), gout.plane(n, ca + c), hw);
    }
    return {std::move(ga), std::move(gb)};
}

// ---- layout bridges ----------------------------------------------------------

Matrix3 flatten_spatial(const Tensor& x) {
    const Shape4 xs = x.shape();
    return Matrix3({xs.n, xs.c, xs.h * xs.w}, x.vec());
}

Tensor unflatten_spatial(const Matrix3& m, i64 h, i64 w) {
    const Shape3 ms = m.shape();
    require(ms.c == h * w, strprintf("unflatten_spatial: %lld != %lldx%lld", (long long)ms.c, (long long)h, (long long)w));
    return Tensor({ms.n, ms.r, h, w}, m.vec());
}

Matrix3 transpose_last(const Matrix3& m) {
    const Shape3 ms = m.shape();
    Matrix3 out({ms.n, ms.c, ms.r});
    for (i64 n = 0; n < ms.n; ++n)
        for (i64 r = 0; r < ms.r; ++r)
            for (i64 c = 0; c < ms.c; ++c) out.at(n, c, r) = m.at(n, r, c);
    return out;
}

// ---- batched matrix ops -------------------------------------------------------

Matrix3 bmm(const Matrix3& a, const Matrix3& b) {
    const Shape3 as = a.shape(), bs = b.shape();
    require(as.n == bs.n, strprintf("bmm: batch %lld != %lld", (long long)as.n, (long long)bs.n));
    require(as.c == bs.r, strprintf("bmm: inner dims %lld != %lld", (long long)as.c, (long long)bs.r));
    const auto& K = kernels::active();

    Matrix3 out({as.n, as.r, bs.c});
    for (i64 n = 0; n < as.n; ++n) {
        for (i64 i = 0; i < as.r; ++i) {
            double* orow = out.row(n, i);
            const double* arow = a.row(n, i);
            for (i64 k = 0; k < as.c; ++k) {
                if (arow[k] == 0.0) continue;
                K.axpy(orow, b.row(n, k), arow[k], static_cast<std::size_t>(bs.c));
            }
        }
    }
    return out;
}

Matrix3 bmm_grad_a(const Matrix3& gout, const Matrix3& b) {
    const Shape3 gs = gout.shape(), bs = b.shape();
    const auto& K = kernels::active();
    Matrix3 ga({gs.n, gs.r, bs.r});
    for (i64 n = 0; n < gs.n; ++n)
        for (i64 i = 0; i < gs.r; ++i)
            for (i64 k = 0; k < bs.r; ++k)
                ga.at(n, i, k) = K.dot(gout.row(n, i), b.row(n, k), static_cast<std::size_t>(gs.c));
    return ga;
}

Matrix3 bmm_grad_b(const Matrix3& gout, const Matrix3& a) {
    const Shape3 gs = gout.shape(), as = a.shape();
    const auto& K = kernels::active();
    Matrix3 gb({gs.n, as.c, gs.c});
    for (i64 n = 0; n < gs.n; ++n)
        for (i64 i = 0; i < as.r; ++i)
            for (i64 k = 0; k < as.c; ++k) {
                if (a.at(n, i, k) == 0.0) continue;
                K.axpy(gb.row(n, k), gout.row(n, i), a.at(n, i, k), static_cast<std::size_t>(gs.c));
            }
    return gb;
}

Matrix3 softmax_lastdim(const Matrix3& x) {
    const Shape3 xs = x.shape();
    require(xs.c >= 1, "softmax_lastdim: empty rows");
    Matrix3 out(xs);
    for (i64 n = 0; n < xs.n; ++n) {
        for (i64 r = 0; r < xs.r; ++r) {
            const double* xr = x.row(n, r);
            double* yr = out.row(n, r);
            double m = xr[0];
            for (i64 c = 1; c < xs.c; ++c) m = std::max(m, xr[c]);
            double s = 0.0;
            for (i64 c = 0; c < xs.c; ++c) {
                yr[c] = std::exp(xr[c] - m);
                s += yr[c];
            }
            const double inv = 1.0 / s;
            for (i64 c = 0; c < xs.c; ++c) yr[c] *= inv;
        }
    }
    return out;
}

Matrix3 softmax_lastdim_grad(const Matrix3& gout, const Matrix3& y) {
    const Shape3 ys = y.shape();
    Matrix3 gx(ys);
    for (i64 n = 0; n < ys.n; ++n) {
        for (i64 r = 0; r < ys.r; ++r) {
            const double* gr = gout.row(n, r);
            const double* yr = y.row(n, r);
            double* dr = gx.row(n, r);
            const double d = kernels::active().dot(gr, yr, static_cast<std::size_t>(ys.c));
            for (i64 c = 0; c < ys.c; ++c) dr[c] = yr[c] * (gr[c] - d);
        }
    }
    return gx;
}

// ---- Sobel -------------------------------------------------------------------

Tensor sobel_magnitude(const Tensor& x, SobelState* state) {
    const Shape4 xs = x.shape();
    require(xs.h >= 1 && xs.w >= 1, "sobel_magnitude: empty plane");
    const Tensor xp = pad_input(x, 1, 1, 1, 1, PadMode::replicate);
    const i64 wp = xs.w + 2;

    Tensor gx(xs), gy(xs), g(xs);
    std::vector<double> vs(static_cast<std::size_t>(xs.h * wp));
    std::vector<double> hs(static_cast<std::size_t>((xs.h + 2) * xs.w));
    for (i64 n = 0; n < xs.n; ++n) {
        for (i64 c = 0; c < xs.c; ++c) {
            const double* p = xp.plane(n, c);
            // vertical [1,2,1] smoothing, symmetric association for exact
            // flip equivariance
            for (i64 y = 0; y < xs.h; ++y)
                for (i64 xx = 0; xx < wp; ++xx)
                    vs[static_cast<std::size_t>(y * wp + xx)] =
                        (p[y * wp + xx] + p[(y + 2) * wp + xx]) + 2.0 * p[(y + 1) * wp + xx];
            // horizontal [1,2,1] smoothing
            for (i64 y = 0; y < xs.h + 2; ++y)
                for (i64 xx = 0; xx < xs.w; ++xx)
                    hs[static_cast<std::size_t>(y * xs.w + xx)] =
                        (p[y * wp + xx] + p[y * wp + xx + 2]) + 2.0 * p[y * wp + xx + 1];

            double* gxp = gx.plane(n, c);
            double* gyp = gy.plane(n, c);
            double* gp = g.plane(n, c);
            for (i64 y = 0; y < xs.h; ++y) {
                for (i64 xx = 0; xx < xs.w; ++xx) {
                    const double dx = vs[static_cast<std::size_t>(y * wp + xx)] -
                                      vs[static_cast<std::size_t>(y * wp + xx + 2)];
                    const double dy = hs[static_cast<std::size_t>(y * xs.w + xx)] -
                                      hs[static_cast<std::size_t>((y + 2) * xs.w + xx)];
                    gxp[y * xs.w + xx] = dx;
                    gyp[y * xs.w + xx] = dy;
                    gp[y * xs.w + xx] = std::sqrt(dx * dx + dy * dy);
                }
            }
        }
    }
    if (state != nullptr) {
        state->gx = gx;
        state->gy = gy;
        state->g = g;
    }
    return g;
}

Tensor sobel_magnitude_grad(const Tensor& gout, const SobelState& st) {
    const Shape4 xs = st.g.shape();
    const i64 wp = xs.w + 2;
    Tensor gradx(xs);
    std::vector<double> dvs, dhs, dpad;
    for (i64 n = 0; n < xs.n; ++n) {
        for (i64 c = 0; c < xs.c; ++c) {
            const double* gp = gout.plane(n, c);
            const double* gxp = st.gx.plane(n, c);
            const double* gyp = st.gy.plane(n, c);
            const double* gg = st.g.plane(n, c);

            dvs.assign(static_cast<std::size_t>(xs.h * wp), 0.0);
            dhs.assign(static_cast<std::size_t>((xs.h + 2) * xs.w), 0.0);
            dpad.assign(static_cast<std::size_t>((xs.h + 2) * wp), 0.0);
            for (i64 y = 0; y < xs.h; ++y) {
                for (i64 xx = 0; xx < xs.w; ++xx) {
                    const i64 i = y * xs.w + xx;
                    if (gg[i] == 0.0) continue; // subgradient 0 at the cusp
                    const double scale = gp[i] / gg[i];
                    const double dgx = scale * gxp[i];
                    const double dgy = scale * gyp[i];
                    dvs[static_cast<std::size_t>(y * wp + xx)] += dgx;
                    dvs[static_cast<std::size_t>(y * wp + xx + 2)] -= dgx;
                    dhs[static_cast<std::size_t>(y * xs.w + xx)] += dgy;
                    dhs[static_cast<std::size_t>((y + 2) * xs.w + xx)] -= dgy;
                }
            }
            for (i64 y = 0; y < xs.h; ++y) {
                for (i64 xx = 0; xx < wp; ++xx) {
                    const double d = dvs[static_cast<std::size_t>(y * wp + xx)];
                    if (d == 0.0) continue;
                    dpad[static_cast<std::size_t>(y * wp + xx)] += d;
                    dpad[static_cast<std::size_t>((y + 2) * wp + xx)] += d;
                    dpad[static_cast<std::size_t>((y + 1) * wp + xx)] += 2.0 * d;
                }
            }
            for (i64 y = 0; y < xs.h + 2; ++y) {
                for (i64 xx = 0; xx < xs.w; ++xx) {
                    const double d = dhs[static_cast<std::size_t>(y * xs.w + xx)];
                    if (d == 0.0) continue;
                    dpad[static_cast<std::size_t>(y * wp + xx)] += d;
                    dpad[static_cast<std::size_t>(y * wp + xx + 2)] += d;
                    dpad[static_cast<std::size_t>(y * wp + xx + 1)] += 2.0 * d;
                }
            }
            // fold replicate padding back onto edge pixels
            double* dst = gradx.plane(n, c);
            for (i64 y = 0; y < xs.h + 2; ++y) {
                const i64 cy = std::clamp<i64>(y - 1, 0, xs.h - 1);
                for (i64 xx = 0; xx < wp; ++xx) {
                    const i64 cx = std::clamp<i64>(xx - 1, 0, xs.w - 1);
                    dst[cy * xs.w + cx] += dpad[static_cast<std::size_t>(y * wp + xx)];
                }
            }
        }
    }
    return gradx;
}

// ---- binary cross entropy ------------------------------------------------------

Tensor bce(const Tensor& pred, const Tensor& target, double eps) {
    require(pred.shape() == target.shape(),
            strprintf("bce: shape %s != %s", pred.shape().str().c_str(), target.shape().str().c_str()));
    const i64 n = pred.numel();
    const double* p = pred.data();
    const double* t = target.data();
    double acc = 0.0;
    for (i64 i = 0; i < n; ++i) {
        const double pc = std::clamp(p[i], eps, 1.0 - eps);
        acc -= t[i] * std::log(pc) + (1.0 - t[i]) * std::log(1.0 - pc);
    }
    return Tensor::scalar(acc / static_cast<double>(n));
}

Tensor bce_grad_pred(const Tensor& gout, const Tensor& pred, const Tensor& target, double eps) {
    const i64 n = pred.numel();
    const double g = gout.item() / static_cast<double>(n);
    const double* p = pred.data();
    const double* t = target.data();
    Tensor gx(pred.shape());
    double* dp = gx.data();
    for (i64 i = 0; i < n; ++i) {
        if (p[i] <= eps || p[i] >= 1.0 - eps) continue; // clamp active
        dp[i] = g * (-t[i] / p[i] + (1.0 - t[i]) / (1.0 - p[i]));
    }
    return gx;
}

} // namespace lba::ops
