#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracle {

namespace {

double padded_at(const Tensor& x, i64 n, i64 c, i64 y, i64 xx, PadMode pad) {
    const auto& s = x.shape();
    if (pad == PadMode::replicate) {
        y = std::clamp<i64>(y, 0, s.h - 1);
        xx = std::clamp<i64>(xx, 0, s.w - 1);
        return x.at(n, c, y, xx);
    }
    if (y < 0 || y >= s.h || xx < 0 || xx >= s.w) return 0.0;
    return x.at(n, c, y, xx);
}

i64 ceil_div(i64 a, i64 b) { return (a + b - 1) / b; }

} // namespace

Tensor conv2d_naive(const Tensor& x, const Tensor& kernel, const std::vector<double>& bias,
                    int stride, PadMode pad) {
    const auto xs = x.shape();
    const auto ks = kernel.shape();
    const i64 oh = ceil_div(xs.h, stride), ow = ceil_div(xs.w, stride);
    const i64 pad_y = std::max<i64>((oh - 1) * stride + ks.h - xs.h, 0) / 2;
    const i64 pad_x = std::max<i64>((ow - 1) * stride + ks.w - xs.w, 0) / 2;

    Tensor out({xs.n, ks.n, oh, ow});
    for (i64 n = 0; n < xs.n; ++n)
        for (i64 oc = 0; oc < ks.n; ++oc)
            for (i64 oy = 0; oy < oh; ++oy)
                for (i64 ox = 0; ox < ow; ++ox) {
                    double acc = bias[static_cast<std::size_t>(oc)];
                    for (i64 ic = 0; ic < ks.c; ++ic)
                        for (i64 ky = 0; ky < ks.h; ++ky)
                            for (i64 kx = 0; kx < ks.w; ++kx)
                                acc += kernel.at(oc, ic, ky, kx) *
                                       padded_at(x, n, ic, oy * stride + ky - pad_y,
                                                 ox * stride + kx - pad_x, pad);
                    out.at(n, oc, oy, ox) = acc;
                }
    return out;
}

Tensor conv_transpose2d_naive(const Tensor& x, const Tensor& kernel, const std::vector<double>& bias,
                              int stride) {
    const auto xs = x.shape();
    const auto ks = kernel.shape(); // (ci, co, kh, kw)
    const i64 oh = (xs.h - 1) * stride + ks.h, ow = (xs.w - 1) * stride + ks.w;
    Tensor out({xs.n, ks.c, oh, ow});
    for (i64 n = 0; n < xs.n; ++n)
        for (i64 oc = 0; oc < ks.c; ++oc) {
            for (i64 oy = 0; oy < oh; ++oy)
                for (i64 ox = 0; ox < ow; ++ox) out.at(n, oc, oy, ox) = bias[static_cast<std::size_t>(oc)];
            for (i64 ic = 0; ic < ks.n; ++ic)
                for (i64 iy = 0; iy < xs.h; ++iy)
                    for (i64 ix = 0; ix < xs.w; ++ix)
                        for (i64 ky = 0; ky < ks.h; ++ky)
                            for (i64 kx = 0; kx < ks.w; ++kx)
                                out.at(n, oc, iy * stride + ky, ix * stride + kx) +=
                                    x.at(n, ic, iy, ix) * kernel.at(ic, oc, ky, kx);
        }
    return out;
}

Tensor fully_connected_naive(const Tensor& x, const Tensor& weight, const std::vector<double>& bias) {
    const auto xs = x.shape();
    const auto ws = weight.shape();
    Tensor out({xs.n, ws.n, 1, 1});
    for (i64 n = 0; n < xs.n; ++n)
        for (i64 o = 0; o < ws.n; ++o) {
            double acc = bias[static_cast<std::size_t>(o)];
            for (i64 i = 0; i < ws.c; ++i) acc += weight.at(o, i, 0, 0) * x.at(n, i, 0, 0);
            out.at(n, o, 0, 0) = acc;
        }
    return out;
}

Matrix3 bmm_naive(const Matrix3& a, const Matrix3& b) {
    const auto as = a.shape();
    const auto bs = b.shape();
    Matrix3 out({as.n, as.r, bs.c});
    for (i64 n = 0; n < as.n; ++n)
        for (i64 i = 0; i < as.r; ++i)
            for (i64 j = 0; j < bs.c; ++j) {
                double acc = 0.0;
                for (i64 k = 0; k < as.c; ++k) acc += a.at(n, i, k) * b.at(n, k, j);
                out.at(n, i, j) = acc;
            }
    return out;
}

Matrix3 softmax_naive(const Matrix3& x) {
    const auto xs = x.shape();
    Matrix3 out(xs);
    for (i64 n = 0; n < xs.n; ++n)
        for (i64 r = 0; r < xs.r; ++r) {
            double denom = 0.0;
            for (i64 c = 0; c < xs.c; ++c) denom += std::exp(x.at(n, r, c));
            for (i64 c = 0; c < xs.c; ++c) out.at(n, r, c) = std::exp(x.at(n, r, c)) / denom;
        }
    return out;
}

Tensor batchnorm_naive(const Tensor& x, const std::vector<double>& gamma,
                       const std::vector<double>& beta, double eps) {
    const auto xs = x.shape();
    Tensor out(xs);
    const double population = static_cast<double>(xs.n * xs.h * xs.w);
    for (i64 c = 0; c < xs.c; ++c) {
        double mean = 0.0;
        for (i64 n = 0; n < xs.n; ++n)
            for (i64 y = 0; y < xs.h; ++y)
                for (i64 xx = 0; xx < xs.w; ++xx) mean += x.at(n, c, y, xx);
        mean /= population;
        double var = 0.0;
        for (i64 n = 0; n < xs.n; ++n)
            for (i64 y = 0; y < xs.h; ++y)
                for (i64 xx = 0; xx < xs.w; ++xx) {
                    const double d = x.at(n, c, y, xx) - mean;
                    var += d * d;
                }
        var /= population;
        const double denom = std::sqrt(var + eps);
        for (i64 n = 0; n < xs.n; ++n)
            for (i64 y = 0; y < xs.h; ++y)
                for (i64 xx = 0; xx < xs.w; ++xx)
                    out.at(n, c, y, xx) = gamma[static_cast<std::size_t>(c)] *
                                              (x.at(n, c, y, xx) - mean) / denom +
                                          beta[static_cast<std::size_t>(c)];
    }
    return out;
}

Tensor bilinear_naive(const Tensor& x, i64 oh, i64 ow) {
    const auto xs = x.shape();
    Tensor out({xs.n, xs.c, oh, ow});
    for (i64 n = 0; n < xs.n; ++n)
        for (i64 c = 0; c < xs.c; ++c)
            for (i64 oy = 0; oy < oh; ++oy)
                for (i64 ox = 0; ox < ow; ++ox) {
                    double sy = (static_cast<double>(oy) + 0.5) * static_cast<double>(xs.h) /
                                    static_cast<double>(oh) -
                                0.5;
                    double sx = (static_cast<double>(ox) + 0.5) * static_cast<double>(xs.w) /
                                    static_cast<double>(ow) -
                                0.5;
                    sy = std::clamp(sy, 0.0, static_cast<double>(xs.h - 1));
                    sx = std::clamp(sx, 0.0, static_cast<double>(xs.w - 1));
                    const i64 y0 = static_cast<i64>(std::floor(sy));
                    const i64 x0 = static_cast<i64>(std::floor(sx));
                    const i64 y1 = std::min<i64>(y0 + 1, xs.h - 1);
                    const i64 x1 = std::min<i64>(x0 + 1, xs.w - 1);
                    const double fy = sy - static_cast<double>(y0);
                    const double fx = sx - static_cast<double>(x0);
                    out.at(n, c, oy, ox) = (1 - fy) * (1 - fx) * x.at(n, c, y0, x0) +
                                           (1 - fy) * fx * x.at(n, c, y0, x1) +
                                           fy * (1 - fx) * x.at(n, c, y1, x0) +
                                           fy * fx * x.at(n, c, y1, x1);
                }
    return out;
}

Tensor global_avg_pool_naive(const Tensor& x) {
    const auto xs = x.shape();
    Tensor out({xs.n, xs.c, 1, 1});
    for (i64 n = 0; n < xs.n; ++n)
        for (i64 c = 0; c < xs.c; ++c) {
            double acc = 0.0;
            for (i64 y = 0; y < xs.h; ++y)
                for (i64 xx = 0; xx < xs.w; ++xx) acc += x.at(n, c, y, xx);
            out.at(n, c, 0, 0) = acc / static_cast<double>(xs.h * xs.w);
        }
    return out;
}

Tensor channel_max_naive(const Tensor& x) {
    const auto xs = x.shape();
    Tensor out({xs.n, 1, xs.h, xs.w});
    for (i64 n = 0; n < xs.n; ++n)
        for (i64 y = 0; y < xs.h; ++y)
            for (i64 xx = 0; xx < xs.w; ++xx) {
                double m = x.at(n, 0, y, xx);
                for (i64 c = 1; c < xs.c; ++c) m = std::max(m, x.at(n, c, y, xx));
                out.at(n, 0, y, xx) = m;
            }
    return out;
}

Tensor elementwise_expand_naive(int op, const Tensor& a, const Tensor& b) {
    const auto as = a.shape();
    const auto bs = b.shape();
    Tensor expanded(as);
    for (i64 n = 0; n < as.n; ++n)
        for (i64 c = 0; c < as.c; ++c)
            for (i64 y = 0; y < as.h; ++y)
                for (i64 xx = 0; xx < as.w; ++xx)
                    expanded.at(n, c, y, xx) = b.at(bs.n == 1 ? 0 : n, bs.c == 1 ? 0 : c,
                                                    bs.h == 1 ? 0 : y, bs.w == 1 ? 0 : xx);
    Tensor out(as);
    for (i64 i = 0; i < as.numel(); ++i) {
        const double av = a.data()[i], bv = expanded.data()[i];
        out.data()[i] = op == 0 ? av + bv : op == 1 ? av - bv : av * bv;
    }
    return out;
}

Tensor sobel_naive(const Tensor& x) {
    static const double kx[3][3] = {{1, 0, -1}, {2, 0, -2}, {1, 0, -1}};
    static const double ky[3][3] = {{1, 2, 1}, {0, 0, 0}, {-1, -2, -1}};
    const auto xs = x.shape();
    Tensor out(xs);
    for (i64 n = 0; n < xs.n; ++n)
        for (i64 c = 0; c < xs.c; ++c)
            for (i64 y = 0; y < xs.h; ++y)
                for (i64 xx = 0; xx < xs.w; ++xx) {
                    double gx = 0.0, gy = 0.0;
                    for (int dy = 0; dy < 3; ++dy)
                        for (int dx = 0; dx < 3; ++dx) {
                            const double v =
                                padded_at(x, n, c, y + dy - 1, xx + dx - 1, PadMode::replicate);
                            gx += kx[dy][dx] * v;
                            gy += ky[dy][dx] * v;
                        }
                    out.at(n, c, y, xx) = std::sqrt(gx * gx + gy * gy);
                }
    return out;
}

double bce_naive(const Tensor& pred, const Tensor& target, double eps) {
    double acc = 0.0;
    for (i64 i = 0; i < pred.numel(); ++i) {
        const double p = std::clamp(pred.data()[i], eps, 1.0 - eps);
        const double t = target.data()[i];
        acc += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
    }
    return acc / static_cast<double>(pred.numel());
}

namespace {

Tensor morph3x3(const Tensor& mask, bool dilate) {
    const auto s = mask.shape();
    Tensor out(s);
    for (i64 n = 0; n < s.n; ++n)
        for (i64 y = 0; y < s.h; ++y)
            for (i64 x = 0; x < s.w; ++x) {
                double v = dilate ? 0.0 : 1.0;
                for (i64 dy = -1; dy <= 1; ++dy)
                    for (i64 dx = -1; dx <= 1; ++dx) {
                        const i64 yy = y + dy, xx = x + dx;
                        const double m = (yy >= 0 && yy < s.h && xx >= 0 && xx < s.w)
                                             ? mask.at(n, 0, yy, xx)
                                             : 0.0;
                        v = dilate ? std::max(v, m) : std::min(v, m);
                    }
                out.at(n, 0, y, x) = v;
            }
    return out;
}

} // namespace

Tensor dilate3x3_naive(const Tensor& mask) { return morph3x3(mask, true); }
Tensor erode3x3_naive(const Tensor& mask) { return morph3x3(mask, false); }

// ---- metric references ------------------------------------------------------

using lba::metrics::BinaryMask;
using lba::metrics::SaliencyMap;

double mae_naive(const SaliencyMap& s, const BinaryMask& g) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.v.size(); ++i) acc += std::fabs(s.v[i] - static_cast<double>(g.v[i]));
    return acc / static_cast<double>(s.v.size());
}

namespace {

double object_sim_naive(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double m = 0.0;
    for (const double v : xs) m += v;
    m /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (const double v : xs) ss += (v - m) * (v - m);
    const double sd = xs.size() > 1 ? std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0)) : 0.0;
    return 2.0 * m / (m * m + 1.0 + 2.0 * sd + std::numeric_limits<double>::epsilon());
}

double ssim_like_naive(const std::vector<double>& xs, const std::vector<double>& ys) {
    const double n = static_cast<double>(xs.size());
    if (xs.empty()) return 0.0;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double vx = 0.0, vy = 0.0, cov = 0.0;
    if (xs.size() > 1) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            vx += (xs[i] - mx) * (xs[i] - mx);
            vy += (ys[i] - my) * (ys[i] - my);
            cov += (xs[i] - mx) * (ys[i] - my);
        }
        vx /= n - 1.0;
        vy /= n - 1.0;
        cov /= n - 1.0;
    }
    const double alpha = 4.0 * mx * my * cov;
    const double beta = (mx * mx + my * my) * (vx + vy);
    if (alpha != 0.0) return alpha / (beta + std::numeric_limits<double>::epsilon());
    return beta == 0.0 ? 1.0 : 0.0;
}

i64 split_naive(double e, i64 extent) {
    const double fl = std::floor(e);
    i64 k;
    if (e - fl == 0.5)
        k = static_cast<i64>(fl) + (e <= static_cast<double>(extent) / 2.0 ? 1 : 0);
    else
        k = static_cast<i64>(std::floor(e + 0.5));
    return std::clamp<i64>(k, 1, extent - 1);
}

} // namespace

double s_measure_naive(const SaliencyMap& s, const BinaryMask& g, double alpha) {
    i64 nfg = 0;
    for (const auto v : g.v) nfg += v != 0;
    const i64 total = g.h * g.w;
    if (nfg == 0) {
        double m = 0.0;
        for (const double v : s.v) m += v;
        return std::clamp(1.0 - m / static_cast<double>(total), 0.0, 1.0);
    }
    if (nfg == total) {
        double m = 0.0;
        for (const double v : s.v) m += v;
        return std::clamp(m / static_cast<double>(total), 0.0, 1.0);
    }

    // object term
    std::vector<double> fg, bg;
    for (i64 i = 0; i < total; ++i) {
        if (g.v[static_cast<std::size_t>(i)] != 0)
            fg.push_back(s.v[static_cast<std::size_t>(i)]);
        else
            bg.push_back(1.0 - s.v[static_cast<std::size_t>(i)]);
    }
    const double mu = static_cast<double>(nfg) / static_cast<double>(total);
    const double so = mu * object_sim_naive(fg) + (1.0 - mu) * object_sim_naive(bg);

    // region term
    double cx = 0.0, cy = 0.0;
    for (i64 y = 0; y < g.h; ++y)
        for (i64 x = 0; x < g.w; ++x)
            if (g.v[static_cast<std::size_t>(y * g.w + x)] != 0) {
                cx += static_cast<double>(x) + 0.5;
                cy += static_cast<double>(y) + 0.5;
            }
    const i64 kx = split_naive(cx / static_cast<double>(nfg), g.w);
    const i64 ky = split_naive(cy / static_cast<double>(nfg), g.h);
    double sr = 0.0;
    const i64 ybounds[3] = {0, ky, g.h};
    const i64 xbounds[3] = {0, kx, g.w};
    for (int qy = 0; qy < 2; ++qy)
        for (int qx = 0; qx < 2; ++qx) {
            std::vector<double> xs, ys;
            for (i64 y = ybounds[qy]; y < ybounds[qy + 1]; ++y)
                for (i64 x = xbounds[qx]; x < xbounds[qx + 1]; ++x) {
                    xs.push_back(s.v[static_cast<std::size_t>(y * s.w + x)]);
                    ys.push_back(static_cast<double>(g.v[static_cast<std::size_t>(y * g.w + x)]));
                }
            const double weight = static_cast<double>(xs.size()) / static_cast<double>(total);
            sr += weight * ssim_like_naive(xs, ys);
        }

    return std::clamp(alpha * so + (1.0 - alpha) * sr, 0.0, 1.0);
}

CurvePoint point_at_naive(const SaliencyMap& s, const BinaryMask& g, double tau, double beta2) {
    const i64 total = s.h * s.w;
    i64 tp = 0, fp = 0, fn = 0;
    std::vector<std::uint8_t> fm(static_cast<std::size_t>(total));
    i64 nfg = 0;
    for (i64 i = 0; i < total; ++i) {
        const bool pred = s.v[static_cast<std::size_t>(i)] >= tau;
        const bool truth = g.v[static_cast<std::size_t>(i)] != 0;
        fm[static_cast<std::size_t>(i)] = pred ? 1 : 0;
        nfg += truth;
        if (pred && truth) ++tp;
        if (pred && !truth) ++fp;
        if (!pred && truth) ++fn;
    }
    CurvePoint pt{};
    if (nfg > 0) {
        pt.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        pt.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        const double denom = beta2 * pt.precision + pt.recall;
        pt.f = denom > 0.0 ? (1.0 + beta2) * pt.precision * pt.recall / denom : 0.0;
    }

    // E: per-pixel alignment
    double mean_fm = 0.0, mean_g = 0.0;
    for (i64 i = 0; i < total; ++i) {
        mean_fm += fm[static_cast<std::size_t>(i)];
        mean_g += g.v[static_cast<std::size_t>(i)];
    }
    mean_fm /= static_cast<double>(total);
    mean_g /= static_cast<double>(total);
    double e_acc = 0.0;
    for (i64 i = 0; i < total; ++i) {
        double enhanced;
        if (nfg == 0) {
            enhanced = 1.0 - fm[static_cast<std::size_t>(i)];
        } else if (nfg == total) {
            enhanced = fm[static_cast<std::size_t>(i)];
        } else {
            const double xg = static_cast<double>(g.v[static_cast<std::size_t>(i)]) - mean_g;
            const double xf = static_cast<double>(fm[static_cast<std::size_t>(i)]) - mean_fm;
            const double phi = 2.0 * xg * xf / (xg * xg + xf * xf + 1e-8);
            enhanced = (phi + 1.0) * (phi + 1.0) / 4.0;
        }
        e_acc += enhanced;
    }
    pt.e = e_acc / static_cast<double>(total);
    return pt;
}

std::array<CurvePoint, 256> curve_naive(const SaliencyMap& s, const BinaryMask& g, double beta2) {
    std::array<CurvePoint, 256> out{};
    for (int t = 0; t < 256; ++t)
        out[static_cast<std::size_t>(t)] = point_at_naive(s, g, static_cast<double>(t) / 255.0, beta2);
    return out;
}

double adaptive_tau_naive(const SaliencyMap& s) {
    double m = 0.0;
    for (const double v : s.v) m += v;
    m /= static_cast<double>(s.v.size());
    return std::min(2.0 * m, 1.0);
}

} // namespace oracle
