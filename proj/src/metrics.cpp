#include "lba/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lba::metrics {

namespace {

constexpr double kAlignEps = 1e-8;

void check_dims(const SaliencyMap& s, const BinaryMask& g) {
    require(s.h == g.h && s.w == g.w,
            strprintf("metrics: saliency %lldx%lld != mask %lldx%lld", (long long)s.h, (long long)s.w,
                      (long long)g.h, (long long)g.w));
    require(s.h >= 1 && s.w >= 1, "metrics: empty image");
    require(static_cast<i64>(s.v.size()) == s.h * s.w && static_cast<i64>(g.v.size()) == g.h * g.w,
            "metrics: buffer size mismatch");
}

i64 foreground_count(const BinaryMask& g) {
    i64 n = 0;
    for (const std::uint8_t v : g.v) n += v != 0 ? 1 : 0;
    return n;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// ---- S-measure -------------------------------------------------------------

// 2m/(m^2 + 1 + 2*sigma + eps), sigma the sample standard deviation
double object_similarity(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    const double n = static_cast<double>(values.size());
    const double m = mean_of(values);
    double ss = 0.0;
    for (const double v : values) ss += (v - m) * (v - m);
    const double sigma = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return 2.0 * m / (m * m + 1.0 + 2.0 * sigma + std::numeric_limits<double>::epsilon());
}

double s_object(const SaliencyMap& s, const BinaryMask& g) {
    std::vector<double> fg, bg;
    const i64 total = s.h * s.w;
    for (i64 i = 0; i < total; ++i) {
        if (g.v[static_cast<std::size_t>(i)] != 0)
            fg.push_back(s.v[static_cast<std::size_t>(i)]);
        else
            bg.push_back(1.0 - s.v[static_cast<std::size_t>(i)]);
    }
    const double mu = static_cast<double>(fg.size()) / static_cast<double>(total);
    return mu * object_similarity(fg) + (1.0 - mu) * object_similarity(bg);
}

// Split coordinate in pixel-edge units: half-up rounding, exact .5 frac
// (centroid on a pixel center) breaks toward the image center so mirrored
// inputs split into mirrored quadrants. Clamped so both sides are non-empty.
i64 split_index(double edge_centroid, i64 extent) {
    const double fl = std::floor(edge_centroid);
    const double frac = edge_centroid - fl;
    i64 k;
    if (frac == 0.5)
        k = static_cast<i64>(fl) + (edge_centroid <= static_cast<double>(extent) / 2.0 ? 1 : 0);
    else
        k = static_cast<i64>(std::floor(edge_centroid + 0.5));
    return std::clamp<i64>(k, 1, extent - 1);
}

// SSIM-like regional score on one quadrant.
double region_q(const SaliencyMap& s, const BinaryMask& g, i64 y0, i64 y1, i64 x0, i64 x1) {
    const i64 count = (y1 - y0) * (x1 - x0);
    if (count <= 0) return 0.0;
    double sx = 0.0, sy = 0.0;
    for (i64 y = y0; y < y1; ++y) {
        for (i64 x = x0; x < x1; ++x) {
            sx += s.v[static_cast<std::size_t>(y * s.w + x)];
            sy += static_cast<double>(g.v[static_cast<std::size_t>(y * g.w + x)]);
        }
    }
    const double n = static_cast<double>(count);
    const double mx = sx / n, my = sy / n;
    double vx = 0.0, vy = 0.0, cov = 0.0;
    for (i64 y = y0; y < y1; ++y) {
        for (i64 x = x0; x < x1; ++x) {
            const double dx = s.v[static_cast<std::size_t>(y * s.w + x)] - mx;
            const double dy = static_cast<double>(g.v[static_cast<std::size_t>(y * g.w + x)]) - my;
            vx += dx * dx;
            vy += dy * dy;
            cov += dx * dy;
        }
    }
    if (count > 1) {
        vx /= n - 1.0;
        vy /= n - 1.0;
        cov /= n - 1.0;
    } else {
        vx = vy = cov = 0.0;
    }
    const double alpha = 4.0 * mx * my * cov;
    const double beta = (mx * mx + my * my) * (vx + vy);
    if (alpha != 0.0) return alpha / (beta + std::numeric_limits<double>::epsilon());
    return beta == 0.0 ? 1.0 : 0.0;
}

double s_region(const SaliencyMap& s, const BinaryMask& g) {
    // foreground centroid in edge coordinates (pixel i spans [i, i+1))
    double sum_x = 0.0, sum_y = 0.0;
    i64 nfg = 0;
    for (i64 y = 0; y < g.h; ++y) {
        for (i64 x = 0; x < g.w; ++x) {
            if (g.v[static_cast<std::size_t>(y * g.w + x)] != 0) {
                sum_x += static_cast<double>(x) + 0.5;
                sum_y += static_cast<double>(y) + 0.5;
                ++nfg;
            }
        }
    }
    const i64 cx = split_index(sum_x / static_cast<double>(nfg), g.w);
    const i64 cy = split_index(sum_y / static_cast<double>(nfg), g.h);

    const double area = static_cast<double>(g.h * g.w);
    double score = 0.0;
    const i64 ys[3] = {0, cy, g.h};
    const i64 xs[3] = {0, cx, g.w};
    for (int qy = 0; qy < 2; ++qy) {
        for (int qx = 0; qx < 2; ++qx) {
            const i64 y0 = ys[qy], y1 = ys[qy + 1], x0 = xs[qx], x1 = xs[qx + 1];
            const double wq = static_cast<double>((y1 - y0) * (x1 - x0)) / area;
            score += wq * region_q(s, g, y0, y1, x0, x1);
        }
    }
    return score;
}

} // namespace

double mae(const SaliencyMap& s, const BinaryMask& g) {
    check_dims(s, g);
    double acc = 0.0;
    const i64 total = s.h * s.w;
    for (i64 i = 0; i < total; ++i)
        acc += std::fabs(s.v[static_cast<std::size_t>(i)] - static_cast<double>(g.v[static_cast<std::size_t>(i)]));
    return acc / static_cast<double>(total);
}

double s_measure(const SaliencyMap& s, const BinaryMask& g, double alpha) {
    check_dims(s, g);
    const i64 nfg = foreground_count(g);
    const i64 total = g.h * g.w;
    double score;
    if (nfg == 0) {
        score = 1.0 - mean_of(s.v);
    } else if (nfg == total) {
        score = mean_of(s.v);
    } else {
        score = alpha * s_object(s, g) + (1.0 - alpha) * s_region(s, g);
    }
    return std::clamp(score, 0.0, 1.0);
}

namespace {

struct Counts {
    i64 tp = 0, fp = 0, fn = 0, tn = 0;
};

// Exact per-threshold confusion counts via a sorted scan: identical integers
// to a naive recount with s >= tau.
class ThresholdCounter {
public:
    ThresholdCounter(const SaliencyMap& s, const BinaryMask& g) {
        const i64 total = s.h * s.w;
        order_.resize(static_cast<std::size_t>(total));
        std::iota(order_.begin(), order_.end(), 0);
        std::sort(order_.begin(), order_.end(), [&](i64 a, i64 b) {
            return s.v[static_cast<std::size_t>(a)] > s.v[static_cast<std::size_t>(b)];
        });
        sorted_.resize(order_.size());
        prefix_fg_.resize(order_.size() + 1, 0);
        for (std::size_t i = 0; i < order_.size(); ++i) {
            sorted_[i] = s.v[static_cast<std::size_t>(order_[i])];
            prefix_fg_[i + 1] = prefix_fg_[i] + (g.v[static_cast<std::size_t>(order_[i])] != 0 ? 1 : 0);
        }
        total_ = total;
        nfg_ = prefix_fg_.back();
    }

    Counts at(double tau) const {
        // number of predictions with s >= tau (sorted_ is descending)
        const auto it = std::lower_bound(sorted_.begin(), sorted_.end(), tau,
                                         [](double v, double limit) { return v >= limit; });
        const i64 npred = static_cast<i64>(std::distance(sorted_.begin(), it));
        Counts c;
        c.tp = prefix_fg_[static_cast<std::size_t>(npred)];
        c.fp = npred - c.tp;
        c.fn = nfg_ - c.tp;
        c.tn = total_ - npred - c.fn;
        return c;
    }

    i64 total() const { return total_; }
    i64 nfg() const { return nfg_; }

private:
    std::vector<i64> order_;
    std::vector<double> sorted_;
    std::vector<i64> prefix_fg_;
    i64 total_ = 0, nfg_ = 0;
};

double f_beta(double precision, double recall, double beta2) {
    const double denom = beta2 * precision + recall;
    if (denom == 0.0) return 0.0;
    return (1.0 + beta2) * precision * recall / denom;
}

double adaptive_tau(const SaliencyMap& s) { return std::min(2.0 * mean_of(s.v), 1.0); }

// Closed-form E at one threshold from the confusion counts; equals the
// per-pixel alignment formula because phi takes only four distinct values.
double e_from_counts(const Counts& c, i64 total, i64 nfg) {
    const double n = static_cast<double>(total);
    if (nfg == 0) {
        // enhanced map is 1 - FM
        return static_cast<double>(c.tn + c.fn) / n; // predictions that are 0
    }
    if (nfg == total) {
        // enhanced map is FM
        return static_cast<double>(c.tp + c.fp) / n;
    }
    const double mu_g = static_cast<double>(nfg) / n;
    const double mu_f = static_cast<double>(c.tp + c.fp) / n;
    const double xg_fg = 1.0 - mu_g, xg_bg = -mu_g;
    const double xf_fg = 1.0 - mu_f, xf_bg = -mu_f;
    auto phi = [](double a, double b) { return 2.0 * a * b / (a * a + b * b + kAlignEps); };
    auto enhanced = [&](double a, double b) {
        const double p = phi(a, b) + 1.0;
        return p * p / 4.0;
    };
    double sum = 0.0;
    sum += static_cast<double>(c.tp) * enhanced(xg_fg, xf_fg);
    sum += static_cast<double>(c.fp) * enhanced(xg_bg, xf_fg);
    sum += static_cast<double>(c.fn) * enhanced(xg_fg, xf_bg);
    sum += static_cast<double>(c.tn) * enhanced(xg_bg, xf_bg);
    return sum / n;
}

} // namespace

FSuite f_measure_suite(const SaliencyMap& s, const BinaryMask& g, double beta2) {
    check_dims(s, g);
    FSuite out;
    if (foreground_count(g) == 0) {
        out.degenerate_gt = true; // F undefined without foreground: report zeros
        return out;
    }
    const ThresholdCounter counter(s, g);
    double mean_acc = 0.0;
    for (int t = 0; t < kThresholds; ++t) {
        const Counts c = counter.at(static_cast<double>(t) / 255.0);
        const double precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
        const double recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
        const double f = f_beta(precision, recall, beta2);
        out.precision[static_cast<std::size_t>(t)] = precision;
        out.recall[static_cast<std::size_t>(t)] = recall;
        out.f[static_cast<std::size_t>(t)] = f;
        out.f_max = std::max(out.f_max, f);
        if (t >= 1) mean_acc += f;
    }
    out.f_mean = mean_acc / static_cast<double>(kThresholds - 1);

    const Counts c = counter.at(adaptive_tau(s));
    const double precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    const double recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    out.f_adp = f_beta(precision, recall, beta2);
    return out;
}

ESuite e_measure_suite(const SaliencyMap& s, const BinaryMask& g) {
    check_dims(s, g);
    ESuite out;
    const ThresholdCounter counter(s, g);
    double mean_acc = 0.0;
    for (int t = 0; t < kThresholds; ++t) {
        const double e = e_from_counts(counter.at(static_cast<double>(t) / 255.0), counter.total(), counter.nfg());
        out.e[static_cast<std::size_t>(t)] = e;
        out.e_max = std::max(out.e_max, e);
        if (t >= 1) mean_acc += e;
    }
    out.e_mean = mean_acc / static_cast<double>(kThresholds - 1);
    out.e_adp = e_from_counts(counter.at(adaptive_tau(s)), counter.total(), counter.nfg());
    return out;
}

MetricReport evaluate_pair(const SaliencyMap& s, const BinaryMask& g) {
    check_dims(s, g);
    for (const std::uint8_t v : g.v)
        require(v == 0 || v == 1, "evaluate_pair: mask is not binary");

    SaliencyMap norm = s;
    const auto [mn_it, mx_it] = std::minmax_element(norm.v.begin(), norm.v.end());
    if (*mn_it < 0.0 || *mx_it > 1.0) {
        const double mn = *mn_it, range = *mx_it - mn + 1e-12;
        for (double& v : norm.v) v = (v - mn) / range;
    }

    MetricReport r;
    r.mae = mae(norm, g);
    r.s_alpha = s_measure(norm, g);
    const FSuite fs = f_measure_suite(norm, g);
    const ESuite es = e_measure_suite(norm, g);
    r.f_max = fs.f_max;
    r.f_mean = fs.f_mean;
    r.f_adp = fs.f_adp;
    r.e_max = es.e_max;
    r.e_mean = es.e_mean;
    r.e_adp = es.e_adp;
    r.degenerate_gt = fs.degenerate_gt;
    for (int t = 0; t < kThresholds; ++t) {
        const auto i = static_cast<std::size_t>(t);
        r.curves.threshold[i] = static_cast<double>(t) / 255.0;
        r.curves.precision[i] = fs.precision[i];
        r.curves.recall[i] = fs.recall[i];
        r.curves.f[i] = fs.f[i];
        r.curves.e[i] = es.e[i];
    }
    return r;
}

MetricReport aggregate(const std::vector<MetricReport>& reports) {
    require(!reports.empty(), "aggregate: empty report list");
    MetricReport agg;
    const double inv = 1.0 / static_cast<double>(reports.size());
    for (const MetricReport& r : reports) {
        agg.mae += r.mae * inv;
        agg.s_alpha += r.s_alpha * inv;
        agg.f_mean += r.f_mean * inv;
        agg.f_adp += r.f_adp * inv;
        agg.e_mean += r.e_mean * inv;
        agg.e_adp += r.e_adp * inv;
        for (int t = 0; t < kThresholds; ++t) {
            const auto i = static_cast<std::size_t>(t);
            agg.curves.precision[i] += r.curves.precision[i] * inv;
            agg.curves.recall[i] += r.curves.recall[i] * inv;
            agg.curves.f[i] += r.curves.f[i] * inv;
            agg.curves.e[i] += r.curves.e[i] * inv;
        }
        agg.degenerate_gt = agg.degenerate_gt || r.degenerate_gt;
    }
    for (int t = 0; t < kThresholds; ++t) {
        const auto i = static_cast<std::size_t>(t);
        agg.curves.threshold[i] = static_cast<double>(t) / 255.0;
        agg.f_max = std::max(agg.f_max, agg.curves.f[i]);
        agg.e_max = std::max(agg.e_max, agg.curves.e[i]);
    }
    return agg;
}

} // namespace lba::metrics
