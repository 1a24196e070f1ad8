#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lba/common.hpp"

// Saliency evaluation suite: MAE, S-measure, F-measure and E-measure with
// 256-threshold curves plus max/mean/adaptive variants, and dataset
// aggregation.
//
// Conventions (fixed here and mirrored by the test oracles):
//  - thresholds tau_t = t/255 for t = 0..255; binarization is s >= tau
//  - f_mean / e_mean average the 255 rows with tau > 0 (the tau = 0 row
//    predicts everything foreground and would bar a perfect score)
//  - f_max / e_max maximize over all 256 rows
//  - adaptive threshold tau_adp = min(2 * mean(s), 1)
//  - S-measure: object term O(x) = 2m/(m^2 + 1 + 2s + eps) with m the mean
//    and s the sample (N-1) standard deviation, on s over GT foreground and
//    on 1-s over GT background, mixed by the foreground fraction; region
//    term splits at the GT centroid into 4 quadrants (area-fraction
//    weights) and scores each with the SSIM-like form
//    4*mx*my*cov / ((mx^2+my^2)(var_x+var_y)), with Q=1 when numerator and
//    denominator both vanish and Q=0 when only the numerator does.
//    The centroid split works in pixel-edge coordinates with half-up
//    rounding and ties broken toward the image center, which makes the
//    measure invariant under horizontal/vertical flips.
//    Degenerate GT: all-background -> S = 1 - mean(s); all-foreground ->
//    S = mean(s). Result clamped to [0,1].
//  - E-measure: alignment eps = 1e-8; degenerate GT all-background uses
//    1-FM as the enhanced map, all-foreground uses FM.
//  - dataset f_max/e_max come from the dataset-mean curve; per-image maxima
//    stay available in the per-image reports.

namespace lba::metrics {

inline constexpr double kAlpha = 0.5;
inline constexpr double kBeta2 = 0.3;
inline constexpr int kThresholds = 256;

struct SaliencyMap {
    i64 h = 0, w = 0;
    std::vector<double> v; // row-major, values in [0,1]
};

struct BinaryMask {
    i64 h = 0, w = 0;
    std::vector<std::uint8_t> v; // strictly 0/1
};

struct Curve256 {
    std::array<double, kThresholds> threshold{}, precision{}, recall{}, f{}, e{};
};

struct MetricReport {
    double mae = 0.0;
    double s_alpha = 0.0;
    double f_max = 0.0, f_mean = 0.0, f_adp = 0.0;
    double e_max = 0.0, e_mean = 0.0, e_adp = 0.0;
    Curve256 curves;
    bool degenerate_gt = false; // ground truth had no foreground
};

double mae(const SaliencyMap& s, const BinaryMask& g);
double s_measure(const SaliencyMap& s, const BinaryMask& g, double alpha = kAlpha);

struct FSuite {
    std::array<double, kThresholds> precision{}, recall{}, f{};
    double f_max = 0.0, f_mean = 0.0, f_adp = 0.0;
    bool degenerate_gt = false;
};
FSuite f_measure_suite(const SaliencyMap& s, const BinaryMask& g, double beta2 = kBeta2);

struct ESuite {
    std::array<double, kThresholds> e{};
    double e_max = 0.0, e_mean = 0.0, e_adp = 0.0;
};
ESuite e_measure_suite(const SaliencyMap& s, const BinaryMask& g);

// Applies min-max normalization when the map strays outside [0,1], then
// runs the full suite.
MetricReport evaluate_pair(const SaliencyMap& s, const BinaryMask& g);

MetricReport aggregate(const std::vector<MetricReport>& reports);

} // namespace lba::metrics
