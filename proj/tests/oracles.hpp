#pragma once

// Independent reference implementations for the test suite: straight
// nested-loop / straight-from-formula code, written against the documented
// definitions and kept free of the production kernels and layout tricks.
// These are the expected-value generators; keep them dumb.

#include <array>
#include <vector>

#include "lba/metrics.hpp"
#include "lba/tensor.hpp"

namespace oracle {

using lba::i64;
using lba::Matrix3;
using lba::PadMode;
using lba::Tensor;

// seven nested loops over an explicitly padded index space
Tensor conv2d_naive(const Tensor& x, const Tensor& kernel, const std::vector<double>& bias,
                    int stride, PadMode pad);

// (in-1)*stride + k output extent, scatter form
Tensor conv_transpose2d_naive(const Tensor& x, const Tensor& kernel, const std::vector<double>& bias,
                              int stride);

Tensor fully_connected_naive(const Tensor& x, const Tensor& weight, const std::vector<double>& bias);

Matrix3 bmm_naive(const Matrix3& a, const Matrix3& b);

// direct exp/sum, no stabilization (inputs stay small in tests)
Matrix3 softmax_naive(const Matrix3& x);

Tensor batchnorm_naive(const Tensor& x, const std::vector<double>& gamma,
                       const std::vector<double>& beta, double eps);

Tensor bilinear_naive(const Tensor& x, i64 oh, i64 ow);

Tensor global_avg_pool_naive(const Tensor& x);
Tensor channel_max_naive(const Tensor& x);

// expand b to a's shape, then apply pointwise: 0 add, 1 sub, 2 mul
Tensor elementwise_expand_naive(int op, const Tensor& a, const Tensor& b);

// depthwise 3x3 correlation with the fixed Sobel matrices, replicate pad,
// direct 9-term sums
Tensor sobel_naive(const Tensor& x);

double bce_naive(const Tensor& pred, const Tensor& target, double eps);

Tensor dilate3x3_naive(const Tensor& mask);
Tensor erode3x3_naive(const Tensor& mask);

// ---- metric references ------------------------------------------------------

double mae_naive(const lba::metrics::SaliencyMap& s, const lba::metrics::BinaryMask& g);

// the full ledger formulas, recomputed from scratch (object + 4-quadrant
// region terms, same centroid and degenerate conventions as the engine)
double s_measure_naive(const lba::metrics::SaliencyMap& s, const lba::metrics::BinaryMask& g,
                       double alpha);

struct CurvePoint {
    double precision, recall, f, e;
};

// per-threshold brute force: re-binarize and recount the confusion matrix,
// then evaluate F directly and E by the per-pixel alignment map
std::array<CurvePoint, 256> curve_naive(const lba::metrics::SaliencyMap& s,
                                        const lba::metrics::BinaryMask& g, double beta2);

CurvePoint point_at_naive(const lba::metrics::SaliencyMap& s, const lba::metrics::BinaryMask& g,
                          double tau, double beta2);

double adaptive_tau_naive(const lba::metrics::SaliencyMap& s);

} // namespace oracle
