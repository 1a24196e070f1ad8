#pragma once

#include <utility>
#include <vector>

#include "lba/tensor.hpp"

// Pure forward operations and their vector-Jacobian products. Every function
// returns a fresh tensor; inputs are never mutated, so calls are thread-safe.
// The *_grad_* functions take the upstream gradient plus whatever forward
// state the VJP needs and return the cotangent of one input.

namespace lba::ops {

// ---- convolution -----------------------------------------------------------
// kernel (co,ci,kh,kw), bias (co,1,1,1), odd kh/kw, same-size padding:
// out extent = ceil(in/stride); total pad = (out-1)*stride + k - in, split
// floor(total/2) before / remainder after.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride, PadMode pad);
Tensor conv2d_grad_x(const Tensor& gout, const Tensor& x, const Tensor& kernel, int stride, PadMode pad);
Tensor conv2d_grad_kernel(const Tensor& gout, const Tensor& x, const Tensor& kernel, int stride, PadMode pad);
Tensor conv2d_grad_bias(const Tensor& gout);

// ---- transposed convolution ------------------------------------------------
// kernel (ci,co,kh,kw); out extent = (in-1)*stride + k. Used by the decoder
// with k=2, stride=2 (exact 2x upscale).
Tensor conv_transpose2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride);
Tensor conv_transpose2d_grad_x(const Tensor& gout, const Tensor& x, const Tensor& kernel, int stride);
Tensor conv_transpose2d_grad_kernel(const Tensor& gout, const Tensor& x, const Tensor& kernel, int stride);
Tensor conv_transpose2d_grad_bias(const Tensor& gout);

// ---- fully connected -------------------------------------------------------
// x (n,c,1,1), weight (co,c,1,1), bias (co,1,1,1) -> (n,co,1,1)
Tensor fully_connected(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor fully_connected_grad_x(const Tensor& gout, const Tensor& weight);
Tensor fully_connected_grad_weight(const Tensor& gout, const Tensor& x);
Tensor fully_connected_grad_bias(const Tensor& gout);

// ---- elementwise with broadcast --------------------------------------------
// b may have singleton channel and/or singleton spatial extents (and
// singleton batch); a is always full-shaped.
enum class EwOp { add, sub, mul };
bool broadcastable(const Shape4& a, const Shape4& b);
Tensor elementwise(EwOp op, const Tensor& a, const Tensor& b);
Tensor elementwise_grad_a(EwOp op, const Tensor& gout, const Tensor& a, const Tensor& b);
Tensor elementwise_grad_b(EwOp op, const Tensor& gout, const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);

// ---- activations -----------------------------------------------------------
// sigmoid clamps its argument to +/-36.5 so outputs are strictly inside (0,1).
Tensor sigmoid(const Tensor& x);
Tensor sigmoid_grad(const Tensor& gout, const Tensor& y);
Tensor relu(const Tensor& x);
Tensor relu_grad(const Tensor& gout, const Tensor& x);

// ---- reductions / pooling --------------------------------------------------
Tensor channel_max(const Tensor& x);
Tensor channel_max_grad(const Tensor& gout, const Tensor& x, const Tensor& y);
Tensor global_avg_pool(const Tensor& x);
Tensor global_avg_pool_grad(const Tensor& gout, const Shape4& xshape);
Tensor sum_all(const Tensor& x); // scalar (1,1,1,1)
Tensor sum_all_grad(const Tensor& gout, const Shape4& xshape);

// ---- resize ----------------------------------------------------------------
// Bilinear with half-pixel centers; handles up and down scaling. Same-size is
// a bit-exact copy. upsample_bilinear additionally enforces out >= in.
Tensor resize_bilinear(const Tensor& x, i64 out_h, i64 out_w);
Tensor resize_bilinear_grad(const Tensor& gout, const Shape4& xshape);
Tensor upsample_bilinear(const Tensor& x, i64 out_h, i64 out_w);

// ---- batch normalization ---------------------------------------------------
// Per-batch statistics over (n,h,w) for each channel; gamma/beta (c,1,1,1).
struct BnState {
    std::vector<double> mean, inv_std; // per channel
};
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps, BnState* state = nullptr);
Tensor batchnorm_grad_x(const Tensor& gout, const Tensor& x, const Tensor& gamma, const BnState& st);
Tensor batchnorm_grad_gamma(const Tensor& gout, const Tensor& x, const BnState& st);
Tensor batchnorm_grad_beta(const Tensor& gout);

// ---- channel concat --------------------------------------------------------
Tensor concat_channels(const Tensor& a, const Tensor& b);
std::pair<Tensor, Tensor> concat_channels_grad(const Tensor& gout, i64 ca, i64 cb);

// ---- layout bridges --------------------------------------------------------
// flatten: (n,c,h,w) -> (n,c,h*w); same memory order, so round trips are
// bit-exact. transpose swaps the last two dims.
Matrix3 flatten_spatial(const Tensor& x);
Tensor unflatten_spatial(const Matrix3& m, i64 h, i64 w);
Matrix3 transpose_last(const Matrix3& m);

// ---- batched matrix ops ----------------------------------------------------
Matrix3 bmm(const Matrix3& a, const Matrix3& b);
Matrix3 bmm_grad_a(const Matrix3& gout, const Matrix3& b);
Matrix3 bmm_grad_b(const Matrix3& gout, const Matrix3& a);
Matrix3 softmax_lastdim(const Matrix3& x);
Matrix3 softmax_lastdim_grad(const Matrix3& gout, const Matrix3& y);

// ---- Sobel gradient magnitude ----------------------------------------------
// Depthwise 3x3 Sobel under replicate padding, G = sqrt(gx^2 + gy^2).
// Evaluated separably with symmetric association so horizontal/vertical
// flips commute bit-exactly. Where G == 0 the subgradient 0 is used.
struct SobelState {
    Tensor gx, gy, g;
};
Tensor sobel_magnitude(const Tensor& x, SobelState* state = nullptr);
Tensor sobel_magnitude_grad(const Tensor& gout, const SobelState& st);

// ---- binary cross entropy --------------------------------------------------
// mean over all elements of -(t*log(p) + (1-t)*log(1-p)), p clamped to
// [eps, 1-eps]; gradient is zero where the clamp is active.
Tensor bce(const Tensor& pred, const Tensor& target, double eps = 1e-7);
Tensor bce_grad_pred(const Tensor& gout, const Tensor& pred, const Tensor& target, double eps = 1e-7);

} // namespace lba::ops
