#pragma once

#include <array>

#include "lba/autograd.hpp"
#include "lba/layers.hpp"

// Edge Feature Adaptive Balancing and Adjusting. The edge clue detector
// turns the two shallowest encoder stages into a single edge attention map
// (Sobel gating, per-stage fusion to one channel, cross-stage merge); the
// feature adaptive balance adjuster then re-weights each of the first three
// stages with spatial attention and a channel-calibration gate.

namespace lba::efaba {

// Fixed Sobel kernels (horizontal / vertical gradients); not learnable.
inline constexpr std::array<std::array<double, 3>, 3> kSobelX = {{{1, 0, -1}, {2, 0, -2}, {1, 0, -1}}};
inline constexpr std::array<std::array<double, 3>, 3> kSobelY = {{{1, 2, 1}, {0, 0, 0}, {-1, -2, -1}}};

// Parameter names carry the "efaba." prefix; channels are the first three
// encoder stage widths.
void init_params(ParamStore& ps, Rng& rng, const std::array<i64, 3>& channels);

// e = sigmoid(G) * f with G the Sobel magnitude of f
Var edge_gate(Tape& t, Var f);

// single-channel fused edge clue: CBR1x1[conv3x3(e) + f], stage in {1,2}
Var edge_fuse(Tape& t, ParamBank& pb, int stage, Var e, Var f);

// merge both stages' fused clues into the edge attention map at stage-1
// extent: per-branch CBR1x1, channel concat, 1x1 conv, sigmoid
Var edge_attention(Tape& t, ParamBank& pb, Var e1f, Var e2f);

// SAT_i = sigmoid(conv7x7(channel_max(e_att * f))), e_att resized to f's
// extent before the broadcast multiply
Var spatial_attention(Tape& t, ParamBank& pb, int stage, Var e_att, Var f);

// F_i = f * CT[(SAT + 1) * f]; ct_identity forces the channel gate to ones
Var faba_balance(Tape& t, ParamBank& pb, int stage, Var sat, Var f, bool ct_identity = false);

struct Outputs {
    Var f1, f2, f3; // balanced features, same shapes as the inputs
    Var e_att;      // (n,1,H1,W1), values in (0,1)
};

Outputs forward(Tape& t, ParamBank& pb, Var f1, Var f2, Var f3);

} // namespace lba::efaba
