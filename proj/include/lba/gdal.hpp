#pragma once

#include <array>

#include "lba/autograd.hpp"
#include "lba/layers.hpp"

// Global Distributed Affinity Learning. The deepest encoder stage drives two
// branches per shallow stage: explicit affinity (image descriptor projected
// and broadcast, spatial attention, sigmoid association, SE calibration) and
// implicit affinity (spatial softmax over the projected deep feature, a
// channel-to-channel assignment matrix applied to the stage, plus a resized
// deep-feature skip). A two-step fusion merges the branches.

namespace lba::gdal {

// channels = first three stage widths, c4 = deepest stage width
void init_params(ParamStore& ps, Rng& rng, const std::array<i64, 3>& channels, i64 c4);

// (n,c4,1,1) image-level descriptor: FC(GAP(f4))
Var image_descriptor(Tape& t, ParamBank& pb, Var f4);

// f_exp = SE(R * f) with R = sigmoid(f * ST(broadcast(proj(desc))))
Var explicit_affinity(Tape& t, ParamBank& pb, int stage, Var f, Var desc);

// spatial softmax: (n,c,h,w) -> (n,c,h*w) rows as probability vectors
Var implicit_attention(Tape& t, Var desc_proj);

// (n,c,c) assignment: desc_flat x transpose(m); every output column is a
// convex combination of descriptor columns
Var semantic_assignment(Tape& t, Var m, Var desc_flat);

// reshape(a x flatten(f)) + CBR1x1(resize(f4)); include_skip=false is a test
// hook that drops the deep-feature skip term
Var implicit_affinity(Tape& t, ParamBank& pb, int stage, Var assignment, Var f, Var f4,
                      bool include_skip = true);

// concat(imp, exp) -> CBR3x3 (2C->2C) -> CBR1x1 (2C->C)
Var gdal_fuse(Tape& t, ParamBank& pb, int stage, Var imp, Var exp);

struct Outputs {
    Var g1, g2, g3; // same shapes as f1..f3
};

Outputs forward(Tape& t, ParamBank& pb, Var f1, Var f2, Var f3, Var f4);

} // namespace lba::gdal
