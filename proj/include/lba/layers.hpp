#pragma once

#include <string>

#include "lba/autograd.hpp"
#include "lba/common.hpp"
#include "lba/params.hpp"

// Parameter initialization and tape-side application of the standard layer
// blocks. Convolutions followed by batch norm carry no bias (the BN shift
// covers it); standalone convolutions do. Weights are Kaiming-uniform over
// fan-in, biases zero, BN gamma 1 / beta 0.

namespace lba::layers {

void init_conv(ParamStore& ps, Rng& rng, const std::string& prefix, i64 co, i64 ci, i64 k, bool bias = true);
void init_deconv(ParamStore& ps, Rng& rng, const std::string& prefix, i64 ci, i64 co, i64 k);
void init_bn(ParamStore& ps, const std::string& prefix, i64 c);
void init_cbr(ParamStore& ps, Rng& rng, const std::string& prefix, i64 co, i64 ci, i64 k);
void init_fc(ParamStore& ps, Rng& rng, const std::string& prefix, i64 out, i64 in);
// squeeze-excitation: reduce ratio 16 with a floor of 4 hidden channels
void init_se(ParamStore& ps, Rng& rng, const std::string& prefix, i64 c);
i64 se_hidden(i64 c);

Var conv(Tape& t, ParamBank& pb, const std::string& prefix, Var x, int stride = 1, PadMode pad = PadMode::zero);
Var deconv(Tape& t, ParamBank& pb, const std::string& prefix, Var x, int stride);
Var bn(Tape& t, ParamBank& pb, const std::string& prefix, Var x);
Var cbr(Tape& t, ParamBank& pb, const std::string& prefix, Var x, int stride = 1);
Var fc(Tape& t, ParamBank& pb, const std::string& prefix, Var x);
// x * sigmoid(fc2(relu(fc1(gap(x))))), channel gate broadcast over space;
// gate_identity is a test hook that short-circuits the gate to ones.
Var se(Tape& t, ParamBank& pb, const std::string& prefix, Var x, bool gate_identity = false);

} // namespace lba::layers
