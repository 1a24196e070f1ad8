#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "lba/autograd.hpp"
#include "lba/efaba.hpp"
#include "lba/gdal.hpp"
#include "lba/layers.hpp"

// Full network assembly: stub encoder with the canonical stage geometry
// (channels {64,128,320,512}, strides {4,8,16,32}), optional EFABA and GDAL
// branches fused into a deconvolution decoder with four sigmoid side
// heads, deep-supervised BCE loss, and an Adam training step.

namespace lba::network {

struct StageSpec {
    int index;    // 1..4
    i64 channels; // base width scaled by NetworkConfig::channel_scale
    int stride;   // 2^(index+1)
    int upscale;  // 2^(4-index), resize factor from stage 4 to this stage
};

enum class Ablation { baseline, efaba, gdal, full };

struct NetworkConfig {
    i64 input_size = 352; // toy mode uses 64
    double channel_scale = 1.0;
    bool enable_efaba = true;
    bool enable_gdal = true;
    std::uint64_t seed = 0;
};

NetworkConfig config_for(Ablation a, i64 input_size = 352, double channel_scale = 1.0,
                         std::uint64_t seed = 0);
Ablation ablation_from_string(const std::string& s);
std::string ablation_name(Ablation a);

// Validates scaled channels (each >= 4 and divisible by 4).
std::array<StageSpec, 4> stage_specs(double channel_scale);

void init_params(const NetworkConfig& cfg, ParamStore& ps);

struct EncoderVars {
    Var f1, f2, f3, f4;
};

// image (n,3,H,W), H and W divisible by 32
EncoderVars stub_encoder(Tape& t, ParamBank& pb, Var image, const NetworkConfig& cfg);

// FG_i = CBR3x3(F_i + G_i)
Var fuse_fg(Tape& t, ParamBank& pb, int stage, Var f, Var g);

struct ForwardVars {
    Var p1, p2, p3, p4;        // sigmoid side maps at input resolution
    std::optional<Var> e_att;  // edge side output at input resolution
};

ForwardVars decoder(Tape& t, ParamBank& pb, Var fg1, Var fg2, Var fg3, Var f4, i64 out_h, i64 out_w);
ForwardVars forward(Tape& t, ParamBank& pb, Var image, const NetworkConfig& cfg);

struct ForwardOutputs {
    Tensor p1, p2, p3, p4;
    std::optional<Tensor> e_att;
};

// Forward without gradient bookkeeping exposed to the caller.
ForwardOutputs forward_eval(const NetworkConfig& cfg, ParamStore& ps, const Tensor& image);

// Sum of per-map BCE over the four side outputs plus the edge term when the
// edge output exists; gt and gt_edge at input resolution.
Var loss(Tape& t, const ForwardVars& out, Var gt, Var gt_edge);

// 3x3 dilation minus 3x3 erosion of a strictly binary mask (n,1,h,w).
Tensor make_gt_edge(const Tensor& gt);

struct AdamState {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    i64 step = 0;
    std::vector<std::vector<double>> m, v; // one slot per ParamStore entry
};

// One forward/backward/update pass over a batch; returns the loss value.
// Throws on a non-finite loss before touching the parameters.
double train_step(ParamStore& ps, AdamState& adam, const NetworkConfig& cfg,
                  const Tensor& images, const Tensor& gts, double lr);

} // namespace lba::network
