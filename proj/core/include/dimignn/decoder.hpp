#pragma once

#include "dimignn/param_store.hpp"
#include "dimignn/rng.hpp"
#include "dimignn/tensor.hpp"

#include <string>
#include <vector>

namespace dimignn {

/// Per-block linear forecasting head: the main-attribute representation
/// of each variable, flattened over segments, maps to a horizon vector.
struct DecoderParams {
    Tensor weight;  // [segments*hidden, horizon]
    Tensor bias;    // [horizon]
    int segments = 0;
    int hidden = 0;
    int horizon = 0;

    static DecoderParams init(int segments, int hidden, int horizon,
                              ParamStore& store, Rng& rng, const std::string& prefix);
};

/// [L_b, N, C, hidden] -> [horizon, N, 1] forecast from one encoder block.
Tensor decode_block(const Tensor& y, const DecoderParams& p);

/// Learnable fusion of the per-scale forecasts: the blockwise average,
/// flattened, drives a tiny ReLU network whose softmax output weighs the
/// per-block predictions.
struct DmfmParams {
    Tensor w1;  // [horizon*N, d_fuse]
    Tensor b1;  // [d_fuse]
    Tensor w2;  // [d_fuse, B]
    Tensor b2;  // [B]
    int blocks = 0;

    static DmfmParams init(int horizon, int n_vars, int blocks, int d_fuse,
                           ParamStore& store, Rng& rng, const std::string& prefix);
};

struct FusionDebug {
    std::vector<double> alpha;  // B weights on the probability simplex
};

Tensor dmfm_fuse(const std::vector<Tensor>& preds, const DmfmParams& p, FusionDebug* debug = nullptr);

/// Ablation fusion: plain elementwise sum over blocks.
Tensor fuse_ablation_sum(const std::vector<Tensor>& preds);

/// Uniform average over blocks.
Tensor fuse_mean(const std::vector<Tensor>& preds);

} // namespace dimignn
