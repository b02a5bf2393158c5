#pragma once

#include "dimignn/param_store.hpp"
#include "dimignn/rng.hpp"
#include "dimignn/tensor.hpp"

namespace dimignn {

/// Shared segment-to-vector map plus an additive per-segment positional
/// embedding. One linear map serves every (variable, attribute) channel.
struct EmbeddingParams {
    Tensor weight;    // [segment_len, hidden]
    Tensor bias;      // [hidden]
    Tensor position;  // [segment_count, hidden]
    int segment_len = 0;
    int hidden = 0;

    static EmbeddingParams init(int input_len, int segment_len, int hidden,
                                ParamStore& store, Rng& rng, const std::string& prefix = "emb");
};

/// Number of segments covering input_len, counting the front padding that
/// makes segment_len divide the window.
int segment_count(int input_len, int segment_len);

/// Embeds x:[T_in, N, C] into [L, N, C, hidden]. When segment_len does not
/// divide T_in, the window is front-padded by repeating the earliest step
/// so the most recent data stays unaltered.
Tensor segment_embed(const Tensor& x, const EmbeddingParams& params);

} // namespace dimignn
