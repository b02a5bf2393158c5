#pragma once

#include "dimignn/param_store.hpp"
#include "dimignn/rng.hpp"
#include "dimignn/tensor.hpp"

#include <optional>
#include <string>

namespace dimignn {

enum class NormKind { Dyt, LayerNorm };

NormKind parse_norm_kind(const std::string& s);
const char* norm_kind_name(NormKind k);

/// Parameters of one normalization site. DyT uses all three tensors
/// (gain is its gamma and bias its beta); LayerNorm uses gain and bias.
struct NormParams {
    NormKind kind = NormKind::Dyt;
    Tensor alpha;  // [1], DyT only
    Tensor gain;   // [hidden]
    Tensor bias;   // [hidden]

    static NormParams init(NormKind kind, int hidden, ParamStore& store, const std::string& prefix);
};

/// Dynamic Tanh normalization: gain * tanh(alpha * x) + bias over the
/// hidden axis.
Tensor dyt(const Tensor& x, const NormParams& p);

/// Standard per-position normalization over the hidden axis, then affine.
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias);

Tensor apply_norm(const Tensor& x, const NormParams& p);

/// Multi-head self-attention over a chosen axis of [L, N, C, hidden].
enum class AttnAxis { Time, Attribute };

struct MsaParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    int heads = 1;
    int hidden = 0;

    static MsaParams init(int hidden, int heads, ParamStore& store, Rng& rng, const std::string& prefix);
};

struct MsaDebug {
    Tensor attention;  // [batch*heads, positions, positions]
};

Tensor msa_axis(const Tensor& z, AttnAxis axis, const MsaParams& p, MsaDebug* debug = nullptr);

/// Two-layer MLP (hidden expansion then projection) with ReLU.
struct MlpParams {
    Tensor w1, b1, w2, b2;

    static MlpParams init(int hidden, int expansion, ParamStore& store, Rng& rng, const std::string& prefix);
};

Tensor mlp(const Tensor& x, const MlpParams& p);

/// Adjacent temporal segments concatenated on the hidden axis and
/// projected back to hidden width; odd counts duplicate the final segment.
struct MergeParams {
    Tensor weight;  // [2*hidden, hidden]
    Tensor bias;    // [hidden]

    static MergeParams init(int hidden, ParamStore& store, Rng& rng, const std::string& prefix);
};

Tensor merge_segments(const Tensor& z, const MergeParams& p);

/**
 * One temporal/attribute dependency layer:
 *   time attention (+ segment merging on deeper blocks), MLP,
 *   attribute attention, MLP, each site residual + normalization.
 */
struct TripBlockParams {
    MsaParams msa_time;
    MlpParams mlp_time;
    MsaParams msa_attr;
    MlpParams mlp_attr;
    NormParams norm1, norm2, norm3, norm4;
    std::optional<MergeParams> merge;  // deeper blocks only

    static TripBlockParams init(int hidden, int heads, NormKind norm, bool with_merge,
                                ParamStore& store, Rng& rng, const std::string& prefix);
};

/// is_first_block: the input is the raw embedding and is not merged;
/// deeper blocks merge first, halving the segment count.
Tensor trip_forward(const Tensor& z, bool is_first_block, const TripBlockParams& p);

} // namespace dimignn
