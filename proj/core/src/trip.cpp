#include "dimignn/trip.hpp"

#include <cmath>

namespace dimignn {

NormKind parse_norm_kind(const std::string& s) {
    if (s == "dyt") return NormKind::Dyt;
    if (s == "layernorm") return NormKind::LayerNorm;
    throw std::invalid_argument("unknown norm kind '" + s + "' (expected dyt|layernorm)");
}

const char* norm_kind_name(NormKind k) {
    return k == NormKind::Dyt ? "dyt" : "layernorm";
}

NormParams NormParams::init(NormKind kind, int hidden, ParamStore& store, const std::string& prefix) {
    NormParams p;
    p.kind = kind;
    if (kind == NormKind::Dyt) {
        p.alpha = store.add(prefix + ".alpha", Tensor::scalar(0.5));
    }
    p.gain = store.add(prefix + ".gain", Tensor::full({hidden}, 1.0));
    p.bias = store.add(prefix + ".bias", Tensor::zeros({hidden}));
    return p;
}

Tensor dyt(const Tensor& x, const NormParams& p) {
    return add(mul(p.gain, tanh(mul(p.alpha, x))), p.bias);
}

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    // Small epsilon keeps constant vectors finite without visibly biasing
    // the unit-variance property.
    constexpr double eps = 1e-12;
    const int last = x.rank() - 1;
    Tensor mu = mean_axis(x, last, true);
    Tensor centered = sub(x, mu);
    Tensor var = mean_axis(mul(centered, centered), last, true);
    Tensor inv_std = exp(scale(log(add(var, Tensor::scalar(eps))), -0.5));
    return add(mul(mul(centered, inv_std), gain), bias);
}

Tensor apply_norm(const Tensor& x, const NormParams& p) {
    if (p.kind == NormKind::Dyt) return dyt(x, p);
    return layernorm(x, p.gain, p.bias);
}

MsaParams MsaParams::init(int hidden, int heads, ParamStore& store, Rng& rng, const std::string& prefix) {
    if (heads < 1 || hidden % heads != 0) {
        throw ShapeError("attention hidden width " + std::to_string(hidden) +
                         " must be divisible by head count " + std::to_string(heads));
    }
    MsaParams p;
    p.heads = heads;
    p.hidden = hidden;
    p.wq = store.add(prefix + ".Wq", rng.xavier_uniform({hidden, hidden}, hidden, hidden));
    p.bq = store.add(prefix + ".bq", Tensor::zeros({hidden}));
    p.wk = store.add(prefix + ".Wk", rng.xavier_uniform({hidden, hidden}, hidden, hidden));
    p.bk = store.add(prefix + ".bk", Tensor::zeros({hidden}));
    p.wv = store.add(prefix + ".Wv", rng.xavier_uniform({hidden, hidden}, hidden, hidden));
    p.bv = store.add(prefix + ".bv", Tensor::zeros({hidden}));
    p.wo = store.add(prefix + ".Wo", rng.xavier_uniform({hidden, hidden}, hidden, hidden));
    p.bo = store.add(prefix + ".bo", Tensor::zeros({hidden}));
    return p;
}

Tensor msa_axis(const Tensor& z, AttnAxis axis, const MsaParams& p, MsaDebug* debug) {
    if (z.rank() != 4) {
        throw ShapeError("msa_axis expects [L, N, C, hidden], got " + shape_to_string(z.shape()));
    }
    const int l = z.shape()[0];
    const int n = z.shape()[1];
    const int c = z.shape()[2];
    const int d = z.shape()[3];
    if (d != p.hidden) {
        throw ShapeError("msa_axis hidden width mismatch: tensor has " + std::to_string(d) +
                         ", params built for " + std::to_string(p.hidden));
    }

    // Bring the attended axis to the positions slot: [batch, positions, d].
    int batch, positions;
    Tensor flat;
    if (axis == AttnAxis::Time) {
        batch = n * c;
        positions = l;
        flat = reshape(transpose(z, {1, 2, 0, 3}), {batch, positions, d});
    } else {
        batch = l * n;
        positions = c;
        flat = reshape(z, {batch, positions, d});
    }

    const int dh = d / p.heads;
    auto split_heads = [&](const Tensor& t) {
        // [batch, P, d] -> [batch*heads, P, dh]
        return reshape(transpose(reshape(t, {batch, positions, p.heads, dh}), {0, 2, 1, 3}),
                       {batch * p.heads, positions, dh});
    };

    Tensor q = split_heads(linear(flat, p.wq, p.bq));
    Tensor k = split_heads(linear(flat, p.wk, p.bk));
    Tensor v = split_heads(linear(flat, p.wv, p.bv));

    Tensor scores = scale(matmul(q, transpose(k, {0, 2, 1})), 1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor attn = softmax_lastdim(scores);  // rows sum to 1 per query
    if (debug) debug->attention = attn.detached();

    Tensor context = matmul(attn, v);  // [batch*heads, P, dh]
    Tensor merged = reshape(transpose(reshape(context, {batch, p.heads, positions, dh}), {0, 2, 1, 3}),
                            {batch, positions, d});
    Tensor out = linear(merged, p.wo, p.bo);

    if (axis == AttnAxis::Time) {
        return transpose(reshape(out, {n, c, l, d}), {2, 0, 1, 3});
    }
    return reshape(out, {l, n, c, d});
}

MlpParams MlpParams::init(int hidden, int expansion, ParamStore& store, Rng& rng, const std::string& prefix) {
    const int wide = hidden * expansion;
    MlpParams p;
    p.w1 = store.add(prefix + ".W1", rng.xavier_uniform({hidden, wide}, hidden, wide));
    p.b1 = store.add(prefix + ".b1", Tensor::zeros({wide}));
    p.w2 = store.add(prefix + ".W2", rng.xavier_uniform({wide, hidden}, wide, hidden));
    p.b2 = store.add(prefix + ".b2", Tensor::zeros({hidden}));
    return p;
}

Tensor mlp(const Tensor& x, const MlpParams& p) {
    return linear(relu(linear(x, p.w1, p.b1)), p.w2, p.b2);
}

MergeParams MergeParams::init(int hidden, ParamStore& store, Rng& rng, const std::string& prefix) {
    MergeParams p;
    p.weight = store.add(prefix + ".W", rng.xavier_uniform({2 * hidden, hidden}, 2 * hidden, hidden));
    p.bias = store.add(prefix + ".b", Tensor::zeros({hidden}));
    return p;
}

Tensor merge_segments(const Tensor& z, const MergeParams& p) {
    if (z.rank() != 4) {
        throw ShapeError("merge_segments expects [L, N, C, hidden], got " + shape_to_string(z.shape()));
    }
    Tensor padded = z;
    int l = z.shape()[0];
    if (l % 2 != 0) {
        padded = concat({z, slice(z, 0, l - 1, 1)}, 0);  // duplicate the final segment
        l += 1;
    }
    const int n = padded.shape()[1];
    const int c = padded.shape()[2];
    const int d = padded.shape()[3];
    // Pair (2j, 2j+1) along the segment axis, then join the pair on hidden.
    Tensor grouped = reshape(padded, {l / 2, 2, n, c, d});
    Tensor even = reshape(slice(grouped, 1, 0, 1), {l / 2, n, c, d});
    Tensor odd = reshape(slice(grouped, 1, 1, 1), {l / 2, n, c, d});
    Tensor joined = concat({even, odd}, 3);  // [l/2, n, c, 2d]
    return linear(joined, p.weight, p.bias);
}

TripBlockParams TripBlockParams::init(int hidden, int heads, NormKind norm, bool with_merge,
                                      ParamStore& store, Rng& rng, const std::string& prefix) {
    TripBlockParams p;
    p.msa_time = MsaParams::init(hidden, heads, store, rng, prefix + ".msa_time");
    p.mlp_time = MlpParams::init(hidden, 2, store, rng, prefix + ".mlp_time");
    p.msa_attr = MsaParams::init(hidden, heads, store, rng, prefix + ".msa_attr");
    p.mlp_attr = MlpParams::init(hidden, 2, store, rng, prefix + ".mlp_attr");
    p.norm1 = NormParams::init(norm, hidden, store, prefix + ".norm1");
    p.norm2 = NormParams::init(norm, hidden, store, prefix + ".norm2");
    p.norm3 = NormParams::init(norm, hidden, store, prefix + ".norm3");
    p.norm4 = NormParams::init(norm, hidden, store, prefix + ".norm4");
    if (with_merge) p.merge = MergeParams::init(hidden, store, rng, prefix + ".merge");
    return p;
}

Tensor trip_forward(const Tensor& z, bool is_first_block, const TripBlockParams& p) {
    // Deeper blocks coarsen the temporal scale first; the merged tensor
    // serves as query, key, value and residual alike (the unmerged input
    // no longer matches the attention output's shape).
    Tensor base = z;
    if (!is_first_block) {
        if (!p.merge.has_value()) {
            throw ShapeError("trip_forward: deeper block requires merge parameters");
        }
        base = merge_segments(z, *p.merge);
    }

    Tensor t_hat = apply_norm(add(base, msa_axis(base, AttnAxis::Time, p.msa_time)), p.norm1);
    Tensor t_out = apply_norm(add(t_hat, mlp(t_hat, p.mlp_time)), p.norm2);
    Tensor a_hat = apply_norm(add(t_out, msa_axis(t_out, AttnAxis::Attribute, p.msa_attr)), p.norm3);
    return apply_norm(add(a_hat, mlp(a_hat, p.mlp_attr)), p.norm4);
}

} // namespace dimignn
