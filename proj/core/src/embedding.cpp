#include "dimignn/embedding.hpp"

namespace dimignn {

int segment_count(int input_len, int segment_len) {
    return (input_len + segment_len - 1) / segment_len;
}

EmbeddingParams EmbeddingParams::init(int input_len, int segment_len, int hidden,
                                      ParamStore& store, Rng& rng, const std::string& prefix) {
    if (segment_len < 1 || hidden < 1) {
        throw ShapeError("embedding requires segment_len >= 1 and hidden >= 1");
    }
    const int segments = segment_count(input_len, segment_len);
    EmbeddingParams p;
    p.segment_len = segment_len;
    p.hidden = hidden;
    p.weight = store.add(prefix + ".W", rng.xavier_uniform({segment_len, hidden}, segment_len, hidden));
    p.bias = store.add(prefix + ".b", Tensor::zeros({hidden}));
    p.position = store.add(prefix + ".pos", rng.xavier_uniform({segments, hidden}, segments, hidden));
    return p;
}

Tensor segment_embed(const Tensor& x, const EmbeddingParams& params) {
    if (x.rank() != 3) {
        throw ShapeError("segment_embed expects [T_in, N, C], got " + shape_to_string(x.shape()));
    }
    const int t_in = x.shape()[0];
    const int n = x.shape()[1];
    const int c = x.shape()[2];
    const int ls = params.segment_len;
    const int segments = segment_count(t_in, ls);

    Tensor padded = x;
    const int pad = segments * ls - t_in;
    if (pad > 0) {
        std::vector<Tensor> parts;
        Tensor first = slice(x, 0, 0, 1);
        for (int i = 0; i < pad; ++i) parts.push_back(first);
        parts.push_back(x);
        padded = concat(parts, 0);
    }

    // [L*Ls, N, C] -> [L, Ls, N, C] -> [L, N, C, Ls]: each channel's run of
    // Ls consecutive values becomes the last axis, ready for the linear map.
    Tensor runs = transpose(reshape(padded, {segments, ls, n, c}), {0, 2, 3, 1});
    Tensor embedded = linear(runs, params.weight, params.bias);  // [L, N, C, hidden]
    Tensor pos = reshape(params.position, {segments, 1, 1, params.hidden});
    return add(embedded, pos);
}

} // namespace dimignn
