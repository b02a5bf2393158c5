#include "dimignn/decoder.hpp"

namespace dimignn {

namespace {

void check_preds(const char* where, const std::vector<Tensor>& preds) {
    if (preds.empty()) throw ShapeError(std::string(where) + ": needs at least one block prediction");
    for (const Tensor& t : preds) {
        if (t.shape() != preds[0].shape()) {
            throw ShapeError(std::string(where) + ": block predictions must share one shape");
        }
    }
}

} // namespace

DecoderParams DecoderParams::init(int segments, int hidden, int horizon,
                                  ParamStore& store, Rng& rng, const std::string& prefix) {
    DecoderParams p;
    p.segments = segments;
    p.hidden = hidden;
    p.horizon = horizon;
    const int in = segments * hidden;
    p.weight = store.add(prefix + ".W", rng.xavier_uniform({in, horizon}, in, horizon));
    p.bias = store.add(prefix + ".b", Tensor::zeros({horizon}));
    return p;
}

Tensor decode_block(const Tensor& y, const DecoderParams& p) {
    if (y.rank() != 4) {
        throw ShapeError("decode_block expects [L, N, C, hidden], got " + shape_to_string(y.shape()));
    }
    const int l = y.shape()[0];
    const int n = y.shape()[1];
    const int d = y.shape()[3];
    if (l != p.segments || d != p.hidden) {
        throw ShapeError("decode_block shape " + shape_to_string(y.shape()) +
                         " does not match head built for L=" + std::to_string(p.segments) +
                         " hidden=" + std::to_string(p.hidden));
    }
    // Main attribute only; per variable, all segments' hidden vectors feed
    // one linear map onto the horizon.
    Tensor main_attr = reshape(slice(y, 2, 0, 1), {l, n, d});
    Tensor per_var = reshape(transpose(main_attr, {1, 0, 2}), {n, l * d});
    Tensor horizon = linear(per_var, p.weight, p.bias);  // [n, horizon]
    return reshape(transpose(horizon, {1, 0}), {p.horizon, n, 1});
}

DmfmParams DmfmParams::init(int horizon, int n_vars, int blocks, int d_fuse,
                            ParamStore& store, Rng& rng, const std::string& prefix) {
    DmfmParams p;
    p.blocks = blocks;
    const int in = horizon * n_vars;
    p.w1 = store.add(prefix + ".W1", rng.xavier_uniform({in, d_fuse}, in, d_fuse));
    p.b1 = store.add(prefix + ".b1", Tensor::zeros({d_fuse}));
    p.w2 = store.add(prefix + ".W2", rng.xavier_uniform({d_fuse, blocks}, d_fuse, blocks));
    p.b2 = store.add(prefix + ".b2", Tensor::zeros({blocks}));
    return p;
}

Tensor dmfm_fuse(const std::vector<Tensor>& preds, const DmfmParams& p, FusionDebug* debug) {
    check_preds("dmfm_fuse", preds);
    const int b = static_cast<int>(preds.size());
    if (b != p.blocks) {
        throw ShapeError("dmfm_fuse got " + std::to_string(b) + " predictions, params built for " +
                         std::to_string(p.blocks));
    }
    const int numel = static_cast<int>(preds[0].numel());

    std::vector<Tensor> stacked;
    stacked.reserve(preds.size());
    for (const Tensor& t : preds) stacked.push_back(reshape(t, {1, numel}));
    Tensor average = mean_axis(concat(stacked, 0), 0);       // [numel]
    Tensor hidden = relu(linear(reshape(average, {1, numel}), p.w1, p.b1));
    Tensor alpha = reshape(softmax_lastdim(linear(hidden, p.w2, p.b2)), {b});
    if (debug) debug->alpha = alpha.values();

    Tensor fused;
    for (int i = 0; i < b; ++i) {
        Tensor weighted = mul(preds[i], slice(alpha, 0, i, 1));
        fused = (i == 0) ? weighted : add(fused, weighted);
    }
    return fused;
}

Tensor fuse_ablation_sum(const std::vector<Tensor>& preds) {
    check_preds("fuse_ablation_sum", preds);
    Tensor out = preds[0];
    for (std::size_t i = 1; i < preds.size(); ++i) out = add(out, preds[i]);
    return out;
}

Tensor fuse_mean(const std::vector<Tensor>& preds) {
    check_preds("fuse_mean", preds);
    return scale(fuse_ablation_sum(preds), 1.0 / static_cast<double>(preds.size()));
}

} // namespace dimignn
