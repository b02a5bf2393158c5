#include "dimignn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dimignn {

FusionKind parse_fusion_kind(const std::string& s) {
    if (s == "dmfm") return FusionKind::Dmfm;
    if (s == "sum") return FusionKind::Sum;
    if (s == "mean") return FusionKind::Mean;
    throw ConfigError("unknown fusion kind '" + s + "' (expected dmfm|sum|mean)");
}

const char* fusion_kind_name(FusionKind k) {
    switch (k) {
    case FusionKind::Dmfm: return "dmfm";
    case FusionKind::Sum: return "sum";
    case FusionKind::Mean: return "mean";
    }
    return "?";
}

void ModelConfig::validate(int n_vars) const {
    if (input_len < 1) throw ConfigError("input_len must be >= 1");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (segment_len < 1) throw ConfigError("segment_len must be >= 1");
    if (blocks < 1) throw ConfigError("blocks must be >= 1");
    if (hidden < 1) throw ConfigError("hidden must be >= 1");
    if (heads < 1 || hidden % heads != 0) throw ConfigError("heads must divide hidden");
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must lie in [0, 1]");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (d_fuse < 1) throw ConfigError("d_fuse must be >= 1");
    if (n_vars >= 2 && (k_neighbors < 1 || k_neighbors > n_vars - 1)) {
        throw ConfigError("k_neighbors must lie in [1, N-1], got k=" + std::to_string(k_neighbors) +
                          " with N=" + std::to_string(n_vars));
    }
    // Each block past the first halves the segment count; all of them need
    // at least one segment.
    const int l0 = segment_count(input_len, segment_len);
    int need = 1;
    for (int b = 1; b < blocks; ++b) need *= 2;
    if (l0 < need) {
        throw ConfigError("input_len/segment_len gives " + std::to_string(l0) +
                          " segments, too few for blocks=" + std::to_string(blocks) +
                          " (needs at least 2^(blocks-1) = " + std::to_string(need) + ")");
    }
}

std::vector<int> ModelConfig::block_segment_counts() const {
    std::vector<int> counts;
    int l = segment_count(input_len, segment_len);
    counts.push_back(l);
    for (int b = 1; b < blocks; ++b) {
        l = (l + 1) / 2;
        counts.push_back(l);
    }
    return counts;
}

Model Model::init(const ModelConfig& cfg, int n_vars, int c_attrs) {
    cfg.validate(n_vars);
    if (n_vars < 2 || c_attrs < 1) {
        throw ConfigError("model requires N >= 2 variables and C >= 1 attributes");
    }
    Model m;
    m.cfg = cfg;
    m.n_vars = n_vars;
    m.c_attrs = c_attrs;
    Rng rng(cfg.seed);

    m.params.embedding = EmbeddingParams::init(cfg.input_len, cfg.segment_len, cfg.hidden,
                                               m.store, rng, "emb");
    const auto counts = cfg.block_segment_counts();
    for (int b = 0; b < cfg.blocks; ++b) {
        const std::string prefix = "block" + std::to_string(b + 1);
        m.params.trip.push_back(TripBlockParams::init(cfg.hidden, cfg.heads, cfg.norm,
                                                      /*with_merge=*/b > 0, m.store, rng,
                                                      prefix + ".trip"));
        m.params.gat.push_back(GatParams::init(cfg.hidden, m.store, rng, prefix + ".gat"));
    }
    for (int b = 0; b < cfg.blocks; ++b) {
        m.params.decoders.push_back(DecoderParams::init(counts[b], cfg.hidden, cfg.horizon,
                                                        m.store, rng, "dec" + std::to_string(b + 1)));
    }
    if (cfg.fusion == FusionKind::Dmfm) {
        m.params.dmfm = DmfmParams::init(cfg.horizon, n_vars, cfg.blocks, cfg.d_fuse,
                                         m.store, rng, "dmfm");
    }
    return m;
}

Tensor model_forward(const Model& model, const Tensor& x, const ForwardOptions& opts) {
    const ModelConfig& cfg = model.cfg;
    if (x.rank() != 3 || x.shape()[0] != cfg.input_len || x.shape()[1] != model.n_vars ||
        x.shape()[2] != model.c_attrs) {
        throw ShapeError("model_forward expects [" + std::to_string(cfg.input_len) + "," +
                         std::to_string(model.n_vars) + "," + std::to_string(model.c_attrs) +
                         "], got " + shape_to_string(x.shape()));
    }
    if (opts.fixed_neighbors &&
        static_cast<int>(opts.fixed_neighbors->size()) != cfg.blocks) {
        throw ShapeError("fixed_neighbors must provide one neighbor matrix per block");
    }

    DnsmConfig dnsm;
    dnsm.k = cfg.k_neighbors;
    // Disabling diversity-aware selection degenerates the score to pure
    // similarity ranking.
    dnsm.lambda = cfg.dnsm_enabled ? cfg.lambda : 1.0;

    Tensor y = segment_embed(x, model.params.embedding);
    std::vector<Tensor> preds;
    preds.reserve(cfg.blocks);
    for (int b = 0; b < cfg.blocks; ++b) {
        Tensor z = trip_forward(y, /*is_first_block=*/b == 0, model.params.trip[b]);
        NeighborMatrix nm;
        if (opts.fixed_neighbors) {
            nm = (*opts.fixed_neighbors)[b];
        } else {
            nm = dnsm_select(temporal_profile(z), dnsm);
        }
        y = termm_gat(z, nm, model.params.gat[b]);
        if (opts.capture) {
            opts.capture->neighbors.push_back(nm);
            opts.capture->segment_counts.push_back(y.shape()[0]);
        }
        preds.push_back(decode_block(y, model.params.decoders[b]));
    }
    if (opts.capture) opts.capture->block_predictions = preds;

    switch (cfg.fusion) {
    case FusionKind::Dmfm: {
        FusionDebug dbg;
        Tensor out = dmfm_fuse(preds, *model.params.dmfm, &dbg);
        if (opts.capture) opts.capture->fusion_alpha = dbg.alpha;
        return out;
    }
    case FusionKind::Sum:
        return fuse_ablation_sum(preds);
    case FusionKind::Mean:
        return fuse_mean(preds);
    }
    throw ConfigError("unreachable fusion kind");
}

std::pair<double, double> mse_mae(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) {
        throw ShapeError("mse_mae shape mismatch: " + shape_to_string(pred.shape()) + " vs " +
                         shape_to_string(target.shape()));
    }
    const auto& a = pred.values();
    const auto& b = target.values();
    double se = 0.0, ae = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        se += d * d;
        ae += std::fabs(d);
    }
    const double n = static_cast<double>(a.size());
    return {se / n, ae / n};
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    Tensor diff = sub(pred, target);
    return mean_all(mul(diff, diff));
}

TrainResult train(Model& model, const WindowedDataset& train_set, const WindowedDataset& val_set) {
    if (train_set.size() == 0 || val_set.size() == 0) {
        throw ConfigError("training needs non-empty train and validation window sets");
    }
    const ModelConfig& cfg = model.cfg;
    Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);  // distinct stream from init

    auto eval_split_mse = [&](const WindowedDataset& ds) {
        double acc = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            Tensor pred = model_forward(model, ds.input(i));
            acc += mse_mae(pred, ds.target(i)).first;
        }
        return acc / static_cast<double>(ds.size());
    };

    TrainResult result;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    auto best = model.store.snapshot();
    double best_val = eval_split_mse(val_set);
    int best_epoch = 0;
    int stale = 0;

    AdamOptions adam;
    adam.lr = cfg.lr;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
        double epoch_se_sum = 0.0;

        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - begin);
            // One tape per sample; gradients accumulate on the shared
            // parameters until the optimizer consumes them.
            for (std::size_t i = begin; i < end; ++i) {
                Tape tape;
                Tensor pred = model_forward(model, train_set.input(order[i]));
                Tensor loss = mse_loss(pred, train_set.target(order[i]));
                const double loss_value = loss.scalar_value();
                if (!std::isfinite(loss_value)) {
                    throw DivergenceError("training diverged: non-finite loss at epoch " +
                                          std::to_string(epoch));
                }
                epoch_se_sum += loss_value;
                tape.backward(scale(loss, inv_batch));
            }
            adam_step(model.store, adam);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_mse = epoch_se_sum / static_cast<double>(order.size());
        stats.val_mse = eval_split_mse(val_set);
        result.history.push_back(stats);

        if (stats.val_mse < best_val) {
            best_val = stats.val_mse;
            best_epoch = epoch;
            best = model.store.snapshot();
            stale = 0;
        } else {
            ++stale;
            if (stale >= cfg.patience) break;
        }
    }

    model.store.restore(best);
    result.best_epoch = best_epoch;
    result.best_val_mse = best_val;
    return result;
}

namespace {
ForecastReport report_from_samples(const WindowedDataset& data,
                                   const std::function<Tensor(std::size_t)>& predict,
                                   std::vector<std::vector<double>>* alpha_rows,
                                   std::vector<std::vector<double>>* alphas_seen) {
    ForecastReport rep;
    const int horizon = data.horizon;
    std::vector<double> h_se(horizon, 0.0), h_ae(horizon, 0.0);
    std::size_t h_count = 0;

    for (std::size_t i = 0; i < data.size(); ++i) {
        Tensor pred = predict(i);
        Tensor target = data.target(i);
        const auto [mse, mae] = mse_mae(pred, target);
        rep.mse += mse;
        rep.mae += mae;
        const int n = data.series.n_vars;
        for (int h = 0; h < horizon; ++h) {
            for (int v = 0; v < n; ++v) {
                const double d = pred.at({h, v, 0}) - target.at({h, v, 0});
                h_se[h] += d * d;
                h_ae[h] += std::fabs(d);
            }
        }
        h_count += n;
    }
    const double inv = 1.0 / static_cast<double>(data.size());
    rep.mse *= inv;
    rep.mae *= inv;
    for (int h = 0; h < horizon; ++h) {
        rep.per_horizon.emplace_back(h_se[h] / h_count, h_ae[h] / h_count);
    }
    if (alphas_seen && !alphas_seen->empty()) {
        rep.alpha_mean.assign(alphas_seen->front().size(), 0.0);
        for (const auto& row : *alphas_seen) {
            for (std::size_t b = 0; b < row.size(); ++b) rep.alpha_mean[b] += row[b];
        }
        for (double& v : rep.alpha_mean) v /= static_cast<double>(alphas_seen->size());
        if (alpha_rows) *alpha_rows = *alphas_seen;
    }
    return rep;
}
} // namespace

ForecastReport evaluate(const Model& model, const WindowedDataset& data,
                        std::vector<std::vector<double>>* alpha_rows) {
    std::vector<std::vector<double>> alphas;
    auto predict = [&](std::size_t i) {
        ForwardArtifacts arts;
        ForwardOptions opts;
        opts.capture = &arts;
        Tensor pred = model_forward(model, data.input(i), opts);
        if (!arts.fusion_alpha.empty()) alphas.push_back(arts.fusion_alpha);
        return pred;
    };
    return report_from_samples(data, predict, alpha_rows, &alphas);
}

ForecastReport persistence_baseline(const WindowedDataset& data) {
    auto predict = [&](std::size_t i) {
        Tensor input = data.input(i);
        const int n = data.series.n_vars;
        std::vector<double> v;
        v.reserve(static_cast<std::size_t>(data.horizon) * n);
        for (int h = 0; h < data.horizon; ++h) {
            for (int var = 0; var < n; ++var) {
                v.push_back(input.at({data.input_len - 1, var, 0}));
            }
        }
        return Tensor({data.horizon, n, 1}, std::move(v));
    };
    return report_from_samples(data, predict, nullptr, nullptr);
}

} // namespace dimignn
