#pragma once

#include "dimignn/decoder.hpp"
#include "dimignn/embedding.hpp"
#include "dimignn/series.hpp"
#include "dimignn/tip.hpp"
#include "dimignn/trip.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dimignn {

/// A run hit a non-finite loss; training aborts rather than continuing on
/// poisoned numbers.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid model/run configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FusionKind { Dmfm, Sum, Mean };

FusionKind parse_fusion_kind(const std::string& s);
const char* fusion_kind_name(FusionKind k);

struct ModelConfig {
    int input_len = 48;     // window given to the encoder
    int horizon = 12;       // steps to forecast
    int segment_len = 6;
    int blocks = 3;
    int hidden = 16;
    int heads = 2;
    int k_neighbors = 3;
    double lambda = 0.7;
    NormKind norm = NormKind::Dyt;
    FusionKind fusion = FusionKind::Dmfm;
    bool dnsm_enabled = true;  // off: selection ranks by similarity alone
    int d_fuse = 16;
    double lr = 1e-3;
    int epochs = 50;
    int batch_size = 32;
    int patience = 20;
    std::uint64_t seed = 42;

    /// Throws ConfigError on violations (for example a block count the
    /// segment halving cannot support).
    void validate(int n_vars) const;

    /// Segment count entering each block, after that block's merge.
    std::vector<int> block_segment_counts() const;
};

/// Every learnable tensor of the network, grouped per block.
struct ModelParams {
    EmbeddingParams embedding;
    std::vector<TripBlockParams> trip;
    std::vector<GatParams> gat;
    std::vector<DecoderParams> decoders;
    std::optional<DmfmParams> dmfm;  // absent under sum/mean fusion
};

/// A model instance: configuration, dataset dimensions, parameters and
/// their store. Construction draws every initial value from one seeded
/// stream, so identical seeds give identical models.
struct Model {
    ModelConfig cfg;
    int n_vars = 0;
    int c_attrs = 0;
    ModelParams params;
    ParamStore store;

    static Model init(const ModelConfig& cfg, int n_vars, int c_attrs);
};

/// Optional per-forward hooks: freeze routing to a fixed neighbor choice
/// (gradient checks) and/or capture what the pass actually did.
struct ForwardArtifacts {
    std::vector<NeighborMatrix> neighbors;   // one per block
    std::vector<int> segment_counts;         // L entering each decoder
    std::vector<double> fusion_alpha;        // empty unless DMFM fusion
    std::vector<Tensor> block_predictions;
};

struct ForwardOptions {
    const std::vector<NeighborMatrix>* fixed_neighbors = nullptr;
    ForwardArtifacts* capture = nullptr;
};

/// Full forward pass: x:[T_in, N, C] -> [horizon, N, 1].
Tensor model_forward(const Model& model, const Tensor& x, const ForwardOptions& opts = {});

/// Mean squared / mean absolute error over all elements.
std::pair<double, double> mse_mae(const Tensor& pred, const Tensor& target);

/// Differentiable MSE between prediction and a constant target.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double best_val_mse = 0.0;
};

/// Minimizes MSE with Adam over shuffled mini-batches, tracks validation
/// MSE each epoch, and restores the best-validation parameters at the end.
/// Stops early when validation has not improved for cfg.patience epochs.
/// Deterministic given cfg.seed.
TrainResult train(Model& model, const WindowedDataset& train_set, const WindowedDataset& val_set);

struct ForecastReport {
    double mse = 0.0;
    double mae = 0.0;
    std::vector<std::pair<double, double>> per_horizon;  // (mse, mae) per step
    std::vector<double> alpha_mean;                      // mean fusion weights
};

/// Metrics over every window of a split, in the units the data is in.
/// Side-effect free. When alpha_rows is given, each sample's fusion
/// weights are appended as one row.
ForecastReport evaluate(const Model& model, const WindowedDataset& data,
                        std::vector<std::vector<double>>* alpha_rows = nullptr);

/// Repeat-last-value reference forecast, scored through the same metric
/// path as the model.
ForecastReport persistence_baseline(const WindowedDataset& data);

} // namespace dimignn
