#pragma once

#include "dimignn/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dimignn {

/// Malformed or inconsistent input data (CSV problems, impossible splits).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Dense multivariate series: T time steps, N variables, C attributes per
 * variable, attribute 0 being the forecast target. Values are stored
 * row-major as [T, N, C].
 */
struct SeriesTensor {
    int t_len = 0;
    int n_vars = 0;
    int c_attrs = 0;
    std::vector<double> values;
    std::vector<std::string> variable_names;
    std::vector<std::string> attribute_names;
    std::string step = "step";  // informational duration tag

    double& at(int t, int n, int c) {
        return values[(static_cast<std::size_t>(t) * n_vars + n) * c_attrs + c];
    }
    double at(int t, int n, int c) const {
        return values[(static_cast<std::size_t>(t) * n_vars + n) * c_attrs + c];
    }

    /// Contiguous time range [start, start+len) as a new series.
    SeriesTensor time_range(int start, int len) const;

    void validate() const;
};

/// Long-format CSV layout: one row per (timestamp, variable), attribute
/// columns with the target first.
struct CsvSchema {
    std::string time_column;
    std::string variable_column;
    std::vector<std::string> attribute_columns;  // empty: every remaining header column, in order
};

/// Parses a long-format CSV into a dense grid. Variables are ordered
/// lexicographically by id; timestamps numerically when every timestamp
/// parses as a number, lexicographically otherwise. Incomplete grids
/// (variables with differing timestamp sets), duplicate rows and
/// unparseable cells are errors.
SeriesTensor load_csv(const std::string& path, const CsvSchema& schema = {});

void write_series_csv(const SeriesTensor& series, const std::string& path);

/// Per (variable, attribute) z-score statistics, fit on training data only.
struct NormStats {
    int n_vars = 0;
    int c_attrs = 0;
    std::vector<double> mean;  // [N*C]
    std::vector<double> stddev;
    std::vector<int> constant_channels;  // flat n*C+c ids that got stddev pinned to 1

    static NormStats fit(const SeriesTensor& train);
    SeriesTensor apply(const SeriesTensor& s) const;
    SeriesTensor invert(const SeriesTensor& s) const;
    /// Undo scaling for the target attribute of one variable.
    double denorm_target(double v, int var) const;

    std::string to_json() const;
    static NormStats from_json(const std::string& text);
};

struct SplitSeries {
    SeriesTensor train, val, test;
};

/// Contiguous chronological 70/10/20-style partition. Each split must be
/// able to hold at least one (input, horizon) window.
SplitSeries split_chronological(const SeriesTensor& series,
                                double train_ratio, double val_ratio, double test_ratio,
                                int input_len, int horizon);

/**
 * Sliding-window view over a series: inputs of length input_len, targets
 * the following horizon steps of the main attribute. Windows reference
 * the source series, so the dataset stays cheap at any stride.
 */
struct WindowedDataset {
    int input_len = 0;
    int horizon = 0;
    int stride = 1;
    std::vector<int> starts;  // window start offsets, chronological
    SeriesTensor series;

    std::size_t size() const { return starts.size(); }
    /// Input window as a [input_len, N, C] tensor (no grad).
    Tensor input(std::size_t i) const;
    /// Target window as a [horizon, N, 1] tensor of the main attribute.
    Tensor target(std::size_t i) const;
};

WindowedDataset make_windows(const SeriesTensor& series, int input_len, int horizon, int stride = 1);

// --- synthetic data ----------------------------------------------------------

struct CouplingEdge {
    int parent = 0;
    int child = 0;
    int lag = 1;
    double weight = 0.5;
};

struct CouplingGraph {
    std::vector<CouplingEdge> edges;

    /// Every variable gets one parent in the opposite half of the variable
    /// set, giving two within-similar groups tied by lagged cross-group
    /// influence.
    static CouplingGraph cross_group_ring(int n_vars, int lag = 8, double weight = 0.8);
};

struct SynthOptions {
    double seasonal_amp = 1.0;
    double noise_sigma = 0.5;      // process noise inside each base signal
    double obs_noise_sigma = 0.1;  // independent measurement noise per attribute
    int group_count = 2;           // 0: independent phase and period per variable
    int period = 24;
};

/// Deterministic synthetic generator: per-variable base signals
/// (seasonal + noise), optional lagged coupling through the graph, and
/// lagged copies of the main attribute as secondary attributes.
SeriesTensor synth_coupled(int n_vars, int c_attrs, int t_len, std::uint64_t seed,
                           const CouplingGraph& graph, const SynthOptions& opts = {});

/// Sample cross-correlation of two variables' main attributes at a lag:
/// corr(a[t], b[t - lag]). Used to study coupling structure.
double cross_correlation(const SeriesTensor& s, int var_a, int var_b, int lag);

} // namespace dimignn
