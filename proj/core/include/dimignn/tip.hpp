#pragma once

#include "dimignn/param_store.hpp"
#include "dimignn/rng.hpp"
#include "dimignn/tensor.hpp"

#include <vector>

namespace dimignn {

/// One attribute-space profile vector per variable, shape [N, C].
struct VariableProfile {
    int n_vars = 0;
    int c_attrs = 0;
    std::vector<double> data;  // row-major [N, C]

    double at(int var, int attr) const { return data[static_cast<std::size_t>(var) * c_attrs + attr]; }
    const double* row(int var) const { return data.data() + static_cast<std::size_t>(var) * c_attrs; }
};

/// Collapses [L, N, C, hidden] to [N, C] by averaging over segments and
/// hidden units. This feeds neighbor selection only, so it reads values
/// directly and contributes nothing to the gradient tape.
VariableProfile temporal_profile(const Tensor& z_attr);

/// Cosine similarity in [-1, 1]; zero-norm operands compare as 0.
double cosine_similarity(const double* u, const double* v, int dim);

struct DnsmConfig {
    double lambda = 0.7;  // similarity weight; 1 - lambda weighs diversity
    int k = 3;
};

/// Selected neighbor ids per variable, in selection order.
struct NeighborMatrix {
    int n_vars = 0;
    int k = 0;
    std::vector<int> indices;  // row-major [N, k]

    int at(int var, int m) const { return indices[static_cast<std::size_t>(var) * k + m]; }
    void validate() const;
};

/**
 * Diversity-aware greedy neighbor selection. For each variable the first
 * neighbor is the cosine-nearest other variable; each further pick
 * maximizes lambda * similarity-to-self + (1 - lambda) * (1 - mean cosine
 * to the already selected set). Ties break to the lowest index.
 */
NeighborMatrix dnsm_select(const VariableProfile& profile, const DnsmConfig& cfg);

/// Single graph-attention layer over variable nodes, applied per
/// (segment, attribute) slice. Each node attends over itself plus its
/// selected neighbors; coefficients come from a shared linear scoring with
/// LeakyReLU, normalized by softmax.
struct GatParams {
    Tensor weight;  // [hidden, hidden]
    Tensor a_self;  // [hidden, 1]
    Tensor a_peer;  // [hidden, 1]

    static GatParams init(int hidden, ParamStore& store, Rng& rng, const std::string& prefix);
};

struct GatDebug {
    Tensor attention;  // [L*C, N, k+1]
};

Tensor termm_gat(const Tensor& z_attr, const NeighborMatrix& neighbors, const GatParams& p,
                 GatDebug* debug = nullptr);

/// One inter-variable layer: select neighbors from the temporal profile,
/// then aggregate with graph attention. Selection is discrete routing;
/// gradients flow only through the aggregation.
Tensor tip_forward(const Tensor& z_attr, const DnsmConfig& cfg, const GatParams& p,
                   NeighborMatrix* selected = nullptr);

} // namespace dimignn
