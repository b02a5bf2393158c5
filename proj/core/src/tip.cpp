#include "dimignn/tip.hpp"

#include <cmath>
#include <set>

namespace dimignn {

VariableProfile temporal_profile(const Tensor& z_attr) {
    if (z_attr.rank() != 4) {
        throw ShapeError("temporal_profile expects [L, N, C, hidden], got " + shape_to_string(z_attr.shape()));
    }
    const int l = z_attr.shape()[0];
    const int n = z_attr.shape()[1];
    const int c = z_attr.shape()[2];
    const int d = z_attr.shape()[3];
    VariableProfile p;
    p.n_vars = n;
    p.c_attrs = c;
    p.data.assign(static_cast<std::size_t>(n) * c, 0.0);
    const auto& v = z_attr.values();
    for (int il = 0; il < l; ++il) {
        for (int in = 0; in < n; ++in) {
            for (int ic = 0; ic < c; ++ic) {
                const double* cell = v.data() + ((static_cast<std::size_t>(il) * n + in) * c + ic) * d;
                double acc = 0.0;
                for (int id = 0; id < d; ++id) acc += cell[id];
                p.data[static_cast<std::size_t>(in) * c + ic] += acc;
            }
        }
    }
    const double inv = 1.0 / (static_cast<double>(l) * d);
    for (double& x : p.data) x *= inv;
    return p;
}

double cosine_similarity(const double* u, const double* v, int dim) {
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (int i = 0; i < dim; ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu <= 0.0 || nv <= 0.0) return 0.0;
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

void NeighborMatrix::validate() const {
    if (k < 1 || k > n_vars - 1) {
        throw ShapeError("neighbor matrix requires 1 <= k <= N-1, got k=" + std::to_string(k) +
                         " N=" + std::to_string(n_vars));
    }
    for (int i = 0; i < n_vars; ++i) {
        std::set<int> seen;
        for (int m = 0; m < k; ++m) {
            const int j = at(i, m);
            if (j < 0 || j >= n_vars || j == i || !seen.insert(j).second) {
                throw ShapeError("invalid neighbor row for variable " + std::to_string(i));
            }
        }
    }
}

NeighborMatrix dnsm_select(const VariableProfile& profile, const DnsmConfig& cfg) {
    const int n = profile.n_vars;
    const int c = profile.c_attrs;
    if (cfg.k < 1 || cfg.k > n - 1) {
        throw ShapeError("dnsm_select requires 1 <= k <= N-1, got k=" + std::to_string(cfg.k) +
                         " N=" + std::to_string(n));
    }
    if (cfg.lambda < 0.0 || cfg.lambda > 1.0) {
        throw ShapeError("dnsm_select requires lambda in [0, 1]");
    }

    std::vector<double> cos(static_cast<std::size_t>(n) * n, 1.0);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double s = cosine_similarity(profile.row(i), profile.row(j), c);
            cos[static_cast<std::size_t>(i) * n + j] = s;
            cos[static_cast<std::size_t>(j) * n + i] = s;
        }
    }

    NeighborMatrix nm;
    nm.n_vars = n;
    nm.k = cfg.k;
    nm.indices.assign(static_cast<std::size_t>(n) * cfg.k, -1);

    std::vector<char> picked(n);
    for (int i = 0; i < n; ++i) {
        std::fill(picked.begin(), picked.end(), 0);
        picked[i] = 1;

        // First neighbor: highest cosine similarity to variable i.
        int best = -1;
        double best_score = 0.0;
        for (int j = 0; j < n; ++j) {
            if (picked[j]) continue;
            const double s = cos[static_cast<std::size_t>(i) * n + j];
            if (best < 0 || s > best_score) {
                best = j;
                best_score = s;
            }
        }
        nm.indices[static_cast<std::size_t>(i) * cfg.k] = best;
        picked[best] = 1;

        // Remaining picks trade similarity to i against diversity from the
        // already selected neighbors.
        for (int m = 1; m < cfg.k; ++m) {
            best = -1;
            best_score = 0.0;
            for (int j = 0; j < n; ++j) {
                if (picked[j]) continue;
                const double sim = cos[static_cast<std::size_t>(i) * n + j];
                double mean_sel = 0.0;
                for (int q = 0; q < m; ++q) {
                    const int jn = nm.at(i, q);
                    mean_sel += cos[static_cast<std::size_t>(j) * n + jn];
                }
                mean_sel /= m;
                const double score = cfg.lambda * sim + (1.0 - cfg.lambda) * (1.0 - mean_sel);
                if (best < 0 || score > best_score) {
                    best = j;
                    best_score = score;
                }
            }
            nm.indices[static_cast<std::size_t>(i) * cfg.k + m] = best;
            picked[best] = 1;
        }
    }
    nm.validate();
    return nm;
}

GatParams GatParams::init(int hidden, ParamStore& store, Rng& rng, const std::string& prefix) {
    GatParams p;
    p.weight = store.add(prefix + ".W", rng.xavier_uniform({hidden, hidden}, hidden, hidden));
    p.a_self = store.add(prefix + ".a_self", rng.xavier_uniform({hidden, 1}, hidden, 1));
    p.a_peer = store.add(prefix + ".a_peer", rng.xavier_uniform({hidden, 1}, hidden, 1));
    return p;
}

Tensor termm_gat(const Tensor& z_attr, const NeighborMatrix& neighbors, const GatParams& p,
                 GatDebug* debug) {
    if (z_attr.rank() != 4) {
        throw ShapeError("termm_gat expects [L, N, C, hidden], got " + shape_to_string(z_attr.shape()));
    }
    const int l = z_attr.shape()[0];
    const int n = z_attr.shape()[1];
    const int c = z_attr.shape()[2];
    const int d = z_attr.shape()[3];
    if (neighbors.n_vars != n) {
        throw ShapeError("neighbor matrix built for " + std::to_string(neighbors.n_vars) +
                         " variables, tensor has " + std::to_string(n));
    }
    const int fan = neighbors.k + 1;  // self-loop plus selected neighbors

    // Incidence grid: row i lists i itself followed by its neighbors.
    std::vector<int> incident(static_cast<std::size_t>(n) * fan);
    for (int i = 0; i < n; ++i) {
        incident[static_cast<std::size_t>(i) * fan] = i;
        for (int m = 0; m < neighbors.k; ++m) {
            incident[static_cast<std::size_t>(i) * fan + m + 1] = neighbors.at(i, m);
        }
    }

    // Nodes are variables; every (segment, attribute) slice is a batch row.
    const int batch = l * c;
    Tensor nodes = reshape(transpose(z_attr, {0, 2, 1, 3}), {batch, n, d});
    Tensor wh = matmul(nodes, p.weight);            // [batch, N, d]
    Tensor s_self = matmul(wh, p.a_self);           // [batch, N, 1]
    Tensor s_peer = matmul(wh, p.a_peer);           // [batch, N, 1]

    Tensor peer_scores = reshape(take(s_peer, 1, incident, {n, fan}), {batch, n, fan});
    Tensor logits = leaky_relu(add(s_self, peer_scores), 0.2);
    Tensor attn = softmax_lastdim(logits);          // [batch, N, k+1]
    if (debug) debug->attention = attn.detached();

    Tensor gathered = take(wh, 1, incident, {n, fan});      // [batch, N, k+1, d]
    Tensor mixed = matmul(reshape(attn, {batch, n, 1, fan}), gathered);
    Tensor out = tanh(reshape(mixed, {batch, n, d}));
    return transpose(reshape(out, {l, c, n, d}), {0, 2, 1, 3});
}

Tensor tip_forward(const Tensor& z_attr, const DnsmConfig& cfg, const GatParams& p,
                   NeighborMatrix* selected) {
    const NeighborMatrix nm = dnsm_select(temporal_profile(z_attr), cfg);
    if (selected) *selected = nm;
    return termm_gat(z_attr, nm, p);
}

} // namespace dimignn
