#pragma once

#include "dimignn/tip.hpp"

#include <cmath>
#include <vector>

namespace test_util {

// Reference neighbor selection, written independently of the production
// path: no shared cosine or scoring code, every candidate scored afresh
// from the raw formula each round. Used only to cross-check dnsm_select.

inline double oracle_cosine(const std::vector<double>& u, const std::vector<double>& v) {
    long double dot = 0.0L, uu = 0.0L, vv = 0.0L;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += static_cast<long double>(u[i]) * v[i];
        uu += static_cast<long double>(u[i]) * u[i];
        vv += static_cast<long double>(v[i]) * v[i];
    }
    if (uu == 0.0L || vv == 0.0L) return 0.0;
    return static_cast<double>(dot / (std::sqrt(uu) * std::sqrt(vv)));
}

inline dimignn::NeighborMatrix dnsm_oracle(const dimignn::VariableProfile& profile,
                                           const dimignn::DnsmConfig& cfg) {
    const int n = profile.n_vars;
    const int c = profile.c_attrs;
    std::vector<std::vector<double>> rows(n);
    for (int i = 0; i < n; ++i) rows[i].assign(profile.row(i), profile.row(i) + c);

    dimignn::NeighborMatrix nm;
    nm.n_vars = n;
    nm.k = cfg.k;
    nm.indices.assign(static_cast<std::size_t>(n) * cfg.k, -1);

    for (int i = 0; i < n; ++i) {
        std::vector<int> selected;
        while (static_cast<int>(selected.size()) < cfg.k) {
            int arg = -1;
            double best = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                bool used = false;
                for (int s : selected) used = used || (s == j);
                if (used) continue;

                double score;
                if (selected.empty()) {
                    score = oracle_cosine(rows[i], rows[j]);
                } else {
                    const double sim = oracle_cosine(rows[i], rows[j]);
                    double mean_to_selected = 0.0;
                    for (int s : selected) mean_to_selected += oracle_cosine(rows[j], rows[s]);
                    mean_to_selected /= static_cast<double>(selected.size());
                    score = cfg.lambda * sim + (1.0 - cfg.lambda) * (1.0 - mean_to_selected);
                }
                if (arg < 0 || score > best) {
                    arg = j;
                    best = score;
                }
            }
            selected.push_back(arg);
        }
        for (int m = 0; m < cfg.k; ++m) {
            nm.indices[static_cast<std::size_t>(i) * cfg.k + m] = selected[m];
        }
    }
    return nm;
}

} // namespace test_util
