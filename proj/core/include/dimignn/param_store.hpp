#pragma once

#include "dimignn/tensor.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace dimignn {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/**
 * Named collection of learnable tensors with Adam moment state.
 *
 * Entries keep insertion order, so parameter traversal (and therefore
 * seeded initialization and optimizer updates) is deterministic. The step
 * count t is shared by all parameters and only ever increases.
 */
class ParamStore {
public:
    /// Registers a tensor under a unique name and marks it learnable.
    /// Returns a handle sharing the registered storage.
    Tensor add(const std::string& name, Tensor t);

    bool contains(const std::string& name) const;
    Tensor get(const std::string& name) const;

    std::size_t size() const { return entries_.size(); }
    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
    std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }

    std::int64_t step_count() const { return step_; }

    void zero_grads();

    /// Deep copy of all parameter values, for best-checkpoint keeping.
    std::vector<std::vector<double>> snapshot() const;
    void restore(const std::vector<std::vector<double>>& snap);

    friend void adam_step(ParamStore& store, const AdamOptions& opt);

private:
    struct Moments {
        std::vector<double> m, v;
    };
    std::vector<std::pair<std::string, Tensor>> entries_;
    std::map<std::string, std::size_t> index_;
    std::vector<Moments> moments_;
    std::int64_t step_ = 0;
};

/// One Adam update with bias correction over every registered parameter.
/// Every parameter must carry a populated gradient; gradients are zeroed
/// after the update and the shared step count is incremented.
void adam_step(ParamStore& store, const AdamOptions& opt);

} // namespace dimignn
