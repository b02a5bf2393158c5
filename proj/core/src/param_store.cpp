#include "dimignn/param_store.hpp"

#include <cmath>
#include <stdexcept>

namespace dimignn {

Tensor ParamStore::add(const std::string& name, Tensor t) {
    if (index_.count(name)) {
        throw std::invalid_argument("parameter '" + name + "' registered twice");
    }
    t.set_requires_grad(true);
    index_[name] = entries_.size();
    entries_.emplace_back(name, t);
    Moments mo;
    mo.m.assign(t.values().size(), 0.0);
    mo.v.assign(t.values().size(), 0.0);
    moments_.push_back(std::move(mo));
    return t;
}

bool ParamStore::contains(const std::string& name) const {
    return index_.count(name) != 0;
}

Tensor ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown parameter '" + name + "'");
    return entries_[it->second].second;
}

void ParamStore::zero_grads() {
    for (auto& [name, t] : entries_) t.zero_grad();
}

std::vector<std::vector<double>> ParamStore::snapshot() const {
    std::vector<std::vector<double>> snap;
    snap.reserve(entries_.size());
    for (const auto& [name, t] : entries_) snap.push_back(t.values());
    return snap;
}

void ParamStore::restore(const std::vector<std::vector<double>>& snap) {
    if (snap.size() != entries_.size()) {
        throw std::invalid_argument("snapshot size does not match parameter count");
    }
    for (std::size_t i = 0; i < snap.size(); ++i) {
        if (snap[i].size() != entries_[i].second.values().size()) {
            throw std::invalid_argument("snapshot shape mismatch for '" + entries_[i].first + "'");
        }
        entries_[i].second.mutable_values() = snap[i];
    }
}

void adam_step(ParamStore& store, const AdamOptions& opt) {
    for (const auto& [name, t] : store.entries_) {
        if (!t.has_grad()) {
            throw std::runtime_error("adam_step: missing gradient for parameter '" + name + "'");
        }
    }
    store.step_ += 1;
    const double t = static_cast<double>(store.step_);
    const double bc1 = 1.0 - std::pow(opt.beta1, t);
    const double bc2 = 1.0 - std::pow(opt.beta2, t);
    for (std::size_t i = 0; i < store.entries_.size(); ++i) {
        Tensor& p = store.entries_[i].second;
        auto& m = store.moments_[i].m;
        auto& v = store.moments_[i].v;
        const auto& g = p.grad();
        auto& w = p.mutable_values();
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = opt.beta1 * m[j] + (1.0 - opt.beta1) * g[j];
            v[j] = opt.beta2 * v[j] + (1.0 - opt.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
        }
        p.zero_grad();
    }
}

} // namespace dimignn
