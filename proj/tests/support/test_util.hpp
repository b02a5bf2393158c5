#pragma once

#include "dimignn/grad_check.hpp"
#include "dimignn/param_store.hpp"
#include "dimignn/tensor.hpp"

#include <atomic>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace test_util {

inline dimignn::Tensor random_tensor(dimignn::Shape shape, std::mt19937_64& rng,
                                     double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(static_cast<std::size_t>(dimignn::shape_numel(shape)));
    for (auto& x : v) x = d(rng);
    return dimignn::Tensor(std::move(shape), std::move(v));
}

/// Random values bounded away from zero, for ops with a kink at the origin.
inline dimignn::Tensor random_tensor_off_origin(dimignn::Shape shape, std::mt19937_64& rng,
                                                double margin = 0.05) {
    std::uniform_real_distribution<double> d(margin, 1.0);
    std::bernoulli_distribution sign(0.5);
    std::vector<double> v(static_cast<std::size_t>(dimignn::shape_numel(shape)));
    for (auto& x : v) x = sign(rng) ? d(rng) : -d(rng);
    return dimignn::Tensor(std::move(shape), std::move(v));
}

/// Analytic-vs-central-difference check of d(f)/d(x) where f re-runs a
/// forward pass on every call. Returns the worst relative error.
inline double grad_check(dimignn::Tensor& x, const std::function<double()>& forward_loss,
                         const std::function<void()>& backward_once, double h = 1e-5) {
    backward_once();
    std::vector<double> analytic = x.grad();
    if (analytic.empty()) analytic.assign(x.values().size(), 0.0);
    x.zero_grad();
    const auto fd = dimignn::finite_difference_grad_inplace(forward_loss, x, h);
    return dimignn::max_relative_error(analytic, fd);
}

/// Runs one taped backward of `loss_fn` and then finite-differences every
/// parameter in the store against the same loss. Returns the worst
/// relative error across all parameters.
inline double grad_check_store(dimignn::ParamStore& store,
                               const std::function<dimignn::Tensor()>& loss_fn,
                               double h = 1e-5) {
    {
        dimignn::Tape tape;
        tape.backward(loss_fn());
    }
    double worst = 0.0;
    auto eval = [&] { return loss_fn().scalar_value(); };
    for (auto& [name, t] : store.entries()) {
        std::vector<double> analytic = t.grad();
        if (analytic.empty()) analytic.assign(t.values().size(), 0.0);
        const auto fd = dimignn::finite_difference_grad_inplace(eval, t, h);
        worst = std::max(worst, dimignn::max_relative_error(analytic, fd));
    }
    store.zero_grads();
    return worst;
}

/// Unique scratch directory under the build tree; removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("dimignn_test_" + tag + "_" + std::to_string(++counter) + "_" +
                 std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace test_util
