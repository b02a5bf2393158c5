#include "dimignn/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace dimignn {

std::vector<double> finite_difference_grad(const std::function<double(const Tensor&)>& f,
                                           const Tensor& x, double h) {
    if (h <= 0.0) throw std::invalid_argument("finite_difference_grad: h must be positive");
    const std::size_t n = x.values().size();
    std::vector<double> grad(n);
    Tensor probe = x.detached();
    auto& v = probe.mutable_values();
    for (std::size_t i = 0; i < n; ++i) {
        const double orig = v[i];
        v[i] = orig + h;
        const double fp = f(probe);
        v[i] = orig - h;
        const double fm = f(probe);
        v[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

std::vector<double> finite_difference_grad_inplace(const std::function<double()>& f,
                                                   Tensor& x, double h) {
    if (h <= 0.0) throw std::invalid_argument("finite_difference_grad: h must be positive");
    auto& v = x.mutable_values();
    std::vector<double> grad(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double orig = v[i];
        v[i] = orig + h;
        const double fp = f();
        v[i] = orig - h;
        const double fm = f();
        v[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("max_relative_error: size mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({1.0, std::fabs(a[i]), std::fabs(b[i])});
        worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
    }
    return worst;
}

} // namespace dimignn
