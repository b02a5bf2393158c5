#include "dimignn/rng.hpp"

#include <cmath>

namespace dimignn {

Tensor Rng::xavier_uniform(Shape shape, int fan_in, int fan_out) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    const auto n = shape_numel(shape);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = uniform(-a, a);
    return Tensor(std::move(shape), std::move(v));
}

} // namespace dimignn
