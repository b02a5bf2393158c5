#pragma once

#include "dimignn/tensor.hpp"

#include <functional>
#include <vector>

namespace dimignn {

/// Central finite differences of a scalar function at x:
/// (f(x + h e_i) - f(x - h e_i)) / (2h) per coordinate.
std::vector<double> finite_difference_grad(const std::function<double(const Tensor&)>& f,
                                           const Tensor& x, double h = 1e-5);

/// In-place variant for checking model parameters: perturbs x's storage
/// directly and calls f(), which is expected to re-run the forward pass
/// reading x through shared handles. x is restored afterwards.
std::vector<double> finite_difference_grad_inplace(const std::function<double()>& f,
                                                   Tensor& x, double h = 1e-5);

/// max_i |a_i - b_i| / max(1, |a_i|, |b_i|); the comparison metric used by
/// all gradient checks in this repo.
double max_relative_error(const std::vector<double>& a, const std::vector<double>& b);

} // namespace dimignn
