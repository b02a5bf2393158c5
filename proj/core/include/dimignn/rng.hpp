#pragma once

#include "dimignn/tensor.hpp"

#include <cstdint>
#include <random>

namespace dimignn {

/// Seeded random source for parameter init and data shuffling. One Rng per
/// run keeps every draw on a single reproducible stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::mt19937_64& engine() { return engine_; }

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(engine_);
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        std::normal_distribution<double> d(mean, stddev);
        return d(engine_);
    }

    /// Glorot-style uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
    Tensor xavier_uniform(Shape shape, int fan_in, int fan_out);

private:
    std::mt19937_64 engine_;
};

} // namespace dimignn
