#pragma once

#include <cstdint>
#include <vector>

#include "cfa/tensor.hpp"

namespace cfa {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction. Holds first/second moment estimates per
/// parameter; step() consumes whatever gradients the last backward pass
/// accumulated into the parameters.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<Tensor> params, AdamConfig config);

    void zero_grad();
    void step();

    std::int64_t step_count() const { return t_; }
    const AdamConfig& config() const { return config_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    AdamConfig config_;
    std::int64_t t_ = 0;
};

}  // namespace cfa
