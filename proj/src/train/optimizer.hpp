#pragma once

#include <cstdint>
#include <vector>

#include "core/tensor.hpp"

namespace semshift {

// Decoupled-weight-decay Adam. One optimizer instance drives a fixed list of
// parameter tensors; moment buffers are laid out per parameter and sized on
// the first step.
struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    void validate() const;
};

class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {});

    // Applies one update in place. `params` and `grads` must line up
    // one-to-one and keep the same shapes across every call. A null grad
    // entry means "zero gradient this step" (the moment buffers still decay
    // and weight decay still applies).
    void step(std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, double lr);

    std::uint64_t steps_taken() const { return t_; }
    const AdamWConfig& config() const { return cfg_; }

private:
    AdamWConfig cfg_;
    std::uint64_t t_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

}  // namespace semshift
