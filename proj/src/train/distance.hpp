#pragma once

#include <string>

#include "core/tape.hpp"
#include "core/tensor.hpp"

namespace semshift {

enum class Metric {
    kCosine,    // 1 - cos(a, b)
    kMse,       // mean squared difference
    kMae,       // mean absolute difference
    kPoincare,  // ball distance after shrinking both inputs into the unit ball
};

const std::string& metric_name(Metric m);
Metric metric_from_name(const std::string& name);  // throws ParseError

// All four are >= 0 and vanish iff the inputs coincide (after the ball map,
// for the Poincare metric). Differentiable on the tape.
Value distance(Value a, Value b, Metric metric);

// Same math on plain tensors (for oracles and reporting).
double distance(const Tensor& a, const Tensor& b, Metric metric);

}  // namespace semshift
