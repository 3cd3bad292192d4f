#include "train/distance.hpp"

#include <cmath>

#include "core/error.hpp"

namespace semshift {

namespace {

const std::string kMetricNames[] = {"cosine", "mse", "mae", "poincare"};

constexpr double kBallShift = 1.0 + 1e-6;  // x -> x / (|x| + kBallShift)

Value ball_map(Tape& tape, Value x) {
    Value denom = add_const(l2_norm(x), kBallShift);
    Value inv = div(tape.leaf(Tensor::scalar(1.0)), denom);
    return mul_scalar(x, inv);
}

}  // namespace

const std::string& metric_name(Metric m) { return kMetricNames[static_cast<int>(m)]; }

Metric metric_from_name(const std::string& name) {
    for (int i = 0; i < 4; ++i) {
        if (kMetricNames[i] == name) return static_cast<Metric>(i);
    }
    throw ParseError("unknown metric: \"" + name + "\"");
}

Value distance(Value a, Value b, Metric metric) {
    const Tensor& ta = a.tensor();
    const Tensor& tb = b.tensor();
    if (!ta.same_shape(tb)) {
        throw ShapeError("distance: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Tape& tape = *a.tape;
    switch (metric) {
        case Metric::kCosine:
            return add_const(scale(cosine(a, b), -1.0), 1.0);
        case Metric::kMse: {
            Value diff = add(a, scale(b, -1.0));
            return scale(sum(mul(diff, diff)), 1.0 / static_cast<double>(ta.size()));
        }
        case Metric::kMae: {
            Value diff = add(a, scale(b, -1.0));
            return scale(sum(abs(diff)), 1.0 / static_cast<double>(ta.size()));
        }
        case Metric::kPoincare: {
            Value u = ball_map(tape, a);
            Value v = ball_map(tape, b);
            Value diff = add(u, scale(v, -1.0));
            Value d2 = sum(mul(diff, diff));
            Value tu = add_const(scale(sum(mul(u, u)), -1.0), 1.0);
            Value tv = add_const(scale(sum(mul(v, v)), -1.0), 1.0);
            Value arg = scale(div(d2, mul(tu, tv)), 2.0);
            return acosh1p(arg);
        }
    }
    throw InvalidArgument("distance: unknown metric");
}

double distance(const Tensor& a, const Tensor& b, Metric metric) {
    Tape tape;
    return distance(tape.leaf(a), tape.leaf(b), metric).tensor().scalar_value();
}

}  // namespace semshift
