#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "core/tensor.hpp"

namespace semshift {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid until the tape is reset.
struct Value {
    Tape* tape = nullptr;
    uint32_t id = 0;

    const Tensor& tensor() const;
    bool valid() const { return tape != nullptr; }
};

// Gradients keyed by node id, produced by Tape::backward. Leaves that are not
// on any path to the loss report an all-zero gradient.
class GradMap {
public:
    // nullptr if zero (node untouched by backward)
    const Tensor* try_get(Value v) const;
    // materializes zeros of the node's shape when untouched
    Tensor get(Value v) const;

private:
    friend class Tape;
    const Tape* tape_ = nullptr;
    std::vector<std::optional<Tensor>> grads_;
};

// Records every primitive op eagerly; backward() replays them once in reverse
// topological order. One tape per logical thread, one backward per tape.
class Tape {
public:
    Value leaf(Tensor t);

    size_t node_count() const { return nodes_.size(); }
    const Tensor& value_of(uint32_t id) const { return nodes_[id].value; }

    // drops all nodes so the tape can be reused for the next step
    void reset();

    // loss must be scalar; throws StateError on a second invocation
    GradMap backward(Value loss);

private:
    friend struct Value;
    friend class GradMap;

    friend Value add(Value, Value);
    friend Value add_rowvec(Value, Value);
    friend Value mul(Value, Value);
    friend Value mul_rowvec(Value, Value);
    friend Value matmul(Value, Value);
    friend Value transpose(Value);
    friend Value scale(Value, double);
    friend Value add_const(Value, double);
    friend Value tanh(Value);
    friend Value softmax_rows(Value);
    friend Value norm_rows(Value, double);
    friend Value mean_axis(Value, int);
    friend Value sum(Value);
    friend Value l2_norm(Value);
    friend Value div(Value, Value);
    friend Value mul_scalar(Value, Value);
    friend Value sqrt(Value);
    friend Value abs(Value);
    friend Value max_const(Value, double);
    friend Value acosh1p(Value);
    friend Value slice_cols(Value, size_t, size_t);
    friend Value concat_cols(std::span<const Value>);
    friend Value concat_rows(std::span<const Value>);
    friend Value gather_rows(Value, const std::vector<uint32_t>&);

    enum class Op : uint8_t {
        kLeaf,
        kAdd,
        kAddRow,
        kMul,
        kMulRow,
        kMatMul,
        kTranspose,
        kScale,
        kAddConst,
        kTanh,
        kSoftmaxRows,
        kNormRows,
        kMeanAxis,
        kSum,
        kL2Norm,
        kDiv,
        kMulScalar,
        kSqrt,
        kAbs,
        kMaxConst,
        kAcosh1p,
        kSliceCols,
        kConcatCols,
        kConcatRows,
        kGatherRows,
    };

    struct Node {
        Tensor value;
        Op op = Op::kLeaf;
        uint32_t a = 0;
        uint32_t b = 0;
        double c = 0.0;                // scalar operand (scale factor, eps, ...)
        uint32_t i0 = 0;               // slice start / axis
        uint32_t i1 = 0;               // slice end
        std::vector<uint32_t> many;    // concat parents or gather indices
    };

    Value push(Node n);
    const Node& node(uint32_t id) const { return nodes_[id]; }

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

// ---- primitives -----------------------------------------------------------

Value add(Value a, Value b);                 // same shape
Value add_rowvec(Value m, Value v);          // (r x c) + (1 x c)
Value mul(Value a, Value b);                 // elementwise, same shape
Value mul_rowvec(Value m, Value v);          // (r x c) * (1 x c)
Value matmul(Value a, Value b);              // (r x k) . (k x c)
Value transpose(Value a);
Value scale(Value a, double s);
Value add_const(Value a, double c);
Value tanh(Value a);
Value softmax_rows(Value a);                 // rows sum to 1, strictly positive
Value norm_rows(Value a, double eps);        // per-row (x - mean) / sqrt(var + eps)
Value mean_axis(Value a, int axis);          // axis 0 -> 1 x c, axis 1 -> r x 1
Value sum(Value a);                          // scalar
Value l2_norm(Value a);                      // scalar sqrt(sum of squares)
Value div(Value a, Value b);                 // elementwise, same shape
Value mul_scalar(Value a, Value s);          // tensor times scalar-shaped value
Value sqrt(Value a);
Value abs(Value a);
Value max_const(Value a, double c);          // elementwise max(x, c)
Value acosh1p(Value a);                      // acosh(1 + x), x >= 0
Value slice_cols(Value a, size_t c0, size_t c1);
Value concat_cols(std::span<const Value> parts);
Value concat_rows(std::span<const Value> parts);
Value gather_rows(Value table, const std::vector<uint32_t>& ids);

// ---- composites ------------------------------------------------------------

// sum(a * b) over all elements
Value dot(Value a, Value b);

// cos(a, b) with denominator max(|a||b|, 1e-12); gradient-safe at zero norms
Value cosine(Value a, Value b);

// cosine of two plain tensors, same guard, no tape
double cosine(const Tensor& a, const Tensor& b);

// ---- gradient checking ------------------------------------------------------

// Central-difference check of d f / d point. Returns
// max_i |analytic_i - numeric_i| / max(1, |numeric_i|).
double finite_diff_check(const std::function<Value(Tape&, Value)>& f, const Tensor& point,
                         double h);

}  // namespace semshift
