#include "core/tape.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "core/error.hpp"

namespace semshift {

namespace {

constexpr double kTiny = 1e-300;

void require_same_tape(Value a, Value b, const char* op) {
    if (a.tape == nullptr || b.tape == nullptr) {
        throw InvalidArgument(std::string(op) + ": operand is not bound to a tape");
    }
    if (a.tape != b.tape) {
        throw InvalidArgument(std::string(op) + ": operands live on different tapes");
    }
}

void require_bound(Value a, const char* op) {
    if (a.tape == nullptr) {
        throw InvalidArgument(std::string(op) + ": operand is not bound to a tape");
    }
}

void require_matrix(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " + t.shape_str());
    }
}

}  // namespace

const Tensor& Value::tensor() const {
    if (tape == nullptr) {
        throw InvalidArgument("Value::tensor: value is not bound to a tape");
    }
    return tape->value_of(id);
}

const Tensor* GradMap::try_get(Value v) const {
    if (v.tape != tape_) {
        throw InvalidArgument("GradMap: value belongs to a different tape");
    }
    if (v.id >= grads_.size() || !grads_[v.id].has_value()) {
        return nullptr;
    }
    return &*grads_[v.id];
}

Tensor GradMap::get(Value v) const {
    const Tensor* g = try_get(v);
    if (g != nullptr) {
        return *g;
    }
    return Tensor::zeros(v.tensor().shape());
}

Value Tape::leaf(Tensor t) {
    t.require_finite("leaf");
    Node n;
    n.value = std::move(t);
    n.op = Op::kLeaf;
    return push(std::move(n));
}

Value Tape::push(Node n) {
    if (nodes_.size() >= std::numeric_limits<uint32_t>::max()) {
        throw StateError("tape overflow: too many nodes");
    }
    nodes_.push_back(std::move(n));
    return Value{this, static_cast<uint32_t>(nodes_.size() - 1)};
}

void Tape::reset() {
    nodes_.clear();
    consumed_ = false;
}

// ---- forward ----------------------------------------------------------------

Value add(Value a, Value b) {
    require_same_tape(a, b, "add");
    const Tensor& ta = a.tensor();
    const Tensor& tb = b.tensor();
    if (!ta.same_shape(tb)) {
        throw ShapeError("add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Tensor out = ta;
    double* o = out.data();
    const double* pb = tb.data();
    for (size_t i = 0; i < out.size(); ++i) o[i] += pb[i];
    out.require_finite("add");

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kAdd;
    n.a = a.id;
    n.b = b.id;
    return a.tape->push(std::move(n));
}

Value add_rowvec(Value m, Value v) {
    require_same_tape(m, v, "add_rowvec");
    const Tensor& tm = m.tensor();
    const Tensor& tv = v.tensor();
    require_matrix(tm, "add_rowvec");
    if (tv.rank() != 2 || tv.rows() != 1 || tv.cols() != tm.cols()) {
        throw ShapeError("add_rowvec: expected row vector [1x" + std::to_string(tm.cols()) +
                         "], got " + tv.shape_str());
    }
    Tensor out = tm;
    const size_t r = tm.rows(), c = tm.cols();
    double* o = out.data();
    const double* pv = tv.data();
    for (size_t i = 0; i < r; ++i) {
        for (size_t j = 0; j < c; ++j) o[i * c + j] += pv[j];
    }
    out.require_finite("add_rowvec");

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kAddRow;
    n.a = m.id;
    n.b = v.id;
    return m.tape->push(std::move(n));
}

Value mul(Value a, Value b) {
    require_same_tape(a, b, "mul");
    const Tensor& ta = a.tensor();
    const Tensor& tb = b.tensor();
    if (!ta.same_shape(tb)) {
        throw ShapeError("mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Tensor out = ta;
    double* o = out.data();
    const double* pb = tb.data();
    for (size_t i = 0; i < out.size(); ++i) o[i] *= pb[i];
    out.require_finite("mul");

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kMul;
    n.a = a.id;
    n.b = b.id;
    return a.tape->push(std::move(n));
}

Value mul_rowvec(Value m, Value v) {
    require_same_tape(m, v, "mul_rowvec");
    const Tensor& tm = m.tensor();
    const Tensor& tv = v.tensor();
    require_matrix(tm, "mul_rowvec");
    if (tv.rank() != 2 || tv.rows() != 1 || tv.cols() != tm.cols()) {
        throw ShapeError("mul_rowvec: expected row vector [1x" + std::to_string(tm.cols()) +
                         "], got " + tv.shape_str());
    }
    Tensor out = tm;
    const size_t r = tm.rows(), c = tm.cols();
    double* o = out.data();
    const double* pv = tv.data();
    for (size_t i = 0; i < r; ++i) {
        for (size_t j = 0; j < c; ++j) o[i * c + j] *= pv[j];
    }
    out.require_finite("mul_rowvec");

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kMulRow;
    n.a = m.id;
    n.b = v.id;
    return m.tape->push(std::move(n));
}

Value matmul(Value a, Value b) {
    require_same_tape(a, b, "matmul");
    const Tensor& ta = a.tensor();
    const Tensor& tb = b.tensor();
    require_matrix(ta, "matmul");
    require_matrix(tb, "matmul");
    if (ta.cols() != tb.rows()) {
        throw ShapeError("matmul: inner dimensions disagree, " + ta.shape_str() + " vs " +
                         tb.shape_str());
    }
    const size_t r = ta.rows(), k = ta.cols(), c = tb.cols();
    Tensor out = Tensor::zeros({r, c});
    const double* pa = ta.data();
    const double* pb = tb.data();
    double* o = out.data();
    for (size_t i = 0; i < r; ++i) {
        for (size_t kk = 0; kk < k; ++kk) {
            const double t = pa[i * k + kk];
            const double* brow = pb + kk * c;
            double* orow = o + i * c;
            for (size_t j = 0; j < c; ++j) orow[j] += t * brow[j];
        }
    }
    out.require_finite("matmul");

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kMatMul;
    n.a = a.id;
    n.b = b.id;
    return a.tape->push(std::move(n));
}

Value transpose(Value a) {
    require_bound(a, "transpose");
    const Tensor& ta = a.tensor();
    require_matrix(ta, "transpose");
    const size_t r = ta.rows(), c = ta.cols();
    Tensor out = Tensor::zeros({c, r});
    const double* p = ta.data();
    double* o = out.data();
    for (size_t i = 0; i < r; ++i) {
        for (size_t j = 0; j < c; ++j) o[j * r + i] = p[i * c + j];
    }

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kTranspose;
    n.a = a.id;
    return a.tape->push(std::move(n));
}

Value scale(Value a, double s) {
    require_bound(a, "scale");
    if (!std::isfinite(s)) {
        throw InvalidArgument("scale: factor must be finite");
    }
    Tensor out = a.tensor();
    double* o = out.data();
    for (size_t i = 0; i < out.size(); ++i) o[i] *= s;
    out.require_finite("scale");

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kScale;
    n.a = a.id;
    n.c = s;
    return a.tape->push(std::move(n));
}

Value add_const(Value a, double c) {
    require_bound(a, "add_const");
    if (!std::isfinite(c)) {
        throw InvalidArgument("add_const: addend must be finite");
    }
    Tensor out = a.tensor();
    double* o = out.data();
    for (size_t i = 0; i < out.size(); ++i) o[i] += c;
    out.require_finite("add_const");

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kAddConst;
    n.a = a.id;
    n.c = c;
    return a.tape->push(std::move(n));
}

Value tanh(Value a) {
    require_bound(a, "tanh");
    Tensor out = a.tensor();
    double* o = out.data();
    for (size_t i = 0; i < out.size(); ++i) o[i] = std::tanh(o[i]);

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kTanh;
    n.a = a.id;
    return a.tape->push(std::move(n));
}

Value softmax_rows(Value a) {
    require_bound(a, "softmax_rows");
    const Tensor& ta = a.tensor();
    require_matrix(ta, "softmax_rows");
    const size_t r = ta.rows(), c = ta.cols();
    if (c == 0) {
        throw ShapeError("softmax_rows: rows must be non-empty, got " + ta.shape_str());
    }
    Tensor out = ta;
    double* o = out.data();
    for (size_t i = 0; i < r; ++i) {
        double* row = o + i * c;
        double m = row[0];
        for (size_t j = 1; j < c; ++j) m = std::max(m, row[j]);
        double z = 0.0;
        for (size_t j = 0; j < c; ++j) {
            row[j] = std::exp(row[j] - m);
            z += row[j];
        }
        for (size_t j = 0; j < c; ++j) row[j] /= z;
    }
    out.require_finite("softmax_rows");

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kSoftmaxRows;
    n.a = a.id;
    return a.tape->push(std::move(n));
}

Value norm_rows(Value a, double eps) {
    require_bound(a, "norm_rows");
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw InvalidArgument("norm_rows: eps must be positive and finite");
    }
    const Tensor& ta = a.tensor();
    require_matrix(ta, "norm_rows");
    const size_t r = ta.rows(), c = ta.cols();
    if (c == 0) {
        throw ShapeError("norm_rows: rows must be non-empty, got " + ta.shape_str());
    }
    Tensor out = ta;
    double* o = out.data();
    for (size_t i = 0; i < r; ++i) {
        double* row = o + i * c;
        double mean = 0.0;
        for (size_t j = 0; j < c; ++j) mean += row[j];
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (size_t j = 0; j < c; ++j) {
            const double d = row[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(c);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (size_t j = 0; j < c; ++j) row[j] = (row[j] - mean) * inv;
    }
    out.require_finite("norm_rows");

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kNormRows;
    n.a = a.id;
    n.c = eps;
    return a.tape->push(std::move(n));
}

Value mean_axis(Value a, int axis) {
    require_bound(a, "mean_axis");
    if (axis != 0 && axis != 1) {
        throw InvalidArgument("mean_axis: axis must be 0 or 1, got " + std::to_string(axis));
    }
    const Tensor& ta = a.tensor();
    require_matrix(ta, "mean_axis");
    const size_t r = ta.rows(), c = ta.cols();
    if (r == 0 || c == 0) {
        throw ShapeError("mean_axis: tensor must be non-empty, got " + ta.shape_str());
    }
    Tensor out = axis == 0 ? Tensor::zeros({1, c}) : Tensor::zeros({r, 1});
    const double* p = ta.data();
    double* o = out.data();
    if (axis == 0) {
        for (size_t i = 0; i < r; ++i) {
            for (size_t j = 0; j < c; ++j) o[j] += p[i * c + j];
        }
        for (size_t j = 0; j < c; ++j) o[j] /= static_cast<double>(r);
    } else {
        for (size_t i = 0; i < r; ++i) {
            double s = 0.0;
            for (size_t j = 0; j < c; ++j) s += p[i * c + j];
            o[i] = s / static_cast<double>(c);
        }
    }
    out.require_finite("mean_axis");

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kMeanAxis;
    n.a = a.id;
    n.i0 = static_cast<uint32_t>(axis);
    return a.tape->push(std::move(n));
}

Value sum(Value a) {
    require_bound(a, "sum");
    const Tensor& ta = a.tensor();
    double s = 0.0;
    const double* p = ta.data();
    for (size_t i = 0; i < ta.size(); ++i) s += p[i];
    Tensor out = Tensor::scalar(s);
    out.require_finite("sum");

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kSum;
    n.a = a.id;
    return a.tape->push(std::move(n));
}

Value l2_norm(Value a) {
    require_bound(a, "l2_norm");
    const Tensor& ta = a.tensor();
    double s = 0.0;
    const double* p = ta.data();
    for (size_t i = 0; i < ta.size(); ++i) s += p[i] * p[i];
    Tensor out = Tensor::scalar(std::sqrt(s));
    out.require_finite("l2_norm");

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kL2Norm;
    n.a = a.id;
    return a.tape->push(std::move(n));
}

Value div(Value a, Value b) {
    require_same_tape(a, b, "div");
    const Tensor& ta = a.tensor();
    const Tensor& tb = b.tensor();
    if (!ta.same_shape(tb)) {
        throw ShapeError("div: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Tensor out = ta;
    double* o = out.data();
    const double* pb = tb.data();
    for (size_t i = 0; i < out.size(); ++i) o[i] /= pb[i];
    out.require_finite("div");

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kDiv;
    n.a = a.id;
    n.b = b.id;
    return a.tape->push(std::move(n));
}

Value mul_scalar(Value a, Value s) {
    require_same_tape(a, s, "mul_scalar");
    const Tensor& ts = s.tensor();
    if (!ts.is_scalar()) {
        throw ShapeError("mul_scalar: second operand must be scalar, got " + ts.shape_str());
    }
    const double sv = ts.scalar_value();
    Tensor out = a.tensor();
    double* o = out.data();
    for (size_t i = 0; i < out.size(); ++i) o[i] *= sv;
    out.require_finite("mul_scalar");

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kMulScalar;
    n.a = a.id;
    n.b = s.id;
    return a.tape->push(std::move(n));
}

Value sqrt(Value a) {
    require_bound(a, "sqrt");
    Tensor out = a.tensor();
    double* o = out.data();
    for (size_t i = 0; i < out.size(); ++i) o[i] = std::sqrt(o[i]);
    out.require_finite("sqrt");

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kSqrt;
    n.a = a.id;
    return a.tape->push(std::move(n));
}

Value abs(Value a) {
    require_bound(a, "abs");
    Tensor out = a.tensor();
    double* o = out.data();
    for (size_t i = 0; i < out.size(); ++i) o[i] = std::fabs(o[i]);

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kAbs;
    n.a = a.id;
    return a.tape->push(std::move(n));
}

Value max_const(Value a, double c) {
    require_bound(a, "max_const");
    if (!std::isfinite(c)) {
        throw InvalidArgument("max_const: bound must be finite");
    }
    Tensor out = a.tensor();
    double* o = out.data();
    for (size_t i = 0; i < out.size(); ++i) o[i] = std::max(o[i], c);

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kMaxConst;
    n.a = a.id;
    n.c = c;
    return a.tape->push(std::move(n));
}

Value acosh1p(Value a) {
    require_bound(a, "acosh1p");
    const Tensor& ta = a.tensor();
    const double* p = ta.data();
    for (size_t i = 0; i < ta.size(); ++i) {
        if (p[i] < 0.0) {
            throw NumericError("acosh1p: argument must be non-negative");
        }
    }
    Tensor out = ta;
    double* o = out.data();
    for (size_t i = 0; i < out.size(); ++i) o[i] = std::acosh(1.0 + o[i]);
    out.require_finite("acosh1p");

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kAcosh1p;
    n.a = a.id;
    return a.tape->push(std::move(n));
}

Value slice_cols(Value a, size_t c0, size_t c1) {
    require_bound(a, "slice_cols");
    const Tensor& ta = a.tensor();
    require_matrix(ta, "slice_cols");
    if (c0 >= c1 || c1 > ta.cols()) {
        throw ShapeError("slice_cols: range [" + std::to_string(c0) + ", " + std::to_string(c1) +
                         ") invalid for " + ta.shape_str());
    }
    const size_t r = ta.rows(), c = ta.cols(), w = c1 - c0;
    Tensor out = Tensor::zeros({r, w});
    const double* p = ta.data();
    double* o = out.data();
    for (size_t i = 0; i < r; ++i) {
        std::memcpy(o + i * w, p + i * c + c0, w * sizeof(double));
    }

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kSliceCols;
    n.a = a.id;
    n.i0 = static_cast<uint32_t>(c0);
    n.i1 = static_cast<uint32_t>(c1);
    return a.tape->push(std::move(n));
}

Value concat_cols(std::span<const Value> parts) {
    if (parts.empty()) {
        throw InvalidArgument("concat_cols: need at least one part");
    }
    Tape* tape = parts[0].tape;
    size_t r = 0, total = 0;
    for (size_t k = 0; k < parts.size(); ++k) {
        require_bound(parts[k], "concat_cols");
        if (parts[k].tape != tape) {
            throw InvalidArgument("concat_cols: operands live on different tapes");
        }
        const Tensor& t = parts[k].tensor();
        require_matrix(t, "concat_cols");
        if (k == 0) {
            r = t.rows();
        } else if (t.rows() != r) {
            throw ShapeError("concat_cols: row count mismatch, " +
                             parts[0].tensor().shape_str() + " vs " + t.shape_str());
        }
        total += t.cols();
    }
    Tensor out = Tensor::zeros({r, total});
    double* o = out.data();
    size_t off = 0;
    for (const Value& part : parts) {
        const Tensor& t = part.tensor();
        const size_t c = t.cols();
        const double* p = t.data();
        for (size_t i = 0; i < r; ++i) {
            std::memcpy(o + i * total + off, p + i * c, c * sizeof(double));
        }
        off += c;
    }

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kConcatCols;
    n.many.reserve(parts.size());
    for (const Value& part : parts) n.many.push_back(part.id);
    return tape->push(std::move(n));
}

Value concat_rows(std::span<const Value> parts) {
    if (parts.empty()) {
        throw InvalidArgument("concat_rows: need at least one part");
    }
    Tape* tape = parts[0].tape;
    size_t c = 0, total = 0;
    for (size_t k = 0; k < parts.size(); ++k) {
        require_bound(parts[k], "concat_rows");
        if (parts[k].tape != tape) {
            throw InvalidArgument("concat_rows: operands live on different tapes");
        }
        const Tensor& t = parts[k].tensor();
        require_matrix(t, "concat_rows");
        if (k == 0) {
            c = t.cols();
        } else if (t.cols() != c) {
            throw ShapeError("concat_rows: column count mismatch, " +
                             parts[0].tensor().shape_str() + " vs " + t.shape_str());
        }
        total += t.rows();
    }
    Tensor out = Tensor::zeros({total, c});
    double* o = out.data();
    size_t off = 0;
    for (const Value& part : parts) {
        const Tensor& t = part.tensor();
        std::memcpy(o + off * c, t.data(), t.size() * sizeof(double));
        off += t.rows();
    }

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kConcatRows;
    n.many.reserve(parts.size());
    for (const Value& part : parts) n.many.push_back(part.id);
    return tape->push(std::move(n));
}

Value gather_rows(Value table, const std::vector<uint32_t>& ids) {
    require_bound(table, "gather_rows");
    const Tensor& tt = table.tensor();
    require_matrix(tt, "gather_rows");
    if (ids.empty()) {
        throw InvalidArgument("gather_rows: need at least one row index");
    }
    const size_t r = tt.rows(), c = tt.cols();
    Tensor out = Tensor::zeros({ids.size(), c});
    const double* p = tt.data();
    double* o = out.data();
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= r) {
            throw ShapeError("gather_rows: index " + std::to_string(ids[i]) +
                             " out of range for " + tt.shape_str());
        }
        std::memcpy(o + i * c, p + static_cast<size_t>(ids[i]) * c, c * sizeof(double));
    }

    Tape::Node n;
    n.value = std::move(out);
    n.op = Tape::Op::kGatherRows;
    n.a = table.id;
    n.many = ids;
    return table.tape->push(std::move(n));
}

// ---- composites --------------------------------------------------------------

Value dot(Value a, Value b) { return sum(mul(a, b)); }

Value cosine(Value a, Value b) {
    Value num = dot(a, b);
    Value den = max_const(mul(l2_norm(a), l2_norm(b)), 1e-12);
    return div(num, den);
}

double cosine(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("cosine: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
    double num = 0.0, na = 0.0, nb = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (size_t i = 0; i < a.size(); ++i) {
        num += pa[i] * pb[i];
        na += pa[i] * pa[i];
        nb += pb[i] * pb[i];
    }
    const double den = std::max(std::sqrt(na) * std::sqrt(nb), 1e-12);
    return num / den;
}

// ---- backward ----------------------------------------------------------------

GradMap Tape::backward(Value loss) {
    if (consumed_) {
        throw StateError("backward: tape has already been consumed; reset it first");
    }
    if (loss.tape != this) {
        throw InvalidArgument("backward: loss lives on a different tape");
    }
    const Tensor& lv = nodes_[loss.id].value;
    if (!lv.is_scalar()) {
        throw InvalidArgument("backward: loss must be scalar, got " + lv.shape_str());
    }
    consumed_ = true;

    GradMap gm;
    gm.tape_ = this;
    gm.grads_.resize(nodes_.size());
    auto& grads = gm.grads_;
    grads[loss.id] = Tensor::scalar(1.0);

    auto acc = [&grads](uint32_t id, Tensor contribution) {
        if (!grads[id].has_value()) {
            grads[id] = std::move(contribution);
        } else {
            Tensor& g = *grads[id];
            double* go = g.data();
            const double* pc = contribution.data();
            for (size_t i = 0; i < g.size(); ++i) go[i] += pc[i];
        }
    };

    for (uint32_t id = loss.id + 1; id-- > 0;) {
        if (!grads[id].has_value()) continue;
        const Node& n = nodes_[id];
        const Tensor g = *grads[id];  // copy: acc() may reallocate optionals
        const double* pg = g.data();

        switch (n.op) {
            case Op::kLeaf:
                break;
            case Op::kAdd: {
                acc(n.a, g);
                acc(n.b, g);
                break;
            }
            case Op::kAddRow: {
                acc(n.a, g);
                const size_t r = g.rows(), c = g.cols();
                Tensor gv = Tensor::zeros({1, c});
                double* o = gv.data();
                for (size_t i = 0; i < r; ++i) {
                    for (size_t j = 0; j < c; ++j) o[j] += pg[i * c + j];
                }
                acc(n.b, std::move(gv));
                break;
            }
            case Op::kMul: {
                const Tensor& ta = nodes_[n.a].value;
                const Tensor& tb = nodes_[n.b].value;
                Tensor ga = g, gb = g;
                double* pga = ga.data();
                double* pgb = gb.data();
                const double* pa = ta.data();
                const double* pb = tb.data();
                for (size_t i = 0; i < g.size(); ++i) {
                    pga[i] *= pb[i];
                    pgb[i] *= pa[i];
                }
                acc(n.a, std::move(ga));
                acc(n.b, std::move(gb));
                break;
            }
            case Op::kMulRow: {
                const Tensor& tm = nodes_[n.a].value;
                const Tensor& tv = nodes_[n.b].value;
                const size_t r = g.rows(), c = g.cols();
                Tensor gm2 = g;
                Tensor gv = Tensor::zeros({1, c});
                double* pm = gm2.data();
                double* pv = gv.data();
                const double* m = tm.data();
                const double* v = tv.data();
                for (size_t i = 0; i < r; ++i) {
                    for (size_t j = 0; j < c; ++j) {
                        pv[j] += pg[i * c + j] * m[i * c + j];
                        pm[i * c + j] *= v[j];
                    }
                }
                acc(n.a, std::move(gm2));
                acc(n.b, std::move(gv));
                break;
            }
            case Op::kMatMul: {
                const Tensor& ta = nodes_[n.a].value;
                const Tensor& tb = nodes_[n.b].value;
                const size_t r = ta.rows(), k = ta.cols(), c = tb.cols();
                // ga = g . b^T
                Tensor ga = Tensor::zeros({r, k});
                {
                    double* o = ga.data();
                    const double* pb = tb.data();
                    for (size_t i = 0; i < r; ++i) {
                        for (size_t j = 0; j < c; ++j) {
                            const double t = pg[i * c + j];
                            const double* brow = pb + j;
                            double* orow = o + i * k;
                            for (size_t kk = 0; kk < k; ++kk) orow[kk] += t * brow[kk * c];
                        }
                    }
                }
                // gb = a^T . g
                Tensor gb = Tensor::zeros({k, c});
                {
                    double* o = gb.data();
                    const double* pa = ta.data();
                    for (size_t i = 0; i < r; ++i) {
                        for (size_t kk = 0; kk < k; ++kk) {
                            const double t = pa[i * k + kk];
                            const double* grow = pg + i * c;
                            double* orow = o + kk * c;
                            for (size_t j = 0; j < c; ++j) orow[j] += t * grow[j];
                        }
                    }
                }
                acc(n.a, std::move(ga));
                acc(n.b, std::move(gb));
                break;
            }
            case Op::kTranspose: {
                const size_t r = g.rows(), c = g.cols();
                Tensor ga = Tensor::zeros({c, r});
                double* o = ga.data();
                for (size_t i = 0; i < r; ++i) {
                    for (size_t j = 0; j < c; ++j) o[j * r + i] = pg[i * c + j];
                }
                acc(n.a, std::move(ga));
                break;
            }
            case Op::kScale: {
                Tensor ga = g;
                double* o = ga.data();
                for (size_t i = 0; i < ga.size(); ++i) o[i] *= n.c;
                acc(n.a, std::move(ga));
                break;
            }
            case Op::kAddConst: {
                acc(n.a, g);
                break;
            }
            case Op::kTanh: {
                const Tensor& y = n.value;
                Tensor ga = g;
                double* o = ga.data();
                const double* py = y.data();
                for (size_t i = 0; i < ga.size(); ++i) o[i] *= 1.0 - py[i] * py[i];
                acc(n.a, std::move(ga));
                break;
            }
            case Op::kSoftmaxRows: {
                const Tensor& y = n.value;
                const size_t r = y.rows(), c = y.cols();
                Tensor ga = Tensor::zeros({r, c});
                double* o = ga.data();
                const double* py = y.data();
                for (size_t i = 0; i < r; ++i) {
                    double s = 0.0;
                    for (size_t j = 0; j < c; ++j) s += pg[i * c + j] * py[i * c + j];
                    for (size_t j = 0; j < c; ++j) {
                        o[i * c + j] = py[i * c + j] * (pg[i * c + j] - s);
                    }
                }
                acc(n.a, std::move(ga));
                break;
            }
            case Op::kNormRows: {
                const Tensor& x = nodes_[n.a].value;
                const Tensor& y = n.value;
                const size_t r = x.rows(), c = x.cols();
                const double cd = static_cast<double>(c);
                Tensor ga = Tensor::zeros({r, c});
                double* o = ga.data();
                const double* px = x.data();
                const double* py = y.data();
                for (size_t i = 0; i < r; ++i) {
                    double mean = 0.0;
                    for (size_t j = 0; j < c; ++j) mean += px[i * c + j];
                    mean /= cd;
                    double var = 0.0;
                    for (size_t j = 0; j < c; ++j) {
                        const double d = px[i * c + j] - mean;
                        var += d * d;
                    }
                    var /= cd;
                    const double inv = 1.0 / std::sqrt(var + n.c);
                    double gmean = 0.0, gydot = 0.0;
                    for (size_t j = 0; j < c; ++j) {
                        gmean += pg[i * c + j];
                        gydot += pg[i * c + j] * py[i * c + j];
                    }
                    gmean /= cd;
                    gydot /= cd;
                    for (size_t j = 0; j < c; ++j) {
                        o[i * c + j] = inv * (pg[i * c + j] - gmean - py[i * c + j] * gydot);
                    }
                }
                acc(n.a, std::move(ga));
                break;
            }
            case Op::kMeanAxis: {
                const Tensor& x = nodes_[n.a].value;
                const size_t r = x.rows(), c = x.cols();
                Tensor ga = Tensor::zeros({r, c});
                double* o = ga.data();
                if (n.i0 == 0) {
                    const double inv = 1.0 / static_cast<double>(r);
                    for (size_t i = 0; i < r; ++i) {
                        for (size_t j = 0; j < c; ++j) o[i * c + j] = pg[j] * inv;
                    }
                } else {
                    const double inv = 1.0 / static_cast<double>(c);
                    for (size_t i = 0; i < r; ++i) {
                        for (size_t j = 0; j < c; ++j) o[i * c + j] = pg[i] * inv;
                    }
                }
                acc(n.a, std::move(ga));
                break;
            }
            case Op::kSum: {
                const Tensor& x = nodes_[n.a].value;
                const double gs = g.scalar_value();
                Tensor ga = Tensor::full(x.shape(), gs);
                acc(n.a, std::move(ga));
                break;
            }
            case Op::kL2Norm: {
                const Tensor& x = nodes_[n.a].value;
                const double y = n.value.scalar_value();
                const double gs = g.scalar_value();
                Tensor ga = Tensor::zeros(x.shape());
                if (y > kTiny) {
                    double* o = ga.data();
                    const double* px = x.data();
                    const double f = gs / y;
                    for (size_t i = 0; i < ga.size(); ++i) o[i] = f * px[i];
                }
                acc(n.a, std::move(ga));
                break;
            }
            case Op::kDiv: {
                const Tensor& tb = nodes_[n.b].value;
                const Tensor& y = n.value;
                Tensor ga = g, gb = g;
                double* pa = ga.data();
                double* pb2 = gb.data();
                const double* pbv = tb.data();
                const double* py = y.data();
                for (size_t i = 0; i < g.size(); ++i) {
                    pa[i] /= pbv[i];
                    pb2[i] = -pb2[i] * py[i] / pbv[i];
                }
                acc(n.a, std::move(ga));
                acc(n.b, std::move(gb));
                break;
            }
            case Op::kMulScalar: {
                const Tensor& ta = nodes_[n.a].value;
                const double sv = nodes_[n.b].value.scalar_value();
                Tensor ga = g;
                double* o = ga.data();
                const double* pa = ta.data();
                double gs = 0.0;
                for (size_t i = 0; i < ga.size(); ++i) {
                    gs += o[i] * pa[i];
                    o[i] *= sv;
                }
                acc(n.a, std::move(ga));
                acc(n.b, Tensor::scalar(gs));
                break;
            }
            case Op::kSqrt: {
                const Tensor& y = n.value;
                Tensor ga = g;
                double* o = ga.data();
                const double* py = y.data();
                for (size_t i = 0; i < ga.size(); ++i) {
                    o[i] = py[i] > kTiny ? o[i] / (2.0 * py[i]) : 0.0;
                }
                acc(n.a, std::move(ga));
                break;
            }
            case Op::kAbs: {
                const Tensor& x = nodes_[n.a].value;
                Tensor ga = g;
                double* o = ga.data();
                const double* px = x.data();
                for (size_t i = 0; i < ga.size(); ++i) {
                    o[i] = px[i] > 0.0 ? o[i] : (px[i] < 0.0 ? -o[i] : 0.0);
                }
                acc(n.a, std::move(ga));
                break;
            }
            case Op::kMaxConst: {
                const Tensor& x = nodes_[n.a].value;
                Tensor ga = g;
                double* o = ga.data();
                const double* px = x.data();
                for (size_t i = 0; i < ga.size(); ++i) {
                    if (!(px[i] > n.c)) o[i] = 0.0;
                }
                acc(n.a, std::move(ga));
                break;
            }
            case Op::kAcosh1p: {
                const Tensor& x = nodes_[n.a].value;
                Tensor ga = g;
                double* o = ga.data();
                const double* px = x.data();
                for (size_t i = 0; i < ga.size(); ++i) {
                    const double t = px[i] * (px[i] + 2.0);
                    o[i] = t > kTiny ? o[i] / std::sqrt(t) : 0.0;
                }
                acc(n.a, std::move(ga));
                break;
            }
            case Op::kSliceCols: {
                const Tensor& x = nodes_[n.a].value;
                const size_t r = x.rows(), c = x.cols();
                const size_t c0 = n.i0, w = n.i1 - n.i0;
                Tensor ga = Tensor::zeros({r, c});
                double* o = ga.data();
                for (size_t i = 0; i < r; ++i) {
                    std::memcpy(o + i * c + c0, pg + i * w, w * sizeof(double));
                }
                acc(n.a, std::move(ga));
                break;
            }
            case Op::kConcatCols: {
                const size_t r = g.rows(), total = g.cols();
                size_t off = 0;
                for (uint32_t pid : n.many) {
                    const Tensor& part = nodes_[pid].value;
                    const size_t c = part.cols();
                    Tensor gp = Tensor::zeros({r, c});
                    double* o = gp.data();
                    for (size_t i = 0; i < r; ++i) {
                        std::memcpy(o + i * c, pg + i * total + off, c * sizeof(double));
                    }
                    acc(pid, std::move(gp));
                    off += c;
                }
                break;
            }
            case Op::kConcatRows: {
                const size_t c = g.cols();
                size_t off = 0;
                for (uint32_t pid : n.many) {
                    const Tensor& part = nodes_[pid].value;
                    const size_t pr = part.rows();
                    Tensor gp = Tensor::zeros({pr, c});
                    std::memcpy(gp.data(), pg + off * c, pr * c * sizeof(double));
                    acc(pid, std::move(gp));
                    off += pr;
                }
                break;
            }
            case Op::kGatherRows: {
                const Tensor& table = nodes_[n.a].value;
                const size_t c = table.cols();
                Tensor gt = Tensor::zeros(table.shape());
                double* o = gt.data();
                for (size_t i = 0; i < n.many.size(); ++i) {
                    const size_t row = n.many[i];
                    for (size_t j = 0; j < c; ++j) o[row * c + j] += pg[i * c + j];
                }
                acc(n.a, std::move(gt));
                break;
            }
        }
    }

    return gm;
}

// ---- finite differences --------------------------------------------------------

double finite_diff_check(const std::function<Value(Tape&, Value)>& f, const Tensor& point,
                         double h) {
    if (!(h > 0.0) || !std::isfinite(h)) {
        throw InvalidArgument("finite_diff_check: step h must be positive and finite");
    }
    point.require_finite("finite_diff_check point");

    Tensor analytic = Tensor::zeros(point.shape());
    {
        Tape tape;
        Value x = tape.leaf(point);
        Value loss = f(tape, x);
        if (loss.tape != &tape) {
            throw InvalidArgument("finite_diff_check: f returned a value from another tape");
        }
        if (!loss.tensor().is_scalar()) {
            throw InvalidArgument("finite_diff_check: f must return a scalar, got " +
                                  loss.tensor().shape_str());
        }
        GradMap gm = tape.backward(loss);
        analytic = gm.get(x);
    }

    auto eval = [&f](const Tensor& at) {
        Tape tape;
        Value x = tape.leaf(at);
        Value loss = f(tape, x);
        return loss.tensor().scalar_value();
    };

    double worst = 0.0;
    Tensor probe = point;
    double* pp = probe.data();
    const double* pa = analytic.data();
    for (size_t i = 0; i < probe.size(); ++i) {
        const double orig = pp[i];
        pp[i] = orig + h;
        const double fp = eval(probe);
        pp[i] = orig - h;
        const double fm = eval(probe);
        pp[i] = orig;
        const double numeric = (fp - fm) / (2.0 * h);
        if (!std::isfinite(numeric)) {
            throw NumericError("finite_diff_check: non-finite numeric derivative");
        }
        const double err = std::fabs(pa[i] - numeric) / std::max(1.0, std::fabs(numeric));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace semshift
