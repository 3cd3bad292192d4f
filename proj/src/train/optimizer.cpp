#include "train/optimizer.hpp"

#include <cmath>

#include "core/error.hpp"

namespace semshift {

void AdamWConfig::validate() const {
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw InvalidArgument("AdamW: beta1 must be in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw InvalidArgument("AdamW: beta2 must be in [0,1)");
    if (!(eps > 0.0)) throw InvalidArgument("AdamW: eps must be positive");
    if (!(weight_decay >= 0.0)) throw InvalidArgument("AdamW: weight_decay must be non-negative");
}

AdamW::AdamW(AdamWConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void AdamW::step(std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                 double lr) {
    if (params.size() != grads.size()) {
        throw InvalidArgument("AdamW: params/grads size mismatch");
    }
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
        throw InvalidArgument("AdamW: lr must be finite and non-negative");
    }
    if (m_.empty()) {
        m_.reserve(params.size());
        v_.reserve(params.size());
        for (const Tensor* p : params) {
            if (p == nullptr) throw InvalidArgument("AdamW: null parameter");
            m_.push_back(Tensor::zeros(p->shape()));
            v_.push_back(Tensor::zeros(p->shape()));
        }
    } else if (m_.size() != params.size()) {
        throw StateError("AdamW: parameter count changed between steps");
    }

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        if (!p.same_shape(m)) {
            throw StateError("AdamW: parameter " + std::to_string(i) +
                             " changed shape between steps");
        }
        const Tensor* g = grads[i];
        if (g != nullptr && !g->same_shape(p)) {
            throw ShapeError("AdamW: grad shape " + g->shape_str() + " vs param " + p.shape_str());
        }
        double* pd = p.data();
        double* md = m.data();
        double* vd = v.data();
        const double* gd = (g != nullptr) ? g->data() : nullptr;
        const std::size_t n = p.size();
        for (std::size_t k = 0; k < n; ++k) {
            const double gk = gd ? gd[k] : 0.0;
            md[k] = cfg_.beta1 * md[k] + (1.0 - cfg_.beta1) * gk;
            vd[k] = cfg_.beta2 * vd[k] + (1.0 - cfg_.beta2) * gk * gk;
            const double mhat = md[k] / bc1;
            const double vhat = vd[k] / bc2;
            pd[k] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * pd[k]);
        }
        p.require_finite("AdamW parameter after update");
    }
}

}  // namespace semshift
