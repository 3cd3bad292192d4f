#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "core/tape.hpp"
#include "core/tensor.hpp"
#include "encoder/vocab.hpp"

namespace semshift {

enum class Pooling : uint32_t {
    kMean = 0,   // mean over non-pad positions
    kFinal = 1,  // last non-pad position
};

struct EncoderConfig {
    uint32_t vocab_size = 0;  // filled from the vocabulary
    uint32_t d_model = 64;
    uint32_t n_layers = 2;
    uint32_t n_heads = 4;
    uint32_t t_max = 32;
    uint32_t mlp_hidden = 128;
    Pooling pooling = Pooling::kMean;
    double ln_eps = 1e-5;

    uint32_t head_dim() const { return d_model / n_heads; }
    void validate() const;
};

// One transformer block: pre-LN attention, residual, pre-LN tanh MLP, residual.
struct LayerParams {
    Tensor ln1_gamma, ln1_beta;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_gamma, ln2_beta;
    Tensor w1, b1, w2, b2;
};

struct EncoderParams {
    Tensor token_table;  // |V| x d
    Tensor pos_table;    // t_max x d
    std::vector<LayerParams> layers;
    Tensor lnf_gamma, lnf_beta;
};

// Tape handles for every parameter, mirrored in declaration order.
struct TapeParams {
    Value token_table;
    Value pos_table;
    struct Layer {
        Value ln1_gamma, ln1_beta;
        Value wq, bq, wk, bk, wv, bv, wo, bo;
        Value ln2_gamma, ln2_beta;
        Value w1, b1, w2, b2;
    };
    std::vector<Layer> layers;
    Value lnf_gamma, lnf_beta;
};

// Soft sequence: logits over the vocabulary for each *content* position.
// BOS and EOS are structural and injected by the encoder, not represented
// as logits rows.
struct SoftSequence {
    Tensor logits;  // T x |V|
};

// Transformer-style text encoder with a hard-token and a soft-logits forward
// path. A frozen instance (the teacher) rejects any parameter mutation.
class Encoder {
public:
    Encoder(EncoderConfig config, Vocab vocab);

    // deterministic parameter initialization from a seed
    void init_parameters(uint64_t seed);

    const EncoderConfig& config() const { return config_; }
    const Vocab& vocab() const { return vocab_; }

    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }
    // an unfrozen copy sharing nothing with this instance
    Encoder clone_student() const;

    const EncoderParams& params() const { return params_; }
    // mutation gate: throws StateError when frozen
    EncoderParams& mutable_params();

    // visits every parameter tensor in checkpoint declaration order
    void for_each_param(const std::function<void(const std::string&, const Tensor&)>& fn) const;
    void for_each_param_mut(const std::function<void(const std::string&, Tensor&)>& fn);

    // ---- forward paths ----

    // inference: embedding of a hard token sequence (1 x d tensor)
    Tensor encode(const TokenSequence& seq) const;
    // tokenize + encode in one step
    Tensor encode_text(const std::string& text) const;

    // training path: parameters are the given tape leaves
    Value encode_on_tape(Tape& tape, const TapeParams& p, const TokenSequence& seq) const;

    // augmentation path: content logits differentiable, parameters constant
    Value encode_soft_on_tape(Tape& tape, const TapeParams& p, Value content_logits) const;
    // convenience: soft inference without keeping the tape
    Tensor encode_soft(const SoftSequence& soft) const;

    // mirrors all parameters onto a tape as leaves
    TapeParams make_tape_params(Tape& tape) const;

    // ---- persistence ----
    void save(const std::string& path) const;
    static Encoder load(const std::string& path);

private:
    Value forward_rows(Tape& tape, const TapeParams& p, Value embedded, size_t t_len) const;

    EncoderConfig config_;
    Vocab vocab_;
    EncoderParams params_;
    bool frozen_ = false;
};

}  // namespace semshift
