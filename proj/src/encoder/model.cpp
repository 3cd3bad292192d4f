#include "encoder/model.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace semshift {

void EncoderConfig::validate() const {
    if (vocab_size <= kNumReserved) {
        throw InvalidArgument("encoder config: vocab_size must exceed the reserved tokens");
    }
    if (d_model == 0 || n_layers == 0 || n_heads == 0 || mlp_hidden == 0) {
        throw InvalidArgument("encoder config: dimensions must be positive");
    }
    if (d_model % n_heads != 0) {
        throw InvalidArgument("encoder config: d_model must be divisible by n_heads");
    }
    if (t_max < 2) {
        throw InvalidArgument("encoder config: t_max must allow BOS and EOS");
    }
    if (!(ln_eps > 0.0)) {
        throw InvalidArgument("encoder config: ln_eps must be positive");
    }
}

Encoder::Encoder(EncoderConfig config, Vocab vocab) : config_(config), vocab_(std::move(vocab)) {
    if (config_.vocab_size == 0) {
        config_.vocab_size = vocab_.size();
    }
    if (config_.vocab_size != vocab_.size()) {
        throw InvalidArgument("encoder config vocab_size " + std::to_string(config_.vocab_size) +
                              " disagrees with vocabulary size " + std::to_string(vocab_.size()));
    }
    config_.validate();
}

void Encoder::init_parameters(uint64_t seed) {
    if (frozen_) {
        throw StateError("cannot re-initialize a frozen encoder");
    }
    Rng rng(seed);
    const size_t v = config_.vocab_size, d = config_.d_model, mh = config_.mlp_hidden;
    auto normal = [&rng](std::vector<size_t> shape, double stddev) {
        Tensor t = Tensor::zeros(std::move(shape));
        for (size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(0.0, stddev);
        return t;
    };
    const double w_std = 0.02;

    params_.token_table = normal({v, d}, w_std);
    params_.pos_table = normal({config_.t_max, d}, w_std);
    params_.layers.clear();
    params_.layers.reserve(config_.n_layers);
    for (uint32_t l = 0; l < config_.n_layers; ++l) {
        LayerParams lp;
        lp.ln1_gamma = Tensor::full({1, d}, 1.0);
        lp.ln1_beta = Tensor::zeros({1, d});
        lp.wq = normal({d, d}, w_std);
        lp.bq = Tensor::zeros({1, d});
        lp.wk = normal({d, d}, w_std);
        lp.bk = Tensor::zeros({1, d});
        lp.wv = normal({d, d}, w_std);
        lp.bv = Tensor::zeros({1, d});
        lp.wo = normal({d, d}, w_std);
        lp.bo = Tensor::zeros({1, d});
        lp.ln2_gamma = Tensor::full({1, d}, 1.0);
        lp.ln2_beta = Tensor::zeros({1, d});
        lp.w1 = normal({d, mh}, w_std);
        lp.b1 = Tensor::zeros({1, mh});
        lp.w2 = normal({mh, d}, w_std);
        lp.b2 = Tensor::zeros({1, d});
        params_.layers.push_back(std::move(lp));
    }
    params_.lnf_gamma = Tensor::full({1, d}, 1.0);
    params_.lnf_beta = Tensor::zeros({1, d});
}

Encoder Encoder::clone_student() const {
    Encoder copy = *this;
    copy.frozen_ = false;
    return copy;
}

EncoderParams& Encoder::mutable_params() {
    if (frozen_) {
        throw StateError("attempted to mutate a frozen encoder");
    }
    return params_;
}

void Encoder::for_each_param(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
    fn("token_table", params_.token_table);
    fn("pos_table", params_.pos_table);
    for (size_t l = 0; l < params_.layers.size(); ++l) {
        const LayerParams& lp = params_.layers[l];
        const std::string pre = "layer" + std::to_string(l) + ".";
        fn(pre + "ln1_gamma", lp.ln1_gamma);
        fn(pre + "ln1_beta", lp.ln1_beta);
        fn(pre + "wq", lp.wq);
        fn(pre + "bq", lp.bq);
        fn(pre + "wk", lp.wk);
        fn(pre + "bk", lp.bk);
        fn(pre + "wv", lp.wv);
        fn(pre + "bv", lp.bv);
        fn(pre + "wo", lp.wo);
        fn(pre + "bo", lp.bo);
        fn(pre + "ln2_gamma", lp.ln2_gamma);
        fn(pre + "ln2_beta", lp.ln2_beta);
        fn(pre + "w1", lp.w1);
        fn(pre + "b1", lp.b1);
        fn(pre + "w2", lp.w2);
        fn(pre + "b2", lp.b2);
    }
    fn("lnf_gamma", params_.lnf_gamma);
    fn("lnf_beta", params_.lnf_beta);
}

void Encoder::for_each_param_mut(const std::function<void(const std::string&, Tensor&)>& fn) {
    if (frozen_) {
        throw StateError("attempted to mutate a frozen encoder");
    }
    fn("token_table", params_.token_table);
    fn("pos_table", params_.pos_table);
    for (size_t l = 0; l < params_.layers.size(); ++l) {
        LayerParams& lp = params_.layers[l];
        const std::string pre = "layer" + std::to_string(l) + ".";
        fn(pre + "ln1_gamma", lp.ln1_gamma);
        fn(pre + "ln1_beta", lp.ln1_beta);
        fn(pre + "wq", lp.wq);
        fn(pre + "bq", lp.bq);
        fn(pre + "wk", lp.wk);
        fn(pre + "bk", lp.bk);
        fn(pre + "wv", lp.wv);
        fn(pre + "bv", lp.bv);
        fn(pre + "wo", lp.wo);
        fn(pre + "bo", lp.bo);
        fn(pre + "ln2_gamma", lp.ln2_gamma);
        fn(pre + "ln2_beta", lp.ln2_beta);
        fn(pre + "w1", lp.w1);
        fn(pre + "b1", lp.b1);
        fn(pre + "w2", lp.w2);
        fn(pre + "b2", lp.b2);
    }
    fn("lnf_gamma", params_.lnf_gamma);
    fn("lnf_beta", params_.lnf_beta);
}

TapeParams Encoder::make_tape_params(Tape& tape) const {
    TapeParams tp;
    tp.token_table = tape.leaf(params_.token_table);
    tp.pos_table = tape.leaf(params_.pos_table);
    tp.layers.reserve(params_.layers.size());
    for (const LayerParams& lp : params_.layers) {
        TapeParams::Layer tl;
        tl.ln1_gamma = tape.leaf(lp.ln1_gamma);
        tl.ln1_beta = tape.leaf(lp.ln1_beta);
        tl.wq = tape.leaf(lp.wq);
        tl.bq = tape.leaf(lp.bq);
        tl.wk = tape.leaf(lp.wk);
        tl.bk = tape.leaf(lp.bk);
        tl.wv = tape.leaf(lp.wv);
        tl.bv = tape.leaf(lp.bv);
        tl.wo = tape.leaf(lp.wo);
        tl.bo = tape.leaf(lp.bo);
        tl.ln2_gamma = tape.leaf(lp.ln2_gamma);
        tl.ln2_beta = tape.leaf(lp.ln2_beta);
        tl.w1 = tape.leaf(lp.w1);
        tl.b1 = tape.leaf(lp.b1);
        tl.w2 = tape.leaf(lp.w2);
        tl.b2 = tape.leaf(lp.b2);
        tp.layers.push_back(tl);
    }
    tp.lnf_gamma = tape.leaf(params_.lnf_gamma);
    tp.lnf_beta = tape.leaf(params_.lnf_beta);
    return tp;
}

namespace {

Value layer_norm(Value x, Value gamma, Value beta, double eps) {
    return add_rowvec(mul_rowvec(norm_rows(x, eps), gamma), beta);
}

std::vector<uint32_t> iota_ids(size_t n) {
    std::vector<uint32_t> ids(n);
    for (size_t i = 0; i < n; ++i) ids[i] = static_cast<uint32_t>(i);
    return ids;
}

}  // namespace

Value Encoder::forward_rows(Tape& tape, const TapeParams& p, Value embedded, size_t t_len) const {
    const uint32_t dh = config_.head_dim();
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    Value pos = gather_rows(p.pos_table, iota_ids(t_len));
    Value x = add(embedded, pos);

    for (const TapeParams::Layer& lp : p.layers) {
        Value h = layer_norm(x, lp.ln1_gamma, lp.ln1_beta, config_.ln_eps);
        Value q = add_rowvec(matmul(h, lp.wq), lp.bq);
        Value k = add_rowvec(matmul(h, lp.wk), lp.bk);
        Value v = add_rowvec(matmul(h, lp.wv), lp.bv);

        std::vector<Value> heads;
        heads.reserve(config_.n_heads);
        for (uint32_t i = 0; i < config_.n_heads; ++i) {
            const size_t c0 = static_cast<size_t>(i) * dh, c1 = c0 + dh;
            Value qi = slice_cols(q, c0, c1);
            Value ki = slice_cols(k, c0, c1);
            Value vi = slice_cols(v, c0, c1);
            Value scores = scale(matmul(qi, transpose(ki)), inv_sqrt_dh);
            Value probs = softmax_rows(scores);
            heads.push_back(matmul(probs, vi));
        }
        Value ctx = concat_cols(heads);
        Value attn = add_rowvec(matmul(ctx, lp.wo), lp.bo);
        x = add(x, attn);

        Value h2 = layer_norm(x, lp.ln2_gamma, lp.ln2_beta, config_.ln_eps);
        Value hidden = tanh(add_rowvec(matmul(h2, lp.w1), lp.b1));
        Value mlp = add_rowvec(matmul(hidden, lp.w2), lp.b2);
        x = add(x, mlp);
    }

    Value final_rows = layer_norm(x, p.lnf_gamma, p.lnf_beta, config_.ln_eps);
    if (config_.pooling == Pooling::kMean) {
        return mean_axis(final_rows, 0);
    }
    return gather_rows(final_rows, {static_cast<uint32_t>(t_len - 1)});
}

Value Encoder::encode_on_tape(Tape& tape, const TapeParams& p, const TokenSequence& seq) const {
    for (uint32_t id : seq.ids) {
        if (id >= config_.vocab_size) {
            throw InvalidArgument("encode: token id " + std::to_string(id) +
                                  " out of range (|V|=" + std::to_string(config_.vocab_size) +
                                  ")");
        }
    }
    // trailing PAD is dead weight by definition; dropping it here makes
    // padding invariance hold by construction (no masks needed downstream)
    std::vector<uint32_t> ids = seq.ids;
    while (!ids.empty() && ids.back() == kPadId) ids.pop_back();
    for (uint32_t id : ids) {
        if (id == kPadId) {
            throw InvalidArgument("encode: PAD inside the sequence, not just as padding");
        }
    }
    if (ids.empty()) {
        throw InvalidArgument("encode: empty token sequence");
    }
    if (ids.size() > config_.t_max) {
        throw InvalidArgument("encode: true sequence length " + std::to_string(ids.size()) +
                              " exceeds t_max " + std::to_string(config_.t_max));
    }
    Value embedded = gather_rows(p.token_table, ids);
    return forward_rows(tape, p, embedded, ids.size());
}

Value Encoder::encode_soft_on_tape(Tape& tape, const TapeParams& p, Value content_logits) const {
    const Tensor& logits = content_logits.tensor();
    if (logits.rank() != 2 || logits.cols() != config_.vocab_size) {
        throw ShapeError("encode_soft: logits must be [T x " +
                         std::to_string(config_.vocab_size) + "], got " + logits.shape_str());
    }
    const size_t t_content = logits.rows();
    if (t_content == 0 || t_content + 2 > config_.t_max) {
        throw InvalidArgument("encode_soft: content length " + std::to_string(t_content) +
                              " plus BOS/EOS must fit t_max " + std::to_string(config_.t_max));
    }
    Value probs = softmax_rows(content_logits);
    Value content_rows = matmul(probs, p.token_table);
    Value bos_row = gather_rows(p.token_table, {kBosId});
    Value eos_row = gather_rows(p.token_table, {kEosId});
    std::array<Value, 3> parts = {bos_row, content_rows, eos_row};
    Value embedded = concat_rows(parts);
    return forward_rows(tape, p, embedded, t_content + 2);
}

Tensor Encoder::encode(const TokenSequence& seq) const {
    Tape tape;
    TapeParams p = make_tape_params(tape);
    return encode_on_tape(tape, p, seq).tensor();
}

Tensor Encoder::encode_text(const std::string& text) const {
    return encode(tokenize(text, vocab_, config_.t_max));
}

Tensor Encoder::encode_soft(const SoftSequence& soft) const {
    Tape tape;
    TapeParams p = make_tape_params(tape);
    Value logits = tape.leaf(soft.logits);
    return encode_soft_on_tape(tape, p, logits).tensor();
}

// ---- persistence ---------------------------------------------------------

namespace {

constexpr char kMagic[6] = {'S', 'S', 'E', 'N', 'C', '\0'};
constexpr uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::istream& in, const std::string& path) {
    uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw IoError("checkpoint truncated: " + path);
    }
    return v;
}
uint64_t read_u64(std::istream& in, const std::string& path) {
    uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw IoError("checkpoint truncated: " + path);
    }
    return v;
}
double read_f64(std::istream& in, const std::string& path) {
    double v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw IoError("checkpoint truncated: " + path);
    }
    return v;
}

}  // namespace

void Encoder::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open checkpoint for writing: " + path);
    }
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kFormatVersion);
    write_u32(out, config_.vocab_size);
    write_u32(out, config_.d_model);
    write_u32(out, config_.n_layers);
    write_u32(out, config_.n_heads);
    write_u32(out, config_.t_max);
    write_u32(out, config_.mlp_hidden);
    write_u32(out, static_cast<uint32_t>(config_.pooling));
    write_f64(out, config_.ln_eps);
    write_u64(out, vocab_.hash());
    write_u32(out, vocab_.size());
    for (const std::string& tok : vocab_.tokens()) {
        write_u32(out, static_cast<uint32_t>(tok.size()));
        out.write(tok.data(), static_cast<std::streamsize>(tok.size()));
    }
    for_each_param([&out](const std::string&, const Tensor& t) {
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    });
    if (!out) {
        throw IoError("failed writing checkpoint: " + path);
    }
}

Encoder Encoder::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint: " + path);
    }
    char magic[6] = {};
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ParseError("not a checkpoint file (bad magic): " + path);
    }
    const uint32_t version = read_u32(in, path);
    if (version != kFormatVersion) {
        throw ParseError("unsupported checkpoint version " + std::to_string(version) + ": " +
                         path);
    }
    EncoderConfig cfg;
    cfg.vocab_size = read_u32(in, path);
    cfg.d_model = read_u32(in, path);
    cfg.n_layers = read_u32(in, path);
    cfg.n_heads = read_u32(in, path);
    cfg.t_max = read_u32(in, path);
    cfg.mlp_hidden = read_u32(in, path);
    const uint32_t pooling = read_u32(in, path);
    if (pooling > 1) {
        throw ParseError("checkpoint has unknown pooling mode: " + path);
    }
    cfg.pooling = static_cast<Pooling>(pooling);
    cfg.ln_eps = read_f64(in, path);
    const uint64_t stored_hash = read_u64(in, path);
    const uint32_t vocab_count = read_u32(in, path);
    if (vocab_count != cfg.vocab_size) {
        throw ParseError("checkpoint vocabulary count disagrees with config: " + path);
    }
    std::vector<std::string> tokens;
    tokens.reserve(vocab_count);
    for (uint32_t i = 0; i < vocab_count; ++i) {
        const uint32_t len = read_u32(in, path);
        if (len > 4096) {
            throw ParseError("checkpoint token length implausible: " + path);
        }
        std::string tok(len, '\0');
        if (!in.read(tok.data(), len)) {
            throw IoError("checkpoint truncated: " + path);
        }
        tokens.push_back(std::move(tok));
    }
    if (tokens.size() < kNumReserved || tokens[kPadId] != "<pad>" || tokens[kUnkId] != "<unk>" ||
        tokens[kBosId] != "<bos>" || tokens[kEosId] != "<eos>") {
        throw ParseError("checkpoint vocabulary lacks reserved tokens: " + path);
    }
    Vocab vocab = Vocab::build({tokens.begin() + kNumReserved, tokens.end()});
    if (vocab.size() != vocab_count) {
        throw ParseError("checkpoint vocabulary has duplicates: " + path);
    }
    if (vocab.hash() != stored_hash) {
        throw ParseError("checkpoint vocabulary hash mismatch: " + path);
    }

    Encoder model(cfg, std::move(vocab));
    model.init_parameters(0);  // sets shapes; data overwritten below
    model.for_each_param_mut([&in, &path](const std::string& name, Tensor& t) {
        if (!in.read(reinterpret_cast<char*>(t.data()),
                     static_cast<std::streamsize>(t.size() * sizeof(double)))) {
            throw IoError("checkpoint truncated in tensor " + name + ": " + path);
        }
        t.require_finite(("checkpoint tensor " + name).c_str());
    });
    char extra = 0;
    if (in.read(&extra, 1)) {
        throw ParseError("checkpoint has trailing bytes: " + path);
    }
    return model;
}

}  // namespace semshift
