#include "train/pretrain.hpp"

#include <algorithm>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/tape.hpp"

namespace semshift {

void PretrainConfig::validate() const {
    if (epochs < 1) throw InvalidArgument("PretrainConfig: epochs must be >= 1");
    if (batch < 1) throw InvalidArgument("PretrainConfig: batch must be >= 1");
    if (!(lr >= 0.0)) throw InvalidArgument("PretrainConfig: lr must be non-negative");
    if (!(word_dropout >= 0.0 && word_dropout < 1.0)) {
        throw InvalidArgument("PretrainConfig: word_dropout must be in [0,1)");
    }
    if (!(margin >= -1.0 && margin <= 1.0)) {
        throw InvalidArgument("PretrainConfig: margin must be in [-1,1]");
    }
    adamw.validate();
}

namespace {

std::vector<Value> flatten(const TapeParams& tp) {
    std::vector<Value> out;
    out.reserve(4 + 16 * tp.layers.size());
    out.push_back(tp.token_table);
    out.push_back(tp.pos_table);
    for (const auto& l : tp.layers) {
        out.push_back(l.ln1_gamma);
        out.push_back(l.ln1_beta);
        out.push_back(l.wq);
        out.push_back(l.bq);
        out.push_back(l.wk);
        out.push_back(l.bk);
        out.push_back(l.wv);
        out.push_back(l.bv);
        out.push_back(l.wo);
        out.push_back(l.bo);
        out.push_back(l.ln2_gamma);
        out.push_back(l.ln2_beta);
        out.push_back(l.w1);
        out.push_back(l.b1);
        out.push_back(l.w2);
        out.push_back(l.b2);
    }
    out.push_back(tp.lnf_gamma);
    out.push_back(tp.lnf_beta);
    return out;
}

// Word-dropout variant of a word list; always keeps at least one word.
std::vector<std::string> drop_words(const std::vector<std::string>& words, double p, Rng& rng) {
    std::vector<std::string> kept;
    kept.reserve(words.size());
    for (const std::string& w : words) {
        if (rng.uniform() >= p) kept.push_back(w);
    }
    if (kept.empty() && !words.empty()) {
        kept.push_back(words[rng.uniform_int(words.size())]);
    }
    return kept;
}

TokenSequence sequence_of(const Vocab& vocab, const std::vector<std::string>& words,
                          uint32_t t_max) {
    std::string joined;
    for (const std::string& w : words) {
        if (!joined.empty()) joined += ' ';
        joined += w;
    }
    return tokenize(joined, vocab, t_max);
}

}  // namespace

PretrainState pretrain(Encoder& encoder, const std::vector<std::string>& texts,
                       const PretrainConfig& cfg) {
    cfg.validate();
    if (encoder.frozen()) throw StateError("pretrain: encoder is frozen");
    if (texts.size() < 2) throw InvalidArgument("pretrain: need at least two texts");

    const Vocab& vocab = encoder.vocab();
    const uint32_t t_max = encoder.config().t_max;
    std::vector<std::vector<std::string>> words(texts.size());
    std::vector<TokenSequence> anchors(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        words[i] = split_words(texts[i]);
        if (words[i].empty()) {
            throw InvalidArgument("pretrain: text " + std::to_string(i) + " has no words");
        }
        anchors[i] = tokenize(texts[i], vocab, t_max);
    }

    AdamW opt(cfg.adamw);
    std::vector<Tensor*> param_ptrs;
    encoder.for_each_param_mut([&](const std::string&, Tensor& t) { param_ptrs.push_back(&t); });

    PretrainState state;
    const std::size_t steps_per_epoch = (texts.size() + static_cast<std::size_t>(cfg.batch) - 1) /
                                        static_cast<std::size_t>(cfg.batch);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, "pretrain:epoch", static_cast<uint64_t>(epoch)));
        std::vector<std::size_t> order(texts.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);

        double epoch_total = 0.0;
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            const std::size_t b0 = step * static_cast<std::size_t>(cfg.batch);
            const std::size_t b1 =
                std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch));

            Tape tape;
            TapeParams tp = encoder.make_tape_params(tape);
            Value acc;
            for (std::size_t k = b0; k < b1; ++k) {
                const std::size_t i = order[k];
                TokenSequence positive = sequence_of(vocab, drop_words(words[i], cfg.word_dropout, rng), t_max);
                std::size_t j = rng.uniform_int(texts.size() - 1);
                if (j >= i) ++j;  // uniform over indices other than i

                Value ea = encoder.encode_on_tape(tape, tp, anchors[i]);
                Value ep = encoder.encode_on_tape(tape, tp, positive);
                Value en = encoder.encode_on_tape(tape, tp, anchors[j]);

                Value pull = add_const(scale(cosine(ea, ep), -1.0), 1.0);
                Value push = max_const(add_const(cosine(ea, en), -cfg.margin), 0.0);
                Value term = add(pull, push);
                acc = acc.valid() ? add(acc, term) : term;
            }
            Value loss = scale(acc, 1.0 / static_cast<double>(b1 - b0));

            GradMap grads = tape.backward(loss);
            std::vector<Value> param_values = flatten(tp);
            std::vector<const Tensor*> grad_ptrs;
            grad_ptrs.reserve(param_values.size());
            for (const Value& v : param_values) grad_ptrs.push_back(grads.try_get(v));
            opt.step(param_ptrs, grad_ptrs, cfg.lr);
            epoch_total += loss.tensor().scalar_value();
        }
        state.epoch_loss.push_back(epoch_total / static_cast<double>(steps_per_epoch));
    }
    return state;
}

}  // namespace semshift
