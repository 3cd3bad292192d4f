#include "augment/augment.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "core/error.hpp"
#include "core/tape.hpp"

namespace semshift {

void EnergyConfig::validate() const {
    if (!(lambda > 0.0)) throw InvalidArgument("EnergyConfig: lambda must be positive");
    if (!(eta > 0.0)) throw InvalidArgument("EnergyConfig: eta must be positive");
    if (!(sigma >= 0.0)) throw InvalidArgument("EnergyConfig: sigma must be non-negative");
    if (!(sigma_end >= 0.0)) throw InvalidArgument("EnergyConfig: sigma_end must be non-negative");
    if (n_steps < 1) throw InvalidArgument("EnergyConfig: n_steps must be >= 1");
    if (t_len < 1) throw InvalidArgument("EnergyConfig: t_len must be >= 1");
}

ChainState::ChainState(SoftSequence init, uint64_t noise_seed)
    : y(std::move(init)), rng(noise_seed) {}

ChainState::ChainState(SoftSequence init, Rng noise_rng)
    : y(std::move(init)), rng(noise_rng) {}

double sigma_at(const EnergyConfig& cfg, int step) {
    if (cfg.n_steps <= 1) return cfg.sigma;
    double f = static_cast<double>(step) / static_cast<double>(cfg.n_steps - 1);
    f = std::clamp(f, 0.0, 1.0);
    return cfg.sigma + (cfg.sigma_end - cfg.sigma) * f;
}

SoftSequence one_hot_logits(const TokenSequence& seq, size_t vocab_size, double scale) {
    const auto& ids = seq.ids;
    if (ids.size() < 2 || ids.front() != kBosId || ids.back() != kEosId) {
        throw InvalidArgument("one_hot_logits: sequence must be BOS/EOS framed");
    }
    const size_t t = ids.size() - 2;
    if (t == 0) throw InvalidArgument("one_hot_logits: sequence has no content tokens");
    Tensor logits = Tensor::zeros({t, vocab_size});
    for (size_t i = 0; i < t; ++i) {
        const uint32_t id = ids[i + 1];
        if (id == kBosId || id == kEosId || id == kPadId) {
            throw InvalidArgument("one_hot_logits: interior structural token");
        }
        if (id >= vocab_size) {
            throw InvalidArgument("one_hot_logits: token id " + std::to_string(id) +
                                  " out of range");
        }
        logits.data()[i * vocab_size + id] = scale;
    }
    return SoftSequence{std::move(logits)};
}

namespace {

std::vector<Tensor> embed_seeds(const std::vector<TokenSequence>& seeds, const Encoder& teacher) {
    if (seeds.empty()) throw InvalidArgument("similarity constraint needs a non-empty seed set");
    if (!teacher.frozen()) throw InvalidArgument("similarity constraint requires a frozen teacher");
    std::vector<Tensor> out;
    out.reserve(seeds.size());
    for (const TokenSequence& s : seeds) out.push_back(teacher.encode(s));
    return out;
}

Value similarity_on_tape(Tape& tape, const Encoder& teacher, Value logits,
                         const std::vector<Tensor>& seed_emb) {
    TapeParams tp = teacher.make_tape_params(tape);
    Value emb = teacher.encode_soft_on_tape(tape, tp, logits);
    Value acc;
    for (const Tensor& se : seed_emb) {
        Value term = cosine(emb, tape.leaf(se));
        acc = acc.valid() ? add(acc, term) : term;
    }
    return acc;
}

// One Langevin update against a precomputed seed-embedding cache.
void step_impl(ChainState& state, const EnergyConfig& cfg, const std::vector<Tensor>& seed_emb,
               const Encoder& teacher) {
    Tape tape;
    Value y = tape.leaf(state.y.logits);
    Value e_val = scale(similarity_on_tape(tape, teacher, y, seed_emb), -cfg.lambda);
    const double e = e_val.tensor().scalar_value();

    GradMap grads = tape.backward(e_val);
    const Tensor* g = grads.try_get(y);
    if (g != nullptr) {
        for (size_t i = 0; i < g->size(); ++i) {
            if (!std::isfinite(g->data()[i])) {
                throw NumericError("langevin_step: non-finite energy gradient at step " +
                                   std::to_string(state.step));
            }
        }
    }

    const double sn = sigma_at(cfg, state.step);
    double* yd = state.y.logits.data();
    const double* gd = g != nullptr ? g->data() : nullptr;
    for (size_t i = 0; i < state.y.logits.size(); ++i) {
        const double grad_i = gd != nullptr ? gd[i] : 0.0;
        yd[i] = yd[i] - cfg.eta * grad_i + state.rng.normal() * sn;
        if (!std::isfinite(yd[i])) {
            throw NumericError("langevin_step: non-finite logit at step " +
                               std::to_string(state.step));
        }
    }
    state.step += 1;
    state.energy_trace.push_back(e);
}

}  // namespace

double similarity_constraint(const SoftSequence& y, const std::vector<TokenSequence>& seeds,
                             const Encoder& teacher) {
    const std::vector<Tensor> seed_emb = embed_seeds(seeds, teacher);
    Tape tape;
    return similarity_on_tape(tape, teacher, tape.leaf(y.logits), seed_emb)
        .tensor()
        .scalar_value();
}

double energy(const SoftSequence& y, const EnergyConfig& cfg,
              const std::vector<TokenSequence>& seeds, const Encoder& teacher) {
    return -cfg.lambda * similarity_constraint(y, seeds, teacher);
}

void langevin_step(ChainState& state, const EnergyConfig& cfg,
                   const std::vector<TokenSequence>& seeds, const Encoder& teacher) {
    step_impl(state, cfg, embed_seeds(seeds, teacher), teacher);
}

ChainState run_chain(SoftSequence init, const EnergyConfig& cfg,
                     const std::vector<TokenSequence>& seeds, const Encoder& teacher) {
    const std::vector<Tensor> seed_emb = embed_seeds(seeds, teacher);
    ChainState state(std::move(init), cfg.seed);
    for (int n = 0; n < cfg.n_steps; ++n) step_impl(state, cfg, seed_emb, teacher);
    return state;
}

TokenSequence decode_soft(const SoftSequence& y, const Vocab& vocab) {
    const Tensor& logits = y.logits;
    if (logits.rank() != 2 || logits.shape()[1] != vocab.size()) {
        throw ShapeError("decode_soft: logits " + logits.shape_str() + " do not match |V|=" +
                         std::to_string(vocab.size()));
    }
    logits.require_finite("decode_soft: logits");
    const size_t t = logits.shape()[0];
    const size_t v = vocab.size();

    TokenSequence out;
    out.ids.push_back(kBosId);
    for (size_t row = 0; row < t; ++row) {
        const double* r = logits.data() + row * v;
        // EOS decodes only where its logit strictly dominates the whole row.
        bool eos_strict = true;
        for (size_t i = 0; i < v && eos_strict; ++i) {
            if (i != kEosId && r[i] >= r[kEosId]) eos_strict = false;
        }
        if (eos_strict) break;
        size_t best = kNumReserved;
        for (size_t i = kNumReserved + 1; i < v; ++i) {
            if (r[i] > r[best]) best = i;  // strict: ties keep the lowest id
        }
        out.ids.push_back(static_cast<uint32_t>(best));
    }
    out.ids.push_back(kEosId);
    return out;
}

std::string decode_soft_text(const SoftSequence& y, const Vocab& vocab) {
    const TokenSequence seq = decode_soft(y, vocab);
    std::string text;
    for (size_t i = 1; i + 1 < seq.ids.size(); ++i) {
        if (!text.empty()) text += ' ';
        text += vocab.token_of(seq.ids[i]);
    }
    return text;
}

std::vector<PromptRecord> augment_corpus(const std::vector<PromptRecord>& seeds,
                                         const EnergyConfig& cfg, const Encoder& teacher,
                                         int count) {
    cfg.validate();
    if (count < 1) throw InvalidArgument("augment_corpus: count must be >= 1");
    if (seeds.empty()) throw InvalidArgument("augment_corpus: seed set is empty");
    for (const PromptRecord& r : seeds) {
        if (r.role != Role::kAdversarial) {
            throw InvalidArgument("augment_corpus: seed \"" + r.text +
                                  "\" does not carry the adversarial role");
        }
    }

    const Vocab& vocab = teacher.vocab();
    const uint32_t t_max = teacher.config().t_max;
    const size_t max_content =
        std::min<size_t>(cfg.t_len, static_cast<size_t>(t_max) - 2);

    std::vector<TokenSequence> seed_seqs;
    seed_seqs.reserve(seeds.size());
    for (const PromptRecord& r : seeds) seed_seqs.push_back(tokenize(r.text, vocab, t_max));
    const std::vector<Tensor> seed_emb = embed_seeds(seed_seqs, teacher);

    std::set<std::vector<uint32_t>> taken;
    for (const TokenSequence& s : seed_seqs) taken.insert(s.ids);

    std::vector<PromptRecord> out;
    for (int chain = 0; chain < count; ++chain) {
        Rng rng(derive_seed(cfg.seed, "chain", static_cast<uint64_t>(chain)));
        const size_t pick = rng.uniform_int(seed_seqs.size());

        // One-hot of the picked seed, truncated to the working length, plus
        // unit Gaussian perturbation.
        TokenSequence base = seed_seqs[pick];
        if (base.ids.size() - 2 > max_content) {
            base.ids.resize(max_content + 1);
            base.ids.push_back(kEosId);
        }
        SoftSequence init = one_hot_logits(base, vocab.size(), 5.0);
        for (size_t i = 0; i < init.logits.size(); ++i) {
            init.logits.data()[i] += rng.normal();
        }

        ChainState state(std::move(init), rng);
        for (int n = 0; n < cfg.n_steps; ++n) step_impl(state, cfg, seed_emb, teacher);

        TokenSequence decoded = decode_soft(state.y, vocab);
        if (decoded.ids.size() <= 2) continue;              // decoded to nothing
        if (!taken.insert(decoded.ids).second) continue;    // duplicate of a seed or an output

        PromptRecord rec;
        rec.text = decode_soft_text(state.y, vocab);
        rec.role = Role::kAdversarial;
        rec.provenance = Provenance::kAugmented;
        rec.category = seeds[pick].category;
        out.push_back(std::move(rec));
    }
    if (out.empty()) {
        throw StateError(
            "augment_corpus: every chain decoded to a duplicate of the seed set; "
            "increase sigma or n_steps for more diversity");
    }
    return out;
}

}  // namespace semshift
