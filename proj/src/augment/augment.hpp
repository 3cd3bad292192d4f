#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "data/record.hpp"
#include "encoder/model.hpp"

namespace semshift {

// Energy-based corpus augmentation: Langevin dynamics over soft token
// sequences under a similarity constraint toward a set of seed prompts.
//
//   g_sim(y) = sum_j cos(T(y), T(x_j))      (similarity constraint)
//   E(y)     = -lambda * g_sim(y)           (energy; lower is better)
//   y <- y - eta * grad E(y) + noise        (noise ~ N(0, sigma_n))
//
// No partition function is ever evaluated anywhere in this module: the
// dynamics only need grad E.
struct EnergyConfig {
    double lambda = 1.0;    // constraint weight, > 0
    double eta = 0.1;       // step size, > 0
    double sigma = 0.5;     // noise stddev at the first step, >= 0
    double sigma_end = 0.01;  // linear-decay target at the last step, >= 0
    int n_steps = 200;      // chain length, >= 1
    uint32_t t_len = 16;    // max soft-sequence content length, >= 1
    uint64_t seed = 7;

    // Full invariant check; enforced at the augment_corpus entry point.
    // The lower-level chain operations deliberately accept eta = 0 and
    // sigma = 0 so that identity-step and pure-descent behavior stay
    // testable.
    void validate() const;
};

struct ChainState {
    SoftSequence y;
    int step = 0;
    std::vector<double> energy_trace;  // E at the start of each executed step
    Rng rng;

    ChainState(SoftSequence init, uint64_t noise_seed);
    ChainState(SoftSequence init, Rng noise_rng);
};

// Noise stddev for step `step` of the linear schedule: sigma at step 0
// decaying to sigma_end at step n_steps-1 (clamped beyond).
double sigma_at(const EnergyConfig& cfg, int step);

// One-hot logits (value `scale` on the true token, 0 elsewhere) for the
// content tokens of `seq`, which must be BOS-...-EOS framed with no interior
// structural tokens.
SoftSequence one_hot_logits(const TokenSequence& seq, size_t vocab_size, double scale);

// sum_j cos(T(y), T(x_j)); bounded by [-n, n] for n seeds.
double similarity_constraint(const SoftSequence& y, const std::vector<TokenSequence>& seeds,
                             const Encoder& teacher);

// E(y) = -lambda * g_sim(y).
double energy(const SoftSequence& y, const EnergyConfig& cfg,
              const std::vector<TokenSequence>& seeds, const Encoder& teacher);

// One Langevin update in place: y <- y - eta*gradE + N(0, sigma_at(step));
// appends the pre-update energy to the trace and advances the step index.
void langevin_step(ChainState& state, const EnergyConfig& cfg,
                   const std::vector<TokenSequence>& seeds, const Encoder& teacher);

// Runs cfg.n_steps Langevin updates from `init`, with noise seeded by
// cfg.seed. The returned trace has exactly cfg.n_steps entries.
ChainState run_chain(SoftSequence init, const EnergyConfig& cfg,
                     const std::vector<TokenSequence>& seeds, const Encoder& teacher);

// Per-position argmax decode. Reserved tokens other than EOS never decode;
// EOS decodes only where its logit is a strict maximum of the entire row,
// and the sequence is cut at the first decoded EOS. Ties among ordinary
// tokens break toward the lowest id. The result is BOS/EOS framed.
TokenSequence decode_soft(const SoftSequence& y, const Vocab& vocab);

// decode_soft, rendered through the vocabulary as space-joined words.
std::string decode_soft_text(const SoftSequence& y, const Vocab& vocab);

// Runs `count` chains, each initialized from the one-hot logits (scale 5.0)
// of a randomly chosen seed prompt plus N(0,1) perturbation, with the chain
// RNG derived from (cfg.seed, chain index). Decoded outputs that match any
// seed token-for-token (or another output, or decode to nothing) are
// dropped. Outputs carry role=adversarial, provenance=augmented, and the
// category of the seed that initialized the chain.
std::vector<PromptRecord> augment_corpus(const std::vector<PromptRecord>& seeds,
                                         const EnergyConfig& cfg, const Encoder& teacher,
                                         int count);

}  // namespace semshift
