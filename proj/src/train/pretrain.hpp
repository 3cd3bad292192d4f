#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "encoder/model.hpp"
#include "train/optimizer.hpp"

namespace semshift {

// Contrastive pretraining for the teacher encoder. Each anchor text is
// paired with a word-dropout variant of itself (positive) and a different
// corpus text (negative); the objective per anchor is
//
//   (1 - cos(E(anchor), E(positive))) + max(0, cos(E(anchor), E(negative)) - margin)
//
// averaged over the batch. This spreads unrelated texts apart while keeping
// paraphrase-like variants close, which the later fine-tuning stage relies
// on for meaningful embedding-space metrics.
struct PretrainConfig {
    int epochs = 40;
    int batch = 32;
    double lr = 1e-3;
    double word_dropout = 0.3;
    double margin = 0.2;
    AdamWConfig adamw;
    std::uint64_t seed = 7;

    void validate() const;
};

struct PretrainState {
    std::vector<double> epoch_loss;  // mean step loss per epoch
};

// Trains `encoder` in place over `texts` (which must hold at least two
// distinct entries). Throws StateError if the encoder is frozen.
PretrainState pretrain(Encoder& encoder, const std::vector<std::string>& texts,
                       const PretrainConfig& cfg);

}  // namespace semshift
