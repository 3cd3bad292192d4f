#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "data/record.hpp"

namespace semshift {

struct CorpusSplit {
    std::vector<PromptRecord> train;
    std::vector<PromptRecord> validation;
    uint64_t seed = 0;
    double ratio = 0.8;
    // roles that could not be stratified (<2 records, forced to train)
    std::vector<std::string> warnings;
};

// Stratified-by-role split: each role is shuffled with its own derived seed
// and cut at floor(n * ratio), clamped to keep both sides non-empty. The
// per-role seeding makes "filter then split" identical to "split then filter".
CorpusSplit split(const std::vector<PromptRecord>& records, double ratio, uint64_t seed);

}  // namespace semshift
