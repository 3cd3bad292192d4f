#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "data/record.hpp"

namespace semshift {

struct SynthSizes {
    size_t benign = 160;
    size_t adversarial = 80;
    size_t reference_pairs = 40;
    size_t paraphrase = 60;
};

// Everything the generator produces. The paraphrase prompts reuse the marker
// concepts through templates that never appear in the training corpus, so
// they act as a held-out generalization probe.
struct SynthCorpus {
    std::vector<PromptRecord> records;       // benign + adversarial + reference pairs
    std::vector<PromptRecord> paraphrases;   // held-out marker prompts, unseen templates
    std::vector<std::string> class_prompts;  // one retrieval anchor per class
    std::map<std::string, std::vector<std::string>> synonyms;
    std::vector<std::string> insert_words;
};

// The generator's closed word list (reserved tokens not included). Every
// generated prompt tokenizes over exactly these surface forms.
const std::vector<std::string>& synth_word_list();

// The 20 class names behind the class prompts.
const std::vector<std::string>& synth_class_names();

// The seven marker categories and their three concept-carrier words each.
const std::map<std::string, std::vector<std::string>>& synth_marker_categories();

SynthCorpus generate_synthetic_corpus(uint64_t seed, const SynthSizes& sizes);

}  // namespace semshift
