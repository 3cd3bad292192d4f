#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "data/record.hpp"
#include "encoder/model.hpp"

namespace semshift {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};

// Mean/std of cos(teacher(v), student(v)) over the given prompts. The caller
// chooses the set; conventionally benign-role prompts.
MeanStd sim_benign(const Encoder& teacher, const Encoder& student,
                   const std::vector<PromptRecord>& prompts);

// Identical computation over adversarial prompts, kept as its own entry
// point because reports track the two populations separately.
MeanStd sim_advers(const Encoder& teacher, const Encoder& student,
                   const std::vector<PromptRecord>& prompts);

// Mean/std of cos(teacher(target), student(w)) over adversarial prompts w.
MeanStd sim_target(const Encoder& teacher, const Encoder& student,
                   const std::vector<PromptRecord>& prompts, const std::string& target_prompt);

// Fraction of prompts whose teacher-side top-1 class (ranked by cosine
// against the teacher's class-prompt embeddings) appears in the student-side
// top-k ranking against the same anchors. Ties rank the lower class index
// first on both sides.
double agreement_at_k(const Encoder& teacher, const Encoder& student,
                      const std::vector<PromptRecord>& prompts,
                      const std::vector<std::string>& class_prompts, int k);

// Fraction of adversarial prompts with cos(teacher(target), student(w)) > tau.
// tau must lie in (-1, 1).
double trigger_success_rate(const Encoder& teacher, const Encoder& student,
                            const std::vector<PromptRecord>& prompts,
                            const std::string& target_prompt, double tau);

// Fraction of benign prompts with cos(teacher(v), student(v)) >= benign_tau.
double benign_preservation_rate(const Encoder& teacher, const Encoder& student,
                                const std::vector<PromptRecord>& prompts, double benign_tau);

// --- rule-based perturbation harness ---------------------------------------

enum class PerturbKind { kSynonymSwap, kInsert, kDelete };

const std::string& perturb_kind_name(PerturbKind k);
PerturbKind perturb_kind_from_name(const std::string& name);

struct PerturbSpec {
    PerturbKind kind = PerturbKind::kSynonymSwap;
    int intensity = 1;  // 0 (identity), 1, or 2 edits
    std::map<std::string, std::vector<std::string>> synonyms;  // for kSynonymSwap
    std::vector<std::string> insert_words;                     // for kInsert
    uint64_t seed = 7;

    void validate() const;
};

// One perturbed variant of `text`, drawing every random choice from `rng`.
// Swap replaces up to `intensity` words that have synonym-table entries;
// insert adds `intensity` pool words at random positions; delete removes up
// to `intensity` words but never drops below one remaining word.
std::string perturb_text(const std::string& text, const PerturbSpec& spec, Rng& rng);

// Applies perturb_text to every record (text replaced, other fields kept),
// seeding record i with derive_seed(spec.seed, "perturb", i).
std::vector<PromptRecord> perturb_records(const std::vector<PromptRecord>& records,
                                          const PerturbSpec& spec);

// trigger_success_rate over the perturbed copy of `prompts`.
double perturb_and_eval(const Encoder& teacher, const Encoder& student,
                        const std::vector<PromptRecord>& prompts, const PerturbSpec& spec,
                        const std::string& target_prompt, double tau);

}  // namespace semshift
