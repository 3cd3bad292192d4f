#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "config/kvconfig.hpp"
#include "eval/report.hpp"

namespace semshift {

// Path-level orchestration of the five pipeline stages. Every function reads
// its knobs from a KvConfig (see config/kvconfig.hpp for the schema and
// precedence rules) and fans the master seed out through
// derive_seed(master, stage_name), so each stage is reproducible on its own.
//
// File conventions
//   gen-synth output directory:
//     corpus.jsonl       benign + adversarial + reference records
//     paraphrases.jsonl  held-out marker prompts on unseen templates
//     aux.json           {"class_prompts": [...], "insert_words": [...],
//                         "synonyms": {word: [alternatives...]}}
//   checkpoints: the encoder's binary format (config + vocab + parameters)
//   reports: sorted-key JSON (eval/report.hpp)

struct GenSynthResult {
    std::size_t records = 0;
    std::size_t paraphrases = 0;
    std::size_t class_prompts = 0;
};

GenSynthResult gen_synth_run(const KvConfig& cfg, const std::string& out_dir);

struct PretrainResult {
    std::size_t texts = 0;
    std::size_t vocab_size = 0;
    double first_epoch_loss = 0.0;
    double final_epoch_loss = 0.0;
};

// Builds the vocabulary from the corpus, initializes a fresh encoder
// (encoder.* keys), runs the contrastive pre-training proxy over every
// record text, and writes the checkpoint.
PretrainResult pretrain_run(const KvConfig& cfg, const std::string& corpus_path,
                            const std::string& out_checkpoint);

struct AugmentResult {
    std::size_t seeds = 0;
    std::size_t produced = 0;
};

// Langevin augmentation seeded by the corpus's collected adversarial records
// (augmented-provenance records are never re-used as seeds). Writes the new
// records as JSONL with provenance "augmented".
AugmentResult augment_run(const KvConfig& cfg, const std::string& teacher_path,
                          const std::string& corpus_path, const std::string& out_jsonl);

struct TrainResult {
    std::size_t epochs = 0;
    std::size_t steps = 0;
    double final_loss_total = 0.0;
    std::uint64_t corpus_fingerprint = 0;
    std::size_t train_records = 0;
    std::size_t validation_records = 0;
};

// Loads the teacher, merges corpus (+ optional augmented file), splits
// train/validation at split_ratio with the derived "split" seed, fine-tunes
// a clone of the teacher, and writes the student checkpoint (and the JSONL
// epoch log when `out_log` is non-empty). Validation benign prompts are
// tracked as the holdout column of the log.
TrainResult train_run(const KvConfig& cfg, const std::string& teacher_path,
                      const std::string& corpus_path, const std::string& augmented_path,
                      const std::string& out_student, const std::string& out_log);

// Evaluates the student against the teacher on the validation side of the
// same split train_run uses, reading class prompts from aux.json. Writes the
// metrics report; when `out_projection` is non-empty, also writes the PCA
// projection CSV of the student embeddings of the evaluation records.
// Teacher/student checkpoints must agree on vocabulary and dimensions.
MetricsReport eval_run(const KvConfig& cfg, const std::string& teacher_path,
                       const std::string& student_path, const std::string& corpus_path,
                       const std::string& aux_path, const std::string& out_report,
                       const std::string& out_projection);

struct SweepRow {
    double gamma = 0.0;
    MetricsReport report;
};

// Retrains one student per gamma (all other train.* knobs shared), evaluates
// each on the common validation split, and writes a CSV table
// gamma,sim_benign,sim_advers,sim_target,agreement_at_1,agreement_at_5,
// trigger_success_rate,benign_preservation_rate.
std::vector<SweepRow> gamma_sweep_run(const KvConfig& cfg, const std::string& teacher_path,
                                      const std::string& corpus_path,
                                      const std::string& augmented_path,
                                      const std::string& aux_path,
                                      const std::vector<double>& gammas,
                                      const std::string& out_csv);

// Parses a comma-separated gamma list like "0,0.01,0.1,1,10".
std::vector<double> parse_gamma_list(const std::string& text);

// Reads the class-prompt list out of an aux.json file.
std::vector<std::string> load_class_prompts(const std::string& aux_path);

}  // namespace semshift
