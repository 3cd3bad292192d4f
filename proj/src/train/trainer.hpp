#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "data/record.hpp"
#include "encoder/model.hpp"
#include "train/distance.hpp"
#include "train/optimizer.hpp"

namespace semshift {

// Teacher-student fine-tuning configuration. The benign term distills the
// frozen teacher; the backdoor term pulls poisoned prompts onto the teacher
// embedding of a fixed target prompt. Total objective per step:
//
//   loss_total = loss_benign + gamma * loss_backdoor
//
// where both component losses are batch means of the configured embedding
// distance.
struct TrainConfig {
    int epochs = 400;
    int batch_benign = 32;
    int batch_poisoned = 16;
    double lr = 1e-4;
    double lr_decay_factor = 0.1;
    int lr_decay_epoch = 150;  // lr is multiplied by lr_decay_factor after this many epochs
    double gamma = 0.1;
    Metric metric = Metric::kCosine;
    AdamWConfig adamw;
    std::uint64_t seed = 7;
    std::string target_prompt = "a photo of a cute cat";
    // Optional per-category override: prompts whose category appears here are
    // pulled toward that category's own target instead of `target_prompt`.
    std::map<std::string, std::string> category_targets;

    void validate() const;
};

struct StepRecord {
    int epoch = 0;  // 1-based
    int step = 0;   // 1-based within the epoch
    double loss_benign = 0.0;
    double loss_backdoor = 0.0;
    double loss_total = 0.0;
    double lr = 0.0;
};

struct EpochRecord {
    int epoch = 0;
    double loss_benign = 0.0;   // mean over the epoch's steps
    double loss_backdoor = 0.0;
    double loss_total = 0.0;
    double lr = 0.0;
    std::optional<double> holdout_benign;  // set when a holdout set was supplied
};

struct TrainState {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
    std::uint64_t corpus_fingerprint = 0;
    std::size_t benign_pool_size = 0;
    std::size_t poisoned_pool_size = 0;
    std::size_t steps_per_epoch = 0;
};

// Runs the fine-tuning loop. `teacher` must be frozen; `student` is updated
// in place. Benign pool: roles benign and reference-benign. Poisoned pool:
// roles adversarial and reference-adversarial (augmented records carry the
// adversarial role). One epoch makes ceil(|benign|/batch_benign) steps over
// a fresh shuffle of the benign pool while a per-epoch permutation of the
// poisoned pool is consumed cyclically. When `holdout_benign` is given, the
// epoch record carries the student-teacher mean distance over it.
TrainState fit(const Encoder& teacher, Encoder& student, const std::vector<PromptRecord>& records,
               const TrainConfig& cfg, const std::vector<PromptRecord>* holdout_benign = nullptr);

// Mean embedding distance between student and teacher over `records`
// (all roles); the benign-loss oracle when applied to benign prompts.
double mean_distillation_distance(const Encoder& teacher, const Encoder& student,
                                  const std::vector<PromptRecord>& records, Metric metric);

// Mean distance between student embeddings of `records` and the teacher
// embedding of each record's resolved target prompt; the backdoor-loss
// oracle when applied to poisoned prompts.
double mean_target_distance(const Encoder& teacher, const Encoder& student,
                            const std::vector<PromptRecord>& records, const TrainConfig& cfg);

// Resolves the target prompt for a record category under `cfg`.
const std::string& resolve_target_prompt(const TrainConfig& cfg, const std::string& category);

// One JSON object per epoch: {"epoch", "loss_benign", "loss_backdoor",
// "loss_total", "lr"} plus "holdout_benign" when present.
void write_train_log(const TrainState& state, const std::string& path);

}  // namespace semshift
