#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "augment/augment.hpp"
#include "data/synth.hpp"
#include "encoder/model.hpp"
#include "eval/report.hpp"
#include "train/pretrain.hpp"
#include "train/trainer.hpp"

namespace semshift {

// Flat key=value configuration with a closed schema. Sources are layered by
// call order — load a file first, then overlay the environment, then
// individual set() calls — so later writers win:
//
//   built-in defaults  <  config file  <  SEMSHIFT_SEED env var  <  flags
//
// File format: one `key = value` per line; blank lines and lines whose
// first non-space character is '#' are skipped; whitespace around key and
// value is trimmed; the value may contain spaces (prompts); on duplicate
// keys the last line wins. Unknown keys are rejected with the line number,
// so typos cannot silently fall back to defaults.
class KvConfig {
public:
    static KvConfig from_file(const std::string& path);  // IoError / ParseError
    static KvConfig from_text(const std::string& text);  // ParseError names the line

    // Overlays one value; throws InvalidArgument for keys outside the schema.
    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    // Overlays every entry of `higher` onto this config.
    void merge(const KvConfig& higher);

    // SEMSHIFT_SEED, when set and non-empty, overrides the "seed" key.
    void apply_env_overrides();

    // Typed getters; malformed stored text throws ParseError naming the key.
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    uint64_t get_uint64(const std::string& key, uint64_t fallback) const;

    // All entries, sorted by key.
    std::vector<std::pair<std::string, std::string>> items() const;

    // True when `key` belongs to the schema (exact match or a
    // `train.target.<category>` override).
    static bool is_known_key(const std::string& key);

private:
    std::map<std::string, std::string> values_;
};

// --- stage-config builders ---------------------------------------------------
//
// Every stage seed is fanned out from the master "seed" key through
// derive_seed(master, stage_name), so each stage is independently
// reproducible from one number.

uint64_t master_seed(const KvConfig& cfg);        // "seed", default 7
double split_ratio(const KvConfig& cfg);          // "split_ratio", default 0.8

SynthSizes synth_sizes_from(const KvConfig& cfg);
// vocab_size is left 0 for the caller to fill from the corpus vocabulary.
EncoderConfig encoder_config_from(const KvConfig& cfg);
PretrainConfig pretrain_config_from(const KvConfig& cfg);
EnergyConfig energy_config_from(const KvConfig& cfg);
TrainConfig train_config_from(const KvConfig& cfg);
EvalConfig eval_config_from(const KvConfig& cfg);

// "augment.count": how many augmented prompts to request; 0 (the default)
// means one per adversarial seed record.
int augment_count_from(const KvConfig& cfg);

}  // namespace semshift
