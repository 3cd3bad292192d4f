#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "data/record.hpp"
#include "encoder/model.hpp"
#include "eval/metrics.hpp"

namespace semshift {

struct EvalConfig {
    std::string target_prompt = "a photo of a cute cat";
    double tau = 0.8;         // trigger-success threshold
    double benign_tau = 0.9;  // benign-preservation threshold

    void validate() const;
    // Stable hash of the canonical serialization; stored in every report.
    uint64_t fingerprint() const;
};

struct CategoryStats {
    std::size_t count = 0;
    double sim_target_mean = 0.0;
    double trigger_success_rate = 0.0;
};

// All reported numbers are embedding-space analogs computed between the
// frozen teacher and the fine-tuned student; no image-side metric is
// involved anywhere.
struct MetricsReport {
    MeanStd sim_benign;
    MeanStd sim_advers;
    MeanStd sim_target;
    double agreement_at_1 = 0.0;
    double agreement_at_5 = 0.0;
    double trigger_success_rate = 0.0;
    double benign_preservation_rate = 0.0;
    std::map<std::string, CategoryStats> per_category;  // adversarial records by category
    std::size_t benign_count = 0;
    std::size_t adversarial_count = 0;
    std::string target_prompt;
    double tau = 0.0;
    double benign_tau = 0.0;
    uint64_t corpus_fingerprint = 0;
    uint64_t config_fingerprint = 0;
};

// Computes the full metric suite over one record set: benign metrics over
// the benign-role records, adversarial metrics over the adversarial-role
// records (reference records are training aids and are not scored). When
// `expected_corpus_fingerprint` is nonzero it must match the fingerprint of
// `records`, guarding against evaluating a different corpus than the one a
// training stage recorded.
MetricsReport build_report(const Encoder& teacher, const Encoder& student,
                           const std::vector<PromptRecord>& records,
                           const std::vector<std::string>& class_prompts, const EvalConfig& cfg,
                           uint64_t expected_corpus_fingerprint = 0);

// Deterministic serialization: one sorted-key JSON document plus trailing
// newline. serialize -> parse -> serialize is byte-identical.
std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& json_text);
void write_report(const MetricsReport& report, const std::string& path);
MetricsReport load_report(const std::string& path);

}  // namespace semshift
