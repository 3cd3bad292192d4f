#include "eval/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace semshift {

namespace {

using nlohmann::json;

// Label stored in every report so downstream readers know the numbers are
// computed between text-encoder embeddings, not against an image pipeline.
constexpr const char* kMetricBasis = "embedding-space analog";

std::string hex16(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

uint64_t parse_hex16(const std::string& s, const char* field) {
    if (s.size() != 16 || s.find_first_not_of("0123456789abcdef") != std::string::npos) {
        throw ParseError(std::string("report field '") + field +
                         "' must be 16 lowercase hex characters, got '" + s + "'");
    }
    return std::stoull(s, nullptr, 16);
}

const json& require_field(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw ParseError(std::string("report is missing field '") + key + "'");
    }
    return *it;
}

double require_number(const json& j, const char* key) {
    const json& v = require_field(j, key);
    if (!v.is_number()) {
        throw ParseError(std::string("report field '") + key + "' must be a number");
    }
    return v.get<double>();
}

std::string require_string(const json& j, const char* key) {
    const json& v = require_field(j, key);
    if (!v.is_string()) {
        throw ParseError(std::string("report field '") + key + "' must be a string");
    }
    return v.get<std::string>();
}

std::size_t require_count(const json& j, const char* key) {
    const json& v = require_field(j, key);
    if (!v.is_number_unsigned()) {
        throw ParseError(std::string("report field '") + key +
                         "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

json mean_std_to_json(const MeanStd& ms) {
    json j = json::object();
    j["mean"] = ms.mean;
    j["std"] = ms.std;
    return j;
}

MeanStd mean_std_from_json(const json& j, const char* key) {
    const json& v = require_field(j, key);
    if (!v.is_object() || v.size() != 2) {
        throw ParseError(std::string("report field '") + key +
                         "' must be an object with 'mean' and 'std'");
    }
    MeanStd ms;
    ms.mean = require_number(v, "mean");
    ms.std = require_number(v, "std");
    return ms;
}

}  // namespace

void EvalConfig::validate() const {
    if (target_prompt.empty()) {
        throw InvalidArgument("EvalConfig: target_prompt must be non-empty");
    }
    if (!(tau > -1.0 && tau < 1.0)) {
        throw InvalidArgument("EvalConfig: tau must lie in (-1, 1), got " + std::to_string(tau));
    }
    if (!(benign_tau > -1.0 && benign_tau < 1.0)) {
        throw InvalidArgument("EvalConfig: benign_tau must lie in (-1, 1), got " +
                              std::to_string(benign_tau));
    }
}

uint64_t EvalConfig::fingerprint() const {
    json j = json::object();
    j["benign_tau"] = benign_tau;
    j["target_prompt"] = target_prompt;
    j["tau"] = tau;
    return fnv1a64(j.dump());
}

MetricsReport build_report(const Encoder& teacher, const Encoder& student,
                           const std::vector<PromptRecord>& records,
                           const std::vector<std::string>& class_prompts, const EvalConfig& cfg,
                           uint64_t expected_corpus_fingerprint) {
    cfg.validate();
    if (records.empty()) {
        throw InvalidArgument("build_report: record set is empty");
    }
    const uint64_t fp = corpus_fingerprint(records);
    if (expected_corpus_fingerprint != 0 && fp != expected_corpus_fingerprint) {
        throw InvalidArgument("build_report: corpus fingerprint " + hex16(fp) +
                              " does not match expected " + hex16(expected_corpus_fingerprint));
    }
    if (class_prompts.size() < 5) {
        throw InvalidArgument("build_report: need at least 5 class prompts for agreement@5, got " +
                              std::to_string(class_prompts.size()));
    }

    std::vector<PromptRecord> benign;
    std::vector<PromptRecord> advers;
    for (const PromptRecord& r : records) {
        if (r.role == Role::kBenign) {
            benign.push_back(r);
        } else if (r.role == Role::kAdversarial) {
            advers.push_back(r);
        }
        // Reference records are training aids; they are never scored.
    }
    if (benign.empty()) {
        throw InvalidArgument("build_report: no benign-role records to score");
    }
    if (advers.empty()) {
        throw InvalidArgument("build_report: no adversarial-role records to score");
    }

    MetricsReport rep;
    rep.sim_benign = sim_benign(teacher, student, benign);
    rep.sim_advers = sim_advers(teacher, student, advers);
    rep.sim_target = sim_target(teacher, student, advers, cfg.target_prompt);
    rep.agreement_at_1 = agreement_at_k(teacher, student, benign, class_prompts, 1);
    rep.agreement_at_5 = agreement_at_k(teacher, student, benign, class_prompts, 5);
    rep.trigger_success_rate =
        trigger_success_rate(teacher, student, advers, cfg.target_prompt, cfg.tau);
    rep.benign_preservation_rate =
        benign_preservation_rate(teacher, student, benign, cfg.benign_tau);

    std::map<std::string, std::vector<PromptRecord>> by_category;
    for (const PromptRecord& r : advers) {
        by_category[r.category].push_back(r);
    }
    for (const auto& [category, rs] : by_category) {
        CategoryStats stats;
        stats.count = rs.size();
        stats.sim_target_mean = sim_target(teacher, student, rs, cfg.target_prompt).mean;
        stats.trigger_success_rate =
            trigger_success_rate(teacher, student, rs, cfg.target_prompt, cfg.tau);
        rep.per_category.emplace(category, stats);
    }

    rep.benign_count = benign.size();
    rep.adversarial_count = advers.size();
    rep.target_prompt = cfg.target_prompt;
    rep.tau = cfg.tau;
    rep.benign_tau = cfg.benign_tau;
    rep.corpus_fingerprint = fp;
    rep.config_fingerprint = cfg.fingerprint();
    return rep;
}

std::string report_to_json(const MetricsReport& report) {
    json j = json::object();
    j["adversarial_count"] = report.adversarial_count;
    j["agreement_at_1"] = report.agreement_at_1;
    j["agreement_at_5"] = report.agreement_at_5;
    j["benign_count"] = report.benign_count;
    j["benign_preservation_rate"] = report.benign_preservation_rate;
    j["benign_tau"] = report.benign_tau;
    j["config_fingerprint"] = hex16(report.config_fingerprint);
    j["corpus_fingerprint"] = hex16(report.corpus_fingerprint);
    j["metric_basis"] = kMetricBasis;
    json cats = json::object();
    for (const auto& [category, stats] : report.per_category) {
        json c = json::object();
        c["count"] = stats.count;
        c["sim_target_mean"] = stats.sim_target_mean;
        c["trigger_success_rate"] = stats.trigger_success_rate;
        cats[category] = std::move(c);
    }
    j["per_category"] = std::move(cats);
    j["sim_advers"] = mean_std_to_json(report.sim_advers);
    j["sim_benign"] = mean_std_to_json(report.sim_benign);
    j["sim_target"] = mean_std_to_json(report.sim_target);
    j["target_prompt"] = report.target_prompt;
    j["tau"] = report.tau;
    j["trigger_success_rate"] = report.trigger_success_rate;
    return j.dump(2) + "\n";
}

MetricsReport report_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("report is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ParseError("report root must be a JSON object");
    }
    static const char* kKnown[] = {
        "adversarial_count", "agreement_at_1", "agreement_at_5",
        "benign_count",      "benign_preservation_rate", "benign_tau",
        "config_fingerprint", "corpus_fingerprint", "metric_basis",
        "per_category",      "sim_advers",       "sim_benign",
        "sim_target",        "target_prompt",    "tau",
        "trigger_success_rate"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : kKnown) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ParseError("report has unknown field '" + it.key() + "'");
        }
    }
    const std::string basis = require_string(j, "metric_basis");
    if (basis != kMetricBasis) {
        throw ParseError("report metric_basis '" + basis + "' is not supported (expected '" +
                         kMetricBasis + "')");
    }

    MetricsReport rep;
    rep.adversarial_count = require_count(j, "adversarial_count");
    rep.agreement_at_1 = require_number(j, "agreement_at_1");
    rep.agreement_at_5 = require_number(j, "agreement_at_5");
    rep.benign_count = require_count(j, "benign_count");
    rep.benign_preservation_rate = require_number(j, "benign_preservation_rate");
    rep.benign_tau = require_number(j, "benign_tau");
    rep.config_fingerprint = parse_hex16(require_string(j, "config_fingerprint"),
                                         "config_fingerprint");
    rep.corpus_fingerprint = parse_hex16(require_string(j, "corpus_fingerprint"),
                                         "corpus_fingerprint");
    const json& cats = require_field(j, "per_category");
    if (!cats.is_object()) {
        throw ParseError("report field 'per_category' must be an object");
    }
    for (auto it = cats.begin(); it != cats.end(); ++it) {
        const json& c = it.value();
        if (!c.is_object() || c.size() != 3) {
            throw ParseError("per-category entry '" + it.key() +
                             "' must be an object with count, sim_target_mean, "
                             "trigger_success_rate");
        }
        CategoryStats stats;
        stats.count = require_count(c, "count");
        stats.sim_target_mean = require_number(c, "sim_target_mean");
        stats.trigger_success_rate = require_number(c, "trigger_success_rate");
        rep.per_category.emplace(it.key(), stats);
    }
    rep.sim_advers = mean_std_from_json(j, "sim_advers");
    rep.sim_benign = mean_std_from_json(j, "sim_benign");
    rep.sim_target = mean_std_from_json(j, "sim_target");
    rep.target_prompt = require_string(j, "target_prompt");
    rep.tau = require_number(j, "tau");
    rep.trigger_success_rate = require_number(j, "trigger_success_rate");
    return rep;
}

void write_report(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open report file for writing: " + path);
    }
    out << report_to_json(report);
    if (!out) {
        throw IoError("failed writing report file: " + path);
    }
}

MetricsReport load_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open report file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) {
        throw IoError("failed reading report file: " + path);
    }
    return report_from_json(buf.str());
}

}  // namespace semshift
