#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace semshift {

enum class Role {
    kBenign,
    kAdversarial,
    kReferenceBenign,
    kReferenceAdversarial,
};

enum class Provenance {
    kCollected,
    kAugmented,
    kReference,
    kSynthetic,
};

const std::string& role_name(Role r);
Role role_from_name(const std::string& name);  // throws ParseError on unknown
const std::string& provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& name);

// One corpus entry. Unknown JSON fields ride along in `extra` untouched.
struct PromptRecord {
    std::string text;
    Role role = Role::kBenign;
    std::string category = "unspecified";
    Provenance provenance = Provenance::kCollected;
    nlohmann::json extra = nlohmann::json::object();

    nlohmann::json to_json() const;
};

std::vector<PromptRecord> load_jsonl(const std::string& path);
void save_jsonl(const std::vector<PromptRecord>& records, const std::string& path);

// FNV-1a over the canonical (sorted-key) serialization, one record per line.
uint64_t corpus_fingerprint(const std::vector<PromptRecord>& records);

}  // namespace semshift
