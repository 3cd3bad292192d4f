#include "data/record.hpp"

#include <cctype>
#include <fstream>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace semshift {

namespace {

const std::string kRoleNames[] = {"benign", "adversarial", "reference-benign",
                                  "reference-adversarial"};
const std::string kProvenanceNames[] = {"collected", "augmented", "reference", "synthetic"};

bool is_blank(const std::string& s) {
    for (unsigned char ch : s) {
        if (!std::isspace(ch)) return false;
    }
    return true;
}

}  // namespace

const std::string& role_name(Role r) { return kRoleNames[static_cast<int>(r)]; }

Role role_from_name(const std::string& name) {
    for (int i = 0; i < 4; ++i) {
        if (kRoleNames[i] == name) return static_cast<Role>(i);
    }
    throw ParseError("unknown role: \"" + name + "\"");
}

const std::string& provenance_name(Provenance p) { return kProvenanceNames[static_cast<int>(p)]; }

Provenance provenance_from_name(const std::string& name) {
    for (int i = 0; i < 4; ++i) {
        if (kProvenanceNames[i] == name) return static_cast<Provenance>(i);
    }
    throw ParseError("unknown provenance: \"" + name + "\"");
}

nlohmann::json PromptRecord::to_json() const {
    // nlohmann's default object is key-sorted, which is the canonical form
    nlohmann::json j = extra.is_object() ? extra : nlohmann::json::object();
    j["text"] = text;
    j["role"] = role_name(role);
    j["category"] = category;
    j["provenance"] = provenance_name(provenance);
    return j;
}

std::vector<PromptRecord> load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open corpus file: " + path);
    }
    std::vector<PromptRecord> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": malformed JSON (" +
                             e.what() + ")");
        }
        if (!j.is_object()) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected a JSON object");
        }
        PromptRecord rec;
        try {
            if (!j.contains("text") || !j["text"].is_string()) {
                throw ParseError("missing or non-string \"text\"");
            }
            rec.text = j["text"].get<std::string>();
            if (is_blank(rec.text)) {
                throw ParseError("\"text\" is empty after trimming");
            }
            if (!j.contains("role") || !j["role"].is_string()) {
                throw ParseError("missing or non-string \"role\"");
            }
            rec.role = role_from_name(j["role"].get<std::string>());
            if (j.contains("category")) {
                if (!j["category"].is_string()) throw ParseError("non-string \"category\"");
                rec.category = j["category"].get<std::string>();
            }
            if (j.contains("provenance")) {
                if (!j["provenance"].is_string()) throw ParseError("non-string \"provenance\"");
                rec.provenance = provenance_from_name(j["provenance"].get<std::string>());
            }
        } catch (const ParseError& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        j.erase("text");
        j.erase("role");
        j.erase("category");
        j.erase("provenance");
        rec.extra = std::move(j);
        records.push_back(std::move(rec));
    }
    return records;
}

void save_jsonl(const std::vector<PromptRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write corpus file: " + path);
    }
    for (const PromptRecord& rec : records) {
        out << rec.to_json().dump() << '\n';
    }
    if (!out) {
        throw IoError("failed writing corpus file: " + path);
    }
}

uint64_t corpus_fingerprint(const std::vector<PromptRecord>& records) {
    std::string canon;
    for (const PromptRecord& rec : records) {
        canon += rec.to_json().dump();
        canon += '\n';
    }
    return fnv1a64(canon);
}

}  // namespace semshift
