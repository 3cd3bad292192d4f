#include "encoder/vocab.hpp"

#include <cctype>
#include <fstream>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace semshift {

namespace {
const char* kReservedTokens[kNumReserved] = {"<pad>", "<unk>", "<bos>", "<eos>"};
}

Vocab::Vocab() {
    for (const char* t : kReservedTokens) add(t);
}

void Vocab::add(const std::string& token) {
    if (index_.contains(token)) return;
    index_.emplace(token, static_cast<uint32_t>(tokens_.size()));
    tokens_.push_back(token);
}

Vocab Vocab::build(const std::vector<std::string>& tokens) {
    Vocab v;
    for (const std::string& t : tokens) {
        if (t.empty()) {
            throw InvalidArgument("Vocab::build: empty token");
        }
        v.add(t);
    }
    return v;
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open vocabulary file: " + path);
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    if (lines.size() < kNumReserved) {
        throw ParseError("vocabulary file too short: " + path);
    }
    for (uint32_t i = 0; i < kNumReserved; ++i) {
        if (lines[i] != kReservedTokens[i]) {
            throw ParseError("vocabulary file " + path + ": line " + std::to_string(i + 1) +
                             " must be the reserved token " + kReservedTokens[i]);
        }
    }
    Vocab v;
    for (size_t i = kNumReserved; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            throw ParseError("vocabulary file " + path + ": empty token at line " +
                             std::to_string(i + 1));
        }
        if (v.index_.contains(lines[i])) {
            throw ParseError("vocabulary file " + path + ": duplicate token at line " +
                             std::to_string(i + 1));
        }
        v.add(lines[i]);
    }
    return v;
}

void Vocab::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write vocabulary file: " + path);
    }
    for (const std::string& t : tokens_) out << t << '\n';
    if (!out) {
        throw IoError("failed writing vocabulary file: " + path);
    }
}

uint32_t Vocab::id_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token_of(uint32_t id) const {
    if (id >= tokens_.size()) {
        throw InvalidArgument("token id " + std::to_string(id) + " out of range (|V|=" +
                              std::to_string(tokens_.size()) + ")");
    }
    return tokens_[id];
}

bool Vocab::contains(const std::string& token) const { return index_.contains(token); }

uint64_t Vocab::hash() const {
    std::string joined;
    for (const std::string& t : tokens_) {
        joined += t;
        joined += '\n';
    }
    return fnv1a64(joined);
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string current;
    for (unsigned char ch : text) {
        if (std::isalnum(ch)) {
            current.push_back(static_cast<char>(std::tolower(ch)));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

TokenSequence tokenize(const std::string& text, const Vocab& vocab, size_t t_max) {
    if (t_max < 2) {
        throw InvalidArgument("tokenize: t_max must allow BOS and EOS");
    }
    TokenSequence seq;
    seq.ids.push_back(kBosId);
    for (const std::string& w : split_words(text)) {
        if (seq.ids.size() + 1 >= t_max) break;  // keep room for EOS
        seq.ids.push_back(vocab.id_of(w));
    }
    seq.ids.push_back(kEosId);
    return seq;
}

}  // namespace semshift
