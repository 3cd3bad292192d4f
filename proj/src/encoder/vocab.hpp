#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace semshift {

// Reserved token ids. Every vocabulary starts with these four entries.
inline constexpr uint32_t kPadId = 0;
inline constexpr uint32_t kUnkId = 1;
inline constexpr uint32_t kBosId = 2;
inline constexpr uint32_t kEosId = 3;
inline constexpr uint32_t kNumReserved = 4;

// Closed vocabulary: token strings <-> contiguous ids, reserved ids 0..3.
class Vocab {
public:
    Vocab();  // reserved tokens only

    // Builds a vocabulary from surface forms (deduplicated, order-preserving).
    // Reserved tokens are always present and need not be listed.
    static Vocab build(const std::vector<std::string>& tokens);

    // One token per line, line number = id (reserved lines included).
    static Vocab load(const std::string& path);
    void save(const std::string& path) const;

    uint32_t size() const { return static_cast<uint32_t>(tokens_.size()); }
    // UNK for unknown surface forms; never fails
    uint32_t id_of(const std::string& token) const;
    const std::string& token_of(uint32_t id) const;
    bool contains(const std::string& token) const;

    // FNV-1a over newline-joined token list; stored in checkpoints
    uint64_t hash() const;

    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    void add(const std::string& token);

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, uint32_t> index_;
};

// Hard token sequence: ids bracketed by BOS/EOS, no padding stored — the
// length of `ids` is the true length, and every consumer treats positions
// beyond it as PAD (which the encoder masks out by construction).
struct TokenSequence {
    std::vector<uint32_t> ids;

    size_t length() const { return ids.size(); }
};

// Lowercased, punctuation-split whitespace tokenization; BOS prepended, EOS
// appended; content truncated so the total length fits t_max (EOS preserved).
TokenSequence tokenize(const std::string& text, const Vocab& vocab, size_t t_max);

// The surface forms only (no BOS/EOS), as the tokenizer would split them.
std::vector<std::string> split_words(const std::string& text);

}  // namespace semshift
