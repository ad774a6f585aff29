#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "narex/common.hpp"

namespace narex {

// Lowercases and splits into word tokens: runs of alphanumerics (with
// apostrophes kept inside words, "don't" stays whole), every other printable
// character as its own token.
std::vector<std::string> tokenize_words(const std::string& text);

// Word-level vocabulary with fixed reserved ids. Immutable after build; safe
// for concurrent reads. Induced tokens are lowercase, so the bracketed
// uppercase reserved names can never collide with them.
class Vocabulary {
  public:
    static constexpr int kPad = 0;
    static constexpr int kMask = 1;
    static constexpr int kEos = 2;
    static constexpr int kBos = 3;
    static constexpr int kUnk = 4;
    static constexpr int kReservedCount = 5;

    // Frequency-ranked induction from raw text, ties broken lexicographically.
    // max_size caps the total size, reserved entries included.
    static Vocabulary build(const std::string& corpus, int max_size);

    // Adopts the given tokens directly (ids 5, 6, ... in list order).
    static Vocabulary from_tokens(const std::vector<std::string>& tokens);

    static Vocabulary load(const std::string& path);
    void save(const std::string& path) const;

    int size() const { return static_cast<int>(id_to_token_.size()); }
    bool contains(const std::string& token) const {
        return token_to_id_.count(token) > 0;
    }
    // Unknown words map to kUnk.
    int id_of(const std::string& token) const;
    const std::string& token_of(int id) const;
    bool is_reserved(int id) const { return id >= 0 && id < kReservedCount; }

  private:
    Vocabulary();
    void add_token(const std::string& token);

    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

std::vector<int> encode(const std::string& text, const Vocabulary& vocab);

// Joins tokens with single spaces; PAD and BOS are dropped. Inverse of encode
// on in-vocabulary text (sequences are EOS-truncated before this is called).
std::string decode_ids(std::span<const int> ids, const Vocabulary& vocab);

}  // namespace narex
