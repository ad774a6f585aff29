#include "narex/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace narex {

namespace {

const char* kReservedNames[Vocabulary::kReservedCount] = {
    "[PAD]", "[MASK]", "[EOS]", "[BOS]", "[UNK]",
};

bool word_char(unsigned char c) { return std::isalnum(c) != 0; }

}  // namespace

std::vector<std::string> tokenize_words(const std::string& text) {
    std::vector<std::string> out;
    std::string word;
    const auto flush = [&] {
        if (!word.empty()) {
            out.push_back(word);
            word.clear();
        }
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (word_char(c)) {
            word.push_back(static_cast<char>(std::tolower(c)));
        } else if (c == '\'' && !word.empty() && i + 1 < text.size() &&
                   word_char(static_cast<unsigned char>(text[i + 1]))) {
            word.push_back('\'');
        } else {
            flush();
            if (!std::isspace(c) && std::isprint(c)) {
                out.emplace_back(1, static_cast<char>(c));
            }
        }
    }
    flush();
    return out;
}

Vocabulary::Vocabulary() {
    for (const char* name : kReservedNames) add_token(name);
}

void Vocabulary::add_token(const std::string& token) {
    NAREX_CHECK(token_to_id_.emplace(token, size()).second,
                "duplicate vocabulary token \"", token, "\"");
    id_to_token_.push_back(token);
}

Vocabulary Vocabulary::build(const std::string& corpus, int max_size) {
    NAREX_CHECK(max_size > kReservedCount, "vocabulary max_size must exceed ",
                kReservedCount, ", got ", max_size);
    const std::vector<std::string> words = tokenize_words(corpus);
    NAREX_CHECK(!words.empty(), "cannot build a vocabulary from an empty corpus");

    // std::map keys are sorted, which is the lexicographic tiebreak for free.
    std::map<std::string, std::int64_t> counts;
    for (const std::string& w : words) ++counts[w];

    std::vector<std::pair<std::string, std::int64_t>> ranked(counts.begin(),
                                                             counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) {
                         return a.second > b.second;
                     });

    Vocabulary v;
    const std::size_t cap = static_cast<std::size_t>(max_size - kReservedCount);
    for (std::size_t i = 0; i < ranked.size() && i < cap; ++i) {
        v.add_token(ranked[i].first);
    }
    return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary v;
    for (const std::string& t : tokens) v.add_token(t);
    return v;
}

int Vocabulary::id_of(const std::string& token) const {
    const auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
    NAREX_CHECK(id >= 0 && id < size(), "token id ", id,
                " outside vocabulary of size ", size());
    return id_to_token_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    NAREX_CHECK(out.good(), "cannot open ", path, " for writing");
    for (int i = 0; i < size(); ++i) {
        out << i << '\t' << id_to_token_[static_cast<std::size_t>(i)] << '\n';
    }
    NAREX_CHECK(out.good(), "failed writing vocabulary to ", path);
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    NAREX_CHECK(in.good(), "cannot open vocabulary file ", path);
    Vocabulary v;
    std::string line;
    int rank = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        NAREX_CHECK(tab != std::string::npos, path, " line ", rank + 1,
                    ": expected rank<TAB>token");
        const std::string token = line.substr(tab + 1);
        std::istringstream rank_in(line.substr(0, tab));
        int stated = -1;
        rank_in >> stated;
        NAREX_CHECK(stated == rank, path, " line ", rank + 1,
                    ": rank ", stated, " out of order, expected ", rank);
        if (rank < kReservedCount) {
            NAREX_CHECK(token == kReservedNames[rank], path,
                        ": reserved slot ", rank, " holds \"", token,
                        "\", expected \"", kReservedNames[rank], "\"");
        } else {
            v.add_token(token);
        }
        ++rank;
    }
    NAREX_CHECK(rank >= kReservedCount, path,
                ": vocabulary file lacks the reserved header block");
    return v;
}

std::vector<int> encode(const std::string& text, const Vocabulary& vocab) {
    std::vector<int> ids;
    for (const std::string& w : tokenize_words(text)) {
        ids.push_back(vocab.id_of(w));
    }
    return ids;
}

std::string decode_ids(std::span<const int> ids, const Vocabulary& vocab) {
    std::string out;
    for (int id : ids) {
        if (id == Vocabulary::kPad || id == Vocabulary::kBos) continue;
        if (!out.empty()) out.push_back(' ');
        out += vocab.token_of(id);
    }
    return out;
}

}  // namespace narex
