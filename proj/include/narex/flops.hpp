#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace narex {

// Matmul work is attributed to the phase that issued it so the complexity
// checks can look at exactly the terms they reason about (e.g. decoder
// self-attention + FFN, with frozen-position key/value refresh kept apart).
enum class FlopCategory : int {
    Encoder = 0,
    DecoderSelfAttn,
    DecoderCrossAttn,
    DecoderFfn,
    DecoderFrozenKv,
    DecoderFeedback,
    OffRamp,
    Other,
    Count_,
};

constexpr int kFlopCategoryCount = static_cast<int>(FlopCategory::Count_);

std::string_view flop_category_name(FlopCategory c);

struct FlopCounters {
    std::array<std::uint64_t, kFlopCategoryCount> counts{};

    std::uint64_t operator[](FlopCategory c) const {
        return counts[static_cast<int>(c)];
    }
    std::uint64_t total() const;
    // Decoder self-attention + FFN: the terms behind the O(LT^2) / O(LT) /
    // O(L_bar T) scaling statements.
    std::uint64_t decoder_core() const;
    std::uint64_t decoder_total() const;

    FlopCounters& operator+=(const FlopCounters& other);
    bool operator==(const FlopCounters& other) const = default;
};

// Thread-local counting: a FlopScope activates a counter set, category scopes
// tag the work issued while they are alive. No scope active -> counting off.
class FlopScope {
  public:
    explicit FlopScope(FlopCounters& counters);
    ~FlopScope();
    FlopScope(const FlopScope&) = delete;
    FlopScope& operator=(const FlopScope&) = delete;

  private:
    FlopCounters* prev_;
};

class FlopCategoryScope {
  public:
    explicit FlopCategoryScope(FlopCategory category);
    ~FlopCategoryScope();
    FlopCategoryScope(const FlopCategoryScope&) = delete;
    FlopCategoryScope& operator=(const FlopCategoryScope&) = delete;

  private:
    FlopCategory prev_;
};

void count_flops(std::uint64_t n);

}  // namespace narex
