#include "narex/flops.hpp"

namespace narex {

namespace {
thread_local FlopCounters* g_active = nullptr;
thread_local FlopCategory g_category = FlopCategory::Other;
}  // namespace

std::string_view flop_category_name(FlopCategory c) {
    switch (c) {
        case FlopCategory::Encoder: return "encoder";
        case FlopCategory::DecoderSelfAttn: return "decoder_self_attn";
        case FlopCategory::DecoderCrossAttn: return "decoder_cross_attn";
        case FlopCategory::DecoderFfn: return "decoder_ffn";
        case FlopCategory::DecoderFrozenKv: return "decoder_frozen_kv";
        case FlopCategory::DecoderFeedback: return "decoder_feedback";
        case FlopCategory::OffRamp: return "off_ramp";
        case FlopCategory::Other: return "other";
        case FlopCategory::Count_: break;
    }
    return "?";
}

std::uint64_t FlopCounters::total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
}

std::uint64_t FlopCounters::decoder_core() const {
    return (*this)[FlopCategory::DecoderSelfAttn] + (*this)[FlopCategory::DecoderFfn];
}

std::uint64_t FlopCounters::decoder_total() const {
    return decoder_core() + (*this)[FlopCategory::DecoderCrossAttn] +
           (*this)[FlopCategory::DecoderFrozenKv] +
           (*this)[FlopCategory::DecoderFeedback] + (*this)[FlopCategory::OffRamp];
}

FlopCounters& FlopCounters::operator+=(const FlopCounters& other) {
    for (int i = 0; i < kFlopCategoryCount; ++i) counts[i] += other.counts[i];
    return *this;
}

FlopScope::FlopScope(FlopCounters& counters) : prev_(g_active) {
    g_active = &counters;
}

FlopScope::~FlopScope() { g_active = prev_; }

FlopCategoryScope::FlopCategoryScope(FlopCategory category) : prev_(g_category) {
    g_category = category;
}

FlopCategoryScope::~FlopCategoryScope() { g_category = prev_; }

void count_flops(std::uint64_t n) {
    if (g_active != nullptr) {
        g_active->counts[static_cast<int>(g_category)] += n;
    }
}

}  // namespace narex
