#include "narex/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>

namespace narex {

namespace {

using Ngram = std::vector<int>;

std::map<Ngram, int> ngram_counts(std::span<const int> ids, int n) {
    std::map<Ngram, int> counts;
    const int len = static_cast<int>(ids.size());
    for (int i = 0; i + n <= len; ++i) {
        Ngram g(ids.begin() + i, ids.begin() + i + n);
        ++counts[g];
    }
    return counts;
}

std::int64_t clipped_overlap(const std::map<Ngram, int>& hyp,
                             const std::map<Ngram, int>& ref) {
    std::int64_t overlap = 0;
    for (const auto& [gram, count] : hyp) {
        const auto it = ref.find(gram);
        if (it != ref.end()) overlap += std::min(count, it->second);
    }
    return overlap;
}

real_t f1_of(real_t precision, real_t recall) {
    const real_t denom = precision + recall;
    return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

int lcs_length(std::span<const int> a, std::span<const int> b) {
    const int m = static_cast<int>(a.size());
    const int n = static_cast<int>(b.size());
    std::vector<int> prev(static_cast<std::size_t>(n) + 1, 0);
    std::vector<int> cur(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 1; i <= m; ++i) {
        for (int j = 1; j <= n; ++j) {
            cur[static_cast<std::size_t>(j)] =
                a[static_cast<std::size_t>(i - 1)] ==
                        b[static_cast<std::size_t>(j - 1)]
                    ? prev[static_cast<std::size_t>(j - 1)] + 1
                    : std::max(prev[static_cast<std::size_t>(j)],
                               cur[static_cast<std::size_t>(j - 1)]);
        }
        std::swap(prev, cur);
    }
    return prev[static_cast<std::size_t>(n)];
}

// One order of the modified precision: clipped matches over hypothesis
// n-gram count, pooled over all pairs.
struct PrecisionCounts {
    std::int64_t matched = 0;
    std::int64_t total = 0;
};

PrecisionCounts modified_precision(std::span<const int> hyp,
                                   std::span<const int> ref, int order) {
    PrecisionCounts out;
    const auto hyp_counts = ngram_counts(hyp, order);
    const auto ref_counts = ngram_counts(ref, order);
    out.matched = clipped_overlap(hyp_counts, ref_counts);
    const int len = static_cast<int>(hyp.size());
    out.total = std::max(0, len - order + 1);
    return out;
}

real_t bleu_from_counts(const std::vector<PrecisionCounts>& orders,
                        std::int64_t hyp_len, std::int64_t ref_len) {
    if (hyp_len == 0) return 0.0;
    real_t log_sum = 0.0;
    for (const PrecisionCounts& pc : orders) {
        real_t p = pc.total > 0
                       ? static_cast<real_t>(pc.matched) / pc.total
                       : 0.0;
        if (p == 0.0) p = 1.0 / (2.0 * static_cast<real_t>(hyp_len));
        log_sum += std::log(p);
    }
    real_t score = std::exp(log_sum / static_cast<real_t>(orders.size()));
    if (hyp_len < ref_len) {
        score *= std::exp(1.0 - static_cast<real_t>(ref_len) / hyp_len);
    }
    return score;
}

}  // namespace

OverlapScore rouge_n(std::span<const int> hyp, std::span<const int> ref,
                     int n) {
    NAREX_CHECK(n >= 1, "rouge_n needs n >= 1, got ", n);
    const auto hyp_counts = ngram_counts(hyp, n);
    const auto ref_counts = ngram_counts(ref, n);
    std::int64_t hyp_total = 0, ref_total = 0;
    for (const auto& [g, c] : hyp_counts) hyp_total += c;
    for (const auto& [g, c] : ref_counts) ref_total += c;
    if (hyp_total == 0 || ref_total == 0) return {};

    const real_t overlap =
        static_cast<real_t>(clipped_overlap(hyp_counts, ref_counts));
    OverlapScore s;
    s.precision = overlap / static_cast<real_t>(hyp_total);
    s.recall = overlap / static_cast<real_t>(ref_total);
    s.f1 = f1_of(s.precision, s.recall);
    return s;
}

OverlapScore rouge_l(std::span<const int> hyp, std::span<const int> ref) {
    if (hyp.empty() || ref.empty()) return {};
    const real_t lcs = static_cast<real_t>(lcs_length(hyp, ref));
    OverlapScore s;
    s.precision = lcs / static_cast<real_t>(hyp.size());
    s.recall = lcs / static_cast<real_t>(ref.size());
    s.f1 = f1_of(s.precision, s.recall);
    return s;
}

real_t bleu_n(std::span<const int> hyp, std::span<const int> ref, int n) {
    NAREX_CHECK(n >= 1, "bleu_n needs n >= 1, got ", n);
    std::vector<PrecisionCounts> orders;
    for (int order = 1; order <= n; ++order) {
        orders.push_back(modified_precision(hyp, ref, order));
    }
    return bleu_from_counts(orders, static_cast<std::int64_t>(hyp.size()),
                            static_cast<std::int64_t>(ref.size()));
}

real_t bleu_corpus(std::span<const EvalPair> pairs, int n) {
    NAREX_CHECK(n >= 1, "bleu_corpus needs n >= 1, got ", n);
    std::vector<PrecisionCounts> orders(static_cast<std::size_t>(n));
    std::int64_t hyp_len = 0, ref_len = 0;
    for (const EvalPair& pair : pairs) {
        hyp_len += static_cast<std::int64_t>(pair.hypothesis.size());
        ref_len += static_cast<std::int64_t>(pair.reference.size());
        for (int order = 1; order <= n; ++order) {
            const PrecisionCounts pc =
                modified_precision(pair.hypothesis, pair.reference, order);
            orders[static_cast<std::size_t>(order - 1)].matched += pc.matched;
            orders[static_cast<std::size_t>(order - 1)].total += pc.total;
        }
    }
    return bleu_from_counts(orders, hyp_len, ref_len);
}

real_t meteor_simplified(std::span<const int> hyp, std::span<const int> ref) {
    if (hyp.empty() || ref.empty()) return 0.0;

    // Greedy leftmost exact alignment: each hypothesis token takes the first
    // unmatched identical reference token.
    std::vector<int> match_ref(hyp.size(), -1);
    std::vector<bool> used(ref.size(), false);
    int matches = 0;
    for (std::size_t i = 0; i < hyp.size(); ++i) {
        for (std::size_t j = 0; j < ref.size(); ++j) {
            if (!used[j] && ref[j] == hyp[i]) {
                match_ref[i] = static_cast<int>(j);
                used[j] = true;
                ++matches;
                break;
            }
        }
    }
    if (matches == 0) return 0.0;

    const real_t p = static_cast<real_t>(matches) / hyp.size();
    const real_t r = static_cast<real_t>(matches) / ref.size();
    const real_t f = p * r / (0.1 * p + 0.9 * r);

    // A chunk is a maximal run of matched hypothesis positions whose
    // reference positions are consecutive as well.
    int chunks = 0;
    int prev_hyp = -2, prev_ref = -2;
    for (std::size_t i = 0; i < hyp.size(); ++i) {
        if (match_ref[i] < 0) continue;
        if (static_cast<int>(i) != prev_hyp + 1 || match_ref[i] != prev_ref + 1) {
            ++chunks;
        }
        prev_hyp = static_cast<int>(i);
        prev_ref = match_ref[i];
    }

    const real_t frag = static_cast<real_t>(chunks) / matches;
    const real_t penalty = 0.5 * frag * frag * frag;
    return f * (1.0 - penalty);
}

real_t distinct_n(std::span<const std::vector<int>> hyps, int n) {
    NAREX_CHECK(n >= 1, "distinct_n needs n >= 1, got ", n);
    std::set<Ngram> unique;
    std::int64_t total = 0;
    for (const std::vector<int>& hyp : hyps) {
        const int len = static_cast<int>(hyp.size());
        for (int i = 0; i + n <= len; ++i) {
            unique.insert(Ngram(hyp.begin() + i, hyp.begin() + i + n));
            ++total;
        }
    }
    return total > 0 ? static_cast<real_t>(unique.size()) / total : 0.0;
}

}  // namespace narex
