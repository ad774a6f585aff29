#include "narex/bench.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <sstream>

#include "narex/decode.hpp"

namespace narex {

namespace {

struct DecodeOutcome {
    std::int64_t ns = 0;
    std::uint64_t flops = 0;
    real_t mean_exit = 0.0;
};

DecodeOutcome run_one(const Model& model, const EncoderStates& enc,
                      const std::string& mode, int T, real_t delta) {
    DecodeOutcome out;
    if (mode == "ar") {
        const auto start = std::chrono::steady_clock::now();
        ArResult r = model.decode_ar_reference(enc, T);
        out.ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                     std::chrono::steady_clock::now() - start)
                     .count();
        out.flops = r.flops.total();
        out.mean_exit = static_cast<real_t>(model.config().L);
        return out;
    }

    GenerationResult r;
    if (mode == "nar") {
        r = generate_hard(model, enc, {0.0, T});
    } else if (mode == "hard") {
        r = generate_hard(model, enc, {delta, T});
    } else if (mode == "soft") {
        r = generate_soft(model, enc, {T});
    } else {
        fail("unknown benchmark mode ", mode,
             "; expected ar, nar, hard or soft");
    }
    out.ns = r.wall_ns;
    out.flops = r.flops.total();
    out.mean_exit = r.mean_exit;
    return out;
}

}  // namespace

std::vector<BenchmarkRecord> bench_latency(
    const Model& model, std::span<const std::vector<int>> sources,
    std::span<const std::string> modes, std::span<const int> lengths,
    const BenchOptions& opts) {
    NAREX_CHECK(!sources.empty(), "benchmark needs at least one source input");
    NAREX_CHECK(!modes.empty(), "benchmark needs at least one mode");
    NAREX_CHECK(!lengths.empty(), "benchmark needs at least one length");
    NAREX_CHECK(opts.repetitions >= 30,
                "latency protocol needs at least 30 repetitions, got ",
                opts.repetitions);
    NAREX_CHECK(opts.warmups >= 0, "negative warm-up count");
    for (int T : lengths) {
        NAREX_CHECK(T >= 1 && T <= model.config().T_max, "benchmark length ",
                    T, " outside [1, ", model.config().T_max, "]");
    }

    std::vector<EncoderStates> encoded;
    encoded.reserve(sources.size());
    for (const std::vector<int>& src : sources) {
        encoded.push_back(model.encode(src));
    }

    std::vector<BenchmarkRecord> records;
    for (const std::string& mode : modes) {
        for (int T : lengths) {
            for (int w = 0; w < opts.warmups; ++w) {
                run_one(model, encoded[static_cast<std::size_t>(w) %
                                       encoded.size()],
                        mode, T, opts.delta);
            }

            std::vector<std::int64_t> times;
            times.reserve(static_cast<std::size_t>(opts.repetitions));
            std::uint64_t flop_sum = 0;
            real_t exit_sum = 0.0;
            for (int rep = 0; rep < opts.repetitions; ++rep) {
                const DecodeOutcome o = run_one(
                    model,
                    encoded[static_cast<std::size_t>(rep) % encoded.size()],
                    mode, T, opts.delta);
                times.push_back(o.ns);
                flop_sum += o.flops;
                exit_sum += o.mean_exit;
            }
            std::sort(times.begin(), times.end());

            BenchmarkRecord rec;
            rec.mode = mode;
            rec.T = T;
            rec.repetitions = opts.repetitions;
            rec.median_ns = times[times.size() / 2];
            rec.p95_ns = times[(95 * (times.size() - 1)) / 100];
            rec.decoder_flops =
                flop_sum / static_cast<std::uint64_t>(opts.repetitions);
            rec.mean_exit = exit_sum / opts.repetitions;
            records.push_back(std::move(rec));
        }
    }

    // Speedups are relative to the ar record of the same length.
    for (BenchmarkRecord& rec : records) {
        for (const BenchmarkRecord& base : records) {
            if (base.mode == "ar" && base.T == rec.T && rec.median_ns > 0) {
                rec.speedup_vs_ar = static_cast<real_t>(base.median_ns) /
                                    static_cast<real_t>(rec.median_ns);
            }
        }
    }
    return records;
}

std::string format_benchmark_table(std::span<const BenchmarkRecord> records) {
    std::ostringstream out;
    out << std::left << std::setw(6) << "mode" << std::right << std::setw(5)
        << "T" << std::setw(6) << "reps" << std::setw(14) << "median_ns"
        << std::setw(14) << "p95_ns" << std::setw(16) << "decoder_flops"
        << std::setw(11) << "mean_exit" << std::setw(9) << "speedup" << '\n';
    for (const BenchmarkRecord& r : records) {
        out << std::left << std::setw(6) << r.mode << std::right << std::setw(5)
            << r.T << std::setw(6) << r.repetitions << std::setw(14)
            << r.median_ns << std::setw(14) << r.p95_ns << std::setw(16)
            << r.decoder_flops << std::setw(11) << std::fixed
            << std::setprecision(3) << r.mean_exit << std::setw(9)
            << std::setprecision(2) << r.speedup_vs_ar << '\n';
    }
    return out.str();
}

}  // namespace narex
