// Python bindings for the core engine: vocabulary, model construction,
// training loops, the two early-exit decoders, metrics and the synthetic
// data generator. Heavy lifting stays in C++; values cross the boundary as
// plain lists, strings and small record classes.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "narex/adam.hpp"
#include "narex/autograd.hpp"
#include "narex/checkpoint.hpp"
#include "narex/cli.hpp"
#include "narex/decode.hpp"
#include "narex/metrics.hpp"
#include "narex/model.hpp"
#include "narex/pretrain.hpp"
#include "narex/synthetic.hpp"
#include "narex/vocab.hpp"

namespace py = pybind11;
using namespace narex;

namespace {

FinetuneMode parse_mode(const std::string& mode) {
    if (mode == "hard") return FinetuneMode::Hard;
    if (mode == "soft") return FinetuneMode::Soft;
    fail("finetune mode must be hard or soft, got ", mode);
}

std::vector<EvalPair> to_eval_pairs(
    const std::vector<std::pair<std::vector<int>, std::vector<int>>>& pairs) {
    std::vector<EvalPair> out;
    out.reserve(pairs.size());
    for (const auto& [hyp, ref] : pairs) out.push_back({hyp, ref});
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() =
        "Parallel text generation with per-token early exit: tensor core, "
        "transformer model, training objectives, decoders and metrics.";

    // ----------------------------------------------------------------- vocab
    py::class_<Vocabulary> vocab(m, "Vocabulary");
    vocab
        .def_static("build", &Vocabulary::build, py::arg("corpus"),
                    py::arg("max_size") = 32000,
                    "Frequency-ranked word vocabulary from raw text.")
        .def_static("from_tokens", &Vocabulary::from_tokens, py::arg("tokens"))
        .def_static("load", &Vocabulary::load, py::arg("path"))
        .def("save", &Vocabulary::save, py::arg("path"))
        .def("__len__", &Vocabulary::size)
        .def("__contains__", &Vocabulary::contains)
        .def("id_of", &Vocabulary::id_of, py::arg("token"))
        .def("token_of", &Vocabulary::token_of, py::arg("id"))
        .def("is_reserved", &Vocabulary::is_reserved, py::arg("id"));
    vocab.attr("PAD") = int(Vocabulary::kPad);
    vocab.attr("MASK") = int(Vocabulary::kMask);
    vocab.attr("EOS") = int(Vocabulary::kEos);
    vocab.attr("BOS") = int(Vocabulary::kBos);
    vocab.attr("UNK") = int(Vocabulary::kUnk);

    m.def("tokenize_words", &tokenize_words, py::arg("text"));
    m.def("encode", &encode, py::arg("text"), py::arg("vocab"),
          "Tokenize text and map it to vocabulary ids.");
    m.def(
        "decode_ids",
        [](const std::vector<int>& ids, const Vocabulary& v) {
            return decode_ids(ids, v);
        },
        py::arg("ids"), py::arg("vocab"),
        "Join ids back into a string; PAD and BOS are dropped.");

    // ----------------------------------------------------------------- model
    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("layers", &ModelConfig::L)
        .def_readwrite("width", &ModelConfig::d)
        .def_readwrite("heads", &ModelConfig::heads)
        .def_readwrite("ffn_width", &ModelConfig::d_ff)
        .def_readwrite("max_length", &ModelConfig::T_max)
        .def_readwrite("vocab_size", &ModelConfig::V)
        .def_readwrite("share_off_ramps", &ModelConfig::share_off_ramps)
        .def_readwrite("dropout", &ModelConfig::dropout)
        .def("__repr__", [](const ModelConfig& c) {
            return "ModelConfig(layers=" + std::to_string(c.L) +
                   ", width=" + std::to_string(c.d) +
                   ", heads=" + std::to_string(c.heads) +
                   ", ffn_width=" + std::to_string(c.d_ff) +
                   ", max_length=" + std::to_string(c.T_max) +
                   ", vocab_size=" + std::to_string(c.V) + ")";
        });

    py::class_<EncoderStates>(m, "EncoderStates")
        .def_readonly("length", &EncoderStates::n)
        .def_readonly("truncated", &EncoderStates::truncated);

    py::class_<FlopCounters>(m, "FlopCounters")
        .def("total", &FlopCounters::total)
        .def("decoder_core", &FlopCounters::decoder_core)
        .def("decoder_total", &FlopCounters::decoder_total);

    py::class_<GenerationResult>(m, "GenerationResult")
        .def_readonly("ids", &GenerationResult::ids)
        .def_readonly("raw_ids", &GenerationResult::raw_ids)
        .def_readonly("exit_layers", &GenerationResult::exit_layers)
        .def_readonly("exit_entropy", &GenerationResult::exit_entropy)
        .def_readonly("flops", &GenerationResult::flops)
        .def_readonly("wall_ns", &GenerationResult::wall_ns)
        .def_readonly("mean_exit", &GenerationResult::mean_exit);

    py::class_<ArResult>(m, "ArResult")
        .def_readonly("ids", &ArResult::ids)
        .def_readonly("flops", &ArResult::flops)
        .def_readonly("decoder_passes", &ArResult::decoder_passes);

    py::class_<Model>(m, "Model")
        .def(py::init([](const ModelConfig& cfg, std::uint64_t seed) {
                 Rng rng(seed);
                 return Model(cfg, rng);
             }),
             py::arg("config"), py::arg("seed"),
             "Fresh model with seed-deterministic initialization.")
        .def_property_readonly(
            "config", [](const Model& model) { return model.config(); })
        .def_property_readonly("parameter_count",
                               [](const Model& model) {
                                   std::size_t n = 0;
                                   for (const Tensor& t : model.params())
                                       n += t.numel();
                                   return n;
                               })
        .def(
            "encode",
            [](const Model& model, const std::vector<int>& src_ids) {
                NoGradScope no_grad;
                return model.encode(src_ids);
            },
            py::arg("src_ids"));

    m.def("save_checkpoint", &save_checkpoint, py::arg("model"),
          py::arg("path"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

    // --------------------------------------------------------------- decode
    m.def(
        "generate_hard",
        [](const Model& model, const EncoderStates& enc, int length,
           real_t delta) {
            NoGradScope no_grad;
            return generate_hard(model, enc, {delta, length});
        },
        py::arg("model"), py::arg("encoded"), py::arg("length"),
        py::arg("delta") = 0.5,
        "Entropy-thresholded early exit; delta=0 disables early exits.");
    m.def(
        "generate_soft",
        [](const Model& model, const EncoderStates& enc, int length) {
            NoGradScope no_grad;
            return generate_soft(model, enc, {length});
        },
        py::arg("model"), py::arg("encoded"), py::arg("length"),
        "Full-depth decode with between-layer prediction feedback.");
    m.def(
        "decode_ar_reference",
        [](const Model& model, const EncoderStates& enc, int length) {
            NoGradScope no_grad;
            return model.decode_ar_reference(enc, length);
        },
        py::arg("model"), py::arg("encoded"), py::arg("length"),
        "Greedy left-to-right baseline used for speedup comparisons.");

    // -------------------------------------------------------------- training
    py::class_<StepRecord>(m, "StepRecord")
        .def_readonly("step", &StepRecord::step)
        .def_readonly("loss", &StepRecord::loss)
        .def_readonly("tokens_per_sec", &StepRecord::tokens_per_sec)
        .def_readonly("mean_exit", &StepRecord::mean_exit);

    py::class_<FinetuneRecord>(m, "FinetuneRecord")
        .def_readonly("step", &FinetuneRecord::step)
        .def_readonly("loss", &FinetuneRecord::loss)
        .def_readonly("mean_exit", &FinetuneRecord::mean_exit)
        .def_readonly("layer_losses", &FinetuneRecord::layer_losses);

    m.def(
        "pretrain",
        [](Model& model, const std::vector<std::string>& corpus,
           const Vocabulary& vocab, int steps, int batch, std::uint64_t seed,
           int k, real_t lr, real_t span_fraction, real_t poisson_lambda,
           bool shuffle_sentences) {
            PretrainConfig cfg;
            cfg.steps = steps;
            cfg.batch = batch;
            cfg.seed = seed;
            cfg.k = k;
            cfg.lr = lr;
            cfg.corruption.span_fraction = span_fraction;
            cfg.corruption.poisson_lambda = poisson_lambda;
            cfg.corruption.shuffle_sentences = shuffle_sentences;
            AdamState optimizer{AdamConfig{}};
            return pretrain_loop(model, corpus, vocab, cfg, optimizer).records;
        },
        py::arg("model"), py::arg("corpus"), py::arg("vocab"), py::arg("steps"),
        py::arg("batch") = 8, py::arg("seed") = 0, py::arg("k") = 10,
        py::arg("lr") = 2e-4, py::arg("span_fraction") = 0.15,
        py::arg("poisson_lambda") = 3.0, py::arg("shuffle_sentences") = true,
        "Span-corruption pretraining with sampled per-token exit layers. "
        "Returns the per-step records; the model is updated in place.");

    m.def(
        "finetune",
        [](Model& model,
           const std::vector<std::pair<std::vector<int>, std::vector<int>>>&
               pairs,
           const std::string& mode, int steps, int batch, std::uint64_t seed,
           int k, real_t lr, int length) {
            std::vector<FinetunePair> dataset;
            dataset.reserve(pairs.size());
            for (const auto& [src, tgt] : pairs) dataset.push_back({src, tgt});
            FinetuneConfig cfg;
            cfg.mode = parse_mode(mode);
            cfg.steps = steps;
            cfg.batch = batch;
            cfg.seed = seed;
            cfg.k = k;
            cfg.lr = lr;
            cfg.T = length;
            AdamState optimizer{AdamConfig{}};
            const FinetuneReport report =
                finetune_loop(model, dataset, cfg, optimizer);
            return py::make_tuple(report.records, report.T);
        },
        py::arg("model"), py::arg("pairs"), py::arg("mode"), py::arg("steps"),
        py::arg("batch") = 8, py::arg("seed") = 0, py::arg("k") = 10,
        py::arg("lr") = 2e-4, py::arg("length") = 0,
        "Sequence-to-sequence training on (src_ids, tgt_ids) pairs. mode is "
        "'hard' (sampled exit layers) or 'soft' (deep supervision with "
        "feedback). Returns (records, resolved_length).");

    // --------------------------------------------------------------- metrics
    py::class_<OverlapScore>(m, "OverlapScore")
        .def_readonly("precision", &OverlapScore::precision)
        .def_readonly("recall", &OverlapScore::recall)
        .def_readonly("f1", &OverlapScore::f1)
        .def("__repr__", [](const OverlapScore& s) {
            return "OverlapScore(precision=" + std::to_string(s.precision) +
                   ", recall=" + std::to_string(s.recall) +
                   ", f1=" + std::to_string(s.f1) + ")";
        });

    m.def(
        "rouge_n",
        [](const std::vector<int>& hyp, const std::vector<int>& ref, int n) {
            return rouge_n(hyp, ref, n);
        },
        py::arg("hyp"), py::arg("ref"), py::arg("n"));
    m.def(
        "rouge_l",
        [](const std::vector<int>& hyp, const std::vector<int>& ref) {
            return rouge_l(hyp, ref);
        },
        py::arg("hyp"), py::arg("ref"));
    m.def(
        "bleu",
        [](const std::vector<int>& hyp, const std::vector<int>& ref, int n) {
            return bleu_n(hyp, ref, n);
        },
        py::arg("hyp"), py::arg("ref"), py::arg("n") = 2);
    m.def(
        "bleu_corpus",
        [](const std::vector<std::pair<std::vector<int>, std::vector<int>>>&
               pairs,
           int n) { return bleu_corpus(to_eval_pairs(pairs), n); },
        py::arg("pairs"), py::arg("n") = 2);
    m.def(
        "meteor",
        [](const std::vector<int>& hyp, const std::vector<int>& ref) {
            return meteor_simplified(hyp, ref);
        },
        py::arg("hyp"), py::arg("ref"));
    m.def(
        "distinct_n",
        [](const std::vector<std::vector<int>>& hyps, int n) {
            return distinct_n(hyps, n);
        },
        py::arg("hyps"), py::arg("n"));

    // ------------------------------------------------------------- synthetic
    m.def(
        "make_synthetic",
        [](const std::string& task, int size, std::uint64_t seed) {
            std::vector<std::pair<std::string, std::string>> out;
            for (SyntheticPair& p :
                 make_synthetic(parse_synthetic_task(task), size, seed)) {
                out.emplace_back(std::move(p.src), std::move(p.tgt));
            }
            return out;
        },
        py::arg("task"), py::arg("size"), py::arg("seed"),
        "Seeded (source, target) pairs; task is 'copy', 'reverse' or "
        "'template'.");

    // ------------------------------------------------------------------- cli
    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::vector<const char*> argv{"narex"};
            for (const std::string& a : args) argv.push_back(a.c_str());
            return run_cli(static_cast<int>(argv.size()), argv.data());
        },
        py::arg("args"),
        "Invoke the command-line interface in-process; returns its exit "
        "code.");
}
