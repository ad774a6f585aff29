#include "narex/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "narex/bench.hpp"
#include "narex/checkpoint.hpp"
#include "narex/config.hpp"
#include "narex/data.hpp"
#include "narex/decode.hpp"
#include "narex/metrics.hpp"
#include "narex/synthetic.hpp"

namespace narex {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) {
        if (!part.empty()) parts.push_back(part);
    }
    return parts;
}

std::vector<int> split_csv_ints(const std::string& text) {
    std::vector<int> out;
    for (const std::string& part : split_csv(text)) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(part, &used));
            NAREX_CHECK(used == part.size(), "bad number");
        } catch (const std::exception&) {
            fail("not a number in list: ", part);
        }
    }
    return out;
}

// Writes line-delimited records to a file, or stdout for "-".
class JsonlWriter {
  public:
    explicit JsonlWriter(const std::string& path) {
        if (path == "-") return;
        file_.open(path);
        NAREX_CHECK(file_.good(), "cannot open ", path, " for writing");
    }
    void write(const json& record) {
        std::ostream& out = file_.is_open() ? file_ : std::cout;
        out << record.dump() << '\n';
        NAREX_CHECK(out.good(), "failed writing report line");
    }

  private:
    std::ofstream file_;
};

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

RunConfig load_config(const CommonArgs& args) {
    RunConfig rc = load_run_config(args.config_path);
    if (args.seed_given) rc.training.seed = args.seed;
    return rc;
}

Vocabulary require_vocab(const RunConfig& rc, const char* who) {
    NAREX_CHECK(!rc.data.vocab.empty(), who, " needs [data] vocab in the config");
    return Vocabulary::load(rc.data.vocab);
}

Model fresh_model(const RunConfig& rc, const Vocabulary& vocab) {
    ModelConfig mc = rc.model;
    mc.V = vocab.size();
    Rng rng(rc.training.seed);
    return Model(mc, rng);
}

Model model_for(const RunConfig& rc, const Vocabulary& vocab,
                const std::string& checkpoint_path) {
    if (checkpoint_path.empty()) return fresh_model(rc, vocab);
    Model model = load_checkpoint(checkpoint_path);
    NAREX_CHECK(model.config().V == vocab.size(), "checkpoint vocabulary size ",
                model.config().V, " does not match loaded vocabulary size ",
                vocab.size());
    return model;
}

AdamState optimizer_for(real_t lr) {
    AdamConfig cfg;
    cfg.lr = lr;
    return AdamState(cfg);
}

void cmd_build_vocab(const std::vector<std::string>& corpus_paths,
                     const std::string& out_path, int max_size) {
    std::string text;
    for (const std::string& path : corpus_paths) {
        for (const std::string& line : read_lines(path)) {
            text += line;
            text += '\n';
        }
    }
    Vocabulary vocab = Vocabulary::build(text, max_size);
    vocab.save(out_path);
    std::cout << "vocabulary of " << vocab.size() << " tokens -> " << out_path
              << '\n';
}

void cmd_make_synthetic(const std::string& task, int size, std::uint64_t seed,
                        const std::string& src_out,
                        const std::string& tgt_out) {
    const auto pairs = make_synthetic(parse_synthetic_task(task), size, seed);
    write_parallel(pairs, src_out, tgt_out);
    std::cout << pairs.size() << ' ' << task << " pairs -> " << src_out
              << ", " << tgt_out << '\n';
}

void cmd_pretrain(const CommonArgs& args, const std::string& out_path,
                  const std::string& report_path) {
    RunConfig rc = load_config(args);
    NAREX_CHECK(!rc.data.corpus.empty(),
                "pretrain needs [data] corpus in the config");
    Vocabulary vocab = require_vocab(rc, "pretrain");
    Model model = fresh_model(rc, vocab);

    PretrainConfig pc;
    pc.steps = rc.training.steps;
    pc.batch = rc.training.batch;
    pc.seed = rc.training.seed;
    pc.k = rc.training.k;
    pc.lr = rc.training.lr;
    pc.corruption = rc.corruption;

    AdamState opt = optimizer_for(rc.training.lr);
    TrainReport report =
        pretrain_loop(model, read_lines(rc.data.corpus), vocab, pc, opt);
    save_checkpoint(model, out_path);

    if (!report_path.empty()) {
        JsonlWriter writer(report_path);
        for (const StepRecord& r : report.records) {
            json j;
            j["step"] = r.step;
            j["loss"] = r.loss;
            j["mean_exit"] = r.mean_exit;
            j["tokens_per_sec"] = r.tokens_per_sec;
            writer.write(j);
        }
    }
    std::cout << "pretrain: " << report.records.size() << " steps";
    if (!report.records.empty()) {
        std::cout << ", final loss " << report.records.back().loss;
    }
    std::cout << " -> " << out_path << '\n';
}

void cmd_finetune(const CommonArgs& args, const std::string& init_path,
                  const std::string& out_path, const std::string& report_path,
                  const std::string& mode_override) {
    RunConfig rc = load_config(args);
    const std::string mode =
        mode_override.empty() ? rc.decoding.mode : mode_override;
    NAREX_CHECK(mode == "hard" || mode == "soft",
                "finetune mode must be hard or soft, got ", mode);
    NAREX_CHECK(!rc.data.src.empty() && !rc.data.tgt.empty(),
                "finetune needs [data] src and tgt in the config");
    Vocabulary vocab = require_vocab(rc, "finetune");
    Model model = model_for(rc, vocab, init_path);

    FinetuneConfig fc;
    fc.mode = mode == "hard" ? FinetuneMode::Hard : FinetuneMode::Soft;
    fc.steps = rc.training.steps;
    fc.batch = rc.training.batch;
    fc.seed = rc.training.seed;
    fc.k = rc.training.k;
    fc.lr = rc.training.lr;

    AdamState opt = optimizer_for(rc.training.lr);
    const auto pairs = load_parallel(rc.data.src, rc.data.tgt, vocab);
    FinetuneReport report = finetune_loop(model, pairs, fc, opt);
    save_checkpoint(model, out_path);

    if (!report_path.empty()) {
        JsonlWriter writer(report_path);
        for (const FinetuneRecord& r : report.records) {
            json j;
            j["step"] = r.step;
            j["loss"] = r.loss;
            j["mean_exit"] = r.mean_exit;
            if (!r.layer_losses.empty()) j["layer_losses"] = r.layer_losses;
            writer.write(j);
        }
    }
    std::cout << "finetune (" << mode << "): " << report.records.size()
              << " steps, decode length " << report.T;
    if (!report.records.empty()) {
        std::cout << ", final loss " << report.records.back().loss;
    }
    std::cout << " -> " << out_path << '\n';
}

void cmd_generate(const CommonArgs& args, const std::string& checkpoint_path,
                  const std::string& out_path) {
    RunConfig rc = load_config(args);
    NAREX_CHECK(!rc.data.src.empty(), "generate needs [data] src in the config");
    Vocabulary vocab = require_vocab(rc, "generate");
    Model model = model_for(rc, vocab, checkpoint_path);
    const int T = rc.decoding.length;
    const std::string& mode = rc.decoding.mode;

    JsonlWriter writer(out_path);
    const std::vector<std::string> lines = read_lines(rc.data.src);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::vector<int> src = encode(lines[i], vocab);
        EncoderStates enc = model.encode(src);

        json j;
        j["input"] = i;
        if (mode == "ar") {
            const auto start = std::chrono::steady_clock::now();
            ArResult r = model.decode_ar_reference(enc, T);
            const auto ns =
                std::chrono::duration_cast<std::chrono::nanoseconds>(
                    std::chrono::steady_clock::now() - start)
                    .count();
            j["text"] = decode_ids(truncate_at_eos(r.ids), vocab);
            j["mean_exit"] = static_cast<real_t>(model.config().L);
            j["decoder_flops"] = r.flops.total();
            j["latency_ns"] = ns;
            j["exit_layers"] = std::vector<int>(
                static_cast<std::size_t>(T), model.config().L);
        } else {
            GenerationResult r;
            if (mode == "hard") {
                r = generate_hard(model, enc, {rc.decoding.delta, T});
            } else if (mode == "nar") {
                r = generate_hard(model, enc, {0.0, T});
            } else {
                r = generate_soft(model, enc, {T});
            }
            j["text"] = decode_ids(r.ids, vocab);
            j["mean_exit"] = r.mean_exit;
            j["decoder_flops"] = r.flops.total();
            j["latency_ns"] = r.wall_ns;
            j["exit_layers"] = r.exit_layers;
        }
        writer.write(j);
    }
}

void cmd_evaluate(const std::string& hyp_path, const std::string& ref_path,
                  const std::string& report_path) {
    const auto hyp_lines = read_lines(hyp_path);
    const auto ref_lines = read_lines(ref_path);
    NAREX_CHECK(hyp_lines.size() == ref_lines.size(), "line counts differ: ",
                hyp_path, " has ", hyp_lines.size(), ", ", ref_path, " has ",
                ref_lines.size());
    NAREX_CHECK(!hyp_lines.empty(), "nothing to evaluate");

    // Intern whitespace-separated tokens; ids only need to be consistent.
    std::map<std::string, int> intern;
    const auto to_ids = [&intern](const std::string& line) {
        std::istringstream in(line);
        std::vector<int> ids;
        std::string word;
        while (in >> word) {
            ids.push_back(
                intern.emplace(word, static_cast<int>(intern.size()))
                    .first->second);
        }
        return ids;
    };

    std::vector<EvalPair> pairs;
    std::vector<std::vector<int>> hyp_ids;
    for (std::size_t i = 0; i < hyp_lines.size(); ++i) {
        EvalPair pair{to_ids(hyp_lines[i]), to_ids(ref_lines[i])};
        hyp_ids.push_back(pair.hypothesis);
        pairs.push_back(std::move(pair));
    }

    real_t r1 = 0.0, r2 = 0.0, rl = 0.0, meteor = 0.0;
    std::unique_ptr<JsonlWriter> writer;
    if (!report_path.empty()) writer = std::make_unique<JsonlWriter>(report_path);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const EvalPair& p = pairs[i];
        const real_t pr1 = rouge_n(p.hypothesis, p.reference, 1).f1;
        const real_t pr2 = rouge_n(p.hypothesis, p.reference, 2).f1;
        const real_t prl = rouge_l(p.hypothesis, p.reference).f1;
        const real_t pm = meteor_simplified(p.hypothesis, p.reference);
        r1 += pr1;
        r2 += pr2;
        rl += prl;
        meteor += pm;
        if (writer) {
            json j;
            j["index"] = i;
            j["rouge1_f1"] = pr1;
            j["rouge2_f1"] = pr2;
            j["rougeL_f1"] = prl;
            j["bleu2"] = bleu_n(p.hypothesis, p.reference, 2);
            j["meteor"] = pm;
            writer->write(j);
        }
    }
    const real_t n = static_cast<real_t>(pairs.size());
    std::cout << "rouge1_f1\t" << r1 / n << '\n'
              << "rouge2_f1\t" << r2 / n << '\n'
              << "rougeL_f1\t" << rl / n << '\n'
              << "bleu2\t" << bleu_corpus(pairs, 2) << '\n'
              << "meteor\t" << meteor / n << '\n'
              << "distinct1\t" << distinct_n(hyp_ids, 1) << '\n'
              << "distinct2\t" << distinct_n(hyp_ids, 2) << '\n';
}

void cmd_bench(const CommonArgs& args, const std::string& checkpoint_path,
               const std::string& modes_csv, const std::string& lengths_csv,
               int reps, int warmups, const std::string& report_path) {
    RunConfig rc = load_config(args);
    NAREX_CHECK(!rc.data.src.empty(), "bench needs [data] src in the config");
    Vocabulary vocab = require_vocab(rc, "bench");
    Model model = model_for(rc, vocab, checkpoint_path);

    std::vector<std::vector<int>> sources;
    for (const std::string& line : read_lines(rc.data.src)) {
        if (!line.empty()) sources.push_back(encode(line, vocab));
    }

    BenchOptions opts;
    opts.repetitions = reps;
    opts.warmups = warmups;
    opts.delta = rc.decoding.delta;
    const auto modes = split_csv(modes_csv);
    const auto lengths = split_csv_ints(lengths_csv);
    const auto records = bench_latency(model, sources, modes, lengths, opts);

    std::cout << format_benchmark_table(records);
    if (!report_path.empty()) {
        JsonlWriter writer(report_path);
        for (const BenchmarkRecord& r : records) {
            json j;
            j["mode"] = r.mode;
            j["T"] = r.T;
            j["repetitions"] = r.repetitions;
            j["median_ns"] = r.median_ns;
            j["p95_ns"] = r.p95_ns;
            j["decoder_flops"] = r.decoder_flops;
            j["mean_exit"] = r.mean_exit;
            j["speedup_vs_ar"] = r.speedup_vs_ar;
            writer.write(j);
        }
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"non-autoregressive text generation engine with per-token "
                 "early exit"};
    app.require_subcommand(1);

    // build-vocab
    std::vector<std::string> bv_corpus;
    std::string bv_out;
    int bv_max_size = 32000;
    auto* build_vocab = app.add_subcommand(
        "build-vocab", "Induce a word vocabulary from text corpora");
    build_vocab->add_option("--corpus", bv_corpus, "input text files")
        ->required();
    build_vocab->add_option("--out", bv_out, "vocabulary file to write")
        ->required();
    build_vocab->add_option("--max-size", bv_max_size,
                            "vocabulary size cap, reserved tokens included");
    build_vocab->callback(
        [&] { cmd_build_vocab(bv_corpus, bv_out, bv_max_size); });

    // make-synthetic
    std::string ms_task, ms_src_out, ms_tgt_out;
    int ms_size = 0;
    std::uint64_t ms_seed = 0;
    auto* make_syn = app.add_subcommand(
        "make-synthetic", "Write a deterministic paired toy dataset");
    make_syn->add_option("--task", ms_task, "copy, reverse or template")
        ->required();
    make_syn->add_option("--size", ms_size, "number of pairs")->required();
    make_syn->add_option("--seed", ms_seed, "generator seed")->required();
    make_syn->add_option("--src-out", ms_src_out, "source file")->required();
    make_syn->add_option("--tgt-out", ms_tgt_out, "target file")->required();
    make_syn->callback([&] {
        cmd_make_synthetic(ms_task, ms_size, ms_seed, ms_src_out, ms_tgt_out);
    });

    CommonArgs common;
    const auto add_common = [&common](CLI::App* cmd) {
        cmd->add_option("--config", common.config_path, "run configuration")
            ->required();
        cmd->add_option("--seed", common.seed,
                        "override the configured training seed");
    };
    const auto note_seed = [&common](CLI::App* cmd) {
        common.seed_given = cmd->count("--seed") > 0;
    };

    // pretrain
    std::string pt_out, pt_report;
    auto* pretrain = app.add_subcommand(
        "pretrain", "Denoising pre-training with assigned exit layers");
    add_common(pretrain);
    pretrain->add_option("--out", pt_out, "checkpoint to write")->required();
    pretrain->add_option("--report", pt_report, "loss curve as JSON lines");
    pretrain->callback([&, pretrain] {
        note_seed(pretrain);
        cmd_pretrain(common, pt_out, pt_report);
    });

    // finetune
    std::string ft_init, ft_out, ft_report, ft_mode;
    auto* finetune = app.add_subcommand(
        "finetune", "Paired-data training in hard or soft exit mode");
    add_common(finetune);
    finetune->add_option("--init", ft_init, "starting checkpoint");
    finetune->add_option("--out", ft_out, "checkpoint to write")->required();
    finetune->add_option("--report", ft_report, "loss curve as JSON lines");
    finetune->add_option("--mode", ft_mode,
                         "hard or soft, overrides [decoding] mode");
    finetune->callback([&, finetune] {
        note_seed(finetune);
        cmd_finetune(common, ft_init, ft_out, ft_report, ft_mode);
    });

    // generate
    std::string gen_checkpoint, gen_out = "-";
    auto* generate = app.add_subcommand(
        "generate", "Decode the configured source file into JSON records");
    add_common(generate);
    generate->add_option("--checkpoint", gen_checkpoint, "model checkpoint")
        ->required();
    generate->add_option("--out", gen_out,
                         "records file, or - for standard output");
    generate->callback([&, generate] {
        note_seed(generate);
        cmd_generate(common, gen_checkpoint, gen_out);
    });

    // evaluate
    std::string ev_hyp, ev_ref, ev_report;
    auto* evaluate = app.add_subcommand(
        "evaluate", "Score hypothesis text against reference text");
    evaluate->add_option("--hyp", ev_hyp, "hypothesis file, one per line")
        ->required();
    evaluate->add_option("--ref", ev_ref, "reference file, one per line")
        ->required();
    evaluate->add_option("--report", ev_report, "per-example JSON lines");
    evaluate->callback([&] { cmd_evaluate(ev_hyp, ev_ref, ev_report); });

    // bench
    std::string bn_checkpoint, bn_modes = "ar,nar,hard,soft",
                               bn_lengths = "8,16,32", bn_report;
    int bn_reps = 30, bn_warmups = 5;
    auto* bench = app.add_subcommand(
        "bench", "Latency and FLOP comparison across decode modes");
    add_common(bench);
    bench->add_option("--checkpoint", bn_checkpoint, "model checkpoint");
    bench->add_option("--modes", bn_modes, "comma list of ar,nar,hard,soft");
    bench->add_option("--lengths", bn_lengths, "comma list of decode lengths");
    bench->add_option("--reps", bn_reps, "timed repetitions per cell");
    bench->add_option("--warmups", bn_warmups, "discarded warm-up decodes");
    bench->add_option("--report", bn_report, "records as JSON lines");
    bench->callback([&, bench] {
        note_seed(bench);
        cmd_bench(common, bn_checkpoint, bn_modes, bn_lengths, bn_reps,
                  bn_warmups, bn_report);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace narex
