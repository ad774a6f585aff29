"""End-to-end smoke checks for the Python bindings.

Runs with a bare interpreter (no pytest needed): every check is an assert,
and the script prints one OK line per section.
"""

import math
import os
import tempfile

import narex


def check_vocab():
    vocab = narex.Vocabulary.build("the cat sat on the mat .\nthe dog ran .\n", 100)
    assert len(vocab) > 5
    assert "cat" in vocab
    assert vocab.id_of("cat") >= 5
    assert vocab.id_of("unicorn") == narex.Vocabulary.UNK
    assert vocab.token_of(narex.Vocabulary.EOS) == "[EOS]"

    ids = narex.encode("the cat sat", vocab)
    assert len(ids) == 3
    assert narex.decode_ids(ids, vocab) == "the cat sat"
    print("OK vocabulary")
    return vocab


def check_model_and_decoding(vocab):
    cfg = narex.ModelConfig()
    cfg.layers = 2
    cfg.width = 16
    cfg.heads = 2
    cfg.ffn_width = 32
    cfg.max_length = 16
    cfg.vocab_size = len(vocab)
    model = narex.Model(cfg, seed=7)
    assert model.parameter_count > 0
    assert model.config.layers == 2

    enc = model.encode(narex.encode("the cat sat", vocab))
    assert enc.length == 3 and not enc.truncated

    # Threshold extremes pin the exit layer.
    lo = narex.generate_hard(model, enc, length=8, delta=math.log(len(vocab)))
    hi = narex.generate_hard(model, enc, length=8, delta=0.0)
    assert lo.exit_layers == [1] * 8
    assert hi.exit_layers == [2] * 8
    assert hi.flops.decoder_core() == 2 * lo.flops.decoder_core()

    soft = narex.generate_soft(model, enc, length=8)
    assert soft.exit_layers == [2] * 8
    again = narex.generate_soft(model, enc, length=8)
    assert soft.raw_ids == again.raw_ids

    ar = narex.decode_ar_reference(model, enc, length=8)
    assert len(ar.ids) == 8 and ar.decoder_passes == 8
    assert ar.flops.total() > hi.flops.total()
    print("OK model and decoding")
    return cfg, model


def check_training(vocab, cfg):
    model = narex.Model(cfg, seed=11)
    corpus = ["the cat sat on the mat .", "the dog ran .", "the cat ran ."]
    records = narex.pretrain(model, corpus, vocab, steps=3, batch=2, seed=5, lr=1e-3)
    assert [r.step for r in records] == [0, 1, 2]
    assert all(math.isfinite(r.loss) for r in records)

    pairs = [(narex.encode(s, vocab), narex.encode(s, vocab)) for s in corpus]
    fine, length = narex.finetune(
        model, pairs, mode="soft", steps=12, batch=3, seed=9, lr=3e-3
    )
    assert length == 8  # longest target (7 tokens) plus end marker
    assert len(fine) == 12
    assert len(fine[0].layer_losses) == cfg.layers
    assert fine[-1].loss < fine[0].loss

    try:
        narex.finetune(model, pairs, mode="sideways", steps=1)
    except RuntimeError as e:
        assert "hard or soft" in str(e)
    else:
        raise AssertionError("bad mode accepted")
    print("OK training")
    return model


def check_checkpoint(model, vocab):
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.ckpt")
        narex.save_checkpoint(model, path)
        clone = narex.load_checkpoint(path)
    src = narex.encode("the dog sat", vocab)
    a = narex.generate_hard(model, model.encode(src), length=8)
    b = narex.generate_hard(clone, clone.encode(src), length=8)
    assert a.raw_ids == b.raw_ids and a.exit_layers == b.exit_layers
    print("OK checkpoint round trip")


def check_metrics():
    s = narex.rouge_l([0, 9, 1], [0, 1])
    assert s.recall == 1.0 and abs(s.f1 - 0.8) < 1e-12
    assert narex.bleu([0, 0, 0], [0, 1], n=1) == 1.0 / 3.0
    assert narex.meteor([2, 1], [1, 2]) == 0.5
    assert narex.distinct_n([[8, 8, 8]], 1) == 1.0 / 3.0
    assert narex.bleu_corpus([([1, 2], [1, 2]), ([3], [3])], n=1) == 1.0
    print("OK metrics")


def check_synthetic():
    pairs = narex.make_synthetic("template", size=50, seed=3)
    assert len(pairs) == 50
    assert pairs == narex.make_synthetic("template", size=50, seed=3)
    for src, tgt in pairs:
        words = src.split()
        assert len(words) == 9 and words[1] == "keeps"
        assert len(tgt.split()) in (8, 11, 15)
    copy = narex.make_synthetic("copy", size=10, seed=1)
    assert all(s == t for s, t in copy)
    print("OK synthetic data")


def check_cli():
    assert narex.run_cli(["--help"]) == 0
    assert narex.run_cli(["no-such-command"]) == 2
    assert narex.run_cli(["evaluate", "--hyp", "missing.txt", "--ref", "x"]) == 1
    print("OK cli")


def main():
    vocab = check_vocab()
    cfg, _ = check_model_and_decoding(vocab)
    model = check_training(vocab, cfg)
    check_checkpoint(model, vocab)
    check_metrics()
    check_synthetic()
    check_cli()
    print("smoke test passed")


if __name__ == "__main__":
    main()
