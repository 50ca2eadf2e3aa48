"""Smoke test for the btlab extension module.

Build and install first, e.g. `pip install ./crates/python`.
"""

import math

import btlab


def main():
    src_vocab, tgt_vocab, bilingual, dev = btlab.toy_task(seed=3, bilingual=600, mono=1, dev=40)
    assert len(bilingual) == 600 and len(dev) == 40
    print(f"toy task: {len(bilingual)} pairs, vocab {len(src_vocab)}/{len(tgt_vocab)}")

    model = btlab.SeqModel(src_vocab, tgt_vocab, seed=2, arch_json='{"embed_dim": 8, "hidden_dim": 16}')
    cfg = '{"max_updates": 60, "checkpoint_interval": 20, "batch_tokens": 128}'
    trained, log = model.train(bilingual, dev, cfg)
    assert log.count("\n") >= 3
    ppl = trained.perplexity(dev)
    assert math.isfinite(ppl) and ppl < model.perplexity(dev)
    print(f"trained {trained.num_params()} params: dev ppl {model.perplexity(dev):.3f} -> {ppl:.3f}")

    sources = [s for s, _ in dev.pairs()]
    beam = trained.generate(sources, "beam:4")
    assert all(h.score <= 0 for h in beam)
    first = trained.generate(sources, "restricted:0.1", seed=7)
    again = trained.generate(sources, "restricted:0.1", seed=7)
    assert [h.ids for h in first] == [h.ids for h in again]
    dist = trained.next_distribution(sources[0], [])
    assert abs(sum(dist) - 1.0) < 1e-9

    hyps = [tgt_vocab.decode(h.ids) for h in beam]
    refs = [tgt_vocab.decode(t) for _, t in dev.pairs()]
    print(f"beam BLEU {btlab.bleu(hyps, refs):.2f}, self-BLEU {btlab.bleu(refs, refs):.1f}")
    assert btlab.bleu(refs, refs) == 100.0

    curve = trained.mass_curve(dev, [1, 2, 5])
    assert curve[0][1] <= curve[1][1] <= curve[2][1] <= 1.0 + 1e-12

    s = btlab.Vocabulary.build(["das Haus", "das Buch", "ein Buch"])
    t = btlab.Vocabulary.build(["the house", "the book", "a book"])
    toy = btlab.ParallelCorpus.from_lines(["das Haus", "das Buch", "ein Buch"], ["the house", "the book", "a book"], s, t)
    p = btlab.ibm1_prob(toy, t.encode("the")[0], s.encode("das")[0], iterations=20)
    assert p > 0.99
    h, ll = btlab.ibm1_entropy(bilingual)
    assert all(b >= a - 1e-9 * abs(a) for a, b in zip(ll, ll[1:]))
    print(f"t(das|the) = {p:.4f}; toy IBM-1 entropy {h:.4f} nats")
    print("smoke test ok")


if __name__ == "__main__":
    main()
