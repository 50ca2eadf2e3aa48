//! Toy-task oracles: channel recovery by counting and by IBM-1, and the
//! enumeration oracles checked against the decoders.

use std::collections::BTreeMap;

use btlab_core::corpus::{target_unigram, TokenId};
use btlab_core::decode::{beam_search, generate, GeneratorSpec};
use btlab_core::ibm1::{train_ibm1, translation_entropy};
use btlab_core::rng;
use btlab_core::seqmodel::{ArchConfig, SeqModel};
use btlab_core::toyharness::{
    enumerate_model_distribution, make_toy_task, strategy_exact_distribution, ChannelModel, ToyConfig,
};

fn big_task() -> btlab_core::toyharness::ToyTask {
    let cfg = ToyConfig::standard(200, 17).with_sizes(100_000, 1, 1);
    make_toy_task(&cfg, 11).unwrap()
}

#[test]
fn empirical_channel_counts_match_option_probabilities() {
    let task = big_task();
    let mut counts: BTreeMap<TokenId, BTreeMap<TokenId, usize>> = BTreeMap::new();
    for p in task.bilingual.pairs() {
        let (f, e) = (p.source.ids(), p.target.ids());
        assert_eq!(f.len(), e.len());
        for j in 0..e.len() {
            *counts.entry(e[j]).or_default().entry(f[j]).or_default() += 1;
        }
    }
    for (e, opts) in &task.channel.options {
        let row = &counts[e];
        let total: usize = row.values().sum();
        assert!(total > 1000);
        for &(f, p) in opts {
            let got = *row.get(&f).unwrap_or(&0) as f64 / total as f64;
            assert!((got - p).abs() < 0.01, "t({f}|{e}) = {got} vs {p}");
        }
        assert!(row.keys().all(|f| opts.iter().any(|o| o.0 == *f)));
    }
}

/// Ten target words with disjoint source options, so that the position-free
/// IBM-1 model is well specified.
fn disjoint_task() -> btlab_core::toyharness::ToyTask {
    let mut cfg = ToyConfig::standard(300, 5);
    let splits: [&[f64]; 3] = [&[0.6, 0.3, 0.1], &[0.7, 0.3], &[1.0]];
    cfg.source_words.clear();
    cfg.channel.clear();
    for (i, t) in cfg.target_words.iter().enumerate() {
        let opts = splits[i % 3]
            .iter()
            .enumerate()
            .map(|(k, &p)| (format!("s{i}_{k}"), p))
            .collect::<Vec<_>>();
        cfg.source_words.extend(opts.iter().map(|o| o.0.clone()));
        cfg.channel.insert(t.clone(), opts);
    }
    make_toy_task(&cfg.with_sizes(100_000, 1, 1), 11).unwrap()
}

#[test]
fn ibm1_recovers_dominant_channel_options() {
    let task = disjoint_task();
    let t = train_ibm1(&task.bilingual, 15).unwrap();
    for (e, opts) in &task.channel.options {
        let &(f, p) = opts.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        let got = t.table.prob(Some(*e), f);
        assert!((got - p).abs() < 0.02, "t({f}|{e}) = {got} vs {p}");
    }
    let h = translation_entropy(&t.table, &target_unigram(&task.bilingual).unwrap()).unwrap();
    assert!(h > 0.0 && h.is_finite());
}

#[test]
fn ibm1_on_shared_source_words_stays_near_the_channel() {
    let task = big_task();
    let t = train_ibm1(&task.bilingual, 15).unwrap();
    for (e, opts) in &task.channel.options {
        let &(f, p) = opts.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        let got = t.table.prob(Some(*e), f);
        assert!((got - p).abs() < 0.08, "t({f}|{e}) = {got} vs {p}");
    }
}

fn random_generator(seed: u64) -> (SeqModel, Vec<Vec<TokenId>>) {
    let task = make_toy_task(&ToyConfig::standard(50, 3).with_sizes(60, 1, 1), seed).unwrap();
    let arch = ArchConfig {
        embed_dim: 6,
        hidden_dim: 8,
        max_positions: 8,
        attention: true,
    };
    // Target-to-source, so the output side is the 12-token source vocabulary.
    let mut m = SeqModel::new(arch, &task.tgt_vocab, &task.src_vocab, seed).unwrap();
    for w in m.params_mut() {
        *w *= 4.0;
    }
    let inputs = task.bilingual.pairs().iter().map(|p| p.target.ids().to_vec()).collect();
    (m, inputs)
}

#[test]
fn enumeration_argmax_equals_exhaustive_beam() {
    let (model, inputs) = random_generator(5);
    for input in inputs.iter().take(20) {
        let d = enumerate_model_distribution(&model, input, 4).unwrap();
        let beam = beam_search(&model, input, 12usize.pow(4), 4).unwrap();
        let (ids, score) = d.argmax.clone().unwrap();
        assert_eq!(beam[0].ids, ids);
        assert!((beam[0].score - score).abs() < 1e-12);
    }
}

#[test]
fn channel_model_argmax_is_the_mode_translation() {
    let task = make_toy_task(&ToyConfig::standard(50, 3).with_sizes(30, 1, 1), 2).unwrap();
    let model = ChannelModel {
        channel: &task.channel,
        source_vocab: task.src_vocab.len(),
    };
    for p in task.bilingual.pairs() {
        let e = p.target.ids();
        let d = enumerate_model_distribution(&model, e, 4).unwrap();
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
        assert!(d.truncated.is_empty());
        for (f, &q) in &d.finished {
            assert!((q - task.channel.prob(f, e)).abs() < 1e-12);
        }
        let beam = beam_search(&model, e, 5, 8).unwrap();
        assert_eq!(beam[0].ids, d.argmax.as_ref().unwrap().0);
    }
}

#[test]
fn sample_and_restricted_exact_distributions() {
    let (model, inputs) = random_generator(9);
    for input in inputs.iter().take(5) {
        let p = enumerate_model_distribution(&model, input, 4).unwrap();
        let s = strategy_exact_distribution(&model, input, &GeneratorSpec::sample(), 4).unwrap();
        assert_eq!(p.finished.len(), s.finished.len());
        for (k, v) in &p.finished {
            assert!((s.finished[k] - v).abs() < 1e-12);
        }
        for tau in [0.1, 0.25] {
            let r = strategy_exact_distribution(&model, input, &GeneratorSpec::restricted(tau), 4).unwrap();
            assert!((r.total_mass() - 1.0).abs() < 1e-9);
            assert!(r.finished.len() <= p.finished.len());
        }
        let nb = strategy_exact_distribution(&model, input, &GeneratorSpec::nbest(5), 4).unwrap();
        assert!((nb.total_mass() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn restricted_draws_match_exact_distribution() {
    let (model, inputs) = random_generator(13);
    let input = &inputs[0];
    let spec = GeneratorSpec::restricted(0.1).with_max_len(btlab_core::decode::LengthCap::fixed(4));
    let exact = strategy_exact_distribution(&model, input, &spec, 4).unwrap();
    let mut counts: BTreeMap<(Vec<TokenId>, bool), usize> = BTreeMap::new();
    for i in 0..20_000u64 {
        let h = generate(&model, input, &spec, &mut rng::stream(77, i)).unwrap();
        *counts.entry((h.ids.clone(), h.is_finished())).or_default() += 1;
    }
    let tv = exact.tv_distance(&counts);
    assert!(tv < 0.03, "TV {tv}");
}
