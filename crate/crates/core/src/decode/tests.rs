use super::*;
use crate::rng;
use crate::seqmodel::{ArchConfig, SeqModel};
use crate::toyharness::{FixedSequenceModel, UniformModel};
use proptest::prelude::*;

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
}

fn small_model(seed: u64) -> SeqModel {
    let arch = ArchConfig {
        embed_dim: 6,
        hidden_dim: 8,
        max_positions: 16,
        attention: true,
    };
    SeqModel::with_sizes(arch, 12, 9, seed).unwrap()
}

#[test]
fn restricted_filter_hand_example() {
    let out = step_filter_renormalize(&[0.6, 0.3, 0.1], 0.25, RenormMode::L1).unwrap();
    assert!(close(&out, &[2.0 / 3.0, 1.0 / 3.0, 0.0]));
}

#[test]
fn restricted_filter_softmax_mode() {
    let out = step_filter_renormalize(&[0.6, 0.3, 0.1], 0.25, RenormMode::SoftmaxOverProbs).unwrap();
    let z = 0.6f64.exp() + 0.3f64.exp();
    assert!(close(&out, &[0.6f64.exp() / z, 0.3f64.exp() / z, 0.0]));
}

#[test]
fn restricted_filter_empty_set_falls_back_to_argmax() {
    let out = step_filter_renormalize(&[0.2, 0.45, 0.35], 0.49, RenormMode::L1).unwrap();
    assert_eq!(out, vec![0.0, 1.0, 0.0]);
}

#[test]
fn restricted_filter_tau_zero_is_identity() {
    let d = [0.0, 0.1, 0.25, 0.65];
    assert!(close(&step_filter_renormalize(&d, 0.0, RenormMode::L1).unwrap(), &d));
}

#[test]
fn restricted_filter_rejects_tau_out_of_range() {
    for tau in [0.5, 0.7, -0.1, f64::NAN] {
        assert!(step_filter_renormalize(&[0.5, 0.5], tau, RenormMode::L1).is_err());
        assert!(GeneratorSpec::restricted(tau).validate().is_err());
    }
    assert!(GeneratorSpec::parse_strategy("restricted:0.5").is_err());
    assert!(GeneratorSpec::parse_strategy("restricted:0.49").is_ok());
}

#[test]
fn top_k_keeps_most_probable() {
    let out = top_k_filter(&[0.0, 0.1, 0.4, 0.1, 0.4], 3);
    assert!(close(&out, &[0.0, 0.1 / 0.9, 0.4 / 0.9, 0.0, 0.4 / 0.9]));
}

#[test]
fn sample_step_one_hot() {
    let mut r = rng::seeded(1);
    for _ in 0..1000 {
        assert_eq!(sample_step(&[0.0, 0.0, 1.0, 0.0], &mut r), 2);
    }
}

#[test]
fn sample_step_uniform_frequencies() {
    let mut r = rng::seeded(7);
    let mut counts = [0usize; 4];
    let n = 100_000;
    for _ in 0..n {
        counts[sample_step(&[0.25; 4], &mut r) as usize] += 1;
    }
    for c in counts {
        assert!((c as f64 / n as f64 - 0.25).abs() < 0.01, "{counts:?}");
    }
}

#[test]
fn sample_step_is_seed_deterministic() {
    let d = [0.1, 0.2, 0.3, 0.4];
    let draw = |seed| {
        let mut r = rng::seeded(seed);
        (0..200).map(|_| sample_step(&d, &mut r)).collect::<Vec<_>>()
    };
    assert_eq!(draw(3), draw(3));
    assert_ne!(draw(3), draw(4));
}

#[test]
fn mask_controls_blocks_specials_and_initial_eos() {
    let d = vec![0.0, 0.1, 0.2, 0.1, 0.3, 0.3];
    let m0 = mask_controls(&d, 0);
    assert!(close(&m0, &[0.0, 0.0, 0.0, 0.0, 0.5, 0.5]));
    let m1 = mask_controls(&d, 1);
    assert!(close(&m1, &[0.0, 0.0, 0.25, 0.0, 0.375, 0.375]));
}

#[test]
fn fixed_model_decodes_exactly() {
    let m = FixedSequenceModel {
        vocab: 8,
        sequence: vec![5, 4, 7],
    };
    let g = greedy(&m, &[4], 10).unwrap();
    assert_eq!(g.ids, vec![5, 4, 7]);
    assert_eq!(g.logprob, 0.0);
    assert!(g.is_finished());
    let b = beam_search(&m, &[4], 4, 10).unwrap();
    assert_eq!(b.len(), 1);
    assert_eq!(b[0].ids, vec![5, 4, 7]);
    assert_eq!(b[0].logprob, 0.0);
    let mut r = rng::seeded(0);
    for spec in [
        GeneratorSpec::sample(),
        GeneratorSpec::top_k(3),
        GeneratorSpec::restricted(0.2),
        GeneratorSpec::nbest(5),
    ] {
        let h = generate(&m, &[4], &spec, &mut r).unwrap();
        assert_eq!(h.ids, vec![5, 4, 7]);
    }
}

#[test]
fn beam_search_respects_length_cap() {
    let m = FixedSequenceModel {
        vocab: 8,
        sequence: vec![5; 20],
    };
    // only EOS may follow a full-length prefix, and it has probability 0
    let b = beam_search(&m, &[4], 3, 4).unwrap();
    assert_eq!(b.len(), 1);
    assert_eq!(b[0].status, HypStatus::Unfinished);
    assert_eq!(b[0].ids, vec![5; 4]);
    let g = greedy(&m, &[4], 4).unwrap();
    assert_eq!(g.status, HypStatus::Truncated);
    assert_eq!(g.ids.len(), 4);
}

#[test]
fn beam_one_equals_greedy() {
    let mut checked = 0;
    for seed in 0..40 {
        let m = small_model(seed);
        for src in [vec![4u32, 5], vec![6, 7, 8, 9], vec![11]] {
            let g = greedy(&m, &src, 30).unwrap();
            if !g.is_finished() {
                continue;
            }
            let b = beam_search(&m, &src, 1, 30).unwrap();
            assert_eq!(b[0].ids, g.ids);
            assert!((b[0].logprob - g.logprob).abs() < 1e-12);
            checked += 1;
        }
    }
    assert!(checked > 10);
}

#[test]
fn beam_results_are_ranked_and_distinct() {
    let m = small_model(5);
    let hyps = beam_search(&m, &[4, 5, 6], 6, 12).unwrap();
    assert!(!hyps.is_empty() && hyps.len() <= 6);
    for w in hyps.windows(2) {
        assert!(w[0].score >= w[1].score);
        assert_ne!(w[0].ids, w[1].ids);
    }
    for h in &hyps {
        let s = crate::seqmodel::sequence_logprob(&MaskedModel(&m), &[4, 5, 6], &h.ids).unwrap();
        assert!((s.total - h.logprob).abs() < 1e-9);
        assert!((h.score - h.logprob / (h.ids.len() + 1) as f64).abs() < 1e-12);
    }
}

/// Exposes the masked generation distribution as a model.
struct MaskedModel<'a>(&'a SeqModel);

impl StepModel for MaskedModel<'_> {
    type Context = crate::seqmodel::Encoded;
    fn target_vocab_size(&self) -> usize {
        self.0.target_vocab_size()
    }
    fn prepare(&self, source: &[TokenId]) -> Result<Self::Context> {
        self.0.prepare(source)
    }
    fn next_distribution(&self, ctx: &Self::Context, prefix: &[TokenId]) -> Vec<f64> {
        generation_step(self.0, ctx, prefix)
    }
}

#[test]
fn nbest_probabilities_hand_example() {
    let h = |score: f64| Hypothesis {
        ids: vec![4],
        logprob: 2.0 * score,
        score,
        status: HypStatus::Finished,
    };
    let p = nbest_selection_probs(&[h(0.0), h(-(2f64.ln()))]).unwrap();
    assert!(close(&p, &[2.0 / 3.0, 1.0 / 3.0]));
    assert!(nbest_selection_probs(&[]).is_err());
}

#[test]
fn reductions_between_strategies() {
    let m = small_model(11);
    let src = [4u32, 5, 6];
    let cap = LengthCap::fixed(12);
    let run = |spec: GeneratorSpec, seed: u64| {
        let mut r = rng::seeded(seed);
        generate(&m, &src, &spec.with_max_len(cap), &mut r).unwrap()
    };
    for seed in 0..30 {
        let s = run(GeneratorSpec::sample(), seed);
        assert_eq!(run(GeneratorSpec::restricted(0.0), seed), s);
        assert_eq!(run(GeneratorSpec::top_k(9), seed), s);
        assert_eq!(run(GeneratorSpec::nbest(1), seed), run(GeneratorSpec::beam(1), seed));
    }
    let g = run(GeneratorSpec::greedy(), 0);
    if g.is_finished() {
        assert_eq!(run(GeneratorSpec::beam(1), 0), g);
    }
    assert_eq!(run(GeneratorSpec::top_k(1), 5).ids, g.ids);
}

#[test]
fn uniform_model_samples_stop_or_truncate() {
    let m = UniformModel { vocab: 6 };
    let mut r = rng::seeded(2);
    let spec = GeneratorSpec::sample().with_max_len(LengthCap::fixed(3));
    for _ in 0..200 {
        let h = generate(&m, &[4], &spec, &mut r).unwrap();
        assert!(!h.ids.is_empty() && h.ids.len() <= 3);
        assert!(h.ids.iter().all(|&t| t == 2 || t >= 4) && !h.ids.contains(&EOS));
        if h.status == HypStatus::Truncated {
            assert_eq!(h.ids.len(), 3);
        }
    }
}

#[test]
fn length_cap_formula() {
    let c = LengthCap::default();
    assert_eq!(c.max_len(4), 11);
    assert_eq!(c.max_len(3), 10);
    assert_eq!(LengthCap::fixed(7).max_len(100), 7);
}

#[test]
fn parse_strategies() {
    assert_eq!(GeneratorSpec::parse_strategy("beam").unwrap().beam_size, 5);
    assert_eq!(GeneratorSpec::parse_strategy("beam:3").unwrap().beam_size, 3);
    assert_eq!(GeneratorSpec::parse_strategy("topk:10").unwrap().k, 10);
    assert_eq!(GeneratorSpec::parse_strategy("nbest:50").unwrap().nbest, 50);
    let r = GeneratorSpec::parse_strategy("restricted:0.1").unwrap();
    assert_eq!((r.strategy, r.tau), (super::Strategy::RestrictedSample, 0.1));
    for bad in ["", "beam:0", "topk", "nbest:x", "magic", "sample:3"] {
        assert!(GeneratorSpec::parse_strategy(bad).is_err(), "{bad}");
    }
    for s in ["greedy", "beam:4", "sample", "topk:3", "restricted:0.25", "nbest:7"] {
        assert_eq!(GeneratorSpec::parse_strategy(s).unwrap().label(), s);
    }
}

#[test]
fn spec_json_round_trip() {
    let spec = GeneratorSpec {
        renorm: RenormMode::SoftmaxOverProbs,
        seed: 99,
        ..GeneratorSpec::restricted(0.3)
    };
    let text = serde_json::to_string(&spec).unwrap();
    let back: GeneratorSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(back, spec);
}

proptest! {
    #[test]
    fn restricted_filter_is_a_distribution(
        raw in prop::collection::vec(0.0f64..1.0, 1..12),
        tau in 0.0f64..0.4999,
    ) {
        let z: f64 = raw.iter().sum();
        prop_assume!(z > 1e-9);
        let d: Vec<f64> = raw.iter().map(|x| x / z).collect();
        for mode in [RenormMode::L1, RenormMode::SoftmaxOverProbs] {
            let out = step_filter_renormalize(&d, tau, mode).unwrap();
            prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (o, p) in out.iter().zip(&d) {
                prop_assert!(*o >= 0.0);
                if *o > 0.0 && out.iter().filter(|&&x| x > 0.0).count() > 1 {
                    prop_assert!(*p >= tau);
                }
            }
            // the argmax always survives
            prop_assert!(out[argmax(&d) as usize] > 0.0);
        }
    }

    #[test]
    fn generated_outputs_are_valid(seed in 0u64..200, strategy in 0usize..6) {
        let m = small_model(seed % 7);
        let spec = [
            GeneratorSpec::greedy(),
            GeneratorSpec::beam(3),
            GeneratorSpec::sample(),
            GeneratorSpec::top_k(3),
            GeneratorSpec::restricted(0.1),
            GeneratorSpec::nbest(4),
        ][strategy].clone();
        let mut r = rng::seeded(seed);
        let h = generate(&m, &[4, 5], &spec, &mut r).unwrap();
        prop_assert!(!h.ids.is_empty());
        prop_assert!(h.ids.len() <= spec.max_len.max_len(2));
        prop_assert!(h.ids.iter().all(|&t| t != PAD && t != BOS && t != UNK && t != EOS && (t as usize) < 9));
        prop_assert!(h.logprob <= 0.0);
    }
}
