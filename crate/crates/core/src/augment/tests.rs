use super::*;
use crate::decode::LengthCap;
use crate::seqmodel::ArchConfig;

fn arch() -> ArchConfig {
    ArchConfig {
        embed_dim: 6,
        hidden_dim: 8,
        max_positions: 16,
        attention: true,
    }
}

fn model() -> SeqModel {
    SeqModel::with_sizes(arch(), 9, 10, 21).unwrap()
}

fn mono() -> MonoCorpus {
    MonoCorpus::new(
        [vec![4u32, 5], vec![6, 7, 8], vec![4, 5], vec![8]]
            .into_iter()
            .map(|v| Sentence::new(v).unwrap())
            .collect(),
    )
}

fn spec(s: &str) -> GeneratorSpec {
    GeneratorSpec::parse_strategy(s).unwrap().with_max_len(LengthCap::fixed(6))
}

#[test]
fn deterministic_strategy_with_several_samples_is_rejected() {
    for s in ["beam", "greedy"] {
        assert!(matches!(
            generate_pseudo_corpus(&model(), &mono(), &spec(s), 3, 1),
            Err(Error::DeterministicDuplicates { n: 3, .. })
        ));
    }
    assert!(generate_pseudo_corpus(&model(), &mono(), &spec("sample"), 0, 1).is_err());
}

#[test]
fn pseudo_corpus_shape_and_provenance() {
    let m = model();
    let pc = generate_pseudo_corpus(&m, &mono(), &spec("sample"), 3, 5).unwrap();
    assert_eq!(pc.len(), 4);
    assert_eq!(pc.n(), 3);
    assert_eq!(pc.provenance.generator_hash, m.fingerprint());
    assert_eq!(pc.provenance.seed, 5);
    for (e, t) in pc.entries.iter().zip(mono().sentences()) {
        assert_eq!(&e.target, t);
        assert_eq!(e.sources.len(), 3);
        for s in &e.sources {
            assert!(!s.ids.is_empty() && s.ids.len() <= 6);
            assert!(s.ids.iter().all(|&t| (t as usize) < 10 && t > 3));
        }
    }
    assert_eq!(pc.to_parallel().len(), 12);
}

#[test]
fn generation_matches_per_sentence_streams() {
    let m = model();
    for s in ["sample", "restricted:0.1", "nbest:5", "beam:3", "topk:4"] {
        let sp = spec(s);
        let n = if sp.strategy.is_deterministic() { 1 } else { 2 };
        let pc = generate_pseudo_corpus(&m, &mono(), &sp, n, 8).unwrap();
        let base = rng::derive(8, GENERATION_TAG);
        for (i, e) in pc.entries.iter().enumerate() {
            for k in 0..n {
                let mut r = rng::stream(base, (i * n + k) as u64);
                let h = generate(&m, e.target.ids(), &sp, &mut r).unwrap();
                assert_eq!(h.ids, e.sources[k].ids, "{s}");
                assert_eq!(h.status, e.sources[k].status);
            }
        }
    }
}

#[test]
fn generation_is_independent_of_thread_count() {
    let m = model();
    let sp = spec("nbest:5");
    let a = generate_pseudo_corpus(&m, &mono(), &sp, 2, 3).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| generate_pseudo_corpus(&m, &mono(), &sp, 2, 3).unwrap());
    assert_eq!(a, b);
    let c = generate_pseudo_corpus(&m, &mono(), &sp, 2, 4).unwrap();
    assert_ne!(a, c);
}

#[test]
fn save_load_round_trip() {
    let src = Vocabulary::from_tokens(["a", "b", "c", "d", "e"]).unwrap();
    let tgt = Vocabulary::from_tokens(["p", "q", "r", "s", "t", "u"]).unwrap();
    let m = SeqModel::new(arch(), &tgt, &src, 2).unwrap();
    let mono = MonoCorpus::new(vec![Sentence::new(vec![4, 5]).unwrap(), Sentence::new(vec![9]).unwrap()]);
    let mut pc = generate_pseudo_corpus(&m, &mono, &spec("sample"), 2, 1).unwrap();
    pc.entries[1].sources[0].status = HypStatus::Truncated;
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("bt");
    pc.save(&prefix, &src, &tgt).unwrap();
    let (t, s, j) = PseudoCorpus::paths(&prefix, 2);
    assert!(t.exists() && s.iter().all(|p| p.exists()) && j.exists());
    assert!(s[1].to_string_lossy().ends_with("bt.src.1"));
    let back = PseudoCorpus::load(&prefix, &src, &tgt).unwrap();
    assert_eq!(back, pc);
    assert_eq!(back.flagged_count(), 1);
    let kept = back.drop_flagged();
    assert_eq!(kept.len(), 1);
    assert_eq!(kept.entries[0].target.ids(), &[4, 5]);
}

#[test]
fn training_view_weights_sum_to_target_count() {
    let m = model();
    let bi = ParallelCorpus::from_id_pairs([(vec![4], vec![5]), (vec![5, 6], vec![7])]).unwrap();
    let pc = generate_pseudo_corpus(&m, &mono(), &spec("sample"), 4, 2).unwrap();
    let mixed = MixedTrainingSet::new(bi, pc);
    let v0 = build_training_view(&mixed, ViewMode::Static, 0, 1).unwrap();
    assert_eq!(v0.len(), 2 + 16);
    let total: f64 = v0.iter().map(|p| p.weight).sum();
    assert!((total - (2.0 + 4.0)).abs() < 1e-12);
    assert_eq!(v0.iter().filter(|p| p.weight == 0.25).count(), 16);
    assert_eq!(build_training_view(&mixed, ViewMode::Static, 0, 1).unwrap(), v0);
    let v1 = build_training_view(&mixed, ViewMode::Static, 1, 1).unwrap();
    assert_ne!(v0, v1);
    let key = |v: &[WeightedPair]| {
        let mut k: Vec<_> = v.iter().map(|p| (p.source.ids().to_vec(), p.target.ids().to_vec())).collect();
        k.sort();
        k
    };
    assert_eq!(key(&v0), key(&v1));
}

#[test]
fn regenerated_view_keeps_targets_and_changes_sources() {
    let m = model();
    let bi = ParallelCorpus::from_id_pairs([(vec![4], vec![5])]).unwrap();
    let pc = generate_pseudo_corpus(&m, &mono(), &spec("sample"), 1, 2).unwrap();
    let mixed = MixedTrainingSet::new(bi, pc);
    let mode = ViewMode::RegenerateEachEpoch { generator: &m };
    let a = build_training_view(&mixed, mode, 0, 1).unwrap();
    let b = build_training_view(&mixed, mode, 1, 1).unwrap();
    assert_eq!(a, build_training_view(&mixed, mode, 0, 1).unwrap());
    let targets = |v: &[WeightedPair]| {
        let mut t: Vec<_> = v.iter().map(|p| p.target.ids().to_vec()).collect();
        t.sort();
        t
    };
    assert_eq!(targets(&a), targets(&b));
    let sources = |v: &[WeightedPair]| {
        let mut t: Vec<_> = v.iter().map(|p| p.source.ids().to_vec()).collect();
        t.sort();
        t
    };
    assert_ne!(sources(&a), sources(&b));
}

#[test]
fn split_is_seeded_and_complete() {
    let full = ParallelCorpus::from_id_pairs((0..50u32).map(|i| (vec![4 + i % 5], vec![4 + i % 7, 4 + i % 3]))).unwrap();
    let (a, b) = split_corpus(&full, 0.2, 3).unwrap();
    assert_eq!((a.len(), b.len()), (10, 40));
    assert_eq!(split_corpus(&full, 0.2, 3).unwrap(), (a.clone(), b.clone()));
    let mut all: Vec<_> = a.concat(&b).pairs().to_vec();
    let mut orig = full.pairs().to_vec();
    all.sort_by(|x, y| (x.source.ids(), x.target.ids()).cmp(&(y.source.ids(), y.target.ids())));
    orig.sort_by(|x, y| (x.source.ids(), x.target.ids()).cmp(&(y.source.ids(), y.target.ids())));
    assert_eq!(all, orig);
    assert!(split_corpus(&full, 1.0, 3).is_err());
    assert!(split_corpus(&full, 0.001, 3).is_err());
}

#[test]
fn row_specs_parse() {
    let rows = RowSpec::standard_rows();
    let names: Vec<_> = rows.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["beam", "sample", "sample-nols", "restricted:0.1", "nbest:50"]);
    assert!(rows[2].without_label_smoothing);
    assert_eq!(rows[2].spec.strategy, Strategy::Sample);
    assert!(RowSpec::parse_list("beam,bogus").is_err());
}
