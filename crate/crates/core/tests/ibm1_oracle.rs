//! IBM-1 EM checked against an EM that enumerates every alignment.

use std::collections::{BTreeMap, BTreeSet};

use btlab_core::corpus::{ParallelCorpus, Vocabulary};
use btlab_core::ibm1::{train_ibm1, TargetWord};

type Table = BTreeMap<(TargetWord, u32), f64>;

/// One EM iteration over explicit alignment vectors `a_j in 0..=l`, where
/// position 0 is NULL. Returns the new table and the log-likelihood of the
/// old one (with the uniform alignment prior `1/(l+1)` per source word).
fn brute_force_step(pairs: &[(Vec<u32>, Vec<u32>)], t: &Table) -> (Table, f64) {
    let mut counts: Table = BTreeMap::new();
    let mut ll = 0.0;
    for (f, e) in pairs {
        let es: Vec<TargetWord> = std::iter::once(None).chain(e.iter().map(|&w| Some(w))).collect();
        let m = f.len();
        let width = es.len();
        let total = width.pow(m as u32);
        let mut alignments = Vec::with_capacity(total);
        let mut z = 0.0;
        for code in 0..total {
            let mut a = Vec::with_capacity(m);
            let mut c = code;
            for _ in 0..m {
                a.push(c % width);
                c /= width;
            }
            let p: f64 = (0..m).map(|j| t[&(es[a[j]], f[j])]).product();
            z += p;
            alignments.push((a, p));
        }
        ll += (z / (width as f64).powi(m as i32)).ln();
        for (a, p) in alignments {
            for j in 0..m {
                *counts.entry((es[a[j]], f[j])).or_default() += p / z;
            }
        }
    }
    let mut totals: BTreeMap<TargetWord, f64> = BTreeMap::new();
    for (&(e, _), &c) in &counts {
        *totals.entry(e).or_default() += c;
    }
    let mut next = t.clone();
    for (k, v) in next.iter_mut() {
        *v = counts.get(k).copied().unwrap_or(0.0) / totals[&k.0];
    }
    (next, ll)
}

fn brute_force(pairs: &[(Vec<u32>, Vec<u32>)], iterations: usize) -> (Table, Vec<f64>) {
    let fs: BTreeSet<u32> = pairs.iter().flat_map(|p| p.0.iter().copied()).collect();
    let es: BTreeSet<TargetWord> = std::iter::once(None)
        .chain(pairs.iter().flat_map(|p| p.1.iter().map(|&w| Some(w))))
        .collect();
    let mut t: Table = BTreeMap::new();
    for &e in &es {
        for &f in &fs {
            t.insert((e, f), 1.0 / fs.len() as f64);
        }
    }
    let mut lls = Vec::new();
    for _ in 0..iterations {
        let (next, ll) = brute_force_step(pairs, &t);
        lls.push(ll);
        t = next;
    }
    (t, lls)
}

fn toy() -> (ParallelCorpus, Vocabulary, Vocabulary) {
    let src_lines = ["das Haus", "das Buch", "ein Buch"];
    let tgt_lines = ["the house", "the book", "a book"];
    let sv = Vocabulary::build(src_lines, 1).unwrap();
    let tv = Vocabulary::build(tgt_lines, 1).unwrap();
    let corpus = ParallelCorpus::from_id_pairs(
        src_lines
            .iter()
            .zip(tgt_lines)
            .map(|(s, t)| (sv.encode(s), tv.encode(t))),
    )
    .unwrap();
    (corpus, sv, tv)
}

fn id_pairs(c: &ParallelCorpus) -> Vec<(Vec<u32>, Vec<u32>)> {
    c.pairs()
        .iter()
        .map(|p| (p.source.ids().to_vec(), p.target.ids().to_vec()))
        .collect()
}

#[test]
fn brute_force_oracle_reaches_das_the() {
    let (corpus, sv, tv) = toy();
    let (t, lls) = brute_force(&id_pairs(&corpus), 20);
    let das = sv.id("das").unwrap();
    let the = tv.id("the").unwrap();
    assert!(t[&(Some(the), das)] > 0.99, "{}", t[&(Some(the), das)]);
    assert!(lls.windows(2).all(|w| w[1] >= w[0] - 1e-12));
}

#[test]
fn em_matches_brute_force_every_iteration() {
    let (corpus, sv, tv) = toy();
    let pairs = id_pairs(&corpus);
    for iterations in [1, 2, 5, 20] {
        let (oracle, oracle_ll) = brute_force(&pairs, iterations);
        let ours = train_ibm1(&corpus, iterations).unwrap();
        for (&(e, f), &p) in &oracle {
            assert!((ours.table.prob(e, f) - p).abs() < 1e-12, "t({f}|{e:?}) after {iterations}");
        }
        for (a, b) in ours.log_likelihood.iter().zip(&oracle_ll) {
            assert!((a - b).abs() < 1e-9);
        }
    }
    let ours = train_ibm1(&corpus, 20).unwrap();
    let t = ours.table.prob(tv.id("the"), sv.id("das").unwrap());
    assert!(t > 0.99);
}

#[test]
fn em_matches_brute_force_on_uneven_lengths() {
    let corpus = ParallelCorpus::from_id_pairs([
        (vec![4, 5, 6], vec![4, 5]),
        (vec![5], vec![6, 4, 7]),
        (vec![6, 6, 4], vec![5, 7]),
        (vec![7, 4], vec![4]),
    ])
    .unwrap();
    let pairs = id_pairs(&corpus);
    let (oracle, oracle_ll) = brute_force(&pairs, 15);
    let ours = train_ibm1(&corpus, 15).unwrap();
    for (&(e, f), &p) in &oracle {
        assert!((ours.table.prob(e, f) - p).abs() < 1e-12);
    }
    for (a, b) in ours.log_likelihood.iter().zip(&oracle_ll) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!(ours.log_likelihood.windows(2).all(|w| w[1] >= w[0] - 1e-12));
}
