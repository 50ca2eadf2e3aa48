//! Corpus and model diagnostics: perplexity, top-N cumulative probability
//! mass under forced decoding, and corpus BLEU.

use std::collections::HashMap;
use std::hash::Hash;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ParallelCorpus, EOS};
use crate::error::{Error, Result};
use crate::seqmodel::StepModel;

pub const MAX_NGRAM: usize = 4;

/// Per-sentence `(sum of log-probs, steps)` of the gold targets, EOS included.
fn forced_logprobs<M: StepModel>(model: &M, corpus: &ParallelCorpus) -> Result<Vec<(f64, usize)>> {
    corpus
        .pairs()
        .par_iter()
        .map(|p| {
            let ctx = model.prepare(p.source.ids())?;
            let t = p.target.ids();
            let mut lp = 0.0;
            for j in 0..=t.len() {
                let gold = if j < t.len() { t[j] } else { EOS };
                lp += model.next_distribution(&ctx, &t[..j])[gold as usize].ln();
            }
            Ok((lp, t.len() + 1))
        })
        .collect()
}

/// `exp(-sum log p / sum (I_s + 1))` over the corpus.
pub fn corpus_perplexity<M: StepModel>(model: &M, corpus: &ParallelCorpus) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let per = forced_logprobs(model, corpus)?;
    let (lp, n) = per
        .iter()
        .fold((0.0, 0usize), |(a, b), &(lp, n)| (a + lp, b + n));
    Ok((-lp / n as f64).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassCurve {
    /// `(N, mean cumulative probability of the N most likely tokens)`.
    pub points: Vec<(usize, f64)>,
}

impl MassCurve {
    pub fn mass_at(&self, n: usize) -> Option<f64> {
        self.points.iter().find(|(k, _)| *k == n).map(|(_, m)| *m)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,mass\n");
        for (n, m) in &self.points {
            s.push_str(&format!("{n},{m}\n"));
        }
        s
    }
}

/// Averages, over every forced-decoding position of the corpus, the summed
/// probability of the `N` most likely next tokens.
pub fn cumulative_mass_curve<M: StepModel>(
    model: &M,
    corpus: &ParallelCorpus,
    ns: &[usize],
) -> Result<MassCurve> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if ns.is_empty() || ns.contains(&0) || ns.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("Ns must be ascending and >= 1".into()));
    }
    let per: Vec<(Vec<f64>, usize)> = corpus
        .pairs()
        .par_iter()
        .map(|p| {
            let ctx = model.prepare(p.source.ids())?;
            let t = p.target.ids();
            let mut sums = vec![0.0; ns.len()];
            for j in 0..=t.len() {
                let mut d = model.next_distribution(&ctx, &t[..j]);
                d.sort_by(|a, b| b.total_cmp(a));
                let mut acc = 0.0;
                let mut cum = Vec::with_capacity(d.len());
                for v in d {
                    acc += v;
                    cum.push(acc);
                }
                for (s, &n) in sums.iter_mut().zip(ns) {
                    *s += cum[n.min(cum.len()) - 1];
                }
            }
            Ok((sums, t.len() + 1))
        })
        .collect::<Result<_>>()?;
    let mut totals = vec![0.0; ns.len()];
    let mut positions = 0usize;
    for (sums, n) in per {
        for (t, s) in totals.iter_mut().zip(sums) {
            *t += s;
        }
        positions += n;
    }
    Ok(MassCurve {
        points: ns
            .iter()
            .zip(totals)
            .map(|(&n, t)| (n, t / positions as f64))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    /// In `[0, 100]`.
    pub score: f64,
    pub precisions: [f64; MAX_NGRAM],
    pub matches: [usize; MAX_NGRAM],
    pub totals: [usize; MAX_NGRAM],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

fn ngram_counts<T: Hash + Eq>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Unsmoothed corpus BLEU-4 with clipped n-gram counts and brevity penalty.
/// Any zero precision gives a score of 0.
pub fn corpus_bleu<T, H, R>(hypotheses: &[H], references: &[R]) -> Result<BleuReport>
where
    T: Hash + Eq,
    H: AsRef<[T]>,
    R: AsRef<[T]>,
{
    if hypotheses.len() != references.len() {
        return Err(Error::InvalidArgument(format!(
            "{} hypotheses vs {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if hypotheses.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut matches = [0usize; MAX_NGRAM];
    let mut totals = [0usize; MAX_NGRAM];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hypotheses.iter().zip(references) {
        let (h, r) = (h.as_ref(), r.as_ref());
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=MAX_NGRAM {
            let hc = ngram_counts(h, n);
            let rc = ngram_counts(r, n);
            totals[n - 1] += h.len().saturating_sub(n - 1);
            matches[n - 1] += hc
                .iter()
                .map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0)))
                .sum::<usize>();
        }
    }
    let mut precisions = [0.0; MAX_NGRAM];
    for n in 0..MAX_NGRAM {
        if totals[n] > 0 {
            precisions[n] = matches[n] as f64 / totals[n] as f64;
        }
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    let score = if precisions.iter().any(|&p| p == 0.0) || brevity_penalty == 0.0 {
        0.0
    } else {
        let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_NGRAM as f64;
        100.0 * brevity_penalty * mean_log.exp()
    };
    Ok(BleuReport {
        score,
        precisions,
        matches,
        totals,
        brevity_penalty,
        hyp_len,
        ref_len,
    })
}
