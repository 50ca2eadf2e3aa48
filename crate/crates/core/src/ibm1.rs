//! IBM Model 1 lexical translation tables trained by EM, and the
//! unigram-weighted translation entropy of a table.
//!
//! Tables are `t(f | e)`: `e` is a target word (or NULL) and `f` a source
//! word. Every target sentence gets a NULL word prepended.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ParallelCorpus, TokenId, Vocabulary};
use crate::error::{Error, Result};

/// Row key of a table: `None` is the NULL word.
pub type TargetWord = Option<TokenId>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ibm1Table {
    /// Source words the table is defined over.
    source_words: Vec<TokenId>,
    /// `e -> [(f, t(f|e))]`, sorted by `f`.
    rows: BTreeMap<TargetWord, Vec<(TokenId, f64)>>,
}

impl Ibm1Table {
    /// The EM starting point: `t(f|e) = 1/|V_f|` for every pair, where `V_f`
    /// is the set of source words in the corpus.
    pub fn uniform(corpus: &ParallelCorpus) -> Result<Self> {
        let (targets, sources) = word_sets(corpus)?;
        let u = 1.0 / sources.len() as f64;
        let row: Vec<(TokenId, f64)> = sources.iter().map(|&f| (f, u)).collect();
        let rows = std::iter::once(None)
            .chain(targets.into_iter().map(Some))
            .map(|e| (e, row.clone()))
            .collect();
        Ok(Self {
            source_words: sources,
            rows,
        })
    }

    pub fn source_words(&self) -> &[TokenId] {
        &self.source_words
    }

    pub fn rows(&self) -> &BTreeMap<TargetWord, Vec<(TokenId, f64)>> {
        &self.rows
    }

    pub fn prob(&self, e: TargetWord, f: TokenId) -> f64 {
        self.rows
            .get(&e)
            .and_then(|r| r.binary_search_by_key(&f, |&(k, _)| k).ok().map(|i| r[i].1))
            .unwrap_or(0.0)
    }

    /// `-sum_f t(f|e) ln t(f|e)` in nats.
    pub fn row_entropy(&self, e: TargetWord) -> Option<f64> {
        self.rows.get(&e).map(|r| {
            -r.iter()
                .filter(|(_, t)| *t > 0.0)
                .map(|(_, t)| t * t.ln())
                .sum::<f64>()
        })
    }

    /// TSV lines `e \t f \t t(f|e)`, rows in id order (NULL first), entries
    /// by descending probability.
    pub fn to_tsv(&self, target_vocab: &Vocabulary, source_vocab: &Vocabulary) -> String {
        let mut out = String::new();
        for (e, row) in &self.rows {
            let e_name = match e {
                None => "NULL",
                Some(id) => target_vocab.token(*id).unwrap_or("<unk>"),
            };
            let mut entries: Vec<&(TokenId, f64)> = row.iter().filter(|(_, t)| *t > 0.0).collect();
            entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for (f, t) in entries {
                let f_name = source_vocab.token(*f).unwrap_or("<unk>");
                out.push_str(&format!("{e_name}\t{f_name}\t{t}\n"));
            }
        }
        out
    }
}

fn word_sets(corpus: &ParallelCorpus) -> Result<(Vec<TokenId>, Vec<TokenId>)> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut targets: Vec<TokenId> = Vec::new();
    let mut sources: Vec<TokenId> = Vec::new();
    for p in corpus.pairs() {
        targets.extend_from_slice(p.target.ids());
        sources.extend_from_slice(p.source.ids());
    }
    targets.sort_unstable();
    targets.dedup();
    sources.sort_unstable();
    sources.dedup();
    Ok((targets, sources))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ibm1Training {
    pub table: Ibm1Table,
    /// Corpus log-likelihood `sum_s sum_j ln( sum_i t(f_j|e_i) / (I+1) )`
    /// under the parameters each EM iteration started from.
    pub log_likelihood: Vec<f64>,
}

impl Ibm1Training {
    pub fn metadata_json(&self) -> String {
        serde_json::json!({
            "iterations": self.log_likelihood.len(),
            "log_likelihood": self.log_likelihood,
            "source_words": self.table.source_words.len(),
            "target_rows": self.table.rows.len(),
        })
        .to_string()
    }

    pub fn save(
        &self,
        tsv_path: impl AsRef<Path>,
        meta_path: impl AsRef<Path>,
        target_vocab: &Vocabulary,
        source_vocab: &Vocabulary,
    ) -> Result<()> {
        let (tsv, meta) = (tsv_path.as_ref(), meta_path.as_ref());
        fs::write(tsv, self.table.to_tsv(target_vocab, source_vocab)).map_err(|e| Error::io(tsv, e))?;
        fs::write(meta, self.metadata_json()).map_err(|e| Error::io(meta, e))
    }
}

/// Runs `iterations` EM steps from the uniform table.
pub fn train_ibm1(corpus: &ParallelCorpus, iterations: usize) -> Result<Ibm1Training> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be >= 1".into()));
    }
    let (_, sources) = word_sets(corpus)?;

    // Index every co-occurring (e, f) cell once; NULL co-occurs with all f.
    let mut key_index: HashMap<(TargetWord, TokenId), usize> = HashMap::new();
    let mut keys: Vec<(TargetWord, TokenId)> = Vec::new();
    let mut cells: Vec<Vec<u32>> = Vec::with_capacity(corpus.len());
    for p in corpus.pairs() {
        let es: Vec<TargetWord> = std::iter::once(None)
            .chain(p.target.ids().iter().map(|&e| Some(e)))
            .collect();
        let mut idx = Vec::with_capacity(p.source.len() * es.len());
        for &f in p.source.ids() {
            for &e in &es {
                let k = *key_index.entry((e, f)).or_insert_with(|| {
                    keys.push((e, f));
                    keys.len() - 1
                });
                idx.push(k as u32);
            }
        }
        cells.push(idx);
    }

    let mut t = vec![1.0 / sources.len() as f64; keys.len()];
    let row_of: Vec<TargetWord> = keys.iter().map(|k| k.0).collect();
    let mut row_ids: BTreeMap<TargetWord, usize> = BTreeMap::new();
    for e in &row_of {
        let n = row_ids.len();
        row_ids.entry(*e).or_insert(n);
    }
    let key_row: Vec<usize> = row_of.iter().map(|e| row_ids[e]).collect();

    let n = corpus.len();
    let chunk = 256.max(n.div_ceil(32));
    let mut log_likelihood = Vec::with_capacity(iterations);

    for _ in 0..iterations {
        let parts: Vec<(f64, Vec<f64>)> = cells
            .par_chunks(chunk)
            .zip(corpus.pairs().par_chunks(chunk))
            .map(|(cs, ps)| {
                let mut counts = vec![0.0; keys.len()];
                let mut ll = 0.0;
                for (idx, p) in cs.iter().zip(ps) {
                    let width = p.target.len() + 1;
                    for row in idx.chunks(width) {
                        let den: f64 = row.iter().map(|&k| t[k as usize]).sum();
                        ll += (den / width as f64).ln();
                        for &k in row {
                            counts[k as usize] += t[k as usize] / den;
                        }
                    }
                }
                (ll, counts)
            })
            .collect();

        let mut counts = vec![0.0; keys.len()];
        let mut ll = 0.0;
        for (l, c) in parts {
            ll += l;
            for (a, b) in counts.iter_mut().zip(&c) {
                *a += b;
            }
        }
        log_likelihood.push(ll);

        let mut totals = vec![0.0; row_ids.len()];
        for (k, c) in counts.iter().enumerate() {
            totals[key_row[k]] += c;
        }
        for (k, tv) in t.iter_mut().enumerate() {
            *tv = counts[k] / totals[key_row[k]];
        }
    }

    let mut rows: BTreeMap<TargetWord, Vec<(TokenId, f64)>> = BTreeMap::new();
    for (k, &(e, f)) in keys.iter().enumerate() {
        rows.entry(e).or_default().push((f, t[k]));
    }
    for r in rows.values_mut() {
        r.sort_by_key(|&(f, _)| f);
    }
    Ok(Ibm1Training {
        table: Ibm1Table {
            source_words: sources,
            rows,
        },
        log_likelihood,
    })
}

/// `sum_e w(e) * H(t(.|e))` in nats; NULL is never weighted.
pub fn translation_entropy(table: &Ibm1Table, weights: &BTreeMap<TokenId, f64>) -> Result<f64> {
    let mut h = 0.0;
    for (&e, &w) in weights {
        if w == 0.0 {
            continue;
        }
        let row_h = table.row_entropy(Some(e)).ok_or_else(|| {
            Error::InvalidArgument(format!("target word {e} has no row in the table"))
        })?;
        h += w * row_h;
    }
    Ok(h)
}
