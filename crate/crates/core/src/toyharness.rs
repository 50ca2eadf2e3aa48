//! Synthetic noisy-channel translation tasks with a known inverse
//! translation distribution, and brute-force enumeration oracles.
//!
//! A task draws target sentences from a finite weighted set of templates
//! and produces each source sentence by translating every target token
//! independently through a per-token option table, optionally followed by
//! a fixed local reordering. `Pr(f | e)` is therefore exactly computable.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    MonoCorpus, ParallelCorpus, Sentence, SentencePair, TokenId, Vocabulary, EOS, PAD,
};
use crate::decode::{
    beam_search, generation_step, greedy, nbest_selection_probs, selection_distribution,
    GeneratorSpec, HypStatus, Strategy,
};
use crate::error::{Error, Result};
use crate::rng;
use crate::seqmodel::StepModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reorder {
    #[default]
    Identity,
    /// Swap the first two source positions.
    SwapFirstTwo,
}

impl Reorder {
    /// Target position that produces source position `j`.
    pub fn origin(self, j: usize, len: usize) -> usize {
        match self {
            Reorder::SwapFirstTwo if len >= 2 && j < 2 => 1 - j,
            _ => j,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub tokens: Vec<String>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToySizes {
    pub bilingual: usize,
    pub mono: usize,
    pub dev: usize,
}

impl Default for ToySizes {
    fn default() -> Self {
        Self {
            bilingual: 10_000,
            mono: 40_000,
            dev: 1_000,
        }
    }
}

/// JSON-serializable description of a toy task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub target_words: Vec<String>,
    pub source_words: Vec<String>,
    /// Target word -> `(source word, probability)` options.
    pub channel: BTreeMap<String, Vec<(String, f64)>>,
    pub templates: Vec<Template>,
    #[serde(default)]
    pub reorder: Reorder,
    #[serde(default)]
    pub sizes: ToySizes,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self::standard(200, 17)
    }
}

impl ToyConfig {
    /// Ten target words, eight source words, and `n_templates` target
    /// sentences of length 2-4 with Zipfian weights drawn from
    /// `grammar_seed`. Target word `t0` has the 0.6/0.3/0.1 option split.
    pub fn standard(n_templates: usize, grammar_seed: u64) -> Self {
        let target_words: Vec<String> = (0..10).map(|i| format!("t{i}")).collect();
        let source_words: Vec<String> = (0..8).map(|i| format!("s{i}")).collect();
        let opts: [&[(usize, f64)]; 10] = [
            &[(0, 0.6), (1, 0.3), (2, 0.1)],
            &[(1, 0.7), (3, 0.3)],
            &[(2, 1.0)],
            &[(3, 0.5), (4, 0.5)],
            &[(4, 0.8), (5, 0.2)],
            &[(5, 1.0)],
            &[(6, 0.6), (0, 0.4)],
            &[(7, 0.9), (6, 0.1)],
            &[(2, 0.5), (7, 0.3), (5, 0.2)],
            &[(3, 1.0)],
        ];
        let channel = target_words
            .iter()
            .zip(opts)
            .map(|(t, o)| {
                (
                    t.clone(),
                    o.iter().map(|&(s, p)| (source_words[s].clone(), p)).collect(),
                )
            })
            .collect();

        let mut r = rng::seeded(grammar_seed);
        let mut seen = std::collections::BTreeSet::new();
        let mut templates = Vec::with_capacity(n_templates);
        while templates.len() < n_templates {
            let len = r.random_range(2..=4);
            let toks: Vec<String> = (0..len)
                .map(|_| target_words[r.random_range(0..target_words.len())].clone())
                .collect();
            if seen.insert(toks.clone()) {
                let rank = templates.len();
                templates.push(Template {
                    tokens: toks,
                    weight: 1.0 / (rank + 1) as f64,
                });
            }
        }
        Self {
            target_words,
            source_words,
            channel,
            templates,
            reorder: Reorder::Identity,
            sizes: ToySizes::default(),
        }
    }

    /// A randomly generated grammar; see [`GrammarParams`].
    pub fn generated(g: &GrammarParams) -> Result<Self> {
        g.validate()?;
        let target_words: Vec<String> = (0..g.target_words).map(|i| format!("t{i}")).collect();
        let n_modes = g.target_words.div_ceil(g.mode_group);
        let mut source_words: Vec<String> = (0..n_modes).map(|i| format!("m{i}")).collect();
        source_words.extend((0..g.alt_words).map(|i| format!("a{i}")));

        let mut r = rng::seeded(g.seed);
        let mut channel = BTreeMap::new();
        for (i, t) in target_words.iter().enumerate() {
            let mut opts = vec![(format!("m{}", i / g.mode_group), g.mode_prob)];
            let alt = r.random_range(0..g.alt_words);
            opts.push((format!("a{alt}"), 1.0 - g.mode_prob - g.tail_prob));
            if g.tail_prob > 0.0 {
                let tail = loop {
                    let k = r.random_range(0..g.alt_words);
                    if k != alt {
                        break k;
                    }
                };
                opts.push((format!("a{tail}"), g.tail_prob));
            }
            channel.insert(t.clone(), opts);
        }

        // token ranks follow a Zipf law, as do template weights
        let token_cdf: Vec<f64> = {
            let w: Vec<f64> = (1..=g.target_words).map(|k| (k as f64).powf(-g.zipf)).collect();
            let z: f64 = w.iter().sum();
            let mut acc = 0.0;
            w.iter()
                .map(|x| {
                    acc += x / z;
                    acc
                })
                .collect()
        };
        let mut seen = std::collections::BTreeSet::new();
        let mut templates = Vec::with_capacity(g.templates);
        while templates.len() < g.templates {
            let len = r.random_range(g.min_len..=g.max_len);
            let toks: Vec<String> = (0..len)
                .map(|_| {
                    let u: f64 = r.random();
                    let k = token_cdf.partition_point(|&c| c <= u).min(g.target_words - 1);
                    target_words[k].clone()
                })
                .collect();
            if seen.insert(toks.clone()) {
                let rank = templates.len() + 1;
                templates.push(Template {
                    tokens: toks,
                    weight: (rank as f64).powf(-g.zipf),
                });
            }
        }
        Ok(Self {
            target_words,
            source_words,
            channel,
            templates,
            reorder: Reorder::Identity,
            sizes: ToySizes::default(),
        })
    }

    pub fn with_sizes(mut self, bilingual: usize, mono: usize, dev: usize) -> Self {
        self.sizes = ToySizes {
            bilingual,
            mono,
            dev,
        };
        self
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn vocabularies(&self) -> Result<(Vocabulary, Vocabulary)> {
        Ok((
            Vocabulary::from_tokens(self.source_words.iter().cloned())?,
            Vocabulary::from_tokens(self.target_words.iter().cloned())?,
        ))
    }
}

/// Parameters of [`ToyConfig::generated`].
///
/// Consecutive target words `t<i>` form groups of `mode_group` that share
/// their most likely source word `m<k>` (probability `mode_prob`). Each
/// target word also has one alternative and one tail option drawn from a
/// separate pool of `alt_words` source words `a<k>`. Templates have
/// `min_len..=max_len` tokens drawn from a Zipf law over target words and
/// Zipfian weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrammarParams {
    pub target_words: usize,
    pub mode_group: usize,
    pub alt_words: usize,
    pub mode_prob: f64,
    pub tail_prob: f64,
    pub templates: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub zipf: f64,
    pub seed: u64,
}

impl Default for GrammarParams {
    fn default() -> Self {
        Self {
            target_words: 40,
            mode_group: 2,
            alt_words: 8,
            mode_prob: 0.7,
            tail_prob: 0.04,
            templates: 2000,
            min_len: 3,
            max_len: 7,
            zipf: 1.0,
            seed: 17,
        }
    }
}

impl GrammarParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.target_words == 0 || self.templates == 0 || self.min_len == 0 || self.min_len > self.max_len {
            return bad("grammar needs words, templates and 1 <= min_len <= max_len");
        }
        if self.mode_group == 0 || self.alt_words < 2 {
            return bad("grammar needs mode groups of >= 1 word and >= 2 alternative words");
        }
        if !(self.mode_prob > 0.0 && self.tail_prob >= 0.0 && self.mode_prob + self.tail_prob < 1.0) {
            return bad("mode and tail probabilities must leave room for the alternative");
        }
        let possible = (self.target_words as f64).powi(self.max_len as i32);
        if possible < 2.0 * self.templates as f64 {
            return bad("too many templates for the vocabulary and lengths");
        }
        Ok(())
    }
}

/// Compiled channel over token ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyChannel {
    pub reorder: Reorder,
    /// Target id -> `(source id, probability)` options.
    pub options: BTreeMap<TokenId, Vec<(TokenId, f64)>>,
    pub templates: Vec<(Sentence, f64)>,
    template_cdf: Vec<f64>,
}

impl ToyChannel {
    pub fn compile(cfg: &ToyConfig, src: &Vocabulary, tgt: &Vocabulary) -> Result<Self> {
        let lookup = |v: &Vocabulary, w: &str| {
            v.id(w)
                .ok_or_else(|| Error::InvalidArgument(format!("word {w:?} not in toy vocabulary")))
        };
        let mut options = BTreeMap::new();
        for (e, opts) in &cfg.channel {
            let total: f64 = opts.iter().map(|o| o.1).sum();
            if (total - 1.0).abs() > 1e-9 || opts.iter().any(|o| o.1 <= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "channel options for {e:?} must be positive and sum to 1"
                )));
            }
            let ids = opts
                .iter()
                .map(|(f, p)| Ok((lookup(src, f)?, *p)))
                .collect::<Result<Vec<_>>>()?;
            options.insert(lookup(tgt, e)?, ids);
        }
        if cfg.templates.is_empty() {
            return Err(Error::InvalidArgument("toy grammar has no templates".into()));
        }
        let mut templates = Vec::new();
        for t in &cfg.templates {
            let ids = t
                .tokens
                .iter()
                .map(|w| {
                    let id = lookup(tgt, w)?;
                    if !options.contains_key(&id) {
                        return Err(Error::InvalidArgument(format!("no channel options for {w:?}")));
                    }
                    Ok(id)
                })
                .collect::<Result<Vec<_>>>()?;
            if !(t.weight > 0.0) {
                return Err(Error::InvalidArgument("template weights must be > 0".into()));
            }
            templates.push((Sentence::new(ids)?, t.weight));
        }
        let z: f64 = templates.iter().map(|t| t.1).sum();
        let mut acc = 0.0;
        let template_cdf = templates
            .iter()
            .map(|t| {
                acc += t.1 / z;
                acc
            })
            .collect();
        Ok(Self {
            reorder: cfg.reorder,
            options,
            templates,
            template_cdf,
        })
    }

    pub fn sample_target<R: Rng + ?Sized>(&self, rng: &mut R) -> Sentence {
        let u: f64 = rng.random();
        let i = self
            .template_cdf
            .partition_point(|&c| c <= u)
            .min(self.templates.len() - 1);
        self.templates[i].0.clone()
    }

    pub fn sample_source<R: Rng + ?Sized>(&self, target: &Sentence, rng: &mut R) -> Sentence {
        let t = target.ids();
        let ids = (0..t.len())
            .map(|j| {
                let opts = &self.options[&t[self.reorder.origin(j, t.len())]];
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(f, p) in opts {
                    acc += p;
                    if u < acc {
                        return f;
                    }
                }
                opts[opts.len() - 1].0
            })
            .collect();
        Sentence::new(ids).expect("target is non-empty")
    }

    /// Exact `Pr(f | e)`.
    pub fn prob(&self, source: &[TokenId], target: &[TokenId]) -> f64 {
        if source.len() != target.len() {
            return 0.0;
        }
        (0..source.len())
            .map(|j| {
                let e = target[self.reorder.origin(j, target.len())];
                self.options
                    .get(&e)
                    .and_then(|o| o.iter().find(|x| x.0 == source[j]).map(|x| x.1))
                    .unwrap_or(0.0)
            })
            .product()
    }
}

#[derive(Debug, Clone)]
pub struct ToyTask {
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    pub bilingual: ParallelCorpus,
    pub mono: MonoCorpus,
    /// The monolingual targets with their true sources.
    pub held_out: ParallelCorpus,
    pub dev: ParallelCorpus,
    pub channel: ToyChannel,
}

impl ToyTask {
    /// Bilingual and held-out pairs together.
    pub fn full_bilingual(&self) -> ParallelCorpus {
        self.bilingual.concat(&self.held_out)
    }
}

/// Samples a toy task; identical seeds give identical corpora.
pub fn make_toy_task(cfg: &ToyConfig, seed: u64) -> Result<ToyTask> {
    let s = &cfg.sizes;
    if s.bilingual == 0 || s.mono == 0 || s.dev == 0 {
        return Err(Error::InvalidArgument("toy corpus sizes must be >= 1".into()));
    }
    let (src_vocab, tgt_vocab) = cfg.vocabularies()?;
    let channel = ToyChannel::compile(cfg, &src_vocab, &tgt_vocab)?;
    let draw = |stream: u64, n: usize| {
        let mut r = rng::stream(seed, stream);
        let pairs = (0..n)
            .map(|_| {
                let target = channel.sample_target(&mut r);
                let source = channel.sample_source(&target, &mut r);
                SentencePair { source, target }
            })
            .collect();
        ParallelCorpus::new(pairs)
    };
    let bilingual = draw(1, s.bilingual);
    let held_out = draw(2, s.mono);
    let dev = draw(3, s.dev);
    let mono = held_out.targets();
    Ok(ToyTask {
        src_vocab,
        tgt_vocab,
        bilingual,
        mono,
        held_out,
        dev,
        channel,
    })
}

/// Exact distribution over complete outputs of a generator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnumeratedDistribution {
    /// Outputs that ended in EOS.
    pub finished: BTreeMap<Vec<TokenId>, f64>,
    /// Outputs cut at the length cap (or unfinished beam results).
    pub truncated: BTreeMap<Vec<TokenId>, f64>,
    /// Best finished output by length-normalized log-probability, with its
    /// score; only filled by [`enumerate_model_distribution`].
    pub argmax: Option<(Vec<TokenId>, f64)>,
}

impl EnumeratedDistribution {
    /// Total mass on finished outputs.
    pub fn coverage(&self) -> f64 {
        self.finished.values().sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.coverage() + self.truncated.values().sum::<f64>()
    }

    pub fn prob(&self, ids: &[TokenId], finished: bool) -> f64 {
        let m = if finished {
            &self.finished
        } else {
            &self.truncated
        };
        m.get(ids).copied().unwrap_or(0.0)
    }

    /// Total variation distance to empirical counts keyed by
    /// `(ids, finished)`.
    pub fn tv_distance(&self, counts: &BTreeMap<(Vec<TokenId>, bool), usize>) -> f64 {
        let n: usize = counts.values().sum();
        let mut tv = 0.0;
        for ((ids, fin), &c) in counts {
            tv += (c as f64 / n as f64 - self.prob(ids, *fin)).abs();
        }
        for (ids, &p) in &self.finished {
            if !counts.contains_key(&(ids.clone(), true)) {
                tv += p;
            }
        }
        for (ids, &p) in &self.truncated {
            if !counts.contains_key(&(ids.clone(), false)) {
                tv += p;
            }
        }
        tv / 2.0
    }
}

pub const ENUMERATION_LIMIT: u64 = 10_000_000;

fn guard(vocab: usize, max_len: usize) -> Result<()> {
    let ok = (vocab as u64)
        .checked_pow(max_len as u32)
        .is_some_and(|n| n <= ENUMERATION_LIMIT);
    if ok {
        Ok(())
    } else {
        Err(Error::EnumerationTooLarge {
            vocab,
            max_len,
            limit: ENUMERATION_LIMIT,
        })
    }
}

/// Expands every prefix with positive probability under the per-step
/// distribution `step(prefix)`.
fn expand<F>(step: &F, vocab: usize, max_len: usize) -> EnumeratedDistribution
where
    F: Fn(&[TokenId]) -> Vec<f64> + Sync,
{
    fn dfs<F: Fn(&[TokenId]) -> Vec<f64>>(
        step: &F,
        prefix: &mut Vec<TokenId>,
        mass: f64,
        max_len: usize,
        out: &mut EnumeratedDistribution,
    ) {
        let q = step(prefix);
        let eos = q[EOS as usize];
        if eos > 0.0 {
            out.finished.insert(prefix.clone(), mass * eos);
        }
        if prefix.len() == max_len {
            if eos < 1.0 {
                out.truncated.insert(prefix.clone(), mass * (1.0 - eos));
            }
            return;
        }
        for (tok, &p) in q.iter().enumerate() {
            if p <= 0.0 || tok as TokenId == EOS {
                continue;
            }
            prefix.push(tok as TokenId);
            dfs(step, prefix, mass * p, max_len, out);
            prefix.pop();
        }
    }

    let root = step(&[]);
    let mut out = EnumeratedDistribution::default();
    if root[EOS as usize] > 0.0 {
        out.finished.insert(Vec::new(), root[EOS as usize]);
    }
    if max_len == 0 {
        if root[EOS as usize] < 1.0 {
            out.truncated.insert(Vec::new(), 1.0 - root[EOS as usize]);
        }
        return out;
    }
    let branches: Vec<EnumeratedDistribution> = (0..vocab)
        .into_par_iter()
        .filter(|&t| root[t] > 0.0 && t as TokenId != EOS && t as TokenId != PAD)
        .map(|t| {
            let mut part = EnumeratedDistribution::default();
            dfs(step, &mut vec![t as TokenId], root[t], max_len, &mut part);
            part
        })
        .collect();
    for b in branches {
        out.finished.extend(b.finished);
        out.truncated.extend(b.truncated);
    }
    out
}

/// Exact generator distribution `p(f | e)` over every output of at most
/// `max_len` tokens, using the same masked step distributions as the
/// decoders.
pub fn enumerate_model_distribution<M: StepModel>(
    model: &M,
    input: &[TokenId],
    max_len: usize,
) -> Result<EnumeratedDistribution> {
    let vocab = model.target_vocab_size();
    guard(vocab, max_len)?;
    let ctx = model.prepare(input)?;
    let mut dist = expand(&|prefix: &[TokenId]| generation_step(model, &ctx, prefix), vocab, max_len);
    let mut best: Option<(Vec<TokenId>, f64, f64)> = None;
    for (ids, &p) in &dist.finished {
        let lp = p.ln();
        let score = lp / (ids.len() + 1) as f64;
        let better = match &best {
            None => true,
            Some((bi, bs, bl)) => score > *bs || (score == *bs && (lp > *bl || (lp == *bl && ids < bi))),
        };
        if better {
            best = Some((ids.clone(), score, lp));
        }
    }
    dist.argmax = best.map(|(ids, s, _)| (ids, s));
    Ok(dist)
}

/// Exact sentence-level distribution induced by a generation strategy.
pub fn strategy_exact_distribution<M: StepModel>(
    model: &M,
    input: &[TokenId],
    spec: &GeneratorSpec,
    max_len: usize,
) -> Result<EnumeratedDistribution> {
    spec.validate()?;
    let vocab = model.target_vocab_size();
    guard(vocab, max_len)?;
    let point = |ids: Vec<TokenId>, status: HypStatus, mass: f64, d: &mut EnumeratedDistribution| {
        let m = if status == HypStatus::Finished {
            &mut d.finished
        } else {
            &mut d.truncated
        };
        *m.entry(ids).or_insert(0.0) += mass;
    };
    let mut out = EnumeratedDistribution::default();
    match spec.strategy {
        Strategy::Greedy => {
            let h = greedy(model, input, max_len)?;
            point(h.ids, h.status, 1.0, &mut out);
        }
        Strategy::Beam => {
            let h = beam_search(model, input, spec.beam_size, max_len)?.remove(0);
            point(h.ids, h.status, 1.0, &mut out);
        }
        Strategy::NbestSample => {
            let hyps = beam_search(model, input, spec.nbest, max_len)?;
            let probs = nbest_selection_probs(&hyps)?;
            for (h, p) in hyps.into_iter().zip(probs) {
                point(h.ids, h.status, p, &mut out);
            }
        }
        Strategy::Sample | Strategy::TopKSample | Strategy::RestrictedSample => {
            let ctx = model.prepare(input)?;
            out = expand(
                &|prefix: &[TokenId]| {
                    selection_distribution(spec, &generation_step(model, &ctx, prefix))
                        .expect("token-level strategy")
                },
                vocab,
                max_len,
            );
        }
    }
    Ok(out)
}

/// Uniform distribution over every non-PAD token.
#[derive(Debug, Clone, Copy)]
pub struct UniformModel {
    pub vocab: usize,
}

impl StepModel for UniformModel {
    type Context = ();

    fn target_vocab_size(&self) -> usize {
        self.vocab
    }

    fn prepare(&self, _source: &[TokenId]) -> Result<()> {
        Ok(())
    }

    fn next_distribution(&self, _ctx: &(), _prefix: &[TokenId]) -> Vec<f64> {
        let mut d = vec![1.0 / (self.vocab - 1) as f64; self.vocab];
        d[PAD as usize] = 0.0;
        d
    }
}

/// Point mass on a fixed output followed by EOS, whatever the input.
#[derive(Debug, Clone)]
pub struct FixedSequenceModel {
    pub vocab: usize,
    pub sequence: Vec<TokenId>,
}

impl StepModel for FixedSequenceModel {
    type Context = ();

    fn target_vocab_size(&self) -> usize {
        self.vocab
    }

    fn prepare(&self, _source: &[TokenId]) -> Result<()> {
        Ok(())
    }

    fn next_distribution(&self, _ctx: &(), prefix: &[TokenId]) -> Vec<f64> {
        let mut d = vec![0.0; self.vocab];
        let tok = self.sequence.get(prefix.len()).copied().unwrap_or(EOS);
        d[tok as usize] = 1.0;
        d
    }
}

/// The true channel `Pr(f | e)` as a step model over the source
/// vocabulary: input is a target sentence, output its translation.
#[derive(Debug, Clone)]
pub struct ChannelModel<'a> {
    pub channel: &'a ToyChannel,
    pub source_vocab: usize,
}

impl StepModel for ChannelModel<'_> {
    type Context = Vec<TokenId>;

    fn target_vocab_size(&self) -> usize {
        self.source_vocab
    }

    fn prepare(&self, source: &[TokenId]) -> Result<Vec<TokenId>> {
        Ok(source.to_vec())
    }

    fn next_distribution(&self, target: &Vec<TokenId>, prefix: &[TokenId]) -> Vec<f64> {
        let mut d = vec![0.0; self.source_vocab];
        let j = prefix.len();
        if j >= target.len() {
            d[EOS as usize] = 1.0;
        } else {
            let e = target[self.channel.reorder.origin(j, target.len())];
            for &(f, p) in &self.channel.options[&e] {
                d[f as usize] += p;
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::LengthCap;

    fn small() -> ToyConfig {
        ToyConfig::standard(30, 5).with_sizes(200, 300, 50)
    }

    #[test]
    fn same_seed_same_task() {
        let a = make_toy_task(&small(), 3).unwrap();
        let b = make_toy_task(&small(), 3).unwrap();
        assert_eq!(a.bilingual, b.bilingual);
        assert_eq!(a.held_out, b.held_out);
        assert_eq!(a.mono, a.held_out.targets());
        let c = make_toy_task(&small(), 4).unwrap();
        assert_ne!(a.bilingual, c.bilingual);
    }

    #[test]
    fn deterministic_channel_is_tokenwise_function() {
        let mut cfg = small();
        for opts in cfg.channel.values_mut() {
            let first = opts[0].0.clone();
            *opts = vec![(first, 1.0)];
        }
        let task = make_toy_task(&cfg, 1).unwrap();
        let mut map = BTreeMap::new();
        for p in task.bilingual.pairs() {
            assert_eq!(p.source.len(), p.target.len());
            for (&e, &f) in p.target.ids().iter().zip(p.source.ids()) {
                assert_eq!(*map.entry(e).or_insert(f), f);
            }
        }
    }

    #[test]
    fn channel_prob_sums_to_one_over_enumeration() {
        let task = make_toy_task(&small(), 2).unwrap();
        let m = ChannelModel {
            channel: &task.channel,
            source_vocab: task.src_vocab.len(),
        };
        for (t, _) in task.channel.templates.iter().take(10) {
            let d = enumerate_model_distribution(&m, t.ids(), t.len()).unwrap();
            assert!((d.coverage() - 1.0).abs() < 1e-12);
            for (f, &p) in &d.finished {
                assert!((task.channel.prob(f, t.ids()) - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn swap_reorder_origin() {
        assert_eq!(Reorder::SwapFirstTwo.origin(0, 3), 1);
        assert_eq!(Reorder::SwapFirstTwo.origin(1, 3), 0);
        assert_eq!(Reorder::SwapFirstTwo.origin(2, 3), 2);
        assert_eq!(Reorder::SwapFirstTwo.origin(0, 1), 0);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = small();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ToyConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn one_hot_model_single_entry() {
        let m = FixedSequenceModel {
            vocab: 8,
            sequence: vec![5, 6],
        };
        let d = enumerate_model_distribution(&m, &[4], 4).unwrap();
        assert_eq!(d.finished.len(), 1);
        assert_eq!(d.finished[&vec![5, 6]], 1.0);
        assert_eq!(d.argmax.as_ref().unwrap().0, vec![5, 6]);
    }

    #[test]
    fn enumerated_mass_in_unit_interval() {
        let m = UniformModel { vocab: 6 };
        let d = enumerate_model_distribution(&m, &[4], 3).unwrap();
        let c = d.coverage();
        assert!(c > 0.0 && c <= 1.0 + 1e-12);
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn guard_rejects_large_spaces() {
        let m = UniformModel { vocab: 40 };
        assert!(matches!(
            enumerate_model_distribution(&m, &[4], 6),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn beam_strategy_is_point_mass() {
        let m = UniformModel { vocab: 6 };
        let spec = GeneratorSpec::beam(3).with_max_len(LengthCap::fixed(3));
        let d = strategy_exact_distribution(&m, &[4], &spec, 3).unwrap();
        assert_eq!(d.finished.len() + d.truncated.len(), 1);
        assert_eq!(d.total_mass(), 1.0);
    }
}
