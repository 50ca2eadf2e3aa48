//! Generation strategies over a model's step distributions.
//!
//! Control tokens are masked before any strategy runs: PAD, BOS and UNK can
//! never be emitted, and EOS is not allowed as the first token so every
//! output is a non-empty sentence. All strategies see the same masked
//! distribution, which is also what the enumeration oracles score.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{TokenId, BOS, EOS, PAD, UNK};
use crate::error::{Error, Result};
use crate::seqmodel::StepModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Greedy,
    Beam,
    Sample,
    TopKSample,
    RestrictedSample,
    NbestSample,
}

impl Strategy {
    pub fn is_deterministic(self) -> bool {
        matches!(self, Strategy::Greedy | Strategy::Beam)
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Greedy => "greedy",
            Strategy::Beam => "beam",
            Strategy::Sample => "sample",
            Strategy::TopKSample => "top-k-sample",
            Strategy::RestrictedSample => "restricted-sample",
            Strategy::NbestSample => "nbest-sample",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the restricted candidate set is renormalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenormMode {
    /// Divide by the candidate mass.
    #[default]
    L1,
    /// Softmax over the raw probabilities of the candidates.
    SoftmaxOverProbs,
}

impl FromStr for RenormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(RenormMode::L1),
            "softmax-over-probs" | "softmax" => Ok(RenormMode::SoftmaxOverProbs),
            _ => Err(Error::InvalidSpec(format!("unknown renorm mode {s:?}"))),
        }
    }
}

/// Output length cap `ceil(scale * input_len) + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthCap {
    pub scale: f64,
    pub offset: usize,
}

impl Default for LengthCap {
    fn default() -> Self {
        Self {
            scale: 1.5,
            offset: 5,
        }
    }
}

impl LengthCap {
    pub fn fixed(max_len: usize) -> Self {
        Self {
            scale: 0.0,
            offset: max_len,
        }
    }

    pub fn max_len(&self, input_len: usize) -> usize {
        ((self.scale * input_len as f64).ceil() as usize + self.offset).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub strategy: Strategy,
    pub beam_size: usize,
    pub k: usize,
    pub tau: f64,
    pub nbest: usize,
    pub renorm: RenormMode,
    pub max_len: LengthCap,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            strategy: Strategy::Beam,
            beam_size: 5,
            k: 10,
            tau: 0.1,
            nbest: 50,
            renorm: RenormMode::L1,
            max_len: LengthCap::default(),
            temperature: 1.0,
            seed: 0,
        }
    }
}

impl GeneratorSpec {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            ..Self::default()
        }
    }

    pub fn greedy() -> Self {
        Self::new(Strategy::Greedy)
    }

    pub fn beam(size: usize) -> Self {
        Self {
            beam_size: size,
            ..Self::new(Strategy::Beam)
        }
    }

    pub fn sample() -> Self {
        Self::new(Strategy::Sample)
    }

    pub fn top_k(k: usize) -> Self {
        Self {
            k,
            ..Self::new(Strategy::TopKSample)
        }
    }

    pub fn restricted(tau: f64) -> Self {
        Self {
            tau,
            ..Self::new(Strategy::RestrictedSample)
        }
    }

    pub fn nbest(n: usize) -> Self {
        Self {
            nbest: n,
            ..Self::new(Strategy::NbestSample)
        }
    }

    pub fn with_max_len(mut self, cap: LengthCap) -> Self {
        self.max_len = cap;
        self
    }

    /// Parses `greedy`, `beam[:size]`, `sample`, `topk:k`, `restricted:tau`
    /// or `nbest:N`; other fields keep their defaults.
    pub fn parse_strategy(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |what: &str| -> Result<&str> {
            arg.ok_or_else(|| Error::InvalidSpec(format!("strategy {name} needs {what}, e.g. {name}:<{what}>")))
        };
        let parse_usize = |a: &str| {
            a.parse::<usize>()
                .map_err(|_| Error::InvalidSpec(format!("bad integer {a:?} in strategy {s:?}")))
        };
        let spec = match name {
            "greedy" if arg.is_none() => Self::greedy(),
            "beam" => Self::beam(arg.map(parse_usize).transpose()?.unwrap_or(5)),
            "sample" if arg.is_none() => Self::sample(),
            "topk" => Self::top_k(parse_usize(num("k")?)?),
            "restricted" => Self::restricted(num("tau")?.parse::<f64>().map_err(|_| {
                Error::InvalidSpec(format!("bad tau in strategy {s:?}"))
            })?),
            "nbest" => Self::nbest(parse_usize(num("N")?)?),
            _ => return Err(Error::InvalidSpec(format!("unknown strategy {s:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if !(0.0..0.5).contains(&self.tau) {
            return bad(format!(
                "tau must be in [0, 0.5), got {} (use greedy for the tau >= 0.5 limit)",
                self.tau
            ));
        }
        if self.beam_size == 0 || self.k == 0 || self.nbest == 0 {
            return bad("beam size, k and N must be >= 1".into());
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature must be > 0, got {}", self.temperature));
        }
        if !(self.max_len.scale >= 0.0 && self.max_len.scale.is_finite()) {
            return bad("length cap scale must be >= 0".into());
        }
        Ok(())
    }

    /// Short label such as `restricted:0.1`.
    pub fn label(&self) -> String {
        match self.strategy {
            Strategy::Greedy => "greedy".into(),
            Strategy::Beam => format!("beam:{}", self.beam_size),
            Strategy::Sample => "sample".into(),
            Strategy::TopKSample => format!("topk:{}", self.k),
            Strategy::RestrictedSample => format!("restricted:{}", self.tau),
            Strategy::NbestSample => format!("nbest:{}", self.nbest),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypStatus {
    /// Ended in EOS.
    Finished,
    /// A sampled output hit the length cap.
    Truncated,
    /// Beam search found no finished hypothesis; best partial returned.
    Unfinished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub ids: Vec<TokenId>,
    /// Total log-probability, EOS step included when finished.
    pub logprob: f64,
    /// `logprob / (len + 1)`.
    pub score: f64,
    pub status: HypStatus,
}

impl Hypothesis {
    fn new(ids: Vec<TokenId>, logprob: f64, status: HypStatus) -> Self {
        let score = logprob / (ids.len() + 1) as f64;
        Self {
            ids,
            logprob,
            score,
            status,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.status == HypStatus::Finished
    }
}

/// Zeroes control tokens (and EOS at the first position) and renormalizes.
pub fn mask_controls(dist: &[f64], position: usize) -> Vec<f64> {
    let mut out = dist.to_vec();
    for id in [PAD, BOS, UNK] {
        if let Some(p) = out.get_mut(id as usize) {
            *p = 0.0;
        }
    }
    if position == 0 {
        if let Some(p) = out.get_mut(EOS as usize) {
            *p = 0.0;
        }
    }
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        for p in &mut out {
            *p /= total;
        }
    } else {
        // degenerate model: spread over the tokens that are allowed
        let allowed: Vec<usize> = (0..out.len())
            .filter(|&i| {
                let id = i as TokenId;
                id != PAD && id != BOS && id != UNK && !(position == 0 && id == EOS)
            })
            .collect();
        for &i in &allowed {
            out[i] = 1.0 / allowed.len() as f64;
        }
    }
    out
}

/// The masked step distribution every strategy starts from.
pub fn generation_step<M: StepModel>(model: &M, ctx: &M::Context, prefix: &[TokenId]) -> Vec<f64> {
    mask_controls(&model.next_distribution(ctx, prefix), prefix.len())
}

/// Lowest id wins ties.
pub fn argmax(dist: &[f64]) -> TokenId {
    let mut best = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > dist[best] {
            best = i;
        }
    }
    best as TokenId
}

/// Keeps tokens with probability at least `tau` and renormalizes them; when
/// none qualifies, returns a point mass on the argmax.
pub fn step_filter_renormalize(dist: &[f64], tau: f64, mode: RenormMode) -> Result<Vec<f64>> {
    if !(0.0..0.5).contains(&tau) {
        return Err(Error::InvalidSpec(format!("tau must be in [0, 0.5), got {tau}")));
    }
    let in_set = |p: f64| p >= tau && p > 0.0;
    let mut out = vec![0.0; dist.len()];
    if !dist.iter().any(|&p| in_set(p)) {
        out[argmax(dist) as usize] = 1.0;
        return Ok(out);
    }
    match mode {
        RenormMode::L1 => {
            let mass: f64 = dist.iter().filter(|&&p| in_set(p)).sum();
            for (o, &p) in out.iter_mut().zip(dist) {
                if in_set(p) {
                    *o = p / mass;
                }
            }
        }
        RenormMode::SoftmaxOverProbs => {
            let z: f64 = dist.iter().filter(|&&p| in_set(p)).map(|p| p.exp()).sum();
            for (o, &p) in out.iter_mut().zip(dist) {
                if in_set(p) {
                    *o = p.exp() / z;
                }
            }
        }
    }
    Ok(out)
}

/// Keeps the `k` most probable tokens (lowest id first on ties) and
/// renormalizes.
pub fn top_k_filter(dist: &[f64], k: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..dist.len()).filter(|&i| dist[i] > 0.0).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    order.truncate(k.max(1));
    let mass: f64 = order.iter().map(|&i| dist[i]).sum();
    let mut out = vec![0.0; dist.len()];
    for i in order {
        out[i] = dist[i] / mass;
    }
    out
}

pub fn apply_temperature(dist: &[f64], temperature: f64) -> Vec<f64> {
    if temperature == 1.0 {
        return dist.to_vec();
    }
    let scaled: Vec<f64> = dist.iter().map(|&p| if p > 0.0 { p.powf(1.0 / temperature) } else { 0.0 }).collect();
    let z: f64 = scaled.iter().sum();
    scaled.into_iter().map(|p| p / z).collect()
}

/// Inverse-CDF draw over ascending token ids.
pub fn sample_step<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> TokenId {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i as TokenId;
        }
    }
    last as TokenId
}

/// Per-step selection distribution of a token-level strategy. `None` for
/// beam and N-best, which act on whole sentences.
pub fn selection_distribution(spec: &GeneratorSpec, dist: &[f64]) -> Option<Vec<f64>> {
    let out = match spec.strategy {
        Strategy::Greedy => {
            let mut v = vec![0.0; dist.len()];
            v[argmax(dist) as usize] = 1.0;
            v
        }
        Strategy::Sample => apply_temperature(dist, spec.temperature),
        Strategy::TopKSample => top_k_filter(dist, spec.k),
        Strategy::RestrictedSample => {
            step_filter_renormalize(dist, spec.tau, spec.renorm).expect("spec validated")
        }
        Strategy::Beam | Strategy::NbestSample => return None,
    };
    Some(out)
}

fn check_source<M: StepModel>(model: &M, source: &[TokenId]) -> Result<M::Context> {
    model.prepare(source)
}

/// Runs a token-level strategy; `pick` chooses from the selection
/// distribution.
fn run_steps<M, F>(
    model: &M,
    ctx: &M::Context,
    max_len: usize,
    select: impl Fn(&[f64]) -> Vec<f64>,
    mut pick: F,
) -> Hypothesis
where
    M: StepModel,
    F: FnMut(&[f64]) -> TokenId,
{
    let mut ids = Vec::new();
    let mut logprob = 0.0;
    for j in 0..=max_len {
        let p = generation_step(model, ctx, &ids);
        let q = select(&p);
        let tok = pick(&q);
        if tok == EOS {
            logprob += p[tok as usize].ln();
            return Hypothesis::new(ids, logprob, HypStatus::Finished);
        }
        if j == max_len {
            break;
        }
        logprob += p[tok as usize].ln();
        ids.push(tok);
    }
    Hypothesis::new(ids, logprob, HypStatus::Truncated)
}

pub fn greedy<M: StepModel>(model: &M, source: &[TokenId], max_len: usize) -> Result<Hypothesis> {
    let ctx = check_source(model, source)?;
    Ok(run_steps(model, &ctx, max_len, |p| p.to_vec(), argmax))
}

/// Beam search over prefixes ranked by total log-probability. Hypotheses
/// that emit EOS leave the beam; search stops once `beam_size` have
/// finished or no prefix is left. At the length cap only EOS may extend a
/// prefix. Finished hypotheses are returned best length-normalized score
/// first. If none finished, the single best partial prefix is returned with
/// [`HypStatus::Unfinished`].
pub fn beam_search<M: StepModel>(
    model: &M,
    source: &[TokenId],
    beam_size: usize,
    max_len: usize,
) -> Result<Vec<Hypothesis>> {
    if beam_size == 0 {
        return Err(Error::InvalidSpec("beam size must be >= 1".into()));
    }
    let ctx = check_source(model, source)?;
    let mut active: Vec<(Vec<TokenId>, f64)> = vec![(Vec::new(), 0.0)];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let mut last_active = active.clone();

    for j in 0..=max_len {
        let mut cands: Vec<(f64, usize, TokenId)> = Vec::new();
        for (pi, (prefix, lp)) in active.iter().enumerate() {
            let p = generation_step(model, &ctx, prefix);
            for (tok, &pt) in p.iter().enumerate() {
                if pt <= 0.0 || (j == max_len && tok as TokenId != EOS) {
                    continue;
                }
                cands.push((lp + pt.ln(), pi, tok as TokenId));
            }
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        cands.truncate(beam_size);

        let mut next = Vec::with_capacity(cands.len());
        for (lp, pi, tok) in cands {
            let prefix = &active[pi].0;
            if tok == EOS {
                finished.push(Hypothesis::new(prefix.clone(), lp, HypStatus::Finished));
            } else {
                let mut ids = prefix.clone();
                ids.push(tok);
                next.push((ids, lp));
            }
        }
        if !next.is_empty() {
            last_active = next.clone();
        }
        active = next;
        if finished.len() >= beam_size || active.is_empty() {
            break;
        }
    }

    if finished.is_empty() {
        let (ids, lp) = last_active
            .into_iter()
            .next()
            .expect("beam keeps at least one prefix");
        return Ok(vec![Hypothesis::new(ids, lp, HypStatus::Unfinished)]);
    }
    finished.sort_by(rank_hypotheses);
    finished.truncate(beam_size);
    Ok(finished)
}

fn rank_hypotheses(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(b.logprob.total_cmp(&a.logprob))
        .then_with(|| a.ids.cmp(&b.ids))
}

/// Softmax over the hypotheses' length-normalized scores.
pub fn nbest_selection_probs(hyps: &[Hypothesis]) -> Result<Vec<f64>> {
    if hyps.is_empty() {
        return Err(Error::InvalidArgument("empty hypothesis list".into()));
    }
    let max = hyps.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = hyps.iter().map(|h| (h.score - max).exp()).collect();
    let z: f64 = e.iter().sum();
    Ok(e.into_iter().map(|v| v / z).collect())
}

/// Generates one output for `source` with the given strategy.
pub fn generate<M: StepModel, R: Rng + ?Sized>(
    model: &M,
    source: &[TokenId],
    spec: &GeneratorSpec,
    rng: &mut R,
) -> Result<Hypothesis> {
    spec.validate()?;
    let max_len = spec.max_len.max_len(source.len());
    match spec.strategy {
        Strategy::Beam => Ok(beam_search(model, source, spec.beam_size, max_len)?.remove(0)),
        Strategy::NbestSample => {
            let mut hyps = beam_search(model, source, spec.nbest, max_len)?;
            if hyps.len() < spec.nbest {
                log::trace!("n-best list has {} of {} hypotheses", hyps.len(), spec.nbest);
            }
            let probs = nbest_selection_probs(&hyps)?;
            let i = sample_step(&probs, rng) as usize;
            Ok(hyps.swap_remove(i))
        }
        Strategy::Greedy => greedy(model, source, max_len),
        _ => {
            let ctx = check_source(model, source)?;
            Ok(run_steps(
                model,
                &ctx,
                max_len,
                |p| selection_distribution(spec, p).expect("token-level strategy"),
                |q| sample_step(q, rng),
            ))
        }
    }
}

#[cfg(test)]
mod tests;
