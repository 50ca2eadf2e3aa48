//! Conditional sequence model `p(next target token | source, prefix)`.
//!
//! The network is a small attention encoder-decoder:
//!
//! ```text
//! enc_k = E_src[x_k] + P_src[k]            (source followed by EOS)
//! d_j   = E_tgt[y_{j-1}] + P_tgt[j]        (y_{-1} = BOS)
//! a     = softmax_k(d_j . enc_k);  c_j = sum_k a_k enc_k;  m = mean_k enc_k
//! h_j   = tanh(W_h [d_j; c_j; m] + b_h)
//! p     = softmax over non-PAD tokens of (W_o h_j + b_o)
//! ```
//!
//! Gradients are derived by hand and checked against finite differences in
//! the tests. Everything runs in `f64`.

mod train;

pub use train::{
    evaluate, train, CheckpointRecord, PlateauScheduler, TrainConfig, TrainLog, TrainingSource,
};

use std::fs;
use std::path::Path;

use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{check_ids, Sentence, SentencePair, TokenId, Vocabulary, BOS, EOS, PAD};
use crate::error::{Error, Result};
use crate::rng;

/// Anything that produces next-token distributions for a source sentence.
///
/// Decoding, enumeration oracles and diagnostics are written against this
/// trait so they work for the trained network and for hand-built tables.
pub trait StepModel: Sync {
    type Context: Send + Sync;

    fn target_vocab_size(&self) -> usize;

    fn prepare(&self, source: &[TokenId]) -> Result<Self::Context>;

    /// Distribution over the target vocabulary for the token following
    /// `prefix`. PAD always has probability 0.
    fn next_distribution(&self, ctx: &Self::Context, prefix: &[TokenId]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Positions beyond this share the last position embedding.
    pub max_positions: usize,
    /// With attention off the context vector is the mean source encoding.
    pub attention: bool,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            hidden_dim: 64,
            max_positions: 64,
            attention: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabInfo {
    pub size: usize,
    pub hash: String,
}

impl From<&Vocabulary> for VocabInfo {
    fn from(v: &Vocabulary) -> Self {
        Self {
            size: v.len(),
            hash: v.hash(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layout {
    src_emb: usize,
    src_pos: usize,
    tgt_emb: usize,
    tgt_pos: usize,
    w_h: usize,
    b_h: usize,
    w_o: usize,
    b_o: usize,
    total: usize,
}

impl Layout {
    fn new(arch: &ArchConfig, vs: usize, vt: usize) -> Self {
        let (d, h, l) = (arch.embed_dim, arch.hidden_dim, arch.max_positions);
        let src_emb = 0;
        let src_pos = src_emb + vs * d;
        let tgt_emb = src_pos + l * d;
        let tgt_pos = tgt_emb + vt * d;
        let w_h = tgt_pos + l * d;
        let b_h = w_h + h * 3 * d;
        let w_o = b_h + h;
        let b_o = w_o + vt * h;
        Self {
            src_emb,
            src_pos,
            tgt_emb,
            tgt_pos,
            w_h,
            b_h,
            w_o,
            b_o,
            total: b_o + vt,
        }
    }
}

/// A training example with its loss weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPair {
    pub source: Sentence,
    pub target: Sentence,
    pub weight: f64,
}

impl WeightedPair {
    pub fn unit(pair: &SentencePair) -> Self {
        Self {
            source: pair.source.clone(),
            target: pair.target.clone(),
            weight: 1.0,
        }
    }
}

/// Per-position log-probabilities of a target sentence, EOS step last.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceScore {
    pub per_position: Vec<f64>,
    pub total: f64,
    /// `total / (len + 1)`, EOS counted.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqModel {
    arch: ArchConfig,
    src_vocab: VocabInfo,
    tgt_vocab: VocabInfo,
    params: Vec<f64>,
    layout: Layout,
}

/// Encoded source sentence, reused across decoding steps.
#[derive(Debug, Clone)]
pub struct Encoded {
    tokens: Vec<TokenId>,
    enc: Vec<f64>,
    mean: Vec<f64>,
}

/// Activations of a single decoder step.
struct StepCache {
    d: Vec<f64>,
    alpha: Vec<f64>,
    u: Vec<f64>,
    h: Vec<f64>,
    logp: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    arch: ArchConfig,
    src_vocab: VocabInfo,
    tgt_vocab: VocabInfo,
    params: Vec<f64>,
}

const CHECKPOINT_FORMAT: &str = "btlab-seqmodel-v1";
const GRAD_CHUNK: usize = 8;

impl SeqModel {
    pub fn new(arch: ArchConfig, src: &Vocabulary, tgt: &Vocabulary, seed: u64) -> Result<Self> {
        Self::from_vocab_info(arch, src.into(), tgt.into(), seed)
    }

    /// Builds a model for bare vocabulary sizes (hashes left empty).
    pub fn with_sizes(arch: ArchConfig, src_size: usize, tgt_size: usize, seed: u64) -> Result<Self> {
        let info = |size| VocabInfo {
            size,
            hash: String::new(),
        };
        Self::from_vocab_info(arch, info(src_size), info(tgt_size), seed)
    }

    pub fn from_vocab_info(
        arch: ArchConfig,
        src_vocab: VocabInfo,
        tgt_vocab: VocabInfo,
        seed: u64,
    ) -> Result<Self> {
        if arch.embed_dim == 0 || arch.hidden_dim == 0 || arch.max_positions == 0 {
            return Err(Error::InvalidArgument("architecture dimensions must be >= 1".into()));
        }
        if src_vocab.size <= EOS as usize || tgt_vocab.size <= EOS as usize {
            return Err(Error::InvalidArgument("vocabularies must contain the control tokens".into()));
        }
        let layout = Layout::new(&arch, src_vocab.size, tgt_vocab.size);
        let mut params = vec![0.0; layout.total];
        let mut r = rng::seeded(seed);
        let d = arch.embed_dim as f64;
        let emb = Uniform::new_inclusive(-1.0 / d.sqrt(), 1.0 / d.sqrt()).expect("finite bounds");
        for p in &mut params[layout.src_emb..layout.w_h] {
            *p = emb.sample(&mut r);
        }
        let xavier = |fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Uniform::new_inclusive(-a, a).expect("finite bounds")
        };
        let wh = xavier(3 * arch.embed_dim, arch.hidden_dim);
        for p in &mut params[layout.w_h..layout.b_h] {
            *p = wh.sample(&mut r);
        }
        let wo = xavier(arch.hidden_dim, tgt_vocab.size);
        for p in &mut params[layout.w_o..layout.b_o] {
            *p = wo.sample(&mut r);
        }
        Ok(Self {
            arch,
            src_vocab,
            tgt_vocab,
            params,
            layout,
        })
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn src_vocab(&self) -> &VocabInfo {
        &self.src_vocab
    }

    pub fn tgt_vocab(&self) -> &VocabInfo {
        &self.tgt_vocab
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Sets the output projection and bias to zero, making every step
    /// distribution uniform over non-PAD tokens.
    pub fn zero_output_layer(&mut self) {
        let l = self.layout;
        self.params[l.w_o..l.total].fill(0.0);
    }

    pub fn encode(&self, source: &[TokenId]) -> Result<Encoded> {
        if source.is_empty() {
            return Err(Error::InvalidArgument("empty source sentence".into()));
        }
        check_ids(source, self.src_vocab.size)?;
        Ok(self.encode_unchecked(source))
    }

    fn encode_unchecked(&self, source: &[TokenId]) -> Encoded {
        let dim = self.arch.embed_dim;
        let l = self.layout;
        let mut tokens = source.to_vec();
        tokens.push(EOS);
        let n = tokens.len();
        let mut enc = vec![0.0; n * dim];
        let mut mean = vec![0.0; dim];
        for (k, &tok) in tokens.iter().enumerate() {
            let e = &self.params[l.src_emb + tok as usize * dim..][..dim];
            let p = &self.params[l.src_pos + self.pos(k) * dim..][..dim];
            let row = &mut enc[k * dim..(k + 1) * dim];
            for i in 0..dim {
                row[i] = e[i] + p[i];
                mean[i] += row[i];
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        Encoded { tokens, enc, mean }
    }

    fn pos(&self, j: usize) -> usize {
        j.min(self.arch.max_positions - 1)
    }

    fn step(&self, e: &Encoded, prev: TokenId, j: usize) -> StepCache {
        let dim = self.arch.embed_dim;
        let hid = self.arch.hidden_dim;
        let vt = self.tgt_vocab.size;
        let l = self.layout;
        let p = &self.params;
        let n = e.tokens.len();

        let emb = &p[l.tgt_emb + prev as usize * dim..][..dim];
        let pe = &p[l.tgt_pos + self.pos(j) * dim..][..dim];
        let d: Vec<f64> = emb.iter().zip(pe).map(|(a, b)| a + b).collect();

        let alpha = if self.arch.attention {
            let scores: Vec<f64> = (0..n)
                .map(|k| dot(&d, &e.enc[k * dim..(k + 1) * dim]))
                .collect();
            softmax(&scores)
        } else {
            vec![1.0 / n as f64; n]
        };

        let mut u = vec![0.0; 3 * dim];
        u[..dim].copy_from_slice(&d);
        for k in 0..n {
            axpy(&mut u[dim..2 * dim], alpha[k], &e.enc[k * dim..(k + 1) * dim]);
        }
        u[2 * dim..].copy_from_slice(&e.mean);

        let w_h = &p[l.w_h..l.b_h];
        let b_h = &p[l.b_h..l.w_o];
        let h: Vec<f64> = (0..hid)
            .map(|r| (dot(&w_h[r * 3 * dim..(r + 1) * 3 * dim], &u) + b_h[r]).tanh())
            .collect();

        let w_o = &p[l.w_o..l.b_o];
        let b_o = &p[l.b_o..l.total];
        let mut logp = vec![f64::NEG_INFINITY; vt];
        let mut max = f64::NEG_INFINITY;
        for v in 0..vt {
            if v as TokenId == PAD {
                continue;
            }
            let z = dot(&w_o[v * hid..(v + 1) * hid], &h) + b_o[v];
            logp[v] = z;
            max = max.max(z);
        }
        let lse = max
            + logp
                .iter()
                .filter(|z| z.is_finite())
                .map(|z| (z - max).exp())
                .sum::<f64>()
                .ln();
        for (v, z) in logp.iter_mut().enumerate() {
            if v as TokenId != PAD {
                *z -= lse;
            }
        }
        StepCache {
            d,
            alpha,
            u,
            h,
            logp,
        }
    }

    /// Next-token distribution after `prefix`, validating ids.
    pub fn forward_step(&self, source: &[TokenId], prefix: &[TokenId]) -> Result<Vec<f64>> {
        let enc = self.encode(source)?;
        check_ids(prefix, self.tgt_vocab.size)?;
        Ok(self.next_distribution(&enc, prefix))
    }

    /// Summed unnormalized loss of one sentence; accumulates `scale` times
    /// its gradient into `grad` when given. Returns `(loss_sum, steps)`.
    fn sentence_loss(
        &self,
        source: &[TokenId],
        target: &[TokenId],
        eps: f64,
        scale: f64,
        mut grad: Option<&mut [f64]>,
    ) -> (f64, usize) {
        let dim = self.arch.embed_dim;
        let hid = self.arch.hidden_dim;
        let vt = self.tgt_vocab.size;
        let l = self.layout;
        let enc = self.encode_unchecked(source);
        let n = enc.tokens.len();
        let v_eff = (vt - 1) as f64;

        let mut loss = 0.0;
        let steps = target.len() + 1;
        let mut g_enc = vec![0.0; n * dim];
        let mut g_mean = vec![0.0; dim];

        for j in 0..steps {
            let prev = if j == 0 { BOS } else { target[j - 1] };
            let gold = if j < target.len() { target[j] } else { EOS };
            let cache = self.step(&enc, prev, j);

            let nll = -cache.logp[gold as usize];
            let smooth = if eps > 0.0 {
                -cache
                    .logp
                    .iter()
                    .enumerate()
                    .filter(|&(v, _)| v as TokenId != PAD)
                    .map(|(_, lp)| lp)
                    .sum::<f64>()
                    / v_eff
            } else {
                0.0
            };
            loss += (1.0 - eps) * nll + eps * smooth;

            let Some(g) = grad.as_deref_mut() else {
                continue;
            };

            // dL/dz = p - q with q the smoothed one-hot target
            let mut g_z = vec![0.0; vt];
            for v in 0..vt {
                if v as TokenId == PAD {
                    continue;
                }
                let mut q = eps / v_eff;
                if v as TokenId == gold {
                    q += 1.0 - eps;
                }
                g_z[v] = scale * (cache.logp[v].exp() - q);
            }

            let w_o = l.w_o;
            let mut g_h = vec![0.0; hid];
            for v in 0..vt {
                let gz = g_z[v];
                if gz == 0.0 {
                    continue;
                }
                g[l.b_o + v] += gz;
                let row = w_o + v * hid;
                axpy(&mut g[row..row + hid], gz, &cache.h);
                axpy(&mut g_h, gz, &self.params[row..row + hid]);
            }

            let mut g_u = vec![0.0; 3 * dim];
            for k in 0..hid {
                let gp = g_h[k] * (1.0 - cache.h[k] * cache.h[k]);
                if gp == 0.0 {
                    continue;
                }
                g[l.b_h + k] += gp;
                let row = l.w_h + k * 3 * dim;
                axpy(&mut g[row..row + 3 * dim], gp, &cache.u);
                axpy(&mut g_u, gp, &self.params[row..row + 3 * dim]);
            }

            let mut g_d = g_u[..dim].to_vec();
            let g_c = &g_u[dim..2 * dim];
            for i in 0..dim {
                g_mean[i] += g_u[2 * dim + i];
            }

            let mut g_alpha = vec![0.0; n];
            for k in 0..n {
                let row = &enc.enc[k * dim..(k + 1) * dim];
                axpy(&mut g_enc[k * dim..(k + 1) * dim], cache.alpha[k], g_c);
                g_alpha[k] = dot(g_c, row);
            }
            if self.arch.attention {
                let s: f64 = cache.alpha.iter().zip(&g_alpha).map(|(a, b)| a * b).sum();
                for k in 0..n {
                    let g_score = cache.alpha[k] * (g_alpha[k] - s);
                    let row = &enc.enc[k * dim..(k + 1) * dim];
                    axpy(&mut g_d, g_score, row);
                    axpy(&mut g_enc[k * dim..(k + 1) * dim], g_score, &cache.d);
                }
            }

            let e_row = l.tgt_emb + prev as usize * dim;
            let p_row = l.tgt_pos + self.pos(j) * dim;
            for i in 0..dim {
                g[e_row + i] += g_d[i];
                g[p_row + i] += g_d[i];
            }
        }

        if let Some(g) = grad {
            for k in 0..n {
                let e_row = l.src_emb + enc.tokens[k] as usize * dim;
                let p_row = l.src_pos + self.pos(k) * dim;
                for i in 0..dim {
                    let gi = g_enc[k * dim + i] + g_mean[i] / n as f64;
                    g[e_row + i] += gi;
                    g[p_row + i] += gi;
                }
            }
        }
        (loss, steps)
    }

    fn check_batch(&self, batch: &[WeightedPair]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        for p in batch {
            p.source.check_ids(self.src_vocab.size)?;
            p.target.check_ids(self.tgt_vocab.size)?;
        }
        Ok(())
    }

    fn token_mass(batch: &[WeightedPair]) -> f64 {
        batch
            .iter()
            .map(|p| p.weight * (p.target.len() + 1) as f64)
            .sum()
    }

    /// Label-smoothed cross-entropy per target token (EOS included),
    /// each sentence weighted by its `weight`.
    pub fn loss(&self, batch: &[WeightedPair], eps: f64) -> Result<f64> {
        self.check_batch(batch)?;
        check_eps(eps)?;
        let total: f64 = batch
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|p| {
                        p.weight
                            * self
                                .sentence_loss(p.source.ids(), p.target.ids(), eps, 0.0, None)
                                .0
                    })
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        Ok(total / Self::token_mass(batch))
    }

    /// Exact gradient of [`SeqModel::loss`] with respect to the parameters.
    pub fn gradient(&self, batch: &[WeightedPair], eps: f64) -> Result<Vec<f64>> {
        Ok(self.loss_and_gradient(batch, eps)?.1)
    }

    pub fn loss_and_gradient(&self, batch: &[WeightedPair], eps: f64) -> Result<(f64, Vec<f64>)> {
        self.check_batch(batch)?;
        check_eps(eps)?;
        let z = Self::token_mass(batch);
        // fixed chunking and in-order reduction keep the result independent
        // of the thread count
        let parts: Vec<(f64, Vec<f64>)> = batch
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut g = vec![0.0; self.params.len()];
                let mut loss = 0.0;
                for p in chunk {
                    loss += p.weight
                        * self
                            .sentence_loss(
                                p.source.ids(),
                                p.target.ids(),
                                eps,
                                p.weight / z,
                                Some(&mut g),
                            )
                            .0;
                }
                (loss, g)
            })
            .collect();
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for (l, g) in parts {
            loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        Ok((loss / z, grad))
    }

    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn to_json(&self) -> String {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            arch: self.arch,
            src_vocab: self.src_vocab.clone(),
            tgt_vocab: self.tgt_vocab.clone(),
            params: self.params.clone(),
        };
        serde_json::to_string(&ck).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Parse(format!("unknown checkpoint format {}", ck.format)));
        }
        let layout = Layout::new(&ck.arch, ck.src_vocab.size, ck.tgt_vocab.size);
        if layout.total != ck.params.len() {
            return Err(Error::Parse(format!(
                "checkpoint has {} parameters, architecture needs {}",
                ck.params.len(),
                layout.total
            )));
        }
        Ok(Self {
            arch: ck.arch,
            src_vocab: ck.src_vocab,
            tgt_vocab: ck.tgt_vocab,
            params: ck.params,
            layout,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Loads a checkpoint and rejects it unless both vocabularies match the
    /// hashes recorded at training time.
    pub fn load(path: impl AsRef<Path>, src: &Vocabulary, tgt: &Vocabulary) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model = Self::from_json(&text)?;
        model.check_vocabs(src, tgt)?;
        Ok(model)
    }

    pub fn check_vocabs(&self, src: &Vocabulary, tgt: &Vocabulary) -> Result<()> {
        for (side, info, v) in [("source", &self.src_vocab, src), ("target", &self.tgt_vocab, tgt)] {
            let actual = v.hash();
            if info.hash != actual {
                return Err(Error::VocabHashMismatch {
                    side,
                    expected: info.hash.clone(),
                    actual,
                });
            }
        }
        Ok(())
    }
}

impl StepModel for SeqModel {
    type Context = Encoded;

    fn target_vocab_size(&self) -> usize {
        self.tgt_vocab.size
    }

    fn prepare(&self, source: &[TokenId]) -> Result<Encoded> {
        self.encode(source)
    }

    fn next_distribution(&self, ctx: &Encoded, prefix: &[TokenId]) -> Vec<f64> {
        let prev = prefix.last().copied().unwrap_or(BOS);
        let cache = self.step(ctx, prev, prefix.len());
        cache.logp.iter().map(|lp| lp.exp()).collect()
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!(
            "label smoothing must be in [0, 1), got {eps}"
        )));
    }
    Ok(())
}

/// Log-probability of `target` (plus EOS) under any step model.
pub fn sequence_logprob<M: StepModel>(
    model: &M,
    source: &[TokenId],
    target: &[TokenId],
) -> Result<SequenceScore> {
    if target.is_empty() {
        return Err(Error::InvalidArgument("empty target sentence".into()));
    }
    check_ids(target, model.target_vocab_size())?;
    let ctx = model.prepare(source)?;
    let mut per_position = Vec::with_capacity(target.len() + 1);
    for j in 0..=target.len() {
        let gold = if j < target.len() { target[j] } else { EOS };
        let dist = model.next_distribution(&ctx, &target[..j]);
        per_position.push(dist[gold as usize].ln());
    }
    let total: f64 = per_position.iter().sum();
    Ok(SequenceScore {
        normalized: total / per_position.len() as f64,
        per_position,
        total,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a * x`.
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
