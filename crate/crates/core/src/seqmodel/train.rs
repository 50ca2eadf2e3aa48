use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_eps, SeqModel, WeightedPair};
use crate::analysis::{corpus_bleu, corpus_perplexity};
use crate::corpus::ParallelCorpus;
use crate::decode::{greedy, LengthCap};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub label_smoothing: f64,
    pub learning_rate: f64,
    pub decay_factor: f64,
    /// Consecutive non-improving checkpoints before the learning rate decays.
    pub plateau_patience: usize,
    pub checkpoint_interval: usize,
    /// Target tokens (EOS included) per batch.
    pub batch_tokens: usize,
    pub max_updates: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            label_smoothing: 0.1,
            learning_rate: 3e-4,
            decay_factor: 0.7,
            plateau_patience: 3,
            checkpoint_interval: 500,
            batch_tokens: 1024,
            max_updates: 5000,
            seed: 1,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_eps(self.label_smoothing)?;
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_owned()));
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be > 0");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad("decay factor must be in (0, 1]");
        }
        if self.plateau_patience == 0 || self.checkpoint_interval == 0 {
            return bad("plateau patience and checkpoint interval must be >= 1");
        }
        if self.batch_tokens == 0 || self.max_updates == 0 {
            return bad("batch tokens and max updates must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub update: usize,
    pub train_loss: f64,
    pub dev_perplexity: f64,
    pub dev_bleu: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<CheckpointRecord>,
    /// Update count of the checkpoint whose parameters were returned.
    pub selected_update: usize,
}

impl TrainLog {
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("record serializes"));
            s.push('\n');
        }
        s
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

/// Yields the (already shuffled) weighted pairs of one epoch.
pub trait TrainingSource: Sync {
    fn epoch_pairs(&self, epoch: usize, seed: u64) -> Result<Vec<WeightedPair>>;
}

impl TrainingSource for ParallelCorpus {
    fn epoch_pairs(&self, epoch: usize, seed: u64) -> Result<Vec<WeightedPair>> {
        let mut pairs: Vec<WeightedPair> = self.pairs().iter().map(WeightedPair::unit).collect();
        pairs.shuffle(&mut rng::stream(rng::derive(seed, 0x5348_5546), epoch as u64));
        Ok(pairs)
    }
}

impl TrainingSource for [WeightedPair] {
    fn epoch_pairs(&self, epoch: usize, seed: u64) -> Result<Vec<WeightedPair>> {
        let mut pairs = self.to_vec();
        pairs.shuffle(&mut rng::stream(rng::derive(seed, 0x5348_5546), epoch as u64));
        Ok(pairs)
    }
}

/// Multiplies the learning rate by `decay` once `patience` consecutive
/// observations fail to improve on the best perplexity seen so far.
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    lr: f64,
    decay: f64,
    patience: usize,
    best: f64,
    bad: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, decay: f64, patience: usize) -> Self {
        Self {
            lr,
            decay,
            patience,
            best: f64::INFINITY,
            bad: 0,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    /// Feeds one checkpoint's dev perplexity; returns the rate to use next.
    pub fn observe(&mut self, dev_perplexity: f64) -> f64 {
        if dev_perplexity < self.best {
            self.best = dev_perplexity;
            self.bad = 0;
        } else {
            self.bad += 1;
            if self.bad >= self.patience {
                self.lr *= self.decay;
                self.bad = 0;
            }
        }
        self.lr
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(n: usize, cfg: &TrainConfig) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Dev perplexity and greedy-decoding BLEU.
pub fn evaluate(model: &SeqModel, dev: &ParallelCorpus) -> Result<(f64, f64)> {
    let ppl = corpus_perplexity(model, dev)?;
    let cap = LengthCap::default();
    let hyps = dev
        .pairs()
        .par_iter()
        .map(|p| greedy(model, p.source.ids(), cap.max_len(p.source.len())).map(|h| h.ids))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<Vec<u32>> = dev.pairs().iter().map(|p| p.target.ids().to_vec()).collect();
    let bleu = corpus_bleu(&hyps, &refs)?;
    Ok((ppl, bleu.score))
}

/// Trains with Adam, checkpointing every `checkpoint_interval` updates and
/// after the final update. Returns the parameters of the checkpoint with the
/// best dev BLEU (ties go to lower dev perplexity, then the earlier one).
pub fn train<S: TrainingSource + ?Sized>(
    model: SeqModel,
    train: &S,
    dev: &ParallelCorpus,
    cfg: &TrainConfig,
) -> Result<(SeqModel, TrainLog)> {
    cfg.validate()?;
    if dev.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut model = model;
    let mut adam = Adam::new(model.num_params(), cfg);
    let mut sched = PlateauScheduler::new(cfg.learning_rate, cfg.decay_factor, cfg.plateau_patience);
    let mut log = TrainLog::default();
    let mut best: Option<(f64, f64, SeqModel, usize)> = None;

    let mut epoch = 0usize;
    let mut pairs = train.epoch_pairs(epoch, cfg.seed)?;
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut cursor = 0usize;
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;

    for update in 1..=cfg.max_updates {
        let mut batch = Vec::new();
        let mut tokens = 0usize;
        while tokens < cfg.batch_tokens {
            if cursor == pairs.len() {
                epoch += 1;
                pairs = train.epoch_pairs(epoch, cfg.seed)?;
                cursor = 0;
            }
            let p = pairs[cursor].clone();
            cursor += 1;
            tokens += p.target.len() + 1;
            batch.push(p);
        }
        let (loss, grad) = model.loss_and_gradient(&batch, cfg.label_smoothing)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { loss, update });
        }
        adam.step(model.params_mut(), &grad, sched.learning_rate());
        loss_sum += loss;
        loss_count += 1;

        if update % cfg.checkpoint_interval == 0 || update == cfg.max_updates {
            let (dev_ppl, dev_bleu) = evaluate(&model, dev)?;
            let record = CheckpointRecord {
                update,
                train_loss: loss_sum / loss_count as f64,
                dev_perplexity: dev_ppl,
                dev_bleu,
                learning_rate: sched.learning_rate(),
            };
            log::debug!("checkpoint {record:?}");
            log.records.push(record);
            loss_sum = 0.0;
            loss_count = 0;
            let better = match &best {
                None => true,
                Some((b_bleu, b_ppl, _, _)) => {
                    dev_bleu > *b_bleu || (dev_bleu == *b_bleu && dev_ppl < *b_ppl)
                }
            };
            if better {
                best = Some((dev_bleu, dev_ppl, model.clone(), update));
            }
            sched.observe(dev_ppl);
        }
    }
    let (_, _, model, selected) = best.expect("at least one checkpoint");
    log.selected_update = selected;
    Ok((model, log))
}
