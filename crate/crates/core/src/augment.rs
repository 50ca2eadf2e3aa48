//! Pseudo-parallel corpora generated from monolingual targets, their
//! weighted training views, and the controlled back-translation scenario.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{corpus_perplexity, cumulative_mass_curve, MassCurve};
use crate::corpus::{
    read_text_lines, write_lines, MonoCorpus, ParallelCorpus, Sentence, SentencePair, TokenId,
    Vocabulary,
};
use crate::decode::{
    beam_search, generate, greedy, nbest_selection_probs, sample_step, GeneratorSpec, HypStatus,
    Hypothesis, Strategy,
};
use crate::error::{Error, Result};
use crate::ibm1::{train_ibm1, translation_entropy};
use crate::rng;
use crate::seqmodel::{evaluate, train, ArchConfig, SeqModel, StepModel, TrainConfig, TrainLog, TrainingSource, WeightedPair};
use crate::corpus::target_unigram;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSource {
    pub ids: Vec<TokenId>,
    pub status: HypStatus,
}

impl GeneratedSource {
    pub fn is_flagged(&self) -> bool {
        self.status != HypStatus::Finished
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoEntry {
    pub target: Sentence,
    pub sources: Vec<GeneratedSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: GeneratorSpec,
    pub generator_hash: String,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoCorpus {
    pub entries: Vec<PseudoEntry>,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    provenance: Provenance,
    entries: usize,
    /// `flags[s][n]` is the status of source `n` of entry `s`.
    flags: Vec<Vec<HypStatus>>,
}

impl PseudoCorpus {
    pub fn n(&self) -> usize {
        self.provenance.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn flagged_count(&self) -> usize {
        self.entries
            .iter()
            .flat_map(|e| &e.sources)
            .filter(|s| s.is_flagged())
            .count()
    }

    /// Drops every entry with a truncated or unfinished source.
    pub fn drop_flagged(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|e| e.sources.iter().all(|s| !s.is_flagged()))
                .cloned()
                .collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// All `(source, target)` pairs, N per entry.
    pub fn to_parallel(&self) -> ParallelCorpus {
        ParallelCorpus::new(
            self.entries
                .iter()
                .flat_map(|e| {
                    e.sources.iter().map(|s| SentencePair {
                        source: Sentence::new(s.ids.clone()).expect("generated sources are non-empty"),
                        target: e.target.clone(),
                    })
                })
                .collect(),
        )
    }

    /// Paths written by [`PseudoCorpus::save`] for a prefix.
    pub fn paths(prefix: &Path, n: usize) -> (PathBuf, Vec<PathBuf>, PathBuf) {
        let with = |suffix: String| {
            let mut s = prefix.as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        };
        (
            with(".tgt".into()),
            (0..n).map(|i| with(format!(".src.{i}"))).collect(),
            with(".json".into()),
        )
    }

    /// Writes `<prefix>.tgt`, `<prefix>.src.<n>` for each of the N sources
    /// and a `<prefix>.json` sidecar with provenance and flags.
    pub fn save(&self, prefix: impl AsRef<Path>, src_vocab: &Vocabulary, tgt_vocab: &Vocabulary) -> Result<()> {
        let (tgt, srcs, side) = Self::paths(prefix.as_ref(), self.n());
        write_lines(&tgt, self.entries.iter().map(|e| tgt_vocab.decode(e.target.ids())))?;
        for (i, p) in srcs.iter().enumerate() {
            write_lines(p, self.entries.iter().map(|e| src_vocab.decode(&e.sources[i].ids)))?;
        }
        let sidecar = Sidecar {
            provenance: self.provenance.clone(),
            entries: self.entries.len(),
            flags: self
                .entries
                .iter()
                .map(|e| e.sources.iter().map(|s| s.status).collect())
                .collect(),
        };
        fs::write(&side, serde_json::to_string(&sidecar)?).map_err(|e| Error::io(&side, e))
    }

    pub fn load(prefix: impl AsRef<Path>, src_vocab: &Vocabulary, tgt_vocab: &Vocabulary) -> Result<Self> {
        let prefix = prefix.as_ref();
        let (_, _, side) = Self::paths(prefix, 0);
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text)?;
        let n = sidecar.provenance.n;
        let (tgt, srcs, _) = Self::paths(prefix, n);
        let targets = read_text_lines(&tgt)?;
        let sources = srcs.iter().map(read_text_lines).collect::<Result<Vec<_>>>()?;
        if targets.len() != sidecar.entries || sources.iter().any(|s| s.len() != targets.len()) {
            return Err(Error::Parse(format!("pseudo corpus {} has inconsistent line counts", prefix.display())));
        }
        let entries = targets
            .iter()
            .enumerate()
            .map(|(s, t)| {
                Ok(PseudoEntry {
                    target: Sentence::new(tgt_vocab.encode(t))?,
                    sources: (0..n)
                        .map(|i| GeneratedSource {
                            ids: src_vocab.encode(&sources[i][s]),
                            status: sidecar.flags[s][i],
                        })
                        .collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            entries,
            provenance: sidecar.provenance,
        })
    }
}

const GENERATION_TAG: u64 = 0x4745_4e45;

fn pick_nbest<R: rand::Rng + ?Sized>(hyps: &[Hypothesis], rng: &mut R) -> Result<Hypothesis> {
    let probs = nbest_selection_probs(hyps)?;
    Ok(hyps[sample_step(&probs, rng) as usize].clone())
}

/// Generates `n` sources for every monolingual sentence with `generator`.
///
/// Source `k` of sentence `s` draws from RNG stream `s * n + k`, so output
/// does not depend on thread count. Search results of deterministic
/// strategies are computed once per distinct target sentence.
pub fn generate_pseudo_corpus_with<M: StepModel>(
    generator: &M,
    generator_hash: &str,
    mono: &MonoCorpus,
    spec: &GeneratorSpec,
    n: usize,
    seed: u64,
) -> Result<PseudoCorpus> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("N must be >= 1".into()));
    }
    if n > 1 && spec.strategy.is_deterministic() {
        return Err(Error::DeterministicDuplicates {
            strategy: spec.strategy.to_string(),
            n,
        });
    }
    let base = rng::derive(seed, GENERATION_TAG);

    let cache: BTreeMap<&[TokenId], Vec<Hypothesis>> = match spec.strategy {
        Strategy::Greedy | Strategy::Beam | Strategy::NbestSample => {
            let distinct: BTreeSet<&[TokenId]> = mono.sentences().iter().map(|s| s.ids()).collect();
            distinct
                .into_par_iter()
                .map(|t| {
                    let max_len = spec.max_len.max_len(t.len());
                    let hyps = match spec.strategy {
                        Strategy::Greedy => vec![greedy(generator, t, max_len)?],
                        Strategy::Beam => beam_search(generator, t, spec.beam_size, max_len)?,
                        _ => beam_search(generator, t, spec.nbest, max_len)?,
                    };
                    Ok((t, hyps))
                })
                .collect::<Result<_>>()?
        }
        _ => BTreeMap::new(),
    };

    let entries = mono
        .sentences()
        .par_iter()
        .enumerate()
        .map(|(s, target)| {
            let sources = (0..n)
                .map(|k| {
                    let mut r = rng::stream(base, (s * n + k) as u64);
                    let h = match spec.strategy {
                        Strategy::Greedy | Strategy::Beam => cache[target.ids()][0].clone(),
                        Strategy::NbestSample => pick_nbest(&cache[target.ids()], &mut r)?,
                        _ => generate(generator, target.ids(), spec, &mut r)?,
                    };
                    if h.ids.is_empty() {
                        return Err(Error::InvalidArgument("generator produced an empty source".into()));
                    }
                    Ok(GeneratedSource {
                        ids: h.ids,
                        status: h.status,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PseudoEntry {
                target: target.clone(),
                sources,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PseudoCorpus {
        entries,
        provenance: Provenance {
            spec: spec.clone(),
            generator_hash: generator_hash.to_owned(),
            n,
            seed,
        },
    })
}

/// [`generate_pseudo_corpus_with`] for a trained model, recording its
/// checkpoint fingerprint as provenance.
pub fn generate_pseudo_corpus(
    generator: &SeqModel,
    mono: &MonoCorpus,
    spec: &GeneratorSpec,
    n: usize,
    seed: u64,
) -> Result<PseudoCorpus> {
    generate_pseudo_corpus_with(generator, &generator.fingerprint(), mono, spec, n, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedTrainingSet {
    pub bilingual: ParallelCorpus,
    pub pseudo: PseudoCorpus,
    /// Multiplies every pseudo pair's weight.
    pub pseudo_weight: f64,
}

impl MixedTrainingSet {
    pub fn new(bilingual: ParallelCorpus, pseudo: PseudoCorpus) -> Self {
        Self {
            bilingual,
            pseudo,
            pseudo_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ViewMode<'a> {
    /// The pseudo corpus is fixed; only the order changes between epochs.
    Static,
    /// Sources are regenerated every epoch with an epoch-derived seed.
    RegenerateEachEpoch { generator: &'a SeqModel },
}

const SHUFFLE_TAG: u64 = 0x5649_4557;

/// Weighted pairs for one epoch: bilingual pairs weigh 1 and each of the N
/// sources of a pseudo entry weighs `1/N`, so the pseudo corpus contributes
/// a total weight equal to its number of target sentences.
pub fn build_training_view(
    mixed: &MixedTrainingSet,
    mode: ViewMode<'_>,
    epoch: usize,
    seed: u64,
) -> Result<Vec<WeightedPair>> {
    let regenerated;
    let pseudo = match mode {
        ViewMode::Static => &mixed.pseudo,
        ViewMode::RegenerateEachEpoch { generator } => {
            let prov = &mixed.pseudo.provenance;
            let mono = MonoCorpus::new(mixed.pseudo.entries.iter().map(|e| e.target.clone()).collect());
            regenerated = generate_pseudo_corpus(
                generator,
                &mono,
                &prov.spec,
                prov.n,
                rng::derive(prov.seed, epoch as u64 + 1),
            )?;
            &regenerated
        }
    };
    let n = pseudo.n() as f64;
    let mut pairs: Vec<WeightedPair> = mixed.bilingual.pairs().iter().map(WeightedPair::unit).collect();
    for e in &pseudo.entries {
        for s in &e.sources {
            pairs.push(WeightedPair {
                source: Sentence::new(s.ids.clone())?,
                target: e.target.clone(),
                weight: mixed.pseudo_weight / n,
            });
        }
    }
    pairs.shuffle(&mut rng::stream(rng::derive(seed, SHUFFLE_TAG), epoch as u64));
    Ok(pairs)
}

/// A mixed training set bound to a view mode, usable as a trainer input.
pub struct TrainingView<'a> {
    pub mixed: &'a MixedTrainingSet,
    pub mode: ViewMode<'a>,
}

impl TrainingSource for TrainingView<'_> {
    fn epoch_pairs(&self, epoch: usize, seed: u64) -> Result<Vec<WeightedPair>> {
        build_training_view(self.mixed, self.mode, epoch, seed)
    }
}

/// One synthetic-data row of the controlled scenario. Deserializes from
/// the full struct or from row syntax such as `"restricted:0.1"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RowRepr")]
pub struct RowSpec {
    pub name: String,
    pub spec: GeneratorSpec,
    /// Generate with the generator trained without label smoothing.
    pub without_label_smoothing: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RowRepr {
    Name(String),
    Full {
        name: String,
        spec: GeneratorSpec,
        #[serde(default)]
        without_label_smoothing: bool,
    },
}

impl TryFrom<RowRepr> for RowSpec {
    type Error = Error;

    fn try_from(r: RowRepr) -> Result<Self> {
        match r {
            RowRepr::Name(s) => Self::parse(&s),
            RowRepr::Full {
                name,
                spec,
                without_label_smoothing,
            } => Ok(Self {
                name,
                spec,
                without_label_smoothing,
            }),
        }
    }
}

impl RowSpec {
    /// Parses strategy syntax plus `sample-nols`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, spec, nols) = match s {
            "sample-nols" => (s.to_owned(), GeneratorSpec::sample(), true),
            _ => (s.to_owned(), GeneratorSpec::parse_strategy(s)?, false),
        };
        Ok(Self {
            name,
            spec,
            without_label_smoothing: nols,
        })
    }

    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        s.split(',').map(|x| Self::parse(x.trim())).collect()
    }

    /// beam, sample, sample without LS, restricted tau = 0.1, 50-best.
    pub fn standard_rows() -> Vec<Self> {
        Self::parse_list("beam,sample,sample-nols,restricted:0.1,nbest:50").expect("valid rows")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub split_ratio: f64,
    pub seed: u64,
    pub arch: ArchConfig,
    pub generator_train: TrainConfig,
    pub model_train: TrainConfig,
    pub rows: Vec<RowSpec>,
    pub n: usize,
    pub ibm1_iterations: usize,
    /// Length cap for generation.
    pub max_len: crate::decode::LengthCap,
    pub mass_ns: Vec<usize>,
    /// Train the true-source reference row.
    pub include_reference: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            split_ratio: 0.2,
            seed: 1,
            arch: ArchConfig::default(),
            generator_train: TrainConfig::default(),
            model_train: TrainConfig::default(),
            rows: RowSpec::standard_rows(),
            n: 1,
            ibm1_iterations: 15,
            max_len: crate::decode::LengthCap::default(),
            mass_ns: vec![1, 2, 5, 10],
            include_reference: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub name: String,
    /// IBM-1 target-to-source entropy of the training corpus, nats.
    pub entropy: f64,
    /// Perplexity of the trained model on the synthetic (or reference)
    /// pairs it was trained on.
    pub train_ppl: f64,
    pub dev_ppl: f64,
    pub dev_bleu: f64,
    pub pairs: usize,
    pub flagged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorReport {
    pub label_smoothing: f64,
    pub dev_ppl: f64,
    pub dev_bleu: f64,
    pub mass_curve: MassCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub seed: u64,
    pub bilingual_pairs: usize,
    pub mono_sentences: usize,
    pub generators: Vec<GeneratorReport>,
    /// Bilingual data only.
    pub baseline: ScenarioRow,
    /// One row per synthetic strategy, then the true-source reference row
    /// when `include_reference` is set.
    pub rows: Vec<ScenarioRow>,
}

impl ScenarioReport {
    pub fn row(&self, name: &str) -> Option<&ScenarioRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "seed {}: {} bilingual / {} monolingual",
            self.seed, self.bilingual_pairs, self.mono_sentences
        );
        let _ = writeln!(
            s,
            "{:<16} {:>8} {:>10} {:>9} {:>9} {:>8}",
            "row", "entropy", "train-ppl", "dev-ppl", "dev-bleu", "flagged"
        );
        for r in std::iter::once(&self.baseline).chain(&self.rows) {
            let _ = writeln!(
                s,
                "{:<16} {:>8.4} {:>10.4} {:>9.4} {:>9.2} {:>8}",
                r.name, r.entropy, r.train_ppl, r.dev_ppl, r.dev_bleu, r.flagged
            );
        }
        for g in &self.generators {
            let curve: Vec<String> = g
                .mass_curve
                .points
                .iter()
                .map(|(n, m)| format!("top{n}={m:.4}"))
                .collect();
            let _ = writeln!(
                s,
                "generator ls={}: dev-ppl {:.4} dev-bleu {:.2} {}",
                g.label_smoothing,
                g.dev_ppl,
                g.dev_bleu,
                curve.join(" ")
            );
        }
        s
    }
}

/// Seeded split of a bilingual corpus into `ratio` bilingual pairs and the
/// rest as held-out pairs whose targets play the monolingual corpus.
pub fn split_corpus(full: &ParallelCorpus, ratio: f64, seed: u64) -> Result<(ParallelCorpus, ParallelCorpus)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let n_bi = (full.len() as f64 * ratio).round() as usize;
    if n_bi == 0 || n_bi == full.len() {
        return Err(Error::InvalidArgument(format!(
            "corpus of {} pairs too small to split at {ratio}",
            full.len()
        )));
    }
    let mut pairs = full.pairs().to_vec();
    pairs.shuffle(&mut rng::seeded(rng::derive(seed, 0x5350_4c54)));
    let held = pairs.split_off(n_bi);
    Ok((ParallelCorpus::new(pairs), ParallelCorpus::new(held)))
}

fn evaluate_row(
    name: &str,
    model: &SeqModel,
    log: &TrainLog,
    train_pairs: &ParallelCorpus,
    ibm1_iterations: usize,
    flagged: usize,
) -> Result<ScenarioRow> {
    let ibm = train_ibm1(train_pairs, ibm1_iterations)?;
    let weights = target_unigram(train_pairs)?;
    let entropy = translation_entropy(&ibm.table, &weights)?;
    let selected = log
        .records
        .iter()
        .find(|r| r.update == log.selected_update)
        .expect("selected checkpoint is logged");
    Ok(ScenarioRow {
        name: name.to_owned(),
        entropy,
        train_ppl: corpus_perplexity(model, train_pairs)?,
        dev_ppl: selected.dev_perplexity,
        dev_bleu: selected.dev_bleu,
        pairs: train_pairs.len(),
        flagged,
    })
}

/// Runs the controlled back-translation experiment on one seed.
///
/// The bilingual corpus is split; target-to-source generators with and
/// without label smoothing are trained on the small part; each row's
/// strategy turns the held-out targets into a synthetic corpus; a fresh
/// source-to-target model is trained on bilingual + synthetic data. The
/// reference row uses the true held-out sources, the baseline row no
/// synthetic data at all. IBM-1 entropies are computed target-to-source on
/// each row's synthetic (or reference) pairs.
pub fn run_controlled_scenario(
    full: &ParallelCorpus,
    dev: &ParallelCorpus,
    vocab_src: &Vocabulary,
    vocab_tgt: &Vocabulary,
    cfg: &ScenarioConfig,
) -> Result<ScenarioReport> {
    let (bilingual, held_out) = split_corpus(full, cfg.split_ratio, cfg.seed)?;
    let mono = held_out.targets();
    let dev_rev = dev.reversed();
    let bi_rev = bilingual.reversed();

    let mut generators: Vec<(f64, SeqModel)> = Vec::new();
    for eps in [cfg.generator_train.label_smoothing, 0.0] {
        if generators.iter().any(|(e, _)| *e == eps) {
            continue;
        }
        let init = SeqModel::new(cfg.arch, vocab_tgt, vocab_src, rng::derive(cfg.seed, 0x4745_4e31))?;
        let tc = TrainConfig {
            label_smoothing: eps,
            seed: rng::derive(cfg.seed, 0x4745_4e32),
            ..cfg.generator_train.clone()
        };
        let (g, _) = train(init, &bi_rev, &dev_rev, &tc)?;
        generators.push((eps, g));
    }
    let generator_reports = generators
        .iter()
        .map(|(eps, g)| {
            let (dev_ppl, dev_bleu) = evaluate(g, &dev_rev)?;
            Ok(GeneratorReport {
                label_smoothing: *eps,
                dev_ppl,
                dev_bleu,
                mass_curve: cumulative_mass_curve(g, &dev_rev, &cfg.mass_ns)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let model_seed = rng::derive(cfg.seed, 0x4d4f_4431);
    let fit = |train_set: &dyn TrainingSource| -> Result<(SeqModel, TrainLog)> {
        let init = SeqModel::new(cfg.arch, vocab_src, vocab_tgt, model_seed)?;
        let tc = TrainConfig {
            seed: rng::derive(cfg.seed, 0x4d4f_4432),
            ..cfg.model_train.clone()
        };
        train_dyn(init, train_set, dev, &tc)
    };

    let (base_model, base_log) = fit(&bilingual)?;
    let baseline = evaluate_row("baseline", &base_model, &base_log, &bilingual, cfg.ibm1_iterations, 0)?;

    let mut rows = Vec::new();
    for (i, row) in cfg.rows.iter().enumerate() {
        let eps = if row.without_label_smoothing {
            0.0
        } else {
            cfg.generator_train.label_smoothing
        };
        let g = &generators.iter().find(|(e, _)| *e == eps).expect("generator trained").1;
        let spec = GeneratorSpec {
            max_len: cfg.max_len,
            ..row.spec.clone()
        };
        let n = if spec.strategy.is_deterministic() { 1 } else { cfg.n };
        let pseudo = generate_pseudo_corpus(g, &mono, &spec, n, rng::derive(cfg.seed, 0x524f_5700 + i as u64))?;
        let mixed = MixedTrainingSet::new(bilingual.clone(), pseudo);
        let view = TrainingView {
            mixed: &mixed,
            mode: ViewMode::Static,
        };
        let (m, log) = fit(&view)?;
        let synthetic = mixed.pseudo.to_parallel();
        rows.push(evaluate_row(
            &row.name,
            &m,
            &log,
            &synthetic,
            cfg.ibm1_iterations,
            mixed.pseudo.flagged_count(),
        )?);
    }

    if cfg.include_reference {
        let reference_set = bilingual.concat(&held_out);
        let (ref_model, ref_log) = fit(&reference_set)?;
        rows.push(evaluate_row("reference", &ref_model, &ref_log, &held_out, cfg.ibm1_iterations, 0)?);
    }

    Ok(ScenarioReport {
        seed: cfg.seed,
        bilingual_pairs: bilingual.len(),
        mono_sentences: mono.len(),
        generators: generator_reports,
        baseline,
        rows,
    })
}

fn train_dyn(
    init: SeqModel,
    train_set: &dyn TrainingSource,
    dev: &ParallelCorpus,
    cfg: &TrainConfig,
) -> Result<(SeqModel, TrainLog)> {
    struct Dyn<'a>(&'a dyn TrainingSource);
    impl TrainingSource for Dyn<'_> {
        fn epoch_pairs(&self, epoch: usize, seed: u64) -> Result<Vec<WeightedPair>> {
            self.0.epoch_pairs(epoch, seed)
        }
    }
    train(init, &Dyn(train_set), dev, cfg)
}

#[cfg(test)]
mod tests;
