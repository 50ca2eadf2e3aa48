//! Python bindings: vocabularies, parallel corpora, the sequence model,
//! generation, IBM-1, BLEU, perplexity and the toy task.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use rayon::prelude::*;

use btlab_core::corpus::{self, TokenId};
use btlab_core::{self as core, Error, StepModel};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(module = "btlab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Vocabulary(core::Vocabulary);

#[pymethods]
impl Vocabulary {
    #[staticmethod]
    #[pyo3(signature = (lines, min_count = 1))]
    fn build(lines: Vec<String>, min_count: usize) -> PyResult<Self> {
        core::Vocabulary::build(&lines, min_count).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        core::Vocabulary::load(path).map(Self).map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(err)
    }

    fn encode(&self, line: &str) -> Vec<TokenId> {
        self.0.encode(line)
    }

    fn decode(&self, ids: Vec<TokenId>) -> String {
        self.0.decode(&ids)
    }

    fn tokens(&self) -> Vec<String> {
        self.0.tokens().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(module = "btlab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct ParallelCorpus(core::ParallelCorpus);

#[pymethods]
impl ParallelCorpus {
    #[staticmethod]
    fn from_lines(src: Vec<String>, tgt: Vec<String>, src_vocab: &Vocabulary, tgt_vocab: &Vocabulary) -> PyResult<Self> {
        if src.len() != tgt.len() {
            return Err(err(Error::LineCountMismatch(src.len(), tgt.len())));
        }
        let pairs = src.iter().zip(&tgt).map(|(s, t)| (src_vocab.0.encode(s), tgt_vocab.0.encode(t)));
        core::ParallelCorpus::from_id_pairs(pairs).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(src: &str, tgt: &str, src_vocab: &Vocabulary, tgt_vocab: &Vocabulary) -> PyResult<Self> {
        corpus::load_parallel(src, tgt, &src_vocab.0, &tgt_vocab.0).map(Self).map_err(err)
    }

    fn save(&self, src: &str, tgt: &str, src_vocab: &Vocabulary, tgt_vocab: &Vocabulary) -> PyResult<()> {
        self.0.save(src, tgt, &src_vocab.0, &tgt_vocab.0).map_err(err)
    }

    fn reversed(&self) -> Self {
        Self(self.0.reversed())
    }

    fn pairs(&self) -> Vec<(Vec<TokenId>, Vec<TokenId>)> {
        self.0.pairs().iter().map(|p| (p.source.ids().to_vec(), p.target.ids().to_vec())).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// A generated sequence: token ids, total log-probability, length-normalized
/// score and whether it ended with EOS.
#[pyclass(module = "btlab", frozen, get_all)]
struct Hypothesis {
    ids: Vec<TokenId>,
    logprob: f64,
    score: f64,
    finished: bool,
}

impl From<core::Hypothesis> for Hypothesis {
    fn from(h: core::Hypothesis) -> Self {
        Self {
            finished: h.is_finished(),
            ids: h.ids,
            logprob: h.logprob,
            score: h.score,
        }
    }
}

fn spec(strategy: &str, max_len: Option<usize>) -> PyResult<core::GeneratorSpec> {
    let mut s = core::GeneratorSpec::parse_strategy(strategy).map_err(err)?;
    if let Some(n) = max_len {
        s = s.with_max_len(core::LengthCap::fixed(n));
    }
    s.validate().map_err(err)?;
    Ok(s)
}

#[pyclass(module = "btlab", frozen)]
struct SeqModel(core::SeqModel);

#[pymethods]
impl SeqModel {
    /// Architecture keys as in the JSON config: embed_dim, hidden_dim,
    /// max_positions, attention.
    #[new]
    #[pyo3(signature = (src_vocab, tgt_vocab, seed = 1, arch_json = None))]
    fn new(src_vocab: &Vocabulary, tgt_vocab: &Vocabulary, seed: u64, arch_json: Option<&str>) -> PyResult<Self> {
        let arch: core::ArchConfig = match arch_json {
            Some(j) => serde_json::from_str(j).map_err(json_err)?,
            None => core::ArchConfig::default(),
        };
        core::SeqModel::new(arch, &src_vocab.0, &tgt_vocab.0, seed).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str, src_vocab: &Vocabulary, tgt_vocab: &Vocabulary) -> PyResult<Self> {
        core::SeqModel::load(path, &src_vocab.0, &tgt_vocab.0).map(Self).map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(err)
    }

    fn num_params(&self) -> usize {
        self.0.num_params()
    }

    fn fingerprint(&self) -> String {
        self.0.fingerprint()
    }

    /// Trains a copy of this model and returns it with the training log as
    /// JSON lines. `config_json` holds training keys such as
    /// `max_updates` or `label_smoothing`.
    #[pyo3(signature = (train, dev, config_json = None))]
    fn train(
        &self,
        py: Python<'_>,
        train: &ParallelCorpus,
        dev: &ParallelCorpus,
        config_json: Option<&str>,
    ) -> PyResult<(SeqModel, String)> {
        let cfg: core::TrainConfig = match config_json {
            Some(j) => serde_json::from_str(j).map_err(json_err)?,
            None => core::TrainConfig::default(),
        };
        let init = self.0.clone();
        let (m, log) = py
            .detach(|| core::train(init, &train.0, &dev.0, &cfg))
            .map_err(err)?;
        Ok((SeqModel(m), log.to_jsonl()))
    }

    /// Generates one output per source with `strategy` such as `beam:5`,
    /// `sample`, `restricted:0.1` or `nbest:50`. Output `i` draws from
    /// random stream `i` of `seed`.
    #[pyo3(signature = (sources, strategy = "beam", seed = 1, max_len = None))]
    fn generate(
        &self,
        py: Python<'_>,
        sources: Vec<Vec<TokenId>>,
        strategy: &str,
        seed: u64,
        max_len: Option<usize>,
    ) -> PyResult<Vec<Hypothesis>> {
        let spec = spec(strategy, max_len)?;
        let out = py
            .detach(|| {
                sources
                    .par_iter()
                    .enumerate()
                    .map(|(i, s)| core::generate(&self.0, s, &spec, &mut core::rng::stream(seed, i as u64)))
                    .collect::<core::Result<Vec<_>>>()
            })
            .map_err(err)?;
        Ok(out.into_iter().map(Hypothesis::from).collect())
    }

    /// Probability distribution over the next target token.
    fn next_distribution(&self, source: Vec<TokenId>, prefix: Vec<TokenId>) -> PyResult<Vec<f64>> {
        let ctx = self.0.prepare(&source).map_err(err)?;
        Ok(self.0.next_distribution(&ctx, &prefix))
    }

    fn perplexity(&self, py: Python<'_>, corpus: &ParallelCorpus) -> PyResult<f64> {
        py.detach(|| core::corpus_perplexity(&self.0, &corpus.0)).map_err(err)
    }

    /// `[(N, mean cumulative mass of the N most likely tokens)]` over
    /// forced-decoding positions.
    fn mass_curve(&self, py: Python<'_>, corpus: &ParallelCorpus, ns: Vec<usize>) -> PyResult<Vec<(usize, f64)>> {
        py.detach(|| core::cumulative_mass_curve(&self.0, &corpus.0, &ns))
            .map(|c| c.points)
            .map_err(err)
    }
}

/// Trains IBM-1 and returns `(entropy in nats, per-iteration log-likelihood)`.
#[pyfunction]
#[pyo3(signature = (corpus, iterations = 15))]
fn ibm1_entropy(py: Python<'_>, corpus: &ParallelCorpus, iterations: usize) -> PyResult<(f64, Vec<f64>)> {
    py.detach(|| {
        let t = core::train_ibm1(&corpus.0, iterations)?;
        let h = core::translation_entropy(&t.table, &corpus::target_unigram(&corpus.0)?)?;
        Ok((h, t.log_likelihood))
    })
    .map_err(err)
}

/// IBM-1 translation probability `t(f|e)`; `e = None` is the NULL word.
#[pyfunction]
#[pyo3(signature = (corpus, e, f, iterations = 15))]
fn ibm1_prob(corpus: &ParallelCorpus, e: Option<TokenId>, f: TokenId, iterations: usize) -> PyResult<f64> {
    let t = core::train_ibm1(&corpus.0, iterations).map_err(err)?;
    Ok(t.table.prob(e, f))
}

/// Corpus BLEU-4 in `[0, 100]` over whitespace-tokenized lines.
#[pyfunction]
fn bleu(hypotheses: Vec<String>, references: Vec<String>) -> PyResult<f64> {
    fn split(v: &[String]) -> Vec<Vec<&str>> {
        v.iter().map(|s| s.split_whitespace().collect()).collect()
    }
    core::corpus_bleu(&split(&hypotheses), &split(&references))
        .map(|r| r.score)
        .map_err(err)
}

/// Standard toy task: `(src_vocab, tgt_vocab, bilingual, dev)`.
#[pyfunction]
#[pyo3(signature = (seed = 1, bilingual = 10_000, mono = 40_000, dev = 500))]
fn toy_task(seed: u64, bilingual: usize, mono: usize, dev: usize) -> PyResult<(Vocabulary, Vocabulary, ParallelCorpus, ParallelCorpus)> {
    let cfg = core::ToyConfig::default().with_sizes(bilingual, mono, dev);
    let t = core::make_toy_task(&cfg, seed).map_err(err)?;
    Ok((Vocabulary(t.src_vocab), Vocabulary(t.tgt_vocab), ParallelCorpus(t.bilingual), ParallelCorpus(t.dev)))
}

#[pymodule]
fn btlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Vocabulary>()?;
    m.add_class::<ParallelCorpus>()?;
    m.add_class::<SeqModel>()?;
    m.add_class::<Hypothesis>()?;
    m.add_function(wrap_pyfunction!(ibm1_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(ibm1_prob, m)?)?;
    m.add_function(wrap_pyfunction!(bleu, m)?)?;
    m.add_function(wrap_pyfunction!(toy_task, m)?)?;
    Ok(())
}
