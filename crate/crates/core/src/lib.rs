//! Back-translation as a data generator: corpora, a small attentional
//! sequence model, decoding strategies, pseudo-corpus generation, IBM-1
//! alignment entropy, diagnostics and a synthetic channel for exact checks.

pub mod analysis;
pub mod augment;
pub mod corpus;
pub mod decode;
pub mod error;
pub mod ibm1;
pub mod rng;
pub mod seqmodel;
pub mod toyharness;

pub use analysis::{corpus_bleu, corpus_perplexity, cumulative_mass_curve, BleuReport, MassCurve};
pub use augment::{
    build_training_view, generate_pseudo_corpus, run_controlled_scenario, MixedTrainingSet,
    PseudoCorpus, RowSpec, ScenarioConfig, ScenarioReport, TrainingView, ViewMode,
};
pub use corpus::{MonoCorpus, ParallelCorpus, Sentence, SentencePair, TokenId, Vocabulary};
pub use decode::{generate, GeneratorSpec, HypStatus, Hypothesis, LengthCap, RenormMode, Strategy};
pub use error::{Error, Result};
pub use ibm1::{train_ibm1, translation_entropy, Ibm1Table, Ibm1Training};
pub use seqmodel::{train, ArchConfig, SeqModel, StepModel, TrainConfig, TrainLog};
pub use toyharness::{make_toy_task, ToyConfig, ToyTask};
