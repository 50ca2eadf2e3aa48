//! Vocabularies and tokenized corpora.
//!
//! Text files hold one pre-tokenized sentence per line; tokens are split on
//! whitespace. Vocabulary files hold one token per line and the line number
//! is the id, with the four control tokens first.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const BOS: TokenId = 1;
pub const EOS: TokenId = 2;
pub const UNK: TokenId = 3;

pub const RESERVED: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

/// Bijection between token strings and dense ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Counts whitespace tokens over `lines` and keeps every token seen at
    /// least `min_count` times, most frequent first, ties broken
    /// lexicographically.
    pub fn build<I, S>(lines: I, min_count: usize) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if min_count == 0 {
            return Err(Error::InvalidArgument("min-count must be >= 1".into()));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut n_lines = 0usize;
        for line in lines {
            n_lines += 1;
            for tok in line.as_ref().split_whitespace() {
                *counts.entry(tok.to_owned()).or_default() += 1;
            }
        }
        if n_lines == 0 || counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut kept: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(tok, c)| *c >= min_count && !RESERVED.contains(&tok.as_str()))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_tokens(kept.into_iter().map(|(t, _)| t))
    }

    /// Builds a vocabulary from non-reserved tokens in id order.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut all: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        all.extend(tokens.into_iter().map(Into::into));
        Self::from_full_list(all)
    }

    fn from_full_list(tokens: Vec<String>) -> Result<Self> {
        for (i, r) in RESERVED.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*r) {
                return Err(Error::Parse(format!(
                    "vocabulary must start with reserved token {r} at id {i}"
                )));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Parse(format!("invalid token {t:?} at id {i}")));
            }
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(Error::Parse(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Whitespace-tokenizes `line`; unknown tokens map to UNK.
    pub fn encode(&self, line: &str) -> Vec<TokenId> {
        line.split_whitespace()
            .map(|t| self.id(t).unwrap_or(UNK))
            .collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or(RESERVED[UNK as usize]))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    /// SHA-256 of the on-disk representation.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_file_string().as_bytes()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_full_list(text.lines().map(str::to_owned).collect())
    }
}

/// A non-empty sequence of token ids without BOS/EOS.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sentence(Vec<TokenId>);

impl Sentence {
    pub fn new(ids: Vec<TokenId>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::InvalidArgument("empty sentence".into()));
        }
        Ok(Self(ids))
    }

    /// Checks every id against a vocabulary size.
    pub fn check_ids(&self, vocab_size: usize) -> Result<()> {
        check_ids(&self.0, vocab_size)
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_ids(self) -> Vec<TokenId> {
        self.0
    }
}

impl AsRef<[TokenId]> for Sentence {
    fn as_ref(&self) -> &[TokenId] {
        &self.0
    }
}

pub(crate) fn check_ids(ids: &[TokenId], vocab_size: usize) -> Result<()> {
    match ids.iter().find(|&&id| id as usize >= vocab_size) {
        Some(&id) => Err(Error::IdOutOfRange {
            id,
            size: vocab_size,
        }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub source: Sentence,
    pub target: Sentence,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelCorpus {
    pairs: Vec<SentencePair>,
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<SentencePair>) -> Self {
        Self { pairs }
    }

    pub fn from_id_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<TokenId>, Vec<TokenId>)>,
    {
        pairs
            .into_iter()
            .map(|(s, t)| {
                Ok(SentencePair {
                    source: Sentence::new(s)?,
                    target: Sentence::new(t)?,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn push(&mut self, pair: SentencePair) {
        self.pairs.push(pair);
    }

    /// Swaps source and target of every pair.
    pub fn reversed(&self) -> Self {
        Self {
            pairs: self
                .pairs
                .iter()
                .map(|p| SentencePair {
                    source: p.target.clone(),
                    target: p.source.clone(),
                })
                .collect(),
        }
    }

    pub fn targets(&self) -> MonoCorpus {
        MonoCorpus::new(self.pairs.iter().map(|p| p.target.clone()).collect())
    }

    pub fn concat(&self, other: &ParallelCorpus) -> Self {
        let mut pairs = self.pairs.clone();
        pairs.extend(other.pairs.iter().cloned());
        Self { pairs }
    }

    pub fn save(
        &self,
        src_path: impl AsRef<Path>,
        tgt_path: impl AsRef<Path>,
        vocab_src: &Vocabulary,
        vocab_tgt: &Vocabulary,
    ) -> Result<()> {
        write_lines(src_path, self.pairs.iter().map(|p| vocab_src.decode(p.source.ids())))?;
        write_lines(tgt_path, self.pairs.iter().map(|p| vocab_tgt.decode(p.target.ids())))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonoCorpus {
    sentences: Vec<Sentence>,
}

impl MonoCorpus {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        Self { sentences }
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn save(&self, path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<()> {
        write_lines(path, self.sentences.iter().map(|s| vocab.decode(s.ids())))
    }
}

/// Anything with a target side to count over.
pub trait TargetSide {
    fn target_sentences(&self) -> Box<dyn Iterator<Item = &Sentence> + '_>;
}

impl TargetSide for ParallelCorpus {
    fn target_sentences(&self) -> Box<dyn Iterator<Item = &Sentence> + '_> {
        Box::new(self.pairs.iter().map(|p| &p.target))
    }
}

impl TargetSide for MonoCorpus {
    fn target_sentences(&self) -> Box<dyn Iterator<Item = &Sentence> + '_> {
        Box::new(self.sentences.iter())
    }
}

/// Relative frequency of every target token in the corpus.
pub fn target_unigram(corpus: &dyn TargetSide) -> Result<BTreeMap<TokenId, f64>> {
    let mut counts: BTreeMap<TokenId, usize> = BTreeMap::new();
    let mut total = 0usize;
    for s in corpus.target_sentences() {
        for &id in s.ids() {
            *counts.entry(id).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(counts
        .into_iter()
        .map(|(id, c)| (id, c as f64 / total as f64))
        .collect())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_owned).collect())
}

fn encode_lines(path: &Path, lines: &[String], vocab: &Vocabulary) -> Result<Vec<Sentence>> {
    lines
        .iter()
        .enumerate()
        .map(|(i, line)| {
            let ids = vocab.encode(line);
            if ids.is_empty() {
                return Err(Error::EmptyLine {
                    path: path.to_owned(),
                    line: i + 1,
                });
            }
            Sentence::new(ids)
        })
        .collect()
}

pub fn load_parallel(
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
    vocab_src: &Vocabulary,
    vocab_tgt: &Vocabulary,
) -> Result<ParallelCorpus> {
    let (src_path, tgt_path) = (src_path.as_ref(), tgt_path.as_ref());
    let src = read_lines(src_path)?;
    let tgt = read_lines(tgt_path)?;
    if src.len() != tgt.len() {
        return Err(Error::LineCountMismatch(src.len(), tgt.len()));
    }
    let src = encode_lines(src_path, &src, vocab_src)?;
    let tgt = encode_lines(tgt_path, &tgt, vocab_tgt)?;
    Ok(ParallelCorpus::new(
        src.into_iter()
            .zip(tgt)
            .map(|(source, target)| SentencePair { source, target })
            .collect(),
    ))
}

pub fn load_mono(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<MonoCorpus> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    Ok(MonoCorpus::new(encode_lines(path, &lines, vocab)?))
}

pub fn read_text_lines(path: impl AsRef<Path>) -> Result<Vec<String>> {
    read_lines(path.as_ref())
}

pub(crate) fn write_lines<I>(path: impl AsRef<Path>, lines: I) -> Result<()>
where
    I: IntoIterator<Item = String>,
{
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for line in lines {
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vocab_orders_reserved_then_frequency() {
        let v = Vocabulary::build(["a b", "a"], 1).unwrap();
        assert_eq!(v.tokens(), &["<pad>", "<s>", "</s>", "<unk>", "a", "b"]);
        assert_eq!(v.len(), 6);
    }

    #[test]
    fn vocab_min_count_drops_rare_tokens() {
        let v = Vocabulary::build(["a b", "a"], 2).unwrap();
        assert!(v.id("a").is_some());
        assert!(v.id("b").is_none());
        assert_eq!(v.encode("b"), vec![UNK]);
    }

    #[test]
    fn vocab_ties_are_lexicographic() {
        let v = Vocabulary::build(["z y x", "y x z"], 1).unwrap();
        assert_eq!(&v.tokens()[4..], &["x", "y", "z"]);
    }

    #[test]
    fn vocab_rejects_empty_input() {
        let err = Vocabulary::build(Vec::<String>::new(), 1).unwrap_err();
        assert_eq!(err.to_string(), "empty corpus");
        assert!(Vocabulary::build(["a"], 0).is_err());
    }

    #[test]
    fn vocab_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let v = Vocabulary::build(["c a b a", "b"], 1).unwrap();
        let p = dir.path().join("v.txt");
        v.save(&p).unwrap();
        let back = Vocabulary::load(&p).unwrap();
        assert_eq!(v, back);
        assert_eq!(v.hash(), back.hash());
    }

    #[test]
    fn parallel_load_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let s = dir.path().join("s.txt");
        let t = dir.path().join("t.txt");
        fs::write(&s, "a b\nb\na a\n").unwrap();
        fs::write(&t, "x\ny y\nx y\n").unwrap();
        let vs = Vocabulary::build(["a b"], 1).unwrap();
        let vt = Vocabulary::build(["x y"], 1).unwrap();
        let c = load_parallel(&s, &t, &vs, &vt).unwrap();
        assert_eq!(c.len(), 3);

        // save -> load keeps ids
        let s2 = dir.path().join("s2.txt");
        let t2 = dir.path().join("t2.txt");
        c.save(&s2, &t2, &vs, &vt).unwrap();
        assert_eq!(load_parallel(&s2, &t2, &vs, &vt).unwrap(), c);

        fs::write(&t, "x\ny\nx\ny\n").unwrap();
        let err = load_parallel(&s, &t, &vs, &vt).unwrap_err();
        assert_eq!(err.to_string(), "line-count mismatch 3 vs 4");

        fs::write(&t, "x\n\nx\n").unwrap();
        match load_parallel(&s, &t, &vs, &vt).unwrap_err() {
            Error::EmptyLine { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unigram_counts() {
        let v = Vocabulary::build(["a a b"], 1).unwrap();
        let mono = MonoCorpus::new(vec![Sentence::new(v.encode("a a b")).unwrap()]);
        let u = target_unigram(&mono).unwrap();
        assert!((u[&v.id("a").unwrap()] - 2.0 / 3.0).abs() < 1e-15);
        assert!((u[&v.id("b").unwrap()] - 1.0 / 3.0).abs() < 1e-15);

        let single = MonoCorpus::new(vec![Sentence::new(vec![7]).unwrap()]);
        assert_eq!(target_unigram(&single).unwrap()[&7], 1.0);

        // two equal-length sentences over disjoint tokens: hand count 1/4 each
        let c = ParallelCorpus::from_id_pairs([(vec![4], vec![4, 5]), (vec![4], vec![6, 7])])
            .unwrap();
        let u = target_unigram(&c).unwrap();
        assert_eq!(u.len(), 4);
        assert!(u.values().all(|&p| (p - 0.25).abs() < 1e-15));

        assert!(target_unigram(&MonoCorpus::default()).is_err());
    }

    #[test]
    fn sentence_checks() {
        assert!(Sentence::new(vec![]).is_err());
        let s = Sentence::new(vec![4, 9]).unwrap();
        assert!(s.check_ids(10).is_ok());
        assert!(s.check_ids(9).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(words in prop::collection::vec("[a-e]{1,3}", 1..12)) {
            let line = words.join(" ");
            let v = Vocabulary::build([line.as_str()], 1).unwrap();
            prop_assert_eq!(v.decode(&v.encode(&line)), line);
        }

        #[test]
        fn unigram_is_distribution(sents in prop::collection::vec(prop::collection::vec(0u32..20, 1..6), 1..10)) {
            let mono = MonoCorpus::new(sents.into_iter().map(|s| Sentence::new(s).unwrap()).collect());
            let u = target_unigram(&mono).unwrap();
            let total: f64 = u.values().sum();
            prop_assert!(u.values().all(|&p| p >= 0.0));
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
    }
}
