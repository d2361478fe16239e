//! Sparse featurization of utterances.
//!
//! A feature vector is three concatenated blocks:
//! character n-gram counts, one flag per regex pattern, and a fixed
//! lexical-syntactic block.

use std::collections::{BTreeMap, BTreeSet};

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use super::tokenizer::tokenize;
use super::NluError;
use crate::training_data::{RegexPatternDef, TrainingExample};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dimension: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            entries: Vec::new(),
        }
    }

    /// Builds a vector from `(index, value)` pairs. Repeated indices are
    /// summed and zeros dropped.
    pub fn from_pairs(dimension: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, v) in pairs {
            assert!(i < dimension, "index {i} out of range for dimension {dimension}");
            *acc.entry(i).or_insert(0.0) += v;
        }
        Self {
            dimension,
            entries: acc.into_iter().filter(|&(_, v)| v != 0.0).collect(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Non-zero entries in ascending index order.
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| dense[i] * v).sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_pairs(self.dimension, self.entries.iter().map(|&(i, v)| (i, v * factor)))
    }
}

/// Character n-gram vocabulary. Indices follow lexicographic n-gram order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    index: BTreeMap<String, usize>,
    pub n_min: usize,
    pub n_max: usize,
}

/// Every character n-gram of each (lowercased) token, never crossing a
/// token boundary.
pub(crate) fn char_ngrams(text: &str, n_min: usize, n_max: usize) -> Vec<String> {
    let mut grams = Vec::new();
    for token in tokenize(text) {
        let chars: Vec<char> = token.text.to_lowercase().chars().collect();
        for n in n_min..=n_max {
            if n > chars.len() {
                break;
            }
            for w in chars.windows(n) {
                grams.push(w.iter().collect());
            }
        }
    }
    grams
}

impl Vocabulary {
    pub fn build(examples: &[TrainingExample], n_min: usize, n_max: usize) -> Result<Self, NluError> {
        if !(1 <= n_min && n_min <= n_max && n_max <= 8) {
            return Err(NluError::InvalidNgramRange { n_min, n_max });
        }
        if examples.is_empty() {
            return Err(NluError::NoTrainingData);
        }
        let grams: BTreeSet<String> = examples
            .iter()
            .flat_map(|e| char_ngrams(&e.text, n_min, n_max))
            .collect();
        Ok(Self {
            index: grams.into_iter().enumerate().map(|(i, g)| (g, i)).collect(),
            n_min,
            n_max,
        })
    }

    pub fn dimension(&self) -> usize {
        self.index.len()
    }

    pub fn get(&self, gram: &str) -> Option<usize> {
        self.index.get(gram).copied()
    }

    pub fn grams(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }
}

/// Compiled regex patterns. Matching is case-insensitive.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<RegexPatternDef>", into = "Vec<RegexPatternDef>")]
pub struct PatternSet {
    defs: Vec<RegexPatternDef>,
    compiled: Vec<Regex>,
}

impl PartialEq for PatternSet {
    fn eq(&self, other: &Self) -> bool {
        self.defs == other.defs
    }
}

impl PatternSet {
    pub fn compile(defs: &[RegexPatternDef]) -> Result<Self, NluError> {
        let compiled = defs
            .iter()
            .map(|d| {
                RegexBuilder::new(&d.pattern)
                    .case_insensitive(true)
                    .build()
                    .map_err(|e| NluError::InvalidPattern {
                        name: d.name.clone(),
                        message: e.to_string(),
                    })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            defs: defs.to_vec(),
            compiled,
        })
    }

    pub fn empty() -> Self {
        Self {
            defs: Vec::new(),
            compiled: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn defs(&self) -> &[RegexPatternDef] {
        &self.defs
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = (&RegexPatternDef, &Regex)> {
        self.defs.iter().zip(&self.compiled)
    }
}

impl TryFrom<Vec<RegexPatternDef>> for PatternSet {
    type Error = NluError;

    fn try_from(defs: Vec<RegexPatternDef>) -> Result<Self, Self::Error> {
        Self::compile(&defs)
    }
}

impl From<PatternSet> for Vec<RegexPatternDef> {
    fn from(p: PatternSet) -> Self {
        p.defs
    }
}

/// Width of the lexical-syntactic block: digit flag, lowercase flag, four
/// token-count buckets and three mean-token-length buckets.
pub const LEXICAL_FEATURES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexicalConfig {
    pub enabled: bool,
}

impl Default for LexicalConfig {
    fn default() -> Self {
        Self { enabled: true }
    }
}

/// Indices (0-based within the block) of active lexical features.
pub fn lexical_features(utterance: &str) -> Vec<usize> {
    let mut active = Vec::new();
    if utterance.chars().any(|c| c.is_ascii_digit()) {
        active.push(0);
    }
    let has_alpha = utterance.chars().any(char::is_alphabetic);
    if has_alpha && !utterance.chars().any(char::is_uppercase) {
        active.push(1);
    }
    let tokens = tokenize(utterance);
    if !tokens.is_empty() {
        active.push(2 + tokens.len().min(4) - 1);
        let total: usize = tokens.iter().map(|t| t.end - t.start).sum();
        let mean = total as f64 / tokens.len() as f64;
        active.push(if mean <= 3.0 {
            6
        } else if mean <= 6.0 {
            7
        } else {
            8
        });
    }
    active
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub vocabulary: Vocabulary,
    pub patterns: PatternSet,
    pub lexical: LexicalConfig,
}

impl Featurizer {
    pub fn new(vocabulary: Vocabulary, patterns: PatternSet, lexical: LexicalConfig) -> Self {
        Self {
            vocabulary,
            patterns,
            lexical,
        }
    }

    pub fn dimension(&self) -> usize {
        self.vocabulary.dimension() + self.patterns.len() + if self.lexical.enabled { LEXICAL_FEATURES } else { 0 }
    }

    pub fn featurize(&self, utterance: &str) -> SparseVector {
        featurize(utterance, &self.vocabulary, &self.patterns, self.lexical)
    }
}

/// Out-of-vocabulary n-grams are dropped.
pub fn featurize(
    utterance: &str,
    vocabulary: &Vocabulary,
    patterns: &PatternSet,
    lexical: LexicalConfig,
) -> SparseVector {
    let v = vocabulary.dimension();
    let p = patterns.len();
    let dimension = v + p + if lexical.enabled { LEXICAL_FEATURES } else { 0 };
    let mut pairs: Vec<(usize, f64)> = char_ngrams(utterance, vocabulary.n_min, vocabulary.n_max)
        .iter()
        .filter_map(|g| vocabulary.get(g))
        .map(|i| (i, 1.0))
        .collect();
    for (k, (_, re)) in patterns.iter().enumerate() {
        if re.is_match(utterance) {
            pairs.push((v + k, 1.0));
        }
    }
    if lexical.enabled {
        pairs.extend(lexical_features(utterance).into_iter().map(|i| (v + p + i, 1.0)));
    }
    SparseVector::from_pairs(dimension, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(texts: &[&str], lo: usize, hi: usize) -> Vocabulary {
        let ex: Vec<_> = texts.iter().map(|t| TrainingExample::new(*t, "x")).collect();
        Vocabulary::build(&ex, lo, hi).unwrap()
    }

    #[test]
    fn vocabulary_enumeration() {
        let v = vocab(&["ab"], 1, 2);
        assert_eq!(v.grams().collect::<Vec<_>>(), ["a", "ab", "b"]);
        assert_eq!(v.dimension(), 3);
        assert_eq!(vocab(&["ab", "ab"], 1, 2), v);
    }

    #[test]
    fn no_cross_token_grams() {
        let v = vocab(&["ab cd"], 2, 2);
        assert_eq!(v.grams().collect::<Vec<_>>(), ["ab", "cd"]);
    }

    #[test]
    fn vocabulary_errors() {
        assert!(matches!(Vocabulary::build(&[], 1, 4), Err(NluError::NoTrainingData)));
        let ex = [TrainingExample::new("a", "x")];
        assert!(Vocabulary::build(&ex, 0, 2).is_err());
        assert!(Vocabulary::build(&ex, 3, 2).is_err());
        assert!(Vocabulary::build(&ex, 1, 9).is_err());
    }

    #[test]
    fn ngram_counts() {
        // lexicographic order gives a:0, aa:1, ab:2, b:3
        let v = vocab(&["aab"], 1, 2);
        let x = featurize("aab", &v, &PatternSet::empty(), LexicalConfig { enabled: false });
        let a = v.get("a").unwrap();
        let b = v.get("b").unwrap();
        let aa = v.get("aa").unwrap();
        let ab = v.get("ab").unwrap();
        assert_eq!(x.get(a), 2.0);
        assert_eq!(x.get(b), 1.0);
        assert_eq!(x.get(aa), 1.0);
        assert_eq!(x.get(ab), 1.0);
        assert_eq!(x.nnz(), 4);
    }

    #[test]
    fn regex_flag() {
        let v = vocab(&["salam"], 1, 2);
        let p = PatternSet::compile(&[
            RegexPatternDef::new("money", "fee|fees"),
            RegexPatternDef::new("place", "hostel"),
        ])
        .unwrap();
        let x = featurize("fast ki FEES", &v, &p, LexicalConfig::default());
        assert_eq!(x.get(v.dimension()), 1.0);
        assert_eq!(x.get(v.dimension() + 1), 0.0);
    }

    #[test]
    fn oov_keeps_lexical_block() {
        let v = vocab(&["ab"], 1, 2);
        let x = featurize("xyz", &v, &PatternSet::empty(), LexicalConfig::default());
        assert!(x.entries().iter().all(|&(i, _)| i >= v.dimension()));
        let lex: Vec<usize> = x.entries().iter().map(|&(i, _)| i - v.dimension()).collect();
        // all lowercase, one token, mean length 3
        assert_eq!(lex, [1, 2, 6]);
    }

    #[test]
    fn lexical_buckets() {
        assert_eq!(lexical_features("Fee 2024 kitni hai batao"), [0, 5, 7]);
        assert_eq!(lexical_features("scholarship"), [1, 2, 8]);
        assert!(lexical_features("").is_empty());
    }

    #[test]
    fn invalid_pattern_is_config_error() {
        let err = PatternSet::compile(&[RegexPatternDef::new("bad", "(fee")]).unwrap_err();
        assert!(matches!(err, NluError::InvalidPattern { .. }));
    }

    #[test]
    fn sparse_vector_drops_zeros() {
        let v = SparseVector::from_pairs(4, [(1, 1.0), (1, -1.0), (3, 2.0)]);
        assert_eq!(v.entries(), &[(3, 2.0)]);
    }
}
