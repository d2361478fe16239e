use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::MinerError;

const BUNDLED_STOPWORDS: &str = include_str!("../../data/roman_urdu_stopwords.txt");

/// The bundled Roman Urdu function-word list.
pub fn default_stopwords() -> BTreeSet<String> {
    parse_stopwords(BUNDLED_STOPWORDS)
}

/// One word per line; `#` starts a comment.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    /// Zero-based position of the document in the raw input.
    pub id: usize,
    /// The source question, whitespace-normalized.
    pub text: String,
    pub tokens: Vec<usize>,
}

/// Documents plus the lexicographically ordered term list they index into.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub docs: Vec<TokenizedDoc>,
    pub vocabulary: Vec<String>,
}

impl Corpus {
    pub fn token_count(&self) -> usize {
        self.docs.iter().map(|d| d.tokens.len()).sum()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vocabulary.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessOptions {
    pub min_tokens: usize,
    pub max_tokens: usize,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            min_tokens: 2,
            max_tokens: 50,
        }
    }
}

fn clean_token(raw: &str) -> String {
    raw.to_lowercase()
        .trim_matches(|c: char| c.is_ascii_punctuation() || c == '؟' || c == '،')
        .to_string()
}

/// Lowercases, splits on whitespace, strips edge punctuation, removes
/// stopwords and drops documents whose remaining length falls outside
/// `[min_tokens, max_tokens]`.
pub fn preprocess_corpus<S: AsRef<str>>(
    docs: &[S],
    stopwords: &BTreeSet<String>,
    options: &PreprocessOptions,
) -> Result<Corpus, MinerError> {
    let mut kept: Vec<(usize, String, Vec<String>)> = Vec::new();
    for (id, raw) in docs.iter().enumerate() {
        let raw = raw.as_ref();
        let terms: Vec<String> = raw
            .split_whitespace()
            .map(clean_token)
            .filter(|t| !t.is_empty() && !stopwords.contains(t))
            .collect();
        if terms.is_empty() || terms.len() < options.min_tokens || terms.len() > options.max_tokens {
            continue;
        }
        let text = raw.split_whitespace().collect::<Vec<_>>().join(" ");
        kept.push((id, text, terms));
    }
    if kept.is_empty() {
        return Err(MinerError::EmptyCorpus);
    }
    let vocabulary: Vec<String> = kept
        .iter()
        .flat_map(|(_, _, t)| t.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = vocabulary.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let docs = kept
        .iter()
        .map(|(id, text, terms)| TokenizedDoc {
            id: *id,
            text: text.clone(),
            tokens: terms.iter().map(|t| index[t.as_str()]).collect(),
        })
        .collect();
    Ok(Corpus { docs, vocabulary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(c: &Corpus, d: usize) -> Vec<&str> {
        c.docs[d].tokens.iter().map(|&i| c.vocabulary[i].as_str()).collect()
    }

    #[test]
    fn stopwords_removed() {
        let sw: BTreeSet<String> = ["ka", "kya", "hai"].iter().map(|s| s.to_string()).collect();
        let opts = PreprocessOptions {
            min_tokens: 1,
            max_tokens: 50,
        };
        let c = preprocess_corpus(&["ka kya fee hai"], &sw, &opts).unwrap();
        assert_eq!(words(&c, 0), ["fee"]);
    }

    #[test]
    fn short_docs_dropped() {
        let c = preprocess_corpus(
            &["hostel", "hostel fee kitni"],
            &BTreeSet::new(),
            &PreprocessOptions::default(),
        )
        .unwrap();
        assert_eq!(c.docs.len(), 1);
        assert_eq!(c.docs[0].id, 1);
    }

    #[test]
    fn long_docs_dropped() {
        let opts = PreprocessOptions {
            min_tokens: 1,
            max_tokens: 2,
        };
        let c = preprocess_corpus(&["a b c", "a b"], &BTreeSet::new(), &opts).unwrap();
        assert_eq!(c.docs.len(), 1);
    }

    #[test]
    fn tokenization_only_without_stopwords() {
        let c = preprocess_corpus(&["Fee KITNI hai?"], &BTreeSet::new(), &PreprocessOptions::default()).unwrap();
        assert_eq!(words(&c, 0), ["fee", "kitni", "hai"]);
        assert_eq!(c.vocabulary, ["fee", "hai", "kitni"]);
    }

    #[test]
    fn everything_filtered() {
        let err = preprocess_corpus(&["ka", ""], &default_stopwords(), &PreprocessOptions::default()).unwrap_err();
        assert!(matches!(err, MinerError::EmptyCorpus));
        assert_eq!(err.to_string(), "empty corpus after preprocessing");
    }

    #[test]
    fn bundled_list() {
        let sw = default_stopwords();
        assert!(sw.len() >= 50);
        for w in ["ka", "ki", "ke", "hai", "ho", "kya", "mein", "se"] {
            assert!(sw.contains(w), "{w}");
        }
    }
}
