use serde::{Deserialize, Serialize};

/// A whitespace-delimited token; offsets count Unicode scalar values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn new(text: impl Into<String>, start: usize, end: usize) -> Self {
        Self {
            text: text.into(),
            start,
            end,
        }
    }
}

/// Splits on maximal runs of whitespace.
pub fn tokenize(utterance: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut pos = 0;
    for ch in utterance.chars() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(Token::new(std::mem::take(&mut current), start, pos));
            }
        } else {
            if current.is_empty() {
                start = pos;
            }
            current.push(ch);
        }
        pos += 1;
    }
    if !current.is_empty() {
        tokens.push(Token::new(current, start, pos));
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_sentence() {
        let texts: Vec<String> = tokenize("mujhe fee structure batao")
            .into_iter()
            .map(|t| t.text)
            .collect();
        assert_eq!(texts, ["mujhe", "fee", "structure", "batao"]);
    }

    #[test]
    fn empty() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" \t\n ").is_empty());
    }

    #[test]
    fn whitespace_runs() {
        assert_eq!(
            tokenize("  salam   aap "),
            vec![Token::new("salam", 2, 7), Token::new("aap", 10, 13)]
        );
    }

    proptest! {
        #[test]
        fn slices_and_gaps_reconstruct_input(s in "[a-zé ]{0,12}( |\t|\n|xyz|ā){0,6}") {
            let chars: Vec<char> = s.chars().collect();
            let tokens = tokenize(&s);
            let mut rebuilt = String::new();
            let mut pos = 0;
            for t in &tokens {
                let gap: String = chars[pos..t.start].iter().collect();
                prop_assert!(gap.chars().all(char::is_whitespace));
                rebuilt.push_str(&gap);
                let slice: String = chars[t.start..t.end].iter().collect();
                prop_assert_eq!(&slice, &t.text);
                rebuilt.push_str(&slice);
                pos = t.end;
            }
            let tail: String = chars[pos..].iter().collect();
            prop_assert!(tail.chars().all(char::is_whitespace));
            rebuilt.push_str(&tail);
            prop_assert_eq!(rebuilt, s);
        }
    }
}
