//! Social-media text cleaning, tokenization and stopword filtering.
//!
//! Cleaning removes URLs, @-mentions, #-tags (marker and tag word), and every
//! character outside ASCII letters, digits and whitespace. Letters are
//! lowercased, whitespace runs collapse to a single space and the result is
//! trimmed. Deleted characters do not act as separators: `"covid-19"` becomes
//! `"covid19"`.
//!
//! All functions here are pure.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use thiserror::Error;

/// Built-in English stoplist, one word per line.
pub const ENGLISH_STOPWORDS: &str = include_str!("stopwords_en.txt");

const URL_PREFIXES: [&str; 3] = ["http://", "https://", "www."];

#[derive(Debug, Error)]
pub enum TextPrepError {
    #[error("record id must be non-empty")]
    EmptyId,
    #[error("label must be 0 or 1, got {0}")]
    BadLabel(u8),
    #[error("invalid token {0:?}: tokens must be non-empty, lowercase and free of whitespace")]
    BadToken(String),
    #[error("failed to read stoplist {path}: {source}")]
    Stoplist {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One labeled (or unlabeled) text sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub id: String,
    pub text: String,
    pub label: Option<u8>,
}

impl Record {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        label: Option<u8>,
    ) -> Result<Self, TextPrepError> {
        let id = id.into();
        if id.is_empty() {
            return Err(TextPrepError::EmptyId);
        }
        if let Some(l) = label {
            if l > 1 {
                return Err(TextPrepError::BadLabel(l));
            }
        }
        Ok(Self {
            id,
            text: text.into(),
            label,
        })
    }
}

/// Ordered tokens; each is non-empty, lowercase and contains no whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenList(Vec<String>);

impl TokenList {
    pub fn new(tokens: Vec<String>) -> Result<Self, TextPrepError> {
        for t in &tokens {
            let ok = !t.is_empty()
                && !t.chars().any(char::is_whitespace)
                && t.chars().all(|c| !c.is_uppercase());
            if !ok {
                return Err(TextPrepError::BadToken(t.clone()));
            }
        }
        Ok(Self(tokens))
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl fmt::Display for TokenList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

fn starts_with_ignore_ascii_case(s: &str, prefix: &str) -> bool {
    s.len() >= prefix.len()
        && s.as_bytes()[..prefix.len()].eq_ignore_ascii_case(prefix.as_bytes())
}

fn is_url_start(s: &str) -> bool {
    URL_PREFIXES
        .iter()
        .any(|p| starts_with_ignore_ascii_case(s, p))
}

/// Byte offset of the first whitespace char in `s`, or `s.len()`.
fn next_whitespace(s: &str) -> usize {
    s.find(char::is_whitespace).unwrap_or(s.len())
}

/// Byte length of the tag word directly after an `@`/`#` marker.
fn tag_word_len(s: &str) -> usize {
    s.find(|c: char| !(c.is_alphanumeric() || c == '_'))
        .unwrap_or(s.len())
}

pub fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    let mut rest = raw;

    while let Some(c) = rest.chars().next() {
        if is_url_start(rest) {
            rest = &rest[next_whitespace(rest)..];
            continue;
        }
        let width = c.len_utf8();
        if c == '@' || c == '#' {
            let after = &rest[width..];
            rest = &after[tag_word_len(after)..];
            continue;
        }
        if c.is_whitespace() {
            pending_space = !out.is_empty();
        } else if c.is_ascii_alphanumeric() {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(c.to_ascii_lowercase());
        }
        rest = &rest[width..];
    }
    out
}

/// Splits cleaned text into tokens. Also tolerates raw whitespace runs.
pub fn tokenize(cleaned: &str) -> TokenList {
    TokenList(cleaned.split_whitespace().map(str::to_owned).collect())
}

/// Set of lowercase words removed by [`remove_stopwords`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stoplist(HashSet<String>);

impl Stoplist {
    /// The built-in English list shipped in `stopwords_en.txt`.
    pub fn english() -> Self {
        Self::parse(ENGLISH_STOPWORDS)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// One word per line; blank lines are ignored, words are lowercased.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|w| !w.is_empty())
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn from_file(path: &Path) -> Result<Self, TextPrepError> {
        let text = std::fs::read_to_string(path).map_err(|source| TextPrepError::Stoplist {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::parse(&text))
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(words.into_iter().map(Into::into).collect())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn remove_stopwords(tokens: &TokenList, stoplist: &Stoplist) -> TokenList {
    TokenList(
        tokens
            .0
            .iter()
            .filter(|t| !stoplist.contains(t))
            .cloned()
            .collect(),
    )
}

/// Which preprocessing stages run before tokenization and encoding.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    pub clean: bool,
    pub stoplist: Option<Stoplist>,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self {
            clean: true,
            stoplist: Some(Stoplist::english()),
        }
    }
}

impl Preprocessor {
    pub fn tokens(&self, raw: &str) -> TokenList {
        let tokens = if self.clean {
            tokenize(&clean_text(raw))
        } else {
            tokenize(raw)
        };
        match &self.stoplist {
            Some(stop) => remove_stopwords(&tokens, stop),
            None => tokens,
        }
    }
}
