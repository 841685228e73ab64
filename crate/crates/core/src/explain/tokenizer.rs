use std::collections::HashSet;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExplainError;

pub const UNK_TOKEN: &str = "[UNK]";
const MAX_WORD_CHARS: usize = 100;

/// Subword tokens of one text with their byte ranges in that text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub source_id: String,
    pub tokens: Vec<String>,
    pub offsets: Vec<Range<usize>>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Rebuilds `text` with every token `i` for which `keep(i)` is false
    /// replaced by `mask`. Text between tokens is copied unchanged.
    pub fn masked_text(&self, text: &str, mask: &str, keep: impl Fn(usize) -> bool) -> String {
        let mut out = String::with_capacity(text.len());
        let mut last = 0;
        for (i, r) in self.offsets.iter().enumerate() {
            out.push_str(&text[last..r.start]);
            if keep(i) {
                out.push_str(&text[r.clone()]);
            } else {
                out.push_str(mask);
            }
            last = r.end;
        }
        out.push_str(&text[last..]);
        out
    }

    /// Groups token indices by source word: a `##` piece joins the word of
    /// the token before it.
    pub fn words(&self) -> Vec<Range<usize>> {
        let mut out: Vec<Range<usize>> = Vec::new();
        for (i, t) in self.tokens.iter().enumerate() {
            match out.last_mut() {
                Some(w) if t.starts_with("##") => w.end = i + 1,
                _ => out.push(i..i + 1),
            }
        }
        out
    }
}

/// Greedy longest-match WordPiece tokenizer over a fixed vocabulary.
///
/// Text is split on whitespace and punctuation (each punctuation character
/// is its own word), lowercased, then each word is matched left to right
/// against the vocabulary, continuation pieces carrying a `##` prefix. A
/// word that cannot be fully matched becomes a single `[UNK]`.
#[derive(Debug, Clone)]
pub struct WordPiece {
    vocab: HashSet<String>,
}

impl WordPiece {
    pub fn from_vocab_str(src: &str) -> Self {
        Self {
            vocab: src
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ExplainError> {
        let src = std::fs::read_to_string(path).map_err(|source| ExplainError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_vocab_str(&src))
    }

    /// The bundled general-purpose English vocabulary.
    pub fn builtin() -> Self {
        Self::from_vocab_str(include_str!("../../assets/vocab.txt"))
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.vocab.contains(piece)
    }

    pub fn tokenize(&self, source_id: &str, text: &str) -> TokenSequence {
        let mut seq = TokenSequence {
            source_id: source_id.to_string(),
            ..Default::default()
        };
        for word in split_words(text) {
            self.word_pieces(text, word, &mut seq);
        }
        seq
    }

    fn word_pieces(&self, text: &str, word: Range<usize>, seq: &mut TokenSequence) {
        let src = &text[word.clone()];
        if src.chars().count() > MAX_WORD_CHARS {
            seq.tokens.push(UNK_TOKEN.into());
            seq.offsets.push(word);
            return;
        }
        // Lowercased word plus, for every byte of it, the source byte offset
        // of the character it came from.
        let mut lower = String::new();
        let mut origin = Vec::new();
        for (i, c) in src.char_indices() {
            for lc in c.to_lowercase() {
                let before = lower.len();
                lower.push(lc);
                origin.extend(std::iter::repeat_n(word.start + i, lower.len() - before));
            }
        }
        origin.push(word.end);
        let boundaries: Vec<usize> = lower
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(lower.len()))
            .collect();

        let mut pieces = Vec::new();
        let mut start = 0;
        while start < boundaries.len() - 1 {
            let mut found = None;
            for end in (start + 1..boundaries.len()).rev() {
                let body = &lower[boundaries[start]..boundaries[end]];
                let piece = if start == 0 {
                    body.to_string()
                } else {
                    format!("##{body}")
                };
                if self.vocab.contains(&piece) {
                    found = Some((piece, end));
                    break;
                }
            }
            match found {
                Some((piece, end)) => {
                    let range = origin[boundaries[start]]..origin[boundaries[end]];
                    pieces.push((piece, range));
                    start = end;
                }
                None => {
                    seq.tokens.push(UNK_TOKEN.into());
                    seq.offsets.push(word);
                    return;
                }
            }
        }
        for (p, r) in pieces {
            seq.tokens.push(p);
            seq.offsets.push(r);
        }
    }
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace())
}

/// Byte ranges of whitespace-separated words with punctuation split off.
fn split_words(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() || is_punct(c) {
            if let Some(s) = start.take() {
                out.push(s..i);
            }
            if is_punct(c) {
                out.push(i..i + c.len_utf8());
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(s..text.len());
    }
    out
}
