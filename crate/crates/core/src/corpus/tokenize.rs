//! Offset-preserving word tokenization, token normalization and gold labeling.
//!
//! All offsets are *character* indices (Unicode scalar values) into the
//! original post text, which is how the shared-task annotations count them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::Post;

/// One word of a post together with its location in the original text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    /// The substring of the post covered by `start..end`.
    pub raw: String,
    /// Normalized form used for vocabulary lookup. Empty until [`preprocess`]
    /// runs, and empty afterwards for tokens that carry no letters.
    pub clean: String,
    /// Inclusive start, in characters.
    pub start: usize,
    /// Exclusive end, in characters.
    pub end: usize,
    pub toxic: bool,
}

impl TokenSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// Tokens whose normalized form is empty are dropped before labeling.
    pub fn is_removable(&self) -> bool {
        self.clean.is_empty()
    }

    /// Character offsets covered by this token.
    pub fn offsets(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Splits `text` into word tokens.
///
/// Whitespace separates words. Within each whitespace-delimited chunk, a
/// leading and a trailing run of non-alphanumeric characters are split off
/// as their own tokens, so `"(idiot)!"` yields `(`, `idiot`, `)!` while inner
/// symbols such as the asterisks in `f**k` stay attached to the word.
///
/// ```
/// use tsd_core::corpus::tokenize;
///
/// let tokens = tokenize("You are a fool");
/// let spans: Vec<_> = tokens.iter().map(|t| (t.raw.as_str(), t.start, t.end)).collect();
/// assert_eq!(spans, [("You", 0, 3), ("are", 4, 7), ("a", 8, 9), ("fool", 10, 14)]);
/// ```
pub fn tokenize(text: &str) -> Vec<TokenSpan> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut pos = 0;
    while pos < chars.len() {
        if chars[pos].is_whitespace() {
            pos += 1;
            continue;
        }
        let chunk_start = pos;
        while pos < chars.len() && !chars[pos].is_whitespace() {
            pos += 1;
        }
        split_chunk(&chars, chunk_start, pos, &mut tokens);
    }
    tokens
}

fn split_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<TokenSpan>) {
    let chunk = &chars[start..end];
    let lead = chunk.iter().take_while(|c| !is_word_char(**c)).count();
    if lead == chunk.len() {
        out.push(span(chars, start, end));
        return;
    }
    let trail = chunk.iter().rev().take_while(|c| !is_word_char(**c)).count();
    let word_start = start + lead;
    let word_end = end - trail;
    if lead > 0 {
        out.push(span(chars, start, word_start));
    }
    out.push(span(chars, word_start, word_end));
    if trail > 0 {
        out.push(span(chars, word_end, end));
    }
}

fn span(chars: &[char], start: usize, end: usize) -> TokenSpan {
    TokenSpan {
        raw: chars[start..end].iter().collect(),
        clean: String::new(),
        start,
        end,
        toxic: false,
    }
}

/// Normalizes a token: lowercase, keeping ASCII letters only.
///
/// Punctuation, digits, symbols, emoji and every other non-ASCII code point
/// are dropped. Offsets are untouched.
pub fn preprocess(mut token: TokenSpan) -> TokenSpan {
    token.clean = normalize(&token.raw);
    token
}

/// The normalization applied by [`preprocess`], usable on bare strings.
pub fn normalize(raw: &str) -> String {
    raw.chars()
        .filter(char::is_ascii_alphabetic)
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Drops removable tokens and marks each survivor toxic iff it shares at
/// least one character with the post's gold offsets.
pub fn label_tokens(post: &Post, tokens: Vec<TokenSpan>) -> Vec<TokenSpan> {
    label_against(&post.gold_offsets, tokens)
}

pub(crate) fn label_against(gold: &BTreeSet<usize>, tokens: Vec<TokenSpan>) -> Vec<TokenSpan> {
    tokens
        .into_iter()
        .filter(|t| !t.is_removable())
        .map(|mut t| {
            t.toxic = gold.range(t.start..t.end).next().is_some();
            t
        })
        .collect()
}

/// Tokenize, normalize, filter and label one post.
pub fn tokenize_post(post: &Post) -> Vec<TokenSpan> {
    let tokens = tokenize(&post.text).into_iter().map(preprocess).collect();
    label_tokens(post, tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn slice_chars(text: &str, start: usize, end: usize) -> String {
        text.chars().skip(start).take(end - start).collect()
    }

    fn post(text: &str, gold: &[usize]) -> Post {
        Post::new("t", text, gold.iter().copied().collect()).unwrap()
    }

    #[test]
    fn whitespace_split_with_offsets() {
        let got: Vec<_> = tokenize("You are a fool")
            .into_iter()
            .map(|t| (t.raw, t.start, t.end))
            .collect();
        assert_eq!(
            got,
            vec![
                ("You".to_string(), 0, 3),
                ("are".to_string(), 4, 7),
                ("a".to_string(), 8, 9),
                ("fool".to_string(), 10, 14)
            ]
        );
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \n\t").is_empty());
    }

    #[test]
    fn obfuscation_keeps_inner_symbols() {
        let text = "f**k u!";
        let toks = tokenize(text);
        let raws: Vec<_> = toks.iter().map(|t| t.raw.as_str()).collect();
        assert_eq!(raws, ["f**k", "u", "!"]);
        for t in &toks {
            assert_eq!(slice_chars(text, t.start, t.end), t.raw);
        }
    }

    #[test]
    fn edge_punctuation_is_split() {
        let raws: Vec<_> = tokenize("(idiot)! ...").into_iter().map(|t| t.raw).collect();
        assert_eq!(raws, ["(", "idiot", ")!", "..."]);
    }

    #[test]
    fn offsets_count_characters_not_bytes() {
        let text = "héllo 😀 wörld";
        let toks = tokenize(text);
        assert_eq!(toks[2].start, 8);
        assert_eq!(toks[2].end, 13);
        assert_eq!(toks[1].raw, "😀");
    }

    #[test]
    fn preprocess_examples() {
        let p = |s: &str| preprocess(tokenize(s).remove(0)).clean;
        assert_eq!(p("F**K"), "fk");
        assert_eq!(p("Stupid123"), "stupid");
        assert_eq!(p("Ünïcode"), "ncode");
        let bang = preprocess(tokenize("!!!").remove(0));
        assert_eq!(bang.clean, "");
        assert!(bang.is_removable());
    }

    #[test]
    fn preprocess_keeps_offsets() {
        let t = tokenize("xx  Dumb42").remove(1);
        let p = preprocess(t.clone());
        assert_eq!((p.raw, p.start, p.end), (t.raw, t.start, t.end));
    }

    #[test]
    fn label_full_overlap() {
        let toks = tokenize_post(&post("a fool", &[2, 3, 4, 5]));
        let labels: Vec<_> = toks.iter().map(|t| t.toxic).collect();
        assert_eq!(labels, [false, true]);
    }

    #[test]
    fn label_empty_gold() {
        let toks = tokenize_post(&post("you are all idiots", &[]));
        assert!(toks.iter().all(|t| !t.toxic));
    }

    #[test]
    fn label_partial_overlap_matches_brute_force() {
        let p = post("so stupid", &[3, 4]);
        let toks = tokenize_post(&p);
        for t in &toks {
            let brute = (t.start..t.end).any(|c| p.gold_offsets.contains(&c));
            assert_eq!(t.toxic, brute);
        }
        assert!(toks[1].toxic);
        assert_eq!(toks[1].raw, "stupid");
    }

    #[test]
    fn removable_tokens_dropped() {
        let toks = tokenize_post(&post("!!! idiot ???", &[0, 1, 2]));
        assert_eq!(toks.len(), 1);
        assert_eq!(toks[0].raw, "idiot");
        assert!(!toks[0].toxic);
    }

    proptest! {
        #[test]
        fn offset_fidelity(text in "\\PC{0,60}") {
            for t in tokenize(&text) {
                prop_assert!(t.start < t.end);
                prop_assert_eq!(slice_chars(&text, t.start, t.end), t.raw);
            }
        }

        #[test]
        fn tokens_sorted_and_gaps_are_whitespace(text in "[ a-zA-Z!?*.😀é\\t\\n]{0,60}") {
            let chars: Vec<char> = text.chars().collect();
            let toks = tokenize(&text);
            let mut cursor = 0;
            for t in &toks {
                prop_assert!(t.start >= cursor);
                prop_assert!(chars[cursor..t.start].iter().all(|c| c.is_whitespace()));
                cursor = t.end;
            }
            prop_assert!(chars[cursor..].iter().all(|c| c.is_whitespace()));
        }

        #[test]
        fn filtering_never_moves_survivors(text in "[ a-z1!*😀]{0,40}") {
            let all: Vec<_> = tokenize(&text).into_iter().map(preprocess).collect();
            let kept = label_against(&BTreeSet::new(), all.clone());
            let expected: Vec<_> = all.iter().filter(|t| !t.is_removable()).map(|t| (t.start, t.end)).collect();
            let got: Vec<_> = kept.iter().map(|t| (t.start, t.end)).collect();
            prop_assert_eq!(got, expected);
        }

        #[test]
        fn label_soundness(text in "[ a-z!]{0,40}", gold in proptest::collection::btree_set(0usize..40, 0..10)) {
            let n = text.chars().count();
            let gold: BTreeSet<usize> = gold.into_iter().filter(|&g| g < n).collect();
            let p = Post::new("p", &text, gold.clone()).unwrap();
            for t in tokenize_post(&p) {
                let brute = (t.start..t.end).any(|c| gold.contains(&c));
                prop_assert_eq!(t.toxic, brute);
            }
        }
    }
}
