//! Tokenization used for statistics, spans and parsing.
//!
//! A token is a maximal run of non-space characters after splitting off each
//! of `. , ? ! ; : " ( )` as a token of its own. Apostrophes stay inside
//! words ("doesn't" is one token). Rendering joins tokens with one space,
//! except that no space precedes `. , ? ! ; :`.

use crate::model::Span;

const PUNCT: &[char] = &['.', ',', '?', '!', ';', ':', '"', '(', ')'];
const NO_SPACE_BEFORE: &[&str] = &[".", ",", "?", "!", ";", ":"];

pub fn tokenize(text: &str) -> Vec<String> {
    token_offsets(text)
        .into_iter()
        .map(|s| text[s.start..s.end].to_string())
        .collect()
}

/// Character offsets of each token in `text`.
pub fn token_offsets(text: &str) -> Vec<Span> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() || PUNCT.contains(&c) {
            if let Some(s) = start.take() {
                out.push(Span::new(s, i));
            }
            if !c.is_whitespace() {
                out.push(Span::new(i, i + c.len_utf8()));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Span::new(s, text.len()));
    }
    out
}

pub fn token_count(text: &str) -> usize {
    token_offsets(text).len()
}

/// Join tokens into text, returning the character span of every token.
pub fn join(tokens: &[String]) -> (String, Vec<Span>) {
    let mut text = String::new();
    let mut spans = Vec::with_capacity(tokens.len());
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 && !NO_SPACE_BEFORE.contains(&t.as_str()) {
            text.push(' ');
        }
        let start = text.len();
        text.push_str(t);
        spans.push(Span::new(start, text.len()));
    }
    (text, spans)
}

pub fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Character span covering tokens `[first, last)`.
pub fn cover(spans: &[Span], first: usize, last: usize) -> Span {
    Span::new(spans[first].start, spans[last - 1].end)
}

/// Token range `[first, last)` whose characters are exactly `span`.
pub fn token_range(spans: &[Span], span: Span) -> Option<(usize, usize)> {
    let first = spans.iter().position(|s| s.start == span.start)?;
    let last = spans.iter().position(|s| s.end == span.end)?;
    (last >= first).then_some((first, last + 1))
}

pub fn starts_with_vowel_sound(word: &str) -> bool {
    matches!(
        word.chars().next().map(|c| c.to_ascii_lowercase()),
        Some('a' | 'e' | 'i' | 'o' | 'u')
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation() {
        assert_eq!(
            tokenize("Which block doesn't have a circle? A, or B."),
            vec!["Which", "block", "doesn't", "have", "a", "circle", "?", "A", ",", "or", "B", "."]
        );
    }

    #[test]
    fn join_inverts_tokenize() {
        let text = "In block A, there is a circle. It is near to the square?";
        let toks = tokenize(text);
        let (back, spans) = join(&toks);
        assert_eq!(back, text);
        assert_eq!(spans, token_offsets(text));
    }

    #[test]
    fn token_ranges() {
        let (text, spans) = join(&tokenize("The big circle is below a square ."));
        let s = cover(&spans, 0, 3);
        assert_eq!(s.slice(&text), Some("The big circle"));
        assert_eq!(token_range(&spans, s), Some((0, 3)));
    }
}
