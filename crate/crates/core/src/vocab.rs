//! Phrase substitution between the default vocabulary and an alternative
//! one, used to build the unseen-vocabulary test set and to read it back.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use crate::error::GrammarError;
use crate::grammar::Grammar;
use crate::model::{Color, RelationKind, Shape, Size};
use crate::text::{self, starts_with_vowel_sound};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeEntry {
    singular: String,
    plural: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct VocabularyFile {
    shapes: BTreeMap<String, ShapeEntry>,
    colors: BTreeMap<String, String>,
    sizes: BTreeMap<String, String>,
    relations: BTreeMap<String, BTreeMap<String, String>>,
}

/// Direction of a substitution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Default words to alternative words.
    Forward,
    /// Alternative words back to default words.
    Backward,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabularyMap {
    /// (default phrase, alternative phrase), lowercase words.
    pairs: Vec<(Vec<String>, Vec<String>)>,
}

/// Result of substituting in one token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mapped {
    pub tokens: Vec<String>,
    /// For each input token, the output token range it became.
    pub ranges: Vec<(usize, usize)>,
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(|w| w.to_lowercase()).collect()
}

impl VocabularyMap {
    pub fn default_unseen(g: &Grammar) -> Result<Self, GrammarError> {
        Self::parse(include_str!("../data/unseen_vocabulary.toml"), g)
    }

    pub fn load(path: &Path, g: &Grammar) -> Result<Self, GrammarError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GrammarError::Vocabulary(format!("{}: {e}", path.display())))?;
        Self::parse(&text, g)
    }

    /// Read a vocabulary file; default phrases are looked up in `g`.
    pub fn parse(text: &str, g: &Grammar) -> Result<Self, GrammarError> {
        let file: VocabularyFile =
            toml::from_str(text).map_err(|e| GrammarError::Vocabulary(e.to_string()))?;
        let lex = |key: &str| -> Result<Vec<String>, GrammarError> {
            g.canonical(key)
                .map(|p| p.to_vec())
                .ok_or_else(|| GrammarError::Vocabulary(format!("grammar has no entry {key}")))
        };
        let mut pairs = Vec::new();
        for (name, entry) in &file.shapes {
            Shape::from_name(name)
                .ok_or_else(|| GrammarError::Vocabulary(format!("unknown shape {name}")))?;
            pairs.push((lex(&format!("shape.{name}"))?, words(&entry.singular)));
            pairs.push((lex(&format!("shape.{name}.plural"))?, words(&entry.plural)));
        }
        for (name, alt) in &file.colors {
            Color::from_name(name)
                .ok_or_else(|| GrammarError::Vocabulary(format!("unknown color {name}")))?;
            pairs.push((lex(&format!("color.{name}"))?, words(alt)));
        }
        for (name, alt) in &file.sizes {
            Size::from_name(name)
                .ok_or_else(|| GrammarError::Vocabulary(format!("unknown size {name}")))?;
            pairs.push((lex(&format!("size.{name}"))?, words(alt)));
        }
        for (key, phrases) in &file.relations {
            let r = RelationKind::from_lexicon_key(key)
                .ok_or_else(|| GrammarError::Vocabulary(format!("unknown relation {key}")))?;
            let known = g.phrases(&crate::grammar::rel_key(r));
            for (seen, alt) in phrases {
                let seen = words(seen);
                if !known.contains(&seen) {
                    return Err(GrammarError::Vocabulary(format!(
                        "\"{}\" is not a phrase for {key}",
                        seen.join(" ")
                    )));
                }
                pairs.push((seen, words(alt)));
            }
        }
        Self::new(pairs, g)
    }

    fn new(pairs: Vec<(Vec<String>, Vec<String>)>, g: &Grammar) -> Result<Self, GrammarError> {
        let mut seen = BTreeSet::new();
        let mut alt = BTreeSet::new();
        for (s, a) in &pairs {
            if s.is_empty() || a.is_empty() {
                return Err(GrammarError::Vocabulary("empty phrase".into()));
            }
            if !seen.insert(s.clone()) || !alt.insert(a.clone()) {
                return Err(GrammarError::Vocabulary(format!(
                    "\"{}\" -> \"{}\" is not one-to-one",
                    s.join(" "),
                    a.join(" ")
                )));
            }
        }
        // an alternative phrase must never occur in default text, or the
        // backward map would rewrite words it never produced
        for a in &alt {
            let clash = g
                .lexicon_keys()
                .flat_map(|k| g.phrases(k))
                .any(|p| p.windows(a.len()).any(|w| w == a.as_slice()));
            if clash && !seen.contains(a) {
                return Err(GrammarError::Vocabulary(format!(
                    "\"{}\" already occurs in the default vocabulary",
                    a.join(" ")
                )));
            }
        }
        Ok(Self { pairs })
    }

    /// Substitute phrases in a token sequence, longest match first, and fix
    /// the indefinite article in front of a substitution.
    pub fn map_tokens(&self, tokens: &[String], dir: Direction) -> Mapped {
        let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
        let mut out: Vec<String> = Vec::new();
        let mut ranges = Vec::with_capacity(tokens.len());
        let mut i = 0;
        while i < tokens.len() {
            let best = self
                .pairs
                .iter()
                .map(|(s, a)| match dir {
                    Direction::Forward => (s, a),
                    Direction::Backward => (a, s),
                })
                .filter(|(from, _)| lower[i..].starts_with(from))
                .max_by_key(|(from, _)| from.len());
            match best {
                Some((from, to)) => {
                    let start = out.len();
                    let capital = tokens[i].chars().next().is_some_and(char::is_uppercase);
                    for (k, w) in to.iter().enumerate() {
                        out.push(if k == 0 && capital {
                            text::capitalize(w)
                        } else {
                            w.clone()
                        });
                    }
                    if start > 0 {
                        fix_article(&mut out[start - 1], &to[0], start - 1 == 0);
                    }
                    // every source token maps to the whole replacement
                    for _ in 0..from.len() {
                        ranges.push((start, out.len()));
                    }
                    i += from.len();
                }
                None => {
                    ranges.push((out.len(), out.len() + 1));
                    out.push(tokens[i].clone());
                    i += 1;
                }
            }
        }
        Mapped {
            tokens: out,
            ranges,
        }
    }

    /// Substitute in rendered text; the result is re-rendered with
    /// [`text::join`].
    pub fn map_text(&self, input: &str, dir: Direction) -> String {
        let tokens = text::tokenize(input);
        text::join(&self.map_tokens(&tokens, dir).tokens).0
    }
}

fn fix_article(token: &mut String, next: &str, sentence_start: bool) {
    let lower = token.to_lowercase();
    let is_article = match token.as_str() {
        "a" | "an" => true,
        "A" | "An" => sentence_start,
        _ => false,
    };
    if !is_article {
        return;
    }
    let want = if starts_with_vowel_sound(next) {
        "an"
    } else {
        "a"
    };
    if lower != want {
        *token = if token.starts_with('A') {
            text::capitalize(want)
        } else {
            want.to_string()
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map() -> VocabularyMap {
        VocabularyMap::default_unseen(&Grammar::default_grammar()).unwrap()
    }

    #[test]
    fn forward_and_back() {
        let m = map();
        let s = "A circle is to the left of a big yellow square and above block B.";
        let u = m.map_text(s, Direction::Forward);
        assert_eq!(
            u,
            "An oval is to the left side of a large green rectangle and on top of block B."
        );
        assert_eq!(m.map_text(&u, Direction::Backward), s);
    }

    #[test]
    fn block_name_a_is_not_an_article() {
        let m = map();
        assert_eq!(
            m.map_text(
                "Is the box in block A above the circle?",
                Direction::Forward
            ),
            "Is the box in block A on top of the oval?"
        );
    }

    #[test]
    fn ranges_cover_replacements() {
        let m = map();
        let tokens = text::tokenize("the big circle is below it.");
        let mapped = m.map_tokens(&tokens, Direction::Forward);
        assert_eq!(mapped.tokens.join(" "), "the large oval is under it .");
        assert_eq!(mapped.ranges[4], (4, 5));
    }

    #[test]
    fn rejects_non_bijective_files() {
        let g = Grammar::default_grammar();
        let text = "[colors]\nyellow = \"green\"\nblack = \"green\"\n";
        assert!(VocabularyMap::parse(text, &g).is_err());
        let text = "[colors]\nyellow = \"blue\"\n";
        assert!(VocabularyMap::parse(text, &g).is_err());
    }
}
