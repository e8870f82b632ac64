//! Grammar file loading, expansion and validation.
//!
//! The format is line based:
//!
//! ```text
//! # comment
//! RelSent -> $subj "is" $rels $objs "."  [3]
//! Have -> "has"
//! @rel.left = to the left of | on the left of
//! ```
//!
//! A production is `Name -> symbols [weight]`; repeating the name adds an
//! alternative. Symbols are quoted terminals (split on spaces into words),
//! CamelCase nonterminals and `$slot`s, which the realizer fills from the
//! facts being expressed and the parser reads back. Lines starting with `@`
//! define lexicon entries, a key followed by `|`-separated phrases.
//!
//! Sentence kinds are nonterminals with fixed names (see [`STORY_KINDS`] and
//! [`QUESTION_KINDS`]); the sum of a kind's production weights is its weight
//! when the realizer chooses between kinds.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;

use crate::error::GrammarError;
use crate::model::{Color, Edge, Hypernym, RelationKind, Shape, Size, Violation};

pub const STORY_KINDS: &[&str] = &[
    "BlocksIntro",
    "BlockRel",
    "BlockHas",
    "BlockThere",
    "BlockNamed",
    "RelSent",
    "RelFronted",
    "EdgeSent",
];

pub const QUESTION_KINDS: &[&str] = &[
    "AskFr",
    "AskFbHas",
    "AskFbNot",
    "AskCoWhich",
    "AskCoWhat",
    "AskYn",
    "AskYnThere",
    "AskYnAll",
];

/// Slots each kind must contain, in no particular order.
pub fn kind_slots(kind: &str) -> &'static [&'static str] {
    match kind {
        "BlocksIntro" => &["count"],
        "BlockRel" => &["block", "rel", "blocks"],
        "BlockHas" => &["block", "has", "intro"],
        "BlockThere" => &["in", "block", "be", "intro"],
        "BlockNamed" => &["name"],
        "RelSent" => &["subj", "rels", "objs"],
        "RelFronted" => &["rels", "objs", "be", "subj"],
        "EdgeSent" => &["subj", "rel", "edgeblock"],
        "AskFr" => &["a", "b"],
        "AskFbHas" => &["has", "target"],
        "AskFbNot" => &["target"],
        "AskCoWhich" | "AskCoWhat" => &["rel", "anchor", "first", "second"],
        "AskYn" | "AskYnThere" | "AskYnAll" => &["subj", "rel", "obj"],
        _ => &[],
    }
}

pub const MAX_COUNT: u32 = 12;

/// Lexicon keys the built-in vocabulary defines.
pub fn required_lexicon_keys() -> Vec<String> {
    let mut keys = Vec::new();
    for s in Shape::ALL {
        keys.push(format!("shape.{}", s.name()));
        keys.push(format!("shape.{}.plural", s.name()));
    }
    for c in Color::ALL {
        keys.push(format!("color.{}", c.name()));
    }
    for s in Size::ALL {
        keys.push(format!("size.{}", s.name()));
    }
    for h in Hypernym::ALL {
        keys.push(format!("hypernym.{}", hypernym_name(h)));
        keys.push(format!("hypernym.{}.plural", hypernym_name(h)));
    }
    for r in RelationKind::ALL {
        keys.push(format!("rel.{}", r.lexicon_key()));
    }
    keys.push("has".into());
    for n in 1..=MAX_COUNT {
        keys.push(format!("count.{n}"));
    }
    keys
}

pub fn hypernym_name(h: Hypernym) -> &'static str {
    match h {
        Hypernym::Object => "object",
        Hypernym::Shape => "shape",
        Hypernym::Thing => "thing",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Symbol {
    Terminal(String),
    Nonterminal(String),
    Slot(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Production {
    pub lhs: String,
    pub rhs: Vec<Symbol>,
    pub weight: u32,
    pub line: usize,
}

/// A flattened expansion: lowercase words and slot names only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Word(String),
    Slot(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expansion {
    pub items: Vec<Item>,
    pub weight: u64,
}

#[derive(Debug, Clone)]
pub struct Grammar {
    productions: Vec<Production>,
    lexicon: BTreeMap<String, Vec<Vec<String>>>,
    lexicon_lines: BTreeMap<String, usize>,
    flat: BTreeMap<String, Vec<Expansion>>,
}

const DEFAULT_GRAMMAR: &str = include_str!("../data/default.grammar");
const MAX_DEPTH: usize = 12;
const MAX_EXPANSIONS: usize = 4096;

impl Grammar {
    /// The grammar shipped with the crate.
    pub fn default_grammar() -> Self {
        Self::parse(DEFAULT_GRAMMAR).expect("built-in grammar parses")
    }

    pub fn default_source() -> &'static str {
        DEFAULT_GRAMMAR
    }

    pub fn load(path: &Path) -> Result<Self, GrammarError> {
        let text = std::fs::read_to_string(path).map_err(|e| GrammarError::Syntax {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        let mut productions = Vec::new();
        let mut lexicon: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
        let mut lexicon_lines = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(entry) = body.strip_prefix('@') {
                let (key, values) = entry.split_once('=').ok_or_else(|| GrammarError::Syntax {
                    line,
                    message: "lexicon entry needs `=`".into(),
                })?;
                let key = key.trim().to_string();
                let phrases: Vec<Vec<String>> = values
                    .split('|')
                    .map(|p| p.split_whitespace().map(str::to_string).collect::<Vec<_>>())
                    .filter(|p| !p.is_empty())
                    .collect();
                if key.is_empty() || phrases.is_empty() {
                    return Err(GrammarError::Syntax {
                        line,
                        message: "empty lexicon entry".into(),
                    });
                }
                lexicon.entry(key.clone()).or_default().extend(phrases);
                lexicon_lines.entry(key).or_insert(line);
                continue;
            }
            let (lhs, rhs) = body.split_once("->").ok_or_else(|| GrammarError::Syntax {
                line,
                message: "expected `Name -> symbols` or `@key = phrases`".into(),
            })?;
            let lhs = lhs.trim();
            if !is_nonterminal(lhs) {
                return Err(GrammarError::Syntax {
                    line,
                    message: format!("bad nonterminal name {lhs:?}"),
                });
            }
            let (rhs, weight) = split_weight(rhs.trim(), line)?;
            let rhs = parse_symbols(rhs, line)?;
            if rhs.is_empty() {
                return Err(GrammarError::Syntax {
                    line,
                    message: "empty production".into(),
                });
            }
            productions.push(Production {
                lhs: lhs.to_string(),
                rhs,
                weight,
                line,
            });
        }
        let mut g = Grammar {
            productions,
            lexicon,
            lexicon_lines,
            flat: BTreeMap::new(),
        };
        g.flatten_kinds();
        Ok(g)
    }

    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    pub fn nonterminals(&self) -> BTreeSet<&str> {
        self.productions.iter().map(|p| p.lhs.as_str()).collect()
    }

    pub fn has_kind(&self, kind: &str) -> bool {
        self.flat.get(kind).is_some_and(|v| !v.is_empty())
    }

    /// All flattened expansions of a kind, in file order.
    pub fn expansions(&self, kind: &str) -> &[Expansion] {
        self.flat.get(kind).map_or(&[], |v| v.as_slice())
    }

    /// Total weight of a kind.
    pub fn kind_weight(&self, kind: &str) -> u64 {
        self.expansions(kind).iter().map(|e| e.weight).sum()
    }

    pub fn choose_expansion<R: Rng + ?Sized>(&self, kind: &str, rng: &mut R) -> Option<&Expansion> {
        let options = self.expansions(kind);
        let total: u64 = options.iter().map(|e| e.weight).sum();
        if total == 0 {
            return None;
        }
        let mut pick = rng.random_range(0..total);
        for e in options {
            if pick < e.weight {
                return Some(e);
            }
            pick -= e.weight;
        }
        options.last()
    }

    /// Phrases of a lexicon entry, each as a word list.
    pub fn phrases(&self, key: &str) -> &[Vec<String>] {
        self.lexicon.get(key).map_or(&[], |v| v.as_slice())
    }

    /// First phrase of an entry, the canonical rendering.
    pub fn canonical(&self, key: &str) -> Option<&[String]> {
        self.phrases(key).first().map(|p| p.as_slice())
    }

    pub fn pick<R: Rng + ?Sized>(&self, key: &str, rng: &mut R) -> Option<&[String]> {
        let options = self.phrases(key);
        if options.is_empty() {
            None
        } else {
            Some(&options[rng.random_range(0..options.len())])
        }
    }

    pub fn lexicon_keys(&self) -> impl Iterator<Item = &str> {
        self.lexicon.keys().map(|k| k.as_str())
    }

    fn flatten_kinds(&mut self) {
        let kinds: Vec<&str> = STORY_KINDS.iter().chain(QUESTION_KINDS).copied().collect();
        let mut flat = BTreeMap::new();
        for kind in kinds {
            let mut out = Vec::new();
            self.flatten(kind, 0, &mut out);
            flat.insert(kind.to_string(), out);
        }
        self.flat = flat;
    }

    fn flatten(&self, name: &str, depth: usize, out: &mut Vec<Expansion>) {
        if depth > MAX_DEPTH {
            return;
        }
        for p in self.productions.iter().filter(|p| p.lhs == name) {
            let mut partial = vec![Expansion {
                items: Vec::new(),
                weight: p.weight as u64,
            }];
            for sym in &p.rhs {
                let mut next = Vec::new();
                match sym {
                    Symbol::Terminal(t) => {
                        for mut e in partial {
                            e.items
                                .extend(t.split_whitespace().map(|w| Item::Word(w.to_lowercase())));
                            next.push(e);
                        }
                    }
                    Symbol::Slot(s) => {
                        for mut e in partial {
                            e.items.push(Item::Slot(s.clone()));
                            next.push(e);
                        }
                    }
                    Symbol::Nonterminal(n) => {
                        let mut subs = Vec::new();
                        self.flatten(n, depth + 1, &mut subs);
                        let sub_total: u64 = subs.iter().map(|s| s.weight).sum::<u64>().max(1);
                        for e in &partial {
                            for s in &subs {
                                let mut items = e.items.clone();
                                items.extend(s.items.iter().cloned());
                                // keep the parent's share, split by the child's weights
                                next.push(Expansion {
                                    items,
                                    weight: (e.weight * s.weight * 1000 / sub_total).max(1),
                                });
                            }
                        }
                    }
                }
                partial = next;
                partial.truncate(MAX_EXPANSIONS);
            }
            out.extend(partial);
            if out.len() > MAX_EXPANSIONS {
                out.truncate(MAX_EXPANSIONS);
                return;
            }
        }
    }
}

fn is_nonterminal(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_uppercase()) && chars.all(|c| c.is_ascii_alphanumeric())
}

fn split_weight(rhs: &str, line: usize) -> Result<(&str, u32), GrammarError> {
    if let Some(stripped) = rhs.strip_suffix(']') {
        if let Some(open) = stripped.rfind('[') {
            let w = stripped[open + 1..].trim();
            let weight = w.parse::<u32>().map_err(|_| GrammarError::Syntax {
                line,
                message: format!("bad weight {w:?}"),
            })?;
            if weight == 0 {
                return Err(GrammarError::Syntax {
                    line,
                    message: "weight must be positive".into(),
                });
            }
            return Ok((stripped[..open].trim_end(), weight));
        }
    }
    Ok((rhs, 1))
}

fn parse_symbols(rhs: &str, line: usize) -> Result<Vec<Symbol>, GrammarError> {
    let mut out = Vec::new();
    let mut rest = rhs.trim_start();
    while !rest.is_empty() {
        if let Some(after) = rest.strip_prefix('"') {
            let end = after.find('"').ok_or_else(|| GrammarError::Syntax {
                line,
                message: "unterminated terminal".into(),
            })?;
            let t = &after[..end];
            if t.trim().is_empty() {
                return Err(GrammarError::Syntax {
                    line,
                    message: "empty terminal".into(),
                });
            }
            out.push(Symbol::Terminal(t.to_string()));
            rest = after[end + 1..].trim_start();
            continue;
        }
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let word = &rest[..end];
        if let Some(slot) = word.strip_prefix('$') {
            if slot.is_empty() || !slot.chars().all(|c| c.is_ascii_lowercase()) {
                return Err(GrammarError::Syntax {
                    line,
                    message: format!("bad slot {word:?}"),
                });
            }
            out.push(Symbol::Slot(slot.to_string()));
        } else if is_nonterminal(word) {
            out.push(Symbol::Nonterminal(word.to_string()));
        } else {
            return Err(GrammarError::Syntax {
                line,
                message: format!("unexpected {word:?}; terminals must be quoted"),
            });
        }
        rest = rest[end..].trim_start();
    }
    Ok(out)
}

/// Structural problems: undefined, unreachable or unproductive nonterminals,
/// kinds missing or lacking their slots, and lexicon entries outside the
/// vocabulary.
pub fn validate_grammar(g: &Grammar) -> Vec<Violation> {
    let mut out = Vec::new();
    let defined = g.nonterminals();
    let kinds: BTreeSet<&str> = STORY_KINDS.iter().chain(QUESTION_KINDS).copied().collect();

    for p in &g.productions {
        for sym in &p.rhs {
            match sym {
                Symbol::Nonterminal(n) if !defined.contains(n.as_str()) => {
                    out.push(Violation::new(
                        format!("line {}", p.line),
                        format!("undefined nonterminal {n}"),
                    ))
                }
                Symbol::Slot(s) if !kind_slots(&p.lhs).contains(&s.as_str()) && !slot_known(s) => {
                    out.push(Violation::new(
                        format!("line {}", p.line),
                        format!("unknown slot ${s}"),
                    ))
                }
                _ => {}
            }
        }
    }

    // productive: some production whose nonterminals are all productive
    let mut productive: BTreeSet<&str> = BTreeSet::new();
    loop {
        let before = productive.len();
        for p in &g.productions {
            let ok = p.rhs.iter().all(|s| match s {
                Symbol::Nonterminal(n) => productive.contains(n.as_str()),
                _ => true,
            });
            if ok {
                productive.insert(p.lhs.as_str());
            }
        }
        if productive.len() == before {
            break;
        }
    }
    for n in &defined {
        if !productive.contains(n) {
            out.push(Violation::new(
                n.to_string(),
                "nonterminal is not productive",
            ));
        }
    }

    let mut reachable: BTreeSet<&str> = kinds
        .iter()
        .copied()
        .filter(|k| defined.contains(k))
        .collect();
    let mut stack: Vec<&str> = reachable.iter().copied().collect();
    while let Some(n) = stack.pop() {
        for p in g.productions.iter().filter(|p| p.lhs == n) {
            for s in &p.rhs {
                if let Symbol::Nonterminal(m) = s {
                    if reachable.insert(m.as_str()) {
                        stack.push(m.as_str());
                    }
                }
            }
        }
    }
    for n in &defined {
        if !reachable.contains(n) {
            out.push(Violation::new(
                n.to_string(),
                "nonterminal is unreachable from every sentence kind",
            ));
        }
    }

    for kind in &kinds {
        if !defined.contains(kind) {
            out.push(Violation::new(kind.to_string(), "missing sentence kind"));
            continue;
        }
        for e in g.expansions(kind) {
            for slot in kind_slots(kind) {
                if !e.items.contains(&Item::Slot(slot.to_string())) {
                    out.push(Violation::new(
                        kind.to_string(),
                        format!("an expansion lacks slot ${slot}"),
                    ));
                }
            }
        }
    }

    let required = required_lexicon_keys();
    for key in g.lexicon.keys() {
        if !required.contains(key) {
            let line = g.lexicon_lines.get(key).copied().unwrap_or(0);
            out.push(Violation::new(
                format!("line {line}"),
                format!("lexicon entry {key} is not in the vocabulary"),
            ));
        }
    }
    for key in required {
        if !g.lexicon.contains_key(&key) {
            out.push(Violation::new(key, "missing lexicon entry"));
        }
    }
    out
}

fn slot_known(s: &str) -> bool {
    STORY_KINDS
        .iter()
        .chain(QUESTION_KINDS)
        .any(|k| kind_slots(k).contains(&s))
}

/// Lexicon key of a relation phrase.
pub fn rel_key(r: RelationKind) -> String {
    format!("rel.{}", r.lexicon_key())
}

pub fn edge_key(e: Edge) -> String {
    rel_key(RelationKind::TouchingEdge(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grammar_is_valid() {
        let g = Grammar::default_grammar();
        assert_eq!(validate_grammar(&g), vec![]);
        for kind in STORY_KINDS.iter().chain(QUESTION_KINDS) {
            assert!(g.has_kind(kind), "{kind}");
        }
    }

    #[test]
    fn orphan_nonterminal_is_reported() {
        let src = format!("{}\nOrphan -> \"nothing\"\n", Grammar::default_source());
        let g = Grammar::parse(&src).unwrap();
        let v = validate_grammar(&g);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].message.contains("unreachable"));
    }

    #[test]
    fn unknown_color_is_reported() {
        let src = format!("{}\n@color.purple = purple\n", Grammar::default_source());
        let g = Grammar::parse(&src).unwrap();
        let v = validate_grammar(&g);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].message.contains("color.purple"));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = Grammar::parse("Foo -> \"a\"\nBar -> baz\n").unwrap_err();
        assert_eq!(
            err,
            GrammarError::Syntax {
                line: 2,
                message: "unexpected \"baz\"; terminals must be quoted".into()
            }
        );
    }

    #[test]
    fn nonterminals_flatten_with_weights() {
        let g = Grammar::parse(
            "BlockHas -> $block Have $intro \".\"\nHave -> $has [3]\nHave -> \"owns\" $has\n",
        )
        .unwrap();
        let ex = g.expansions("BlockHas");
        assert_eq!(ex.len(), 2);
        assert!(ex[0].weight > ex[1].weight);
        assert_eq!(ex[1].items[1], Item::Word("owns".into()));
    }
}
