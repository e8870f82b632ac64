//! Reading stories and questions back with the grammar that wrote them.
//!
//! Every sentence is matched against the flattened expansions of each kind,
//! with slot readers for mentions, relation phrases and block names. A story
//! is then interpreted sentence by sentence: indefinite mentions introduce
//! objects (in the block currently being described, if any), definite ones
//! must pick out exactly one object introduced earlier, and "it" is the only
//! object the previous sentence mentioned or, failing that, its subject.

use std::collections::BTreeMap;

use crate::algebra::closure;
use crate::answers;
use crate::error::{ParseError, SolveError};
use crate::grammar::{
    edge_key, hypernym_name, rel_key, Grammar, Item, MAX_COUNT, QUESTION_KINDS, STORY_KINDS,
};
use crate::mention::{self, StatedFacts};
use crate::model::{
    AnswerSet, Attribute, BlockId, ChoiceForm, Color, Determiner, EntityDescriptor, EntityRef,
    EntityTable, Fact, Hypernym, LogicalForm, Number, ObjectId, RelationKind, Shape, Size,
    StoryBlock, StoryObject,
};
use crate::text;
use crate::vocab::{Direction, VocabularyMap};

/// Lexicon lookups for parsing, built once per grammar.
#[derive(Debug, Clone)]
struct Lexicon {
    shapes: Vec<(Vec<String>, (Shape, Number))>,
    hypernyms: Vec<(Vec<String>, (Hypernym, Number))>,
    colors: Vec<(Vec<String>, Color)>,
    sizes: Vec<(Vec<String>, Size)>,
    relations: Vec<(Vec<String>, RelationKind)>,
    counts: Vec<(Vec<String>, u32)>,
    has: Vec<Vec<String>>,
}

impl Lexicon {
    fn new(g: &Grammar) -> Self {
        let all = |key: &str| g.phrases(key).to_vec();
        let mut lex = Lexicon {
            shapes: Vec::new(),
            hypernyms: Vec::new(),
            colors: Vec::new(),
            sizes: Vec::new(),
            relations: Vec::new(),
            counts: Vec::new(),
            has: all("has"),
        };
        for s in Shape::ALL {
            for p in all(&format!("shape.{}", s.name())) {
                lex.shapes.push((p, (s, Number::Singular)));
            }
            for p in all(&format!("shape.{}.plural", s.name())) {
                lex.shapes.push((p, (s, Number::Plural)));
            }
        }
        for h in Hypernym::ALL {
            for p in all(&format!("hypernym.{}", hypernym_name(h))) {
                lex.hypernyms.push((p, (h, Number::Singular)));
            }
            for p in all(&format!("hypernym.{}.plural", hypernym_name(h))) {
                lex.hypernyms.push((p, (h, Number::Plural)));
            }
        }
        for c in Color::ALL {
            for p in all(&format!("color.{}", c.name())) {
                lex.colors.push((p, c));
            }
        }
        for s in Size::ALL {
            for p in all(&format!("size.{}", s.name())) {
                lex.sizes.push((p, s));
            }
        }
        for r in RelationKind::ALL {
            let key = match r {
                RelationKind::TouchingEdge(e) => edge_key(e),
                _ => rel_key(r),
            };
            for p in all(&key) {
                lex.relations.push((p, r));
            }
        }
        for n in 1..=MAX_COUNT {
            for p in all(&format!("count.{n}")) {
                lex.counts.push((p, n));
            }
        }
        lex
    }
}

#[derive(Debug, Clone)]
enum Np {
    Pronoun,
    Group(u32, EntityDescriptor),
    Single(EntityDescriptor),
}

#[derive(Debug, Clone)]
enum Val {
    Np(Np),
    Nps(Vec<Np>),
    Rel(RelationKind),
    Rels(Vec<RelationKind>),
    Block(String),
    Blocks(Vec<String>),
    ThisBlock,
    Word,
}

type Slots = BTreeMap<String, Val>;

struct Reader<'a> {
    lex: &'a Lexicon,
    toks: &'a [String],
    low: Vec<String>,
    /// Furthest token any reading reached, for error messages.
    furthest: std::cell::Cell<usize>,
}

fn is_block_name(t: &str) -> bool {
    t.chars().next().is_some_and(|c| c.is_ascii_uppercase())
        && t.chars().all(|c| c.is_ascii_alphanumeric())
}

impl<'a> Reader<'a> {
    fn new(lex: &'a Lexicon, toks: &'a [String]) -> Self {
        Self {
            lex,
            toks,
            low: toks.iter().map(|t| t.to_lowercase()).collect(),
            furthest: std::cell::Cell::new(0),
        }
    }

    fn reach(&self, i: usize) {
        if i > self.furthest.get() {
            self.furthest.set(i);
        }
    }

    fn word(&self, i: usize, w: &str) -> bool {
        self.low.get(i).is_some_and(|t| t == w)
    }

    fn phrases<T: Copy>(&self, i: usize, list: &[(Vec<String>, T)]) -> Vec<(T, usize)> {
        list.iter()
            .filter(|(p, _)| self.low[i.min(self.low.len())..].starts_with(p))
            .map(|(p, v)| (*v, i + p.len()))
            .collect()
    }

    fn longest<T: Copy>(&self, i: usize, list: &[(Vec<String>, T)]) -> Option<(T, usize)> {
        self.phrases(i, list).into_iter().max_by_key(|x| x.1)
    }

    fn np(&self, i: usize) -> Vec<(Np, usize)> {
        let mut out = Vec::new();
        if self.word(i, "it") {
            out.push((Np::Pronoun, i + 1));
            return out;
        }
        let mut starts: Vec<(Determiner, Option<u32>, usize)> = Vec::new();
        match self.low.get(i).map(String::as_str) {
            Some("the") => starts.push((Determiner::The, None, i + 1)),
            Some("a" | "an") => starts.push((Determiner::A, None, i + 1)),
            Some("any") => starts.push((Determiner::Any, None, i + 1)),
            Some("all") => starts.push((Determiner::All, None, i + 1)),
            _ => {}
        }
        for (n, end) in self.phrases(i, &self.lex.counts) {
            if n == 1 {
                starts.push((Determiner::A, None, end));
            } else {
                starts.push((Determiner::Bare, Some(n), end));
            }
        }
        for (det, group, j) in starts {
            let mut d = EntityDescriptor::new(det);
            let mut j = j;
            loop {
                if d.size.is_none() {
                    if let Some((s, e)) = self.longest(j, &self.lex.sizes) {
                        d.size = Some(s);
                        j = e;
                        continue;
                    }
                }
                if d.color.is_none() {
                    if let Some((c, e)) = self.longest(j, &self.lex.colors) {
                        d.color = Some(c);
                        j = e;
                        continue;
                    }
                }
                break;
            }
            let mut heads = Vec::new();
            for (s, e) in self.phrases(j, &self.lex.shapes) {
                heads.push((Some(s.0), None, s.1, e));
            }
            for (h, e) in self.phrases(j, &self.lex.hypernyms) {
                heads.push((None, Some(h.0), h.1, e));
            }
            for (shape, hyp, number, mut e) in heads {
                let mut d = d.clone();
                d.shape = shape;
                d.hypernym = hyp;
                d.number = number;
                if self.word(e, "number") {
                    if let Some((n, e2)) = self.longest(e + 1, &self.lex.counts) {
                        d.ordinal = Some(n);
                        e = e2;
                    }
                }
                self.reach(e);
                let base = match group {
                    Some(n) => Np::Group(n, d.clone()),
                    None => Np::Single(d.clone()),
                };
                out.push((base, e));
                if group.is_none()
                    && (self.word(e, "which") || self.word(e, "that"))
                    && (self.word(e + 1, "is") || self.word(e + 1, "are"))
                {
                    for (r, e2) in self.phrases(e + 2, &self.lex.relations) {
                        for (inner, e3) in self.np(e2) {
                            if let Np::Single(inner) = inner {
                                out.push((Np::Single(d.clone().with_nested(r, inner)), e3));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Lists "x, y and z"; every prefix is a candidate.
    fn list<T: Clone>(
        &self,
        i: usize,
        item: &dyn Fn(usize) -> Vec<(T, usize)>,
    ) -> Vec<(Vec<T>, usize)> {
        let mut out = Vec::new();
        let mut frontier: Vec<(Vec<T>, usize)> =
            item(i).into_iter().map(|(v, e)| (vec![v], e)).collect();
        while let Some((items, e)) = frontier.pop() {
            if self.word(e, "and") || self.word(e, ",") {
                for (v, e2) in item(e + 1) {
                    let mut next = items.clone();
                    next.push(v);
                    frontier.push((next, e2));
                }
            }
            out.push((items, e));
        }
        out
    }

    fn block_name(&self, i: usize) -> Option<String> {
        self.toks.get(i).filter(|t| is_block_name(t)).cloned()
    }

    fn slot(&self, name: &str, i: usize) -> Vec<(Val, usize)> {
        match name {
            "subj" | "a" | "b" | "target" | "anchor" | "first" | "second" | "obj" => self
                .np(i)
                .into_iter()
                .map(|(n, e)| (Val::Np(n), e))
                .collect(),
            "objs" | "intro" => self
                .list(i, &|j| self.np(j))
                .into_iter()
                .map(|(v, e)| (Val::Nps(v), e))
                .collect(),
            "rel" => self
                .phrases(i, &self.lex.relations)
                .into_iter()
                .map(|(r, e)| (Val::Rel(r), e))
                .collect(),
            "rels" => self
                .list(i, &|j| self.phrases(j, &self.lex.relations))
                .into_iter()
                .map(|(v, e)| (Val::Rels(v), e))
                .collect(),
            "in" => self
                .phrases(i, &self.lex.relations)
                .into_iter()
                .filter(|(r, _)| *r == RelationKind::In)
                .map(|(_, e)| (Val::Word, e))
                .collect(),
            "has" => self
                .lex
                .has
                .iter()
                .filter(|p| self.low[i.min(self.low.len())..].starts_with(p))
                .map(|p| (Val::Word, i + p.len()))
                .collect(),
            "be" => {
                if self.word(i, "is") || self.word(i, "are") {
                    vec![(Val::Word, i + 1)]
                } else {
                    vec![]
                }
            }
            "count" => self
                .phrases(i, &self.lex.counts)
                .into_iter()
                .map(|(_, e)| (Val::Word, e))
                .collect(),
            "name" => self
                .block_name(i)
                .map(|n| (Val::Block(n), i + 1))
                .into_iter()
                .collect(),
            "block" => {
                if self.word(i, "block") {
                    self.block_name(i + 1)
                        .map(|n| (Val::Block(n), i + 2))
                        .into_iter()
                        .collect()
                } else {
                    vec![]
                }
            }
            "edgeblock" => {
                if self.word(i, "this") && self.word(i + 1, "block") {
                    vec![(Val::ThisBlock, i + 2)]
                } else {
                    self.slot("block", i)
                }
            }
            "blocks" => {
                if !self.word(i, "block") {
                    return vec![];
                }
                let name = |j: usize| -> Vec<(String, usize)> {
                    let j = if self.word(j, "block") { j + 1 } else { j };
                    self.block_name(j).map(|n| (n, j + 1)).into_iter().collect()
                };
                self.list(i, &name)
                    .into_iter()
                    .map(|(v, e)| (Val::Blocks(v), e))
                    .collect()
            }
            _ => vec![],
        }
    }

    /// All complete readings of the tokens as one expansion.
    fn expansion(&self, items: &[Item], i: usize, slots: &Slots, out: &mut Vec<Slots>) {
        self.reach(i);
        let Some(first) = items.first() else {
            if i == self.low.len() {
                out.push(slots.clone());
            }
            return;
        };
        match first {
            Item::Word(w) => {
                if self.word(i, w) {
                    self.expansion(&items[1..], i + 1, slots, out);
                }
            }
            Item::Slot(s) => {
                for (v, e) in self.slot(s, i) {
                    let mut next = slots.clone();
                    next.insert(s.clone(), v);
                    self.expansion(&items[1..], e, &next, out);
                }
            }
        }
    }

    fn readings(&self, g: &Grammar, kinds: &[&'static str]) -> Vec<(&'static str, Slots)> {
        let mut out = Vec::new();
        for &kind in kinds {
            for exp in g.expansions(kind) {
                let mut found = Vec::new();
                self.expansion(&exp.items, 0, &Slots::new(), &mut found);
                out.extend(found.into_iter().map(|s| (kind, s)));
            }
        }
        out
    }

    fn residual(&self) -> String {
        let (text, _) = text::join(&self.toks[self.furthest.get().min(self.toks.len())..]);
        text
    }
}

/// Facts and entities read from a story.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedStory {
    pub facts: Vec<Fact>,
    pub entities: EntityTable,
    /// Facts read from each sentence, as indices into `facts`.
    pub sentence_facts: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Default)]
struct StoryState {
    objects: Vec<StoryObject>,
    pending: Vec<StoryObject>,
    blocks: Vec<StoryBlock>,
    stated: StatedFacts,
    prev: Vec<ObjectId>,
    prev_subject: Option<ObjectId>,
    current: Option<BlockId>,
    facts: Vec<Fact>,
}

impl StoryState {
    fn block(&mut self, name: &str) -> BlockId {
        if let Some(b) = self.blocks.iter().find(|b| b.name == name) {
            return b.id;
        }
        let id = BlockId(self.blocks.len() as u32);
        self.blocks.push(StoryBlock {
            id,
            name: name.to_string(),
        });
        id
    }

    fn new_object(
        &mut self,
        attrs: Attribute,
        ordinal: Option<u32>,
        block: Option<BlockId>,
    ) -> ObjectId {
        let id = ObjectId((self.objects.len() + self.pending.len()) as u32);
        self.pending.push(StoryObject {
            id,
            attrs,
            block,
            ordinal,
        });
        if let Some(b) = block {
            self.facts.push(Fact::new(
                EntityRef::Object(id),
                RelationKind::In,
                EntityRef::Block(b),
            ));
        }
        id
    }

    fn max_ordinal(&self, attrs: &Attribute) -> u32 {
        self.objects
            .iter()
            .chain(&self.pending)
            .filter(|o| o.attrs == *attrs)
            .filter_map(|o| o.ordinal)
            .max()
            .unwrap_or(0)
    }

    /// Objects a mention refers to; new objects go to `block`.
    fn resolve(&mut self, np: &Np, block: Option<BlockId>) -> Result<Vec<ObjectId>, String> {
        match np {
            Np::Pronoun => match self.prev.as_slice() {
                [o] => Ok(vec![*o]),
                _ => self.prev_subject.map(|o| vec![o]).ok_or_else(|| {
                    "\"it\" needs one object or a subject in the previous sentence".into()
                }),
            },
            Np::Group(n, d) => {
                let shape = d.shape.ok_or("a group needs a shape")?;
                let attrs = Attribute::new(shape, d.color, d.size);
                let first = self.max_ordinal(&attrs) + 1;
                Ok((0..*n)
                    .map(|k| self.new_object(attrs, Some(first + k), block))
                    .collect())
            }
            Np::Single(d) => match d.determiner {
                Determiner::The => {
                    let m = mention::matches(d, &self.objects, &self.stated);
                    match m.as_slice() {
                        [o] => Ok(vec![*o]),
                        [] => Err("definite mention matches no object".into()),
                        _ => Err("definite mention is ambiguous".into()),
                    }
                }
                Determiner::A if d.nested.is_none() => {
                    let shape = d.shape.ok_or("an introduction needs a shape")?;
                    let attrs = Attribute::new(shape, d.color, d.size);
                    Ok(vec![self.new_object(attrs, d.ordinal, block)])
                }
                _ => Err("quantified mention in a story".into()),
            },
        }
    }

    fn one(&mut self, np: &Np, block: Option<BlockId>) -> Result<ObjectId, String> {
        match self.resolve(np, block)?.as_slice() {
            [o] => Ok(*o),
            _ => Err("a relation needs a single object".into()),
        }
    }

    fn interpret(&mut self, kind: &str, s: &Slots) -> Result<(), String> {
        let mut mentioned = Vec::new();
        let mut subject = None;
        match kind {
            "BlocksIntro" => {}
            "BlockRel" => {
                let (Some(Val::Block(a)), Some(Val::Rel(r)), Some(Val::Blocks(bs))) =
                    (s.get("block"), s.get("rel"), s.get("blocks"))
                else {
                    return Err("malformed block relation".into());
                };
                if !r.is_directional() {
                    return Err(format!("blocks cannot be {}", r.label()));
                }
                let a = self.block(a);
                for b in bs {
                    let b = self.block(b);
                    self.facts
                        .push(Fact::new(EntityRef::Block(a), *r, EntityRef::Block(b)));
                }
            }
            "BlockHas" | "BlockThere" => {
                let (Some(Val::Block(name)), Some(Val::Nps(units))) =
                    (s.get("block"), s.get("intro"))
                else {
                    return Err("malformed block introduction".into());
                };
                let b = self.block(name);
                self.current = Some(b);
                for u in units {
                    let definite = matches!(u, Np::Single(d) if d.determiner == Determiner::The)
                        || matches!(u, Np::Pronoun);
                    let ids = self.resolve(u, Some(b))?;
                    if definite {
                        for &o in &ids {
                            self.facts.push(Fact::new(
                                EntityRef::Object(o),
                                RelationKind::In,
                                EntityRef::Block(b),
                            ));
                        }
                    }
                    mentioned.extend(ids);
                }
            }
            "BlockNamed" => {
                let Some(Val::Block(name)) = s.get("name") else {
                    return Err("malformed block name".into());
                };
                let b = self.block(name);
                self.current = Some(b);
            }
            "RelSent" | "RelFronted" => {
                let (Some(Val::Np(subj)), Some(Val::Rels(rels)), Some(Val::Nps(objs))) =
                    (s.get("subj"), s.get("rels"), s.get("objs"))
                else {
                    return Err("malformed relation sentence".into());
                };
                // mentions resolve in reading order
                let fronted = kind == "RelFronted";
                let mut obj_ids = Vec::new();
                let mut subj_id = None;
                if !fronted {
                    subj_id = Some(self.one(subj, self.current)?);
                }
                for o in objs {
                    obj_ids.push(self.one(o, self.current)?);
                }
                if fronted {
                    subj_id = Some(self.one(subj, self.current)?);
                }
                let subj_id = subj_id.unwrap();
                subject = Some(subj_id);
                for r in rels {
                    if r.converse().is_none() || matches!(r, RelationKind::TouchingEdge(_)) {
                        return Err(format!("objects cannot be {}", r.label()));
                    }
                    for &o in &obj_ids {
                        self.facts.push(Fact::new(
                            EntityRef::Object(subj_id),
                            *r,
                            EntityRef::Object(o),
                        ));
                    }
                }
                mentioned.push(subj_id);
                mentioned.extend(obj_ids);
            }
            "EdgeSent" => {
                let (Some(Val::Np(subj)), Some(Val::Rel(r)), Some(block)) =
                    (s.get("subj"), s.get("rel"), s.get("edgeblock"))
                else {
                    return Err("malformed edge sentence".into());
                };
                if !matches!(r, RelationKind::TouchingEdge(_)) {
                    return Err("expected an edge".into());
                }
                let o = self.one(subj, self.current)?;
                let b = match block {
                    Val::ThisBlock => self
                        .current
                        .ok_or("\"this block\" without a block in context")?,
                    Val::Block(name) => self.block(name),
                    _ => return Err("malformed edge sentence".into()),
                };
                self.facts
                    .push(Fact::new(EntityRef::Object(o), *r, EntityRef::Block(b)));
                mentioned.push(o);
            }
            _ => return Err(format!("{kind} is not a story sentence")),
        }
        mentioned.dedup();
        self.prev = mentioned;
        self.prev_subject = subject;
        Ok(())
    }

    fn commit(&mut self, from: usize) {
        let pending = std::mem::take(&mut self.pending);
        self.objects.extend(pending);
        for f in &self.facts[from..] {
            self.stated.add(f);
        }
    }
}

/// Split tokens into sentences ending with ".".
fn sentences(tokens: &[String]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for t in tokens {
        cur.push(t.clone());
        if t == "." {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub fn parse_story(
    story: &str,
    g: &Grammar,
    vocab: Option<&VocabularyMap>,
) -> Result<ParsedStory, ParseError> {
    let lex = Lexicon::new(g);
    let mut tokens = text::tokenize(story);
    if let Some(v) = vocab {
        tokens = v.map_tokens(&tokens, Direction::Backward).tokens;
    }
    let mut state = StoryState::default();
    let mut sentence_facts = Vec::new();
    for (n, toks) in sentences(&tokens).into_iter().enumerate() {
        let reader = Reader::new(&lex, &toks);
        let readings = reader.readings(g, STORY_KINDS);
        if readings.is_empty() {
            return Err(ParseError {
                sentence: n + 1,
                residual: reader.residual(),
                detail: None,
            });
        }
        let mut last_err = None;
        let mut done = false;
        for (kind, slots) in &readings {
            let mut next = state.clone();
            let from = next.facts.len();
            match next.interpret(kind, slots) {
                Ok(()) => {
                    next.commit(from);
                    sentence_facts.push((from..next.facts.len()).collect());
                    state = next;
                    done = true;
                    break;
                }
                Err(e) => last_err = Some(e),
            }
        }
        if !done {
            return Err(ParseError {
                sentence: n + 1,
                residual: text::join(&toks).0,
                detail: last_err,
            });
        }
    }
    Ok(ParsedStory {
        facts: state.facts,
        entities: EntityTable {
            objects: state.objects,
            blocks: state.blocks,
        },
        sentence_facts,
    })
}

fn single(v: Option<&Val>) -> Result<EntityDescriptor, String> {
    match v {
        Some(Val::Np(Np::Single(d))) => Ok(d.clone()),
        _ => Err("expected a description of objects".into()),
    }
}

fn question_form(kind: &str, s: &Slots) -> Result<LogicalForm, String> {
    let rel = || match s.get("rel") {
        Some(Val::Rel(r))
            if r.converse().is_some() && !matches!(r, RelationKind::TouchingEdge(_)) =>
        {
            Ok(*r)
        }
        _ => Err("expected a relation between objects".to_string()),
    };
    Ok(match kind {
        "AskFr" => LogicalForm::FindRelation {
            first: single(s.get("a"))?,
            second: single(s.get("b"))?,
        },
        "AskFbHas" | "AskFbNot" => LogicalForm::FindBlock {
            target: single(s.get("target"))?,
            negated: kind == "AskFbNot",
        },
        "AskCoWhich" | "AskCoWhat" => LogicalForm::ChooseObject {
            relation: rel()?,
            anchor: single(s.get("anchor"))?,
            candidates: [single(s.get("first"))?, single(s.get("second"))?],
            form: if kind == "AskCoWhich" {
                ChoiceForm::Which
            } else {
                ChoiceForm::What
            },
        },
        "AskYn" | "AskYnThere" | "AskYnAll" => {
            let subject = single(s.get("subj"))?;
            let ok = match kind {
                "AskYn" => matches!(subject.determiner, Determiner::The | Determiner::A),
                "AskYnThere" => subject.determiner == Determiner::Any,
                _ => subject.determiner == Determiner::All,
            };
            if !ok {
                return Err("determiner does not fit the question".into());
            }
            LogicalForm::YesNo {
                subject,
                relation: rel()?,
                object: single(s.get("obj"))?,
            }
        }
        _ => return Err(format!("{kind} is not a question")),
    })
}

pub fn parse_question(
    question: &str,
    g: &Grammar,
    vocab: Option<&VocabularyMap>,
) -> Result<LogicalForm, ParseError> {
    let lex = Lexicon::new(g);
    let mut tokens = text::tokenize(question);
    if let Some(v) = vocab {
        tokens = v.map_tokens(&tokens, Direction::Backward).tokens;
    }
    let reader = Reader::new(&lex, &tokens);
    let readings = reader.readings(g, QUESTION_KINDS);
    let mut last_err = None;
    for (kind, slots) in &readings {
        match question_form(kind, slots) {
            Ok(lf) => return Ok(lf),
            Err(e) => last_err = Some(e),
        }
    }
    Err(ParseError {
        sentence: 1,
        residual: if readings.is_empty() {
            reader.residual()
        } else {
            question.to_string()
        },
        detail: last_err,
    })
}

/// Answer a question about a story from text alone.
pub fn solve(
    story: &str,
    question: &str,
    g: &Grammar,
    vocab: Option<&VocabularyMap>,
) -> Result<AnswerSet, SolveError> {
    let parsed = parse_story(story, g, vocab)?;
    let lf = parse_question(question, g, vocab)?;
    let closed = closure(&parsed.facts)?;
    Ok(answers::answer(&lf, &parsed.entities, &closed)?)
}

/// A fact written with entity keys, in the orientation that sorts first, so
/// that stories written with different ids and converses compare equal.
pub fn normalized_facts(
    facts: &[Fact],
    entities: &EntityTable,
) -> Vec<(String, RelationKind, String)> {
    let mut out: Vec<_> = facts
        .iter()
        .map(|f| {
            let a = (
                entities.entity_key(f.subject),
                f.relation,
                entities.entity_key(f.object),
            );
            match f.converse() {
                Some(c) => {
                    let b = (
                        entities.entity_key(c.subject),
                        c.relation,
                        entities.entity_key(c.object),
                    );
                    a.min(b)
                }
                None => a,
            }
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::labels;
    use crate::realizer::{realize_story, RealizerConfig};
    use crate::sampler::{
        extract_geometric_facts, sample_scene, select_story_facts, SamplerConfig,
    };

    fn g() -> Grammar {
        Grammar::default_grammar()
    }

    #[test]
    fn round_trip_sampled_stories() {
        let g = g();
        for seed in 0..300 {
            let cfg = SamplerConfig {
                seed,
                ..SamplerConfig::default()
            };
            let scene = sample_scene(&cfg).unwrap();
            let facts = select_story_facts(&extract_geometric_facts(&scene, &cfg), &cfg);
            let story =
                realize_story(&facts, &scene, &g, &RealizerConfig::default(), seed).unwrap();
            let parsed = parse_story(&story.text(), &g, None)
                .unwrap_or_else(|e| panic!("seed {seed}: {e}\n{}", story.text()));
            assert_eq!(
                normalized_facts(&parsed.facts, &parsed.entities),
                normalized_facts(&story.facts, &story.entities),
                "seed {seed}\n{}",
                story.text()
            );
        }
    }

    #[test]
    fn story_without_blocks() {
        let p = parse_story(
            "A blue circle is above a big triangle. To the left of the big triangle, there is a square.",
            &g(),
            None,
        )
        .unwrap();
        assert_eq!(p.entities.objects.len(), 3);
        assert_eq!(p.facts.len(), 2);
        assert!(p.entities.blocks.is_empty());
    }

    #[test]
    fn pronoun_needs_a_single_antecedent() {
        let g = g();
        assert!(parse_story("Block A has a circle. It is above a square.", &g, None).is_ok());
        let err = parse_story(
            "Block A has a circle and a square. It is above a triangle.",
            &g,
            None,
        )
        .unwrap_err();
        assert_eq!(err.sentence, 2);
    }

    #[test]
    fn unknown_words_report_the_rest_of_the_sentence() {
        let err = parse_story(
            "Block A has a circle. The circle is beside a square.",
            &g(),
            None,
        )
        .unwrap_err();
        assert_eq!(err.sentence, 2);
        assert_eq!(err.residual, "beside a square.");
    }

    #[test]
    fn groups_get_consecutive_numbers() {
        let p = parse_story(
            "Block A has a yellow square number one. Block B has two yellow squares.",
            &g(),
            None,
        )
        .unwrap();
        let ords: Vec<_> = p.entities.objects.iter().map(|o| o.ordinal).collect();
        assert_eq!(ords, vec![Some(1), Some(2), Some(3)]);
    }

    #[test]
    fn questions_parse_to_forms() {
        let g = g();
        let lf = parse_question(
            "Is the circle which is above the square to the left of all triangles?",
            &g,
            None,
        )
        .unwrap();
        let LogicalForm::YesNo {
            subject,
            relation,
            object,
        } = lf
        else {
            panic!()
        };
        assert_eq!(subject.depth(), 1);
        assert_eq!(relation, RelationKind::Left);
        assert_eq!(object.determiner, Determiner::All);
        let lf = parse_question("Which block doesn't have a big circle?", &g, None).unwrap();
        assert!(matches!(lf, LogicalForm::FindBlock { negated: true, .. }));
        let lf = parse_question(
            "What is below the circle? a square or a triangle?",
            &g,
            None,
        )
        .unwrap();
        assert!(matches!(
            lf,
            LogicalForm::ChooseObject {
                form: ChoiceForm::What,
                ..
            }
        ));
    }

    #[test]
    fn solve_reads_text_only() {
        let story = "Block A has a big circle and a square. The big circle is above the square. \
                     A triangle is to the right of the square.";
        let a = solve(story, "Is the square below the big circle?", &g(), None).unwrap();
        assert_eq!(a.labels, vec![labels::YES]);
        let a = solve(
            story,
            "What is the relation between the triangle and the big circle?",
            &g(),
            None,
        )
        .unwrap();
        assert_eq!(a.labels, vec![labels::DK]);
    }
}
