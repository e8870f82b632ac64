//! Story realization: facts to sentences through the grammar.
//!
//! The story reads block by block. After an optional count of the blocks and
//! the block arrangement, each block gets an introduction sentence that
//! brings in some of its objects, followed by the relations inside the block
//! in shuffled order. Objects are introduced with an indefinite article and
//! their full name the first time they appear; later mentions are definite
//! and are chosen so that they pick out exactly one of the objects
//! introduced so far. An object introduced indefinitely inside a block's
//! part of the story is understood to be in that block.
//!
//! Identical objects are numbered in order of introduction ("the yellow
//! square number two"). "It" refers back to the only object mentioned by the
//! previous sentence.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::RealizeError;
use crate::grammar::{edge_key, Grammar, Item};
use crate::mention::{self, StatedFacts};
use crate::model::{
    Attribute, BlockId, Determiner, EntityDescriptor, EntityRef, EntityTable, Fact, Hypernym,
    ObjectId, RelationKind, RelationSpan, Scene, Sentence, Story, StoryBlock, StoryObject,
};
use crate::rng::{rng, Rng as StdRng};
use crate::text;

/// A fact with the indices of the input facts it stands for.
type Class = (Fact, Vec<usize>);
/// Block sentence targets: block name, id and the facts they express.
type BlockTargets = Vec<(String, BlockId, Vec<usize>)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RealizerConfig {
    /// Chance of opening with "We have three blocks."
    pub blocks_intro_probability: f64,
    /// Chance of stating a fact through its converse.
    pub flip_probability: f64,
    /// Chance that an object with relations is introduced by its block's
    /// introduction sentence rather than by its first relation.
    pub intro_fraction: f64,
    /// Chance of using "It" where it is allowed.
    pub pronoun_probability: f64,
    /// Chance of referring to a known object through a relation clause.
    pub nested_mention_probability: f64,
    /// Chance of using the full name for a definite mention.
    pub full_name_probability: f64,
    /// Chance of "object"/"shape"/"thing" in place of the shape.
    pub hypernym_probability: f64,
    /// Chance of "one" in place of "a" in an introduction.
    pub one_probability: f64,
    /// Most objects joined by "and" after one relation.
    pub max_conjuncts: usize,
}

impl Default for RealizerConfig {
    fn default() -> Self {
        Self {
            blocks_intro_probability: 0.5,
            flip_probability: 0.5,
            intro_fraction: 0.5,
            pronoun_probability: 0.6,
            nested_mention_probability: 0.15,
            full_name_probability: 0.4,
            hypernym_probability: 0.2,
            one_probability: 0.15,
            max_conjuncts: 2,
        }
    }
}

/// Tokens for one slot, with the sub-ranges that spans may point at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub tokens: Vec<String>,
    pub parts: Vec<(usize, usize)>,
}

impl Piece {
    pub fn whole(tokens: Vec<String>) -> Self {
        let n = tokens.len();
        Self {
            tokens,
            parts: vec![(0, n)],
        }
    }

    pub fn word(w: &str) -> Self {
        Self::whole(vec![w.to_string()])
    }

    /// Units joined as "x, y and z"; each unit is a part.
    pub fn list(units: Vec<Vec<String>>) -> Self {
        let mut tokens = Vec::new();
        let mut parts = Vec::new();
        let n = units.len();
        for (i, u) in units.into_iter().enumerate() {
            if i > 0 {
                tokens.push(if i + 1 == n { "and" } else { "," }.to_string());
            }
            let start = tokens.len();
            tokens.extend(u);
            parts.push((start, tokens.len()));
        }
        Self { tokens, parts }
    }
}

/// A sentence assembled from a grammar expansion.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub text: String,
    pub token_spans: Vec<crate::model::Span>,
    pub slot_starts: HashMap<String, usize>,
}

impl Assembled {
    /// Character span of part `part` of `slot`.
    pub fn span(
        &self,
        slot: &str,
        pieces: &HashMap<&str, Piece>,
        part: usize,
    ) -> crate::model::Span {
        let start = self.slot_starts[slot];
        let (a, b) = pieces[slot].parts[part];
        text::cover(&self.token_spans, start + a, start + b)
    }
}

/// Expand `kind` with the given slot contents. The first token is
/// capitalized.
pub fn assemble<R: Rng + ?Sized>(
    g: &Grammar,
    kind: &str,
    pieces: &HashMap<&str, Piece>,
    rng: &mut R,
) -> Result<Assembled, RealizeError> {
    let expansion = g
        .choose_expansion(kind, rng)
        .ok_or_else(|| RealizeError::MissingProduction(kind.to_string()))?;
    let mut tokens: Vec<String> = Vec::new();
    let mut slot_starts = HashMap::new();
    for item in &expansion.items {
        match item {
            Item::Word(w) => tokens.push(w.clone()),
            Item::Slot(s) => {
                let piece = pieces
                    .get(s.as_str())
                    .ok_or_else(|| RealizeError::MissingProduction(format!("{kind} slot ${s}")))?;
                slot_starts.insert(s.clone(), tokens.len());
                tokens.extend(piece.tokens.iter().cloned());
            }
        }
    }
    if let Some(first) = tokens.first_mut() {
        *first = text::capitalize(first);
    }
    let (text, token_spans) = text::join(&tokens);
    Ok(Assembled {
        text,
        token_spans,
        slot_starts,
    })
}

/// Canonical member of a fact's converse pair, used to treat `Left(a,b)` and
/// `Right(b,a)` as one statement.
pub fn canonical(f: &Fact) -> Fact {
    match f.converse() {
        Some(c) if c < *f => c,
        _ => *f,
    }
}

/// Where a span's ends live: slot name and part index.
#[derive(Debug, Clone, Copy)]
struct Anchor(&'static str, usize);

#[derive(Debug, Clone)]
struct SpanSpec {
    fact_ids: Vec<usize>,
    relation: RelationKind,
    trajector: Anchor,
    indicator: Anchor,
    landmark: Anchor,
}

/// A relation sentence to be written: subject, relations, objects.
#[derive(Debug, Clone)]
struct RelItem {
    subject: ObjectId,
    relations: Vec<RelationKind>,
    objects: Vec<ObjectId>,
    /// Fact ids per (relation, object), same order as the cross product.
    facts: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
struct EdgeItem {
    object: ObjectId,
    relation: RelationKind,
    block: BlockId,
    facts: Vec<usize>,
}

#[derive(Debug, Clone)]
enum Task {
    Rel(RelItem),
    Edge(EdgeItem),
}

impl Task {
    fn objects(&self) -> Vec<ObjectId> {
        match self {
            Task::Rel(r) => std::iter::once(r.subject)
                .chain(r.objects.iter().copied())
                .collect(),
            Task::Edge(e) => vec![e.object],
        }
    }
}

struct Realizer<'a> {
    g: &'a Grammar,
    cfg: &'a RealizerConfig,
    rng: StdRng,
    scene: &'a Scene,
    facts: &'a [Fact],
    /// Objects introduced so far, in order.
    table: Vec<StoryObject>,
    /// Objects introduced by the sentence being built.
    pending: Vec<StoryObject>,
    blocks: Vec<StoryBlock>,
    stated: StatedFacts,
    prev_objects: Vec<ObjectId>,
    current_block: Option<BlockId>,
    home: BTreeMap<ObjectId, (BlockId, usize)>,
    multi: BTreeSet<Attribute>,
    ordinal_next: BTreeMap<Attribute, u32>,
    sentences: Vec<Sentence>,
    described: BTreeSet<EntityRef>,
}

pub fn realize_story(
    facts: &[Fact],
    scene: &Scene,
    g: &Grammar,
    cfg: &RealizerConfig,
    seed: u64,
) -> Result<Story, RealizeError> {
    let mut r = Realizer {
        g,
        cfg,
        rng: rng(seed),
        scene,
        facts,
        table: Vec::new(),
        pending: Vec::new(),
        blocks: Vec::new(),
        stated: StatedFacts::default(),
        prev_objects: Vec::new(),
        current_block: None,
        home: BTreeMap::new(),
        multi: BTreeSet::new(),
        ordinal_next: BTreeMap::new(),
        sentences: Vec::new(),
        described: BTreeSet::new(),
    };
    r.run()?;
    let token_count = r.sentences.iter().map(|s| text::token_count(&s.text)).sum();
    Ok(Story {
        facts: facts.to_vec(),
        sentences: r.sentences,
        described_entities: r.described,
        entities: EntityTable {
            objects: r.table,
            blocks: r.blocks,
        },
        token_count,
    })
}

impl Realizer<'_> {
    fn attrs(&self, o: ObjectId) -> Result<Attribute, RealizeError> {
        self.scene
            .object(o)
            .map(|x| x.attrs)
            .ok_or_else(|| RealizeError::Unreferable(format!("object {o} is not in the scene")))
    }

    fn block_name(&self, b: BlockId) -> Result<String, RealizeError> {
        self.scene
            .block(b)
            .map(|x| x.name.clone())
            .ok_or_else(|| RealizeError::Unreferable(format!("block {} is not in the scene", b.0)))
    }

    fn introduced(&self, o: ObjectId) -> bool {
        self.table.iter().any(|x| x.id == o)
    }

    fn run(&mut self) -> Result<(), RealizeError> {
        let facts = self.facts;
        for f in facts {
            let ok = f.is_positive()
                && f.check().is_none()
                && match (f.subject, f.relation, f.object) {
                    (
                        EntityRef::Object(_),
                        RelationKind::In | RelationKind::TouchingEdge(_),
                        EntityRef::Block(_),
                    ) => true,
                    (EntityRef::Object(_), r, EntityRef::Object(_)) => r.converse().is_some(),
                    (EntityRef::Block(_), r, EntityRef::Block(_)) => r.is_directional(),
                    _ => false,
                };
            if !ok {
                return Err(RealizeError::UncoverableFact(*f));
            }
        }

        // equivalence classes of facts (a fact and its converse)
        let mut classes: BTreeMap<Fact, Vec<usize>> = BTreeMap::new();
        for (i, f) in facts.iter().enumerate() {
            classes.entry(canonical(f)).or_default().push(i);
        }

        let mut objects: BTreeSet<ObjectId> = BTreeSet::new();
        let mut blocks: BTreeSet<BlockId> = BTreeSet::new();
        for f in facts {
            for e in [f.subject, f.object] {
                match e {
                    EntityRef::Object(o) => {
                        objects.insert(o);
                    }
                    EntityRef::Block(b) => {
                        blocks.insert(b);
                    }
                }
            }
        }
        for (i, f) in facts.iter().enumerate() {
            if f.relation == RelationKind::In {
                if let (Some(o), Some(b)) = (f.subject.as_object(), f.object.as_block()) {
                    if self.home.insert(o, (b, i)).is_some() {
                        return Err(RealizeError::UncoverableFact(*f));
                    }
                }
            }
        }
        let mut counts: BTreeMap<Attribute, usize> = BTreeMap::new();
        for &o in &objects {
            *counts.entry(self.attrs(o)?).or_default() += 1;
        }
        self.multi = counts
            .into_iter()
            .filter(|(_, n)| *n > 1)
            .map(|(a, _)| a)
            .collect();
        self.described
            .extend(objects.iter().map(|&o| EntityRef::Object(o)));
        self.described
            .extend(blocks.iter().map(|&b| EntityRef::Block(b)));
        let mut block_order: Vec<(String, BlockId)> = blocks
            .iter()
            .map(|&b| Ok((self.block_name(b)?, b)))
            .collect::<Result<_, RealizeError>>()?;
        block_order.sort();
        for (name, id) in &block_order {
            self.blocks.push(StoryBlock {
                id: *id,
                name: name.clone(),
            });
        }

        if block_order.len() >= 2 && self.rng.random_bool(self.cfg.blocks_intro_probability) {
            let mut pieces = HashMap::new();
            pieces.insert(
                "count",
                Piece::whole(mention::count_word(self.g, block_order.len() as u32)),
            );
            self.emit("BlocksIntro", &pieces, vec![], vec![], vec![], vec![])?;
        }

        // block arrangement
        let block_classes: Vec<Class> = classes
            .iter()
            .filter(|(f, _)| f.subject.is_block() && f.object.is_block())
            .map(|(f, ids)| (*f, ids.clone()))
            .collect();
        self.block_relations(block_classes)?;

        // relation tasks by section: Some(block) for pairs at home in one
        // block, None for objects without a block, and a final mixed group
        let mut sections: BTreeMap<Option<BlockId>, Vec<Task>> = BTreeMap::new();
        let mut mixed: Vec<Task> = Vec::new();
        let pair_classes: Vec<Class> = classes
            .iter()
            .filter(|(f, _)| !f.subject.is_block() && !f.object.is_block())
            .map(|(f, ids)| (*f, ids.clone()))
            .collect();
        let mut by_section: BTreeMap<Option<Option<BlockId>>, Vec<Class>> = BTreeMap::new();
        for (f, ids) in pair_classes {
            let hs = self.home.get(&f.subject.as_object().unwrap()).map(|h| h.0);
            let ho = self.home.get(&f.object.as_object().unwrap()).map(|h| h.0);
            let key = if hs == ho { Some(hs) } else { None };
            by_section.entry(key).or_default().push((f, ids));
        }
        for (key, list) in by_section {
            let tasks = self.group_relations(list);
            match key {
                Some(section) => sections.entry(section).or_default().extend(tasks),
                None => mixed.extend(tasks),
            }
        }
        for (f, ids) in &classes {
            if let RelationKind::TouchingEdge(_) = f.relation {
                let o = f.subject.as_object().unwrap();
                let b = f.object.as_block().unwrap();
                let task = Task::Edge(EdgeItem {
                    object: o,
                    relation: f.relation,
                    block: b,
                    facts: ids.clone(),
                });
                if self.home.get(&o).map(|h| h.0) == Some(b) {
                    sections.entry(Some(b)).or_default().push(task);
                } else {
                    mixed.push(task);
                }
            }
        }

        // objects without a block come first, while no block is in context
        let loose: Vec<ObjectId> = objects
            .iter()
            .copied()
            .filter(|o| !self.home.contains_key(o))
            .collect();
        if let Some(mut tasks) = sections.remove(&None) {
            tasks.shuffle(&mut self.rng);
            self.write_tasks(tasks)?;
        }
        if let Some(o) = loose.iter().find(|o| !self.introduced(**o)) {
            return Err(RealizeError::Unreferable(format!(
                "object {o} has no block and no relation among unplaced objects"
            )));
        }

        for (_, b) in block_order.clone() {
            let tasks = sections.remove(&Some(b)).unwrap_or_default();
            self.block_section(b, tasks)?;
        }

        mixed.shuffle(&mut self.rng);
        for t in &mixed {
            if let Some(o) = t.objects().into_iter().find(|o| !self.introduced(*o)) {
                return Err(RealizeError::Unreferable(format!(
                    "object {o} is only related across blocks"
                )));
            }
        }
        self.write_tasks(mixed)?;

        let covered: BTreeSet<usize> = self
            .sentences
            .iter()
            .flat_map(|s| s.fact_ids.iter().copied())
            .collect();
        if let Some(i) = (0..facts.len()).find(|i| !covered.contains(i)) {
            return Err(RealizeError::UncoverableFact(facts[i]));
        }
        Ok(())
    }

    /// Orient each statement, then merge objects that share a subject and
    /// the same relation set.
    fn group_relations(&mut self, list: Vec<Class>) -> Vec<Task> {
        type Stated = Vec<(RelationKind, Vec<usize>)>;
        let mut by_subject: BTreeMap<ObjectId, BTreeMap<ObjectId, Stated>> = BTreeMap::new();
        for (f, ids) in list {
            let f = if self.rng.random_bool(self.cfg.flip_probability) {
                f.converse().unwrap_or(f)
            } else {
                f
            };
            let s = f.subject.as_object().unwrap();
            let o = f.object.as_object().unwrap();
            by_subject
                .entry(s)
                .or_default()
                .entry(o)
                .or_default()
                .push((f.relation, ids));
        }
        let mut tasks = Vec::new();
        for (s, objs) in by_subject {
            type Targets = Vec<(ObjectId, Vec<Vec<usize>>)>;
            let mut by_rels: BTreeMap<Vec<RelationKind>, Targets> = BTreeMap::new();
            for (o, mut rels) in objs {
                rels.sort();
                let kinds: Vec<RelationKind> = rels.iter().map(|r| r.0).collect();
                let ids: Vec<Vec<usize>> = rels.into_iter().map(|r| r.1).collect();
                by_rels.entry(kinds).or_default().push((o, ids));
            }
            for (relations, objs) in by_rels {
                for chunk in objs.chunks(self.cfg.max_conjuncts.max(1)) {
                    let mut facts = Vec::new();
                    for ri in 0..relations.len() {
                        for (_, ids) in chunk {
                            facts.push(ids[ri].clone());
                        }
                    }
                    tasks.push(Task::Rel(RelItem {
                        subject: s,
                        relations: relations.clone(),
                        objects: chunk.iter().map(|c| c.0).collect(),
                        facts,
                    }));
                }
            }
        }
        tasks
    }

    fn block_relations(&mut self, classes: Vec<Class>) -> Result<(), RealizeError> {
        let mut groups: BTreeMap<(String, RelationKind), BlockTargets> = BTreeMap::new();
        for (f, ids) in classes {
            let f = if self.rng.random_bool(self.cfg.flip_probability) {
                f.converse().unwrap_or(f)
            } else {
                f
            };
            let s = f.subject.as_block().unwrap();
            let o = f.object.as_block().unwrap();
            groups
                .entry((self.block_name(s)?, f.relation))
                .or_default()
                .push((self.block_name(o)?, o, ids));
        }
        let mut sentences: Vec<((String, RelationKind), BlockTargets)> = Vec::new();
        for (key, mut objs) in groups {
            objs.sort_by(|a, b| a.0.cmp(&b.0));
            objs.shuffle(&mut self.rng);
            for chunk in objs.chunks(2) {
                sentences.push((key.clone(), chunk.to_vec()));
            }
        }
        sentences.shuffle(&mut self.rng);
        for ((subject, relation), objs) in sentences {
            let mut pieces = HashMap::new();
            pieces.insert("block", Piece::whole(vec!["block".into(), subject]));
            pieces.insert(
                "rel",
                Piece::whole(mention::relation_words(self.g, relation, &mut self.rng)),
            );
            let mut blocks = Piece::list(objs.iter().map(|o| vec![o.0.clone()]).collect());
            // "block C and B": the keyword only before the first name
            blocks.tokens.insert(0, "block".into());
            blocks.parts = blocks.parts.iter().map(|&(a, b)| (a + 1, b + 1)).collect();
            blocks.parts[0].0 = 0;
            pieces.insert("blocks", blocks);
            let mut specs = Vec::new();
            let mut ids = Vec::new();
            for (i, o) in objs.iter().enumerate() {
                ids.extend(o.2.iter().copied());
                specs.push(SpanSpec {
                    fact_ids: o.2.clone(),
                    relation,
                    trajector: Anchor("block", 0),
                    indicator: Anchor("rel", 0),
                    landmark: Anchor("blocks", i),
                });
            }
            self.emit("BlockRel", &pieces, specs, ids, vec![], vec![])?;
        }
        Ok(())
    }

    fn block_section(&mut self, b: BlockId, mut tasks: Vec<Task>) -> Result<(), RealizeError> {
        let members: Vec<ObjectId> = self
            .home
            .iter()
            .filter(|(_, h)| h.0 == b)
            .map(|(o, _)| *o)
            .collect();
        let mut with_tasks: BTreeSet<ObjectId> = BTreeSet::new();
        for t in &tasks {
            with_tasks.extend(t.objects());
        }
        // groups of identical objects are introduced together or not at all
        let mut units: BTreeMap<Attribute, Vec<ObjectId>> = BTreeMap::new();
        for &o in &members {
            units.entry(self.attrs(o)?).or_default().push(o);
        }
        let mut intro: Vec<(Attribute, Vec<ObjectId>)> = Vec::new();
        for (a, objs) in units {
            let forced = objs.iter().any(|o| !with_tasks.contains(o));
            if forced || self.rng.random_bool(self.cfg.intro_fraction) {
                intro.push((a, objs));
            }
        }
        intro.shuffle(&mut self.rng);
        let name = self.block_name(b)?;

        let w_has = self.g.kind_weight("BlockHas");
        let w_there = self.g.kind_weight("BlockThere");
        let w_named = if intro.is_empty() {
            self.g.kind_weight("BlockNamed")
        } else {
            0
        };
        let kind = if intro.is_empty()
            && w_named > 0
            && self.rng.random_range(0..w_has + w_there + w_named) < w_named
        {
            "BlockNamed"
        } else {
            if intro.is_empty() {
                // nothing forced; bring in one object so the block has content
                let o = members[self.rng.random_range(0..members.len())];
                intro.push((self.attrs(o)?, vec![o]));
            }
            if self.rng.random_range(0..w_has + w_there) < w_has {
                "BlockHas"
            } else {
                "BlockThere"
            }
        };

        self.current_block = Some(b);
        if kind == "BlockNamed" {
            let mut pieces = HashMap::new();
            pieces.insert("name", Piece::word(&name));
            self.emit(kind, &pieces, vec![], vec![], vec![], vec![])?;
        } else {
            let mut units = Vec::new();
            let mut specs = Vec::new();
            let mut ids = Vec::new();
            let mut mentioned = Vec::new();
            let mut first_plural = false;
            for (i, (attrs, objs)) in intro.iter().enumerate() {
                let words = if objs.len() > 1 {
                    for &o in objs {
                        self.introduce(o, Some(b))?;
                    }
                    mention::render_group(self.g, attrs, objs.len() as u32)
                } else {
                    let d = self.introduce(objs[0], Some(b))?;
                    let one = self.rng.random_bool(self.cfg.one_probability);
                    mention::render(self.g, &d, one, &mut self.rng)
                };
                if i == 0 {
                    first_plural = objs.len() > 1;
                }
                units.push(words);
                for &o in objs {
                    let fid = self.home[&o].1;
                    ids.push(fid);
                    mentioned.push(o);
                    specs.push(SpanSpec {
                        fact_ids: vec![fid],
                        relation: RelationKind::In,
                        trajector: Anchor("intro", i),
                        indicator: Anchor(if kind == "BlockHas" { "has" } else { "in" }, 0),
                        landmark: Anchor("block", 0),
                    });
                }
            }
            let mut pieces = HashMap::new();
            pieces.insert("block", Piece::whole(vec!["block".into(), name.clone()]));
            pieces.insert("intro", Piece::list(units));
            pieces.insert("be", Piece::word(if first_plural { "are" } else { "is" }));
            let has = self
                .g
                .pick("has", &mut self.rng)
                .map(|p| p.to_vec())
                .unwrap_or_else(|| vec!["has".into()]);
            pieces.insert("has", Piece::whole(has));
            pieces.insert(
                "in",
                Piece::whole(mention::relation_words(
                    self.g,
                    RelationKind::In,
                    &mut self.rng,
                )),
            );
            self.emit(kind, &pieces, specs, ids, vec![], mentioned)?;
        }

        tasks.shuffle(&mut self.rng);
        self.write_tasks(tasks)
    }

    /// Register a new object and return its introducing descriptor.
    fn introduce(
        &mut self,
        o: ObjectId,
        block: Option<BlockId>,
    ) -> Result<EntityDescriptor, RealizeError> {
        let attrs = self.attrs(o)?;
        let ordinal = if self.multi.contains(&attrs) {
            let n = self.ordinal_next.entry(attrs).or_insert(0);
            *n += 1;
            Some(*n)
        } else {
            None
        };
        let obj = StoryObject {
            id: o,
            attrs,
            block: self.home.get(&o).map(|h| h.0).or(block),
            ordinal,
        };
        let d = mention::full_descriptor(&obj, Determiner::A);
        self.pending.push(obj);
        Ok(d)
    }

    fn write_tasks(&mut self, tasks: Vec<Task>) -> Result<(), RealizeError> {
        for t in tasks {
            match t {
                Task::Rel(item) => self.rel_sentence(item)?,
                Task::Edge(item) => self.edge_sentence(item)?,
            }
        }
        Ok(())
    }

    fn hypernym(&mut self) -> Hypernym {
        *Hypernym::ALL.choose(&mut self.rng).unwrap()
    }

    /// Definite mention of a known object, unique among objects introduced
    /// before this sentence.
    fn definite(&mut self, o: ObjectId) -> Result<EntityDescriptor, RealizeError> {
        let target = self
            .table
            .iter()
            .find(|x| x.id == o)
            .cloned()
            .ok_or_else(|| {
                RealizeError::Unreferable(format!("object {o} used before introduction"))
            })?;
        if self.rng.random_bool(self.cfg.nested_mention_probability) {
            let rels: Vec<(RelationKind, ObjectId)> = self
                .stated
                .outgoing(EntityRef::Object(o))
                .into_iter()
                .filter_map(|(r, e)| e.as_object().map(|y| (r, y)))
                .filter(|(r, _)| r.converse().is_some())
                .collect();
            let h = self.hypernym();
            let table = self.table.clone();
            let stated = self.stated.clone();
            let options = mention::unique_nested(&target, &table, &stated, h, &rels, |y| {
                let inner = table.iter().find(|x| x.id == y)?;
                let full = mention::full_descriptor(inner, Determiner::The);
                mention::is_unique(&full, y, &table, &stated).then_some(full)
            });
            if let Some(d) = options.choose(&mut self.rng) {
                return Ok(d.clone());
            }
        }
        let full = mention::full_descriptor(&target, Determiner::The);
        if self.rng.random_bool(self.cfg.full_name_probability)
            && mention::is_unique(&full, o, &self.table, &self.stated)
        {
            return Ok(full);
        }
        let h = if self.rng.random_bool(self.cfg.hypernym_probability) {
            self.hypernym()
        } else {
            Hypernym::Object
        };
        let mut options = mention::unique_plain(&target, &self.table, &self.stated, h);
        if !self.rng.random_bool(self.cfg.hypernym_probability) {
            let with_shape: Vec<_> = options
                .iter()
                .filter(|d| d.shape.is_some())
                .cloned()
                .collect();
            if !with_shape.is_empty() {
                options = with_shape;
            }
        }
        options
            .choose(&mut self.rng)
            .cloned()
            .ok_or_else(|| RealizeError::Unreferable(format!("object {o}")))
    }

    /// Words for a subject or object mention, introducing the object if
    /// needed. Returns the words and whether it is a new introduction.
    fn mention(
        &mut self,
        o: ObjectId,
        subject: bool,
        fresh: &mut Vec<usize>,
    ) -> Result<Vec<String>, RealizeError> {
        if self.introduced(o) {
            if subject
                && self.prev_objects == [o]
                && self.rng.random_bool(self.cfg.pronoun_probability)
            {
                return Ok(vec!["it".into()]);
            }
            let d = self.definite(o)?;
            return Ok(mention::render(self.g, &d, false, &mut self.rng));
        }
        if self.pending.iter().any(|p| p.id == o) {
            return Err(RealizeError::Unreferable(format!(
                "object {o} mentioned twice while new"
            )));
        }
        let section_block = self.current_block;
        if let Some(&(b, fid)) = self.home.get(&o) {
            if section_block != Some(b) {
                return Err(RealizeError::Unreferable(format!(
                    "object {o} would be introduced outside its block"
                )));
            }
            fresh.push(fid);
        } else if section_block.is_some() {
            return Err(RealizeError::Unreferable(format!(
                "object {o} has no block but would be introduced inside one"
            )));
        }
        let d = self.introduce(o, None)?;
        let one = self.rng.random_bool(self.cfg.one_probability);
        Ok(mention::render(self.g, &d, one, &mut self.rng))
    }

    fn rel_sentence(&mut self, item: RelItem) -> Result<(), RealizeError> {
        let subject_new = !self.introduced(item.subject);
        let w_plain = self.g.kind_weight("RelSent");
        let w_front = if subject_new {
            self.g.kind_weight("RelFronted")
        } else {
            0
        };
        let kind = if self.rng.random_range(0..w_plain + w_front) < w_plain {
            "RelSent"
        } else {
            "RelFronted"
        };
        let mut fresh = Vec::new();
        let subj = self.mention(item.subject, kind == "RelSent", &mut fresh)?;
        let mut objs = Vec::new();
        for &o in &item.objects {
            objs.push(self.mention(o, false, &mut fresh)?);
        }
        let rels: Vec<Vec<String>> = item
            .relations
            .iter()
            .map(|&r| mention::relation_words(self.g, r, &mut self.rng))
            .collect();

        let mut pieces = HashMap::new();
        pieces.insert("subj", Piece::whole(subj));
        pieces.insert("rels", Piece::list(rels));
        pieces.insert("objs", Piece::list(objs));
        pieces.insert("be", Piece::word("is"));
        let mut specs = Vec::new();
        let mut ids = Vec::new();
        let mut k = 0;
        for (ri, &r) in item.relations.iter().enumerate() {
            for oi in 0..item.objects.len() {
                let fids = item.facts[k].clone();
                k += 1;
                ids.extend(fids.iter().copied());
                specs.push(SpanSpec {
                    fact_ids: fids,
                    relation: r,
                    trajector: Anchor("subj", 0),
                    indicator: Anchor("rels", ri),
                    landmark: Anchor("objs", oi),
                });
            }
        }
        let mut mentioned = vec![item.subject];
        mentioned.extend(item.objects.iter().copied());
        ids.extend(fresh.iter().copied());
        self.emit(kind, &pieces, specs, ids, fresh, mentioned)
    }

    fn edge_sentence(&mut self, item: EdgeItem) -> Result<(), RealizeError> {
        let mut fresh = Vec::new();
        let subj = self.mention(item.object, true, &mut fresh)?;
        let RelationKind::TouchingEdge(edge) = item.relation else {
            unreachable!("edge items carry edge relations")
        };
        let rel = self
            .g
            .pick(&edge_key(edge), &mut self.rng)
            .map(|p| p.to_vec())
            .ok_or_else(|| RealizeError::MissingProduction(edge_key(edge)))?;
        let landmark = if self.current_block == Some(item.block) {
            vec!["this".to_string(), "block".to_string()]
        } else {
            vec!["block".to_string(), self.block_name(item.block)?]
        };
        let mut pieces = HashMap::new();
        pieces.insert("subj", Piece::whole(subj));
        pieces.insert("rel", Piece::whole(rel));
        pieces.insert("edgeblock", Piece::whole(landmark));
        let specs = vec![SpanSpec {
            fact_ids: item.facts.clone(),
            relation: item.relation,
            trajector: Anchor("subj", 0),
            indicator: Anchor("rel", 0),
            landmark: Anchor("edgeblock", 0),
        }];
        let mut ids = item.facts.clone();
        ids.extend(fresh.iter().copied());
        self.emit("EdgeSent", &pieces, specs, ids, fresh, vec![item.object])
    }

    fn emit(
        &mut self,
        kind: &str,
        pieces: &HashMap<&str, Piece>,
        specs: Vec<SpanSpec>,
        mut fact_ids: Vec<usize>,
        mut implied: Vec<usize>,
        mentioned: Vec<ObjectId>,
    ) -> Result<(), RealizeError> {
        let a = assemble(self.g, kind, pieces, &mut self.rng)?;
        let mut spans = Vec::new();
        for s in specs {
            for &fid in &s.fact_ids {
                spans.push(RelationSpan {
                    fact_id: fid,
                    relation: s.relation,
                    trajector: a.span(s.trajector.0, pieces, s.trajector.1),
                    indicator: a.span(s.indicator.0, pieces, s.indicator.1),
                    landmark: a.span(s.landmark.0, pieces, s.landmark.1),
                });
            }
        }
        fact_ids.sort_unstable();
        fact_ids.dedup();
        implied.sort_unstable();
        implied.dedup();
        self.sentences.push(Sentence {
            text: a.text,
            fact_ids: fact_ids.clone(),
            spans,
            implied,
        });
        for fid in fact_ids {
            self.stated.add(&self.facts[fid]);
        }
        let pending = std::mem::take(&mut self.pending);
        self.table.extend(pending);
        self.prev_objects = mentioned;
        self.prev_objects.dedup();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{
        extract_geometric_facts, sample_scene, select_story_facts, SamplerConfig,
    };

    fn story(seed: u64) -> Story {
        let cfg = SamplerConfig {
            seed,
            ..SamplerConfig::default()
        };
        let scene = sample_scene(&cfg).unwrap();
        let facts = select_story_facts(&extract_geometric_facts(&scene, &cfg), &cfg);
        realize_story(
            &facts,
            &scene,
            &Grammar::default_grammar(),
            &RealizerConfig::default(),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn covers_every_fact() {
        for seed in 0..200 {
            let s = story(seed);
            let covered: BTreeSet<usize> = s
                .sentences
                .iter()
                .flat_map(|x| x.fact_ids.iter().copied())
                .collect();
            assert_eq!(covered.len(), s.facts.len(), "seed {seed}");
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(story(7).text(), story(7).text());
    }

    #[test]
    fn spans_point_into_sentence() {
        for seed in 0..50 {
            for sentence in story(seed).sentences {
                for sp in &sentence.spans {
                    for span in [sp.trajector, sp.indicator, sp.landmark] {
                        assert!(span.slice(&sentence.text).is_some_and(|t| !t.is_empty()));
                    }
                }
            }
        }
    }

    #[test]
    #[ignore]
    fn print_samples() {
        for seed in 0..5 {
            println!("{}\n", story(seed).text());
        }
    }
}
