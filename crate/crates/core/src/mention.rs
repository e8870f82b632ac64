//! Mentions of objects: matching descriptors against entities, finding
//! descriptors that single out an object, and rendering them as words.
//!
//! Stories and questions share this code. A story resolves mentions against
//! the objects introduced so far and the facts stated so far; questions
//! resolve against the whole story and its closure. Both sides of the
//! generator/parser pair call the same functions, which is what keeps their
//! readings aligned.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::algebra::EntailedSet;
use crate::grammar::{hypernym_name, rel_key, Grammar};
use crate::model::{
    Attribute, Determiner, EntityDescriptor, EntityRef, Fact, Hypernym, Number, ObjectId,
    RelationKind, StoryObject,
};
use crate::text::starts_with_vowel_sound;

/// Source of positive relations used to evaluate nested clauses.
pub trait RelationOracle {
    fn holds(&self, a: EntityRef, r: RelationKind, b: EntityRef) -> bool;
}

impl RelationOracle for EntailedSet {
    fn holds(&self, a: EntityRef, r: RelationKind, b: EntityRef) -> bool {
        EntailedSet::holds(self, a, r, b)
    }
}

/// Facts stated so far, readable in both directions.
#[derive(Debug, Clone, Default)]
pub struct StatedFacts {
    set: HashSet<(EntityRef, RelationKind, EntityRef)>,
}

impl StatedFacts {
    pub fn add(&mut self, f: &Fact) {
        if !f.is_positive() {
            return;
        }
        self.set.insert((f.subject, f.relation, f.object));
        if let Some(c) = f.converse() {
            self.set.insert((c.subject, c.relation, c.object));
        }
    }

    /// Relations stated from `a` to some other entity.
    pub fn outgoing(&self, a: EntityRef) -> Vec<(RelationKind, EntityRef)> {
        let mut v: Vec<_> = self
            .set
            .iter()
            .filter(|(s, _, _)| *s == a)
            .map(|&(_, r, o)| (r, o))
            .collect();
        v.sort();
        v
    }
}

impl RelationOracle for StatedFacts {
    fn holds(&self, a: EntityRef, r: RelationKind, b: EntityRef) -> bool {
        self.set.contains(&(a, r, b))
    }
}

/// Objects in `universe` the descriptor applies to, in universe order.
pub fn matches(
    desc: &EntityDescriptor,
    universe: &[StoryObject],
    oracle: &dyn RelationOracle,
) -> Vec<ObjectId> {
    let inner = desc
        .nested
        .as_ref()
        .map(|n| (n.relation, matches(&n.inner, universe, oracle)));
    universe
        .iter()
        .filter(|o| desc.matches_attributes(o))
        .filter(|o| match &inner {
            None => true,
            Some((r, ys)) => ys.iter().any(|&y| {
                y != o.id && oracle.holds(EntityRef::Object(o.id), *r, EntityRef::Object(y))
            }),
        })
        .map(|o| o.id)
        .collect()
}

pub fn is_unique(
    desc: &EntityDescriptor,
    target: ObjectId,
    universe: &[StoryObject],
    oracle: &dyn RelationOracle,
) -> bool {
    matches(desc, universe, oracle) == [target]
}

fn constraint_count(d: &EntityDescriptor) -> usize {
    d.size.is_some() as usize
        + d.color.is_some() as usize
        + d.shape.is_some() as usize
        + d.ordinal.is_some() as usize
}

/// Every attribute-only descriptor built from the target's own attributes,
/// fewest constraints first. Descriptors without a shape use `hypernym`.
pub fn plain_descriptors(
    target: &StoryObject,
    det: Determiner,
    hypernym: Hypernym,
) -> Vec<EntityDescriptor> {
    let mut out = Vec::new();
    let a = target.attrs;
    for mask in 0..16u8 {
        let size = mask & 1 != 0;
        let color = mask & 2 != 0;
        let shape = mask & 4 != 0;
        let ordinal = mask & 8 != 0;
        // "the object number two" would drop the name the number belongs to
        if (size && a.size.is_none())
            || (color && a.color.is_none())
            || (ordinal && (target.ordinal.is_none() || !shape))
        {
            continue;
        }
        let mut d = EntityDescriptor::from_attrs(&a, size, color, shape, det);
        if !shape {
            d.hypernym = Some(hypernym);
        }
        if ordinal {
            d.ordinal = target.ordinal;
        }
        out.push(d);
    }
    out.sort_by_key(constraint_count);
    out
}

/// The descriptor that spells out the object's full story name.
pub fn full_descriptor(target: &StoryObject, det: Determiner) -> EntityDescriptor {
    let mut d = EntityDescriptor::from_attrs(&target.attrs, true, true, true, det);
    d.ordinal = target.ordinal;
    d
}

/// Attribute-only descriptors that pick out exactly the target.
pub fn unique_plain(
    target: &StoryObject,
    universe: &[StoryObject],
    oracle: &dyn RelationOracle,
    hypernym: Hypernym,
) -> Vec<EntityDescriptor> {
    plain_descriptors(target, Determiner::The, hypernym)
        .into_iter()
        .filter(|d| is_unique(d, target.id, universe, oracle))
        .collect()
}

/// Descriptors of the form "the X which is R the Y" that pick out exactly the
/// target. `inner_of` supplies the description of each anchor.
pub fn unique_nested(
    target: &StoryObject,
    universe: &[StoryObject],
    oracle: &dyn RelationOracle,
    hypernym: Hypernym,
    relations: &[(RelationKind, ObjectId)],
    mut inner_of: impl FnMut(ObjectId) -> Option<EntityDescriptor>,
) -> Vec<EntityDescriptor> {
    let mut out = Vec::new();
    for &(r, y) in relations {
        if y == target.id {
            continue;
        }
        let Some(inner) = inner_of(y) else { continue };
        for outer in plain_descriptors(target, Determiner::The, hypernym) {
            // the ordinal alone already names a group member; do not hide it
            if outer.ordinal.is_some() {
                continue;
            }
            let d = outer.with_nested(r, inner.clone());
            if is_unique(&d, target.id, universe, oracle) {
                out.push(d);
                break;
            }
        }
    }
    out
}

/// Words used for an entity's noun: the shape or a hypernym.
fn noun_words(g: &Grammar, d: &EntityDescriptor) -> Vec<String> {
    let plural = d.number == Number::Plural;
    let key = match (d.shape, d.hypernym) {
        (Some(s), _) => format!("shape.{}", s.name()),
        (None, Some(h)) => format!("hypernym.{}", hypernym_name(h)),
        (None, None) => "hypernym.object".to_string(),
    };
    let key = if plural { format!("{key}.plural") } else { key };
    lexicon(g, &key)
}

fn lexicon(g: &Grammar, key: &str) -> Vec<String> {
    g.canonical(key)
        .map(|p| p.to_vec())
        .unwrap_or_else(|| vec![key.to_string()])
}

pub fn count_word(g: &Grammar, n: u32) -> Vec<String> {
    lexicon(g, &format!("count.{n}"))
}

/// Attribute words and noun, without determiner or clauses.
pub fn head_words(g: &Grammar, d: &EntityDescriptor) -> Vec<String> {
    let mut w = Vec::new();
    if let Some(s) = d.size {
        w.extend(lexicon(g, &format!("size.{}", s.name())));
    }
    if let Some(c) = d.color {
        w.extend(lexicon(g, &format!("color.{}", c.name())));
    }
    w.extend(noun_words(g, d));
    w
}

/// Indefinite article for the following word.
pub fn article(next: &str) -> &'static str {
    if starts_with_vowel_sound(next) {
        "an"
    } else {
        "a"
    }
}

/// Render a descriptor. `one` replaces the indefinite article with "one".
pub fn render<R: Rng + ?Sized>(
    g: &Grammar,
    d: &EntityDescriptor,
    one: bool,
    rng: &mut R,
) -> Vec<String> {
    let head = head_words(g, d);
    let mut w: Vec<String> = Vec::new();
    match d.determiner {
        Determiner::The => w.push("the".into()),
        Determiner::A if one => w.push("one".into()),
        Determiner::A => w.push(article(&head[0]).into()),
        Determiner::Any => w.push("any".into()),
        Determiner::All => w.push("all".into()),
        Determiner::Bare => {}
    }
    w.extend(head);
    if let Some(n) = d.ordinal {
        w.push("number".into());
        w.extend(count_word(g, n));
    }
    if let Some(nested) = &d.nested {
        w.push((*["which", "that"].choose(rng).unwrap()).into());
        w.push(
            if d.number == Number::Plural {
                "are"
            } else {
                "is"
            }
            .into(),
        );
        w.extend(relation_words(g, nested.relation, rng));
        w.extend(render(g, &nested.inner, false, rng));
    }
    w
}

pub fn relation_words<R: Rng + ?Sized>(g: &Grammar, r: RelationKind, rng: &mut R) -> Vec<String> {
    g.pick(&rel_key(r), rng)
        .map(|p| p.to_vec())
        .unwrap_or_else(|| vec![r.lexicon_key()])
}

/// "two medium yellow squares"
pub fn render_group(g: &Grammar, attrs: &Attribute, count: u32) -> Vec<String> {
    let mut d = EntityDescriptor::from_attrs(attrs, true, true, true, Determiner::Bare);
    d.number = Number::Plural;
    let mut w = count_word(g, count);
    w.extend(head_words(g, &d));
    w
}
