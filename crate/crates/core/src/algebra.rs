//! Entailment closure over spatial facts and three-valued relation queries.
//!
//! The closure is the least fixpoint of five rule families applied to the
//! stated facts:
//!
//! * transitivity for `Left`, `Right`, `Above`, `Below`;
//! * converse and symmetry (`Left(a,b)` gives `Right(b,a)`, `NearTo(a,b)`
//!   gives `NearTo(b,a)`);
//! * inclusion lifting: `In(o,A) ∧ R(A,B) ∧ In(o',B) ⇒ R(o,o')` for a
//!   directional `R` between blocks;
//! * exclusion: `In(o,A)` gives `not In(o,X)` for every other block `X`;
//! * optionally `Touching(a,b) ⇒ NearTo(a,b)`.
//!
//! A relation holds between a pair iff some derivation produces it; for
//! directional relations that means a path on which the same relation holds
//! on every edge. Mixed paths (left then above) entail nothing.
//!
//! Evaluation is semi-naive: each round only fires rules with at least one
//! premise derived in the previous round. The round in which a fact first
//! appears is its depth, i.e. the height of its shallowest derivation tree
//! (stated facts have depth 0).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{BitAnd, BitOr, Not};

use serde::{Deserialize, Serialize};

use crate::error::AlgebraError;
use crate::model::{EntityRef, Fact, Polarity, RelationKind};

/// Set of relation kinds stored as a bitmask over [`RelationKind::index`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct RelationSet(u16);

impl RelationSet {
    pub const EMPTY: RelationSet = RelationSet(0);

    pub fn contains(self, r: RelationKind) -> bool {
        self.0 & (1 << r.index()) != 0
    }

    pub fn insert(&mut self, r: RelationKind) -> bool {
        let had = self.contains(r);
        self.0 |= 1 << r.index();
        !had
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = RelationKind> {
        RelationKind::ALL
            .into_iter()
            .filter(move |r| self.contains(*r))
    }

    /// Some member excludes `r`.
    pub fn excludes(self, r: RelationKind) -> Option<RelationKind> {
        self.iter().find(|s| s.excludes(r))
    }
}

impl FromIterator<RelationKind> for RelationSet {
    fn from_iter<I: IntoIterator<Item = RelationKind>>(iter: I) -> Self {
        let mut s = RelationSet::EMPTY;
        for r in iter {
            s.insert(r);
        }
        s
    }
}

/// Kleene strong three-valued truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThreeValued {
    True,
    False,
    Unknown,
}

impl ThreeValued {
    pub fn and(self, other: Self) -> Self {
        use ThreeValued::*;
        match (self, other) {
            (False, _) | (_, False) => False,
            (True, True) => True,
            _ => Unknown,
        }
    }

    pub fn or(self, other: Self) -> Self {
        use ThreeValued::*;
        match (self, other) {
            (True, _) | (_, True) => True,
            (False, False) => False,
            _ => Unknown,
        }
    }

    /// Existential fold; `False` over an empty range.
    pub fn any(values: impl IntoIterator<Item = Self>) -> Self {
        values.into_iter().fold(ThreeValued::False, Self::or)
    }

    /// Universal fold; `True` over an empty range.
    pub fn all(values: impl IntoIterator<Item = Self>) -> Self {
        values.into_iter().fold(ThreeValued::True, Self::and)
    }
}

impl Not for ThreeValued {
    type Output = Self;
    fn not(self) -> Self {
        match self {
            ThreeValued::True => ThreeValued::False,
            ThreeValued::False => ThreeValued::True,
            ThreeValued::Unknown => ThreeValued::Unknown,
        }
    }
}

impl BitAnd for ThreeValued {
    type Output = Self;
    fn bitand(self, rhs: Self) -> Self {
        self.and(rhs)
    }
}

impl BitOr for ThreeValued {
    type Output = Self;
    fn bitor(self, rhs: Self) -> Self {
        self.or(rhs)
    }
}

impl fmt::Display for ThreeValued {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ThreeValued::True => "true",
            ThreeValued::False => "false",
            ThreeValued::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClosureConfig {
    /// `Touching(a,b)` entails `NearTo(a,b)`.
    pub touching_implies_near: bool,
}

impl Default for ClosureConfig {
    fn default() -> Self {
        Self {
            touching_implies_near: true,
        }
    }
}

/// Closure output: relations per ordered pair plus exclusion facts, each with
/// its derivation depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntailedSet {
    entities: Vec<EntityRef>,
    pairs: BTreeMap<(EntityRef, EntityRef), RelationSet>,
    excluded: BTreeSet<(EntityRef, EntityRef)>,
    depth: BTreeMap<Fact, u32>,
}

impl EntailedSet {
    /// Entities mentioned by the stated facts, sorted.
    pub fn entities(&self) -> &[EntityRef] {
        &self.entities
    }

    pub fn contains_entity(&self, e: EntityRef) -> bool {
        self.entities.binary_search(&e).is_ok()
    }

    pub fn relations(&self, a: EntityRef, b: EntityRef) -> RelationSet {
        self.pairs.get(&(a, b)).copied().unwrap_or_default()
    }

    pub fn holds(&self, a: EntityRef, r: RelationKind, b: EntityRef) -> bool {
        self.relations(a, b).contains(r)
    }

    pub fn is_excluded(&self, object: EntityRef, block: EntityRef) -> bool {
        self.excluded.contains(&(object, block))
    }

    pub fn depth(&self, fact: &Fact) -> Option<u32> {
        self.depth.get(fact).copied()
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.depth.contains_key(fact)
    }

    /// All entailed facts with their depths, in a stable order.
    pub fn facts(&self) -> impl Iterator<Item = (&Fact, u32)> {
        self.depth.iter().map(|(f, d)| (f, *d))
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }

    /// Pairs with at least one positive relation.
    pub fn pairs(&self) -> impl Iterator<Item = (EntityRef, EntityRef, RelationSet)> + '_ {
        self.pairs.iter().map(|(&(a, b), &s)| (a, b, s))
    }
}

/// Closure with the default configuration.
pub fn closure(stated: &[Fact]) -> Result<EntailedSet, AlgebraError> {
    closure_with(stated, &ClosureConfig::default())
}

type Key = (u16, u8, u16, bool);

struct Engine {
    n: usize,
    pos: Vec<RelationSet>,
    neg_in: Vec<bool>,
    is_block: Vec<bool>,
    blocks: Vec<usize>,
    depth: HashMap<Key, u32>,
}

impl Engine {
    fn rel_at(&self, a: usize, b: usize) -> RelationSet {
        self.pos[a * self.n + b]
    }

    fn known(&self, k: &Key) -> bool {
        let (a, r, b, neg) = *k;
        let (a, b) = (a as usize, b as usize);
        if neg {
            self.neg_in[a * self.n + b]
        } else {
            self.pos[a * self.n + b].contains(RelationKind::ALL[r as usize])
        }
    }

    fn add(&mut self, k: Key, depth: u32) {
        let (a, r, b, neg) = k;
        let (a, b) = (a as usize, b as usize);
        if neg {
            self.neg_in[a * self.n + b] = true;
        } else {
            self.pos[a * self.n + b].insert(RelationKind::ALL[r as usize]);
        }
        self.depth.entry(k).or_insert(depth);
    }

    fn members(&self, block: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&x| self.rel_at(x, block).contains(RelationKind::In))
    }

    /// Every conclusion with `k` as one of its premises and all other
    /// premises already known.
    fn fire(&self, k: Key, cfg: &ClosureConfig, out: &mut Vec<Key>) {
        let (a, ri, b, neg) = k;
        if neg {
            return;
        }
        let r = RelationKind::ALL[ri as usize];
        let (au, bu) = (a as usize, b as usize);
        let key =
            |s: usize, rel: RelationKind, o: usize| (s as u16, rel.index() as u8, o as u16, false);

        if let Some(c) = r.converse() {
            out.push(key(bu, c, au));
        }
        if r == RelationKind::Touching && cfg.touching_implies_near {
            out.push(key(au, RelationKind::NearTo, bu));
        }
        if r == RelationKind::In && self.is_block[bu] {
            for &x in &self.blocks {
                if x != bu {
                    out.push((a, RelationKind::In.index() as u8, x as u16, true));
                }
            }
            // In(a,B) as the first premise of the lifting rule
            for &other in &self.blocks {
                for lr in self.rel_at(bu, other).iter().filter(|r| r.is_directional()) {
                    for y in self.members(other) {
                        out.push(key(au, lr, y));
                    }
                }
            }
            // ... and as the third premise
            for &other in &self.blocks {
                for lr in self.rel_at(other, bu).iter().filter(|r| r.is_directional()) {
                    for x in self.members(other) {
                        out.push(key(x, lr, au));
                    }
                }
            }
        }
        if r.is_directional() && self.is_block[au] && self.is_block[bu] {
            for x in self.members(au) {
                for y in self.members(bu) {
                    out.push(key(x, r, y));
                }
            }
        }
        if r.is_transitive() {
            for c in 0..self.n {
                if self.rel_at(bu, c).contains(r) {
                    out.push(key(au, r, c));
                }
                if self.rel_at(c, au).contains(r) {
                    out.push(key(c, r, bu));
                }
            }
        }
    }
}

pub fn closure_with(stated: &[Fact], cfg: &ClosureConfig) -> Result<EntailedSet, AlgebraError> {
    for f in stated {
        if let Some(reason) = f.check() {
            return Err(AlgebraError::InvalidFact { fact: *f, reason });
        }
        if f.relation == RelationKind::In && !f.object.is_block() {
            return Err(AlgebraError::InvalidFact {
                fact: *f,
                reason: "In must name a block as its object".into(),
            });
        }
    }
    check_stated(stated)?;

    let entities: Vec<EntityRef> = stated
        .iter()
        .flat_map(|f| [f.subject, f.object])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: HashMap<EntityRef, usize> =
        entities.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let n = entities.len();
    let is_block: Vec<bool> = entities.iter().map(|e| e.is_block()).collect();
    let blocks: Vec<usize> = (0..n).filter(|&i| is_block[i]).collect();

    let mut engine = Engine {
        n,
        pos: vec![RelationSet::EMPTY; n * n],
        neg_in: vec![false; n * n],
        is_block,
        blocks,
        depth: HashMap::new(),
    };

    let to_key = |f: &Fact| -> Key {
        (
            index[&f.subject] as u16,
            f.relation.index() as u8,
            index[&f.object] as u16,
            f.polarity == Polarity::Negative,
        )
    };

    let mut delta: Vec<Key> = Vec::new();
    for f in stated {
        let k = to_key(f);
        if !engine.known(&k) {
            engine.add(k, 0);
            delta.push(k);
        }
    }

    let mut round = 0u32;
    let mut produced = Vec::new();
    while !delta.is_empty() {
        round += 1;
        let mut pending: BTreeSet<Key> = BTreeSet::new();
        for &k in &delta {
            produced.clear();
            engine.fire(k, cfg, &mut produced);
            for &c in &produced {
                if c.0 == c.2 {
                    let fact = key_fact(&entities, c);
                    let cause = key_fact(&entities, k);
                    return Err(AlgebraError::InconsistentFacts {
                        first: cause,
                        second: fact,
                    });
                }
                if !engine.known(&c) {
                    pending.insert(c);
                }
            }
        }
        for &k in &pending {
            engine.add(k, round);
        }
        delta = pending.into_iter().collect();
    }

    // mutual exclusion and membership conflicts
    for a in 0..n {
        for b in 0..n {
            let set = engine.rel_at(a, b);
            for r in set.iter() {
                if let Some(s) = set.excludes(r) {
                    return Err(AlgebraError::InconsistentFacts {
                        first: Fact::new(entities[a], r, entities[b]),
                        second: Fact::new(entities[a], s, entities[b]),
                    });
                }
            }
            if set.contains(RelationKind::In) && engine.neg_in[a * n + b] {
                return Err(AlgebraError::InconsistentFacts {
                    first: Fact::new(entities[a], RelationKind::In, entities[b]),
                    second: Fact::not_in(entities[a], entities[b]),
                });
            }
        }
    }

    let mut pairs = BTreeMap::new();
    let mut excluded = BTreeSet::new();
    for a in 0..n {
        for b in 0..n {
            let set = engine.rel_at(a, b);
            if !set.is_empty() {
                pairs.insert((entities[a], entities[b]), set);
            }
            if engine.neg_in[a * n + b] {
                excluded.insert((entities[a], entities[b]));
            }
        }
    }
    let depth = engine
        .depth
        .iter()
        .map(|(k, d)| (key_fact(&entities, *k), *d))
        .collect();

    Ok(EntailedSet {
        entities,
        pairs,
        excluded,
        depth,
    })
}

fn key_fact(entities: &[EntityRef], k: Key) -> Fact {
    let (a, r, b, neg) = k;
    Fact {
        subject: entities[a as usize],
        relation: RelationKind::ALL[r as usize],
        object: entities[b as usize],
        polarity: if neg {
            Polarity::Negative
        } else {
            Polarity::Positive
        },
    }
}

/// Reject stated facts that directly contradict each other.
fn check_stated(stated: &[Fact]) -> Result<(), AlgebraError> {
    let mut by_pair: BTreeMap<(EntityRef, EntityRef), Vec<&Fact>> = BTreeMap::new();
    for f in stated {
        // normalise to the subject-first orientation so Left(a,b) meets Left(b,a)
        by_pair.entry((f.subject, f.object)).or_default().push(f);
    }
    for f in stated {
        if !f.is_positive() {
            continue;
        }
        let Some(conv) = f.converse() else { continue };
        // a stated fact whose converse view conflicts with another stated fact
        if let Some(list) = by_pair.get(&(conv.subject, conv.object)) {
            for g in list {
                if g.is_positive() && g.relation.excludes(conv.relation) {
                    return Err(AlgebraError::InconsistentFacts {
                        first: *f,
                        second: **g,
                    });
                }
            }
        }
    }
    for list in by_pair.values() {
        for (i, f) in list.iter().enumerate() {
            for g in &list[i + 1..] {
                let clash = (f.is_positive() && g.is_positive() && f.relation.excludes(g.relation))
                    || (f.relation == RelationKind::In
                        && g.relation == RelationKind::In
                        && f.polarity != g.polarity);
                if clash {
                    return Err(AlgebraError::InconsistentFacts {
                        first: **f,
                        second: **g,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Three-valued status of `r(a,b)`: true when entailed, false when an
/// excluded relation is entailed, unknown otherwise.
pub fn relation_status(
    a: EntityRef,
    b: EntityRef,
    r: RelationKind,
    e: &EntailedSet,
) -> ThreeValued {
    let set = e.relations(a, b);
    if r == RelationKind::In {
        if set.contains(RelationKind::In) {
            return ThreeValued::True;
        }
        if e.is_excluded(a, b) {
            return ThreeValued::False;
        }
        return ThreeValued::Unknown;
    }
    if set.contains(r) {
        ThreeValued::True
    } else if set.excludes(r).is_some() {
        ThreeValued::False
    } else {
        ThreeValued::Unknown
    }
}

/// Exactly the entailed relations from `a` to `b`; empty means nothing is
/// known.
pub fn all_relations(a: EntityRef, b: EntityRef, e: &EntailedSet) -> RelationSet {
    e.relations(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RelationKind::*;

    fn o(i: u32) -> EntityRef {
        EntityRef::object(i)
    }

    fn b(i: u32) -> EntityRef {
        EntityRef::block(i)
    }

    fn f(a: EntityRef, r: RelationKind, c: EntityRef) -> Fact {
        Fact::new(a, r, c)
    }

    #[test]
    fn transitivity_chain_has_depth_one() {
        // circle left of triangle, triangle left of square
        let e = closure(&[f(o(0), Left, o(1)), f(o(1), Left, o(2))]).unwrap();
        let derived = f(o(0), Left, o(2));
        assert!(e.contains(&derived));
        assert_eq!(e.depth(&derived), Some(1));
        assert_eq!(e.depth(&f(o(0), Left, o(1))), Some(0));
    }

    #[test]
    fn converse_of_stated_fact() {
        let e = closure(&[f(o(0), Above, o(1))]).unwrap();
        assert!(e.holds(o(1), Below, o(0)));
    }

    #[test]
    fn mixed_directions_do_not_compose() {
        // blue circle above big triangle; square left of big triangle
        let circle = o(0);
        let triangle = o(1);
        let square = o(2);
        let e = closure(&[f(circle, Above, triangle), f(square, Left, triangle)]).unwrap();
        assert!(!e.holds(square, Left, circle));
        assert_eq!(
            relation_status(square, circle, Left, &e),
            ThreeValued::Unknown
        );
        assert!(all_relations(square, circle, &e).is_empty());
    }

    #[test]
    fn status_through_converse_and_exclusion() {
        let e = closure(&[f(o(0), Left, o(1))]).unwrap();
        assert_eq!(relation_status(o(1), o(0), Right, &e), ThreeValued::True);
        assert_eq!(relation_status(o(0), o(1), Right, &e), ThreeValued::False);
        assert_eq!(relation_status(o(0), o(1), Above, &e), ThreeValued::Unknown);
    }

    #[test]
    fn contradictory_stated_facts_are_rejected() {
        let err = closure(&[f(o(0), Left, o(1)), f(o(0), Right, o(1))]).unwrap_err();
        assert!(matches!(err, AlgebraError::InconsistentFacts { .. }));
        let err = closure(&[f(o(0), Left, o(1)), f(o(1), Left, o(0))]).unwrap_err();
        assert!(matches!(err, AlgebraError::InconsistentFacts { .. }));
    }

    #[test]
    fn cycles_are_inconsistent() {
        let err = closure(&[
            f(o(0), Left, o(1)),
            f(o(1), Left, o(2)),
            f(o(2), Left, o(0)),
        ])
        .unwrap_err();
        assert!(matches!(err, AlgebraError::InconsistentFacts { .. }));
    }

    #[test]
    fn touching_implies_near_is_configurable() {
        let stated = [f(o(0), Touching, o(1))];
        let on = closure_with(
            &stated,
            &ClosureConfig {
                touching_implies_near: true,
            },
        )
        .unwrap();
        let off = closure_with(
            &stated,
            &ClosureConfig {
                touching_implies_near: false,
            },
        )
        .unwrap();
        let on_set: Vec<_> = all_relations(o(0), o(1), &on).iter().collect();
        let off_set: Vec<_> = all_relations(o(0), o(1), &off).iter().collect();
        assert_eq!(on_set, vec![NearTo, Touching]);
        assert_eq!(off_set, vec![Touching]);
        assert!(on.holds(o(1), Touching, o(0)));
        assert!(on.holds(o(1), NearTo, o(0)));
    }

    #[test]
    fn near_is_not_transitive() {
        let e = closure(&[f(o(0), NearTo, o(1)), f(o(1), NearTo, o(2))]).unwrap();
        assert!(!e.holds(o(0), NearTo, o(2)));
    }

    #[test]
    fn inclusion_lifts_block_relations() {
        let stated = [f(o(0), In, b(0)), f(o(1), In, b(1)), f(b(0), Above, b(1))];
        let e = closure(&stated).unwrap();
        assert!(e.holds(o(0), Above, o(1)));
        assert!(e.holds(o(1), Below, o(0)));
        // lifting is one rule application
        assert_eq!(e.depth(&f(o(0), Above, o(1))), Some(1));
    }

    #[test]
    fn exclusion_entails_membership_elsewhere_is_false() {
        let stated = [f(o(0), In, b(0)), f(o(1), In, b(1)), f(o(2), In, b(2))];
        let e = closure(&stated).unwrap();
        assert!(e.is_excluded(o(0), b(1)));
        assert!(e.is_excluded(o(0), b(2)));
        assert!(!e.is_excluded(o(0), b(0)));
        assert_eq!(relation_status(o(0), b(1), In, &e), ThreeValued::False);
        assert_eq!(relation_status(o(0), b(0), In, &e), ThreeValued::True);
        assert!(e.contains(&Fact::not_in(o(0), b(2))));
    }

    #[test]
    fn touching_edge_neither_lifts_nor_composes() {
        use crate::model::Edge;
        let stated = [
            f(o(0), In, b(0)),
            f(o(0), TouchingEdge(Edge::Bottom), b(0)),
            f(o(1), In, b(0)),
        ];
        let e = closure(&stated).unwrap();
        assert!(e.relations(o(1), b(0)).iter().all(|r| r == In));
        assert!(e.relations(b(0), o(0)).is_empty());
    }

    #[test]
    fn chain_with_two_relations_on_every_edge() {
        let mut stated = Vec::new();
        for i in 0..3 {
            stated.push(f(o(i), Left, o(i + 1)));
            stated.push(f(o(i), Above, o(i + 1)));
        }
        let e = closure(&stated).unwrap();
        let got: Vec<_> = all_relations(o(0), o(3), &e).iter().collect();
        assert_eq!(got, vec![Left, Above]);
    }

    #[test]
    fn kleene_tables() {
        use ThreeValued::*;
        assert_eq!(True & Unknown, Unknown);
        assert_eq!(False & Unknown, False);
        assert_eq!(True | Unknown, True);
        assert_eq!(False | Unknown, Unknown);
        assert_eq!(!Unknown, Unknown);
        assert_eq!(ThreeValued::any([]), False);
        assert_eq!(ThreeValued::all([]), True);
    }
}
