//! Shared test helpers: an independent closure oracle and scene fixtures.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use spatialqa_core::algebra::{closure, EntailedSet};
use spatialqa_core::model::{EntityRef, Fact, RelationKind, Scene};
use spatialqa_core::sampler::{
    extract_geometric_facts, sample_scene, select_story_facts, CountRange, SamplerConfig,
};

/// Relations between two entities as the oracle sees them.
pub type Relations = BTreeMap<(EntityRef, EntityRef), BTreeSet<RelationKind>>;

/// Entailment by explicit path search over the stated facts, with no shared
/// code with the closure engine. A directional relation holds from x to y
/// when some chain of single steps leads from x to y, where a step is a
/// stated fact in either orientation, or for objects a pair of memberships
/// joined by a chain of block steps.
pub fn oracle(
    stated: &[Fact],
    touching_implies_near: bool,
) -> (Relations, BTreeSet<(EntityRef, EntityRef)>) {
    let entities: BTreeSet<EntityRef> = stated.iter().flat_map(|f| [f.subject, f.object]).collect();
    let blocks: Vec<EntityRef> = entities.iter().copied().filter(|e| e.is_block()).collect();
    let home: BTreeMap<EntityRef, EntityRef> = stated
        .iter()
        .filter(|f| f.relation == RelationKind::In && f.is_positive())
        .map(|f| (f.subject, f.object))
        .collect();
    let mut out: Relations = BTreeMap::new();
    let mut put = |a: EntityRef, r: RelationKind, b: EntityRef| {
        out.entry((a, b)).or_default().insert(r);
    };

    for f in stated.iter().filter(|f| f.is_positive()) {
        if !f.relation.is_directional() {
            put(f.subject, f.relation, f.object);
            if f.relation.is_symmetric() {
                put(f.object, f.relation, f.subject);
            }
            if f.relation == RelationKind::Touching && touching_implies_near {
                put(f.subject, RelationKind::NearTo, f.object);
                put(f.object, RelationKind::NearTo, f.subject);
            }
        }
    }

    for r in [
        RelationKind::Left,
        RelationKind::Right,
        RelationKind::Above,
        RelationKind::Below,
    ] {
        let step = |a: EntityRef, b: EntityRef| {
            stated.iter().any(|f| {
                f.is_positive()
                    && ((f.subject == a && f.object == b && f.relation == r)
                        || (f.subject == b && f.object == a && Some(f.relation) == r.converse()))
            })
        };
        // block chains
        let reach =
            |from: EntityRef, nodes: &[EntityRef], extra: &dyn Fn(EntityRef, EntityRef) -> bool| {
                let mut seen = BTreeSet::new();
                let mut stack = vec![from];
                while let Some(x) = stack.pop() {
                    for &y in nodes {
                        if !seen.contains(&y) && (step(x, y) || extra(x, y)) {
                            seen.insert(y);
                            stack.push(y);
                        }
                    }
                }
                seen
            };
        let block_reach: BTreeMap<EntityRef, BTreeSet<EntityRef>> = blocks
            .iter()
            .map(|&b| (b, reach(b, &blocks, &|_, _| false)))
            .collect();
        for (&b, targets) in &block_reach {
            for &t in targets {
                put(b, r, t);
            }
        }
        let objects: Vec<EntityRef> = entities.iter().copied().filter(|e| !e.is_block()).collect();
        let lifted = |x: EntityRef, y: EntityRef| match (home.get(&x), home.get(&y)) {
            (Some(a), Some(b)) => block_reach[a].contains(b),
            _ => false,
        };
        for &x in &objects {
            for y in reach(x, &objects, &lifted) {
                put(x, r, y);
            }
        }
    }

    let mut excluded = BTreeSet::new();
    for (&x, &b) in &home {
        for &other in &blocks {
            if other != b {
                excluded.insert((x, other));
            }
        }
    }
    for f in stated.iter().filter(|f| !f.is_positive()) {
        excluded.insert((f.subject, f.object));
    }
    (out, excluded)
}

/// The closure's relations in the oracle's shape.
pub fn closure_relations(closed: &EntailedSet) -> Relations {
    closed
        .pairs()
        .map(|(a, b, set)| ((a, b), set.iter().collect()))
        .collect()
}

/// Sampler settings for small scenes of at most six objects.
pub fn small_scenes(seed: u64) -> SamplerConfig {
    SamplerConfig {
        block_count: CountRange::new(1, 3),
        objects_per_block: CountRange::new(1, 2),
        min_described_objects: 0,
        seed,
        ..SamplerConfig::default()
    }
}

/// A sampled scene and the facts a story about it would state.
pub fn scene_and_facts(cfg: &SamplerConfig) -> (Scene, Vec<Fact>) {
    let scene = sample_scene(cfg).expect("scene samples");
    let facts = select_story_facts(&extract_geometric_facts(&scene, cfg), cfg);
    (scene, facts)
}

/// First disagreement between an entailed directional fact and the scene.
pub fn geometry_violation(scene: &Scene, closed: &EntailedSet) -> Option<Fact> {
    let center = |e: EntityRef| match e {
        EntityRef::Object(o) => scene.global_position(o).map(|p| (p.x, p.y, 0.0, 0.0)),
        EntityRef::Block(b) => scene
            .block(b)
            .map(|b| (b.origin.x, b.origin.y, b.bounds.width, b.bounds.height)),
    };
    closed.facts().map(|(f, _)| *f).find(|f| {
        if !f.relation.is_directional() {
            return false;
        }
        let (Some(a), Some(b)) = (center(f.subject), center(f.object)) else {
            return true;
        };
        // blocks compare by extent, objects by center
        match f.relation {
            RelationKind::Left => a.0 + a.2 > b.0,
            RelationKind::Right => a.0 < b.0 + b.2,
            RelationKind::Above => a.1 < b.1 + b.3,
            RelationKind::Below => a.1 + a.3 > b.1,
            _ => false,
        }
    })
}

/// Closure of `facts`, panicking with the facts on failure.
pub fn closed(facts: &[Fact]) -> EntailedSet {
    closure(facts).unwrap_or_else(|e| panic!("closure failed: {e} for {facts:?}"))
}
