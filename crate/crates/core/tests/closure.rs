mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use spatialqa_core::algebra::{closure, closure_with, relation_status, ClosureConfig, ThreeValued};
use spatialqa_core::model::{Edge, EntityRef, Fact, RelationKind};

use common::*;

#[test]
fn closure_equals_path_oracle_on_sampled_scenes() {
    for seed in 0..1000 {
        let (scene, facts) = scene_and_facts(&small_scenes(seed));
        assert!(scene.objects.len() <= 6);
        let c = closed(&facts);
        let (expected, excluded) = oracle(&facts, true);
        assert_eq!(closure_relations(&c), expected, "seed {seed}");
        for &(x, b) in &excluded {
            assert!(
                c.is_excluded(x, b),
                "seed {seed}: {x:?} not excluded from {b:?}"
            );
        }
        assert_eq!(geometry_violation(&scene, &c), None, "seed {seed}");
    }
}

#[test]
fn oracle_without_touching_near() {
    let cfg = ClosureConfig {
        touching_implies_near: false,
    };
    for seed in 0..200 {
        let (_, facts) = scene_and_facts(&small_scenes(seed));
        let c = closure_with(&facts, &cfg).unwrap();
        assert_eq!(
            closure_relations(&c),
            oracle(&facts, false).0,
            "seed {seed}"
        );
    }
}

#[test]
fn block_chain_reaches_members() {
    let (a, b, c) = (
        EntityRef::block(0),
        EntityRef::block(1),
        EntityRef::block(2),
    );
    let (x, y) = (EntityRef::object(0), EntityRef::object(1));
    let facts = [
        Fact::new(x, RelationKind::In, a),
        Fact::new(y, RelationKind::In, c),
        Fact::new(a, RelationKind::Left, b),
        Fact::new(c, RelationKind::Right, b),
    ];
    let closed = closure(&facts).unwrap();
    assert!(closed.holds(x, RelationKind::Left, y));
    assert!(closed.holds(y, RelationKind::Right, x));
    assert_eq!(closure_relations(&closed), oracle(&facts, true).0);
    assert_eq!(
        relation_status(x, y, RelationKind::Right, &closed),
        ThreeValued::False
    );
    assert_eq!(
        relation_status(x, y, RelationKind::Above, &closed),
        ThreeValued::Unknown
    );
}

fn entity(i: u8) -> EntityRef {
    if i < 5 {
        EntityRef::object(i as u32)
    } else {
        EntityRef::block((i - 5) as u32)
    }
}

/// Arbitrary well-formed facts over five objects and three blocks; they
/// need not be consistent.
fn fact_strategy() -> impl Strategy<Value = Fact> {
    (0u8..5, 0u8..5, 0u8..3, 0usize..9, any::<bool>()).prop_filter_map(
        "self relation",
        |(a, b, blk, r, between_blocks)| {
            let (s, o) = (entity(a), entity(b));
            let f = match r {
                7 => Fact::new(s, RelationKind::In, entity(5 + blk)),
                8 => Fact::new(
                    s,
                    RelationKind::TouchingEdge(Edge::ALL[blk as usize]),
                    entity(5 + blk),
                ),
                _ if between_blocks && r < 4 => {
                    Fact::new(entity(5 + a % 3), RelationKind::ALL[r], entity(5 + b % 3))
                }
                _ => Fact::new(s, RelationKind::ALL[r], o),
            };
            (f.subject != f.object).then_some(f)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn consistent_closures_match_oracle(facts in prop::collection::vec(fact_strategy(), 0..12)) {
        if let Ok(c) = closure(&facts) {
            prop_assert_eq!(closure_relations(&c), oracle(&facts, true).0);
        }
    }

    #[test]
    fn no_exclusive_pair_survives(facts in prop::collection::vec(fact_strategy(), 0..12)) {
        if let Ok(c) = closure(&facts) {
            for (a, b, set) in c.pairs() {
                for r in set.iter() {
                    prop_assert!(set.excludes(r).is_none(), "{:?} {:?} {:?}", a, r, b);
                }
                prop_assert!(!(set.contains(RelationKind::In) && c.is_excluded(a, b)));
            }
        }
    }

    #[test]
    fn closure_is_idempotent(seed in 0u64..5000) {
        let (_, facts) = scene_and_facts(&small_scenes(seed));
        let once = closed(&facts);
        let all: Vec<Fact> = once.facts().map(|(f, _)| *f).collect();
        let twice = closed(&all);
        let a: BTreeSet<Fact> = once.facts().map(|(f, _)| *f).collect();
        let b: BTreeSet<Fact> = twice.facts().map(|(f, _)| *f).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn closure_is_monotone(seed in 0u64..5000, mask in any::<u64>()) {
        let (_, facts) = scene_and_facts(&small_scenes(seed));
        let subset: Vec<Fact> = facts.iter().enumerate().filter(|(i, _)| mask >> (i % 64) & 1 == 1).map(|(_, f)| *f).collect();
        let full = closed(&facts);
        let part = closed(&subset);
        for (f, _) in part.facts() {
            prop_assert!(full.contains(f), "{:?}", f);
        }
    }

    #[test]
    fn stated_facts_have_depth_zero(seed in 0u64..5000) {
        let (_, facts) = scene_and_facts(&small_scenes(seed));
        let c = closed(&facts);
        let stated: BTreeSet<Fact> = facts.iter().copied().collect();
        let zero: BTreeSet<Fact> = c.facts().filter(|(_, d)| *d == 0).map(|(f, _)| *f).collect();
        prop_assert_eq!(stated, zero);
    }
}
