//! Gold answers from a logical form and the closure of a story.
//!
//! Mentions are resolved against the story's objects with the closure as the
//! source of relations. "The" must pick out one object, "a" and "any" read
//! existentially and "all" universally; quantifiers never pair an object with
//! itself. Yes/no answers follow three-valued logic, so a question the story
//! does not settle is answered DK.

use crate::algebra::{all_relations, relation_status, EntailedSet, ThreeValued};
use crate::error::AnswerError;
use crate::mention;
use crate::model::{
    labels, AnswerSet, Determiner, EntityDescriptor, EntityRef, EntityTable, Fact, Justification,
    LogicalForm, ObjectId, QType, RelationKind,
};

/// Objects a descriptor applies to.
pub fn resolve(
    desc: &EntityDescriptor,
    entities: &EntityTable,
    closed: &EntailedSet,
) -> Vec<ObjectId> {
    mention::matches(desc, &entities.objects, closed)
}

fn quantified(
    desc: &EntityDescriptor,
    entities: &EntityTable,
    closed: &EntailedSet,
) -> Result<(Vec<ObjectId>, bool), AnswerError> {
    let m = resolve(desc, entities, closed);
    match desc.determiner {
        Determiner::The if m.len() != 1 => Err(AnswerError::UnresolvedMention {
            mention: describe(desc),
            matches: m.len(),
        }),
        Determiner::All => Ok((m, true)),
        _ => Ok((m, false)),
    }
}

fn describe(desc: &EntityDescriptor) -> String {
    let mut parts = Vec::new();
    if let Some(s) = desc.size {
        parts.push(s.name().to_string());
    }
    if let Some(c) = desc.color {
        parts.push(c.name().to_string());
    }
    parts.push(desc.shape.map_or("object", |s| s.name()).to_string());
    if let Some(n) = desc.ordinal {
        parts.push(format!("number {n}"));
    }
    if let Some(n) = &desc.nested {
        parts.push(format!("{} {}", n.relation.label(), describe(&n.inner)));
    }
    parts.join(" ")
}

fn fact(a: ObjectId, r: RelationKind, b: ObjectId) -> Fact {
    Fact::new(EntityRef::Object(a), r, EntityRef::Object(b))
}

fn justify(f: Fact, closed: &EntailedSet) -> Justification {
    Justification {
        depth: closed.depth(&f).unwrap_or(0),
        fact: f,
    }
}

/// Why `a R b` has the status it has: the fact itself when true, an
/// exclusive relation when false.
fn witness(
    a: ObjectId,
    r: RelationKind,
    b: ObjectId,
    closed: &EntailedSet,
) -> Option<Justification> {
    let ea = EntityRef::Object(a);
    let eb = EntityRef::Object(b);
    if closed.holds(ea, r, eb) {
        return Some(justify(fact(a, r, b), closed));
    }
    all_relations(ea, eb, closed)
        .excludes(r)
        .map(|x| justify(fact(a, x, b), closed))
}

/// Truth of "subject R object" under the mentions' quantifiers.
pub struct Statement {
    pub value: ThreeValued,
    pub vacuous: bool,
    pub justification: Vec<Justification>,
}

pub fn statement(
    subject: &EntityDescriptor,
    r: RelationKind,
    object: &EntityDescriptor,
    entities: &EntityTable,
    closed: &EntailedSet,
) -> Result<Statement, AnswerError> {
    let (xs, x_all) = quantified(subject, entities, closed)?;
    let (ys, y_all) = quantified(object, entities, closed)?;
    let mut vacuous = x_all && xs.is_empty();
    let mut outer = Vec::new();
    let mut why: Vec<Vec<Justification>> = Vec::new();
    for &x in &xs {
        let range: Vec<ObjectId> = ys.iter().copied().filter(|&y| y != x).collect();
        vacuous |= y_all && range.is_empty();
        let values: Vec<ThreeValued> = range
            .iter()
            .map(|&y| relation_status(EntityRef::Object(x), EntityRef::Object(y), r, closed))
            .collect();
        let inner = if y_all {
            ThreeValued::all(values.iter().copied())
        } else {
            ThreeValued::any(values.iter().copied())
        };
        // the witnesses that decide the inner value
        let mut w = Vec::new();
        let decisive = match (y_all, inner) {
            (true, ThreeValued::True) | (false, ThreeValued::False) => None,
            (true, ThreeValued::False) => Some(ThreeValued::False),
            (false, ThreeValued::True) => Some(ThreeValued::True),
            _ => Some(ThreeValued::Unknown),
        };
        for (&y, &v) in range.iter().zip(&values) {
            if decisive.is_none_or(|d| d == v) {
                w.extend(witness(x, r, y, closed));
                if decisive.is_some() {
                    break;
                }
            }
        }
        outer.push(inner);
        why.push(w);
    }
    let value = if x_all {
        ThreeValued::all(outer.iter().copied())
    } else {
        ThreeValued::any(outer.iter().copied())
    };
    let mut justification = Vec::new();
    let decisive = match (x_all, value) {
        (true, ThreeValued::True) | (false, ThreeValued::False) => None,
        _ => Some(value),
    };
    for (v, w) in outer.iter().zip(why) {
        if decisive.is_none_or(|d| d == *v) {
            justification.extend(w);
            if decisive.is_some() {
                break;
            }
        }
    }
    Ok(Statement {
        value,
        vacuous,
        justification,
    })
}

fn definite(
    desc: &EntityDescriptor,
    entities: &EntityTable,
    closed: &EntailedSet,
) -> Result<ObjectId, AnswerError> {
    let m = resolve(desc, entities, closed);
    match m.as_slice() {
        [x] => Ok(*x),
        _ => Err(AnswerError::UnresolvedMention {
            mention: describe(desc),
            matches: m.len(),
        }),
    }
}

pub fn answer(
    lf: &LogicalForm,
    entities: &EntityTable,
    closed: &EntailedSet,
) -> Result<AnswerSet, AnswerError> {
    match lf {
        LogicalForm::FindRelation { first, second } => {
            let a = definite(first, entities, closed)?;
            let b = definite(second, entities, closed)?;
            let rels = all_relations(EntityRef::Object(a), EntityRef::Object(b), closed);
            let mut out = AnswerSet::labels(Vec::new());
            for r in RelationKind::OBJECT_RELATIONS {
                if rels.contains(r) && a != b {
                    out.labels.push(r.label().to_string());
                    out.justification.push(justify(fact(a, r, b), closed));
                }
            }
            if out.labels.is_empty() {
                out.labels.push(labels::DK.to_string());
            }
            Ok(out)
        }
        LogicalForm::FindBlock { target, negated } => {
            let (xs, _) = quantified(target, entities, closed)?;
            let mut out = AnswerSet::labels(Vec::new());
            for b in entities.blocks_by_name() {
                let eb = EntityRef::Block(b.id);
                let status = |x: ObjectId| {
                    relation_status(EntityRef::Object(x), eb, RelationKind::In, closed)
                };
                let hit = if *negated {
                    out.vacuous |= xs.is_empty();
                    xs.iter().all(|&x| status(x) == ThreeValued::False)
                } else {
                    xs.iter().any(|&x| status(x) == ThreeValued::True)
                };
                if hit {
                    out.labels.push(b.name.clone());
                    for &x in &xs {
                        let f = if *negated {
                            Fact::not_in(EntityRef::Object(x), eb)
                        } else {
                            Fact::new(EntityRef::Object(x), RelationKind::In, eb)
                        };
                        if *negated || status(x) == ThreeValued::True {
                            out.justification.push(justify(f, closed));
                        }
                    }
                }
            }
            if out.labels.is_empty() {
                out.labels.push(labels::NONE.to_string());
            }
            Ok(out)
        }
        LogicalForm::ChooseObject {
            relation,
            anchor,
            candidates,
            ..
        } => {
            let mut chosen = [false; 2];
            let mut out = AnswerSet::labels(Vec::new());
            for (i, c) in candidates.iter().enumerate() {
                let s = statement(c, *relation, anchor, entities, closed)?;
                out.vacuous |= s.vacuous;
                if s.value == ThreeValued::True {
                    chosen[i] = true;
                    out.justification.extend(s.justification);
                }
            }
            let label = match chosen {
                [true, true] => labels::BOTH,
                [true, false] => labels::OBJECT1,
                [false, true] => labels::OBJECT2,
                [false, false] => labels::NONE,
            };
            out.labels.push(label.to_string());
            Ok(out)
        }
        LogicalForm::YesNo {
            subject,
            relation,
            object,
        } => {
            let s = statement(subject, *relation, object, entities, closed)?;
            let label = match s.value {
                ThreeValued::True => labels::YES,
                ThreeValued::False => labels::NO,
                ThreeValued::Unknown => labels::DK,
            };
            Ok(AnswerSet {
                labels: vec![label.to_string()],
                justification: s.justification,
                vacuous: s.vacuous,
            })
        }
    }
}

/// Every label a question of this type can take.
pub fn candidates(qtype: QType, entities: &EntityTable) -> Vec<String> {
    match qtype {
        QType::FR => RelationKind::OBJECT_RELATIONS
            .iter()
            .map(|r| r.label().to_string())
            .chain([labels::DK.to_string()])
            .collect(),
        QType::FB => entities
            .blocks_by_name()
            .into_iter()
            .map(|b| b.name.clone())
            .chain([labels::NONE.to_string()])
            .collect(),
        QType::CO => [labels::OBJECT1, labels::OBJECT2, labels::BOTH, labels::NONE]
            .map(String::from)
            .to_vec(),
        QType::YN => [labels::YES, labels::NO, labels::DK]
            .map(String::from)
            .to_vec(),
    }
}
