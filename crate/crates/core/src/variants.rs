//! Consistency, contrast and unseen-vocabulary variants of a record.
//!
//! A consistency variant asks the same thing another way (arguments swapped,
//! relation replaced by its converse), so its answer follows from the pivot's
//! answer. A contrast variant changes one part of the question so that the
//! answer changes. The unseen-vocabulary variant rewrites the whole record
//! with a different set of words without touching any answer.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::algebra::EntailedSet;
use crate::annotator::emit_sprl;
use crate::error::VariantError;
use crate::grammar::Grammar;
use crate::model::{
    labels, DatasetRecord, Determiner, EntityDescriptor, LogicalForm, QType, Question,
    RelationKind, Sentence, Story, VariantItem, Variants, Vocabulary,
};
use crate::questions::{make_question, QuestionConfig, QuestionFactory};
use crate::rng::{rng, Rng as StdRng};
use crate::text;
use crate::vocab::{Direction, VocabularyMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariantConfig {
    pub consistency: bool,
    pub contrast: bool,
    /// Store an unseen-vocabulary copy inside every record.
    pub embed_unseen: bool,
    /// Modified questions tried per contrast item.
    pub contrast_tries: usize,
}

impl Default for VariantConfig {
    fn default() -> Self {
        Self {
            consistency: true,
            contrast: true,
            embed_unseen: false,
            contrast_tries: 12,
        }
    }
}

/// Labels a question with swapped arguments must have, given the pivot's.
pub fn converse_labels(qtype: QType, pivot: &[String], block_names: &[String]) -> Vec<String> {
    match qtype {
        QType::FR => {
            let mut rels: Vec<RelationKind> = pivot
                .iter()
                .filter_map(|l| RelationKind::from_label(l))
                .filter_map(|r| r.converse())
                .collect();
            if rels.is_empty() {
                return vec![labels::DK.to_string()];
            }
            rels.sort_by_key(|r| RelationKind::OBJECT_RELATIONS.iter().position(|x| x == r));
            rels.iter().map(|r| r.label().to_string()).collect()
        }
        QType::YN => pivot.to_vec(),
        QType::CO => pivot
            .iter()
            .map(|l| match l.as_str() {
                labels::OBJECT1 => labels::OBJECT2.to_string(),
                labels::OBJECT2 => labels::OBJECT1.to_string(),
                other => other.to_string(),
            })
            .collect(),
        QType::FB => {
            let out: Vec<String> = block_names
                .iter()
                .filter(|b| !pivot.contains(b))
                .cloned()
                .collect();
            if out.is_empty() {
                vec![labels::NONE.to_string()]
            } else {
                out
            }
        }
    }
}

/// The pivot's question asked the other way round.
fn swapped(lf: &LogicalForm) -> Option<LogicalForm> {
    Some(match lf {
        LogicalForm::FindRelation { first, second } => LogicalForm::FindRelation {
            first: second.clone(),
            second: first.clone(),
        },
        LogicalForm::FindBlock { target, negated } => {
            // "doesn't have" is the complement only for one known object
            if target.determiner != Determiner::The {
                return None;
            }
            LogicalForm::FindBlock {
                target: target.clone(),
                negated: !negated,
            }
        }
        LogicalForm::ChooseObject {
            relation,
            anchor,
            candidates,
            form,
        } => LogicalForm::ChooseObject {
            relation: *relation,
            anchor: anchor.clone(),
            candidates: [candidates[1].clone(), candidates[0].clone()],
            form: *form,
        },
        LogicalForm::YesNo {
            subject,
            relation,
            object,
        } => {
            // swapping two quantifiers would change the reading
            let definite = |d: &EntityDescriptor| d.determiner == Determiner::The;
            if !definite(subject) && !definite(object) {
                return None;
            }
            LogicalForm::YesNo {
                subject: object.clone(),
                relation: relation.converse()?,
                object: subject.clone(),
            }
        }
    })
}

fn block_names(story: &Story) -> Vec<String> {
    story
        .entities
        .blocks_by_name()
        .into_iter()
        .map(|b| b.name.clone())
        .collect()
}

pub fn consistency_variant(
    pivot: &Question,
    story: &Story,
    closed: &EntailedSet,
    g: &Grammar,
    rng: &mut StdRng,
) -> Result<Question, VariantError> {
    let lf = swapped(&pivot.logical_form)
        .ok_or_else(|| VariantError::NoVariant("no equivalent form".into()))?;
    let q = make_question(lf, story, closed, g, rng)
        .map_err(|e| VariantError::NoVariant(e.to_string()))?;
    let expected = converse_labels(pivot.qtype, pivot.gold_labels(), &block_names(story));
    if q.gold_labels() != expected {
        return Err(VariantError::NoVariant(
            "answer does not follow from the pivot".into(),
        ));
    }
    Ok(q)
}

/// Single-point edits of a logical form.
fn edits(lf: &LogicalForm, f: &mut QuestionFactory, story: &Story) -> Vec<LogicalForm> {
    let mut out = Vec::new();
    let others: Vec<EntityDescriptor> = story
        .entities
        .objects
        .iter()
        .filter_map(|o| f.definite(o.id).ok())
        .collect();
    match lf {
        LogicalForm::FindRelation { first, second } => {
            for d in &others {
                out.push(LogicalForm::FindRelation {
                    first: first.clone(),
                    second: d.clone(),
                });
                out.push(LogicalForm::FindRelation {
                    first: d.clone(),
                    second: second.clone(),
                });
            }
        }
        LogicalForm::FindBlock { target, negated } => {
            for d in &others {
                let mut d = d.clone();
                if target.determiner == Determiner::A {
                    d.nested = None;
                    d.ordinal = None;
                    d = d.with_determiner(Determiner::A);
                }
                out.push(LogicalForm::FindBlock {
                    target: d,
                    negated: *negated,
                });
            }
        }
        LogicalForm::ChooseObject {
            relation,
            anchor,
            candidates,
            form,
        } => {
            for r in RelationKind::OBJECT_RELATIONS {
                if r != *relation {
                    out.push(LogicalForm::ChooseObject {
                        relation: r,
                        anchor: anchor.clone(),
                        candidates: candidates.clone(),
                        form: *form,
                    });
                }
            }
            for d in &others {
                out.push(LogicalForm::ChooseObject {
                    relation: *relation,
                    anchor: d.clone(),
                    candidates: candidates.clone(),
                    form: *form,
                });
            }
        }
        LogicalForm::YesNo {
            subject,
            relation,
            object,
        } => {
            for r in RelationKind::OBJECT_RELATIONS {
                if r != *relation {
                    out.push(LogicalForm::YesNo {
                        subject: subject.clone(),
                        relation: r,
                        object: object.clone(),
                    });
                }
            }
            for d in &others {
                out.push(LogicalForm::YesNo {
                    subject: subject.clone(),
                    relation: *relation,
                    object: d.clone(),
                });
            }
        }
    }
    out.retain(|x| x != lf);
    out
}

pub fn contrast_variant(
    pivot: &Question,
    story: &Story,
    closed: &EntailedSet,
    g: &Grammar,
    qcfg: &QuestionConfig,
    cfg: &VariantConfig,
    seed: u64,
) -> Result<Question, VariantError> {
    let mut f = QuestionFactory::new(g, qcfg, story, closed, seed);
    let mut r = rng(seed);
    let mut candidates = edits(&pivot.logical_form, &mut f, story);
    candidates.shuffle(&mut r);
    for lf in candidates.into_iter().take(cfg.contrast_tries) {
        let Ok(q) = make_question(lf, story, closed, g, &mut r) else {
            continue;
        };
        if q.gold_labels() != pivot.gold_labels() {
            return Ok(q);
        }
    }
    Err(VariantError::NoVariant(
        "no single edit changes the answer".into(),
    ))
}

pub fn build_variants(
    questions: &[Question],
    story: &Story,
    closed: &EntailedSet,
    g: &Grammar,
    qcfg: &QuestionConfig,
    cfg: &VariantConfig,
    seed: u64,
) -> Variants {
    let mut v = Variants::default();
    let mut r = rng(seed);
    for (i, q) in questions.iter().enumerate() {
        if cfg.consistency {
            if let Ok(c) = consistency_variant(q, story, closed, g, &mut r) {
                v.consistency.push(VariantItem {
                    pivot: i,
                    question: c,
                });
            }
        }
        if cfg.contrast {
            let s = crate::rng::derive(seed, i as u64);
            if let Ok(c) = contrast_variant(q, story, closed, g, qcfg, cfg, s) {
                v.contrast.push(VariantItem {
                    pivot: i,
                    question: c,
                });
            }
        }
    }
    v
}

fn map_sentence(s: &Sentence, vocab: &VocabularyMap) -> Sentence {
    let old_spans = text::token_offsets(&s.text);
    let tokens: Vec<String> = old_spans
        .iter()
        .map(|sp| s.text[sp.start..sp.end].to_string())
        .collect();
    let mapped = vocab.map_tokens(&tokens, Direction::Forward);
    let (new_text, new_spans) = text::join(&mapped.tokens);
    let remap = |sp: crate::model::Span| -> crate::model::Span {
        match text::token_range(&old_spans, sp) {
            Some((a, b)) => text::cover(&new_spans, mapped.ranges[a].0, mapped.ranges[b - 1].1),
            None => sp,
        }
    };
    let mut out = s.clone();
    out.text = new_text;
    for sp in &mut out.spans {
        sp.trajector = remap(sp.trajector);
        sp.indicator = remap(sp.indicator);
        sp.landmark = remap(sp.landmark);
    }
    out
}

fn map_question(q: &Question, vocab: &VocabularyMap) -> Question {
    let mut q = q.clone();
    q.text = vocab.map_text(&q.text, Direction::Forward);
    q
}

/// The record written in the alternative vocabulary. Answers, logical forms
/// and facts are unchanged; texts and span offsets follow the new words.
pub fn make_unseen(
    record: &DatasetRecord,
    vocab: &VocabularyMap,
) -> Result<DatasetRecord, VariantError> {
    let mut out = record.clone();
    out.story.sentences = record
        .story
        .sentences
        .iter()
        .map(|s| map_sentence(s, vocab))
        .collect();
    out.story.token_count = out
        .story
        .sentences
        .iter()
        .map(|s| text::token_count(&s.text))
        .sum();
    out.questions = record
        .questions
        .iter()
        .map(|q| map_question(q, vocab))
        .collect();
    out.annotations.sprl =
        emit_sprl(&out.story).map_err(|e| VariantError::NoVariant(e.to_string()))?;
    out.variants = record.variants.as_ref().map(|v| Variants {
        unseen: None,
        consistency: v
            .consistency
            .iter()
            .map(|i| VariantItem {
                pivot: i.pivot,
                question: map_question(&i.question, vocab),
            })
            .collect(),
        contrast: v
            .contrast
            .iter()
            .map(|i| VariantItem {
                pivot: i.pivot,
                question: map_question(&i.question, vocab),
            })
            .collect(),
    });
    out.provenance.vocabulary = Vocabulary::Unseen;
    Ok(out)
}
