//! Question generation over a realized story.
//!
//! Questions refer to objects with descriptors resolved against every object
//! of the story, with the closure supplying the relations used by "which is
//! R the X" clauses. Each question is answered by [`answers::answer`] and
//! dropped if a mention fails to resolve or a universal quantifier has
//! nothing to range over.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{all_relations, relation_status, EntailedSet, ThreeValued};
use crate::answers;
use crate::error::QuestionError;
use crate::grammar::Grammar;
use crate::mention;
use crate::model::{
    ChoiceForm, Determiner, EntityDescriptor, EntityRef, Hypernym, LogicalForm, ObjectId, QType,
    Question, RelationKind, Story, StoryObject,
};
use crate::realizer::{assemble, Piece};
use crate::rng::{rng, Rng as StdRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuestionConfig {
    /// Questions of each type per story.
    pub per_type: usize,
    /// Chance of a relation clause on a mention.
    pub nested_probability: f64,
    /// Chance of the full name for a definite mention.
    pub full_name_probability: f64,
    /// Chance of "object"/"shape"/"thing" in place of the shape.
    pub hypernym_probability: f64,
    /// Chance that a find-relation pair is one the closure knows nothing
    /// about.
    pub fr_unknown_probability: f64,
    /// Chance of asking which block lacks an object.
    pub fb_negated_probability: f64,
    /// Chance of "a X" rather than "the X" as the find-block target.
    pub fb_indefinite_probability: f64,
    /// Chance that a choice candidate is drawn from the objects that satisfy
    /// the relation.
    pub co_related_probability: f64,
    /// Chance of quantified subjects ("any", "all") in yes/no questions.
    pub yn_quantified_probability: f64,
    /// Chance of "all X" as the object of a yes/no question.
    pub yn_all_object_probability: f64,
    /// Tries per question before giving up.
    pub max_tries: usize,
}

impl Default for QuestionConfig {
    fn default() -> Self {
        Self {
            per_type: 2,
            nested_probability: 0.7,
            full_name_probability: 0.8,
            hypernym_probability: 0.2,
            fr_unknown_probability: 0.02,
            fb_negated_probability: 0.5,
            fb_indefinite_probability: 0.4,
            co_related_probability: 0.75,
            yn_quantified_probability: 0.3,
            yn_all_object_probability: 0.15,
            max_tries: 60,
        }
    }
}

/// Builds questions for one story.
pub struct QuestionFactory<'a> {
    g: &'a Grammar,
    cfg: &'a QuestionConfig,
    story: &'a Story,
    closed: &'a EntailedSet,
    rng: StdRng,
}

fn obj(o: ObjectId) -> EntityRef {
    EntityRef::Object(o)
}

impl<'a> QuestionFactory<'a> {
    pub fn new(
        g: &'a Grammar,
        cfg: &'a QuestionConfig,
        story: &'a Story,
        closed: &'a EntailedSet,
        seed: u64,
    ) -> Self {
        Self {
            g,
            cfg,
            story,
            closed,
            rng: rng(seed),
        }
    }

    fn objects(&self) -> &'a [StoryObject] {
        &self.story.entities.objects
    }

    fn hypernym(&mut self) -> Hypernym {
        if self.rng.random_bool(self.cfg.hypernym_probability) {
            *Hypernym::ALL.choose(&mut self.rng).unwrap()
        } else {
            Hypernym::Object
        }
    }

    fn plain(&mut self, target: &StoryObject) -> Option<EntityDescriptor> {
        let h = self.hypernym();
        let mut options = mention::unique_plain(target, self.objects(), self.closed, h);
        if !self.rng.random_bool(self.cfg.hypernym_probability) {
            let shaped: Vec<_> = options
                .iter()
                .filter(|d| d.shape.is_some())
                .cloned()
                .collect();
            if !shaped.is_empty() {
                options = shaped;
            }
        }
        options.choose(&mut self.rng).cloned()
    }

    /// The object of a relative clause: a unique plain or full name.
    fn inner(&mut self, y: ObjectId) -> Option<EntityDescriptor> {
        let t = self.story.entities.object(y)?.clone();
        let full = mention::full_descriptor(&t, Determiner::The);
        if self.rng.random_bool(self.cfg.full_name_probability)
            && mention::is_unique(&full, y, self.objects(), self.closed)
        {
            return Some(full);
        }
        self.plain(&t)
    }

    /// A definite mention of `o`, unique among all objects of the story.
    pub fn definite(&mut self, o: ObjectId) -> Result<EntityDescriptor, QuestionError> {
        let objects = self.objects();
        let target = self
            .story
            .entities
            .object(o)
            .ok_or_else(|| QuestionError::NotDescribable(o.to_string()))?
            .clone();
        if self.rng.random_bool(self.cfg.nested_probability) {
            let mut rels: Vec<(RelationKind, ObjectId)> = objects
                .iter()
                .filter(|y| y.id != o)
                .flat_map(|y| {
                    all_relations(obj(o), obj(y.id), self.closed)
                        .iter()
                        .filter(|r| RelationKind::OBJECT_RELATIONS.contains(r))
                        .map(move |r| (r, y.id))
                })
                .collect();
            rels.shuffle(&mut self.rng);
            rels.truncate(4);
            let h = self.hypernym();
            let inner: Vec<(ObjectId, Option<EntityDescriptor>)> =
                rels.iter().map(|&(_, y)| (y, self.inner(y))).collect();
            let options = mention::unique_nested(&target, objects, self.closed, h, &rels, |y| {
                inner
                    .iter()
                    .find(|(id, _)| *id == y)
                    .and_then(|(_, d)| d.clone())
            });
            if let Some(d) = options.choose(&mut self.rng) {
                return Ok(d.clone());
            }
        }
        let full = mention::full_descriptor(&target, Determiner::The);
        if self.rng.random_bool(self.cfg.full_name_probability)
            && mention::is_unique(&full, o, objects, self.closed)
        {
            return Ok(full);
        }
        self.plain(&target)
            .ok_or_else(|| QuestionError::NotDescribable(o.to_string()))
    }

    /// "a circle", "a blue circle": some attributes of `o`, any number of
    /// matches.
    fn indefinite(&mut self, o: ObjectId) -> EntityDescriptor {
        let target = self.story.entities.object(o).unwrap().clone();
        let h = self.hypernym();
        let mut options: Vec<_> = mention::plain_descriptors(&target, Determiner::A, h)
            .into_iter()
            .filter(|d| d.ordinal.is_none())
            .collect();
        if !self.rng.random_bool(self.cfg.hypernym_probability) {
            options.retain(|d| d.shape.is_some());
        }
        let d = options.choose(&mut self.rng).cloned().unwrap();
        if !self.rng.random_bool(self.cfg.nested_probability) {
            return d;
        }
        let mut rels: Vec<(RelationKind, ObjectId)> = self
            .objects()
            .iter()
            .filter(|y| y.id != o)
            .flat_map(|y| {
                all_relations(obj(o), obj(y.id), self.closed)
                    .iter()
                    .filter(|r| RelationKind::OBJECT_RELATIONS.contains(r))
                    .map(move |r| (r, y.id))
                    .collect::<Vec<_>>()
            })
            .collect();
        rels.shuffle(&mut self.rng);
        match rels.first().and_then(|&(r, y)| Some((r, self.inner(y)?))) {
            Some((r, inner)) => d.with_nested(r, inner),
            None => d,
        }
    }

    /// "all squares", "any blue circles": shape, maybe color, of `o`.
    fn quantified(&mut self, o: ObjectId, det: Determiner) -> EntityDescriptor {
        let target = self.story.entities.object(o).unwrap();
        let color = self.rng.random_bool(0.3);
        let size = !color && self.rng.random_bool(0.15);
        EntityDescriptor::from_attrs(&target.attrs, size, color, true, det).with_determiner(det)
    }

    /// Render, answer and package a logical form.
    pub fn finish(&mut self, lf: LogicalForm) -> Result<Question, QuestionError> {
        make_question(lf, self.story, self.closed, self.g, &mut self.rng)
    }

    fn pick_object(&mut self) -> Result<ObjectId, QuestionError> {
        self.objects()
            .choose(&mut self.rng)
            .map(|o| o.id)
            .ok_or_else(|| QuestionError::NoValidSelection("story has no objects".into()))
    }

    fn stated_pair(&self, a: ObjectId, b: ObjectId) -> bool {
        self.story.facts.iter().any(|f| {
            (f.subject == obj(a) && f.object == obj(b))
                || (f.subject == obj(b) && f.object == obj(a))
        })
    }

    pub fn find_relation(&mut self) -> Result<Question, QuestionError> {
        let ids: Vec<ObjectId> = self.objects().iter().map(|o| o.id).collect();
        let mut known = Vec::new();
        let mut unknown = Vec::new();
        for &a in &ids {
            for &b in &ids {
                if a == b {
                    continue;
                }
                let rels = all_relations(obj(a), obj(b), self.closed);
                if rels
                    .iter()
                    .any(|r| RelationKind::OBJECT_RELATIONS.contains(&r))
                {
                    known.push((a, b));
                } else {
                    unknown.push((a, b));
                }
            }
        }
        // prefer pairs the story never relates directly
        let inferred: Vec<_> = known
            .iter()
            .copied()
            .filter(|&(a, b)| !self.stated_pair(a, b))
            .collect();
        let pool = if !unknown.is_empty()
            && (known.is_empty() || self.rng.random_bool(self.cfg.fr_unknown_probability))
        {
            unknown
        } else if !inferred.is_empty() && self.rng.random_bool(0.6) {
            inferred
        } else {
            known
        };
        let &(a, b) = pool
            .choose(&mut self.rng)
            .ok_or_else(|| QuestionError::NoValidSelection("fewer than two objects".into()))?;
        let first = self.definite(a)?;
        let second = self.definite(b)?;
        self.finish(LogicalForm::FindRelation { first, second })
    }

    pub fn find_block(&mut self) -> Result<Question, QuestionError> {
        if self.story.entities.blocks.is_empty() {
            return Err(QuestionError::NoValidSelection(
                "story has no blocks".into(),
            ));
        }
        let o = self.pick_object()?;
        let negated = self.rng.random_bool(self.cfg.fb_negated_probability);
        let target = if self.rng.random_bool(self.cfg.fb_indefinite_probability) {
            self.indefinite(o)
        } else {
            self.definite(o)?
        };
        self.finish(LogicalForm::FindBlock { target, negated })
    }

    pub fn choose_object(&mut self) -> Result<Question, QuestionError> {
        let anchor_id = self.pick_object()?;
        let others: Vec<ObjectId> = self
            .objects()
            .iter()
            .map(|o| o.id)
            .filter(|&o| o != anchor_id)
            .collect();
        let holding: Vec<RelationKind> = RelationKind::OBJECT_RELATIONS
            .iter()
            .copied()
            .filter(|&r| {
                others.iter().any(|&o| {
                    relation_status(obj(o), obj(anchor_id), r, self.closed) == ThreeValued::True
                })
            })
            .collect();
        let relation =
            if !holding.is_empty() && self.rng.random_bool(self.cfg.co_related_probability) {
                *holding.choose(&mut self.rng).unwrap()
            } else {
                *RelationKind::OBJECT_RELATIONS
                    .choose(&mut self.rng)
                    .unwrap()
            };
        if others.len() < 2 {
            return Err(QuestionError::NoValidSelection(
                "too few objects to choose from".into(),
            ));
        }
        let related: Vec<ObjectId> = others
            .iter()
            .copied()
            .filter(|&o| {
                relation_status(obj(o), obj(anchor_id), relation, self.closed) == ThreeValued::True
            })
            .collect();
        let mut chosen: Vec<ObjectId> = Vec::new();
        while chosen.len() < 2 {
            let pool: Vec<ObjectId> = if self.rng.random_bool(self.cfg.co_related_probability) {
                related
                    .iter()
                    .copied()
                    .filter(|o| !chosen.contains(o))
                    .collect()
            } else {
                others
                    .iter()
                    .copied()
                    .filter(|o| !chosen.contains(o))
                    .collect()
            };
            let pool = if pool.is_empty() {
                others
                    .iter()
                    .copied()
                    .filter(|o| !chosen.contains(o))
                    .collect()
            } else {
                pool
            };
            chosen.push(*pool.choose(&mut self.rng).unwrap());
        }
        let form = if self.rng.random_bool(0.5) {
            ChoiceForm::Which
        } else {
            ChoiceForm::What
        };
        let (anchor, c1, c2) = match form {
            ChoiceForm::Which => (
                self.definite(anchor_id)?,
                self.definite(chosen[0])?,
                self.definite(chosen[1])?,
            ),
            ChoiceForm::What => (
                self.definite(anchor_id)?,
                self.indefinite(chosen[0]),
                self.indefinite(chosen[1]),
            ),
        };
        if c1 == c2 {
            return Err(QuestionError::NoValidSelection(
                "candidates read the same".into(),
            ));
        }
        self.finish(LogicalForm::ChooseObject {
            relation,
            anchor,
            candidates: [c1, c2],
            form,
        })
    }

    pub fn yes_no(&mut self) -> Result<Question, QuestionError> {
        let ids: Vec<ObjectId> = self.objects().iter().map(|o| o.id).collect();
        if ids.len() < 2 {
            return Err(QuestionError::NoValidSelection(
                "fewer than two objects".into(),
            ));
        }
        let x = *ids.choose(&mut self.rng).unwrap();
        let y = **ids
            .iter()
            .filter(|&&y| y != x)
            .collect::<Vec<_>>()
            .choose(&mut self.rng)
            .unwrap();
        let known: Vec<RelationKind> = all_relations(obj(x), obj(y), self.closed)
            .iter()
            .filter(|r| RelationKind::OBJECT_RELATIONS.contains(r))
            .collect();
        let relation = match self.rng.random_range(0..4) {
            0 | 1 if !known.is_empty() => *known.choose(&mut self.rng).unwrap(),
            2 if !known.is_empty() => {
                let excluded: Vec<RelationKind> = RelationKind::OBJECT_RELATIONS
                    .iter()
                    .copied()
                    .filter(|r| known.iter().any(|k| k.excludes(*r)))
                    .collect();
                *excluded
                    .choose(&mut self.rng)
                    .unwrap_or_else(|| known.choose(&mut self.rng).unwrap())
            }
            _ => *RelationKind::OBJECT_RELATIONS
                .choose(&mut self.rng)
                .unwrap(),
        };
        let subject = if self.rng.random_bool(self.cfg.yn_quantified_probability) {
            if self.rng.random_bool(0.5) {
                self.quantified(x, Determiner::Any)
            } else {
                self.quantified(x, Determiner::All)
            }
        } else if self.rng.random_bool(0.15) {
            self.indefinite(x)
        } else {
            self.definite(x)?
        };
        let object = if self.rng.random_bool(self.cfg.yn_all_object_probability) {
            self.quantified(y, Determiner::All)
        } else {
            self.definite(y)?
        };
        self.finish(LogicalForm::YesNo {
            subject,
            relation,
            object,
        })
    }

    pub fn question(&mut self, qtype: QType) -> Result<Question, QuestionError> {
        match qtype {
            QType::FR => self.find_relation(),
            QType::FB => self.find_block(),
            QType::CO => self.choose_object(),
            QType::YN => self.yes_no(),
        }
    }

    /// `per_type` questions of each type with distinct texts, in type order.
    pub fn generate(&mut self) -> Result<Vec<Question>, QuestionError> {
        let mut out = Vec::new();
        let mut texts = BTreeSet::new();
        for qtype in QType::ALL {
            let mut made = 0;
            let mut last = None;
            for _ in 0..self.cfg.max_tries {
                if made == self.cfg.per_type {
                    break;
                }
                match self.question(qtype) {
                    Ok(q) if texts.insert(q.text.clone()) => {
                        out.push(q);
                        made += 1;
                    }
                    Ok(_) => {}
                    Err(e) => last = Some(e),
                }
            }
            if made < self.cfg.per_type {
                return Err(last.unwrap_or_else(|| {
                    QuestionError::NoValidSelection(format!("no distinct {qtype} question"))
                }));
            }
        }
        Ok(out)
    }
}

/// Text of a logical form through the grammar's question kinds.
pub fn render_question<R: Rng + ?Sized>(
    lf: &LogicalForm,
    g: &Grammar,
    rng: &mut R,
) -> Result<String, QuestionError> {
    let np = |d: &EntityDescriptor, rng: &mut R| Piece::whole(mention::render(g, d, false, rng));
    let (kind, pieces): (&str, Vec<(&str, Piece)>) = match lf {
        LogicalForm::FindRelation { first, second } => {
            ("AskFr", vec![("a", np(first, rng)), ("b", np(second, rng))])
        }
        LogicalForm::FindBlock { target, negated } => {
            let mut pieces = vec![("target", np(target, rng))];
            if *negated {
                ("AskFbNot", pieces)
            } else {
                let has = g
                    .pick("has", rng)
                    .map(|p| p.to_vec())
                    .unwrap_or_else(|| vec!["has".into()]);
                pieces.push(("has", Piece::whole(has)));
                ("AskFbHas", pieces)
            }
        }
        LogicalForm::ChooseObject {
            relation,
            anchor,
            candidates,
            form,
        } => {
            let kind = match form {
                ChoiceForm::Which => "AskCoWhich",
                ChoiceForm::What => "AskCoWhat",
            };
            let rel = Piece::whole(mention::relation_words(g, *relation, rng));
            (
                kind,
                vec![
                    ("rel", rel),
                    ("anchor", np(anchor, rng)),
                    ("first", np(&candidates[0], rng)),
                    ("second", np(&candidates[1], rng)),
                ],
            )
        }
        LogicalForm::YesNo {
            subject,
            relation,
            object,
        } => {
            let kind = match subject.determiner {
                Determiner::Any => "AskYnThere",
                Determiner::All => "AskYnAll",
                _ => "AskYn",
            };
            let rel = Piece::whole(mention::relation_words(g, *relation, rng));
            (
                kind,
                vec![
                    ("subj", np(subject, rng)),
                    ("rel", rel),
                    ("obj", np(object, rng)),
                ],
            )
        }
    };
    let pieces = pieces.into_iter().collect();
    Ok(assemble(g, kind, &pieces, rng)?.text)
}

/// Render and answer a logical form; fails when a mention does not resolve
/// or a universal quantifier is empty.
pub fn make_question<R: Rng + ?Sized>(
    lf: LogicalForm,
    story: &Story,
    closed: &EntailedSet,
    g: &Grammar,
    rng: &mut R,
) -> Result<Question, QuestionError> {
    let text = render_question(&lf, g, rng)?;
    let gold = answers::answer(&lf, &story.entities, closed)
        .map_err(|e| QuestionError::NoValidSelection(e.to_string()))?;
    if gold.vacuous {
        return Err(QuestionError::NoValidSelection("vacuous quantifier".into()));
    }
    let qtype = lf.qtype();
    Ok(Question {
        qtype,
        text,
        candidates: answers::candidates(qtype, &story.entities),
        reasoning_depth: gold.depth(),
        gold: Some(gold),
        logical_form: lf,
    })
}

pub fn generate_questions(
    story: &Story,
    closed: &EntailedSet,
    g: &Grammar,
    cfg: &QuestionConfig,
    seed: u64,
) -> Result<Vec<Question>, QuestionError> {
    QuestionFactory::new(g, cfg, story, closed, seed).generate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::closure;
    use crate::parser::{parse_question, solve};
    use crate::realizer::{realize_story, RealizerConfig};
    use crate::sampler::{
        extract_geometric_facts, sample_scene, select_story_facts, SamplerConfig,
    };

    fn sample(seed: u64) -> Option<(Story, Vec<Question>)> {
        let g = Grammar::default_grammar();
        let cfg = SamplerConfig {
            seed,
            ..SamplerConfig::default()
        };
        let scene = sample_scene(&cfg).unwrap();
        let facts = select_story_facts(&extract_geometric_facts(&scene, &cfg), &cfg);
        let story = realize_story(&facts, &scene, &g, &RealizerConfig::default(), seed).unwrap();
        let closed = closure(&story.facts).unwrap();
        let qs = generate_questions(&story, &closed, &g, &QuestionConfig::default(), seed).ok()?;
        Some((story, qs))
    }

    #[test]
    fn questions_read_back_and_solve() {
        let g = Grammar::default_grammar();
        let mut made = 0;
        for seed in 0..150 {
            let Some((story, qs)) = sample(seed) else {
                continue;
            };
            made += 1;
            assert_eq!(qs.len(), 8);
            for q in &qs {
                let lf =
                    parse_question(&q.text, &g, None).unwrap_or_else(|e| panic!("{}: {e}", q.text));
                assert_eq!(lf, q.logical_form, "{}", q.text);
                let a = solve(&story.text(), &q.text, &g, None).unwrap();
                assert_eq!(a.labels, q.gold_labels(), "{}\n{}", story.text(), q.text);
            }
        }
        assert!(made > 100, "{made}");
    }

    #[test]
    #[ignore]
    fn print_questions() {
        for seed in 0..4 {
            if let Some((story, qs)) = sample(seed) {
                println!("{}", story.text());
                for q in qs {
                    println!(
                        "  {} -> {:?} (depth {})",
                        q.text,
                        q.gold_labels(),
                        q.reasoning_depth
                    );
                }
            }
        }
    }
}
