//! Corpus generation, statistics and verification.
//!
//! Every record is derived from the run seed, the split name and the record
//! index alone, so records can be built in parallel and in any order and the
//! output is the same byte for byte. A sample that fails (placement, story
//! length outside the configured band, no valid questions) is redrawn from
//! the next attempt seed; the attempt number is kept in the provenance.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algebra::{closure_with, ClosureConfig, EntailedSet};
use crate::annotator::{build_scene_graph, emit_sprl};
use crate::error::{Error, Result};
use crate::grammar::{edge_key, rel_key, validate_grammar, Grammar};
use crate::model::{
    validate_scene, Annotations, DatasetRecord, EntityRef, Provenance, QType, Question,
    RelationKind, Scene, Story, Vocabulary,
};
use crate::parser::{normalized_facts, parse_question, parse_story, ParsedStory};
use crate::questions::{generate_questions, QuestionConfig};
use crate::realizer::{realize_story, RealizerConfig};
use crate::rng::{derive, derive_named};
use crate::sampler::{extract_geometric_facts, sample_scene, select_story_facts, SamplerConfig};
use crate::text;
use crate::variants::{build_variants, converse_labels, make_unseen, VariantConfig};
use crate::vocab::{Direction, VocabularyMap};
use crate::GENERATOR_VERSION;

pub const SPLITS: [&str; 4] = ["train", "dev", "test_seen", "test_unseen"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSizes {
    pub train: usize,
    pub dev: usize,
    pub test_seen: usize,
    pub test_unseen: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self {
            train: 11710,
            dev: 1878,
            test_seen: 1884,
            test_unseen: 1886,
        }
    }
}

impl SplitSizes {
    pub fn get(&self, split: &str) -> usize {
        match split {
            "train" => self.train,
            "dev" => self.dev,
            "test_seen" => self.test_seen,
            "test_unseen" => self.test_unseen,
            _ => 0,
        }
    }
}

/// Accepted story size; samples outside it are redrawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoryBounds {
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
}

impl Default for StoryBounds {
    fn default() -> Self {
        Self {
            min_sentences: 3,
            max_sentences: 22,
            min_tokens: 66,
            max_tokens: 274,
        }
    }
}

impl StoryBounds {
    pub fn accepts(&self, story: &Story) -> bool {
        (self.min_sentences..=self.max_sentences).contains(&story.sentences.len())
            && (self.min_tokens..=self.max_tokens).contains(&story.token_count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub splits: SplitSizes,
    pub story_bounds: StoryBounds,
    /// Samples tried per record before the run fails.
    pub max_attempts: u32,
    /// Grammar file; the built-in grammar when absent.
    pub grammar: Option<PathBuf>,
    /// Vocabulary file for the unseen test split; built-in when absent.
    pub unseen_vocabulary: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub closure: ClosureConfig,
    pub sampler: SamplerConfig,
    pub realizer: RealizerConfig,
    pub questions: QuestionConfig,
    pub variants: VariantConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 2021,
            splits: SplitSizes::default(),
            story_bounds: StoryBounds::default(),
            max_attempts: 200,
            grammar: None,
            unseen_vocabulary: None,
            output_dir: PathBuf::from("data"),
            closure: ClosureConfig::default(),
            sampler: SamplerConfig::default(),
            realizer: RealizerConfig::default(),
            questions: QuestionConfig::default(),
            variants: VariantConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Config(format!("{}: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Apply `path.to.field=value` assignments, the value in TOML syntax
    /// (bare words are taken as strings).
    pub fn with_overrides(&self, assignments: &[String]) -> Result<Self> {
        let mut tree = serde_json::to_value(self)?;
        for a in assignments {
            let (path, raw) = a
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {a:?} is not key=value")))?;
            let value: serde_json::Value =
                match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
                    Ok(t) => serde_json::to_value(&t["v"])?,
                    Err(_) => serde_json::Value::String(raw.to_string()),
                };
            let mut node = &mut tree;
            for key in path.trim().split('.') {
                node = node
                    .as_object_mut()
                    .and_then(|m| m.get_mut(key))
                    .ok_or_else(|| Error::Config(format!("unknown config key {path:?}")))?;
            }
            *node = value;
        }
        let cfg: Self = serde_path_to_error::deserialize(tree)
            .map_err(|e| Error::Config(format!("{}: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        let b = &self.story_bounds;
        if b.min_sentences > b.max_sentences || b.min_tokens > b.max_tokens {
            return Err(Error::Config("story_bounds: minimum above maximum".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be positive".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the configuration as JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Grammar and vocabulary shared by all records of a run.
#[derive(Debug, Clone)]
pub struct Resources {
    pub grammar: Grammar,
    pub unseen: VocabularyMap,
}

impl Resources {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let grammar = match &cfg.grammar {
            Some(p) => Grammar::load(p)?,
            None => Grammar::default_grammar(),
        };
        let violations = validate_grammar(&grammar);
        if !violations.is_empty() {
            let list: Vec<String> = violations
                .iter()
                .map(|v| format!("{}: {}", v.path, v.message))
                .collect();
            return Err(Error::Config(format!(
                "invalid grammar: {}",
                list.join("; ")
            )));
        }
        let unseen = match &cfg.unseen_vocabulary {
            Some(p) => VocabularyMap::load(p, &grammar)?,
            None => VocabularyMap::default_unseen(&grammar)?,
        };
        Ok(Self { grammar, unseen })
    }
}

pub fn record_seed(run_seed: u64, split: &str, index: u64) -> u64 {
    derive(derive_named(run_seed, split), index)
}

/// Story, questions, annotations and variants for a given scene.
pub fn build_record(
    scene: &Scene,
    cfg: &PipelineConfig,
    res: &Resources,
    seed: u64,
) -> Result<(DatasetRecord, EntailedSet)> {
    let sampler = SamplerConfig {
        seed: derive_named(seed, "facts"),
        ..cfg.sampler.clone()
    };
    let facts = select_story_facts(&extract_geometric_facts(scene, &sampler), &sampler);
    let story = realize_story(
        &facts,
        scene,
        &res.grammar,
        &cfg.realizer,
        derive_named(seed, "story"),
    )?;
    let closed = closure_with(&story.facts, &cfg.closure)?;
    let questions = generate_questions(
        &story,
        &closed,
        &res.grammar,
        &cfg.questions,
        derive_named(seed, "questions"),
    )?;
    let annotations = Annotations {
        scene_graph: build_scene_graph(&story),
        sprl: emit_sprl(&story)?,
    };
    let variants = (cfg.variants.consistency || cfg.variants.contrast).then(|| {
        build_variants(
            &questions,
            &story,
            &closed,
            &res.grammar,
            &cfg.questions,
            &cfg.variants,
            derive_named(seed, "variants"),
        )
    });
    let mut record = DatasetRecord {
        scene: scene.clone(),
        story,
        questions,
        annotations,
        variants,
        provenance: Provenance {
            seed,
            config_hash: String::new(),
            generator_version: GENERATOR_VERSION.to_string(),
            split: String::new(),
            index: 0,
            attempt: 0,
            vocabulary: Vocabulary::Seen,
        },
    };
    if cfg.variants.embed_unseen {
        let unseen = make_unseen(&record, &res.unseen)?;
        record.variants.get_or_insert_with(Default::default).unseen = Some(Box::new(unseen));
    }
    Ok((record, closed))
}

/// One record of a split, redrawing until a sample is accepted.
pub fn generate_record(
    cfg: &PipelineConfig,
    res: &Resources,
    hash: &str,
    split: &str,
    index: u64,
) -> Result<DatasetRecord> {
    let base = record_seed(cfg.seed, split, index);
    let mut last = None;
    for attempt in 0..cfg.max_attempts {
        let seed = derive(base, attempt as u64);
        let sampler = SamplerConfig {
            seed: derive_named(seed, "scene"),
            ..cfg.sampler.clone()
        };
        let result = sample_scene(&sampler)
            .map_err(Error::from)
            .and_then(|scene| build_record(&scene, cfg, res, seed));
        match result {
            Ok((mut record, _)) if cfg.story_bounds.accepts(&record.story) => {
                record.provenance = Provenance {
                    seed: base,
                    config_hash: hash.to_string(),
                    generator_version: GENERATOR_VERSION.to_string(),
                    split: split.to_string(),
                    index,
                    attempt,
                    vocabulary: Vocabulary::Seen,
                };
                if split == "test_unseen" {
                    record = make_unseen(&record, &res.unseen)?;
                }
                return Ok(record);
            }
            Ok(_) => {}
            Err(e) => {
                log::debug!("{split}[{index}] attempt {attempt}: {e}");
                last = Some(e);
            }
        }
    }
    Err(Error::Record {
        index,
        seed: base,
        source: Box::new(
            last.unwrap_or_else(|| Error::Config("no sample within story_bounds".into())),
        ),
    })
}

pub fn generate_split(
    cfg: &PipelineConfig,
    res: &Resources,
    split: &str,
    count: usize,
) -> Result<Vec<DatasetRecord>> {
    let hash = cfg.hash();
    (0..count as u64)
        .into_par_iter()
        .map(|i| generate_record(cfg, res, &hash, split, i))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub records: usize,
    pub questions: BTreeMap<String, usize>,
    pub total_questions: usize,
    pub labels: BTreeMap<String, BTreeMap<String, usize>>,
    pub consistency_items: usize,
    pub contrast_items: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub splits: BTreeMap<String, SplitSummary>,
}

pub fn summarize(records: &[DatasetRecord]) -> SplitSummary {
    let mut s = SplitSummary {
        records: records.len(),
        ..Default::default()
    };
    for q in QType::ALL {
        s.questions.insert(q.name().to_string(), 0);
    }
    for r in records {
        for q in &r.questions {
            *s.questions.entry(q.qtype.name().to_string()).or_default() += 1;
            s.total_questions += 1;
            let hist = s.labels.entry(q.qtype.name().to_string()).or_default();
            for l in q.gold_labels() {
                *hist.entry(l.clone()).or_default() += 1;
            }
        }
        if let Some(v) = &r.variants {
            s.consistency_items += v.consistency.len();
            s.contrast_items += v.contrast.len();
        }
    }
    s
}

pub fn write_jsonl(path: &Path, records: &[DatasetRecord]) -> Result<String> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut hasher = Sha256::new();
    for r in records {
        let line = serde_json::to_string(r)?;
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(hex(&hasher.finalize()))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<DatasetRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let de = &mut serde_json::Deserializer::from_str(&line);
        let record = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            line: i + 1,
            message: format!("{}: {}", e.path(), e.inner()),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Generate every split with a non-zero size into `out`, with a manifest.
pub fn generate_corpus(cfg: &PipelineConfig, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let res = Resources::load(cfg)?;
    std::fs::create_dir_all(out)?;
    let mut manifest = Manifest {
        generator_version: GENERATOR_VERSION.to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        splits: BTreeMap::new(),
    };
    for split in SPLITS {
        let n = cfg.splits.get(split);
        if n == 0 {
            continue;
        }
        log::info!("generating {n} {split} records");
        let records = generate_split(cfg, &res, split, n)?;
        let mut summary = summarize(&records);
        summary.sha256 = write_jsonl(&out.join(format!("{split}.jsonl")), &records)?;
        manifest.splits.insert(split.to_string(), summary);
    }
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(out.join("manifest.json"), json + "\n")?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl Range {
    fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        Self {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: values.iter().sum::<f64>() / values.len() as f64,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub records: usize,
    pub sentences: Range,
    pub story_tokens: Range,
    pub question_tokens: Range,
    pub questions: BTreeMap<String, usize>,
    pub labels: BTreeMap<String, BTreeMap<String, usize>>,
    pub reasoning_depth: BTreeMap<u32, usize>,
}

pub fn corpus_stats(records: &[DatasetRecord]) -> CorpusStats {
    let sentences: Vec<f64> = records
        .iter()
        .map(|r| r.story.sentences.len() as f64)
        .collect();
    let tokens: Vec<f64> = records.iter().map(|r| r.story.token_count as f64).collect();
    let qtokens: Vec<f64> = records
        .iter()
        .flat_map(|r| {
            r.questions
                .iter()
                .map(|q| text::token_count(&q.text) as f64)
        })
        .collect();
    let summary = summarize(records);
    let mut depth = BTreeMap::new();
    for q in records.iter().flat_map(|r| &r.questions) {
        *depth.entry(q.reasoning_depth).or_default() += 1;
    }
    CorpusStats {
        records: records.len(),
        sentences: Range::of(&sentences),
        story_tokens: Range::of(&tokens),
        question_tokens: Range::of(&qtokens),
        questions: summary.questions,
        labels: summary.labels,
        reasoning_depth: depth,
    }
}

/// A statistic next to the band the reference corpus puts it in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: String,
    pub value: f64,
    pub low: f64,
    pub high: f64,
}

impl Band {
    fn around(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            low: target * (1.0 - tolerance),
            high: target * (1.0 + tolerance),
        }
    }

    pub fn ok(&self) -> bool {
        (self.low..=self.high).contains(&self.value)
    }
}

/// Story and question sizes against the reference corpus.
pub fn reference_bands(stats: &CorpusStats) -> Vec<Band> {
    let range = |name: &str, value: f64, low: f64, high: f64| Band {
        name: name.to_string(),
        value,
        low,
        high,
    };
    vec![
        Band::around("mean sentences per story", stats.sentences.mean, 9.0, 0.25),
        Band::around(
            "mean tokens per story",
            stats.story_tokens.mean,
            118.0,
            0.25,
        ),
        Band::around(
            "mean tokens per question",
            stats.question_tokens.mean,
            23.0,
            0.25,
        ),
        range("fewest sentences", stats.sentences.min, 3.0, 22.0),
        range("most sentences", stats.sentences.max, 3.0, 22.0),
        range("fewest story tokens", stats.story_tokens.min, 66.0, 274.0),
        range("most story tokens", stats.story_tokens.max, 66.0, 274.0),
    ]
}

/// Outcome of one verification check over a corpus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: usize,
    pub failed: usize,
    pub examples: Vec<String>,
}

impl Check {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Default::default()
        }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.examples.len() < 5 {
                self.examples.push(what());
            }
        }
    }

    fn merge(&mut self, other: Check) {
        self.passed += other.passed;
        self.failed += other.failed;
        for e in other.examples {
            if self.examples.len() < 5 {
                self.examples.push(e);
            }
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(Check::ok)
    }

    fn merge(&mut self, other: VerifyReport) {
        for c in other.checks {
            match self.checks.iter_mut().find(|x| x.name == c.name) {
                Some(x) => x.merge(c),
                None => self.checks.push(c),
            }
        }
    }
}

/// Every entailed left/right/above/below fact between objects agrees with
/// their positions in the scene.
pub fn geometry_agrees(
    scene: &Scene,
    story: &Story,
    closed: &EntailedSet,
) -> std::result::Result<(), String> {
    for (f, _) in closed.facts() {
        let (Some(a), Some(b)) = (f.subject.as_object(), f.object.as_object()) else {
            continue;
        };
        let (Some(pa), Some(pb)) = (scene.global_position(a), scene.global_position(b)) else {
            return Err(format!("{f:?} names an object missing from the scene"));
        };
        let ok = match f.relation {
            RelationKind::Left => pa.x < pb.x,
            RelationKind::Right => pa.x > pb.x,
            RelationKind::Above => pa.y > pb.y,
            RelationKind::Below => pa.y < pb.y,
            _ => true,
        };
        if !ok {
            return Err(format!(
                "{} {} {} contradicts the scene",
                story.entities.entity_key(f.subject),
                f.relation.label(),
                story.entities.entity_key(f.object)
            ));
        }
    }
    Ok(())
}

fn indicator_ok(g: &Grammar, rel: RelationKind, words: &[String]) -> bool {
    let lower: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
    let key = match rel {
        RelationKind::TouchingEdge(e) => edge_key(e),
        _ => rel_key(rel),
    };
    g.phrases(&key).contains(&lower)
        || (rel == RelationKind::In && g.phrases("has").contains(&lower))
}

pub fn verify_record(
    record: &DatasetRecord,
    cfg: &PipelineConfig,
    res: &Resources,
) -> VerifyReport {
    let g = &res.grammar;
    let vocab = (record.provenance.vocabulary == Vocabulary::Unseen).then_some(&res.unseen);
    let mut scene_check = Check::new("scene is valid");
    let mut geometry = Check::new("closure agrees with geometry");
    let mut round_trip = Check::new("story parses back to its facts");
    let mut solve = Check::new("solver matches gold");
    let mut consistency = Check::new("consistency answers follow from pivots");
    let mut contrast = Check::new("contrast answers differ from pivots");
    let mut sprl = Check::new("spatial role spans are aligned");
    let id = format!("{} #{}", record.provenance.split, record.provenance.index);

    let violations = validate_scene(&record.scene);
    scene_check.record(violations.is_empty(), || {
        format!("{id}: {:?}", violations.first())
    });

    let sampler = SamplerConfig {
        seed: 0,
        ..cfg.sampler.clone()
    };
    let geometric = extract_geometric_facts(&record.scene, &sampler);
    let stated_ok = record.story.facts.iter().all(|f| geometric.contains(f));
    match closure_with(&record.story.facts, &cfg.closure) {
        Ok(closed) => {
            let r = geometry_agrees(&record.scene, &record.story, &closed);
            geometry.record(stated_ok && r.is_ok(), || {
                format!(
                    "{id}: {}",
                    r.err().unwrap_or_else(|| "stated fact not in scene".into())
                )
            });
        }
        Err(e) => geometry.record(false, || format!("{id}: {e}")),
    }

    let text = record.story.text();
    let parsed: Option<ParsedStory> = match parse_story(&text, g, vocab) {
        Ok(p) => {
            let same = normalized_facts(&p.facts, &p.entities)
                == normalized_facts(&record.story.facts, &record.story.entities);
            round_trip.record(same, || format!("{id}: facts differ"));
            Some(p)
        }
        Err(e) => {
            round_trip.record(false, || format!("{id}: {e}"));
            None
        }
    };

    if let Some(p) = &parsed {
        let closed = closure_with(&p.facts, &cfg.closure);
        let mut check = |q: &Question| match (&closed, parse_question(&q.text, g, vocab)) {
            (Ok(c), Ok(lf)) => match crate::answers::answer(&lf, &p.entities, c) {
                Ok(a) => solve.record(a.labels == q.gold_labels(), || {
                    format!(
                        "{id}: {} -> {:?}, gold {:?}",
                        q.text,
                        a.labels,
                        q.gold_labels()
                    )
                }),
                Err(e) => solve.record(false, || format!("{id}: {}: {e}", q.text)),
            },
            (Err(e), _) => solve.record(false, || format!("{id}: {e}")),
            (_, Err(e)) => solve.record(false, || format!("{id}: {}: {e}", q.text)),
        };
        for q in &record.questions {
            check(q);
        }
        if let Some(v) = &record.variants {
            for item in v.consistency.iter().chain(&v.contrast) {
                check(&item.question);
            }
        }
    }

    if let Some(v) = &record.variants {
        let blocks: Vec<String> = record
            .story
            .entities
            .blocks_by_name()
            .into_iter()
            .map(|b| b.name.clone())
            .collect();
        for item in &v.consistency {
            let Some(pivot) = record.questions.get(item.pivot) else {
                consistency.record(false, || format!("{id}: pivot {} missing", item.pivot));
                continue;
            };
            let expected = converse_labels(pivot.qtype, pivot.gold_labels(), &blocks);
            consistency.record(item.question.gold_labels() == expected, || {
                format!("{id}: {}", item.question.text)
            });
        }
        for item in &v.contrast {
            let differs = record
                .questions
                .get(item.pivot)
                .is_some_and(|p| p.gold_labels() != item.question.gold_labels());
            contrast.record(differs, || format!("{id}: {}", item.question.text));
        }
    }

    let mut aligned = record.annotations.sprl.len() == record.story.sentences.len();
    for (sentence, ann) in record.story.sentences.iter().zip(&record.annotations.sprl) {
        for t in &ann.triplets {
            for span in [t.trajector, t.indicator, t.landmark] {
                aligned &= span.slice(&sentence.text).is_some_and(|s| !s.is_empty());
            }
            if let Some(words) = t.indicator.slice(&sentence.text) {
                let mut tokens = text::tokenize(words);
                if let Some(v) = vocab {
                    tokens = v.map_tokens(&tokens, Direction::Backward).tokens;
                }
                aligned &= indicator_ok(g, t.relation, &tokens);
            }
            aligned &= sentence.fact_ids.contains(&t.fact_id);
        }
        for f in &sentence.fact_ids {
            aligned &= ann.triplets.iter().any(|t| t.fact_id == *f) || sentence.implied.contains(f);
        }
    }
    sprl.record(aligned, || format!("{id}: misaligned span"));

    VerifyReport {
        checks: vec![
            scene_check,
            geometry,
            round_trip,
            solve,
            consistency,
            contrast,
            sprl,
        ],
    }
}

pub fn verify_records(
    records: &[DatasetRecord],
    cfg: &PipelineConfig,
    res: &Resources,
) -> VerifyReport {
    records
        .par_iter()
        .map(|r| verify_record(r, cfg, res))
        .reduce(VerifyReport::default, |mut a, b| {
            a.merge(b);
            a
        })
}

/// Verify every split file in `dir` and, when present, recount the manifest.
pub fn verify_corpus(dir: &Path, cfg: &PipelineConfig) -> Result<VerifyReport> {
    let res = Resources::load(cfg)?;
    let mut report = VerifyReport::default();
    let manifest: Option<Manifest> = match std::fs::read_to_string(dir.join("manifest.json")) {
        Ok(s) => Some(serde_json::from_str(&s)?),
        Err(_) => None,
    };
    let mut recount = Check::new("manifest matches files");
    for split in SPLITS {
        let path = dir.join(format!("{split}.jsonl"));
        if !path.exists() {
            continue;
        }
        let records = read_jsonl(&path)?;
        report.merge(verify_records(&records, cfg, &res));
        if let Some(m) = &manifest {
            let mut s = summarize(&records);
            let expected = m.splits.get(split);
            s.sha256 = expected.map(|e| e.sha256.clone()).unwrap_or_default();
            recount.record(expected == Some(&s), || format!("{split}: counts differ"));
        }
    }
    if manifest.is_some() {
        report.checks.push(recount);
    }
    Ok(report)
}

/// Records whose story mentions an entity that is not in the scene.
pub fn dangling_entities(record: &DatasetRecord) -> Vec<EntityRef> {
    record
        .story
        .described_entities
        .iter()
        .copied()
        .filter(|e| match e {
            EntityRef::Object(o) => record.scene.object(*o).is_none(),
            EntityRef::Block(b) => record.scene.block(*b).is_none(),
        })
        .collect()
}
