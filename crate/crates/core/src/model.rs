//! Shared domain types: scenes, facts, stories, questions and dataset records.
//!
//! Everything here is plain data. The only logic is construction helpers and
//! [`validate_scene`], which reports invariant breaches instead of failing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::annotator::{SceneGraph, SpRLAnnotation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Square,
    Circle,
    Triangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Yellow,
    Blue,
    Black,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Size {
    Small,
    Medium,
    Big,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Square, Shape::Circle, Shape::Triangle];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Square => "square",
            Shape::Circle => "circle",
            Shape::Triangle => "triangle",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }
}

impl Color {
    pub const ALL: [Color; 3] = [Color::Yellow, Color::Blue, Color::Black];

    pub fn name(self) -> &'static str {
        match self {
            Color::Yellow => "yellow",
            Color::Blue => "blue",
            Color::Black => "black",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }
}

impl Size {
    pub const ALL: [Size; 3] = [Size::Small, Size::Medium, Size::Big];

    pub fn name(self) -> &'static str {
        match self {
            Size::Small => "small",
            Size::Medium => "medium",
            Size::Big => "big",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }
}

/// Visual attributes of an object. The shape is mandatory, color and size may
/// be left unspecified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Attribute {
    pub shape: Shape,
    #[serde(default)]
    pub color: Option<Color>,
    #[serde(default)]
    pub size: Option<Size>,
}

impl Attribute {
    pub fn new(shape: Shape, color: Option<Color>, size: Option<Size>) -> Self {
        Self { shape, color, size }
    }

    /// Canonical English name, e.g. `small yellow square`.
    pub fn phrase(&self) -> String {
        let mut words = Vec::with_capacity(3);
        if let Some(size) = self.size {
            words.push(size.name());
        }
        if let Some(color) = self.color {
            words.push(color.name());
        }
        words.push(self.shape.name());
        words.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.0)
    }
}

/// Reference to either an object or a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityRef {
    Object(ObjectId),
    Block(BlockId),
}

impl EntityRef {
    pub fn object(id: u32) -> Self {
        EntityRef::Object(ObjectId(id))
    }

    pub fn block(id: u32) -> Self {
        EntityRef::Block(BlockId(id))
    }

    pub fn as_object(self) -> Option<ObjectId> {
        match self {
            EntityRef::Object(o) => Some(o),
            EntityRef::Block(_) => None,
        }
    }

    pub fn as_block(self) -> Option<BlockId> {
        match self {
            EntityRef::Block(b) => Some(b),
            EntityRef::Object(_) => None,
        }
    }

    pub fn is_block(self) -> bool {
        matches!(self, EntityRef::Block(_))
    }
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityRef::Object(o) => write!(f, "o{}", o.0),
            EntityRef::Block(b) => write!(f, "b{}", b.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Top,
    Bottom,
    Left,
    Right,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Top, Edge::Bottom, Edge::Left, Edge::Right];

    pub fn name(self) -> &'static str {
        match self {
            Edge::Top => "top",
            Edge::Bottom => "bottom",
            Edge::Left => "left",
            Edge::Right => "right",
        }
    }
}

/// Qualitative spatial relation between two entities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationKind {
    Left,
    Right,
    Above,
    Below,
    NearTo,
    FarFrom,
    Touching,
    In,
    TouchingEdge(Edge),
}

impl RelationKind {
    /// Every kind in index order.
    pub const ALL: [RelationKind; 12] = [
        RelationKind::Left,
        RelationKind::Right,
        RelationKind::Above,
        RelationKind::Below,
        RelationKind::NearTo,
        RelationKind::FarFrom,
        RelationKind::Touching,
        RelationKind::In,
        RelationKind::TouchingEdge(Edge::Top),
        RelationKind::TouchingEdge(Edge::Bottom),
        RelationKind::TouchingEdge(Edge::Left),
        RelationKind::TouchingEdge(Edge::Right),
    ];

    /// The relations that may be asked about between two objects, in the
    /// candidate order used by find-relation questions.
    pub const OBJECT_RELATIONS: [RelationKind; 7] = [
        RelationKind::Left,
        RelationKind::Right,
        RelationKind::Below,
        RelationKind::Above,
        RelationKind::Touching,
        RelationKind::FarFrom,
        RelationKind::NearTo,
    ];

    pub fn index(self) -> usize {
        match self {
            RelationKind::Left => 0,
            RelationKind::Right => 1,
            RelationKind::Above => 2,
            RelationKind::Below => 3,
            RelationKind::NearTo => 4,
            RelationKind::FarFrom => 5,
            RelationKind::Touching => 6,
            RelationKind::In => 7,
            RelationKind::TouchingEdge(Edge::Top) => 8,
            RelationKind::TouchingEdge(Edge::Bottom) => 9,
            RelationKind::TouchingEdge(Edge::Left) => 10,
            RelationKind::TouchingEdge(Edge::Right) => 11,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Object-object converse. Symmetric kinds are their own converse; `In`
    /// and `TouchingEdge` have none.
    pub fn converse(self) -> Option<RelationKind> {
        use RelationKind::*;
        match self {
            Left => Some(Right),
            Right => Some(Left),
            Above => Some(Below),
            Below => Some(Above),
            NearTo | FarFrom | Touching => Some(self),
            In | TouchingEdge(_) => None,
        }
    }

    pub fn is_symmetric(self) -> bool {
        matches!(
            self,
            RelationKind::NearTo | RelationKind::FarFrom | RelationKind::Touching
        )
    }

    pub fn is_directional(self) -> bool {
        matches!(
            self,
            RelationKind::Left | RelationKind::Right | RelationKind::Above | RelationKind::Below
        )
    }

    pub fn is_transitive(self) -> bool {
        self.is_directional()
    }

    /// Mutual exclusion table: {Left,Right}, {Above,Below}, {NearTo,FarFrom},
    /// {Touching,FarFrom}.
    pub fn excludes(self, other: RelationKind) -> bool {
        use RelationKind::*;
        matches!(
            (self, other),
            (Left, Right)
                | (Right, Left)
                | (Above, Below)
                | (Below, Above)
                | (NearTo, FarFrom)
                | (FarFrom, NearTo)
                | (Touching, FarFrom)
                | (FarFrom, Touching)
        )
    }

    /// Answer label used by find-relation questions.
    pub fn label(self) -> &'static str {
        use RelationKind::*;
        match self {
            Left => "Left",
            Right => "Right",
            Above => "Above",
            Below => "Below",
            NearTo => "Near to",
            FarFrom => "Far from",
            Touching => "Touching",
            In => "In",
            TouchingEdge(Edge::Top) => "Touching top edge",
            TouchingEdge(Edge::Bottom) => "Touching bottom edge",
            TouchingEdge(Edge::Left) => "Touching left edge",
            TouchingEdge(Edge::Right) => "Touching right edge",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.label() == label)
    }

    /// Key used by the grammar lexicon, e.g. `left` or `edge.bottom`.
    pub fn lexicon_key(self) -> String {
        use RelationKind::*;
        match self {
            Left => "left".into(),
            Right => "right".into(),
            Above => "above".into(),
            Below => "below".into(),
            NearTo => "near".into(),
            FarFrom => "far".into(),
            Touching => "touching".into(),
            In => "in".into(),
            TouchingEdge(e) => format!("edge.{}", e.name()),
        }
    }

    pub fn from_lexicon_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.lexicon_key() == key)
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

/// A subject-relation-object triple with polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Fact {
    pub subject: EntityRef,
    pub relation: RelationKind,
    pub object: EntityRef,
    pub polarity: Polarity,
}

impl Fact {
    pub fn new(subject: EntityRef, relation: RelationKind, object: EntityRef) -> Self {
        Self {
            subject,
            relation,
            object,
            polarity: Polarity::Positive,
        }
    }

    /// Exclusion fact: `object` is not in `block`.
    pub fn not_in(object: EntityRef, block: EntityRef) -> Self {
        Self {
            subject: object,
            relation: RelationKind::In,
            object: block,
            polarity: Polarity::Negative,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.polarity == Polarity::Positive
    }

    /// The same information stated from the other entity, when a converse
    /// exists.
    pub fn converse(&self) -> Option<Fact> {
        if !self.is_positive() {
            return None;
        }
        self.relation
            .converse()
            .map(|r| Fact::new(self.object, r, self.subject))
    }

    /// Describes the first broken invariant, if any.
    pub fn check(&self) -> Option<String> {
        if self.subject == self.object {
            return Some(format!("fact relates {} to itself", self.subject));
        }
        if self.polarity == Polarity::Negative && self.relation != RelationKind::In {
            return Some(format!(
                "negative polarity is only allowed with In, found {}",
                self.relation
            ));
        }
        None
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let neg = if self.is_positive() { "" } else { "not " };
        write!(
            f,
            "{}{}({}, {})",
            neg, self.relation, self.subject, self.object
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub width: f64,
    pub height: f64,
}

/// An object placed inside a block. `position` is the center in block-local
/// units with the y axis pointing up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialObject {
    pub id: ObjectId,
    pub attrs: Attribute,
    pub block: BlockId,
    pub position: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    pub name: String,
    pub bounds: Bounds,
    /// Lower-left corner of the block in scene coordinates.
    pub origin: Point,
    pub objects: Vec<ObjectId>,
}

/// Ground truth for one story: blocks, objects and the block arrangement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub blocks: Vec<Block>,
    pub objects: Vec<SpatialObject>,
    /// Directional facts between blocks, at most one per block pair.
    pub block_relations: Vec<Fact>,
}

impl Scene {
    pub fn block(&self, id: BlockId) -> Option<&Block> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn object(&self, id: ObjectId) -> Option<&SpatialObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Center of an object in scene coordinates.
    pub fn global_position(&self, id: ObjectId) -> Option<Point> {
        let obj = self.object(id)?;
        let block = self.block(obj.block)?;
        Some(Point {
            x: block.origin.x + obj.position.x,
            y: block.origin.y + obj.position.y,
        })
    }
}

/// A single invariant breach found by [`validate_scene`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

const GEOMETRY_TOLERANCE: f64 = 1e-6;

pub fn validate_scene(scene: &Scene) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut names = BTreeSet::new();
    let mut block_ids = BTreeSet::new();
    for (i, block) in scene.blocks.iter().enumerate() {
        if !names.insert(block.name.as_str()) {
            out.push(Violation::new(
                format!("blocks[{i}].name"),
                format!("duplicate block name {:?}", block.name),
            ));
        }
        if !block_ids.insert(block.id) {
            out.push(Violation::new(
                format!("blocks[{i}].id"),
                format!("duplicate block id {}", block.id.0),
            ));
        }
        if !(block.bounds.width > 0.0 && block.bounds.height > 0.0) {
            out.push(Violation::new(
                format!("blocks[{i}].bounds"),
                "block bounds must be positive",
            ));
        }
    }

    let mut object_ids = BTreeSet::new();
    for (i, obj) in scene.objects.iter().enumerate() {
        if !object_ids.insert(obj.id) {
            out.push(Violation::new(
                format!("objects[{i}].id"),
                format!("duplicate object id {}", obj.id.0),
            ));
        }
        if obj.radius.is_nan() || obj.radius <= 0.0 {
            out.push(Violation::new(
                format!("objects[{i}].radius"),
                "radius must be positive",
            ));
        }
        let Some(block) = scene.block(obj.block) else {
            out.push(Violation::new(
                format!("objects[{i}].block"),
                format!("unknown block id {}", obj.block.0),
            ));
            continue;
        };
        let p = obj.position;
        let r = obj.radius;
        if p.x - r < -GEOMETRY_TOLERANCE
            || p.y - r < -GEOMETRY_TOLERANCE
            || p.x + r > block.bounds.width + GEOMETRY_TOLERANCE
            || p.y + r > block.bounds.height + GEOMETRY_TOLERANCE
        {
            out.push(Violation::new(
                format!("objects[{i}].position"),
                format!("object {} extends outside block {}", obj.id, block.name),
            ));
        }
        let owners = scene
            .blocks
            .iter()
            .filter(|b| b.objects.contains(&obj.id))
            .count();
        if owners != 1 || !block.objects.contains(&obj.id) {
            out.push(Violation::new(
                format!("objects[{i}].block"),
                format!(
                    "object {} must be listed by exactly its own block (listed by {owners})",
                    obj.id
                ),
            ));
        }
    }
    for (i, block) in scene.blocks.iter().enumerate() {
        for (j, id) in block.objects.iter().enumerate() {
            if !object_ids.contains(id) {
                out.push(Violation::new(
                    format!("blocks[{i}].objects[{j}]"),
                    format!("unknown object id {}", id.0),
                ));
            }
        }
    }

    let mut pairs = BTreeMap::new();
    for (i, fact) in scene.block_relations.iter().enumerate() {
        let path = format!("block_relations[{i}]");
        if let Some(msg) = fact.check() {
            out.push(Violation::new(path, msg));
            continue;
        }
        let (Some(a), Some(b)) = (fact.subject.as_block(), fact.object.as_block()) else {
            out.push(Violation::new(
                path,
                "block relation must relate two blocks",
            ));
            continue;
        };
        if !block_ids.contains(&a) || !block_ids.contains(&b) {
            out.push(Violation::new(
                path,
                "block relation names an unknown block",
            ));
            continue;
        }
        if !fact.relation.is_directional() {
            out.push(Violation::new(
                path,
                format!(
                    "block relation must be directional, found {}",
                    fact.relation
                ),
            ));
            continue;
        }
        let key = if a < b { (a, b) } else { (b, a) };
        if pairs.insert(key, i).is_some() {
            out.push(Violation::new(
                path,
                "at most one directional relation per block pair",
            ));
        }
    }
    out
}

/// A described object as the story presents it: attributes and the ordinal
/// that disambiguates identical objects ("the yellow square number two").
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryObject {
    pub id: ObjectId,
    pub attrs: Attribute,
    #[serde(default)]
    pub block: Option<BlockId>,
    #[serde(default)]
    pub ordinal: Option<u32>,
}

impl StoryObject {
    /// Full story name, e.g. `medium yellow square number 2`.
    pub fn full_name(&self) -> String {
        match self.ordinal {
            Some(n) => format!("{} number {n}", self.attrs.phrase()),
            None => self.attrs.phrase(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryBlock {
    pub id: BlockId,
    pub name: String,
}

/// The entities a story talks about. Questions are grounded against this
/// table, never against the scene.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityTable {
    pub objects: Vec<StoryObject>,
    pub blocks: Vec<StoryBlock>,
}

impl EntityTable {
    pub fn object(&self, id: ObjectId) -> Option<&StoryObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn block(&self, id: BlockId) -> Option<&StoryBlock> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn block_by_name(&self, name: &str) -> Option<&StoryBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn block_name(&self, id: BlockId) -> Option<&str> {
        self.block(id).map(|b| b.name.as_str())
    }

    /// Blocks sorted by name.
    pub fn blocks_by_name(&self) -> Vec<&StoryBlock> {
        let mut v: Vec<_> = self.blocks.iter().collect();
        v.sort_by(|a, b| a.name.cmp(&b.name));
        v
    }

    /// Stable key of an entity, independent of internal ids. Two tables that
    /// describe the same story yield the same keys.
    pub fn entity_key(&self, e: EntityRef) -> String {
        match e {
            EntityRef::Block(b) => format!("block {}", self.block_name(b).unwrap_or("?")),
            EntityRef::Object(o) => match self.object(o) {
                Some(obj) => {
                    let block = obj.block.and_then(|b| self.block_name(b)).unwrap_or("-");
                    format!("{}/{}", block, obj.full_name())
                }
                None => format!("?{o}"),
            },
        }
    }
}

/// Character offsets `[start, end)` into a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn slice<'a>(&self, text: &'a str) -> Option<&'a str> {
        text.get(self.start..self.end)
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Where one relation is verbalized inside a sentence. `relation` is the
/// relation as written, which may be the converse of the aligned fact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSpan {
    pub fact_id: usize,
    pub relation: RelationKind,
    pub trajector: Span,
    pub indicator: Span,
    pub landmark: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub fact_ids: Vec<usize>,
    pub spans: Vec<RelationSpan>,
    /// Facts conveyed by context rather than by an explicit indicator, such
    /// as membership of an object introduced inside a block's description.
    #[serde(default)]
    pub implied: Vec<usize>,
}

/// A generated story. `facts` holds the stated facts; sentences refer to them
/// by index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub facts: Vec<Fact>,
    pub sentences: Vec<Sentence>,
    pub described_entities: BTreeSet<EntityRef>,
    pub entities: EntityTable,
    pub token_count: usize,
}

impl Story {
    pub fn text(&self) -> String {
        self.sentences
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QType {
    FR,
    FB,
    CO,
    YN,
}

impl QType {
    pub const ALL: [QType; 4] = [QType::FR, QType::FB, QType::CO, QType::YN];

    pub fn name(self) -> &'static str {
        match self {
            QType::FR => "FR",
            QType::FB => "FB",
            QType::CO => "CO",
            QType::YN => "YN",
        }
    }
}

impl fmt::Display for QType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// General nouns that stand in for any shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypernym {
    Object,
    Shape,
    Thing,
}

impl Hypernym {
    pub const ALL: [Hypernym; 3] = [Hypernym::Object, Hypernym::Shape, Hypernym::Thing];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Number {
    Singular,
    Plural,
}

/// Determiner of a mention; carries both definiteness and quantification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Determiner {
    /// Definite singular: must pick out exactly one entity.
    The,
    /// Indefinite: existential over the matches.
    A,
    /// Plural existential ("any blue circles").
    Any,
    /// Plural universal ("all triangles").
    All,
    /// No determiner ("black object").
    Bare,
}

impl Determiner {
    pub fn is_definite(self) -> bool {
        self == Determiner::The
    }
}

/// Relation clause attached to a mention: "which is above the black triangle".
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NestedClause {
    pub relation: RelationKind,
    pub inner: EntityDescriptor,
}

/// A mention of one or more objects, as used in questions and stories.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityDescriptor {
    #[serde(default)]
    pub shape: Option<Shape>,
    #[serde(default)]
    pub color: Option<Color>,
    #[serde(default)]
    pub size: Option<Size>,
    /// Surface noun used when no shape is given.
    #[serde(default)]
    pub hypernym: Option<Hypernym>,
    #[serde(default)]
    pub ordinal: Option<u32>,
    #[serde(default)]
    pub nested: Option<Box<NestedClause>>,
    pub number: Number,
    pub determiner: Determiner,
}

impl EntityDescriptor {
    pub fn new(determiner: Determiner) -> Self {
        let number = match determiner {
            Determiner::Any | Determiner::All => Number::Plural,
            _ => Number::Singular,
        };
        Self {
            shape: None,
            color: None,
            size: None,
            hypernym: None,
            ordinal: None,
            nested: None,
            number,
            determiner,
        }
    }

    /// Descriptor naming the attributes of `attrs` selected by the flags.
    pub fn from_attrs(
        attrs: &Attribute,
        size: bool,
        color: bool,
        shape: bool,
        determiner: Determiner,
    ) -> Self {
        let mut d = Self::new(determiner);
        if size {
            d.size = attrs.size;
        }
        if color {
            d.color = attrs.color;
        }
        if shape {
            d.shape = Some(attrs.shape);
        } else {
            d.hypernym = Some(Hypernym::Object);
        }
        d
    }

    pub fn with_determiner(mut self, determiner: Determiner) -> Self {
        self.determiner = determiner;
        self.number = match determiner {
            Determiner::Any | Determiner::All => Number::Plural,
            _ => Number::Singular,
        };
        self
    }

    pub fn with_nested(mut self, relation: RelationKind, inner: EntityDescriptor) -> Self {
        self.nested = Some(Box::new(NestedClause { relation, inner }));
        self
    }

    /// Nesting depth: 0 for a plain mention.
    pub fn depth(&self) -> usize {
        self.nested.as_ref().map_or(0, |n| 1 + n.inner.depth())
    }

    /// Whether the attribute constraints (ignoring nesting) accept `obj`.
    pub fn matches_attributes(&self, obj: &StoryObject) -> bool {
        if let Some(ord) = self.ordinal {
            // an ordinal names one member of an identical group
            if obj.ordinal != Some(ord) {
                return false;
            }
        }
        self.shape.is_none_or(|s| s == obj.attrs.shape)
            && self.color.is_none_or(|c| Some(c) == obj.attrs.color)
            && self.size.is_none_or(|s| Some(s) == obj.attrs.size)
    }

    /// Whether the descriptor spells out exactly the object's full name.
    pub fn names_exactly(&self, obj: &StoryObject) -> bool {
        self.nested.is_none()
            && self.shape == Some(obj.attrs.shape)
            && self.color == obj.attrs.color
            && self.size == obj.attrs.size
            && self.ordinal == obj.ordinal
    }
}

/// Variant of the choose-object template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChoiceForm {
    /// "Which object is R the X? the A or the B?"
    Which,
    /// "What is R the X? a A or a B?"
    What,
}

/// Structured meaning of a question.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogicalForm {
    FindRelation {
        first: EntityDescriptor,
        second: EntityDescriptor,
    },
    FindBlock {
        target: EntityDescriptor,
        negated: bool,
    },
    ChooseObject {
        relation: RelationKind,
        anchor: EntityDescriptor,
        candidates: [EntityDescriptor; 2],
        form: ChoiceForm,
    },
    YesNo {
        subject: EntityDescriptor,
        relation: RelationKind,
        object: EntityDescriptor,
    },
}

impl LogicalForm {
    pub fn qtype(&self) -> QType {
        match self {
            LogicalForm::FindRelation { .. } => QType::FR,
            LogicalForm::FindBlock { .. } => QType::FB,
            LogicalForm::ChooseObject { .. } => QType::CO,
            LogicalForm::YesNo { .. } => QType::YN,
        }
    }
}

/// A fact supporting an answer, with its derivation depth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Justification {
    pub fact: Fact,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSet {
    pub labels: Vec<String>,
    pub justification: Vec<Justification>,
    /// Set when a universal quantifier ranged over an empty set.
    #[serde(default)]
    pub vacuous: bool,
}

impl AnswerSet {
    pub fn labels(labels: Vec<String>) -> Self {
        Self {
            labels,
            justification: Vec::new(),
            vacuous: false,
        }
    }

    pub fn depth(&self) -> u32 {
        self.justification
            .iter()
            .map(|j| j.depth)
            .max()
            .unwrap_or(0)
    }
}

pub mod labels {
    pub const DK: &str = "DK";
    pub const YES: &str = "Yes";
    pub const NO: &str = "No";
    pub const NONE: &str = "none";
    pub const OBJECT1: &str = "object1";
    pub const OBJECT2: &str = "object2";
    pub const BOTH: &str = "both";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub qtype: QType,
    pub text: String,
    pub logical_form: LogicalForm,
    pub candidates: Vec<String>,
    pub gold: Option<AnswerSet>,
    pub reasoning_depth: u32,
}

impl Question {
    pub fn gold_labels(&self) -> &[String] {
        self.gold.as_ref().map_or(&[], |g| g.labels.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotations {
    pub scene_graph: SceneGraph,
    pub sprl: Vec<SpRLAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantItem {
    /// Index of the pivot question in the record.
    pub pivot: usize,
    pub question: Question,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Variants {
    pub unseen: Option<Box<DatasetRecord>>,
    pub consistency: Vec<VariantItem>,
    pub contrast: Vec<VariantItem>,
}

/// Surface vocabulary a record is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vocabulary {
    #[default]
    Seen,
    Unseen,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub generator_version: String,
    pub split: String,
    pub index: u64,
    /// Number of rejected samples before this record was accepted.
    pub attempt: u32,
    pub vocabulary: Vocabulary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub scene: Scene,
    pub story: Story,
    pub questions: Vec<Question>,
    pub annotations: Annotations,
    pub variants: Option<Variants>,
    pub provenance: Provenance,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(id: u32, name: &str, objects: &[u32]) -> Block {
        Block {
            id: BlockId(id),
            name: name.into(),
            bounds: Bounds {
                width: 1.0,
                height: 1.0,
            },
            origin: Point {
                x: id as f64 * 1.2,
                y: 0.0,
            },
            objects: objects.iter().map(|&o| ObjectId(o)).collect(),
        }
    }

    fn object(id: u32, block: u32, x: f64, y: f64, r: f64) -> SpatialObject {
        SpatialObject {
            id: ObjectId(id),
            attrs: Attribute::new(Shape::Circle, Some(Color::Blue), Some(Size::Big)),
            block: BlockId(block),
            position: Point { x, y },
            radius: r,
        }
    }

    fn three_blocks() -> Scene {
        Scene {
            blocks: vec![
                block(0, "A", &[0]),
                block(1, "B", &[1]),
                block(2, "C", &[2]),
            ],
            objects: vec![
                object(0, 0, 0.5, 0.5, 0.1),
                object(1, 1, 0.2, 0.3, 0.1),
                object(2, 2, 0.8, 0.8, 0.1),
            ],
            block_relations: vec![
                Fact::new(EntityRef::block(0), RelationKind::Left, EntityRef::block(1)),
                Fact::new(EntityRef::block(1), RelationKind::Left, EntityRef::block(2)),
            ],
        }
    }

    #[test]
    fn well_formed_scene_has_no_violations() {
        assert_eq!(validate_scene(&three_blocks()), vec![]);
    }

    #[test]
    fn object_crossing_block_boundary_is_reported() {
        let mut scene = three_blocks();
        scene.objects[1].position.x = 0.95;
        let v = validate_scene(&scene);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].path, "objects[1].position");
    }

    #[test]
    fn duplicate_block_name_is_reported() {
        let mut scene = three_blocks();
        scene.blocks[2].name = "A".into();
        let v = validate_scene(&scene);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].message.contains("duplicate block name"));
    }

    #[test]
    fn converse_is_an_involution() {
        for r in RelationKind::ALL {
            if let Some(c) = r.converse() {
                assert_eq!(c.converse(), Some(r));
            }
        }
        assert_eq!(RelationKind::In.converse(), None);
        assert_eq!(RelationKind::TouchingEdge(Edge::Top).converse(), None);
    }

    #[test]
    fn exclusion_table_is_symmetric() {
        for a in RelationKind::ALL {
            for b in RelationKind::ALL {
                assert_eq!(a.excludes(b), b.excludes(a), "{a} vs {b}");
            }
        }
        assert!(RelationKind::Touching.excludes(RelationKind::FarFrom));
        assert!(!RelationKind::Touching.excludes(RelationKind::NearTo));
    }

    #[test]
    fn transitive_kinds_are_exactly_the_directions() {
        let t: Vec<_> = RelationKind::ALL
            .into_iter()
            .filter(|r| r.is_transitive())
            .collect();
        assert_eq!(
            t,
            vec![
                RelationKind::Left,
                RelationKind::Right,
                RelationKind::Above,
                RelationKind::Below
            ]
        );
    }

    #[test]
    fn fact_invariants() {
        let a = EntityRef::object(0);
        let b = EntityRef::block(0);
        assert!(Fact::new(a, RelationKind::Left, a).check().is_some());
        assert!(Fact::not_in(a, b).check().is_none());
        let mut bad = Fact::new(a, RelationKind::Left, EntityRef::object(1));
        bad.polarity = Polarity::Negative;
        assert!(bad.check().is_some());
    }

    #[test]
    fn relation_index_round_trips() {
        for r in RelationKind::ALL {
            assert_eq!(RelationKind::from_index(r.index()), Some(r));
            assert_eq!(RelationKind::from_lexicon_key(&r.lexicon_key()), Some(r));
        }
    }
}
