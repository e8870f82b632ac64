//! Scene synthesis, geometric fact extraction and story fact selection.
//!
//! Blocks are unit squares laid out on a grid of at most 2×2 cells, so every
//! pair of blocks shares a row, a column or a diagonal; the arrangement
//! decides the one directional relation stated between them. Objects are
//! discs placed by rejection sampling inside their block, optionally tangent
//! to another object or to a block border.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SamplerError;
use crate::model::{
    validate_scene, Attribute, Block, BlockId, Bounds, Color, Edge, EntityRef, Fact, ObjectId,
    Point, RelationKind, Scene, Shape, Size, SpatialObject,
};
use crate::rng::{derive_named, rng, Rng as StdRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: u32,
    pub max: u32,
}

impl CountRange {
    pub fn new(min: u32, max: u32) -> Self {
        Self { min, max }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.random_range(self.min..=self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub block_count: CountRange,
    pub objects_per_block: CountRange,
    pub shapes: Vec<Shape>,
    pub colors: Vec<Color>,
    pub sizes: Vec<Size>,
    /// Chance that an object has no color.
    pub color_omit_probability: f64,
    /// Chance that an object has no size.
    pub size_omit_probability: f64,
    /// Chance that an object copies the attributes of another object in its
    /// block, forming a group of identical objects.
    pub group_probability: f64,
    pub block_size: f64,
    pub block_gap: f64,
    pub radius_small: f64,
    pub radius_medium: f64,
    pub radius_big: f64,
    /// Gap between extents up to which two objects touch; also used for
    /// block borders. Absolute units.
    pub touch_epsilon: f64,
    /// Center distance, as a fraction of block width, up to which objects
    /// are near to each other.
    pub near_ratio: f64,
    /// Center distance, as a fraction of block width, from which objects are
    /// far from each other.
    pub far_ratio: f64,
    /// Minimum center offset, as a fraction of block width, for left/right
    /// and above/below.
    pub margin: f64,
    pub touch_probability: f64,
    pub edge_probability: f64,
    /// Chance that a block, an object or an optional fact is described.
    pub describe_fraction: f64,
    /// Objects always described, when the scene has that many.
    pub min_described_objects: usize,
    pub placement_tries: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            block_count: CountRange::new(2, 3),
            objects_per_block: CountRange::new(2, 4),
            shapes: Shape::ALL.to_vec(),
            colors: Color::ALL.to_vec(),
            sizes: Size::ALL.to_vec(),
            color_omit_probability: 0.15,
            size_omit_probability: 0.25,
            group_probability: 0.15,
            block_size: 1.0,
            block_gap: 0.2,
            radius_small: 0.06,
            radius_medium: 0.09,
            radius_big: 0.12,
            touch_epsilon: 0.005,
            near_ratio: 0.3,
            far_ratio: 0.6,
            margin: 0.05,
            touch_probability: 0.2,
            edge_probability: 0.15,
            describe_fraction: 0.5,
            min_described_objects: 6,
            placement_tries: 1000,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidConfig(m.to_string()));
        if self.block_count.min == 0 || self.block_count.min > self.block_count.max {
            return bad("block_count must be a non-empty range starting at 1 or more");
        }
        if self.block_count.max > 4 {
            return bad("at most 4 blocks fit the 2x2 grid");
        }
        if self.objects_per_block.min == 0
            || self.objects_per_block.min > self.objects_per_block.max
        {
            return bad("objects_per_block must be a non-empty range starting at 1 or more");
        }
        if self.shapes.is_empty() || self.colors.is_empty() || self.sizes.is_empty() {
            return bad("attribute vocabularies must be non-empty");
        }
        if !(0.0 < self.near_ratio && self.near_ratio < self.far_ratio) {
            return bad("need 0 < near_ratio < far_ratio");
        }
        if !(self.describe_fraction > 0.0 && self.describe_fraction <= 1.0) {
            return bad("describe_fraction must lie in (0, 1]");
        }
        for p in [
            self.color_omit_probability,
            self.size_omit_probability,
            self.group_probability,
            self.touch_probability,
            self.edge_probability,
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        let r = self
            .radius_small
            .max(self.radius_medium)
            .max(self.radius_big);
        if self.radius_small <= 0.0 || self.radius_medium <= 0.0 || r * 2.0 >= self.block_size {
            return bad("radii must be positive and fit inside a block");
        }
        if self.placement_tries == 0 {
            return bad("placement_tries must be positive");
        }
        Ok(())
    }

    pub fn radius(&self, size: Option<Size>) -> f64 {
        match size {
            Some(Size::Small) => self.radius_small,
            Some(Size::Big) => self.radius_big,
            Some(Size::Medium) | None => self.radius_medium,
        }
    }
}

pub fn block_name(i: usize) -> String {
    char::from(b'A' + i as u8).to_string()
}

fn round4(v: f64) -> f64 {
    (v * 10_000.0).round() / 10_000.0
}

fn gap(a: &SpatialObject, b: &SpatialObject) -> f64 {
    let dx = a.position.x - b.position.x;
    let dy = a.position.y - b.position.y;
    (dx * dx + dy * dy).sqrt() - a.radius - b.radius
}

fn center_distance(a: &SpatialObject, b: &SpatialObject) -> f64 {
    let dx = a.position.x - b.position.x;
    let dy = a.position.y - b.position.y;
    (dx * dx + dy * dy).sqrt()
}

pub fn sample_scene(cfg: &SamplerConfig) -> Result<Scene, SamplerError> {
    cfg.validate()?;
    let mut rng = rng(derive_named(cfg.seed, "scene"));
    let n_blocks = cfg.block_count.sample(&mut rng) as usize;

    let mut cells: Vec<(usize, usize)> = vec![(0, 0), (0, 1), (1, 0), (1, 1)];
    cells.shuffle(&mut rng);
    cells.truncate(n_blocks);
    // names follow reading order so "block A" tends to sit top-left
    cells.sort();
    if rng.random_bool(0.5) {
        cells.shuffle(&mut rng);
    }

    let step = cfg.block_size + cfg.block_gap;
    let mut blocks: Vec<Block> = cells
        .iter()
        .enumerate()
        .map(|(i, &(row, col))| Block {
            id: BlockId(i as u32),
            name: block_name(i),
            bounds: Bounds {
                width: cfg.block_size,
                height: cfg.block_size,
            },
            origin: Point {
                x: col as f64 * step,
                y: (1 - row) as f64 * step,
            },
            objects: Vec::new(),
        })
        .collect();

    let mut block_relations = Vec::new();
    for i in 0..n_blocks {
        for j in i + 1..n_blocks {
            let (ri, ci) = cells[i];
            let (rj, cj) = cells[j];
            let horizontal = if ri == rj {
                true
            } else if ci == cj {
                false
            } else {
                rng.random_bool(0.5)
            };
            let rel = if horizontal {
                if ci < cj {
                    RelationKind::Left
                } else {
                    RelationKind::Right
                }
            } else if ri < rj {
                RelationKind::Above
            } else {
                RelationKind::Below
            };
            block_relations.push(Fact::new(
                EntityRef::block(i as u32),
                rel,
                EntityRef::block(j as u32),
            ));
        }
    }

    let mut objects: Vec<SpatialObject> = Vec::new();
    for block in blocks.iter_mut() {
        let count = cfg.objects_per_block.sample(&mut rng);
        let mut placed: Vec<SpatialObject> = Vec::new();
        for _ in 0..count {
            let id = ObjectId(objects.len() as u32 + placed.len() as u32);
            let attrs = if !placed.is_empty() && rng.random_bool(cfg.group_probability) {
                placed.choose(&mut rng).unwrap().attrs
            } else {
                let mut attrs = random_attrs(cfg, &mut rng);
                // a name that also fits another object could never be
                // referred to on its own
                for _ in 0..cfg.placement_tries {
                    let clash = objects
                        .iter()
                        .chain(&placed)
                        .any(|o| names_overlap(&attrs, &o.attrs));
                    if !clash {
                        break;
                    }
                    attrs = random_attrs(cfg, &mut rng);
                }
                attrs
            };
            let radius = cfg.radius(attrs.size);
            let position = place(cfg, block, &placed, radius, &mut rng).ok_or_else(|| {
                SamplerError::PlacementFailure {
                    block: block.name.clone(),
                    object: id.0,
                    tries: cfg.placement_tries,
                }
            })?;
            placed.push(SpatialObject {
                id,
                attrs,
                block: block.id,
                position,
                radius,
            });
        }
        block.objects = placed.iter().map(|o| o.id).collect();
        objects.extend(placed);
    }

    let scene = Scene {
        blocks,
        objects,
        block_relations,
    };
    debug_assert!(validate_scene(&scene).is_empty());
    Ok(scene)
}

/// Whether one name describes the other object too without being the same
/// name ("big triangle" and "big blue triangle").
pub fn names_overlap(a: &Attribute, b: &Attribute) -> bool {
    fn fits(x: &Attribute, y: &Attribute) -> bool {
        x.shape == y.shape
            && x.color.is_none_or(|c| y.color == Some(c))
            && x.size.is_none_or(|s| y.size == Some(s))
    }
    a != b && (fits(a, b) || fits(b, a))
}

fn random_attrs(cfg: &SamplerConfig, rng: &mut StdRng) -> Attribute {
    let shape = *cfg.shapes.choose(rng).unwrap();
    let color =
        (!rng.random_bool(cfg.color_omit_probability)).then(|| *cfg.colors.choose(rng).unwrap());
    let size =
        (!rng.random_bool(cfg.size_omit_probability)).then(|| *cfg.sizes.choose(rng).unwrap());
    Attribute::new(shape, color, size)
}

fn place(
    cfg: &SamplerConfig,
    block: &Block,
    placed: &[SpatialObject],
    radius: f64,
    rng: &mut StdRng,
) -> Option<Point> {
    let w = block.bounds.width;
    let h = block.bounds.height;
    for _ in 0..cfg.placement_tries {
        let p = if !placed.is_empty() && rng.random_bool(cfg.touch_probability) {
            let other = placed.choose(rng).unwrap();
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let d = other.radius + radius;
            Point {
                x: other.position.x + d * angle.cos(),
                y: other.position.y + d * angle.sin(),
            }
        } else if rng.random_bool(cfg.edge_probability) {
            let along_x = rng.random_range(radius..=w - radius);
            let along_y = rng.random_range(radius..=h - radius);
            match Edge::ALL.choose(rng).unwrap() {
                Edge::Bottom => Point {
                    x: along_x,
                    y: radius,
                },
                Edge::Top => Point {
                    x: along_x,
                    y: h - radius,
                },
                Edge::Left => Point {
                    x: radius,
                    y: along_y,
                },
                Edge::Right => Point {
                    x: w - radius,
                    y: along_y,
                },
            }
        } else {
            Point {
                x: rng.random_range(radius..=w - radius),
                y: rng.random_range(radius..=h - radius),
            }
        };
        let p = Point {
            x: round4(p.x),
            y: round4(p.y),
        };
        if p.x - radius < 0.0 || p.y - radius < 0.0 || p.x + radius > w || p.y + radius > h {
            continue;
        }
        let candidate = SpatialObject {
            id: ObjectId(u32::MAX),
            attrs: Attribute::new(Shape::Circle, None, None),
            block: block.id,
            position: p,
            radius,
        };
        if placed
            .iter()
            .all(|o| gap(o, &candidate) >= -cfg.touch_epsilon / 2.0)
        {
            return Some(p);
        }
    }
    None
}

/// Every fact the geometry supports: pairwise relations inside each block
/// (both orientations), membership, border contact and the block
/// arrangement with its converses.
pub fn extract_geometric_facts(scene: &Scene, cfg: &SamplerConfig) -> Vec<Fact> {
    let mut out = Vec::new();
    for block in &scene.blocks {
        let width = block.bounds.width;
        let members: Vec<&SpatialObject> = scene
            .objects
            .iter()
            .filter(|o| o.block == block.id)
            .collect();
        for a in &members {
            out.push(Fact::new(
                EntityRef::Object(a.id),
                RelationKind::In,
                EntityRef::Block(block.id),
            ));
            let eps = cfg.touch_epsilon;
            let p = a.position;
            let r = a.radius;
            let edges = [
                (Edge::Top, block.bounds.height - (p.y + r)),
                (Edge::Bottom, p.y - r),
                (Edge::Left, p.x - r),
                (Edge::Right, width - (p.x + r)),
            ];
            for (edge, d) in edges {
                if d <= eps {
                    out.push(Fact::new(
                        EntityRef::Object(a.id),
                        RelationKind::TouchingEdge(edge),
                        EntityRef::Block(block.id),
                    ));
                }
            }
        }
        for a in &members {
            for b in &members {
                if a.id == b.id {
                    continue;
                }
                out.extend(pair_facts(a, b, width, cfg));
            }
        }
    }
    for f in &scene.block_relations {
        out.push(*f);
        if let Some(c) = f.converse() {
            out.push(c);
        }
    }
    out
}

/// Relations from `a` to `b` read off their coordinates.
pub fn pair_facts(
    a: &SpatialObject,
    b: &SpatialObject,
    width: f64,
    cfg: &SamplerConfig,
) -> Vec<Fact> {
    let (ea, eb) = (EntityRef::Object(a.id), EntityRef::Object(b.id));
    let m = cfg.margin * width;
    let mut out = Vec::new();
    if a.position.x + m < b.position.x {
        out.push(Fact::new(ea, RelationKind::Left, eb));
    }
    if a.position.x > b.position.x + m {
        out.push(Fact::new(ea, RelationKind::Right, eb));
    }
    if a.position.y > b.position.y + m {
        out.push(Fact::new(ea, RelationKind::Above, eb));
    }
    if a.position.y + m < b.position.y {
        out.push(Fact::new(ea, RelationKind::Below, eb));
    }
    let d = center_distance(a, b);
    if d <= cfg.near_ratio * width {
        out.push(Fact::new(ea, RelationKind::NearTo, eb));
    }
    if d >= cfg.far_ratio * width {
        out.push(Fact::new(ea, RelationKind::FarFrom, eb));
    }
    if gap(a, b) <= cfg.touch_epsilon {
        out.push(Fact::new(ea, RelationKind::Touching, eb));
    }
    out
}

/// Relation family used when picking which facts a story states: one fact
/// per unordered pair and family.
fn family(r: RelationKind) -> u8 {
    match r {
        RelationKind::Left | RelationKind::Right => 0,
        RelationKind::Above | RelationKind::Below => 1,
        RelationKind::NearTo | RelationKind::FarFrom => 2,
        RelationKind::Touching => 3,
        RelationKind::In => 4,
        RelationKind::TouchingEdge(_) => 5,
    }
}

/// Random subset of `facts` for a story. Kept blocks and objects are chosen
/// first; every kept object keeps its membership fact, and block relations
/// are repaired so the kept blocks stay connected.
pub fn select_story_facts(facts: &[Fact], cfg: &SamplerConfig) -> Vec<Fact> {
    let f = cfg.describe_fraction;
    if f >= 1.0 {
        return facts.to_vec();
    }
    let mut rng = rng(derive_named(cfg.seed, "select"));

    let mut block_objects: BTreeMap<EntityRef, Vec<EntityRef>> = BTreeMap::new();
    for fact in facts {
        if fact.relation == RelationKind::In && fact.is_positive() {
            block_objects
                .entry(fact.object)
                .or_default()
                .push(fact.subject);
        }
        if fact.subject.is_block() && fact.object.is_block() {
            block_objects.entry(fact.subject).or_default();
        }
    }
    let all_blocks: Vec<EntityRef> = block_objects.keys().copied().collect();
    let mut kept_blocks: Vec<EntityRef> = all_blocks
        .iter()
        .copied()
        .filter(|_| rng.random_bool(f))
        .collect();
    let want = all_blocks.len().min(2);
    while kept_blocks.len() < want {
        let missing: Vec<_> = all_blocks
            .iter()
            .filter(|b| !kept_blocks.contains(b))
            .copied()
            .collect();
        kept_blocks.push(*missing.choose(&mut rng).unwrap());
    }
    kept_blocks.sort();

    let mut kept: BTreeSet<EntityRef> = kept_blocks.iter().copied().collect();
    for b in &kept_blocks {
        let objs = &block_objects[b];
        let mut chosen: Vec<EntityRef> = objs
            .iter()
            .copied()
            .filter(|_| rng.random_bool(f))
            .collect();
        if chosen.is_empty() && !objs.is_empty() {
            chosen.push(*objs.choose(&mut rng).unwrap());
        }
        kept.extend(chosen);
    }
    let mut spare: Vec<EntityRef> = kept_blocks
        .iter()
        .flat_map(|b| &block_objects[b])
        .copied()
        .filter(|o| !kept.contains(o))
        .collect();
    spare.shuffle(&mut rng);
    let described = kept.len() - kept_blocks.len();
    kept.extend(
        spare
            .into_iter()
            .take(cfg.min_described_objects.saturating_sub(described)),
    );

    // candidate facts grouped by (unordered pair, family)
    let mut groups: BTreeMap<(EntityRef, EntityRef, u8), Vec<Fact>> = BTreeMap::new();
    for fact in facts {
        if !kept.contains(&fact.subject) || !kept.contains(&fact.object) {
            continue;
        }
        let (lo, hi) = if fact.subject < fact.object {
            (fact.subject, fact.object)
        } else {
            (fact.object, fact.subject)
        };
        groups
            .entry((lo, hi, family(fact.relation)))
            .or_default()
            .push(*fact);
    }

    let mut out = Vec::new();
    let mut block_links: Vec<(EntityRef, EntityRef, Vec<Fact>)> = Vec::new();
    for ((lo, hi, fam), options) in groups {
        let pick = |rng: &mut StdRng| *options.choose(rng).unwrap();
        if fam == 4 {
            out.extend(options.iter().copied());
        } else if lo.is_block() && hi.is_block() {
            if rng.random_bool(f) {
                out.push(pick(&mut rng));
            } else {
                block_links.push((lo, hi, options.clone()));
            }
        } else if fam == 5 {
            out.extend(options.iter().copied().filter(|_| rng.random_bool(f)));
        } else if rng.random_bool(f) {
            out.push(pick(&mut rng));
        }
    }

    // union-find over kept blocks, then add dropped links that join components
    let index: BTreeMap<EntityRef, usize> = kept_blocks
        .iter()
        .enumerate()
        .map(|(i, b)| (*b, i))
        .collect();
    let mut parent: Vec<usize> = (0..kept_blocks.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for fact in &out {
        if let (Some(&a), Some(&b)) = (index.get(&fact.subject), index.get(&fact.object)) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
    }
    for (lo, hi, options) in block_links {
        let (ra, rb) = (find(&mut parent, index[&lo]), find(&mut parent, index[&hi]));
        if ra != rb {
            parent[ra] = rb;
            out.push(*options.choose(&mut rng).unwrap());
        }
    }
    out.sort();
    out
}

/// Read a scene from JSON and validate it.
pub fn import_scene<R: Read>(reader: R) -> Result<Scene, SamplerError> {
    let mut de = serde_json::Deserializer::from_reader(reader);
    let scene: Scene =
        serde_path_to_error::deserialize(&mut de).map_err(|e| SamplerError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    if let Some(v) = validate_scene(&scene).into_iter().next() {
        return Err(SamplerError::Schema {
            path: v.path,
            message: v.message,
        });
    }
    Ok(scene)
}

pub fn import_scene_file(path: &std::path::Path) -> Result<Scene, SamplerError> {
    import_scene(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn export_scene(scene: &Scene) -> String {
    serde_json::to_string_pretty(scene).expect("scene serializes")
}
