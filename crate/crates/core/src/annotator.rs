//! Auxiliary supervision: a scene graph of what the story states and spatial
//! role labels (trajector, indicator, landmark) for every verbalized relation.

use serde::{Deserialize, Serialize};

use crate::error::AnnotateError;
use crate::model::{Attribute, BlockId, Fact, ObjectId, RelationKind, Span, Story};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockNode {
    pub id: BlockId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectNode {
    pub id: ObjectId,
    pub attrs: Attribute,
    #[serde(default)]
    pub ordinal: Option<u32>,
    #[serde(default)]
    pub block: Option<BlockId>,
}

/// Graph of the story's direct statements; no derived edges.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub blocks: Vec<BlockNode>,
    pub objects: Vec<ObjectNode>,
    pub edges: Vec<Fact>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpRLTriplet {
    pub fact_id: usize,
    /// Relation as written in the sentence.
    pub relation: RelationKind,
    pub trajector: Span,
    pub indicator: Span,
    pub landmark: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpRLAnnotation {
    /// Index of the sentence in the story.
    pub sentence: usize,
    pub triplets: Vec<SpRLTriplet>,
}

pub fn build_scene_graph(story: &Story) -> SceneGraph {
    let blocks = story
        .entities
        .blocks_by_name()
        .into_iter()
        .map(|b| BlockNode {
            id: b.id,
            name: b.name.clone(),
        })
        .collect();
    let objects = story
        .entities
        .objects
        .iter()
        .map(|o| ObjectNode {
            id: o.id,
            attrs: o.attrs,
            ordinal: o.ordinal,
            block: o.block,
        })
        .collect();
    SceneGraph {
        blocks,
        objects,
        edges: story.facts.clone(),
    }
}

/// One annotation per sentence; sentences without relations get an empty
/// triplet list.
pub fn emit_sprl(story: &Story) -> Result<Vec<SpRLAnnotation>, AnnotateError> {
    let mut out = Vec::with_capacity(story.sentences.len());
    for (i, sentence) in story.sentences.iter().enumerate() {
        for &fact_id in &sentence.fact_ids {
            let spanned = sentence.spans.iter().any(|s| s.fact_id == fact_id);
            if !spanned && !sentence.implied.contains(&fact_id) {
                return Err(AnnotateError::AlignmentMissing {
                    sentence: i,
                    fact_id,
                });
            }
        }
        let triplets = sentence
            .spans
            .iter()
            .map(|s| SpRLTriplet {
                fact_id: s.fact_id,
                relation: s.relation,
                trajector: s.trajector,
                indicator: s.indicator,
                landmark: s.landmark,
            })
            .collect();
        out.push(SpRLAnnotation {
            sentence: i,
            triplets,
        });
    }
    Ok(out)
}
