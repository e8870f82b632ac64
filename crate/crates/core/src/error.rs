use thiserror::Error;

use crate::model::Fact;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("inconsistent facts: {first} conflicts with {second}")]
    InconsistentFacts { first: Fact, second: Fact },
    #[error("invalid fact {fact}: {reason}")]
    InvalidFact { fact: Fact, reason: String },
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("could not place object {object} in block {block} after {tries} tries")]
    PlacementFailure {
        block: String,
        object: u32,
        tries: usize,
    },
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("grammar line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("vocabulary map: {0}")]
    Vocabulary(String),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RealizeError {
    #[error("no production can express {0}")]
    UncoverableFact(Fact),
    #[error("grammar has no usable production for {0}")]
    MissingProduction(String),
    #[error("could not refer to {0} unambiguously")]
    Unreferable(String),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum QuestionError {
    #[error("no valid selection: {0}")]
    NoValidSelection(String),
    #[error("object {0} cannot be described uniquely")]
    NotDescribable(String),
    #[error(transparent)]
    Realize(#[from] RealizeError),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AnswerError {
    #[error("mention {mention:?} resolves to {matches} entities, expected exactly one")]
    UnresolvedMention { mention: String, matches: usize },
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum VariantError {
    #[error("no variant applies: {0}")]
    NoVariant(String),
    #[error(transparent)]
    Answer(#[from] AnswerError),
    #[error(transparent)]
    Realize(#[from] RealizeError),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AnnotateError {
    #[error("sentence {sentence} lacks span alignment for fact {fact_id}")]
    AlignmentMissing { sentence: usize, fact_id: usize },
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("parse error in sentence {sentence}: cannot parse {residual:?}{}", detail.as_ref().map(|d| format!(" ({d})")).unwrap_or_default())]
pub struct ParseError {
    /// 1-based sentence index.
    pub sentence: usize,
    /// Unparsed input starting at the furthest point reached.
    pub residual: String,
    pub detail: Option<String>,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Answer(#[from] AnswerError),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Realize(#[from] RealizeError),
    #[error(transparent)]
    Question(#[from] QuestionError),
    #[error(transparent)]
    Answer(#[from] AnswerError),
    #[error(transparent)]
    Variant(#[from] VariantError),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("config: {0}")]
    Config(String),
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("record {index} (seed {seed}): {source}")]
    Record {
        index: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
