use thiserror::Error;

use crate::structure::Id;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("unknown element {0}")]
    UnknownElement(Id),
    #[error("not external: element {0} belongs to the set")]
    NotExternal(Id),
    #[error("empty base unorderable")]
    EmptyBaseUnorderable,
    #[error("not disjoint over base: element {0} occurs on both sides")]
    NotDisjointOverBase(Id),
    #[error("base is not an induced substructure: {0}")]
    BaseMismatch(String),
    #[error("unrealizable type: {0}")]
    Unrealizable(String),
    #[error("interval/type clash on order {order}")]
    IntervalClash { order: usize },
    #[error("variable equals parameter {0}")]
    VariableEqualsParameter(Id),
    #[error("parameter {0} outside the map domain")]
    OutsideDomain(Id),
    #[error("profile mismatch: {0}")]
    ProfileMismatch(String),
    #[error("profile deadlock at element {0}")]
    ProfileDeadlock(Id),
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
    #[error("hypothesis unmet: {0}")]
    HypothesisUnmet(String),
    #[error("lemma inapplicable: {0}")]
    LemmaInapplicable(String),
    #[error("trivial input")]
    TrivialInput,
    #[error("empty base")]
    EmptyBase,
    #[error("mixed universes")]
    MixedUniverses,
    #[error("relation not applicable: {0}")]
    RelationNotApplicable(String),
    #[error("invalid signature: {0}")]
    InvalidSignature(String),
    #[error("not injective: {0} -> {1}")]
    NotInjective(Id, Id),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
