use thiserror::Error;

use crate::types::{Type, TypeVar};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("syntax error at byte {pos}: {msg}")]
pub struct SyntaxError {
    pub pos: usize,
    pub msg: String,
}

impl SyntaxError {
    pub fn new(pos: usize, msg: impl Into<String>) -> Self {
        SyntaxError { pos, msg: msg.into() }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("unbound type variable {0}")]
    UnboundVariable(TypeVar),
    #[error("type mismatch: expected {expected}, found {found}")]
    Mismatch { expected: Type, found: Type },
    #[error("{0} is not a function type")]
    NotAFunction(Type),
    #[error("no common subtype of {0} and {1}")]
    NoLowerBound(Type, Type),
    #[error("occurs check failed: {var} in {ty}")]
    Occurs { var: TypeVar, ty: Type },
    #[error("malformed type `{0}`")]
    Malformed(String),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum HierarchyError {
    #[error("line {line}: expected `type <child> <: <parent>`, got `{text}`")]
    BadLine { line: usize, text: String },
    #[error("line {line}: duplicate type `{name}`")]
    Duplicate { line: usize, name: String },
    #[error("line {line}: parent `{parent}` of `{child}` is never declared")]
    UndeclaredParent {
        line: usize,
        child: String,
        parent: String,
    },
    #[error("line {line}: root type `{name}` cannot have a parent")]
    RootParent { line: usize, name: String },
    #[error("line {line}: the boolean type `t` cannot have subtypes (`{child}`)")]
    BooleanChild { line: usize, child: String },
    #[error("cycle in type hierarchy through `{0}`")]
    Cycle(String),
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum MrError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("malformed expression `{0}`")]
    Malformed(String),
    #[error("union needs two predicates of type X->t, got {0} and {1}")]
    NotPredicates(Type, Type),
    #[error("`{0}` does not type-check after beta reduction")]
    IllTypedReduct(String),
}

#[derive(Debug, Error)]
pub enum DomainError {
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unknown type `{name}`")]
    UnknownType { line: usize, name: String },
    #[error("line {line}: `{name} : {ty}` is already declared")]
    Redefinition { line: usize, name: String, ty: Type },
    #[error("line {line}: {error}")]
    Template { line: usize, error: MrError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("action {0} is not legal in this state")]
    IllegalAction(String),
    #[error("no final derivation reachable within the beam")]
    NoParse,
    #[error("reference set has no prefix of length {0}")]
    EmptyReference(usize),
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("line {line}: {error}")]
    Mr { line: usize, error: MrError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("example {0} has an empty reference set")]
    EmptyReferenceSet(usize),
    #[error("no training example has a reference derivation")]
    NoCoverage,
    #[error("reference derivation for example {id} yields {got}, expected {want}")]
    BadReference { id: usize, got: String, want: String },
    #[error("reference cache line {line}: {msg}")]
    Cache { line: usize, msg: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("template line {line}: {msg}")]
    Template { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
