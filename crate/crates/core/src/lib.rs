//! Shift-reduce semantic parsing where types decide which reductions are legal.
//!
//! Questions are parsed left to right by a shift/skip/reduce transition
//! system whose stack holds typed lambda-calculus expressions. A domain type
//! hierarchy with subtyping and parametric polymorphism decides which
//! reductions are legal, and a linear model trained with a max-violation
//! perceptron ranks the survivors in a beam.

pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod learner;
pub mod lexicon;
pub mod mr;
pub mod parser;
pub mod syntax;
pub mod types;

pub use data::{Example, Sentence};
pub use error::{
    DataError, DomainError, HierarchyError, ModelError, MrError, ParseError, SyntaxError, TypeError,
};
pub use learner::{TrainerConfig, TrainingExample};
pub use eval::{evaluate, EvalReport};
pub use features::{FeatureTemplateSet, FeatureVector, Model, WeightVector};
pub use lexicon::{Domain, LexiconEntry, Trigger};
pub use parser::{Action, Derivation, Parser, ParserState, ReferenceSet, UNBOUNDED};
pub use mr::{apply, mr_equal, union, Expr, Signature, TypedResult};
pub use types::{
    greatest_lower_bound, is_subtype, match_argument, resolve, Binding, Type, TypeHierarchy,
    TypeVar,
};
