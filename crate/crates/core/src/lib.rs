//! Symbolic and numeric checks of differential coverings, reductions and
//! Bäcklund transformations for two-component rdDym-type systems.

pub mod catalog;
pub mod expr;
pub mod jet;
pub mod numeric;
pub mod suite;
pub mod verify;

pub use expr::{Atom, Coordinate, Expr, FieldId, FieldKind, JetVar, MultiIndex, NormalForm, Workspace};

use thiserror::Error as ThisError;

#[derive(Debug, Clone, PartialEq, ThisError)]
pub enum Error {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier '{name}' at {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("derivative suffix on parameter '{name}' at {pos}")]
    DerivativeOnParameter { name: String, pos: usize },
    #[error("invalid field name '{0}'")]
    InvalidName(String),
    #[error("field '{name}' already declared as {existing:?}")]
    KindConflict { name: String, existing: FieldKind },
    #[error("exponent is not a polynomial: {0}")]
    ExponentNotPolynomial(String),
    #[error("exponent {0} out of range")]
    ExponentTooLarge(i64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("fiber field '{0}' needs a covering context")]
    MissingCovering(String),
    #[error("fiber jet of '{field}' exceeds the stored depth (order {order})")]
    FiberDepth { field: String, order: usize },
    #[error("invalid covering: {0}")]
    InvalidCovering(String),
    #[error("cannot orient: {0}")]
    Orientation(String),
    #[error("prolonged leading {0} collides with another rule")]
    LeadingCollision(String),
    #[error("reduction did not terminate within {0} passes")]
    IterationCap(usize),
    #[error("conflicting bindings for {0}")]
    BindingConflict(String),
    #[error("parameter '{0}' bound to a non-constant")]
    ParameterBinding(String),
    #[error("fixture line {line}: {message}")]
    Fixture { line: usize, message: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("unknown catalog entry '{0}'")]
    UnknownEntry(String),
    #[error("catalog entry '{id}': {message}")]
    InvalidEntry { id: String, message: String },
    #[error("numeric: {0}")]
    Numeric(String),
    #[error("integration unstable (growth {growth:.3e}); {suggestion}")]
    Unstable { growth: f64, suggestion: String },
}
