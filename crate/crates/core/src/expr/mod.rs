//! Expression trees over jet variables, and their canonical rational normal form.
//!
//! An [`Expr`] is the surface syntax: what the parser produces and what callers
//! build by hand. All algebra happens on [`NormalForm`], a quotient of Laurent
//! polynomials whose monomials may carry a single fused exponential factor.

mod normal;
mod parse;
mod poly;

use std::collections::BTreeMap;
use std::fmt;
use std::ops;
use std::sync::Arc;

use num::{BigInt, BigRational, One, Signed, Zero};

pub use normal::NormalForm;
pub use parse::parse_expression;
pub use poly::{Monomial, Poly};

use crate::Error;

/// Independent variables. The derived order `T < Y < X` is the fixed priority
/// used for multi-index comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Coordinate {
    T,
    Y,
    X,
}

impl Coordinate {
    pub const ALL: [Coordinate; 3] = [Coordinate::T, Coordinate::Y, Coordinate::X];

    pub fn name(self) -> &'static str {
        match self {
            Coordinate::T => "t",
            Coordinate::Y => "y",
            Coordinate::X => "x",
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            't' => Some(Coordinate::T),
            'y' => Some(Coordinate::Y),
            'x' => Some(Coordinate::X),
            _ => None,
        }
    }
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Derivative counts per coordinate, compared lexicographically in `t, y, x` order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex {
    t: u8,
    y: u8,
    x: u8,
}

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex { t: 0, y: 0, x: 0 };

    pub fn new(t: u8, x: u8, y: u8) -> Self {
        MultiIndex { t, y, x }
    }

    pub fn unit(c: Coordinate) -> Self {
        MultiIndex::ZERO.raised(c)
    }

    pub fn get(&self, c: Coordinate) -> u8 {
        match c {
            Coordinate::T => self.t,
            Coordinate::Y => self.y,
            Coordinate::X => self.x,
        }
    }

    fn slot(&mut self, c: Coordinate) -> &mut u8 {
        match c {
            Coordinate::T => &mut self.t,
            Coordinate::Y => &mut self.y,
            Coordinate::X => &mut self.x,
        }
    }

    pub fn raised(mut self, c: Coordinate) -> Self {
        *self.slot(c) += 1;
        self
    }

    pub fn lowered(mut self, c: Coordinate) -> Option<Self> {
        let s = self.slot(c);
        *s = s.checked_sub(1)?;
        Some(self)
    }

    pub fn order(&self) -> usize {
        self.t as usize + self.y as usize + self.x as usize
    }

    pub fn is_zero(&self) -> bool {
        self.order() == 0
    }

    /// Componentwise `self >= other`.
    pub fn dominates(&self, other: &MultiIndex) -> bool {
        self.t >= other.t && self.y >= other.y && self.x >= other.x
    }

    /// Componentwise difference; `None` unless `self` dominates `other`.
    pub fn minus(&self, other: &MultiIndex) -> Option<MultiIndex> {
        self.dominates(other).then(|| MultiIndex { t: self.t - other.t, y: self.y - other.y, x: self.x - other.x })
    }

    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex { t: self.t + other.t, y: self.y + other.y, x: self.x + other.x }
    }

    /// The coordinates of the index, one entry per derivative, in `t, y, x` order.
    pub fn coordinates(&self) -> Vec<Coordinate> {
        let mut out = Vec::with_capacity(self.order());
        for c in Coordinate::ALL {
            out.extend(std::iter::repeat_n(c, self.get(c) as usize));
        }
        out
    }

    /// Printed suffix, letters in alphabetical order: `u_txy`.
    pub fn suffix(&self) -> String {
        let mut s = String::new();
        for (c, n) in [('t', self.t), ('x', self.x), ('y', self.y)] {
            s.extend(std::iter::repeat_n(c, n as usize));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FieldKind {
    Base,
    Fiber,
    Parameter,
}

impl FieldKind {
    pub fn keyword(self) -> &'static str {
        match self {
            FieldKind::Base => "base",
            FieldKind::Fiber => "fiber",
            FieldKind::Parameter => "param",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldId {
    kind: FieldKind,
    name: Arc<str>,
}

impl FieldId {
    pub fn new(name: &str, kind: FieldKind) -> Self {
        FieldId { kind, name: name.into() }
    }

    pub fn base(name: &str) -> Self {
        FieldId::new(name, FieldKind::Base)
    }

    pub fn fiber(name: &str) -> Self {
        FieldId::new(name, FieldKind::Fiber)
    }

    pub fn parameter(name: &str) -> Self {
        FieldId::new(name, FieldKind::Parameter)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn jet(&self, index: MultiIndex) -> JetVar {
        JetVar::new(self.clone(), index)
    }

    pub fn bare(&self) -> JetVar {
        self.jet(MultiIndex::ZERO)
    }
}

impl fmt::Display for FieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JetVar {
    pub field: FieldId,
    pub index: MultiIndex,
}

impl JetVar {
    pub fn new(field: FieldId, index: MultiIndex) -> Self {
        JetVar { field, index }
    }

    pub fn order(&self) -> usize {
        self.index.order()
    }

    pub fn raised(&self, c: Coordinate) -> JetVar {
        JetVar::new(self.field.clone(), self.index.raised(c))
    }

    /// Whether `self` is obtained from `other` by further differentiation.
    pub fn is_derivative_of(&self, other: &JetVar) -> bool {
        self.field == other.field && self.index.dominates(&other.index)
    }
}

impl fmt::Display for JetVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index.is_zero() {
            f.write_str(self.field.name())
        } else {
            write!(f, "{}_{}", self.field.name(), self.index.suffix())
        }
    }
}

/// Indeterminates of the polynomial layer.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Jet(JetVar),
    Coord(Coordinate),
}

impl Atom {
    pub fn as_jet(&self) -> Option<&JetVar> {
        match self {
            Atom::Jet(j) => Some(j),
            Atom::Coord(_) => None,
        }
    }
}

impl From<JetVar> for Atom {
    fn from(j: JetVar) -> Self {
        Atom::Jet(j)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Jet(j) => j.fmt(f),
            Atom::Coord(c) => c.fmt(f),
        }
    }
}

const RESERVED: &[&str] = &["t", "x", "y", "exp", "D"];

/// Field table used to resolve identifiers while parsing.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Workspace {
    fields: BTreeMap<String, FieldId>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Convenience constructor from space-separated name lists.
    pub fn with(base: &str, fiber: &str, params: &str) -> Result<Self, Error> {
        let mut ws = Workspace::new();
        for (list, kind) in [(base, FieldKind::Base), (fiber, FieldKind::Fiber), (params, FieldKind::Parameter)] {
            for name in list.split_whitespace() {
                ws.declare(name, kind)?;
            }
        }
        Ok(ws)
    }

    pub fn declare(&mut self, name: &str, kind: FieldKind) -> Result<FieldId, Error> {
        let valid = !name.is_empty()
            && name.chars().next().is_some_and(char::is_alphabetic)
            && name.chars().all(char::is_alphanumeric);
        if !valid || RESERVED.contains(&name) {
            return Err(Error::InvalidName(name.to_string()));
        }
        match self.fields.get(name) {
            Some(existing) if existing.kind() != kind => {
                Err(Error::KindConflict { name: name.to_string(), existing: existing.kind() })
            }
            Some(existing) => Ok(existing.clone()),
            None => {
                let id = FieldId::new(name, kind);
                self.fields.insert(name.to_string(), id.clone());
                Ok(id)
            }
        }
    }

    pub fn field(&self, name: &str) -> Option<&FieldId> {
        self.fields.get(name)
    }

    pub fn fields(&self) -> impl Iterator<Item = &FieldId> {
        self.fields.values()
    }

    pub fn of_kind(&self, kind: FieldKind) -> impl Iterator<Item = &FieldId> {
        self.fields.values().filter(move |f| f.kind() == kind)
    }

    pub fn parse(&self, text: &str) -> Result<Expr, Error> {
        parse_expression(text, self)
    }

    /// Parse and normalize in one step.
    pub fn nf(&self, text: &str) -> Result<NormalForm, Error> {
        NormalForm::from_expr(&self.parse(text)?)
    }
}

/// Immutable expression tree. Constructors keep sums and products flat.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Const(BigRational),
    Atom(Atom),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Box<Expr>, i64),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn zero() -> Self {
        Expr::Const(BigRational::zero())
    }

    pub fn one() -> Self {
        Expr::Const(BigRational::one())
    }

    pub fn int(n: i64) -> Self {
        Expr::Const(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn jet(j: JetVar) -> Self {
        Expr::Atom(Atom::Jet(j))
    }

    pub fn coord(c: Coordinate) -> Self {
        Expr::Atom(Atom::Coord(c))
    }

    pub fn sum(items: impl IntoIterator<Item = Expr>) -> Self {
        let mut out = Vec::new();
        for e in items {
            match e {
                Expr::Sum(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::Sum(out),
        }
    }

    pub fn product(items: impl IntoIterator<Item = Expr>) -> Self {
        let mut out = Vec::new();
        for e in items {
            match e {
                Expr::Product(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Expr::one(),
            1 => out.pop().unwrap(),
            _ => Expr::Product(out),
        }
    }

    pub fn pow(self, n: i64) -> Self {
        match (self, n) {
            (_, 0) => Expr::one(),
            (e, 1) => e,
            (Expr::Pow(b, m), n) => Expr::Pow(b, m * n),
            (e, n) => Expr::Pow(Box::new(e), n),
        }
    }

    pub fn exp(self) -> Self {
        Expr::Exp(Box::new(self))
    }

    pub fn normalize(&self) -> Result<NormalForm, Error> {
        NormalForm::from_expr(self)
    }

    /// Print with every compound operand parenthesized as needed; the output
    /// is re-parseable but not canonical (use [`NormalForm`] for that).
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        // 0: sum level, 1: product level, 2: power base
        match self {
            Expr::Const(c) => {
                let needs = (c.is_negative() && prec > 0) || (!c.is_integer() && prec > 0);
                if needs {
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Atom(a) => write!(f, "{a}"),
            Expr::Sum(items) => {
                if prec > 0 {
                    f.write_str("(")?;
                }
                for (i, e) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    e.fmt_prec(f, 1)?;
                }
                if prec > 0 {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Product(items) => {
                if prec > 1 {
                    f.write_str("(")?;
                }
                for (i, e) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    e.fmt_prec(f, 2)?;
                }
                if prec > 1 {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Pow(b, n) => {
                b.fmt_prec(f, 3)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Expr::Exp(e) => {
                f.write_str("exp(")?;
                e.fmt_prec(f, 0)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::sum([self, rhs])
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::product([Expr::int(-1), self])
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + (-rhs)
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::product([self, rhs])
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::product([self, rhs.pow(-1)])
    }
}
