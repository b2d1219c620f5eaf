//! Grid residuals of closed-form solutions and the commutativity test of the
//! two covering flows.

mod compiled;

use std::collections::{BTreeMap, HashMap};

use num::{BigRational, FromPrimitive};

use crate::expr::{Atom, Coordinate, FieldId, FieldKind, JetVar, MultiIndex, NormalForm};
use crate::jet::{Bindings, Covering, OrientedSystem};
use crate::verify::NumericRow;
use crate::Error;

pub use compiled::Compiled;

/// Maximum residual below which a solution counts as exact.
pub const EXACT_THRESHOLD: f64 = 1e-12;
/// Amplitude growth that flags an unstable integration.
pub const GROWTH_LIMIT: f64 = 10.0;

/// Closed form of one field.
#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    Expr(NormalForm),
    /// Positive square root of a polynomial in the coordinates.
    Sqrt(NormalForm),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    pub id: String,
    pub fields: Vec<(FieldId, Formula)>,
    pub note: String,
}

impl ExactSolution {
    pub fn new(id: &str, fields: Vec<(FieldId, Formula)>) -> Self {
        ExactSolution { id: id.to_string(), fields, note: "pending".into() }
    }

    fn coordinate_only(&self) -> Result<(), Error> {
        for (f, formula) in &self.fields {
            let (Formula::Expr(e) | Formula::Sqrt(e)) = formula;
            if !e.jets().is_empty() {
                return Err(Error::Numeric(format!("formula for {f} must depend on coordinates only")));
            }
        }
        Ok(())
    }

    /// Substitute into every equation of `sys` and demand an exact zero.
    /// Square roots are handled with an atom `R`, `D_c R = D_c P / (2R)`,
    /// and the result reduced modulo `R^2 = P`.
    pub fn certify(self, sys: &OrientedSystem) -> Result<Certified, Error> {
        self.coordinate_only()?;
        let mut plain = Bindings::new();
        let mut radicals = Vec::new();
        for (f, formula) in &self.fields {
            match formula {
                Formula::Expr(e) => plain.bind_field(f.clone(), e.clone())?,
                Formula::Sqrt(p) => {
                    radicals.push((f.clone(), p.clone(), FieldId::base(&format!("__R{}", radicals.len()))))
                }
            }
        }
        for rule in sys.base_rules() {
            let mut e = plain.apply(&rule.equation)?;
            for (f, p, r) in &radicals {
                e = substitute_radical(&e, f, p, r)?;
            }
            if !e.is_zero() {
                return Err(Error::Numeric(format!("{} does not solve {}: residual {e}", self.id, rule.leading)));
            }
        }
        let mut sol = self;
        sol.note = "symbolically verified".into();
        Ok(Certified { sol, control: false })
    }
}

fn radical_derivative<'a>(
    p: &'a NormalForm,
    r: &FieldId,
) -> impl Fn(&Atom, Coordinate) -> Result<NormalForm, Error> + 'a {
    let r = r.clone();
    move |a, c| match a {
        Atom::Coord(k) => Ok(if *k == c { NormalForm::one() } else { NormalForm::zero() }),
        Atom::Jet(j) if j.field == r && j.index.is_zero() => {
            let dp = p.derive_with(&mut |b| match b {
                Atom::Coord(k) => Ok(if *k == c { NormalForm::one() } else { NormalForm::zero() }),
                _ => Ok(NormalForm::zero()),
            })?;
            dp.div(&NormalForm::jet(j.clone()).scale(&BigRational::from_integer(2.into())))
        }
        _ => Err(Error::Numeric(format!("unexpected atom {a} in a radical derivative"))),
    }
}

/// Replace the jets of `f = sqrt(p)` by expressions in `R` and reduce.
fn substitute_radical(e: &NormalForm, f: &FieldId, p: &NormalForm, r: &FieldId) -> Result<NormalForm, Error> {
    let d = radical_derivative(p, r);
    let mut memo: HashMap<MultiIndex, NormalForm> = HashMap::new();
    let mut value = |index: MultiIndex| -> Result<NormalForm, Error> {
        let mut cur = NormalForm::jet(r.bare());
        let mut reached = MultiIndex::ZERO;
        for c in index.coordinates() {
            reached = reached.raised(c);
            if let Some(v) = memo.get(&reached) {
                cur = v.clone();
                continue;
            }
            cur = cur.derive_with(&mut |a| d(a, c))?;
            memo.insert(reached, cur.clone());
        }
        Ok(cur)
    };
    let e = e.substitute_with(&mut |a| match a {
        Atom::Jet(j) if j.field == *f => value(j.index).map(Some),
        _ => Ok(None),
    })?;
    if e.is_zero() {
        return Ok(e);
    }
    let ra = Atom::Jet(r.bare());
    let mut out = NormalForm::zero();
    for (m, c) in e.numerator().terms() {
        let (k, rest) = m.without(&ra);
        let term = NormalForm::from_poly(crate::expr::Poly::term(rest, c.clone()));
        let odd = k.rem_euclid(2);
        let half = (k - odd) / 2;
        let mut t = term.mul(&p.pow(half as i64)?);
        if odd == 1 {
            t = t.mul(&NormalForm::jet(r.bare()));
        }
        out = out.add(&t);
    }
    Ok(out)
}

type Evaluator = Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// A solution allowed on a grid: certified, or a deliberate control.
#[derive(Clone, Debug)]
pub struct Certified {
    sol: ExactSolution,
    control: bool,
}

impl Certified {
    /// A known non-solution used to show that a test can fail.
    pub fn control(mut sol: ExactSolution) -> Self {
        sol.note = "control, not a solution".into();
        Certified { sol, control: true }
    }

    pub fn solution(&self) -> &ExactSolution {
        &self.sol
    }

    pub fn is_control(&self) -> bool {
        self.control
    }

    fn evaluators(&self) -> Result<Vec<(FieldId, Evaluator)>, Error> {
        let mut out: Vec<(FieldId, Evaluator)> = Vec::new();
        let vars = [Atom::Coord(Coordinate::T), Atom::Coord(Coordinate::X), Atom::Coord(Coordinate::Y)];
        for (f, formula) in &self.sol.fields {
            match formula {
                Formula::Expr(e) => {
                    let c = Compiled::new(e, &vars)?;
                    out.push((f.clone(), Box::new(move |t, x, y| c.eval(&[t, x, y]))));
                }
                Formula::Sqrt(e) => {
                    let c = Compiled::new(e, &vars)?;
                    out.push((f.clone(), Box::new(move |t, x, y| c.eval(&[t, x, y]).sqrt())));
                }
            }
        }
        Ok(out)
    }

    /// Bindings for use in symbolic coefficients; square roots not allowed.
    fn bindings(&self) -> Result<Bindings, Error> {
        let mut b = Bindings::new();
        for (f, formula) in &self.sol.fields {
            match formula {
                Formula::Expr(e) => b.bind_field(f.clone(), e.clone())?,
                Formula::Sqrt(_) => return Err(Error::Numeric(format!("{f} is a radical; not supported here"))),
            }
        }
        Ok(b)
    }
}

/// Uniform grid over `t`, `x`, `y` with the same point count on each axis.
/// Derivatives are second-order centered differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub t: (f64, f64),
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub points: usize,
}

impl GridSpec {
    pub const MIN_POINTS: usize = 8;

    pub fn new(t: (f64, f64), x: (f64, f64), y: (f64, f64), points: usize) -> Result<Self, Error> {
        let g = GridSpec { t, x, y, points };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.points < Self::MIN_POINTS {
            return Err(Error::Numeric(format!("grid too coarse: {} points, need {}", self.points, Self::MIN_POINTS)));
        }
        for (a, b) in [self.t, self.x, self.y] {
            if b.partial_cmp(&a) != Some(std::cmp::Ordering::Greater) || !a.is_finite() || !b.is_finite() {
                return Err(Error::Numeric(format!("degenerate interval [{a}, {b}]")));
            }
        }
        Ok(())
    }

    /// Same extents with the step halved.
    pub fn refined(&self) -> Self {
        GridSpec { points: 2 * (self.points - 1) + 1, ..*self }
    }

    fn range(&self, c: Coordinate) -> (f64, f64) {
        match c {
            Coordinate::T => self.t,
            Coordinate::X => self.x,
            Coordinate::Y => self.y,
        }
    }

    pub fn step(&self, c: Coordinate) -> f64 {
        let (a, b) = self.range(c);
        (b - a) / (self.points - 1) as f64
    }

    /// Largest step.
    pub fn h(&self) -> f64 {
        Coordinate::ALL.iter().map(|c| self.step(*c)).fold(0.0, f64::max)
    }
}

struct Samples {
    n: usize,
    values: Vec<f64>,
}

impl Samples {
    fn at(&self, i: [isize; 3]) -> f64 {
        let n = self.n as isize;
        self.values[((i[0] * n + i[1]) * n + i[2]) as usize]
    }
}

fn axis(c: Coordinate) -> usize {
    match c {
        Coordinate::T => 0,
        Coordinate::X => 1,
        Coordinate::Y => 2,
    }
}

fn difference(s: &Samples, at: [isize; 3], index: MultiIndex, g: &GridSpec) -> Result<f64, Error> {
    let cs = index.coordinates();
    let shift = |mut p: [isize; 3], c: Coordinate, d: isize| {
        p[axis(c)] += d;
        p
    };
    Ok(match cs.as_slice() {
        [] => s.at(at),
        [a] => (s.at(shift(at, *a, 1)) - s.at(shift(at, *a, -1))) / (2.0 * g.step(*a)),
        [a, b] if a == b => {
            let h = g.step(*a);
            (s.at(shift(at, *a, 1)) - 2.0 * s.at(at) + s.at(shift(at, *a, -1))) / (h * h)
        }
        [a, b] => {
            let pp = s.at(shift(shift(at, *a, 1), *b, 1));
            let pm = s.at(shift(shift(at, *a, 1), *b, -1));
            let mp = s.at(shift(shift(at, *a, -1), *b, 1));
            let mm = s.at(shift(shift(at, *a, -1), *b, -1));
            (pp - pm - mp + mm) / (4.0 * g.step(*a) * g.step(*b))
        }
        _ => return Err(Error::Numeric(format!("no stencil for derivative order {}", cs.len()))),
    })
}

/// Max-abs residual of each equation of `sys` over the interior points.
pub fn evaluate_residual_grid(sol: &Certified, sys: &OrientedSystem, g: &GridSpec) -> Result<Vec<f64>, Error> {
    g.validate()?;
    let n = g.points;
    let coord = |c: Coordinate, i: usize| {
        let (a, _) = g.range(c);
        a + i as f64 * g.step(c)
    };
    let mut samples: BTreeMap<FieldId, Samples> = BTreeMap::new();
    for (f, eval) in sol.evaluators()? {
        let mut values = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    values.push(eval(coord(Coordinate::T, i), coord(Coordinate::X, j), coord(Coordinate::Y, k)));
                }
            }
        }
        samples.insert(f, Samples { n, values });
    }
    let mut out = Vec::new();
    for rule in sys.base_rules() {
        let jets: Vec<JetVar> = rule.equation.jets().into_iter().collect();
        for j in &jets {
            if j.field.kind() != FieldKind::Base || !samples.contains_key(&j.field) {
                return Err(Error::Numeric(format!("no values for {j}")));
            }
        }
        let mut vars: Vec<Atom> = jets.iter().cloned().map(Atom::Jet).collect();
        vars.extend(Coordinate::ALL.map(Atom::Coord));
        let eq = Compiled::new(&rule.equation, &vars)?;
        let mut buf = vec![0.0; vars.len()];
        let mut worst: f64 = 0.0;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                for k in 1..n - 1 {
                    let at = [i as isize, j as isize, k as isize];
                    for (slot, jet) in jets.iter().enumerate() {
                        buf[slot] = difference(&samples[&jet.field], at, jet.index, g)?;
                    }
                    let m = jets.len();
                    buf[m] = coord(Coordinate::T, i);
                    buf[m + 1] = coord(Coordinate::Y, k);
                    buf[m + 2] = coord(Coordinate::X, j);
                    worst = worst.max(eq.eval(&buf).abs());
                }
            }
        }
        out.push(worst);
    }
    Ok(out)
}

/// Least-squares slope of `log r` against `log h`.
pub fn fit_slope(hs: &[f64], rs: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = hs.iter().zip(rs).filter(|(_, r)| **r > 0.0).map(|(h, r)| (h.ln(), r.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Order {
    Exact,
    Slope(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Convergence {
    pub order: Order,
    pub rows: Vec<NumericRow>,
    /// Max residual over all equations at each level.
    pub residuals: Vec<f64>,
}

impl Convergence {
    /// Each level within `slack` of being no larger than the previous one.
    pub fn monotone(&self, slack: f64) -> bool {
        self.residuals.windows(2).all(|w| w[1] <= w[0] * (1.0 + slack))
    }
}

pub fn estimate_convergence_order(
    sol: &Certified,
    sys: &OrientedSystem,
    g: &GridSpec,
    halvings: usize,
) -> Result<Convergence, Error> {
    if halvings < 2 {
        return Err(Error::Numeric("need at least two halvings".into()));
    }
    let mut grid = *g;
    let (mut hs, mut rs) = (Vec::new(), Vec::new());
    for level in 0..=halvings {
        if level > 0 {
            grid = grid.refined();
        }
        let r = evaluate_residual_grid(sol, sys, &grid)?.into_iter().fold(0.0, f64::max);
        hs.push(grid.h());
        rs.push(r);
    }
    let order = if rs.iter().all(|r| *r < EXACT_THRESHOLD) {
        Order::Exact
    } else {
        Order::Slope(fit_slope(&hs, &rs).ok_or_else(|| Error::Numeric("residual underflow".into()))?)
    };
    let slope = match order {
        Order::Slope(s) => Some(s),
        Order::Exact => None,
    };
    let rows = hs
        .iter()
        .zip(&rs)
        .map(|(h, r)| NumericRow { test: sol.sol.id.clone(), h: *h, delta: None, residual: *r, slope })
        .collect();
    Ok(Convergence { order, rows, residuals: rs })
}

/// Setup of the commutativity test: an `x`-grid, the base point `(t0, y0)`,
/// the flow length `delta` and the initial bump `(1 - (x/width)^2)^4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowSpec {
    pub x: (f64, f64),
    pub points: usize,
    pub levels: usize,
    pub t0: f64,
    pub y0: f64,
    pub delta: f64,
    pub width: f64,
    pub cfl: f64,
}

impl Default for FlowSpec {
    fn default() -> Self {
        FlowSpec { x: (-2.0, 2.0), points: 81, levels: 4, t0: 0.0, y0: 0.0, delta: 0.05, width: 1.0, cfl: 0.25 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Commutativity {
    pub mismatch: Vec<f64>,
    pub hs: Vec<f64>,
    pub slope: Option<f64>,
    pub rows: Vec<NumericRow>,
}

struct Flow {
    coeff: Compiled,
}

impl Flow {
    /// Speed `a` in `p_c = a p_x` at `(t, x, y)`.
    fn speed(&self, t: f64, x: f64, y: f64) -> f64 {
        self.coeff.eval(&[t, x, y])
    }
}

fn flow_coefficient(
    cov: &Covering,
    c: Coordinate,
    param: &FieldId,
    value: f64,
    sol: &Certified,
) -> Result<Flow, Error> {
    let p_x = Atom::Jet(cov.fiber().jet(MultiIndex::unit(Coordinate::X)));
    let eq = cov.equation(c).unwrap();
    let a = eq.partial(&p_x)?;
    if !eq.sub(&a.mul(&NormalForm::atom(p_x.clone()))).is_zero() || a.jets().iter().any(|j| j.field == *cov.fiber()) {
        return Err(Error::Numeric(format!("{}_{c} is not of the form A p_x", cov.fiber())));
    }
    let mut b = sol.bindings()?;
    let lambda = BigRational::from_f64(value).ok_or_else(|| Error::Numeric(format!("bad parameter value {value}")))?;
    b.bind_field(param.clone(), NormalForm::constant(lambda))?;
    let a = b.apply(&a)?;
    if let Some(j) = a.jets().into_iter().next() {
        return Err(Error::Numeric(format!("coefficient still depends on {j}")));
    }
    let vars = [Atom::Coord(Coordinate::T), Atom::Coord(Coordinate::X), Atom::Coord(Coordinate::Y)];
    Ok(Flow { coeff: Compiled::new(&a, &vars)? })
}

/// Evolve `p` by `p_s = a(s) p_x` over `[s0, s0 + delta]` with RK4 in `s`
/// and centered differences in `x`; endpoints are held fixed.
fn evolve(
    p: &mut [f64],
    xs: &[f64],
    speed: &dyn Fn(f64, f64) -> f64,
    s0: f64,
    delta: f64,
    cfl: f64,
) -> Result<(), Error> {
    let n = p.len();
    let h = xs[1] - xs[0];
    let mut vmax: f64 = 0.0;
    for s in [s0, s0 + 0.5 * delta, s0 + delta] {
        for x in xs {
            vmax = vmax.max(speed(s, *x).abs());
        }
    }
    let dt_max = cfl * h / vmax.max(1.0);
    let steps = (delta / dt_max).ceil().max(1.0) as usize;
    let dt = delta / steps as f64;
    let start = p.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let rhs = |s: f64, q: &[f64], out: &mut [f64]| {
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            out[i] = speed(s, xs[i]) * (q[i + 1] - q[i - 1]) / (2.0 * h);
        }
    };
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for step in 0..steps {
        let s = s0 + step as f64 * dt;
        rhs(s, p, &mut k1);
        for i in 0..n {
            tmp[i] = p[i] + 0.5 * dt * k1[i];
        }
        rhs(s + 0.5 * dt, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = p[i] + 0.5 * dt * k2[i];
        }
        rhs(s + 0.5 * dt, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = p[i] + dt * k3[i];
        }
        rhs(s + dt, &tmp, &mut k4);
        for i in 0..n {
            p[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let now = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !now.is_finite() || now > GROWTH_LIMIT * start {
            return Err(Error::Unstable {
                growth: now / start,
                suggestion: format!("retry with a step ratio below {}", cfl / 2.0),
            });
        }
    }
    Ok(())
}

/// Flow the bump by `delta` in `t` then in `y`, and in the other order, on
/// successively refined `x`-grids. Returns the max-abs difference per level
/// and its refinement slope.
pub fn commutativity_test(
    cov: &Covering,
    param: &FieldId,
    value: f64,
    sol: &Certified,
    spec: &FlowSpec,
) -> Result<Commutativity, Error> {
    if value == 0.0 {
        return Err(Error::Numeric("parameter value must be nonzero".into()));
    }
    if spec.points < GridSpec::MIN_POINTS || spec.levels < 2 {
        return Err(Error::Numeric("grid too coarse".into()));
    }
    let ft = flow_coefficient(cov, Coordinate::T, param, value, sol)?;
    let fy = flow_coefficient(cov, Coordinate::Y, param, value, sol)?;
    let (t0, y0, d) = (spec.t0, spec.y0, spec.delta);
    let mut points = spec.points;
    let (mut hs, mut mismatch) = (Vec::new(), Vec::new());
    for _ in 0..spec.levels {
        let h = (spec.x.1 - spec.x.0) / (points - 1) as f64;
        let xs: Vec<f64> = (0..points).map(|i| spec.x.0 + i as f64 * h).collect();
        let p0: Vec<f64> = xs
            .iter()
            .map(|x| {
                let z = x / spec.width;
                if z.abs() < 1.0 {
                    (1.0 - z * z).powi(4)
                } else {
                    0.0
                }
            })
            .collect();
        let mut a = p0.clone();
        evolve(&mut a, &xs, &|t, x| ft.speed(t, x, y0), t0, d, spec.cfl)?;
        evolve(&mut a, &xs, &|y, x| fy.speed(t0 + d, x, y), y0, d, spec.cfl)?;
        let mut b = p0;
        evolve(&mut b, &xs, &|y, x| fy.speed(t0, x, y), y0, d, spec.cfl)?;
        evolve(&mut b, &xs, &|t, x| ft.speed(t, x, y0 + d), t0, d, spec.cfl)?;
        mismatch.push(a.iter().zip(&b).fold(0.0f64, |m, (u, v)| m.max((u - v).abs())));
        hs.push(h);
        points = 2 * (points - 1) + 1;
    }
    let slope = fit_slope(&hs, &mismatch);
    let rows = hs
        .iter()
        .zip(&mismatch)
        .map(|(h, m)| NumericRow { test: sol.sol.id.clone(), h: *h, delta: Some(d), residual: *m, slope })
        .collect();
    Ok(Commutativity { mismatch, hs, slope, rows })
}

/// The solutions used by the numeric suite.
pub mod fixtures {
    use super::*;
    use crate::expr::Workspace;

    fn ws() -> Workspace {
        Workspace::with("u v", "", "").expect("static workspace")
    }

    fn expr(s: &str) -> NormalForm {
        ws().nf(s).expect("static formula")
    }

    /// `u = (x + 2y)^3`, a travelling wave of the special equation.
    pub fn cubic_wave() -> ExactSolution {
        ExactSolution::new("cubic_wave", vec![(FieldId::base("u"), Formula::Expr(expr("(x + 2*y)^3")))])
    }

    /// `u = t + 2x - 3y`, `v = 5`.
    pub fn linear_pair() -> ExactSolution {
        ExactSolution::new(
            "linear_pair",
            vec![
                (FieldId::base("u"), Formula::Expr(expr("t + 2*x - 3*y"))),
                (FieldId::base("v"), Formula::Expr(expr("5"))),
            ],
        )
    }

    /// `u = x + 2y`, `v = sqrt(2(x + 2y) + 9)`.
    pub fn radical_pair() -> ExactSolution {
        ExactSolution::new(
            "radical_pair",
            vec![
                (FieldId::base("u"), Formula::Expr(expr("x + 2*y"))),
                (FieldId::base("v"), Formula::Sqrt(expr("2*(x + 2*y) + 9"))),
            ],
        )
    }

    /// `u = 0`.
    pub fn zero() -> ExactSolution {
        ExactSolution::new("zero", vec![(FieldId::base("u"), Formula::Expr(NormalForm::zero()))])
    }

    /// `u = xyt`, not a solution.
    pub fn control() -> ExactSolution {
        ExactSolution::new("control_xyt", vec![(FieldId::base("u"), Formula::Expr(expr("x*y*t")))])
    }

    /// `[0, 1]^3` with 9 points per axis.
    pub fn unit_grid() -> GridSpec {
        GridSpec::new((0.0, 1.0), (0.0, 1.0), (0.0, 1.0), 9).expect("static grid")
    }
}
