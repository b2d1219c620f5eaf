use std::collections::{BTreeSet, HashMap};

use crate::expr::{Atom, Coordinate, FieldId, JetVar, MultiIndex, NormalForm};
use crate::jet::{total_derivative, Bindings, Covering, OrientedSystem};
use crate::Error;

use super::Verdict;

/// The numerator of `e` stripped of its unit content, so that Laurent
/// monomials no longer hide denominators.
fn clear(e: &NormalForm) -> NormalForm {
    if e.is_zero() {
        return NormalForm::zero();
    }
    NormalForm::from_poly(e.numerator().split_unit().2)
}

fn defined_jets(e: &NormalForm, defines: &BTreeSet<FieldId>) -> Vec<JetVar> {
    e.jets().into_iter().filter(|j| defines.contains(&j.field)).collect()
}

/// Derivatives of defined fields; the bare fields may stay.
fn defined_derivatives(e: &NormalForm, defines: &BTreeSet<FieldId>) -> Vec<JetVar> {
    defined_jets(e, defines).into_iter().filter(|j| j.order() > 0).collect()
}

/// Pass iff substituting `bt` into both equations of `src` gives exactly the
/// equations of `dst`.
pub fn verify_backlund_forward(
    bt: &Bindings,
    defines: &BTreeSet<FieldId>,
    src: &Covering,
    dst: &Covering,
) -> Result<Verdict, Error> {
    if src.fiber() != dst.fiber() {
        return Err(Error::Precondition("coverings have different fibers".into()));
    }
    for c in [Coordinate::T, Coordinate::Y] {
        let image = bt.apply(src.equation(c).unwrap())?;
        if let Some(j) = defined_jets(&image, defines).first() {
            return Err(Error::Precondition(format!("substitution leaves unbound jet {j}")));
        }
        let diff = image.sub(dst.equation(c).unwrap());
        if !diff.is_zero() {
            let mut v = Verdict::zero_test(&diff, 1);
            v.diagnostic = Some(format!("{}_{} differs", src.fiber(), c));
            return Ok(v);
        }
    }
    Ok(Verdict::zero_test(&NormalForm::zero(), 2))
}

/// Solve the relations `key = rhs` of `bt` for the first-order jets of the
/// fields it does not define, one single-unknown linear equation at a time.
pub fn solve_backlund_inverse(bt: &Bindings) -> Result<Bindings, Error> {
    let defines = bt.bound_fields();
    let mut eqs: Vec<NormalForm> = Vec::new();
    let mut unknowns: BTreeSet<JetVar> = BTreeSet::new();
    for (j, rhs) in bt.jets() {
        eqs.push(clear(&NormalForm::jet(j.clone()).sub(rhs)));
        unknowns.extend(rhs.jets().into_iter().filter(|k| k.order() == 1 && !defines.contains(&k.field)));
    }
    let mut out = Bindings::new();
    while !unknowns.is_empty() {
        let pick = eqs.iter().enumerate().find_map(|(i, e)| {
            let present: Vec<&JetVar> = unknowns.iter().filter(|u| e.contains_atom(&Atom::Jet((*u).clone()))).collect();
            let [x] = present.as_slice() else { return None };
            let a = e.partial(&Atom::Jet((*x).clone())).ok()?;
            (!a.is_zero() && !a.contains_atom(&Atom::Jet((*x).clone()))).then(|| (i, (*x).clone(), a))
        });
        let Some((i, x, a)) = pick else {
            let left: Vec<String> = unknowns.iter().map(|u| u.to_string()).collect();
            return Err(Error::Precondition(format!("elimination fails for {}", left.join(", "))));
        };
        let e = eqs.remove(i);
        let sol = NormalForm::jet(x.clone()).sub(&e.div(&a)?);
        let mut sub = Bindings::new();
        sub.bind_jet(x.clone(), sol.clone())?;
        for e in eqs.iter_mut() {
            *e = clear(&sub.apply(e)?);
        }
        unknowns.remove(&x);
        out.bind_jet(x, sol)?;
    }
    Ok(out)
}

/// Replaces jets of the defined fields by what the transformation says,
/// differentiating bindings as needed.
struct Expander<'a> {
    bt: &'a Bindings,
    defines: &'a BTreeSet<FieldId>,
    memo: HashMap<JetVar, Option<NormalForm>>,
}

impl<'a> Expander<'a> {
    fn new(bt: &'a Bindings, defines: &'a BTreeSet<FieldId>) -> Self {
        Expander { bt, defines, memo: HashMap::new() }
    }

    /// Substitute every defined-field jet; `None` if some jet has no
    /// admissible expansion.
    fn expand(&mut self, e: &NormalForm) -> Result<Option<NormalForm>, Error> {
        let mut values = HashMap::new();
        for j in defined_derivatives(e, self.defines) {
            match self.jet(&j)? {
                Some(v) => {
                    values.insert(Atom::Jet(j), v);
                }
                None => return Ok(None),
            }
        }
        Ok(Some(e.substitute_with(&mut |a| Ok(values.get(a).cloned()))?))
    }

    /// Search over derivative orders: `f_σ = D_c(f_{σ-c})` for the first `c`
    /// (in t, y, x order) whose lower jet expands and whose derivative only
    /// requests jets the transformation defines.
    fn jet(&mut self, j: &JetVar) -> Result<Option<NormalForm>, Error> {
        if let Some(v) = self.memo.get(j) {
            return Ok(v.clone());
        }
        let v = if let Some(b) = self.bt.get_jet(j) {
            self.expand_binding(b)?
        } else if j.order() <= 1 {
            None
        } else {
            let mut found = None;
            for c in [Coordinate::T, Coordinate::Y, Coordinate::X] {
                let Some(lower) = j.index.lowered(c) else { continue };
                let Some(base) = self.jet(&JetVar::new(j.field.clone(), lower))? else { continue };
                let d = total_derivative(&base, c, None)?;
                if let Some(v) = self.expand(&d)? {
                    found = Some(v);
                    break;
                }
            }
            found
        };
        self.memo.insert(j.clone(), v.clone());
        Ok(v)
    }

    /// A binding may mention bare defined fields (`v` in `u_x = -v + ...`);
    /// those stay until differentiation turns them into bound jets.
    fn expand_binding(&mut self, b: &NormalForm) -> Result<Option<NormalForm>, Error> {
        let mut values = HashMap::new();
        for k in defined_derivatives(b, self.defines) {
            match self.jet(&k)? {
                Some(v) => {
                    values.insert(Atom::Jet(k), v);
                }
                None => return Ok(None),
            }
        }
        Ok(Some(b.substitute_with(&mut |a| Ok(values.get(a).cloned()))?))
    }
}

fn bound_coordinates(bt: &Bindings, f: &FieldId) -> Vec<Coordinate> {
    Coordinate::ALL.into_iter().filter(|c| bt.get_jet(&f.jet(MultiIndex::unit(*c))).is_some()).collect()
}

/// Cross-derivative conditions `D_b(f_a) = D_a(f_b)` for every defined field
/// and every pair of bound coordinates; pass iff all reduce to zero modulo
/// `sys`.
pub fn verify_backlund_compatibility(
    bt: &Bindings,
    defines: &BTreeSet<FieldId>,
    sys: &OrientedSystem,
) -> Result<Verdict, Error> {
    let mut ex = Expander::new(bt, defines);
    let mut trace = 0;
    let mut checked = Vec::new();
    for f in defines {
        let coords = bound_coordinates(bt, f);
        for (i, a) in coords.iter().enumerate() {
            for b in &coords[i + 1..] {
                let fa = ex.jet(&f.jet(MultiIndex::unit(*a)))?.expect("bound");
                let fb = ex.jet(&f.jet(MultiIndex::unit(*b)))?.expect("bound");
                let diff = total_derivative(&fa, *b, None)?.sub(&total_derivative(&fb, *a, None)?);
                let label = format!("({f}_{a})_{b} - ({f}_{b})_{a}");
                let Some(diff) = ex.expand(&diff)? else {
                    return Err(Error::Precondition(format!("no admissible derivative order for {label}")));
                };
                if let Some(j) = defined_derivatives(&diff, defines).first() {
                    return Err(Error::Precondition(format!("{label} still contains {j}")));
                }
                let r = sys.reduce_traced(&diff)?;
                trace += r.trace_len;
                checked.push(label.clone());
                if !r.value.is_zero() {
                    let mut v = Verdict::zero_test(&r.value, trace);
                    v.diagnostic = Some(format!("{label} does not vanish"));
                    return Ok(v);
                }
            }
        }
    }
    if checked.is_empty() {
        return Err(Error::Precondition("no cross-derivative condition to check".into()));
    }
    Ok(Verdict::zero_test(&NormalForm::zero(), trace).with_diagnostic(checked.join("; ")))
}

/// Pass iff every equation of `eq` (written in the defined fields) reduces to
/// zero modulo `sys` after its jets are expressed through `bt`.
pub fn verify_induced_equation(
    bt: &Bindings,
    defines: &BTreeSet<FieldId>,
    eq: &OrientedSystem,
    sys: &OrientedSystem,
) -> Result<Verdict, Error> {
    let mut ex = Expander::new(bt, defines);
    let mut trace = 0;
    for rule in eq.base_rules() {
        let Some(e) = ex.expand(&rule.equation)? else {
            return Err(Error::Precondition(format!(
                "no admissible derivative order for the jets of {}",
                rule.leading
            )));
        };
        if let Some(j) = defined_derivatives(&e, defines).first() {
            return Err(Error::Precondition(format!("induced equation still contains {j}")));
        }
        let r = sys.reduce_traced(&e)?;
        trace += r.trace_len;
        if !r.value.is_zero() {
            return Ok(Verdict::zero_test(&r.value, trace));
        }
    }
    Ok(Verdict::zero_test(&NormalForm::zero(), trace))
}

/// Substituting `inverse` into the right-hand sides of `forward` must give
/// back each key. Returns the first mismatch as a residual.
pub fn verify_round_trip(forward: &Bindings, inverse: &Bindings) -> Result<Verdict, Error> {
    for (j, rhs) in forward.jets() {
        let back = inverse.apply(rhs)?;
        let diff = back.sub(&NormalForm::jet(j.clone()));
        if !diff.is_zero() {
            return Ok(Verdict::zero_test(&diff, 1).with_diagnostic(format!("{j} is not recovered")));
        }
    }
    Ok(Verdict::zero_test(&NormalForm::zero(), forward.jets().len()))
}
