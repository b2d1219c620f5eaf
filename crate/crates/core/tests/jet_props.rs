use coverlab::catalog::{Catalog, SystemRef};
use coverlab::jet::total_derivative;
use coverlab::{Coordinate, NormalForm, Workspace};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("u".to_string()),
        Just("v".to_string()),
        Just("u_x".to_string()),
        Just("u_y".to_string()),
        Just("v_xx".to_string()),
        Just("u_txy".to_string()),
        Just("y".to_string()),
        (-3i32..=3).prop_map(|n| format!("({n})")),
    ]
}

fn expr() -> impl Strategy<Value = String> {
    leaf().prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) + ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            (inner.clone(), leaf()).prop_map(|(a, b)| format!("({a})/(1 + ({b})^2)")),
            (inner, leaf()).prop_map(|(a, b)| format!("({a})*exp({b})")),
        ]
    })
}

fn nf(s: &str) -> NormalForm {
    Workspace::with("u v", "", "").unwrap().nf(s).unwrap()
}

fn d(e: &NormalForm, c: Coordinate) -> NormalForm {
    total_derivative(e, c, None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn total_derivatives_commute(s in expr()) {
        let e = nf(&s);
        for (a, b) in [(Coordinate::T, Coordinate::Y), (Coordinate::X, Coordinate::Y), (Coordinate::T, Coordinate::X)] {
            prop_assert!(d(&d(&e, a), b).equals(&d(&d(&e, b), a)));
        }
    }

    #[test]
    fn leibniz(a in expr(), b in expr()) {
        let (a, b) = (nf(&a), nf(&b));
        for c in Coordinate::ALL {
            let r = d(&a.mul(&b), c).sub(&a.mul(&d(&b, c))).sub(&b.mul(&d(&a, c)));
            prop_assert!(r.is_zero(), "{}", r);
        }
    }

    #[test]
    fn reduction_is_a_projection(s in expr()) {
        let cat = Catalog::embedded().unwrap();
        let sys = cat.system(&SystemRef::plain("sys.rdDym2")).unwrap();
        let once = sys.reduce(&nf(&s)).unwrap();
        prop_assert!(sys.reduce(&once).unwrap().equals(&once));
    }
}

#[test]
fn fiber_derivatives_differ_by_the_compatibility_residual() {
    let cat = Catalog::embedded().unwrap();
    for e in cat.entries().filter_map(|e| e.covering()) {
        let cov = &e.covering;
        let s = NormalForm::jet(cov.fiber().bare());
        let ty = total_derivative(&total_derivative(&s, Coordinate::T, Some(cov)).unwrap(), Coordinate::Y, Some(cov))
            .unwrap();
        let yt = total_derivative(&total_derivative(&s, Coordinate::Y, Some(cov)).unwrap(), Coordinate::T, Some(cov))
            .unwrap();
        let r = cov.compatibility_residual().unwrap();
        assert!(ty.sub(&yt).equals(&r), "{}", cov.fiber());
    }
}
