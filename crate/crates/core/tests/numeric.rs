use coverlab::catalog::{Catalog, SystemRef};
use coverlab::jet::{Covering, OrientedSystem};
use coverlab::numeric::fixtures::{control, cubic_wave, linear_pair, radical_pair, unit_grid, zero};
use coverlab::numeric::{
    commutativity_test, estimate_convergence_order, fit_slope, Certified, Commutativity, FlowSpec, GridSpec, Order,
};
use coverlab::{Error, FieldId};

fn system(id: &str) -> OrientedSystem {
    Catalog::embedded().unwrap().system(&SystemRef::plain(id)).unwrap()
}

fn spectral() -> Covering {
    Catalog::embedded().unwrap().covering("cov.lambda").unwrap().covering.clone()
}

fn flow(sol: &Certified, spec: &FlowSpec) -> Result<Commutativity, Error> {
    commutativity_test(&spectral(), &FieldId::parameter("lambda"), 1.0, sol, spec)
}

fn slope(o: &Order) -> f64 {
    match o {
        Order::Slope(s) => *s,
        Order::Exact => panic!("expected a slope"),
    }
}

#[test]
fn only_solutions_are_certified() {
    assert!(cubic_wave().certify(&system("eq.rdDym")).is_ok());
    assert!(zero().certify(&system("eq.rdDym")).is_ok());
    assert!(linear_pair().certify(&system("sys.rdDym2")).is_ok());
    assert!(radical_pair().certify(&system("sys.rdDym2")).is_ok());
    assert!(control().certify(&system("eq.rdDym")).is_err());
    assert!(cubic_wave().certify(&system("eq.boyer_finley_r")).is_err());
}

#[test]
fn cubic_wave_is_second_order() {
    let sys = system("eq.rdDym");
    let c = estimate_convergence_order(&cubic_wave().certify(&sys).unwrap(), &sys, &unit_grid(), 2).unwrap();
    let s = slope(&c.order);
    assert!((1.6..=2.4).contains(&s), "{s}");
    assert!((s - 1.93).abs() < 0.05, "{s}");
    assert!(c.monotone(0.1));
    assert_eq!(c.rows.len(), 3);
}

#[test]
fn linear_pair_is_exact() {
    let sys = system("sys.rdDym2");
    let c = estimate_convergence_order(&linear_pair().certify(&sys).unwrap(), &sys, &unit_grid(), 2).unwrap();
    assert_eq!(c.order, Order::Exact);
}

#[test]
fn radical_pair_is_second_order() {
    let sys = system("sys.rdDym2");
    let c = estimate_convergence_order(&radical_pair().certify(&sys).unwrap(), &sys, &unit_grid(), 2).unwrap();
    let s = slope(&c.order);
    assert!((1.6..=2.4).contains(&s), "{s}");
    assert!(c.monotone(0.1));
}

#[test]
fn control_residual_does_not_converge() {
    let sys = system("eq.rdDym");
    let c = estimate_convergence_order(&Certified::control(control()), &sys, &unit_grid(), 2).unwrap();
    let s = slope(&c.order);
    assert!(s < 0.5, "{s}");
    assert!(c.residuals[2] > 0.1, "{:?}", c.residuals);
}

#[test]
fn flows_commute_on_the_cubic_wave() {
    let spec = FlowSpec::default();
    let wave = flow(&cubic_wave().certify(&system("eq.rdDym")).unwrap(), &spec).unwrap();
    let ctl = flow(&Certified::control(control()), &spec).unwrap();
    let s = wave.slope.unwrap();
    assert!((1.6..=2.6).contains(&s), "{s}");
    assert!((wave.mismatch[0] - 1.43e-3).abs() < 1e-4, "{:?}", wave.mismatch);
    for (a, b) in wave.mismatch.iter().zip(&ctl.mismatch) {
        assert!(a < b, "{a} vs {b}");
    }
    assert!(ctl.slope.unwrap() < 0.5);
}

#[test]
fn flows_commute_exactly_on_zero() {
    let c = flow(&zero().certify(&system("eq.rdDym")).unwrap(), &FlowSpec::default()).unwrap();
    assert!(c.mismatch.iter().all(|m| *m <= 1e-10), "{:?}", c.mismatch);
}

#[test]
fn large_steps_are_reported_unstable() {
    let spec = FlowSpec { cfl: 20.0, delta: 1.0, ..FlowSpec::default() };
    let err = flow(&cubic_wave().certify(&system("eq.rdDym")).unwrap(), &spec).unwrap_err();
    assert!(matches!(err, Error::Unstable { growth, .. } if growth > 10.0), "{err}");
}

#[test]
fn bad_arguments_are_rejected() {
    let sol = zero().certify(&system("eq.rdDym")).unwrap();
    assert!(commutativity_test(&spectral(), &FieldId::parameter("lambda"), 0.0, &sol, &FlowSpec::default()).is_err());
    assert!(GridSpec::new((0.0, 1.0), (0.0, 1.0), (0.0, 1.0), 4).is_err());
    let sys = system("eq.rdDym");
    assert!(estimate_convergence_order(&sol, &sys, &unit_grid(), 1).is_err());
}

#[test]
fn slope_fit() {
    let hs = [0.1, 0.05, 0.025];
    let rs: Vec<f64> = hs.iter().map(|h| 3.0 * h * h).collect();
    assert!((fit_slope(&hs, &rs).unwrap() - 2.0).abs() < 1e-12);
}
