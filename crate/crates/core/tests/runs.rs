use nudgeflow_core::driver::{
    coarse_recovery, observe, run_assimilated, run_reference, run_reference_from, DriverConfig, InitialGuess, Setup, Truth,
};
use nudgeflow_core::observation::{interpolation_constant, FunctionalKind};
use nudgeflow_core::scenarios::{example1, example1_speed, example2, example3, Example3Data, Manufactured};
use nudgeflow_core::scenarios::{example1_solution, example2_solution};
use nudgeflow_core::{BoundarySpec, NodalField, Point, StructuredMesh};

/// Residual of `θ_t − DΔθ + ∇·(vθ) − f` by central differences.
fn pde_residual(m: &Manufactured, f: &dyn Fn(Point, f64) -> f64, v: &dyn Fn(Point, f64) -> Point, p: Point, t: f64) -> f64 {
    let h = 1e-4;
    let th = |x: f64, y: f64, s: f64| (m.theta)(Point::new(x, y), s);
    let dt = (th(p.x, p.y, t + h) - th(p.x, p.y, t - h)) / (2.0 * h);
    let lap = (th(p.x + h, p.y, t) + th(p.x - h, p.y, t) + th(p.x, p.y + h, t) + th(p.x, p.y - h, t) - 4.0 * th(p.x, p.y, t)) / (h * h);
    let flux = |x: f64, y: f64| {
        let w = v(Point::new(x, y), t);
        (w.x * th(x, y, t), w.y * th(x, y, t))
    };
    let div = (flux(p.x + h, p.y).0 - flux(p.x - h, p.y).0 + flux(p.x, p.y + h).1 - flux(p.x, p.y - h).1) / (2.0 * h);
    dt - lap + div - f(p, t)
}

#[test]
fn manufactured_forcings_satisfy_the_equation() {
    let s1 = example1();
    let m1 = example1_solution();
    let th1 = m1.theta.clone();
    let v1 = move |p: Point, t: f64| {
        let w = example1_speed(th1(p, t));
        Point::new(w, w)
    };
    let s2 = example2();
    let m2 = example2_solution();
    for k in 0..25 {
        let p = Point::new(0.1 + 0.03 * k as f64, 0.85 - 0.029 * k as f64);
        let t = 0.04 * k as f64;
        let r1 = pde_residual(&m1, &*s1.forcing, &v1, p, t);
        let r2 = pde_residual(&m2, &*s2.forcing, &|_, _| Point::new(1.0, 0.0), p, t);
        assert!(r1.abs() < 1e-5 && r2.abs() < 1e-5, "{r1} {r2} at {p:?}, {t}");
    }
}

#[test]
fn runs_are_deterministic() {
    let scn = example1().with_resolution(20, 20).with_coarse_steps(3).unwrap();
    let setup = Setup::new(&scn, Some(FunctionalKind::PointValue)).unwrap();
    let exact = scn.exact.clone().unwrap();
    let cfg = DriverConfig::default();
    let obs = observe(&scn, &setup, Truth::Analytic(&*exact)).unwrap();
    let a = run_assimilated(&scn, &setup, 50.0, InitialGuess::Zero, &obs, Some(Truth::Analytic(&*exact)), &cfg).unwrap();
    let b = run_assimilated(&scn, &setup, 50.0, InitialGuess::Zero, &obs, Some(Truth::Analytic(&*exact)), &cfg).unwrap();
    assert_eq!(a.trajectory.states, b.trajectory.states);
    assert_eq!(a.report.samples, b.report.samples);
}

#[test]
fn zero_relaxation_reproduces_the_reference_bitwise() {
    for scn in [
        example1().with_resolution(20, 20).with_coarse_steps(3).unwrap(),
        example2().with_resolution(20, 20).with_coarse_steps(5).unwrap(),
    ] {
        let setup = Setup::new(&scn, Some(FunctionalKind::PointValue)).unwrap();
        let exact = scn.exact.clone().unwrap();
        let cfg = DriverConfig::default();
        let obs = observe(&scn, &setup, Truth::Analytic(&*exact)).unwrap();
        let nudged = run_assimilated(&scn, &setup, 0.0, InitialGuess::Zero, &obs, None, &cfg).unwrap();
        let reference = run_reference_from(&scn, &setup, NodalField::zeros(&setup.mesh), &cfg).unwrap();
        assert_eq!(nudged.trajectory.times, reference.trajectory.times);
        for (a, b) in nudged.trajectory.states.iter().zip(&reference.trajectory.states) {
            assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

#[test]
fn reference_run_tracks_the_exact_solution() {
    let scn = example2().with_resolution(20, 20).with_coarse_steps(10).unwrap();
    let setup = Setup::new(&scn, None).unwrap();
    let out = run_reference(&scn, &setup, &DriverConfig::default()).unwrap();
    let r = out.report.samples.last().unwrap().r.unwrap();
    assert!(r < 5.0, "reference error {r}%");
    assert!(out.report.max_mass_residual() < 1e-9);
}

#[test]
fn postprocessed_flux_is_conservative_in_a_coupled_run() {
    let scn = example3(Example3Data::stand_in(3, 16).unwrap())
        .unwrap()
        .with_resolution(30, 30)
        .with_coarse_steps(2)
        .unwrap();
    let setup = Setup::new(&scn, None).unwrap();
    let cfg = DriverConfig {
        raw_flux_check: true,
        ..DriverConfig::default()
    };
    let out = run_reference(&scn, &setup, &cfg).unwrap();
    assert_eq!(out.report.flux.len(), 2);
    for rec in &out.report.flux {
        assert!(rec.max_residual <= 1e-10 * rec.source_scale);
        assert!(rec.raw_residual.unwrap() > rec.max_residual);
    }
}

#[test]
fn interpolation_constant_is_stable_across_spacings() {
    let m = StructuredMesh::new(60, 60, 1.0, 1.0, BoundarySpec::all_dirichlet()).unwrap();
    let c = interpolation_constant(&m, FunctionalKind::PointValue, &[0.1, 0.2]).unwrap();
    let c1 = interpolation_constant(&m, FunctionalKind::PointValue, &[0.1]).unwrap();
    let c2 = interpolation_constant(&m, FunctionalKind::PointValue, &[0.2]).unwrap();
    assert!(c > 0.0 && c < 1.0);
    assert!((c1 / c2 - 1.0).abs() < 0.1);
    assert!(interpolation_constant(&m, FunctionalKind::PointValue, &[0.07]).is_err());
}

#[test]
fn strong_relaxation_decays_faster() {
    let mut scn = example1().with_resolution(30, 30).with_coarse_steps(20).unwrap();
    scn.hbar = 0.1;
    let setup = Setup::new(&scn, Some(FunctionalKind::PointValue)).unwrap();
    let exact = scn.exact.clone().unwrap();
    let obs = observe(&scn, &setup, Truth::Analytic(&*exact)).unwrap();
    let rate = |mu: f64| {
        let out = run_assimilated(&scn, &setup, mu, InitialGuess::Zero, &obs, Some(Truth::Analytic(&*exact)), &DriverConfig::default()).unwrap();
        out.report.decay_fit().unwrap().rate
    };
    let (weak, strong) = (rate(1.0), rate(1000.0));
    assert!(strong < weak && weak < 0.0, "{strong} {weak}");
}

#[test]
fn new_measurements_pull_the_state_back() {
    let scn = example3(Example3Data::stand_in(1, 32).unwrap()).unwrap().with_resolution(60, 60);
    let base = Setup::new(&scn, None).unwrap();
    let reference = run_reference(&scn, &base, &DriverConfig::default()).unwrap();
    let setup = Setup::with_hbar(&scn, 1.0 / 30.0, FunctionalKind::PointValue).unwrap();
    let truth = Truth::Reference(&reference.trajectory);
    let obs = observe(&scn, &setup, truth).unwrap();
    let out = run_assimilated(&scn, &setup, scn.mu, InitialGuess::Interpolated, &obs, Some(truth), &DriverConfig::default()).unwrap();
    let (ok, total) = coarse_recovery(&out.report, &scn.partition);
    assert_eq!(total, scn.partition.n_coarse() - 1);
    assert_eq!(ok, total);
}
