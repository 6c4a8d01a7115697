use sqgo_core::config::parse_config;
use sqgo_core::diagnostics::{
    osgood_bound, plateau_radius, rearrangement_check, stability_compare, BlowupMonitor, Verdict,
};
use sqgo_core::field::{lp_norm, GridSpec, LpExponent, ScalarField};
use sqgo_core::green::ObstacleGeometry;
use sqgo_core::kernels::KernelConfig;
use sqgo_core::motion::RigidMotionSpec;
use sqgo_core::scheme::{delta_continuation_study, run_simulation, InitialDatum, SimConfig, Simulation};
use sqgo_core::Vec2;

fn geom() -> ObstacleGeometry {
    ObstacleGeometry::new(1.0).unwrap()
}

fn small(motion: RigidMotionSpec, initial: InitialDatum) -> SimConfig {
    let mut c = SimConfig::reference(motion, initial);
    c.grid = GridSpec::new(1.0, 4.0, 48, 96).unwrap();
    c.kernel = KernelConfig::new(0.4, 0.5, Default::default()).unwrap();
    c.dt = 5e-3;
    c.t_end = 0.05;
    c
}

#[test]
fn plateau_radius_grows_when_support_shrinks() {
    let g = GridSpec::new(1.0, 5.0, 80, 64).unwrap();
    let mut prev = 0.0;
    for inner in [1.5, 1.9, 2.3, 2.7] {
        let d = InitialDatum::RadialBump { amplitude: 1.0, inner, outer: 4.5 };
        let f = d.sample(&g, 0.0, 0.25);
        let r = plateau_radius(&f, &geom(), 1e-6);
        assert!(r >= prev, "R({inner}) = {r} < {prev}");
        assert!((r - (inner - 1.0)).abs() <= 2.0 * g.dr(), "R({inner}) = {r}");
        prev = r;
    }
    let flat = ScalarField::constant(g, 0.3, 0.0);
    assert_eq!(plateau_radius(&flat, &geom(), 1e-6), 4.0);
}

#[test]
fn osgood_and_monitor_examples() {
    assert!((osgood_bound(1.0, 0.0) - (-1.0f64).exp()).abs() < 1e-15);
    assert!(osgood_bound(0.5, 1.0) < osgood_bound(0.5, 0.5));
    assert_eq!(osgood_bound(0.0, 3.0), 0.0);

    let mut m = BlowupMonitor::new(1e3);
    for _ in 0..10 {
        assert_eq!(m.accumulate(1.0, 0.1), Verdict::Continue);
    }
    assert!((m.integral - 1.0).abs() < 1e-12);
    let mut tight = BlowupMonitor::new(0.55);
    let verdicts: Vec<_> = (0..10).map(|_| tight.accumulate(1.0, 0.1)).collect();
    assert_eq!(verdicts.iter().position(|v| *v == Verdict::BlowupSuspected), Some(5));
    assert_eq!(verdicts[9], Verdict::BlowupSuspected);
}

#[test]
fn rearrangement_and_stability_comparisons() {
    let g = GridSpec::new(1.0, 4.0, 48, 96).unwrap();
    let f = ScalarField::from_fn(g, 0.0, |p| (-(p - Vec2::new(2.5, 0.0)).norm_squared() / 0.25).exp());
    let thresholds: Vec<f64> = (1..=10).map(|j| j as f64 / 11.0).collect();
    assert_eq!(rearrangement_check(&f, &f, &thresholds), 0.0);
    let turned = f.rotate_cells(17);
    assert!(rearrangement_check(&turned, &f, &thresholds) < 1e-12);
    assert!(rearrangement_check(&f.map(|x| 1.2 * x), &f, &thresholds) > 0.05);

    let run: Vec<ScalarField> = (0..4)
        .map(|k| {
            let mut s = f.clone();
            s.set_time(k as f64 * 0.1);
            s
        })
        .collect();
    let same = stability_compare(&run, &run).unwrap();
    assert!(same.distances.iter().all(|d| *d == 0.0));
    assert_eq!(same.growth_rate, 0.0);
    let grown: Vec<ScalarField> =
        run.iter().map(|s| s.combine(1.0, &s.map(|_| 1e-3 * (s.time()).exp()), 1.0).unwrap()).collect();
    let rep = stability_compare(&run, &grown).unwrap();
    assert!((rep.growth_rate - 1.0).abs() < 1e-9, "{}", rep.growth_rate);
    assert!(stability_compare(&run, &run[..2]).is_err());
}

#[test]
fn radial_datum_is_steady_on_a_resting_disk() {
    let cfg = small(
        RigidMotionSpec::stationary(),
        InitialDatum::RadialBump { amplitude: 0.5, inner: 1.8, outer: 3.6 },
    );
    let sim = Simulation::new(cfg).unwrap();
    let mut state = sim.initial_state().unwrap();
    let start = state.omega.clone();
    for _ in 0..3 {
        let before = state.omega.clone();
        sim.advance(&mut state).unwrap();
        let change = lp_norm(&state.omega.combine(1.0, &before, -1.0).unwrap(), LpExponent::Infinity);
        assert!(change <= 1e-4, "per-step change {change:e}");
    }
    assert!(lp_norm(&state.omega.combine(1.0, &start, -1.0).unwrap(), LpExponent::Infinity) <= 3e-4);
}

#[test]
fn picard_residuals_contract() {
    let cfg = small(
        RigidMotionSpec::spin(0.5),
        InitialDatum::GaussianBump { amplitude: 0.5, center: [2.5, 0.0], width: 0.5 },
    );
    let out = run_simulation(&cfg).unwrap();
    assert_eq!(out.state.picard_history.len(), cfg.step_count());
    for rec in &out.state.picard_history {
        assert!(rec.iterations <= 8);
        assert!(rec.residuals.last().unwrap() <= &cfg.picard_tol);
        assert!(rec.residuals.windows(2).all(|w| w[1] < w[0]), "{:?}", rec.residuals);
    }
}

#[test]
fn zero_datum_and_identical_deltas() {
    let cfg = small(RigidMotionSpec::spin(1.0), InitialDatum::Zero);
    let out = run_simulation(&cfg).unwrap();
    assert_eq!(out.state.omega.max_abs(), 0.0);
    assert!(out.state.diagnostics.records.iter().all(|r| r.l2 == 0.0));

    let bump = small(
        RigidMotionSpec::stationary(),
        InitialDatum::GaussianBump { amplitude: 0.5, center: [2.5, 0.5], width: 0.5 },
    );
    let table = delta_continuation_study(&bump, &[0.4, 0.4]).unwrap();
    assert_eq!(table.distances[0].2, 0.0);
    assert_eq!(table.distances[0].3, 0.0);
    assert!(delta_continuation_study(&bump, &[0.4]).is_err());
}

#[test]
fn configuration_errors_name_the_key() {
    let err = parse_config("[kernel]\ndelta = 0.5\n[grid]\nr_max = 6.0\n").unwrap_err().to_string();
    assert!(err.contains("r_max") || err.contains("delta"), "{err}");
    let err = parse_config("[time]\ndt = -0.01\n").unwrap_err().to_string();
    assert!(err.contains("line 2") && err.contains("dt"), "{err}");
    let err = parse_config("[grid]\nn_r = 2\n").unwrap_err().to_string();
    assert!(err.contains("n_r"), "{err}");
}
