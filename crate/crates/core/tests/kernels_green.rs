use sqgo_core::field::{GridSpec, ScalarField};
use sqgo_core::green::oracle::{brute_force_green_oracle, GreenOracle};
use sqgo_core::green::{
    apply_g_f_delta, apply_k_f_delta, eval_g_exterior, eval_grad_h, eval_h, BiotSavartOperator, ObstacleGeometry,
};
use sqgo_core::kernels::{
    check_blend, constant_c, cutoff_chi, cutoff_chi_delta, eval_g, eval_g_delta, eval_grad_g_delta, eval_k,
    BlendProfile, KernelConfig,
};
use sqgo_core::{perp, Vec2};

fn unit() -> ObstacleGeometry {
    ObstacleGeometry::new(1.0).unwrap()
}

fn kernel(delta: f64) -> KernelConfig {
    KernelConfig::new(delta, 0.5, BlendProfile::default()).unwrap()
}

fn polar(r: f64, a: f64) -> Vec2 {
    Vec2::new(r * a.cos(), r * a.sin())
}

#[test]
fn regularized_kernel_examples() {
    let k = kernel(0.1);
    let x = Vec2::new(0.2, 0.0);
    assert_eq!(eval_g_delta(x, &k), constant_c() / 0.2);
    let g0 = eval_g_delta(Vec2::zeros(), &k);
    assert!(g0.is_finite() && g0 <= 2.0 * constant_c() / 0.1);
    let mut prev = f64::INFINITY;
    for i in 0..=400 {
        let g = eval_g_delta(Vec2::new(0.0, 0.4 * i as f64 / 400.0), &k);
        assert!(g <= prev);
        prev = g;
    }
    for delta in [0.4, 0.1, 0.025] {
        assert!(check_blend(&kernel(delta), 10_000).passes());
    }
}

#[test]
fn regularized_gradient_matches_differences_inside_and_out() {
    let k = kernel(0.1);
    let f = |p: Vec2| eval_g_delta(p, &k);
    for x in [polar(0.03, 0.4), polar(0.07, 2.0), polar(0.099, -1.0), polar(0.15, 0.3), polar(1.0, 1.0)] {
        let h = 1e-6;
        let fd = Vec2::new(
            (f(x + Vec2::new(h, 0.0)) - f(x - Vec2::new(h, 0.0))) / (2.0 * h),
            (f(x + Vec2::new(0.0, h)) - f(x - Vec2::new(0.0, h))) / (2.0 * h),
        );
        let g = eval_grad_g_delta(x, &k);
        assert!((g - fd).norm() <= 1e-6 * g.norm().max(1.0), "{x:?}: {g:?} vs {fd:?}");
    }
}

#[test]
fn biot_savart_kernel_is_perp_gradient() {
    for x in [polar(0.5, 0.1), polar(2.0, 2.2), polar(9.0, -2.5)] {
        let h = 1e-5 * x.norm();
        let g = |p: Vec2| eval_g(p).unwrap();
        let grad = Vec2::new(
            (g(x + Vec2::new(h, 0.0)) - g(x - Vec2::new(h, 0.0))) / (2.0 * h),
            (g(x + Vec2::new(0.0, h)) - g(x - Vec2::new(0.0, h))) / (2.0 * h),
        );
        let k = eval_k(x).unwrap();
        assert!((k - perp(grad)).norm() <= 1e-6 * k.norm());
    }
    assert!(eval_g(Vec2::zeros()).is_err());
}

#[test]
fn cutoff_examples() {
    assert_eq!(cutoff_chi(-1.0, 0.5), 1.0);
    assert_eq!(cutoff_chi(0.6, 0.5), 0.0);
    let v = cutoff_chi_delta(0.15, 0.1);
    assert!(v > 0.0 && v < 1.0);
}

#[test]
fn exterior_green_properties() {
    let geom = unit();
    let pairs = [
        (polar(1.3, 0.2), polar(2.0, 1.5)),
        (polar(1.05, -0.4), polar(1.1, 2.9)),
        (polar(3.0, 0.0), polar(6.0, 0.1)),
        (polar(1.5, 2.0), polar(1.6, 2.05)),
    ];
    for (x, y) in pairs {
        let a = eval_g_exterior(x, y, &geom).unwrap();
        let b = eval_g_exterior(y, x, &geom).unwrap();
        assert!((a.value - b.value).abs() <= 1e-13 * a.value);
        let h = eval_h(x, y, &geom).unwrap();
        assert!(h >= 0.0);
        assert!((eval_g(x - y).unwrap() - a.value - h).abs() <= 1e-12 * a.whole_plane_part);
    }
    // Far from the disk the obstacle stops mattering.
    let x = Vec2::new(15.0, 0.0);
    let y = Vec2::new(15.0, 1.0);
    let v = eval_g_exterior(x, y, &geom).unwrap().value;
    assert!((v / eval_g(x - y).unwrap() - 1.0).abs() < 0.01);
    // Zero on the boundary circle.
    for a in [0.0, 1.0, 2.5, 4.0] {
        assert!(eval_g_exterior(polar(2.0, 0.3), polar(1.0, a), &geom).unwrap().value.abs() < 1e-12);
    }
}

#[test]
fn regular_part_gradient_grows_at_most_like_inverse_three_halves() {
    let geom = unit();
    let y = polar(2.5, 0.5);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for k in 1..=8 {
        let d = 10f64.powf(-(k as f64) / 2.0);
        let g = eval_grad_h(polar(1.0 + d, 0.1), y, &geom).unwrap().norm();
        xs.push(d.ln());
        ys.push(g.ln());
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / xs.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>();
    assert!(slope >= -1.5 - 1e-2, "log-log slope {slope}");
}

fn annulus() -> GridSpec {
    GridSpec::new(1.0, 4.0, 48, 96).unwrap()
}

fn bump(g: GridSpec, c: Vec2) -> ScalarField {
    ScalarField::from_fn(g, 0.0, move |p| (-(p - c).norm_squared() / 0.16).exp())
}

#[test]
fn operator_zero_cutoff_and_linearity() {
    let g = annulus();
    let geom = unit();
    let k = kernel(0.2);
    let targets = [polar(1.1, 0.3), polar(1.25, 1.0), polar(2.5, 2.0), polar(3.5, -1.0)];
    let zero = apply_k_f_delta(&ScalarField::zeros(g, 0.0), &targets, &k, &geom).unwrap();
    assert!(zero.iter().all(|v| v.norm() == 0.0));
    let f1 = bump(g, Vec2::new(2.0, 0.5));
    let f2 = bump(g, Vec2::new(-1.5, 2.0));
    let pot = apply_g_f_delta(&f1, &targets, &k, &geom).unwrap();
    // Within δ of the disk the prefactor vanishes.
    assert_eq!(pot[0], 0.0);
    assert!(pot[2] != 0.0);
    let mix = f1.combine(2.0, &f2, -0.5).unwrap();
    let a = apply_k_f_delta(&f1, &targets, &k, &geom).unwrap();
    let b = apply_k_f_delta(&f2, &targets, &k, &geom).unwrap();
    let m = apply_k_f_delta(&mix, &targets, &k, &geom).unwrap();
    for i in 0..targets.len() {
        let lin = a[i] * 2.0 - b[i] * 0.5;
        assert!((m[i] - lin).norm() <= 1e-12 * (1.0 + lin.norm()));
    }
}

#[test]
fn radial_density_gives_azimuthal_velocity() {
    let g = annulus();
    let op = BiotSavartOperator::new(g, kernel(0.2), unit()).unwrap();
    let f = ScalarField::from_fn(g, 0.0, |p| (-(p.norm() - 2.5).powi(2) / 0.2).exp());
    let out = op.apply(&f).unwrap();
    let vmax = out.azimuthal.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let rmax = out.radial.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    assert!(vmax > 0.0 && rmax <= 1e-12 * vmax, "{rmax} vs {vmax}");
}

#[test]
fn operator_l2_bound_is_stable_in_delta() {
    let g = GridSpec::new(1.0, 4.0, 96, 192).unwrap();
    let f = bump(g, Vec2::new(2.2, 0.7));
    let norm = |v: &[f64], w: &[f64]| -> f64 {
        let nt = g.n_theta();
        (0..v.len()).map(|i| (v[i] * v[i] + w[i] * w[i]) * g.weight(i / nt)).sum::<f64>().sqrt()
    };
    let fl2 = sqgo_core::field::lp_norm(&f, sqgo_core::field::LpExponent::Finite(2.0));
    let ratios: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&d| {
            let out = BiotSavartOperator::new(g, kernel(d), unit()).unwrap().apply(&f).unwrap();
            norm(&out.radial, &out.azimuthal) / fl2
        })
        .collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0_f64), |(l, h), r| (l.min(*r), h.max(*r)));
    assert!(hi / lo < 1.5, "{ratios:?}");
}

#[test]
fn oracle_operator_structure() {
    let o: GreenOracle = brute_force_green_oracle(24, unit()).unwrap();
    let m = o.operator_matrix();
    let scale = m.amax();
    for i in 0..m.nrows() {
        for j in 0..i {
            assert!((m[(i, j)] - m[(j, i)]).abs() <= 1e-8 * scale);
        }
    }
    let row = o.green_row(o.unknown_count() / 3, sqgo_core::green::oracle::FarField::Exterior).unwrap();
    for (idx, v) in row.iter().enumerate() {
        if o.lattice_point(idx).norm() <= 1.0 {
            assert_eq!(*v, 0.0);
        }
    }
}
