mod common;

use std::sync::Arc;

use common::*;
use spinzero::chart::{lp_norm_fn, make_chart, smooth_periodic, unit_sphere_volume, ChartKind, ChartParams};
use spinzero::clifford::build_spin_rep;
use spinzero::field::{Field, ScalarField, Spinor, SpinorField, VectorField};
use spinzero::refine::fitted_order;
use spinzero::sasaki::standard_orientation;
use spinzero::spincalc::*;
use spinzero::C64;

fn max_route_gap(res: usize) -> (f64, f64) {
    let chart = bumpy_torus(3, res, 7);
    let rep = build_spin_rep(3).unwrap();
    let phi = smooth_spinor(&chart, rep.dim, 3);
    let a = dirac(&chart, &rep, &phi).unwrap();
    let b = dirac_from_connection(&chart, &rep, &phi).unwrap();
    // nodes on the coarse lattice shared by both resolutions
    let nodes = chart.sample_nodes(200, 0, (res - 0) / 8, 1);
    let gap = nodes.iter().map(|&i| (a.at(i) - b.at(i)).norm()).fold(0.0, f64::max);
    (chart.h[0], gap)
}

#[test]
fn dirac_routes_agree_to_fourth_order() {
    let (h1, e1) = max_route_gap(16);
    let (h2, e2) = max_route_gap(32);
    let p = fitted_order(&[h1, h2], &[e1, e2]).unwrap();
    assert!(p >= 3.5, "order {p} ({e1:e}, {e2:e})");
}

#[test]
fn constant_spinor_is_parallel_on_flat_box() {
    let chart = make_chart(ChartKind::FlatBox, 3, 10, &ChartParams::default()).unwrap();
    let rep = build_spin_rep(3).unwrap();
    let phi = SpinorField::constant(chart.len(), Spinor::from_slice(&[C64::new(0.3, -0.2), C64::new(1.0, 0.5)]));
    assert!(killing_residual(&chart, &rep, &phi, 0.0).unwrap() < 1e-14);
    assert!(killing_residual(&chart, &rep, &phi, 0.5).unwrap() > 0.1);
}

#[test]
fn degenerate_and_mismatched_inputs() {
    let chart = torus(3, 8);
    let rep = build_spin_rep(3).unwrap();
    let zero = SpinorField::constant(chart.len(), Spinor::zeros(2));
    assert!(matches!(killing_residual(&chart, &rep, &zero, 0.5), Err(spinzero::Error::Degenerate(_))));
    let short = SpinorField::constant(10, Spinor::zeros(2));
    assert!(matches!(dirac(&chart, &rep, &short), Err(spinzero::Error::Shape(_))));
    assert!(KillingSpec::new(0.3).is_err());
    assert!(matches!(
        killing_spinor_sphere(&chart, &rep, KillingSpec::new(0.5).unwrap(), &Spinor::basis(2, 0)),
        Err(spinzero::Error::Unsupported(_))
    ));
    let s4 = sphere(4, 8, 3.0);
    assert!(matches!(sphere_zero_mode(&s4, Arc::new(build_spin_rep(4).unwrap())), Err(spinzero::Error::Unsupported(_))));
}

#[test]
fn sphere_killing_spinor_s3() {
    let chart = sphere(3, 128, 2.5);
    let rep = build_spin_rep(3).unwrap();
    let psi0 = Spinor::basis(2, 0);
    let phi = killing_spinor_sphere(&chart, &rep, KillingSpec::new(-0.5).unwrap(), &psi0).unwrap();
    let r = killing_residual(&chart, &rep, &phi, -0.5).unwrap();
    assert!(r <= 1e-5, "killing residual {r:e}");
    assert!(killing_residual(&chart, &rep, &phi, 0.5).unwrap() > 0.5);
    let dev = (0..chart.len()).map(|i| (phi.at(i).norm() - 1.0).abs()).fold(0.0, f64::max);
    assert!(dev <= 1e-6, "length deviation {dev:e}");
    let e = dirac_eigen_residual(&chart, &rep, &phi, 1.5).unwrap();
    assert!(e <= 1e-5 * 1.5, "D phi = (n/2) phi: {e:e}");
}

#[test]
fn killing_coefficients_fit_the_derived_ratio() {
    let chart = sphere(3, 48, 3.0);
    let rep = build_spin_rep(3).unwrap();
    let psi0 = Spinor::from_slice(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
    for b in [-0.5, 0.5] {
        let (c1, c2) = fit_killing_coefficients(&chart, &rep, b, &psi0).unwrap();
        assert!((c2 / c1 - 2.0 * b).abs() < 1e-3, "b={b}: ratio {}", c2 / c1);
        let phi = killing_spinor_sphere(&chart, &rep, KillingSpec::new(b).unwrap(), &psi0).unwrap();
        let e = dirac_eigen_residual(&chart, &rep, &phi, -3.0 * b).unwrap();
        assert!(e < 1e-3);
    }
}

#[test]
fn sphere_zero_mode_s3() {
    let rep = Arc::new(build_spin_rep(3).unwrap());
    let mut hs = Vec::new();
    let mut rs = Vec::new();
    for res in [33, 49, 65] {
        let chart = sphere(3, res, 3.0);
        let rec = sphere_zero_mode(&chart, rep.clone()).unwrap();
        hs.push(chart.h[0]);
        rs.push(rec.residual);
        if res == 65 {
            assert!(rec.residual <= 1e-4, "residual {:e}", rec.residual);
            let vol = chart.volume().value;
            let expect = 2.25 * vol.powf(2.0 / 3.0);
            assert!((rec.lambda.powi(2) / expect - 1.0).abs() < 1e-3);
            let target = 1.5 / rec.lambda;
            let dev = (0..chart.len()).map(|i| (rec.potential.norm_at(3, i) - target).abs()).fold(0.0, f64::max);
            assert!(dev <= 1e-5 * target.max(1.0));
            assert!((rec.potential_norm - 1.0).abs() < 1e-12);
        }
    }
    let p = fitted_order(&hs, &rs).unwrap();
    assert!(p >= 3.5, "order {p}: {rs:?}");
}

#[test]
fn scalar_potential_mode_on_the_sphere() {
    let chart = sphere(3, 48, 3.0);
    let rep = Arc::new(build_spin_rep(3).unwrap());
    let (_, psi0) = standard_orientation(&rep).unwrap();
    let phi = killing_spinor_sphere(&chart, &rep, KillingSpec::new(-0.5).unwrap(), &psi0).unwrap();
    let vol = chart.volume().value;
    let f = ScalarField::constant(chart.len(), vol.powf(-1.0 / 3.0));
    let rec = ZeroModeRecord::new(chart.clone(), rep, phi, Potential::scalar(&f), 1.5 * vol.powf(1.0 / 3.0)).unwrap();
    assert!(rec.residual < 1e-3);
    assert!((rec.potential_norm - 1.0).abs() < 1e-12);
}

#[test]
fn random_pairs_are_not_zero_modes() {
    let chart = bumpy_torus(3, 12, 5);
    let rep = Arc::new(build_spin_rep(3).unwrap());
    for seed in 0..5 {
        let phi = smooth_spinor(&chart, 2, 100 + seed);
        let comps: Vec<_> = (0..3).map(|k| smooth_periodic(&chart, 200 + 3 * seed + k, 1.0, 1, 3)).collect();
        let a = VectorField::from_fn(chart.len(), move |i| comps.iter().map(|c| c.at(i) - 1.0).collect());
        let rec = ZeroModeRecord::new(chart.clone(), rep.clone(), phi, Potential::vector(&a), 1.0).unwrap();
        assert!(rec.residual > 0.1, "residual {}", rec.residual);
    }
}

fn plane_wave_record(res: usize) -> ZeroModeRecord {
    let chart = torus(3, res);
    let rep = Arc::new(build_spin_rep(3).unwrap());
    let psi0 = Spinor::from_slice(&[C64::new(0.8, 0.1), C64::new(-0.3, 0.5)]);
    torus_plane_wave_mode(&chart, rep, &[1.0, -2.0, 1.0], &psi0).unwrap()
}

#[test]
fn plane_waves_are_zero_modes() {
    let a = plane_wave_record(16);
    let b = plane_wave_record(32);
    assert!(b.residual < 1e-3);
    let p = fitted_order(&[a.chart.h[0], b.chart.h[0]], &[a.residual, b.residual]).unwrap();
    assert!(p > 3.5, "order {p}");
    assert!((b.potential_norm - 1.0).abs() < 1e-12);
}

#[test]
fn gauge_transform_keeps_zero_modes() {
    let mut drift = Vec::new();
    let mut hs = Vec::new();
    for res in [16, 32] {
        let rec = plane_wave_record(res);
        let f = smooth_periodic(&rec.chart, 9, 0.5, 1, 3);
        let g = gauge_transform(&rec, &f).unwrap();
        assert!((g.potential_norm - 1.0).abs() < 1e-12);
        // the gauge term can only lengthen the potential in L^n here
        assert!(g.lambda >= rec.lambda * (1.0 - 1e-9));
        drift.push((g.residual * g.lambda - rec.residual * rec.lambda).abs() / rec.lambda);
        hs.push(rec.chart.h[0]);
    }
    assert!(drift[1] < 1e-3);
    assert!(drift[1] <= 1e-8 || fitted_order(&hs, &drift).unwrap() >= 3.5, "{drift:?}");
    // constant gauge functions change nothing
    let rec = plane_wave_record(12);
    let g = gauge_transform(&rec, &ScalarField::constant(rec.chart.len(), 0.7)).unwrap();
    assert!((g.lambda - rec.lambda).abs() < 1e-12 * rec.lambda);
    assert!((g.residual - rec.residual).abs() < 1e-12);
}

#[test]
fn conformal_transform_keeps_lambda_and_norm() {
    for res in [16, 24] {
        let rec = plane_wave_record(res);
        let h = smooth_periodic(&rec.chart, 4, 0.4, 1, 3);
        let c = conformal_transform(&rec, &h).unwrap();
        assert_eq!(c.lambda, rec.lambda);
        assert!((c.potential_norm - rec.potential_norm).abs() < 1e-12);
        assert!(c.residual < 2.0 * rec.residual + 1e-12, "{} vs {}", c.residual, rec.residual);
    }
    let rec = plane_wave_record(12);
    let bad = ScalarField::from_fn(rec.chart.len(), |i| if i == 5 { -1.0 } else { 1.0 });
    assert!(matches!(conformal_transform(&rec, &bad), Err(spinzero::Error::Parameter(_))));
}

#[test]
fn conformal_transform_in_two_dimensions() {
    let chart = torus(2, 32);
    let rep = Arc::new(build_spin_rep(2).unwrap());
    let rec = torus_plane_wave_mode(&chart, rep, &[1.0, 1.0], &Spinor::basis(2, 1)).unwrap();
    let h = smooth_periodic(&chart, 8, 0.3, 1, 3).map(|v| v - 1.0);
    let c = conformal_transform(&rec, &h).unwrap();
    assert!((c.potential_norm - 1.0).abs() < 1e-12);
    assert!(c.residual < 1e-3);
}

fn lichnerowicz(res: usize, seed: u64) -> (f64, LichnerowiczReport) {
    let chart = bumpy_torus(3, res, 21);
    let rep = build_spin_rep(3).unwrap();
    let phi = smooth_spinor(&chart, 2, seed);
    (chart.h[0], schrodinger_lichnerowicz_report(&chart, &rep, &phi).unwrap())
}

#[test]
fn lichnerowicz_and_twistor_identities() {
    for seed in 0..3 {
        let (h1, a) = lichnerowicz(16, seed);
        let (h2, b) = lichnerowicz(32, seed);
        assert!(b.relative <= 1e-4, "{:e}", b.relative);
        assert!(b.twistor_identity_relative <= 1e-4);
        let p = fitted_order(&[h1, h2], &[a.relative, b.relative]).unwrap();
        assert!(p >= 3.5, "order {p}");
        assert!(b.curvature_term.abs() > 1e-3);
    }
}

#[test]
fn kato_inequality_at_nodes() {
    let chart = bumpy_torus(3, 20, 2);
    let rep = build_spin_rep(3).unwrap();
    let phi = smooth_spinor(&chart, 2, 8);
    let nodes = chart.sample_nodes(500, 0, 1, 4);
    let k = kato_ratio(&chart, &rep, &phi, &nodes);
    assert!(k <= 1.0 + 1e-6, "{k}");
}

#[test]
fn killing_spinors_satisfy_the_length_identity() {
    let rep = build_spin_rep(3).unwrap();
    let mut out = Vec::new();
    for res in [33, 65] {
        let chart = sphere(3, res, 3.0);
        let phi = killing_spinor_sphere(&chart, &rep, KillingSpec::new(0.5).unwrap(), &Spinor::basis(2, 1)).unwrap();
        let nodes = chart.sample_nodes(300, 4, 8, 3);
        out.push((chart.h[0], twistor_length_defect(&chart, &rep, &phi, &nodes).unwrap()));
    }
    // |phi|^2 is constant and R/(2(n-1)) |phi|^2 = 3/2 = (2/3) |D phi|^2
    for (h, d) in &out {
        assert!(*d <= 50.0 * h.powi(4) * 1.5, "{out:?}");
    }
    assert!(fitted_order(&[out[0].0, out[1].0], &[out[0].1, out[1].1]).unwrap() > 3.5);
}

#[test]
fn decomposition_into_killing_parts() {
    let chart = sphere(3, 48, 3.0);
    let rep = build_spin_rep(3).unwrap();
    let plus = killing_spinor_sphere(&chart, &rep, KillingSpec::new(-0.5).unwrap(), &Spinor::basis(2, 0)).unwrap();
    let minus = killing_spinor_sphere(&chart, &rep, KillingSpec::new(0.5).unwrap(), &Spinor::basis(2, 1)).unwrap();
    let (p2, m2) = (plus.clone(), minus.clone());
    let sum = SpinorField::from_fn(chart.len(), move |i| p2.at(i) + m2.at(i).scale(C64::new(0.0, 0.5)));
    let (a, b) = decompose_killing(&chart, &rep, &sum, 1e-2).unwrap();
    let nodes = chart.sample_nodes(200, 6, 1, 9);
    for &i in &nodes {
        assert!((a.at(i) - plus.at(i)).norm() < 1e-3);
        assert!((b.at(i) - minus.at(i).scale(C64::new(0.0, 0.5))).norm() < 1e-3);
    }
    // a pure zero mode has no second component and the parts are orthogonal
    let chart = sphere(3, 128, 2.5);
    let plus = killing_spinor_sphere(&chart, &rep, KillingSpec::new(-0.5).unwrap(), &Spinor::basis(2, 0)).unwrap();
    let nodes = chart.sample_nodes(200, 6, 1, 9);
    let (a, b) = decompose_killing(&chart, &rep, &plus, 1e-2).unwrap();
    let worst = nodes.iter().map(|&i| a.at(i).inner(&b.at(i)).norm()).fold(0.0, f64::max);
    assert!(worst <= 1e-5, "{worst:e}");
    let t = bumpy_torus(3, 16, 1);
    let junk = smooth_spinor(&t, 2, 4);
    assert!(matches!(decompose_killing(&t, &rep, &junk, 1e-2), Err(spinzero::Error::Precondition(_))));
}

#[test]
fn potential_norms_match_the_lp_norm() {
    let chart = torus(3, 10);
    let a = VectorField::constant(chart.len(), [0.6, 0.8, 0.0].into_iter().collect());
    let n = lp_norm_fn(&chart, &|i| Potential::vector(&a).norm_at(3, i), 3.0).unwrap();
    let vol = chart.volume().value;
    assert!((n - vol.powf(1.0 / 3.0)).abs() < 1e-12 * n);
    let _ = (unit_sphere_volume(3), Field::<f64>::constant(1, 0.0));
}
