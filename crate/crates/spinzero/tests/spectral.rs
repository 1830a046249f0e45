mod common;

use std::sync::Arc;

use common::{bumpy_torus, sphere, torus};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use spinzero::chart::{conformal_constant, smooth_periodic, unit_sphere_volume, Chart, ChartKind, ChartParams, make_chart};
use spinzero::clifford::build_spin_rep;
use spinzero::field::{ScalarField, Spinor, VectorField};
use spinzero::sasaki::{standard_orientation, two_form_equality_witness};
use spinzero::spectral::*;
use spinzero::spincalc::*;
use spinzero::{Error, C64};

fn weight(chart: &Chart, seed: u64) -> ScalarField {
    smooth_periodic(chart, seed, 0.5, 1, 4).materialize()
}

/// Dense assembly of the pencil straight from its definition:
/// `K = a c U0 (-L) U0 q + (1 - a) diag(c u0 (-L u0) q)`, `M = diag(w u0^{2n/(n-2)} q)`.
fn dense_pencil(chart: &Chart, a: f64, w: &ScalarField) -> (DMatrix<f64>, Vec<f64>) {
    let len = chart.len();
    let n = chart.n as f64;
    let c = conformal_constant(chart.n);
    let mut lap = DMatrix::<f64>::zeros(len, len);
    for j in 0..len {
        for i in 0..len {
            lap[(i, j)] = chart.flat_laplacian(i, |k| if k == j { 1.0 } else { 0.0 });
        }
    }
    let u0: Vec<f64> = (0..len).map(|i| chart.conf_at(i)).collect();
    let q = chart.h.iter().product::<f64>();
    let mut k = DMatrix::<f64>::zeros(len, len);
    for i in 0..len {
        let lu: f64 = (0..len).map(|j| lap[(i, j)] * u0[j]).sum();
        for j in 0..len {
            k[(i, j)] = -a * c * u0[i] * lap[(i, j)] * u0[j] * q;
        }
        k[(i, i)] += (1.0 - a) * c * u0[i] * (-lu) * q;
    }
    let m = (0..len).map(|i| w.at(i) * u0[i].powf(2.0 * n / (n - 2.0)) * q).collect();
    (k, m)
}

fn dense_mu(chart: &Chart, a: f64, w: &ScalarField) -> f64 {
    let (k, m) = dense_pencil(chart, a, w);
    let len = m.len();
    let s: Vec<f64> = m.iter().map(|x| 1.0 / x.sqrt()).collect();
    let c = DMatrix::from_fn(len, len, |i, j| s[i] * k[(i, j)] * s[j]);
    let sym = (&c - c.transpose()).abs().max();
    assert!(sym < 1e-10 * c.abs().max(), "pencil not symmetric ({sym:e})");
    SymmetricEigen::new(c).eigenvalues.min()
}

#[test]
fn torus_solver_matches_dense_eigensolve() {
    let chart = bumpy_torus(3, 8, 4);
    let w = weight(&chart, 9);
    let opts = SolveOptions::default();
    for a in [0.1, 0.5, 1.0] {
        let want = dense_mu(&chart, a, &w);
        let got = mu_a(&chart, a, &w, &opts).unwrap();
        assert!(!got.analytic);
        assert!((got.mu - want).abs() <= 1e-8 * want.abs().max(1.0), "a {a}: {} vs {want}", got.mu);
        // the eigenfunction is a Rayleigh-quotient minimizer of the same pencil
        let iq = i_quotient(&chart, a, &w, &got.u).unwrap();
        assert!((iq - got.mu).abs() <= 1e-8 * want.abs().max(1.0));
    }
}

#[test]
fn mu_a_increases_with_a() {
    let chart = bumpy_torus(3, 12, 4);
    let w = weight(&chart, 9);
    let opts = SolveOptions::default();
    let mus: Vec<f64> = [0.05, 0.1, 0.3, 0.6, 1.0].iter().map(|&a| mu_a(&chart, a, &w, &opts).unwrap().mu).collect();
    for p in mus.windows(2) {
        assert!(p[0] <= p[1] + 1e-9, "{mus:?}");
    }
    let y = y_ga(&chart, &w, &opts).unwrap().mu;
    assert_eq!(y, *mus.last().unwrap());
    // the bumpy torus has regions of negative curvature: small a sees them
    assert!(mus[0] < -0.5, "{mus:?}");
}

#[test]
fn flat_torus_has_zero_spectrum() {
    let chart = torus(3, 10);
    let w = weight(&chart, 2);
    for a in [0.2, 1.0] {
        let r = mu_a(&chart, a, &w, &SolveOptions::default()).unwrap();
        assert!(r.mu.abs() < 1e-10, "mu {}", r.mu);
        let u = r.u.values();
        let spread = u.iter().cloned().fold(f64::MIN, f64::max) - u.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-6 * u[0].abs(), "eigenfunction not constant");
    }
}

#[test]
fn constant_weight_on_the_round_sphere() {
    let chart = sphere(3, 17, 2.0);
    for (wv, a) in [(1.0, 1.0), (2.5, 0.3), (0.25, 0.7)] {
        let w = ScalarField::constant(chart.len(), wv);
        let r = mu_a(&chart, a, &w, &SolveOptions::default()).unwrap();
        assert!(r.analytic);
        assert!((r.mu - 6.0 / wv).abs() < 1e-14);
        // normalized: int w u^2 over the whole sphere is 1
        let u = r.u.at(0);
        assert!((wv * u * u * unit_sphere_volume(3) - 1.0).abs() < 1e-14);
    }
    let bumpy = ScalarField::from_fn(chart.len(), |i| 1.0 + 1e-3 * (i % 7) as f64);
    assert!(matches!(mu_a(&chart, 1.0, &bumpy, &SolveOptions::default()), Err(Error::Unsupported(_))));
}

#[test]
fn conformal_invariance_of_y_and_transport_of_i() {
    let chart = bumpy_torus(3, 12, 4);
    let w = weight(&chart, 9);
    let opts = SolveOptions::default();
    let h = smooth_periodic(&chart, 31, 0.4, 1, 3).materialize();
    let old = chart.conf().clone();
    let moved = chart.with_conf(ScalarField::from_fn(chart.len(), move |i| old.at(i) * h.at(i))).unwrap();
    let h = smooth_periodic(&chart, 31, 0.4, 1, 3).materialize();
    let w_moved = transport_weight(3, &w, &h).materialize();
    let y0 = y_ga(&chart, &w, &opts).unwrap().mu;
    let y1 = y_ga(&moved, &w_moved, &opts).unwrap().mu;
    assert!((y0 - y1).abs() <= 1e-5 * y0.abs().max(1.0), "{y0} vs {y1}");
    // I^1 transports exactly: I_{g~,A~}(u) = I_{g,A}(h u)
    let u = smooth_periodic(&chart, 77, 0.6, 2, 4).materialize();
    let hu = ScalarField::from_values((0..chart.len()).map(|i| h.at(i) * u.at(i)).collect());
    let i1 = i_quotient(&moved, 1.0, &w_moved, &u).unwrap();
    let i0 = i_quotient(&chart, 1.0, &w, &hu).unwrap();
    assert!((i1 - i0).abs() <= 1e-6 * i0.abs().max(1.0), "{i1} vs {i0}");
    // a < 1 is not conformally invariant
    let m0 = mu_a(&chart, 0.1, &w, &opts).unwrap().mu;
    let m1 = mu_a(&moved, 0.1, &w_moved, &opts).unwrap().mu;
    assert!((m0 - m1).abs() > 1e-3, "{m0} vs {m1}");
}

#[test]
fn extremal_metric_collapses_the_family() {
    let chart = bumpy_torus(3, 12, 4);
    let w = weight(&chart, 9);
    let opts = SolveOptions::default();
    let before = mu_a(&chart, 0.1, &w, &opts).unwrap().mu;
    let (new, w_new, rep) = extremal_metric(&chart, &w, &opts).unwrap();
    assert!(rep.relative_residual <= 1e-6, "{rep:?}");
    assert!(rep.min_eigenfunction > 0.0);
    // Y vanishes on conformally flat tori, so the ratio R/w is 0/0 there
    assert!(rep.y.abs() < 1e-9 && rep.ratio_spread.is_none());
    for a in [0.1, 0.5, 1.0] {
        let mu = mu_a(&new, a, &w_new, &opts).unwrap().mu;
        assert!((mu - rep.y).abs() <= 1e-5 * rep.y.abs().max(1.0), "a {a}: {mu}");
    }
    assert!(before < rep.y - 0.5);
}

#[test]
fn yamabe_quotient_values() {
    let s3 = sphere(3, 64, 3.0);
    let q = yamabe_quotient(&s3, &ScalarField::constant(s3.len(), 1.0)).unwrap();
    let want = 6.0 * (2.0 * std::f64::consts::PI.powi(2)).powf(2.0 / 3.0);
    assert!((q / want - 1.0).abs() < 1e-3, "{q} vs {want}");
    let q2 = yamabe_quotient(&s3, &ScalarField::constant(s3.len(), 3.7)).unwrap();
    assert!((q2 / q - 1.0).abs() < 1e-12);

    let flat = torus(3, 10);
    let one = ScalarField::constant(flat.len(), 1.0);
    assert!(yamabe_quotient(&flat, &one).unwrap().abs() < 1e-12);
    let u = smooth_periodic(&flat, 3, 0.5, 1, 3).materialize();
    let scaled = u.map(|v| 2.5 * v);
    let (a, b) = (yamabe_quotient(&flat, &u).unwrap(), yamabe_quotient(&flat, &scaled).unwrap());
    assert!(a > 0.0 && (a - b).abs() < 1e-12 * a);
    assert!(matches!(yamabe_quotient(&flat, &ScalarField::constant(flat.len(), 0.0)), Err(Error::Degenerate(_))));
}

#[test]
fn holder_chain_with_unit_weight_norm() {
    let chart = bumpy_torus(3, 10, 6);
    let raw = weight(&chart, 5);
    let s = chart.integrate_fn(&|i| raw.at(i).powf(1.5)).value.powf(2.0 / 3.0);
    let w = raw.map(move |v| v / s).materialize();
    for seed in 0..4 {
        let u = smooth_periodic(&chart, 40 + seed, 0.7, 2, 4).materialize();
        let i1 = i_quotient(&chart, 1.0, &w, &u).unwrap();
        let q = yamabe_quotient(&chart, &u).unwrap();
        assert!(q >= 0.0 && i1 >= q * (1.0 - 1e-12), "I {i1} < Q {q}");
    }
}

#[test]
fn spectral_error_cases() {
    let chart = torus(3, 8);
    let w = weight(&chart, 1);
    let opts = SolveOptions::default();
    for a in [0.0, -0.3, 1.5, f64::NAN] {
        assert!(matches!(mu_a(&chart, a, &w, &opts), Err(Error::Parameter(_))));
    }
    let zero = ScalarField::constant(chart.len(), 0.0);
    assert!(matches!(mu_a(&chart, 1.0, &zero, &opts), Err(Error::Degenerate(_))));
    let neg = ScalarField::from_fn(chart.len(), |i| if i == 3 { -1.0 } else { 1.0 });
    assert!(matches!(mu_a(&chart, 1.0, &neg, &opts), Err(Error::Parameter(_))));
    let short = ScalarField::constant(5, 1.0);
    assert!(matches!(mu_a(&chart, 1.0, &short, &opts), Err(Error::Shape(_))));
    let boxed = make_chart(ChartKind::FlatBox, 3, 8, &ChartParams::default()).unwrap();
    let wb = ScalarField::constant(boxed.len(), 1.0);
    assert!(matches!(mu_a(&boxed, 1.0, &wb, &opts), Err(Error::Unsupported(_))));
    let t2 = torus(2, 8);
    assert!(matches!(mu_a(&t2, 1.0, &ScalarField::constant(t2.len(), 1.0), &opts), Err(Error::InvalidDimension(_))));
    let bumpy = bumpy_torus(3, 10, 4);
    let tight = SolveOptions { max_iter: 1, ..opts };
    assert!(matches!(mu_a(&bumpy, 0.1, &weight(&bumpy, 9), &tight), Err(Error::Convergence { .. })));
}

fn s3_record(res: usize) -> ZeroModeRecord {
    let rep = Arc::new(build_spin_rep(3).unwrap());
    sphere_zero_mode(&sphere(3, res, 3.0), rep).unwrap()
}

#[test]
fn inequality_is_sharp_on_the_sphere_zero_mode() {
    let rec = s3_record(33);
    let opts = InequalityOptions::default();
    let r = inequality_report(&rec, &opts).unwrap();
    assert_eq!(r.variant, Variant::Standard);
    assert!((r.factor - 3.0 / 8.0).abs() < 1e-15);
    assert!(matches!(r.y_ga, YValue::Analytic(_)) && matches!(r.y_m, YValue::Analytic(_)));
    assert!((r.ratio_ga.unwrap() - 1.0).abs() < 1e-9, "{r:?}");
    assert!((r.ratio_m.unwrap() - 1.0).abs() < 1e-9);
    assert!(r.equality && !r.partial);

    let doubled = ZeroModeRecord::new(rec.chart.clone(), rec.rep.clone(), rec.phi.clone(), rec.potential.scaled(2.0), rec.lambda).unwrap();
    let r2 = inequality_report(&doubled, &opts).unwrap();
    assert!((r2.ratio_ga.unwrap() - 4.0).abs() < 1e-8 && (r2.ratio_m.unwrap() - 4.0).abs() < 1e-8);
    assert!(!r2.equality);

    let lazy = sphere_zero_mode_with_lambda(&rec.chart, rec.rep.clone(), rec.lambda).unwrap();
    assert!(matches!(inequality_report(&lazy, &opts), Err(Error::Precondition(_))));
}

#[test]
fn torus_reports_are_partial() {
    let chart = torus(3, 16);
    let rep = Arc::new(build_spin_rep(3).unwrap());
    let psi0 = Spinor::from_slice(&[C64::new(0.8, 0.1), C64::new(-0.3, 0.5)]);
    let rec = torus_plane_wave_mode(&chart, rep, &[1.0, -2.0, 1.0], &psi0).unwrap();
    let r = inequality_report(&rec, &InequalityOptions::default()).unwrap();
    assert!(r.partial && !r.equality);
    assert!(matches!(r.y_m, YValue::Unavailable(_)));
    // Y([g,A]) = 0 on a flat torus: the bound holds with room to spare
    assert!(r.y_ga.value().unwrap().abs() < 1e-9 && r.ratio_ga.is_none());
    assert!(r.lhs > 1.0);
}

#[test]
fn two_form_variant_on_s5() {
    let rep = Arc::new(build_spin_rep(5).unwrap());
    let (_, psi0) = standard_orientation(&rep).unwrap();
    let chart = sphere(5, 12, 2.0);
    let phi = killing_spinor_sphere(&chart, &rep, KillingSpec::new(-0.5).unwrap(), &psi0).unwrap();
    let nodes = chart.sample_nodes(20, 1, 1, 3);
    let w = two_form_equality_witness(&rep, &chart, &phi, None, &nodes, None).unwrap();
    let rec = ZeroModeRecord::new(chart.clone(), rep, phi, Potential { k: 2, coeffs: w.alpha_frame.clone() }, w.lambda).unwrap();
    let r = inequality_report(&rec, &InequalityOptions::default()).unwrap();
    assert_eq!(r.variant, Variant::TwoForm);
    assert!((r.factor - 5.0 / 32.0).abs() < 1e-15);
    assert!((r.ratio_m.unwrap() - 1.0).abs() < 1e-2, "{r:?}");
    assert!(r.equality);
}

#[test]
fn pointwise_and_combined_variants() {
    let rec = s3_record(49);
    let opts = InequalityOptions::default();
    let p = pointwise_report(&rec.chart, &rec.rep, &rec.phi, &opts).unwrap();
    assert_eq!(p.variant, Variant::Pointwise);
    assert!((p.ratio_m.unwrap() - 1.0).abs() < 1e-3, "{p:?}");

    let chart = rec.chart.clone();
    let (r, ph) = (rec.rep.clone(), rec.phi.clone());
    let xi = VectorField::from_fn(chart.len(), move |i| reeb_vector_of(&r, &ph.at(i)));
    for s in [0.0, 0.4, 1.0] {
        let a = xi.map(move |v| v.iter().map(|x| 1.5 * s * x).collect());
        let f = ScalarField::constant(chart.len(), 1.5 * (1.0 - s));
        let (c, resid) = combined_report(&chart, &rec.rep, &rec.phi, &a, &f, &opts).unwrap();
        assert_eq!(c.variant, Variant::Combined);
        assert!(resid < 1e-3, "s {s}: residual {resid}");
        assert!((c.ratio_ga.unwrap() - 1.0).abs() < 1e-9 && c.equality, "s {s}: {c:?}");
    }
    // the wrong sign of f breaks the equation
    let a = xi.map(|v| v.iter().map(|x| 0.75 * x).collect());
    let f = ScalarField::constant(chart.len(), -0.75);
    let (_, resid) = combined_report(&chart, &rec.rep, &rec.phi, &a, &f, &opts).unwrap();
    assert!(resid > 0.5);
}

#[test]
fn yv_bound_over_gauge_and_conformal_copies() {
    let rec = s3_record(33);
    let h = ScalarField::from_fn(rec.chart.len(), {
        let c = rec.chart.clone();
        move |i| 1.0 + 0.2 * (c.coords(i)[0] * 0.7).sin()
    });
    let conf = conformal_transform(&rec, &h).unwrap();
    let f = ScalarField::from_fn(rec.chart.len(), {
        let c = rec.chart.clone();
        move |i| 0.3 * (c.coords(i)[1]).cos()
    });
    let gauged = gauge_transform(&rec, &f).unwrap();
    assert!(gauged.lambda > rec.lambda);
    let tol = 1e-2;
    let bound = yv_upper_bound(&[gauged.clone(), conf, rec.clone()], tol).unwrap();
    assert!((bound - rec.lambda.powi(2)).abs() < 1e-12 * bound);
    let bad = ZeroModeRecord { residual: 0.5, ..rec.clone() };
    assert!(matches!(yv_upper_bound(&[rec, bad], tol), Err(Error::Precondition(_))));
    assert!(matches!(yv_upper_bound(&[], tol), Err(Error::Precondition(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn i_quotient_scalings(seed in 0u64..1000, cu in 0.1f64..10.0, cw in 0.1f64..10.0, a in 0.05f64..1.0) {
        let chart = bumpy_torus(3, 8, 4);
        let w = weight(&chart, seed);
        let u = smooth_periodic(&chart, seed + 1, 0.5, 1, 3).materialize();
        let base = i_quotient(&chart, a, &w, &u).unwrap();
        let su = u.map(move |v| cu * v);
        let sw = w.map(move |v| cw * v);
        prop_assert!((i_quotient(&chart, a, &w, &su).unwrap() - base).abs() <= 1e-10 * base.abs().max(1.0));
        prop_assert!((i_quotient(&chart, a, &sw, &u).unwrap() * cw - base).abs() <= 1e-10 * base.abs().max(1.0));
    }
}

#[test]
fn surface_gauss_bonnet_and_solvability() {
    let s2 = sphere(2, 801, 40.0);
    let four_pi = 4.0 * std::f64::consts::PI;
    let total = gauss_bonnet_total(&s2).unwrap();
    assert!((total / four_pi - 1.0).abs() < 1e-3, "{total}");
    assert_eq!(euler_characteristic(&s2).unwrap(), 2);
    let c = s2.clone();
    // restriction of an ambient coordinate, bounded and smooth across infinity
    let w = ScalarField::from_fn(s2.len(), move |i| {
        let x = c.coords(i);
        1.0 + 0.5 * 2.0 * x[0] / (1.0 + x[0] * x[0] + x[1] * x[1])
    });
    let d = solvability_defect(&s2, &w).unwrap();
    assert!(d.abs() < 1e-3 * four_pi, "{d}");

    let t = bumpy_torus(2, 32, 3);
    assert_eq!(euler_characteristic(&t).unwrap(), 0);
    assert!(solvability_defect(&t, &weight(&t, 4)).unwrap().abs() < 1e-9);
    let (flat, _, worst) = surface_extremal(&t, &weight(&t, 4), &SolveOptions::default()).unwrap();
    assert!(worst < 1e-8, "{worst}");
    assert!(gauss_bonnet_total(&flat).unwrap().abs() < 1e-9);
    assert!(matches!(surface_extremal(&s2, &w, &SolveOptions::default()), Err(Error::Unsupported(_))));
}

#[test]
fn surface_candidates_are_strict() {
    let chart = torus(2, 32);
    let rep = Arc::new(build_spin_rep(2).unwrap());
    let rec = torus_plane_wave_mode(&chart, rep, &[1.0, 1.0], &Spinor::basis(2, 1)).unwrap();
    let r = surface_report(&rec, 1e-3).unwrap();
    assert_eq!(r.chi, 0);
    assert!(r.strict && !r.equality && r.lhs > 4.0 * std::f64::consts::PI);
    let h = smooth_periodic(&chart, 8, 0.3, 1, 3).map(|v| v - 1.0);
    let moved = conformal_transform(&rec, &h).unwrap();
    let r2 = surface_report(&moved, 1e-3).unwrap();
    assert!(r2.strict && !r2.equality);
    assert!((r2.lhs - r.lhs).abs() < 1e-6 * r.lhs);
    assert!(matches!(surface_report(&s3_record(17), 1e-3), Err(Error::InvalidDimension(_))));
}
