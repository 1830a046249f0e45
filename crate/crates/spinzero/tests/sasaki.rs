mod common;

use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use spinzero::chart::{unit_sphere_volume, Chart};
use spinzero::clifford::{build_spin_rep, SpinRep};
use spinzero::field::{Field, Spinor, SpinorField, VectorField};
use spinzero::forms::KFormField;
use spinzero::refine::fitted_order;
use spinzero::sasaki::*;
use spinzero::spincalc::*;
use spinzero::{Error, C64};

/// Nodes on the coarse lattice of 8 intervals, away from the faces, so that
/// charts with `res - 1` a multiple of 8 share them.
fn shared_nodes(chart: &Chart, count: usize) -> Vec<usize> {
    let step = (chart.res - 1) / 8;
    chart.sample_nodes(count, 2 * step, step, 5)
}

fn exact_lambda(n: usize) -> f64 {
    0.5 * n as f64 * unit_sphere_volume(n).powf(1.0 / n as f64)
}

fn record(n: usize, res: usize) -> (Arc<SpinRep>, ZeroModeRecord) {
    let rep = Arc::new(build_spin_rep(n).unwrap());
    let chart = sphere(n, res, 1.5);
    let rec = sphere_zero_mode_with_lambda(&chart, rep.clone(), exact_lambda(n)).unwrap();
    (rep, rec)
}

fn max_gap(a: &VectorField, b: &VectorField, nodes: &[usize]) -> f64 {
    nodes
        .iter()
        .map(|&i| a.at(i).iter().zip(b.at(i).iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

#[test]
fn standard_structure_is_almost_contact() {
    for n in [3, 5, 7] {
        let rep = build_spin_rep(n).unwrap();
        let (signs, _) = standard_orientation(&rep).unwrap();
        let chart = sphere(n, 17, 3.0);
        let data = standard_structure(&chart, &signs).unwrap();
        let r = almost_contact_check(&chart, &data, &chart.sample_nodes(300, 0, 1, 1));
        assert!(r.max() <= 1e-6, "n={n}: {r:?}");
    }
}

#[test]
fn zero_phi_fails_the_almost_contact_identities() {
    let chart = sphere(3, 17, 3.0);
    let mut data = standard_structure(&chart, &[1.0, 1.0]).unwrap();
    data.phi = Field::constant(chart.len(), vec![0.0; 9]);
    let r = almost_contact_check(&chart, &data, &chart.sample_nodes(50, 0, 1, 2));
    assert!((r.phi_squared - 1.0).abs() < 1e-12, "{r:?}");
    assert!(r.eta_xi < 1e-12);
}

/// Max gap between the frame connection and the coordinate Christoffel form
/// `Gamma^k_ij = d_j w delta_ik + d_i w delta_jk - d_k w delta_ij`, on nodes
/// shared by all resolutions that are multiples of 8.
fn christoffel_gap(res: usize) -> (f64, f64) {
    let chart = bumpy_torus(3, res, 11);
    let v = VectorField::from_fn(chart.len(), {
        let c = chart.clone();
        move |i| {
            let x = c.coords(i);
            [x[0].sin() + x[1].cos(), (x[2] + x[0]).cos(), (2.0 * x[1]).sin() * x[2].cos()].into_iter().collect()
        }
    });
    let coord = {
        let (c, v) = (chart.clone(), v.clone());
        Field::from_fn(chart.len(), move |i| {
            let s = (-c.log_weight(i)).exp();
            v.at(i).iter().map(|x| s * x).collect::<Vec<f64>>()
        })
    };
    let mut worst = 0.0f64;
    for node in chart.sample_nodes(40, 0, res / 8, 3) {
        let frame = covariant_derivative_vector(&chart, &v, node);
        let dw = chart.grad_log_weight(node);
        let vc = coord.at(node);
        for c in 0..3 {
            let d = chart.d1(node, c, |j| coord.at(j));
            for k in 0..3 {
                let mut val = d[k];
                for j in 0..3 {
                    let g = if c == k { dw[j] } else { 0.0 } + if j == k { dw[c] } else { 0.0 }
                        - if c == j { dw[k] } else { 0.0 };
                    val += g * vc[j];
                }
                // nabla_{e_c} = e^{-w} nabla_{d_c} and frame components are
                // e^{w} times coordinate components.
                worst = worst.max((frame[c][k] - val).abs());
            }
        }
    }
    (chart.h[0], worst)
}

#[test]
fn frame_connection_matches_christoffel_form() {
    let (h1, e1) = christoffel_gap(48);
    let (h2, e2) = christoffel_gap(96);
    let (h3, e3) = christoffel_gap(192);
    let p = fitted_order(&[h2, h3], &[e2, e3]).unwrap();
    assert!(p > 3.5 && e3 < 1e-5, "order {p}: {e1:e} {e2:e} {e3:e} ({h1})");
}

#[test]
fn standard_structure_is_sasakian_at_fourth_order() {
    let mut hs = vec![];
    let mut rs = vec![];
    for res in [33, 65, 129] {
        let chart = sphere(3, res, 1.5);
        let data = standard_structure(&chart, &[1.0, 1.0]).unwrap();
        hs.push(chart.h[0]);
        rs.push(sasakian_check(&chart, &data, &shared_nodes(&chart, 200)));
    }
    let p = fitted_order(&hs, &rs).unwrap();
    assert!(p > 3.5, "order {p} {rs:?}");
    assert!(rs[2] < 1e-5);
}

#[test]
fn constant_structure_on_the_torus_is_not_sasakian() {
    let chart = torus(3, 8);
    let xi = VectorField::constant(chart.len(), [0.0, 0.0, 1.0].into_iter().collect());
    let phi = Field::constant(chart.len(), vec![0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let data = SasakiData::from_parts(&chart, xi, phi).unwrap();
    let nodes: Vec<usize> = (0..chart.len()).collect();
    assert!(almost_contact_check(&chart, &data, &nodes).max() < 1e-14);
    let r = sasakian_check(&chart, &data, &nodes);
    assert!((r - 1.0).abs() < 1e-12, "{r}");
}

#[test]
fn extraction_from_the_s3_zero_mode() {
    let mut hs = vec![];
    let mut rs = vec![];
    for res in [33, 65, 129] {
        let (rep, rec) = record(3, res);
        let chart = rec.chart.clone();
        let nodes = shared_nodes(&chart, 200);
        let ex = reeb_from_zero_mode(&rec, &nodes, 1e-2).unwrap();
        assert!(ex.potential_length < 1e-12);
        assert!(ex.vacuum_identity < 1e-12);
        let std = standard_structure(&chart, &[1.0, 1.0]).unwrap();
        assert!(max_gap(&ex.data.xi, &std.xi, &nodes) < 1e-12);
        let ac = almost_contact_check(&chart, &ex.data, &nodes);
        assert!(ac.eta_xi < 1e-12 && ac.unit_length < 1e-12);
        if res == 129 {
            assert!(ac.max() <= 1e-5, "{ac:?}");
            assert!(ex.geodesic <= 1e-5 && ex.killing_antisymmetry <= 1e-4);
            assert!(vacuum_field_check(&rep, &rec.phi, &ex.data, &nodes).unwrap() <= 1e-4);
            let flipped = vacuum_field_check(&rep, &rec.phi, &ex.data.negated(), &nodes).unwrap();
            assert!((flipped - 2.0).abs() < 1e-3, "{flipped}");
        }
        hs.push(chart.h[0]);
        rs.push(sasakian_check(&chart, &ex.data, &nodes));
    }
    let p = fitted_order(&hs, &rs).unwrap();
    assert!(p >= 3.0, "order {p} {rs:?}");
    assert!(rs[2] <= 1e-4);
}

#[test]
fn extraction_from_the_s5_zero_mode() {
    let (rep, rec) = record(5, 129);
    let chart = rec.chart.clone();
    let nodes = shared_nodes(&chart, 150);
    let ex = reeb_from_zero_mode(&rec, &nodes, 1e-2).unwrap();
    let ac = almost_contact_check(&chart, &ex.data, &nodes);
    assert!(ac.max() <= 1e-5, "{ac:?}");
    assert!(sasakian_check(&chart, &ex.data, &nodes) <= 1e-4);
    assert!(vacuum_field_check(&rep, &rec.phi, &ex.data, &nodes).unwrap() <= 1e-4);
}

#[test]
fn extraction_rejects_bad_inputs() {
    let rep = Arc::new(build_spin_rep(4).unwrap());
    let chart = torus(4, 8);
    let rec = torus_plane_wave_mode(&chart, rep.clone(), &[1.0, 0.0, 0.0, 0.0], &Spinor::basis(4, 0)).unwrap();
    assert!(matches!(reeb_from_zero_mode(&rec, &[0], 1.0), Err(Error::Unsupported(_))));

    let rep = Arc::new(build_spin_rep(3).unwrap());
    let chart = sphere(3, 17, 1.5);
    let phi = smooth_spinor(&chart, 2, 3);
    let a = VectorField::constant(chart.len(), [0.1, 0.2, 0.3].into_iter().collect());
    let rec = ZeroModeRecord::unevaluated(chart.clone(), rep, phi, Potential::vector(&a), 1.0).unwrap();
    let nodes = shared_nodes(&chart, 20);
    assert!(matches!(reeb_from_zero_mode(&rec, &nodes, 1e-2), Err(Error::Precondition(_))));
}

#[test]
fn random_spinor_is_not_a_vacuum() {
    let chart = sphere(3, 17, 1.5);
    let rep = build_spin_rep(3).unwrap();
    let data = standard_structure(&chart, &[1.0, 1.0]).unwrap();
    let phi = smooth_spinor(&chart, 2, 9);
    let r = vacuum_field_check(&rep, &phi, &data, &shared_nodes(&chart, 50)).unwrap();
    assert!(r > 0.1, "{r}");
    let zero = SpinorField::constant(chart.len(), Spinor::zeros(2));
    assert!(matches!(vacuum_field_check(&rep, &zero, &data, &[0]), Err(Error::Precondition(_))));
}

#[test]
fn vacuum_fields_are_unique_up_to_functions() {
    for n in [3, 5, 7] {
        let rep = build_spin_rep(n).unwrap();
        let (signs, _) = standard_orientation(&rep).unwrap();
        let chart = sphere(n, 9, 1.5);
        let data = standard_structure(&chart, &signs).unwrap();
        let nodes = chart.sample_nodes(40, 1, 1, 8);
        for &i in &nodes {
            assert_eq!(vacuum_dimension(&rep, &data, i), 1);
        }
        let v1 = vacuum_field(&rep, &data, chart.len(), 1);
        let v2 = vacuum_field(&rep, &data, chart.len(), 2);
        assert!(vacuum_field_check(&rep, &v1, &data, &nodes).unwrap() < 1e-10);
        assert!(vacuum_uniqueness_field(&v1, &v2, &nodes).unwrap() <= 1e-10);

        let scaled = v1.map(|p| p.scale(C64::new(2.0, 3.0)));
        assert!(vacuum_uniqueness_field(&v1, &scaled, &nodes).unwrap() < 1e-14);
        let c = chart.clone();
        let modulated = v1.map_indexed(move |i, p| {
            let x = c.coords(i);
            p.scale(C64::from_polar(1.5 + x[0].sin(), x.iter().sum::<f64>()))
        });
        assert!(vacuum_uniqueness_field(&v1, &modulated, &nodes).unwrap() <= 1e-10);
    }
}

#[test]
fn two_form_witness_on_s5() {
    let rep = Arc::new(build_spin_rep(5).unwrap());
    let (signs, psi0) = standard_orientation(&rep).unwrap();
    let mut hs = vec![];
    let mut closed = vec![];
    for res in [33, 65, 129] {
        let chart = sphere(5, res, 1.5);
        let phi = killing_spinor_sphere(&chart, &rep, KillingSpec::new(-0.5).unwrap(), &psi0).unwrap();
        let nodes = shared_nodes(&chart, 100);
        let w = two_form_equality_witness(&rep, &chart, &phi, None, &nodes, Some(unit_sphere_volume(5))).unwrap();
        assert!(w.length <= 1e-4 && w.sharp_gap <= 1e-10 && w.clifford_eigen <= 1e-10);
        assert!((w.lambda - 5.0 * unit_sphere_volume(5).powf(0.2) / (2.0 * 2f64.sqrt())).abs() < 1e-12);
        assert!(w.xibar.is_none());
        hs.push(chart.h[0]);
        closed.push(w.closedness);
        if res == 129 {
            let std = standard_structure(&chart, &signs).unwrap();
            let xd = reeb_from_two_form(&chart, &w.alpha, w.lambda).unwrap();
            assert!(max_gap(&xd, &std.xi, &nodes) <= 1e-4);
            let sigma = adapted_orientation(&std, nodes[0]);
            let xw = reeb_from_wedge_power(&chart, &w.alpha, w.lambda, sigma).unwrap();
            assert!(max_gap(&xw, &std.xi, &nodes) < 1e-10);
            assert!(1.0 - cosine_similarity(&chart, &xd, &xw, Some(&nodes)) <= 1e-4);
        }
    }
    assert!(fitted_order(&hs, &closed).unwrap() >= 3.0, "{closed:?}");
}

#[test]
fn xibar_sign_follows_the_representation() {
    // n = 7: xibar = xi and xibar . phi_+ = -i phi_+; a +1/2 Killing spinor
    // does not solve the phi_- half of the split equation with the same alpha.
    let rep = build_spin_rep(7).unwrap();
    let (_, psi0) = standard_orientation(&rep).unwrap();
    let chart = sphere(7, 9, 1.5);
    let plus = killing_spinor_sphere(&chart, &rep, KillingSpec::new(-0.5).unwrap(), &psi0).unwrap();
    let minus = killing_spinor_sphere(&chart, &rep, KillingSpec::new(0.5).unwrap(), &psi0).unwrap();
    let nodes = chart.sample_nodes(30, 2, 1, 4);
    let w = two_form_equality_witness(&rep, &chart, &plus, Some(&minus), &nodes, Some(unit_sphere_volume(7))).unwrap();
    let xb = w.xibar.unwrap();
    assert_eq!(xb.eps, -1.0);
    assert!((xb.alignment - 1.0).abs() < 1e-12 && xb.minus_i < 1e-12, "{xb:?}");
    assert!(w.minus_residual.unwrap() > 0.5);

    // n = 3 with the same conventions: the volume sign flips xibar.
    let rep = build_spin_rep(3).unwrap();
    let (_, psi0) = standard_orientation(&rep).unwrap();
    let chart = sphere(3, 17, 1.5);
    let plus = killing_spinor_sphere(&chart, &rep, KillingSpec::new(-0.5).unwrap(), &psi0).unwrap();
    let w = two_form_equality_witness(&rep, &chart, &plus, None, &chart.sample_nodes(30, 2, 1, 4), None).unwrap();
    let xb = w.xibar.unwrap();
    assert!((xb.alignment + 1.0).abs() < 1e-12 && xb.plus_i < 1e-12, "{xb:?}");
}

#[test]
fn constant_two_form_on_the_torus_has_no_reeb_field() {
    let chart = torus(3, 8);
    let mut a = vec![0.0; 9];
    a[1] = 0.7;
    a[3] = -0.7;
    let alpha = KFormField::new(3, 2, Field::constant(chart.len(), a)).unwrap();
    let xi = reeb_from_two_form(&chart, &alpha, 2.0).unwrap();
    for i in 0..chart.len() {
        assert!(xi.at(i).iter().all(|x| x.abs() < 1e-12));
    }
    let wrong = KFormField::new(3, 1, Field::constant(chart.len(), vec![1.0, 0.0, 0.0])).unwrap();
    assert!(reeb_from_two_form(&chart, &wrong, 1.0).is_err());
}

#[test]
fn sampled_quantities_match_full_integrals() {
    let chart = sphere(3, 17, 1.5);
    let data = standard_structure(&chart, &[1.0, 1.0]).unwrap();
    let all: Vec<usize> = (0..chart.len()).collect();
    let full = cosine_similarity(&chart, &data.xi, &data.xi, None);
    let sampled = cosine_similarity(&chart, &data.xi, &data.xi, Some(&all));
    assert!((full - 1.0).abs() < 1e-12 && (sampled - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn perp_basis_is_orthonormal(v in proptest::collection::vec(-1.0f64..1.0, 5)) {
        prop_assume!(v.iter().map(|x| x * x).sum::<f64>() > 1e-2);
        let b = perp_basis(&v);
        prop_assert_eq!(b.len(), 4);
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (i, x) in b.iter().enumerate() {
            let dv: f64 = x.iter().zip(v.iter()).map(|(p, q)| p * q).sum();
            prop_assert!((dv / nv).abs() < 1e-12);
            for (j, y) in b.iter().enumerate() {
                let d: f64 = x.iter().zip(y.iter()).map(|(p, q)| p * q).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((d - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adapted_frames_pair_under_phi(x in proptest::collection::vec(-1.5f64..1.5, 5), seed in proptest::collection::vec(-1.0f64..1.0, 5)) {
        let signs = [1.0, 1.0, 1.0];
        let phi = standard_phi_at(&x, &signs);
        let flat: Vec<f64> = phi.transpose().as_slice().to_vec();
        let xi = standard_reeb_at(&x, &signs);
        let f = adapted_frame(&flat, &xi, Some(&seed));
        prop_assert_eq!(f.len(), 4);
        for k in 0..2 {
            let image: Vec<f64> = (0..5).map(|a| (0..5).map(|b| flat[a * 5 + b] * f[2 * k][b]).sum()).collect();
            for a in 0..5 {
                prop_assert!((image[a] - f[2 * k + 1][a]).abs() < 1e-10);
            }
        }
    }
}
