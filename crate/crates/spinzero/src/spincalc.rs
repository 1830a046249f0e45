//! Spinor calculus on conformally flat charts.
//!
//! For `g = e^{2w} dx^2` and the frame `e_a = e^{-w} d/dx_a` the spin
//! connection is
//!
//! ```text
//! nabla_{d_i} phi = d_i phi + 1/2 ( (grad w) . gamma_i phi + d_i w phi ),
//! ```
//!
//! with `(grad w) . = sum_c d_c w gamma_c`. It is metric compatible (the
//! correction is anti-Hermitian), Clifford compatible, and its Dirac operator
//! `sum_a gamma_a nabla_{e_a}` equals the conformal route
//! `u^{-(n+1)/(n-2)} D_flat(u^{(n-1)/(n-2)} phi)`.

use std::sync::Arc;

use rayon::prelude::*;
use smallvec::SmallVec;

use crate::chart::{conformal_constant, gauss_curvature_2d, scalar_curvature, Chart, ChartKind, Quadrature};
use crate::clifford::{symmetrizing_phase, SpinRep};
use crate::error::{Error, Result};
use crate::field::{Field, RVec, ScalarField, Spinor, SpinorField, VectorField};
use crate::C64;


/// Direction of differentiation: a unit frame vector `e_i`, or a vector
/// field in frame components.
#[derive(Clone)]
pub enum Direction {
    Axis(usize),
    Field(VectorField),
}

fn check(chart: &Chart, rep: &SpinRep, phi: &SpinorField) -> Result<()> {
    if chart.n != rep.n {
        return Err(Error::Shape(format!("chart dimension {} vs representation {}", chart.n, rep.n)));
    }
    if phi.len() != chart.len() {
        return Err(Error::Shape(format!("spinor field has {} nodes, chart {}", phi.len(), chart.len())));
    }
    Ok(())
}

/// `nabla_{e_i} phi` at one node for any spinor evaluator.
pub fn nabla_at(chart: &Chart, rep: &SpinRep, eval: &dyn Fn(usize) -> Spinor, node: usize, i: usize) -> Spinor {
    let dw = chart.grad_log_weight(node);
    let phi = eval(node);
    nabla_with(chart, rep, eval, node, i, &dw, &phi)
}

fn nabla_with(
    chart: &Chart,
    rep: &SpinRep,
    eval: &dyn Fn(usize) -> Spinor,
    node: usize,
    i: usize,
    dw: &[f64],
    phi: &Spinor,
) -> Spinor {
    let mut out = chart.d1(node, i, eval);
    let gi = rep.gamma_apply(i, phi);
    let corr = rep.vec_apply(dw, &gi);
    out.add_scaled_c(C64::new(0.5, 0.0), &corr);
    out.add_scaled_c(C64::new(0.5 * dw[i], 0.0), phi);
    out.scale_re((-chart.log_weight(node)).exp())
}

impl Spinor {
    fn add_scaled_c(&mut self, a: C64, x: &Spinor) {
        self.axpy(a, x);
    }
}

/// All frame derivatives `nabla_{e_1} phi, ..., nabla_{e_n} phi` at a node.
pub fn nabla_all_at(chart: &Chart, rep: &SpinRep, eval: &dyn Fn(usize) -> Spinor, node: usize) -> Vec<Spinor> {
    let dw = chart.grad_log_weight(node);
    let phi = eval(node);
    (0..chart.n).map(|i| nabla_with(chart, rep, eval, node, i, &dw, &phi)).collect()
}

/// `nabla_X phi`.
pub fn covariant_derivative(chart: &Chart, rep: &SpinRep, phi: &SpinorField, dir: &Direction) -> Result<SpinorField> {
    check(chart, rep, phi)?;
    let (c, r, p) = (chart.clone(), rep.clone(), phi.clone());
    match dir {
        Direction::Axis(i) => {
            if *i >= chart.n {
                return Err(Error::Shape(format!("axis {i} out of range")));
            }
            let i = *i;
            Ok(SpinorField::from_fn(chart.len(), move |node| nabla_at(&c, &r, &|j| p.at(j), node, i)))
        }
        Direction::Field(x) => {
            if x.len() != chart.len() {
                return Err(Error::Shape("direction field does not match chart".into()));
            }
            let x = x.clone();
            Ok(SpinorField::from_fn(chart.len(), move |node| {
                let all = nabla_all_at(&c, &r, &|j| p.at(j), node);
                let xv = x.at(node);
                let mut out = Spinor::zeros(r.dim);
                for (a, d) in all.iter().enumerate() {
                    out.axpy(C64::new(xv[a], 0.0), d);
                }
                out
            }))
        }
    }
}

/// Weight applied to `phi` before flat differentiation in the conformal
/// route (`u^{(n-1)/(n-2)}`, or `e^{f/2}` on surfaces).
#[inline]
pub fn dirac_pre_weight(chart: &Chart, node: usize) -> f64 {
    let n = chart.n as f64;
    if chart.n == 2 {
        (0.5 * chart.conf_at(node)).exp()
    } else {
        chart.conf_at(node).powf((n - 1.0) / (n - 2.0))
    }
}

/// Weight applied after flat differentiation (`u^{-(n+1)/(n-2)}`, or `e^{-3f/2}`).
#[inline]
pub fn dirac_post_weight(chart: &Chart, node: usize) -> f64 {
    let n = chart.n as f64;
    if chart.n == 2 {
        (-1.5 * chart.conf_at(node)).exp()
    } else {
        chart.conf_at(node).powf(-(n + 1.0) / (n - 2.0))
    }
}

/// Dirac operator at a node given an evaluator of the pre-weighted spinor.
pub fn dirac_from_weighted_at(chart: &Chart, rep: &SpinRep, weighted: &dyn Fn(usize) -> Spinor, node: usize) -> Spinor {
    let mut out = Spinor::zeros(rep.dim);
    for a in 0..chart.n {
        let d = chart.d1(node, a, weighted);
        out += &rep.gamma_apply(a, &d);
    }
    out.scale_re(dirac_post_weight(chart, node))
}

/// Dirac operator at one node via the conformal route.
pub fn dirac_at(chart: &Chart, rep: &SpinRep, eval: &dyn Fn(usize) -> Spinor, node: usize) -> Spinor {
    dirac_from_weighted_at(chart, rep, &|j| eval(j).scale_re(dirac_pre_weight(chart, j)), node)
}

/// Budget (in complex entries) for slabs materialized by [`integrate_with_view`].
const SLAB_BUDGET: usize = 1 << 25;

/// `int body dV_g` where `body(node, view)` may read the spinor field `src`
/// through `view` at any node within derivative-stencil reach of `node`.
///
/// `src` is materialized one block of slowest-axis planes at a time (plus the
/// planes its stencils reach), so each node is evaluated about once instead
/// of once per stencil entry, while memory stays bounded.
pub fn integrate_with_view(
    chart: &Chart,
    dim: usize,
    src: &(dyn Fn(usize) -> Spinor + Sync),
    body: &(dyn Fn(usize, &dyn Fn(usize) -> Spinor) -> f64 + Sync),
) -> Quadrature {
    let res = chart.res;
    let last = chart.n - 1;
    let plane = chart.len() / res;
    let reach = |k: usize| -> Vec<usize> {
        let node = k * plane;
        let mut ps: Vec<usize> = Vec::new();
        for st in [chart.d1_stencil(node, last), chart.d2_stencil(node, last)] {
            for &j in &st.nodes[..st.len] {
                ps.push(j / plane);
            }
        }
        ps.push(k);
        ps
    };
    let block = (SLAB_BUDGET / (plane * dim)).saturating_sub(8).clamp(1, res);
    let sphere = chart.kind == ChartKind::SphereStereographic;
    let mut total = 0.0;
    let mut bmax = 0.0f64;
    let mut slabs: Vec<Option<Vec<C64>>> = vec![None; res];
    let mut k0 = 0;
    while k0 < res {
        let k1 = (k0 + block).min(res);
        let mut need: Vec<usize> = (k0..k1).flat_map(reach).collect();
        need.sort_unstable();
        need.dedup();
        for (p, slot) in slabs.iter_mut().enumerate() {
            if need.binary_search(&p).is_err() {
                *slot = None;
            }
        }
        for &p in &need {
            if slabs[p].is_none() {
                let vals: Vec<C64> = (p * plane..(p + 1) * plane)
                    .into_par_iter()
                    .flat_map_iter(|j| src(j).0.into_iter())
                    .collect();
                slabs[p] = Some(vals);
            }
        }
        let view = |j: usize| -> Spinor {
            match &slabs[j / plane] {
                Some(buf) => {
                    let o = (j % plane) * dim;
                    Spinor::from_slice(&buf[o..o + dim])
                }
                None => src(j),
            }
        };
        let (s, m) = sum_max(k0 * plane, k1 * plane, &|i| {
            let b = body(i, &view);
            let edge = if sphere && chart.is_boundary(i) { b.abs() } else { 0.0 };
            (chart.quad_weight(i) * chart.volume_density(i) * b, edge)
        });
        total += s;
        bmax = bmax.max(m);
        k0 = k1;
    }
    let tail_bound = if sphere { bmax * chart.sphere_tail_volume() } else { 0.0 };
    Quadrature { value: total, tail_bound }
}

fn sum_max(lo: usize, hi: usize, f: &(dyn Fn(usize) -> (f64, f64) + Sync)) -> (f64, f64) {
    if hi - lo <= 512 {
        let mut s = 0.0;
        let mut m = 0.0f64;
        for i in lo..hi {
            let (a, b) = f(i);
            s += a;
            m = m.max(b);
        }
        return (s, m);
    }
    let mid = lo + (hi - lo) / 2;
    let ((a, b), (c, d)) = if hi - lo > 1 << 16 {
        rayon::join(|| sum_max(lo, mid, f), || sum_max(mid, hi, f))
    } else {
        (sum_max(lo, mid, f), sum_max(mid, hi, f))
    };
    (a + c, b.max(d))
}

/// `D phi`, conformal route.
pub fn dirac(chart: &Chart, rep: &SpinRep, phi: &SpinorField) -> Result<SpinorField> {
    check(chart, rep, phi)?;
    let (c, r, p) = (chart.clone(), rep.clone(), phi.clone());
    Ok(SpinorField::from_fn(chart.len(), move |node| dirac_at(&c, &r, &|j| p.at(j), node)))
}

/// `sum_a e_a . nabla_{e_a} phi`, the connection route.
pub fn dirac_from_connection(chart: &Chart, rep: &SpinRep, phi: &SpinorField) -> Result<SpinorField> {
    check(chart, rep, phi)?;
    let (c, r, p) = (chart.clone(), rep.clone(), phi.clone());
    Ok(SpinorField::from_fn(chart.len(), move |node| {
        let all = nabla_all_at(&c, &r, &|j| p.at(j), node);
        let mut out = Spinor::zeros(r.dim);
        for (a, d) in all.iter().enumerate() {
            out += &r.gamma_apply(a, d);
        }
        out
    }))
}

/// Twistor components `P_{e_j} phi = nabla_{e_j} phi + (1/n) e_j . D phi` at a node.
pub fn twistor_at(chart: &Chart, rep: &SpinRep, eval: &dyn Fn(usize) -> Spinor, node: usize) -> Vec<Spinor> {
    let nab = nabla_all_at(chart, rep, eval, node);
    let d = dirac_at(chart, rep, eval, node);
    let inv = 1.0 / chart.n as f64;
    nab.into_iter()
        .enumerate()
        .map(|(j, mut v)| {
            v.axpy(C64::new(inv, 0.0), &rep.gamma_apply(j, &d));
            v
        })
        .collect()
}

/// All `n` twistor components as lazy fields.
pub fn twistor(chart: &Chart, rep: &SpinRep, phi: &SpinorField) -> Result<Vec<SpinorField>> {
    check(chart, rep, phi)?;
    Ok((0..chart.n)
        .map(|j| {
            let (c, r, p) = (chart.clone(), rep.clone(), phi.clone());
            SpinorField::from_fn(chart.len(), move |node| twistor_at(&c, &r, &|k| p.at(k), node).swap_remove(j))
        })
        .collect())
}

/// Scalar curvature of the chart for any `n >= 2` (`R = 2K` on surfaces).
pub fn curvature(chart: &Chart) -> Result<ScalarField> {
    if chart.n == 2 {
        Ok(gauss_curvature_2d(chart)?.map(|k| 2.0 * k))
    } else {
        scalar_curvature(chart)
    }
}

/// Pointwise Clifford action of a degree-`k` potential (frame components,
/// dense `n^k` layout), without the symmetrizing phase.
pub fn potential_apply(rep: &SpinRep, k: usize, coeffs: &[f64], psi: &Spinor) -> Spinor {
    match k {
        0 => psi.scale_re(coeffs[0]),
        1 => rep.vec_apply(coeffs, psi),
        2 => rep.two_form_apply(coeffs, psi),
        _ => crate::clifford::kform_action(rep, k, coeffs, psi).expect("validated potential"),
    }
}

/// Pointwise metric norm of a degree-`k` potential in frame components.
pub fn potential_norm(n: usize, k: usize, coeffs: &[f64]) -> f64 {
    match k {
        0 => coeffs[0].abs(),
        1 => coeffs.iter().map(|x| x * x).sum::<f64>().sqrt(),
        _ => {
            let full: f64 = coeffs.iter().map(|x| x * x).sum();
            let fact: f64 = (1..=k).map(|j| j as f64).product();
            let _ = n;
            (full / fact).sqrt()
        }
    }
}

/// Potential of a zero mode: degree and frame components at every node.
#[derive(Clone)]
pub struct Potential {
    pub k: usize,
    pub coeffs: Field<Vec<f64>>,
}

impl Potential {
    pub fn vector(field: &VectorField) -> Potential {
        Potential { k: 1, coeffs: field.map(|v| v.to_vec()) }
    }

    pub fn scalar(field: &ScalarField) -> Potential {
        Potential { k: 0, coeffs: field.map(|v| vec![v]) }
    }

    pub fn norm_at(&self, n: usize, node: usize) -> f64 {
        potential_norm(n, self.k, &self.coeffs.at(node))
    }

    pub fn scaled(&self, s: f64) -> Potential {
        Potential { k: self.k, coeffs: self.coeffs.map(move |v| v.iter().map(|x| x * s).collect()) }
    }
}

/// A (numerically) normalized zero mode `D phi = i^{[(k+1)/2]} lambda alpha . phi`.
#[derive(Clone)]
pub struct ZeroModeRecord {
    pub chart: Chart,
    pub rep: Arc<SpinRep>,
    pub phi: SpinorField,
    pub potential: Potential,
    pub lambda: f64,
    /// Relative residual `||D phi - i^. lambda alpha . phi|| / (lambda ||phi||)`.
    pub residual: f64,
    /// `||alpha||_{L^n}`.
    pub potential_norm: f64,
    /// `||phi||_{L^2}`.
    pub phi_norm: f64,
}

impl ZeroModeRecord {
    /// Assemble a record and evaluate its residual and norms.
    pub fn new(chart: Chart, rep: Arc<SpinRep>, phi: SpinorField, potential: Potential, lambda: f64) -> Result<Self> {
        check(&chart, &rep, &phi)?;
        let residual = zero_mode_residual(&chart, &rep, &phi, &potential, lambda)?;
        let n = chart.n;
        let potential_norm = crate::chart::lp_norm_fn(&chart, &|i| potential.norm_at(n, i), n as f64)?;
        let phi_norm = chart.integrate_fn(&|i| phi.at(i).norm_sqr()).value.sqrt();
        Ok(ZeroModeRecord { chart, rep, phi, potential, lambda, residual, potential_norm, phi_norm })
    }

    /// Record without the grid integrals (`residual`, `potential_norm` and
    /// `phi_norm` are NaN). For node-sampled checks on grids too large to
    /// integrate over.
    pub fn unevaluated(chart: Chart, rep: Arc<SpinRep>, phi: SpinorField, potential: Potential, lambda: f64) -> Result<Self> {
        check(&chart, &rep, &phi)?;
        let nan = f64::NAN;
        Ok(ZeroModeRecord { chart, rep, phi, potential, lambda, residual: nan, potential_norm: nan, phi_norm: nan })
    }

    /// `lambda^2 ||alpha||_{L^n}^2`, the quantity bounded below by the
    /// Yamabe-type constants (equals `lambda^2` when normalized).
    pub fn energy(&self) -> f64 {
        (self.lambda * self.potential_norm).powi(2)
    }
}

/// `||D phi - i^{[(k+1)/2]} lambda alpha . phi||_{L^2} / (lambda ||phi||_{L^2})`.
pub fn zero_mode_residual(chart: &Chart, rep: &SpinRep, phi: &SpinorField, potential: &Potential, lambda: f64) -> Result<f64> {
    check(chart, rep, phi)?;
    let phase = symmetrizing_phase(potential.k) * lambda;
    let k = potential.k;
    let weighted = |j: usize| phi.at(j).scale_re(dirac_pre_weight(chart, j));
    let err = integrate_with_view(chart, rep.dim, &weighted, &|i, view| {
        let mut d = dirac_from_weighted_at(chart, rep, view, i);
        let p = view(i).scale_re(1.0 / dirac_pre_weight(chart, i));
        let act = potential_apply(rep, k, &potential.coeffs.at(i), &p);
        d.axpy(-phase, &act);
        d.norm_sqr()
    });
    let nrm = chart.integrate_fn(&|i| phi.at(i).norm_sqr()).value;
    if !(nrm > 0.0) {
        return Err(Error::Degenerate("spinor field vanishes".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::Degenerate(format!("lambda = {lambda} must be positive")));
    }
    Ok(err.value.max(0.0).sqrt() / (lambda * nrm.sqrt()))
}

/// Gauge change `(lambda A, phi) -> (lambda A + grad f, e^{if} phi)` of a
/// vector-potential record, followed by renormalization of `A` in `L^n`.
pub fn gauge_transform(rec: &ZeroModeRecord, f: &ScalarField) -> Result<ZeroModeRecord> {
    if rec.potential.k != 1 {
        return Err(Error::Unsupported("gauge transformations act on vector potentials".into()));
    }
    let chart = rec.chart.clone();
    if f.len() != chart.len() {
        return Err(Error::Shape("gauge function does not match chart".into()));
    }
    let (c, ff, a, lam) = (chart.clone(), f.clone(), rec.potential.coeffs.clone(), rec.lambda);
    let raw = Field::<Vec<f64>>::from_fn(chart.len(), move |i| {
        let s = (-c.log_weight(i)).exp();
        let av = a.at(i);
        (0..c.n).map(|k| lam * av[k] + s * c.d1(i, k, |j| ff.at(j))).collect()
    })
    .materialize();
    let n = chart.n;
    let new_lambda = crate::chart::lp_norm_fn(&chart, &|i| potential_norm(n, 1, &raw.at(i)), n as f64)?;
    if !(new_lambda > 0.0) {
        return Err(Error::Degenerate("gauged potential vanishes".into()));
    }
    let coeffs = raw.map(move |v| v.iter().map(|x| x / new_lambda).collect());
    let (p, ff) = (rec.phi.clone(), f.clone());
    let phi = SpinorField::from_fn(chart.len(), move |i| p.at(i).scale(C64::from_polar(1.0, ff.at(i))));
    ZeroModeRecord::new(chart, rec.rep.clone(), phi, Potential { k: 1, coeffs }, new_lambda)
}

/// Conformal change by the factor `h > 0`: `g~ = h^{4/(n-2)} g` (or
/// `e^{2h} g` with `h` a log-factor when `n = 2`). The spinor picks up
/// `h^{-(n-1)/(n-2)}` and the frame components of any degree-`k` potential
/// pick up `h^{-2/(n-2)}`; `lambda` is unchanged.
pub fn conformal_transform(rec: &ZeroModeRecord, h: &ScalarField) -> Result<ZeroModeRecord> {
    let chart = &rec.chart;
    let n = chart.n;
    if h.len() != chart.len() {
        return Err(Error::Shape("conformal factor does not match chart".into()));
    }
    if n >= 3 {
        if let Some(i) = (0..chart.len()).find(|&i| !(h.at(i) > 0.0)) {
            return Err(Error::Parameter(format!("conformal factor {} at node {i} is not positive", h.at(i))));
        }
    }
    let nf = n as f64;
    let (spin_w, pot_w): (Arc<dyn Fn(f64) -> f64 + Send + Sync>, Arc<dyn Fn(f64) -> f64 + Send + Sync>) = if n == 2 {
        (Arc::new(|h: f64| (-0.5 * h).exp()), Arc::new(|h: f64| (-h).exp()))
    } else {
        (Arc::new(move |h: f64| h.powf(-(nf - 1.0) / (nf - 2.0))), Arc::new(move |h: f64| h.powf(-2.0 / (nf - 2.0))))
    };
    let (old, hh) = (chart.conf().clone(), h.clone());
    let new_conf = if n == 2 {
        ScalarField::from_fn(chart.len(), move |i| old.at(i) + hh.at(i))
    } else {
        ScalarField::from_fn(chart.len(), move |i| old.at(i) * hh.at(i))
    };
    let new_chart = chart.with_conf(new_conf)?;
    let (p, hh, sw) = (rec.phi.clone(), h.clone(), spin_w.clone());
    let phi = SpinorField::from_fn(chart.len(), move |i| p.at(i).scale_re(sw(hh.at(i))));
    let (a, hh, pw) = (rec.potential.coeffs.clone(), h.clone(), pot_w.clone());
    let coeffs = Field::from_fn(chart.len(), move |i| {
        let s = pw(hh.at(i));
        a.at(i).iter().map(|x| x * s).collect()
    });
    ZeroModeRecord::new(new_chart, rec.rep.clone(), phi, Potential { k: rec.potential.k, coeffs }, rec.lambda)
}

/// Killing number `b` (`nabla_X phi = b X . phi`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KillingSpec {
    pub b: f64,
}

impl KillingSpec {
    pub fn new(b: f64) -> Result<Self> {
        if b != 0.5 && b != -0.5 {
            return Err(Error::Parameter(format!("Killing number {b} must be +1/2 or -1/2")));
        }
        Ok(KillingSpec { b })
    }

    /// `+1` for the `D = n/2` family (`b = -1/2`), `-1` otherwise.
    pub fn sign(&self) -> i32 {
        if self.b < 0.0 {
            1
        } else {
            -1
        }
    }
}

/// `sqrt(sum_i ||nabla_{e_i} phi - b e_i . phi||^2) / ||phi||`.
pub fn killing_residual(chart: &Chart, rep: &SpinRep, phi: &SpinorField, b: f64) -> Result<f64> {
    check(chart, rep, phi)?;
    let src = |j: usize| phi.at(j);
    let err = integrate_with_view(chart, rep.dim, &src, &|i, view| {
        let all = nabla_all_at(chart, rep, view, i);
        let p = view(i);
        all.iter()
            .enumerate()
            .map(|(a, d)| {
                let mut e = d.clone();
                e.axpy(C64::new(-b, 0.0), &rep.gamma_apply(a, &p));
                e.norm_sqr()
            })
            .sum()
    });
    let nrm = chart.integrate_fn(&|i| phi.at(i).norm_sqr()).value;
    if !(nrm > 0.0) {
        return Err(Error::Degenerate("spinor field vanishes".into()));
    }
    Ok((err.value.max(0.0) / nrm).sqrt())
}

fn require_unit_sphere(chart: &Chart, rep: &SpinRep) -> Result<()> {
    if chart.kind != ChartKind::SphereStereographic {
        return Err(Error::Unsupported(format!("needs the unit-sphere chart, got {}", chart.kind.name())));
    }
    if chart.n != rep.n {
        return Err(Error::Shape("chart and representation dimensions differ".into()));
    }
    Ok(())
}

/// Killing spinor `(1 + |x|^2)^{-1/2} (c1 + c2 x.) psi0` on the unit-sphere
/// chart with `(c1, c2) = (1, 2b)`.
pub fn killing_spinor_sphere(chart: &Chart, rep: &SpinRep, spec: KillingSpec, psi0: &Spinor) -> Result<SpinorField> {
    killing_ansatz(chart, rep, 1.0, 2.0 * spec.b, psi0)
}

/// The two-parameter family `(1 + |x|^2)^{-1/2} (c1 + c2 x.) psi0`.
pub fn killing_ansatz(chart: &Chart, rep: &SpinRep, c1: f64, c2: f64, psi0: &Spinor) -> Result<SpinorField> {
    require_unit_sphere(chart, rep)?;
    if psi0.dim() != rep.dim {
        return Err(Error::Shape("seed spinor dimension".into()));
    }
    // gamma_c psi0 once, then x. psi0 is a real combination
    let cols: Vec<Spinor> = (0..rep.n).map(|c| rep.gamma_apply(c, psi0)).collect();
    let (c, p0) = (chart.clone(), psi0.clone());
    Ok(SpinorField::from_fn(chart.len(), move |i| {
        let x = c.coords(i);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let mut out = p0.scale_re(c1);
        for (a, col) in cols.iter().enumerate() {
            out.axpy(C64::new(c2 * x[a], 0.0), col);
        }
        out.scale_re((1.0 + r2).powf(-0.5))
    }))
}

/// Fit `(c1, c2)` with `c1^2 + c2^2 = 1` minimizing the Killing residual of
/// the ansatz (smallest eigenvector of the 2x2 residual Gram matrix).
pub fn fit_killing_coefficients(chart: &Chart, rep: &SpinRep, b: f64, psi0: &Spinor) -> Result<(f64, f64)> {
    let basis = [killing_ansatz(chart, rep, 1.0, 0.0, psi0)?, killing_ansatz(chart, rep, 0.0, 1.0, psi0)?];
    let op = |f: &SpinorField, i: usize| -> Vec<Spinor> {
        let all = nabla_all_at(chart, rep, &|j| f.at(j), i);
        let p = f.at(i);
        all.into_iter()
            .enumerate()
            .map(|(a, mut d)| {
                d.axpy(C64::new(-b, 0.0), &rep.gamma_apply(a, &p));
                d
            })
            .collect()
    };
    let mut g = [[0.0f64; 2]; 2];
    for r in 0..2 {
        for s in r..2 {
            let v = chart
                .integrate_fn(&|i| {
                    let (x, y) = (op(&basis[r], i), op(&basis[s], i));
                    x.iter().zip(y.iter()).map(|(p, q)| p.inner(q).re).sum()
                })
                .value;
            g[r][s] = v;
            g[s][r] = v;
        }
    }
    let m = nalgebra::Matrix2::new(g[0][0], g[0][1], g[1][0], g[1][1]);
    let eig = m.symmetric_eigen();
    let k = if eig.eigenvalues[0] <= eig.eigenvalues[1] { 0 } else { 1 };
    let v = eig.eigenvectors.column(k);
    let sign = if v[0] < 0.0 { -1.0 } else { 1.0 };
    Ok((sign * v[0], sign * v[1]))
}

/// Frame vector `xi` with `xi_a = -Im <e_a . phi, phi> / |phi|^2`; when `phi`
/// satisfies `xi . phi = -i phi` for a unit `xi`, this recovers it.
pub fn reeb_vector_of(rep: &SpinRep, phi: &Spinor) -> RVec {
    let nrm = phi.norm_sqr();
    (0..rep.n).map(|a| -rep.gamma_apply(a, phi).inner(phi).im / nrm).collect()
}

/// Zero mode on the unit odd sphere built from a `-1/2` Killing spinor that
/// is a vacuum for the standard Sasakian structure: `A = (n / 2 lambda) xi`,
/// `lambda = (n/2) ||xi||_{L^n}` (which is `(n/2) Vol^{1/n}` as `|xi| = 1`).
pub fn sphere_zero_mode(chart: &Chart, rep: Arc<SpinRep>) -> Result<ZeroModeRecord> {
    let (phi, xi) = sphere_zero_mode_fields(chart, &rep)?;
    let n = chart.n as f64;
    let lambda = 0.5 * n * crate::chart::lp_norm(chart, &xi, n)?;
    let scale = n / (2.0 * lambda);
    let a = xi.map(move |v| v.iter().map(|x| x * scale).collect::<RVec>());
    ZeroModeRecord::new(chart.clone(), rep, phi, Potential::vector(&a), lambda)
}

/// The same construction with a given `lambda` and no grid integrals (see
/// [`ZeroModeRecord::unevaluated`]).
pub fn sphere_zero_mode_with_lambda(chart: &Chart, rep: Arc<SpinRep>, lambda: f64) -> Result<ZeroModeRecord> {
    let (phi, xi) = sphere_zero_mode_fields(chart, &rep)?;
    let scale = chart.n as f64 / (2.0 * lambda);
    let a = xi.map(move |v| v.iter().map(|x| x * scale).collect::<RVec>());
    ZeroModeRecord::unevaluated(chart.clone(), rep, phi, Potential::vector(&a), lambda)
}

fn sphere_zero_mode_fields(chart: &Chart, rep: &Arc<SpinRep>) -> Result<(SpinorField, VectorField)> {
    require_unit_sphere(chart, rep)?;
    if chart.n % 2 == 0 {
        return Err(Error::Unsupported(format!("sphere zero mode needs odd n, got {}", chart.n)));
    }
    let (_, psi0) = crate::sasaki::standard_orientation(rep)?;
    let phi = killing_spinor_sphere(chart, rep, KillingSpec::new(-0.5)?, &psi0)?;
    let (p, r) = (phi.clone(), rep.clone());
    let xi = VectorField::from_fn(chart.len(), move |i| reeb_vector_of(&r, &p.at(i)));
    Ok((phi, xi))
}

/// Terms of the integrated Schroedinger-Lichnerowicz / twistor identity
/// `0 = -((n-1)/n) int |D phi|^2 + 1/4 int R |phi|^2 + int |P phi|^2`.
#[derive(Clone, Copy, Debug)]
pub struct LichnerowiczReport {
    pub dirac_term: f64,
    pub curvature_term: f64,
    pub twistor_term: f64,
    pub nabla_term: f64,
    /// `-((n-1)/n) dirac + curvature/4 + twistor`.
    pub residual: f64,
    /// `residual` over the sum of magnitudes of the three terms.
    pub relative: f64,
    /// `int |nabla phi|^2 - (1/n) int |D phi|^2 - int |P phi|^2`, relative.
    pub twistor_identity_relative: f64,
}

pub fn schrodinger_lichnerowicz_report(chart: &Chart, rep: &SpinRep, phi: &SpinorField) -> Result<LichnerowiczReport> {
    check(chart, rep, phi)?;
    let r = curvature(chart)?;
    let eval = |j: usize| phi.at(j);
    let nodes: Vec<[f64; 4]> = (0..chart.len())
        .into_par_iter()
        .map(|i| {
            let nab = nabla_all_at(chart, rep, &eval, i);
            let d = dirac_at(chart, rep, &eval, i);
            let p = phi.at(i);
            let inv = 1.0 / chart.n as f64;
            let mut tw = 0.0;
            let mut nb = 0.0;
            for (j, v) in nab.iter().enumerate() {
                nb += v.norm_sqr();
                let mut t = v.clone();
                t.axpy(C64::new(inv, 0.0), &rep.gamma_apply(j, &d));
                tw += t.norm_sqr();
            }
            [d.norm_sqr(), r.at(i) * p.norm_sqr(), tw, nb]
        })
        .collect();
    let integ = |k: usize| chart.integrate_fn(&|i| nodes[i][k]).value;
    let (dt, ct, tt, nt) = (integ(0), integ(1), integ(2), integ(3));
    let n = chart.n as f64;
    let residual = -(n - 1.0) / n * dt + 0.25 * ct + tt;
    let scale = ((n - 1.0) / n * dt.abs() + 0.25 * ct.abs() + tt.abs()).max(f64::MIN_POSITIVE);
    let tw_res = nt - dt / n - tt;
    let tw_scale = (nt.abs() + dt.abs() / n + tt.abs()).max(f64::MIN_POSITIVE);
    Ok(LichnerowiczReport {
        dirac_term: dt,
        curvature_term: ct,
        twistor_term: tt,
        nabla_term: nt,
        residual,
        relative: residual.abs() / scale,
        twistor_identity_relative: tw_res.abs() / tw_scale,
    })
}

/// Split `phi` into `D`-eigencomponents with eigenvalues `+n/2` and `-n/2`:
/// `phi_+ = (D phi + (n/2) phi) / n`, `phi_- = phi - phi_+`. The
/// precondition is checked on sampled interior nodes.
pub fn decompose_killing(chart: &Chart, rep: &SpinRep, phi: &SpinorField, tol: f64) -> Result<(SpinorField, SpinorField)> {
    check(chart, rep, phi)?;
    let n = chart.n as f64;
    let d = dirac(chart, rep, phi)?;
    let (p, dd) = (phi.clone(), d.clone());
    let plus = SpinorField::from_fn(chart.len(), move |i| {
        let mut v = dd.at(i);
        v.axpy(C64::new(0.5 * n, 0.0), &p.at(i));
        v.scale_re(1.0 / n)
    });
    let (p, pl) = (phi.clone(), plus.clone());
    let minus = SpinorField::from_fn(chart.len(), move |i| p.at(i) - pl.at(i));
    let margin = 6usize;
    let nodes = chart.sample_nodes(400, margin, 1, 0x5eed);
    let mut worst = 0.0f64;
    for &i in &nodes {
        let dp = dirac_at(chart, rep, &|j| plus.at(j), i);
        let dm = dirac_at(chart, rep, &|j| minus.at(j), i);
        let ep = (dp - plus.at(i).scale_re(0.5 * n)).norm();
        let em = (dm + minus.at(i).scale_re(0.5 * n)).norm();
        worst = worst.max((ep + em) / phi.at(i).norm().max(f64::MIN_POSITIVE));
    }
    if worst > tol {
        return Err(Error::Precondition(format!(
            "field is not a sum of +-n/2 Dirac eigenspinors (projection residual {worst:e})"
        )));
    }
    Ok((plus, minus))
}

/// Largest `|grad |phi|| / |nabla phi|` over nodes where `|phi| > 1e-8`
/// (Kato's inequality says it is at most 1).
pub fn kato_ratio(chart: &Chart, rep: &SpinRep, phi: &SpinorField, nodes: &[usize]) -> f64 {
    let eval = |j: usize| phi.at(j);
    nodes
        .iter()
        .filter(|&&i| phi.at(i).norm() > 1e-8)
        .map(|&i| {
            let s = (-chart.log_weight(i)).exp();
            let grad: f64 = (0..chart.n).map(|a| (s * chart.d1(i, a, |j| phi.at(j).norm())).powi(2)).sum();
            let nab: f64 = nabla_all_at(chart, rep, &eval, i).iter().map(|v| v.norm_sqr()).sum();
            if nab > 0.0 {
                (grad / nab).sqrt()
            } else if grad > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Max over `nodes` of `|Lap_g |phi|^2 - (R/(2(n-1))) |phi|^2 + (2/n)|D phi|^2|`,
/// the defect of the length identity satisfied by twistor spinors.
pub fn twistor_length_defect(chart: &Chart, rep: &SpinRep, phi: &SpinorField, nodes: &[usize]) -> Result<f64> {
    check(chart, rep, phi)?;
    if chart.n < 3 {
        return Err(Error::InvalidDimension("length identity uses n >= 3".into()));
    }
    let r = scalar_curvature(chart)?;
    let n = chart.n as f64;
    let eval = |j: usize| phi.at(j);
    let mut worst = 0.0f64;
    for &i in nodes {
        // Lap_g s = e^{-2w} (Lap s + (n-2) grad w . grad s)
        let sq = |j: usize| phi.at(j).norm_sqr();
        let lap = chart.flat_laplacian(i, sq);
        let dw = chart.grad_log_weight(i);
        let grad: f64 = (0..chart.n).map(|a| dw[a] * chart.d1(i, a, sq)).sum();
        let lap_g = (-2.0 * chart.log_weight(i)).exp() * (lap + (n - 2.0) * grad);
        let d = dirac_at(chart, rep, &eval, i);
        let rhs = r.at(i) / (2.0 * (n - 1.0)) * phi.at(i).norm_sqr() - 2.0 / n * d.norm_sqr();
        worst = worst.max((lap_g - rhs).abs());
    }
    Ok(worst)
}

/// Plane wave `e^{i k.x} psi0` on a chart.
pub fn plane_wave(chart: &Chart, k: &[f64], psi0: &Spinor) -> SpinorField {
    let (c, k, p) = (chart.clone(), k.to_vec(), psi0.clone());
    SpinorField::from_fn(chart.len(), move |i| {
        let x = c.coords(i);
        let ph: f64 = k.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        p.scale(C64::from_polar(1.0, ph))
    })
}

/// Exact zero mode on a flat torus: `phi = e^{i k.x} psi0`, `A = k / lambda`
/// with `lambda = |k| Vol^{1/n}`.
pub fn torus_plane_wave_mode(chart: &Chart, rep: Arc<SpinRep>, k: &[f64], psi0: &Spinor) -> Result<ZeroModeRecord> {
    if chart.kind != ChartKind::PeriodicTorus {
        return Err(Error::Unsupported("plane-wave zero modes live on the torus".into()));
    }
    let phi = plane_wave(chart, k, psi0);
    let kn: f64 = k.iter().map(|x| x * x).sum::<f64>().sqrt();
    let vol = chart.volume().value;
    let lambda = kn * vol.powf(1.0 / chart.n as f64);
    let c = chart.clone();
    let kv: RVec = k.iter().map(|x| x / lambda).collect();
    let a = VectorField::from_fn(chart.len(), move |i| {
        let s = (-c.log_weight(i)).exp();
        kv.iter().map(|x| x * s).collect::<SmallVec<[f64; 8]>>()
    });
    ZeroModeRecord::new(chart.clone(), rep, phi, Potential::vector(&a), lambda)
}

/// `c_n` re-exported for callers assembling conformal Laplacians.
pub fn yamabe_constant_factor(n: usize) -> f64 {
    conformal_constant(n)
}

/// `||D phi - mu phi|| / ||phi||`.
pub fn dirac_eigen_residual(chart: &Chart, rep: &SpinRep, phi: &SpinorField, mu: f64) -> Result<f64> {
    check(chart, rep, phi)?;
    let weighted = |j: usize| phi.at(j).scale_re(dirac_pre_weight(chart, j));
    let err = integrate_with_view(chart, rep.dim, &weighted, &|i, view| {
        let mut d = dirac_from_weighted_at(chart, rep, view, i);
        let p = view(i).scale_re(1.0 / dirac_pre_weight(chart, i));
        d.axpy(C64::new(-mu, 0.0), &p);
        d.norm_sqr()
    });
    let nrm = chart.integrate_fn(&|i| phi.at(i).norm_sqr()).value;
    if !(nrm > 0.0) {
        return Err(Error::Degenerate("spinor field vanishes".into()));
    }
    Ok((err.value.max(0.0) / nrm).sqrt())
}
