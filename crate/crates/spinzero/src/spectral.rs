//! The weighted conformal eigenvalue family `mu_a(g, A)`, `Y(g, A) = mu_1`,
//! Yamabe quotients, extremal conformal factors and the inequality chain
//! `lambda^2 ||A||^2 >= (n/(4(n-1))) Y([g,A]) >= (n/(4(n-1))) Y(M,[g])`.
//!
//! On torus charts (`g = u_0^{4/(n-2)} dx^2`) the pencil is discretized in the
//! conformally covariant form
//!
//! ```text
//! K_a[u] = a c_n sum (u_0 u) (-Lap_h (u_0 u)) dx + (1 - a) sum R_h u^2 dV,
//! M[u]   = sum w u^2 dV,
//! ```
//!
//! with `R_h dV = c_n u_0 (-Lap_h u_0) dx` and `Lap_h` the periodic
//! fourth-order stencil, so the grid problem inherits the exact
//! transformation rules of the continuum one. Sphere charts are handled only
//! for constant coefficients, where the constant function is the minimizer.

use rayon::prelude::*;

use crate::chart::{conformal_constant, scalar_curvature, unit_sphere_volume, Chart, ChartKind};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::spincalc::ZeroModeRecord;

/// Nodes whose weight is below this fraction of the maximum count as zeros.
pub const WEIGHT_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Stop when the Rayleigh quotient changes by less than `tol * max(1, |mu|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Required `||L^a u - mu w u||_{L^2} / ||u||_{L^2}`.
    pub residual_tol: f64,
    /// Relative residual for the inner conjugate-gradient solves.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 2000, residual_tol: 1e-8, cg_tol: 1e-12, cg_max_iter: 20_000 }
    }
}

#[derive(Clone)]
pub struct EigenSolveResult {
    pub mu: f64,
    /// Eigenfunction with `int w u^2 dV = 1`, positive for the ground state.
    pub u: ScalarField,
    pub iterations: usize,
    /// `||L^a u - mu w u||_{L^2} / ||u||_{L^2}`.
    pub residual: f64,
    /// True when the constant-coefficient sphere identity was used.
    pub analytic: bool,
}

/// `|A|_g^2` from frame components.
pub fn weight_of(field: &VectorField) -> ScalarField {
    field.map(|v| v.iter().map(|x| x * x).sum())
}

/// Weight of `A_{g~}` for `g~ = h^{4/(n-2)} g`: `h^{-4/(n-2)} w`.
pub fn transport_weight(n: usize, w: &ScalarField, h: &ScalarField) -> ScalarField {
    let (w, h) = (w.clone(), h.clone());
    let e = -4.0 / (n as f64 - 2.0);
    ScalarField::from_fn(w.len(), move |i| h.at(i).powf(e) * w.at(i))
}

fn check_a(a: f64) -> Result<()> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::Parameter(format!("a = {a} must lie in (0, 1]")));
    }
    Ok(())
}

fn check_chart(chart: &Chart, w: &ScalarField) -> Result<()> {
    if chart.n < 3 {
        return Err(Error::InvalidDimension(format!("conformal Laplacian needs n >= 3, got {}", chart.n)));
    }
    if w.len() != chart.len() {
        return Err(Error::Shape("weight does not match chart".into()));
    }
    Ok(())
}

/// Whether a sphere chart still carries the round conformal factor
/// (checked on a node sample).
fn is_round_sphere(chart: &Chart) -> bool {
    if chart.kind != ChartKind::SphereStereographic {
        return false;
    }
    let n = chart.n as f64;
    chart.sample_nodes(64, 0, 1, 17).into_iter().all(|i| {
        let x = chart.coords(i);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let want = (2.0 / (1.0 + r2)).powf((n - 2.0) / 2.0);
        (chart.conf_at(i) / want - 1.0).abs() < 1e-12
    })
}

/// Assembled coefficient vectors of the torus pencil.
struct Pencil<'c> {
    chart: &'c Chart,
    a: f64,
    cn: f64,
    u0: Vec<f64>,
    q: Vec<f64>,
    /// `R_h dV` per node.
    rdv: Vec<f64>,
    /// `w dV` per node.
    mdv: Vec<f64>,
    /// `dV` per node.
    dv: Vec<f64>,
}

impl<'c> Pencil<'c> {
    fn new(chart: &'c Chart, a: f64, w: &ScalarField) -> Result<Self> {
        check_a(a)?;
        check_chart(chart, w)?;
        if !chart.is_periodic() {
            return Err(Error::Unsupported(format!("numerical spectral solve needs a torus chart, got {}", chart.kind.name())));
        }
        let cn = conformal_constant(chart.n);
        let len = chart.len();
        let u0: Vec<f64> = (0..len).into_par_iter().map(|i| chart.conf_at(i)).collect();
        let q: Vec<f64> = (0..len).map(|i| chart.quad_weight(i)).collect();
        let rdv: Vec<f64> =
            (0..len).into_par_iter().map(|i| cn * u0[i] * (-chart.flat_laplacian(i, |j| u0[j])) * q[i]).collect();
        let dv: Vec<f64> = (0..len).map(|i| chart.volume_density(i) * q[i]).collect();
        let wv: Vec<f64> = (0..len).into_par_iter().map(|i| w.at(i)).collect();
        if let Some(i) = wv.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Parameter(format!("weight {} at node {i} is not a finite nonnegative number", wv[i])));
        }
        let wmax = wv.iter().cloned().fold(0.0, f64::max);
        if !(wmax > 0.0) {
            return Err(Error::Degenerate("weight vanishes identically".into()));
        }
        let mdv = wv.iter().zip(dv.iter()).map(|(w, d)| if *w < WEIGHT_FLOOR * wmax { 0.0 } else { w * d }).collect();
        Ok(Pencil { chart, a, cn, u0, q, rdv, mdv, dv })
    }

    fn k_apply(&self, x: &[f64]) -> Vec<f64> {
        let v: Vec<f64> = x.iter().zip(self.u0.iter()).map(|(a, b)| a * b).collect();
        let ch = self.chart;
        (0..x.len())
            .into_par_iter()
            .map(|i| {
                let lap = ch.flat_laplacian(i, |j| v[j]);
                self.a * self.cn * self.u0[i] * (-lap) * self.q[i] + (1.0 - self.a) * self.rdv[i] * x[i]
            })
            .collect()
    }

    fn k_diag(&self) -> Vec<f64> {
        let ch = self.chart;
        (0..self.u0.len())
            .into_par_iter()
            .map(|i| {
                let d = -ch.flat_laplacian(i, |j| if j == i { 1.0 } else { 0.0 });
                self.a * self.cn * self.u0[i] * self.u0[i] * d * self.q[i] + (1.0 - self.a) * self.rdv[i]
            })
            .collect()
    }

    fn m_apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.mdv.iter()).map(|(a, b)| a * b).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG for `(K - sigma M) x = b`.
fn cg_solve(p: &Pencil, sigma: f64, b: &[f64], x0: &[f64], diag: &[f64], opts: &SolveOptions) -> Result<Vec<f64>> {
    let op = |x: &[f64]| -> Vec<f64> {
        let k = p.k_apply(x);
        k.iter().zip(x.iter().zip(p.mdv.iter())).map(|(k, (x, m))| k - sigma * m * x).collect()
    };
    let pre: Vec<f64> = diag.iter().zip(p.mdv.iter()).map(|(d, m)| 1.0 / (d - sigma * m)).collect();
    let mut x = x0.to_vec();
    let ax = op(&x);
    let mut r: Vec<f64> = b.iter().zip(ax.iter()).map(|(b, a)| b - a).collect();
    let bn = dot(b, b).sqrt();
    if bn == 0.0 {
        return Ok(vec![0.0; b.len()]);
    }
    let mut z: Vec<f64> = r.iter().zip(pre.iter()).map(|(r, p)| r * p).collect();
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..opts.cg_max_iter {
        if dot(&r, &r).sqrt() <= opts.cg_tol * bn {
            return Ok(x);
        }
        let ad = op(&d);
        let curv = dot(&d, &ad);
        if !(curv > 0.0) {
            return Err(Error::Integrity(format!("shifted operator not positive definite (CG step {it})")));
        }
        let alpha = rz / curv;
        x.iter_mut().zip(d.iter()).for_each(|(x, d)| *x += alpha * d);
        r.iter_mut().zip(ad.iter()).for_each(|(r, a)| *r -= alpha * a);
        z = r.iter().zip(pre.iter()).map(|(r, p)| r * p).collect();
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        d.iter_mut().zip(z.iter()).for_each(|(d, z)| *d = z + beta * *d);
    }
    Err(Error::Convergence { iterations: opts.cg_max_iter, last_change: dot(&r, &r).sqrt() / bn })
}

fn solve_torus(chart: &Chart, a: f64, w: &ScalarField, opts: &SolveOptions) -> Result<EigenSolveResult> {
    let p = Pencil::new(chart, a, w)?;
    let len = chart.len();
    // K_a >= (1 - a) diag(R dV) >= sigma0 M on the support of the weight.
    let sigma0 = p
        .mdv
        .iter()
        .zip(p.rdv.iter())
        .filter(|(m, _)| **m > 0.0)
        .map(|(m, r)| (1.0 - a) * r / m)
        .fold(f64::INFINITY, f64::min);
    let sigma = sigma0 - 1e-2 * (1.0 + sigma0.abs());
    let diag = p.k_diag();
    // Locally optimal block preconditioned iteration (block size 1) with the
    // shifted inverse `(K - sigma M)^{-1}` as preconditioner: Rayleigh-Ritz
    // on `span{x, T r, p}` each step.
    let mut x: Vec<f64> = p.mdv.iter().map(|m| if *m > 0.0 { 1.0 } else { 0.0 }).collect();
    let first = cg_solve(&p, sigma, &p.m_apply(&x), &vec![0.0; len], &diag, opts)?;
    x = first;
    let mx = p.m_apply(&x);
    let s0 = dot(&x, &mx);
    if !(s0 > 0.0) {
        return Err(Error::Degenerate("iterate left the support of the weight".into()));
    }
    x.iter_mut().for_each(|v| *v /= s0.sqrt());
    let mut kx = p.k_apply(&x);
    let mut mu = dot(&x, &kx);
    let mut dir: Option<Vec<f64>> = None;
    let mut iterations = 0;
    let mut last_change;
    for it in 1..=opts.max_iter {
        iterations = it;
        let mx = p.m_apply(&x);
        let r: Vec<f64> = kx.iter().zip(mx.iter()).map(|(k, m)| k - mu * m).collect();
        let t = cg_solve(&p, sigma, &r, &vec![0.0; len], &diag, opts)?;
        let mut basis = vec![x.clone(), t];
        if let Some(d) = dir.take() {
            basis.push(d);
        }
        let basis = m_orthonormalize(&p, basis);
        let kb: Vec<Vec<f64>> = basis.iter().map(|b| p.k_apply(b)).collect();
        let m = basis.len();
        let a_small = nalgebra::DMatrix::from_fn(m, m, |i, j| 0.5 * (dot(&basis[i], &kb[j]) + dot(&basis[j], &kb[i])));
        let eig = nalgebra::SymmetricEigen::new(a_small);
        let (imin, _) = eig.eigenvalues.iter().enumerate().fold((0, f64::INFINITY), |b, (i, v)| if *v < b.1 { (i, *v) } else { b });
        let c = eig.eigenvectors.column(imin);
        let new: Vec<f64> = (0..len).map(|k| (0..m).map(|j| c[j] * basis[j][k]).sum()).collect();
        let d: Vec<f64> = (0..len).map(|k| (1..m).map(|j| c[j] * basis[j][k]).sum()).collect();
        dir = Some(d);
        let mn = dot(&new, &p.m_apply(&new)).sqrt();
        x = new.iter().map(|v| v / mn).collect();
        kx = p.k_apply(&x);
        let mu_new = dot(&x, &kx);
        last_change = (mu_new - mu).abs();
        mu = mu_new;
        if last_change < opts.tol * mu.abs().max(1.0) && relative_residual(&p, &x, &kx, mu) <= opts.residual_tol {
            break;
        }
        if it == opts.max_iter {
            return Err(Error::Convergence { iterations: it, last_change });
        }
    }
    if x.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let kx = p.k_apply(&x);
    let residual = relative_residual(&p, &x, &kx, mu);
    Ok(EigenSolveResult { mu, u: ScalarField::from_values(x), iterations, residual, analytic: false })
}

/// `||L^a x - mu w x||_{L^2} / ||x||_{L^2}` with `L^a x = (K x) / dV` pointwise.
fn relative_residual(p: &Pencil, x: &[f64], kx: &[f64], mu: f64) -> f64 {
    let num: f64 = (0..x.len()).map(|i| (kx[i] - mu * p.mdv[i] * x[i]).powi(2) / p.dv[i]).sum();
    let den: f64 = (0..x.len()).map(|i| x[i] * x[i] * p.dv[i]).sum();
    (num / den).sqrt()
}

/// Gram-Schmidt in the `M` inner product (twice), dropping directions whose
/// `M`-norm collapses.
fn m_orthonormalize(p: &Pencil, vs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mut v in vs {
        let n0 = dot(&v, &p.m_apply(&v)).sqrt();
        for _ in 0..2 {
            for o in &out {
                let c = dot(&v, &p.m_apply(o));
                v.iter_mut().zip(o.iter()).for_each(|(a, b)| *a -= c * b);
            }
        }
        let nv = dot(&v, &p.m_apply(&v)).sqrt();
        if nv > 1e-10 * n0 && nv > 0.0 {
            out.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    out
}

fn solve_round_sphere(chart: &Chart, a: f64, w: &ScalarField) -> Result<EigenSolveResult> {
    check_a(a)?;
    check_chart(chart, w)?;
    if !is_round_sphere(chart) {
        return Err(Error::Unsupported("sphere charts need the round conformal factor".into()));
    }
    let nodes = chart.sample_nodes(256, 0, 1, 23);
    let w0 = w.at(nodes[0]);
    if !(w0 > 0.0) {
        return Err(Error::Degenerate("weight vanishes".into()));
    }
    if nodes.iter().any(|&i| (w.at(i) / w0 - 1.0).abs() > 1e-10) {
        return Err(Error::Unsupported("sphere charts support constant weights only".into()));
    }
    let n = chart.n as f64;
    let mu = n * (n - 1.0) / w0;
    let u0 = 1.0 / (w0 * unit_sphere_volume(chart.n)).sqrt();
    Ok(EigenSolveResult { mu, u: ScalarField::constant(chart.len(), u0), iterations: 0, residual: 0.0, analytic: true })
}

/// Smallest eigenvalue of the pencil `(int a c_n |grad u|^2 + R u^2, int w u^2)`.
pub fn mu_a(chart: &Chart, a: f64, w: &ScalarField, opts: &SolveOptions) -> Result<EigenSolveResult> {
    match chart.kind {
        ChartKind::PeriodicTorus => solve_torus(chart, a, w, opts),
        ChartKind::SphereStereographic => solve_round_sphere(chart, a, w),
        ChartKind::FlatBox => Err(Error::Unsupported("flat-box charts carry an artificial boundary".into())),
    }
}

/// `Y(g, A) = mu_1(g, A)`.
pub fn y_ga(chart: &Chart, w: &ScalarField, opts: &SolveOptions) -> Result<EigenSolveResult> {
    mu_a(chart, 1.0, w, opts)
}

/// `int u L^a_g u dV` on a torus chart, in the discrete form of the pencil.
pub fn energy_form(chart: &Chart, a: f64, u: &ScalarField) -> Result<f64> {
    let p = Pencil::new(chart, a, &ScalarField::constant(chart.len(), 1.0))?;
    let x = u.values();
    Ok(dot(&x, &p.k_apply(&x)))
}

/// `I^a_{g,A}(u) = int u L^a_g u dV / int w u^2 dV` on a torus chart.
pub fn i_quotient(chart: &Chart, a: f64, w: &ScalarField, u: &ScalarField) -> Result<f64> {
    let p = Pencil::new(chart, a, w)?;
    let x = u.values();
    let den = dot(&x, &p.m_apply(&x));
    if !(den > 0.0) {
        return Err(Error::Degenerate("int w u^2 dV = 0".into()));
    }
    Ok(dot(&x, &p.k_apply(&x)) / den)
}

/// Yamabe quotient `int u L_g u dV / (int |u|^{2n/(n-2)} dV)^{(n-2)/n}`.
///
/// Torus charts use the discrete pencil form. On round sphere charts the
/// part of the sphere outside the box is completed with `u` equal to its
/// mean on the chart boundary and `R = n(n-1)` there, which is exact for
/// constant `u`.
pub fn yamabe_quotient(chart: &Chart, u: &ScalarField) -> Result<f64> {
    let n = chart.n;
    if n < 3 {
        return Err(Error::InvalidDimension(format!("Yamabe quotient needs n >= 3, got {n}")));
    }
    if u.len() != chart.len() {
        return Err(Error::Shape("function does not match chart".into()));
    }
    let p = 2.0 * n as f64 / (n as f64 - 2.0);
    let (num, den) = match chart.kind {
        ChartKind::PeriodicTorus => {
            let num = energy_form(chart, 1.0, u)?;
            let den = chart.integrate_fn(&|i| u.at(i).abs().powf(p)).value;
            (num, den)
        }
        _ => {
            let lu = crate::chart::conformal_laplacian_apply(chart, 1.0, u)?;
            let mut num = chart.integrate_fn(&|i| u.at(i) * lu.at(i)).value;
            let mut den = chart.integrate_fn(&|i| u.at(i).abs().powf(p)).value;
            if is_round_sphere(chart) {
                let tail = unit_sphere_volume(n) - chart.volume().value;
                let ub = boundary_mean(chart, u);
                num += (n * (n - 1)) as f64 * ub * ub * tail;
                den += ub.abs().powf(p) * tail;
            }
            (num, den)
        }
    };
    if !(den > 0.0) {
        return Err(Error::Degenerate("function vanishes".into()));
    }
    Ok(num / den.powf((n as f64 - 2.0) / n as f64))
}

fn boundary_mean(chart: &Chart, u: &ScalarField) -> f64 {
    let (mut s, mut c) = (0.0, 0usize);
    for i in 0..chart.len() {
        if chart.is_boundary(i) {
            s += u.at(i);
            c += 1;
        }
    }
    s / c.max(1) as f64
}

/// Checks of `R_{g~} = Y |A_{g~}|^2` on the extremal chart.
#[derive(Clone, Copy, Debug)]
pub struct ExtremalReport {
    pub y: f64,
    /// `max |R~ - Y w~| / max(|R_g|, |Y| w~)` over all nodes.
    pub relative_residual: f64,
    /// `(max - min) / |mean|` of `R~ / w~`; `None` when `Y` vanishes to
    /// solver precision and the ratio is `0/0`-like.
    pub ratio_spread: Option<f64>,
    pub min_eigenfunction: f64,
}

/// The chart with conformal factor multiplied by the ground state `u_0` of
/// `Y(g, A)` (rescaled to unit mean), the transported weight, and the report.
pub fn extremal_metric(chart: &Chart, w: &ScalarField, opts: &SolveOptions) -> Result<(Chart, ScalarField, ExtremalReport)> {
    let res = y_ga(chart, w, opts)?;
    let len = chart.len();
    let u = res.u.values();
    let umax = u.iter().cloned().fold(0.0, f64::max);
    let umin = u.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(umin > 1e-12 * umax) {
        return Err(Error::Integrity(format!("ground state changes sign (min {umin:e}, max {umax:e})")));
    }
    let mean = u.iter().sum::<f64>() / len as f64;
    let h = ScalarField::from_values(u.iter().map(|x| x / mean).collect());
    let old = chart.conf().clone();
    let hh = h.clone();
    let conf = ScalarField::from_values((0..len).into_par_iter().map(|i| old.at(i) * hh.at(i)).collect());
    let new = chart.with_conf(conf)?;
    let w_new = transport_weight(chart.n, w, &h).materialize();
    let r_old = scalar_curvature(chart)?;
    let r_new = scalar_curvature(&new)?;
    let y = res.mu;
    let mut scale = 0.0f64;
    let mut worst = 0.0f64;
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    let mut counted = 0usize;
    for i in 0..len {
        let (rn, wn) = (r_new.at(i), w_new.at(i));
        scale = scale.max(r_old.at(i).abs()).max((y * wn).abs());
        worst = worst.max((rn - y * wn).abs());
        if wn > 0.0 {
            let q = rn / wn;
            lo = lo.min(q);
            hi = hi.max(q);
            sum += q;
            counted += 1;
        }
    }
    let relative_residual = if scale > 0.0 { worst / scale } else { worst };
    let ratio_mean = sum / counted.max(1) as f64;
    let ratio_spread = (y.abs() > 1e3 * opts.tol * scale.max(1.0)).then(|| (hi - lo) / ratio_mean.abs());
    Ok((new, w_new, ExtremalReport { y, relative_residual, ratio_spread, min_eigenfunction: umin / mean }))
}

/// Which inequality of the chain a report instantiates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// `k = 0, 1`: `lambda^2 ||alpha||^2 >= (n/(4(n-1))) Y`.
    Standard,
    /// `k = 2`: the bound carries an extra `1/m`, `m = [n/2]`.
    TwoForm,
    /// `||a||^2 >= (n/(4(n-1))) Y` for a pointwise bound `|D phi| <= a |phi|`.
    Pointwise,
    /// `|| |A| + |f| ||^2 >= (n/(4(n-1))) Y` for `D phi = i A . phi + f phi`.
    Combined,
}

/// Provenance of a Yamabe-type value in a report.
#[derive(Clone, Debug, PartialEq)]
pub enum YValue {
    /// Constant-coefficient identity on the round sphere (chart-quadrature volume).
    Analytic(f64),
    /// Numerical eigenvalue solve.
    Computed(f64),
    Unavailable(String),
}

impl YValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            YValue::Analytic(v) | YValue::Computed(v) => Some(*v),
            YValue::Unavailable(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct InequalityReport {
    pub variant: Variant,
    /// Left side: `lambda^2 ||alpha||^2_{L^n}`, `||a||^2` or `|| |A|+|f| ||^2`.
    pub lhs: f64,
    /// `n/(4(n-1))`, divided by `m` for the 2-form variant.
    pub factor: f64,
    /// Scale-invariant `Y([g,A]) = ||w^{1/2}||^2_{L^n} mu_1`.
    pub y_ga: YValue,
    pub y_m: YValue,
    /// `lhs / (factor Y([g,A]))`.
    pub ratio_ga: Option<f64>,
    /// `lhs / (factor Y(M,[g]))`.
    pub ratio_m: Option<f64>,
    /// Ratio to the strongest available bound within `tol` of 1.
    pub equality: bool,
    /// Some bound was unavailable.
    pub partial: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct InequalityOptions {
    /// Equality flag tolerance on the ratio.
    pub tol: f64,
    pub solve: SolveOptions,
}

impl Default for InequalityOptions {
    fn default() -> Self {
        InequalityOptions { tol: 1e-3, solve: SolveOptions::default() }
    }
}

/// `Y(M,[g])`: `n(n-1) Vol^{2/n}` on the round sphere chart (quadrature
/// volume, matching how `lambda` is normalized), unavailable otherwise.
pub fn yamabe_constant(chart: &Chart) -> YValue {
    let n = chart.n;
    match chart.kind {
        ChartKind::SphereStereographic if is_round_sphere(chart) => {
            let vol = chart.volume().value;
            YValue::Analytic((n * (n - 1)) as f64 * vol.powf(2.0 / n as f64))
        }
        ChartKind::SphereStereographic => YValue::Unavailable("sphere chart with a non-round conformal factor".into()),
        _ => YValue::Unavailable("global Yamabe infimum is not computed on this chart".into()),
    }
}

/// `Y([g,A])` for a weight `w = |A|^2`, in the scale-invariant form
/// `||A||^2_{L^n} mu_1(g, A)`.
pub fn y_ga_invariant(chart: &Chart, w: &ScalarField, opts: &SolveOptions) -> YValue {
    let n = chart.n as f64;
    let norm2 = chart.integrate_fn(&|i| w.at(i).max(0.0).powf(n / 2.0)).value.powf(2.0 / n);
    match mu_a(chart, 1.0, w, opts) {
        Ok(r) if r.analytic => YValue::Analytic(norm2 * r.mu),
        Ok(r) => YValue::Computed(norm2 * r.mu),
        Err(e) => YValue::Unavailable(e.to_string()),
    }
}

fn assemble(variant: Variant, lhs: f64, factor: f64, y_ga: YValue, y_m: YValue, tol: f64) -> InequalityReport {
    // a bound at solver-noise level (flat tori) gives no meaningful ratio
    let floor = 1e-9 * lhs.abs().max(1.0);
    let ratio = |y: &YValue| y.value().filter(|v| factor * *v > floor).map(|v| lhs / (factor * v));
    let ratio_ga = ratio(&y_ga);
    let ratio_m = ratio(&y_m);
    let strongest = ratio_ga.or(ratio_m);
    InequalityReport {
        variant,
        lhs,
        factor,
        partial: y_ga.value().is_none() || y_m.value().is_none(),
        y_ga,
        y_m,
        ratio_ga,
        ratio_m,
        equality: strongest.is_some_and(|r| (r - 1.0).abs() <= tol),
    }
}

/// The inequality chain for a zero-mode record (`k = 0, 1, 2`).
pub fn inequality_report(rec: &ZeroModeRecord, opts: &InequalityOptions) -> Result<InequalityReport> {
    let chart = &rec.chart;
    let n = chart.n;
    if n < 3 {
        return Err(Error::InvalidDimension("the Yamabe chain needs n >= 3; see the surface case".into()));
    }
    let k = rec.potential.k;
    let (variant, factor) = match k {
        0 | 1 => (Variant::Standard, n as f64 / (4.0 * (n as f64 - 1.0))),
        2 => (Variant::TwoForm, n as f64 / (4.0 * (n as f64 - 1.0) * (n / 2) as f64)),
        _ => return Err(Error::Unsupported(format!("no inequality for degree {k}"))),
    };
    if !rec.potential_norm.is_finite() {
        return Err(Error::Precondition("record was not evaluated on its chart".into()));
    }
    let pot = rec.potential.clone();
    let w = ScalarField::from_fn(chart.len(), move |i| pot.norm_at(n, i).powi(2));
    let w = if chart.is_periodic() { w.materialize() } else { w };
    let y_ga = y_ga_invariant(chart, &w, &opts.solve);
    Ok(assemble(variant, rec.energy(), factor, y_ga, yamabe_constant(chart), opts.tol))
}

/// Pointwise variant: `a = |D phi| / |phi|` evaluated on the grid; reports
/// `||a||^2_{L^n}` against the chain with weight `a^2`.
pub fn pointwise_report(
    chart: &Chart,
    rep: &crate::clifford::SpinRep,
    phi: &crate::field::SpinorField,
    opts: &InequalityOptions,
) -> Result<InequalityReport> {
    let n = chart.n;
    let d = crate::spincalc::dirac(chart, rep, phi)?;
    let p = phi.clone();
    let a2 = ScalarField::from_fn(chart.len(), move |i| d.at(i).norm_sqr() / p.at(i).norm_sqr());
    let a2 = a2.materialize();
    let nf = n as f64;
    let lhs = chart.integrate_fn(&|i| a2.at(i).powf(nf / 2.0)).value.powf(2.0 / nf);
    let factor = nf / (4.0 * (nf - 1.0));
    let y_ga = y_ga_invariant(chart, &a2, &opts.solve);
    Ok(assemble(Variant::Pointwise, lhs, factor, y_ga, yamabe_constant(chart), opts.tol))
}

/// Combined variant for `D phi = i A . phi + f phi`: returns the report with
/// weight `(|A| + |f|)^2` and the relative equation residual.
pub fn combined_report(
    chart: &Chart,
    rep: &crate::clifford::SpinRep,
    phi: &crate::field::SpinorField,
    a: &VectorField,
    f: &ScalarField,
    opts: &InequalityOptions,
) -> Result<(InequalityReport, f64)> {
    let n = chart.n;
    if a.len() != chart.len() || f.len() != chart.len() {
        return Err(Error::Shape("potentials do not match chart".into()));
    }
    let d = crate::spincalc::dirac(chart, rep, phi)?;
    let err = chart.integrate_fn(&|i| {
        let p = phi.at(i);
        let mut r = d.at(i);
        r.axpy(crate::C64::new(0.0, -1.0), &rep.vec_apply(&a.at(i), &p));
        r.axpy(crate::C64::new(-f.at(i), 0.0), &p);
        r.norm_sqr()
    });
    let scale = chart.integrate_fn(&|i| d.at(i).norm_sqr()).value;
    let residual = (err.value / scale).sqrt();
    let (a2, f2) = (a.clone(), f.clone());
    let w = ScalarField::from_fn(chart.len(), move |i| {
        let s = a2.at(i).iter().map(|x| x * x).sum::<f64>().sqrt() + f2.at(i).abs();
        s * s
    });
    let w = if chart.is_periodic() { w.materialize() } else { w };
    let nf = n as f64;
    let lhs = chart.integrate_fn(&|i| w.at(i).powf(nf / 2.0)).value.powf(2.0 / nf);
    let factor = nf / (4.0 * (nf - 1.0));
    let y_ga = y_ga_invariant(chart, &w, &opts.solve);
    Ok((assemble(Variant::Combined, lhs, factor, y_ga, yamabe_constant(chart), opts.tol), residual))
}

/// Best constructed upper bound for `Y_v(M,[g])`: the smallest `lambda^2`
/// among candidates with residual at most `tol` and `||A||_{L^n} = 1`.
pub fn yv_upper_bound(candidates: &[ZeroModeRecord], tol: f64) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::Precondition("no candidates".into()));
    }
    let mut best = f64::INFINITY;
    for (j, c) in candidates.iter().enumerate() {
        if !(c.residual <= tol) {
            return Err(Error::Precondition(format!("candidate {j} has residual {:e} > {tol:e}", c.residual)));
        }
        if !((c.potential_norm - 1.0).abs() <= 1e-6) {
            return Err(Error::Precondition(format!("candidate {j} has ||A|| = {}", c.potential_norm)));
        }
        best = best.min(c.lambda * c.lambda);
    }
    Ok(best)
}

/// `int K dV` on a surface chart.
pub fn gauss_bonnet_total(chart: &Chart) -> Result<f64> {
    let k = crate::chart::gauss_curvature_2d(chart)?;
    Ok(chart.integrate(&k).value)
}

/// Euler characteristic read off `int K dV = 2 pi chi`.
pub fn euler_characteristic(chart: &Chart) -> Result<i32> {
    Ok((gauss_bonnet_total(chart)? / (2.0 * std::f64::consts::PI)).round() as i32)
}

/// `int (2 pi chi w - K) dV` after normalizing `int w dV = 1`; vanishes by
/// Gauss-Bonnet, which is what makes `-Lap_g u_0 + K = 2 pi chi w` solvable.
pub fn solvability_defect(chart: &Chart, w: &ScalarField) -> Result<f64> {
    let k = crate::chart::gauss_curvature_2d(chart)?;
    if w.len() != chart.len() {
        return Err(Error::Shape("weight does not match chart".into()));
    }
    let mass = chart.integrate(w).value;
    if !(mass > 0.0) {
        return Err(Error::Degenerate("weight integrates to zero".into()));
    }
    let chi = euler_characteristic(chart)? as f64;
    let two_pi_chi = 2.0 * std::f64::consts::PI * chi;
    Ok(chart.integrate_fn(&|i| two_pi_chi * w.at(i) / mass - k.at(i)).value)
}

/// Solve `-Lap_g u_0 + K = 2 pi chi w` (`int w dV = 1` after normalization)
/// on a torus surface and return the chart `e^{2 u_0} g`, the transported
/// weight `e^{-2 u_0} w` and `max |K~ - 2 pi chi w~|`.
pub fn surface_extremal(chart: &Chart, w: &ScalarField, opts: &SolveOptions) -> Result<(Chart, ScalarField, f64)> {
    if chart.n != 2 {
        return Err(Error::InvalidDimension(format!("surface case needs n = 2, got {}", chart.n)));
    }
    if !chart.is_periodic() {
        return Err(Error::Unsupported("surface Poisson solve needs a torus chart".into()));
    }
    let len = chart.len();
    let k = crate::chart::gauss_curvature_2d(chart)?;
    let mass = chart.integrate(w).value;
    if !(mass > 0.0) {
        return Err(Error::Degenerate("weight integrates to zero".into()));
    }
    let chi = euler_characteristic(chart)? as f64;
    let c = 2.0 * std::f64::consts::PI * chi / mass;
    // -Lap_flat u_0 = e^{2f} (c w - K), right side made mean-free on the grid
    let mut b: Vec<f64> = (0..len).map(|i| (2.0 * chart.conf_at(i)).exp() * (c * w.at(i) - k.at(i))).collect();
    let mean = b.iter().sum::<f64>() / len as f64;
    b.iter_mut().for_each(|x| *x -= mean);
    let u0 = poisson_periodic(chart, &b, opts)?;
    let old = chart.conf().clone();
    let uu = u0.clone();
    let new = chart.with_conf(ScalarField::from_fn(len, move |i| old.at(i) + uu[i]))?;
    let w_new = ScalarField::from_values((0..len).map(|i| (-2.0 * u0[i]).exp() * w.at(i) / mass).collect());
    let k_new = crate::chart::gauss_curvature_2d(&new)?;
    let two_pi_chi = 2.0 * std::f64::consts::PI * chi;
    let worst = (0..len).map(|i| (k_new.at(i) - two_pi_chi * w_new.at(i)).abs()).fold(0.0, f64::max);
    Ok((new, w_new, worst))
}

/// CG for `-Lap_flat x = b` on mean-free periodic data.
fn poisson_periodic(chart: &Chart, b: &[f64], opts: &SolveOptions) -> Result<Vec<f64>> {
    let op = |x: &[f64]| -> Vec<f64> { (0..x.len()).into_par_iter().map(|i| -chart.flat_laplacian(i, |j| x[j])).collect() };
    let len = b.len();
    let bn = dot(b, b).sqrt();
    let mut x = vec![0.0; len];
    if bn == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..opts.cg_max_iter {
        if rr.sqrt() <= opts.cg_tol * bn {
            let m = x.iter().sum::<f64>() / len as f64;
            x.iter_mut().for_each(|v| *v -= m);
            return Ok(x);
        }
        let ad = op(&d);
        let alpha = rr / dot(&d, &ad);
        x.iter_mut().zip(d.iter()).for_each(|(x, d)| *x += alpha * d);
        r.iter_mut().zip(ad.iter()).for_each(|(r, a)| *r -= alpha * a);
        let rr_new = dot(&r, &r);
        d.iter_mut().zip(r.iter()).for_each(|(d, r)| *d = r + rr_new / rr * *d);
        rr = rr_new;
    }
    Err(Error::Convergence { iterations: opts.cg_max_iter, last_change: rr.sqrt() / bn })
}

/// `lambda^2 ||A||^2_{L^2}` against `2 pi chi` for a surface zero mode.
#[derive(Clone, Copy, Debug)]
pub struct SurfaceReport {
    pub lhs: f64,
    pub chi: i32,
    pub bound: f64,
    /// `lhs > bound` beyond `tol`.
    pub strict: bool,
    /// `|lhs / bound - 1| <= tol`; never expected to hold.
    pub equality: bool,
}

pub fn surface_report(rec: &ZeroModeRecord, tol: f64) -> Result<SurfaceReport> {
    let chart = &rec.chart;
    if chart.n != 2 {
        return Err(Error::InvalidDimension(format!("surface case needs n = 2, got {}", chart.n)));
    }
    if !rec.potential_norm.is_finite() {
        return Err(Error::Precondition("record was not evaluated on its chart".into()));
    }
    let chi = euler_characteristic(chart)?;
    let bound = 2.0 * std::f64::consts::PI * chi as f64;
    let lhs = rec.energy();
    let strict = lhs > bound + tol * bound.abs().max(1.0);
    let equality = bound > 0.0 && (lhs / bound - 1.0).abs() <= tol;
    Ok(SurfaceReport { lhs, chi, bound, strict, equality })
}
