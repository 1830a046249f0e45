//! Sasakian structures from zero modes and the standard structure on odd
//! spheres.
//!
//! The standard structure on `S^{2m+1} ⊂ C^{m+1}` has Reeb field `xi = J p`
//! and `Phi(X) = -(J X)^T`, where `J` rotates each coordinate pair
//! `(p_{2j-1}, p_{2j})` by a quarter turn in the direction given by a sign
//! per pair. The signs are chosen so that the structure is compatible with
//! the spin representation (a `-i` vacuum exists); different choices differ
//! by a reflection of the ambient space.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::{Chart, ChartKind};
use crate::clifford::{fix_phase, joint_kernel, ladder_ops_in_frame, vector_matrix, SpinRep};
use crate::error::{Error, Result};
use crate::field::{Field, RVec, Spinor, SpinorField, VectorField};
use crate::forms::{codifferential, hodge_star, increasing_coeffs, wedge, KFormField};
use crate::spincalc::{nabla_all_at, reeb_vector_of, ZeroModeRecord};
use crate::C64;

const I: C64 = C64::new(0.0, 1.0);

/// `J v` on `R^{2m+2}`: pair `j` maps `(v_{2j-1}, v_{2j}) -> s_j (-v_{2j}, v_{2j-1})`.
pub fn ambient_j(signs: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for j in 0..v.len() / 2 {
        out[2 * j] = -signs[j] * v[2 * j + 1];
        out[2 * j + 1] = signs[j] * v[2 * j];
    }
    out
}

/// Inverse stereographic projection (from the north pole) of chart point `x`.
pub fn stereo_point(x: &[f64]) -> Vec<f64> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let mut p: Vec<f64> = x.iter().map(|v| 2.0 * v / (1.0 + r2)).collect();
    p.push((r2 - 1.0) / (1.0 + r2));
    p
}

/// Ambient images of the orthonormal frame `e_b = e^{-w} d/dx_b` at `x`.
pub fn stereo_frame(x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let q = 2.0 / (1.0 + r2);
    (0..n)
        .map(|b| {
            let mut e: Vec<f64> = (0..n).map(|i| if i == b { 1.0 } else { 0.0 } - q * x[i] * x[b]).collect();
            e.push(q * x[b]);
            e
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn require_sphere(chart: &Chart) -> Result<()> {
    if chart.kind != ChartKind::SphereStereographic {
        return Err(Error::Unsupported(format!("standard structure lives on the sphere chart, got {}", chart.kind.name())));
    }
    if chart.n % 2 == 0 {
        return Err(Error::InvalidDimension(format!("Sasakian structures need odd n, got {}", chart.n)));
    }
    Ok(())
}

/// Frame components of the standard Reeb field at chart point `x`.
pub fn standard_reeb_at(x: &[f64], signs: &[f64]) -> RVec {
    let p = stereo_point(x);
    let jp = ambient_j(signs, &p);
    stereo_frame(x).iter().map(|e| dot(&jp, e)).collect()
}

/// Frame matrix of the standard `Phi` at `x`: column `b` holds `Phi(e_b)`.
pub fn standard_phi_at(x: &[f64], signs: &[f64]) -> DMatrix<f64> {
    let fr = stereo_frame(x);
    let n = x.len();
    DMatrix::from_fn(n, n, |a, b| -dot(&ambient_j(signs, &fr[b]), &fr[a]))
}

pub fn standard_reeb(chart: &Chart, signs: &[f64]) -> Result<VectorField> {
    require_sphere(chart)?;
    let (c, s) = (chart.clone(), signs.to_vec());
    Ok(VectorField::from_fn(chart.len(), move |i| standard_reeb_at(&c.coords(i), &s)))
}

/// Joint kernel of `(Phi(X) + i X).` over `X ⊥ xi` for a frame matrix `phi`
/// and unit Reeb vector `xi`.
pub fn structure_vacua(rep: &SpinRep, phi: &DMatrix<f64>, xi: &[f64]) -> Vec<Spinor> {
    let n = rep.n;
    let mut ops = Vec::with_capacity(n);
    for b in 0..n {
        // project e_b off xi; the resulting n vectors span xi-perp
        let mut x: Vec<f64> = (0..n).map(|i| if i == b { 1.0 } else { 0.0 }).collect();
        let c = x[b] * xi[b];
        for i in 0..n {
            x[i] -= c * xi[i];
        }
        let px: Vec<f64> = (0..n).map(|a| (0..n).map(|k| phi[(a, k)] * x[k]).sum()).collect();
        ops.push(vector_matrix(rep, &px) + vector_matrix(rep, &x) * I);
    }
    joint_kernel(&ops, rep.dim, 1e-10)
}

/// Pair signs for which the standard structure admits a vacuum `psi0` at the
/// chart origin with `xi . psi0 = -i psi0`, and that vacuum. Sign patterns
/// are tried in a fixed order (all `+1` first, then single flips).
pub fn standard_orientation(rep: &SpinRep) -> Result<(Vec<f64>, Spinor)> {
    let n = rep.n;
    if n % 2 == 0 || n < 3 {
        return Err(Error::InvalidDimension(format!("need odd n >= 3, got {n}")));
    }
    let pairs = (n + 1) / 2;
    let origin = vec![0.0; n];
    for mask in 0..(1usize << pairs) {
        let signs: Vec<f64> = (0..pairs).map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let phi = standard_phi_at(&origin, &signs);
        let xi = standard_reeb_at(&origin, &signs);
        let vac = structure_vacua(rep, &phi, &xi);
        if vac.len() != 1 {
            continue;
        }
        let psi0 = vac[0].clone();
        let xp = rep.vec_apply(&xi, &psi0);
        if (xp + psi0.scale(I)).norm() < 1e-10 {
            return Ok((signs, psi0));
        }
    }
    Err(Error::Integrity("no sign pattern of the standard structure has a -i vacuum".into()))
}

/// Candidate almost-contact data on a chart. Vectors and `Phi` use frame
/// components; `Phi` is stored row-major with `phi[a * n + b] = (Phi e_b)^a`.
#[derive(Clone)]
pub struct SasakiData {
    pub xi: VectorField,
    pub eta: KFormField,
    pub phi: Field<Vec<f64>>,
}

impl SasakiData {
    /// Assemble from `xi` and `Phi`; `eta` is the metric dual of `xi`.
    pub fn from_parts(chart: &Chart, xi: VectorField, phi: Field<Vec<f64>>) -> Result<Self> {
        if xi.len() != chart.len() || phi.len() != chart.len() {
            return Err(Error::Shape("structure fields do not match chart".into()));
        }
        let x = xi.clone();
        let eta = KFormField::from_frame(chart, 1, Field::from_fn(chart.len(), move |i| x.at(i).to_vec()))?;
        Ok(SasakiData { xi, eta, phi })
    }

    /// `(-xi, -eta, -Phi)`.
    pub fn negated(&self) -> SasakiData {
        SasakiData {
            xi: self.xi.map(|v| v.iter().map(|x| -x).collect()),
            eta: KFormField { k: 1, n: self.eta.n, coeffs: self.eta.coeffs.map(|v| v.iter().map(|x| -x).collect()) },
            phi: self.phi.map(|v| v.iter().map(|x| -x).collect()),
        }
    }
}

/// The standard structure on the unit-sphere chart for the given pair signs.
pub fn standard_structure(chart: &Chart, signs: &[f64]) -> Result<SasakiData> {
    require_sphere(chart)?;
    let (c, s) = (chart.clone(), signs.to_vec());
    let phi = Field::from_fn(chart.len(), move |i| standard_phi_at(&c.coords(i), &s).transpose().as_slice().to_vec());
    SasakiData::from_parts(chart, standard_reeb(chart, signs)?, phi)
}

fn mat_vec(n: usize, m: &[f64], v: &[f64]) -> Vec<f64> {
    (0..n).map(|a| (0..n).map(|b| m[a * n + b] * v[b]).sum()).collect()
}

/// Residuals of the almost-contact identities, maxima over nodes and frame
/// directions.
#[derive(Clone, Copy, Debug, Default)]
pub struct AlmostContactReport {
    /// `|eta(xi) - 1|`.
    pub eta_xi: f64,
    /// `|Phi^2 X + X - eta(X) xi|`.
    pub phi_squared: f64,
    /// `|g(Phi X, Phi Y) - g(X, Y) + eta(X) eta(Y)|`.
    pub metric: f64,
    /// `|Phi xi|`.
    pub phi_xi: f64,
    /// `| |xi| - 1 |`.
    pub unit_length: f64,
}

impl AlmostContactReport {
    pub fn max(&self) -> f64 {
        [self.eta_xi, self.phi_squared, self.metric, self.phi_xi, self.unit_length].into_iter().fold(0.0, f64::max)
    }
}

pub fn almost_contact_check(chart: &Chart, data: &SasakiData, nodes: &[usize]) -> AlmostContactReport {
    let n = chart.n;
    let mut r = AlmostContactReport::default();
    for &i in nodes {
        let xi = data.xi.at(i);
        let eta = data.eta.frame_at(chart, i);
        let phi = data.phi.at(i);
        let exi: f64 = eta.iter().zip(xi.iter()).map(|(a, b)| a * b).sum();
        r.eta_xi = r.eta_xi.max((exi - 1.0).abs());
        r.unit_length = r.unit_length.max((xi.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs());
        let pxi = mat_vec(n, &phi, &xi);
        r.phi_xi = r.phi_xi.max(pxi.iter().map(|x| x * x).sum::<f64>().sqrt());
        let images: Vec<Vec<f64>> = (0..n).map(|b| (0..n).map(|a| phi[a * n + b]).collect()).collect();
        for b in 0..n {
            let p2 = mat_vec(n, &phi, &images[b]);
            let d: f64 = (0..n)
                .map(|a| (p2[a] + if a == b { 1.0 } else { 0.0 } - eta[b] * xi[a]).powi(2))
                .sum::<f64>()
                .sqrt();
            r.phi_squared = r.phi_squared.max(d);
            for c in 0..n {
                let g: f64 = images[b].iter().zip(images[c].iter()).map(|(x, y)| x * y).sum();
                let want = if b == c { 1.0 } else { 0.0 } - eta[b] * eta[c];
                r.metric = r.metric.max((g - want).abs());
            }
        }
    }
    r
}

/// Frame Levi-Civita connection of `e^{2w} dx^2`:
/// `nabla_{e_c} e_d = e^{-w} (d_d w e_c - delta_cd grad w)`.
fn connection_terms(chart: &Chart, node: usize) -> (f64, RVec) {
    ((-chart.log_weight(node)).exp(), chart.grad_log_weight(node))
}

/// `(nabla_{e_c} X)^a` for all `c` (outer index) of a frame-component field.
pub fn covariant_derivative_vector(chart: &Chart, x: &VectorField, node: usize) -> Vec<Vec<f64>> {
    let n = chart.n;
    let (s, dw) = connection_terms(chart, node);
    let v = x.at(node);
    let dwv: f64 = dw.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    (0..n)
        .map(|c| {
            let d = chart.d1(node, c, |j| x.at(j));
            (0..n).map(|a| s * (d[a] + if a == c { dwv } else { 0.0 } - v[c] * dw[a])).collect()
        })
        .collect()
}

/// `(nabla_{e_c} T)^a_b` (row-major in `a, b`) for all `c` of a (1,1)-tensor field.
pub fn covariant_derivative_tensor(chart: &Chart, t: &Field<Vec<f64>>, node: usize) -> Vec<Vec<f64>> {
    let n = chart.n;
    let (s, dw) = connection_terms(chart, node);
    let m = t.at(node);
    (0..n)
        .map(|c| {
            let d = chart.d1(node, c, |j| t.at(j));
            let om = |a: usize, e: usize| s * (if a == c { dw[e] } else { 0.0 } - if c == e { dw[a] } else { 0.0 });
            let mut out = vec![0.0; n * n];
            for a in 0..n {
                for b in 0..n {
                    let mut v = s * d[a * n + b];
                    for e in 0..n {
                        v += om(a, e) * m[e * n + b] - m[a * n + e] * om(e, b);
                    }
                    out[a * n + b] = v;
                }
            }
            out
        })
        .collect()
}

/// Max over nodes and frame directions of
/// `|(nabla_X Phi)(Y) - g(X, Y) xi + eta(Y) X|`.
pub fn sasakian_check(chart: &Chart, data: &SasakiData, nodes: &[usize]) -> f64 {
    let n = chart.n;
    let mut worst = 0.0f64;
    for &i in nodes {
        let xi = data.xi.at(i);
        let eta = data.eta.frame_at(chart, i);
        let d = covariant_derivative_tensor(chart, &data.phi, i);
        for c in 0..n {
            for b in 0..n {
                let r: f64 = (0..n)
                    .map(|a| {
                        let want = if c == b { xi[a] } else { 0.0 } - eta[b] * if a == c { 1.0 } else { 0.0 };
                        (d[c][a * n + b] - want).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(r);
            }
        }
    }
    worst
}

/// Structure extracted from a Killing zero mode together with its checks.
#[derive(Clone)]
pub struct ReebExtraction {
    pub data: SasakiData,
    /// Max `| |A| - n/(2 lambda) |` over the nodes.
    pub potential_length: f64,
    /// Max `|phi - i xi . phi| / |phi|`.
    pub vacuum_identity: f64,
    /// Max `|(nabla_k A)^j + (nabla_j A)^k|`.
    pub killing_antisymmetry: f64,
    /// Max `|nabla_xi xi|`.
    pub geodesic: f64,
    /// Max pointwise Killing defect `|nabla_X phi + X.phi / 2| / |phi|` used
    /// as the precondition.
    pub killing_defect: f64,
}

/// `xi = (2 lambda / n) A` recomputed from `phi`, `Phi = -nabla xi`, `eta`
/// the dual of `xi`. The precondition (a `-1/2` Killing spinor) is checked
/// pointwise on `nodes` against `tol`.
pub fn reeb_from_zero_mode(rec: &ZeroModeRecord, nodes: &[usize], tol: f64) -> Result<ReebExtraction> {
    let chart = &rec.chart;
    let rep = &rec.rep;
    let n = chart.n;
    if n % 2 == 0 {
        return Err(Error::Unsupported(format!("Reeb extraction needs odd n, got {n}")));
    }
    if rec.potential.k != 1 {
        return Err(Error::Unsupported("Reeb extraction needs a vector potential".into()));
    }
    let eval = |j: usize| rec.phi.at(j);
    let mut killing_defect = 0.0f64;
    for &i in nodes {
        let p = rec.phi.at(i);
        let nab = nabla_all_at(chart, rep, &eval, i);
        let d: f64 = nab
            .iter()
            .enumerate()
            .map(|(a, v)| {
                let mut e = v.clone();
                e.axpy(C64::new(0.5, 0.0), &rep.gamma_apply(a, &p));
                e.norm_sqr()
            })
            .sum::<f64>()
            .sqrt();
        killing_defect = killing_defect.max(d / p.norm());
    }
    if killing_defect > tol {
        return Err(Error::Precondition(format!("spinor is not a -1/2 Killing spinor (defect {killing_defect:e})")));
    }
    let (ph, r) = (rec.phi.clone(), rep.clone());
    let xi = VectorField::from_fn(chart.len(), move |i| reeb_vector_of(&r, &ph.at(i)));
    let (c, x) = (chart.clone(), xi.clone());
    let phi_t = Field::from_fn(chart.len(), move |i| {
        let d = covariant_derivative_vector(&c, &x, i);
        let n = c.n;
        let mut m = vec![0.0; n * n];
        for b in 0..n {
            for a in 0..n {
                m[a * n + b] = -d[b][a];
            }
        }
        m
    });
    let data = SasakiData::from_parts(chart, xi.clone(), phi_t)?;
    let target = n as f64 / (2.0 * rec.lambda);
    let (mut len, mut vac, mut kill, mut geo) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let a_field = rec.potential.coeffs.map(|v| v.iter().copied().collect::<RVec>());
    for &i in nodes {
        let a = a_field.at(i);
        len = len.max((a.iter().map(|x| x * x).sum::<f64>().sqrt() - target).abs());
        let p = rec.phi.at(i);
        let xv = xi.at(i);
        let xp = rep.vec_apply(&xv, &p).scale(C64::new(0.0, 1.0));
        vac = vac.max((p.clone() - xp).norm() / p.norm());
        let da = covariant_derivative_vector(chart, &a_field, i);
        for k in 0..n {
            for j in 0..n {
                kill = kill.max((da[k][j] + da[j][k]).abs());
            }
        }
        let dx = covariant_derivative_vector(chart, &xi, i);
        let g: f64 = (0..n).map(|a| (0..n).map(|c| xv[c] * dx[c][a]).sum::<f64>().powi(2)).sum::<f64>().sqrt();
        geo = geo.max(g);
    }
    Ok(ReebExtraction { data, potential_length: len, vacuum_identity: vac, killing_antisymmetry: kill, geodesic: geo, killing_defect })
}

/// `xi = (lambda / n) (d* alpha)^sharp` in frame components.
pub fn reeb_from_two_form(chart: &Chart, alpha: &KFormField, lambda: f64) -> Result<VectorField> {
    if alpha.k != 2 {
        return Err(Error::Shape(format!("expected a 2-form, got degree {}", alpha.k)));
    }
    let d = codifferential(chart, alpha)?;
    let c = chart.clone();
    let n = chart.n as f64;
    Ok(VectorField::from_fn(chart.len(), move |i| {
        let s = lambda / n * (-c.log_weight(i)).exp();
        d.coeffs.at(i).iter().map(|x| s * x).collect()
    }))
}

/// `c *(alpha ∧ ... ∧ alpha)` (`m` factors) as a frame vector field, with
/// `c = sigma / (m! c_0^m)` and `c_0 = -n / (2 m lambda)`. For `alpha` built
/// from a vacuum (`alpha = c_0 sum b_j ∧ Phi b_j`) this is the Reeb field when
/// `sigma` is the [`adapted_orientation`] of the structure: the Hodge star
/// sees the chart orientation, the Reeb field does not.
pub fn reeb_from_wedge_power(chart: &Chart, alpha: &KFormField, lambda: f64, sigma: f64) -> Result<VectorField> {
    let n = chart.n;
    if alpha.k != 2 || n % 2 == 0 {
        return Err(Error::Shape("wedge-power route needs a 2-form in odd dimension".into()));
    }
    let m = n / 2;
    let mut acc = alpha.clone();
    for _ in 1..m {
        acc = wedge(&acc, alpha)?;
    }
    let fact: f64 = (1..=m).map(|j| j as f64).product();
    let c0 = -(n as f64) / (2.0 * m as f64 * lambda);
    let c = sigma / (fact * c0.powi(m as i32));
    let star = hodge_star(chart, &acc)?;
    let ch = chart.clone();
    Ok(VectorField::from_fn(chart.len(), move |i| {
        let s = c * (-ch.log_weight(i)).exp();
        star.coeffs.at(i).iter().map(|x| s * x).collect()
    }))
}

/// `<a, b> / (|a| |b|)` for frame vector fields: the `L^2` product over the
/// chart, or, when `nodes` is given, the volume-weighted sum over those nodes.
pub fn cosine_similarity(chart: &Chart, a: &VectorField, b: &VectorField, nodes: Option<&[usize]>) -> f64 {
    let dot = |x: &VectorField, y: &VectorField| {
        let at = |i: usize| x.at(i).iter().zip(y.at(i).iter()).map(|(p, q)| p * q).sum::<f64>();
        match nodes {
            Some(ns) => ns.iter().map(|&i| at(i) * chart.volume_density(i)).sum(),
            None => chart.integrate_fn(&at).value,
        }
    };
    dot(a, b) / (dot(a, a) * dot(b, b)).sqrt()
}

/// Orthonormal basis of `xi^perp` by Gram-Schmidt from the coordinate axes,
/// always taking the axis with the largest remaining component next (ties
/// by axis index).
pub fn perp_basis(xi: &[f64]) -> Vec<Vec<f64>> {
    let n = xi.len();
    let nx = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut done: Vec<Vec<f64>> = vec![xi.iter().map(|x| x / nx).collect()];
    let mut out = Vec::with_capacity(n - 1);
    let mut used = vec![false; n];
    for _ in 0..n - 1 {
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for ax in (0..n).filter(|&a| !used[a]) {
            let mut v: Vec<f64> = (0..n).map(|i| if i == ax { 1.0 } else { 0.0 }).collect();
            for d in &done {
                let c: f64 = d.iter().zip(v.iter()).map(|(p, q)| p * q).sum();
                v.iter_mut().zip(d.iter()).for_each(|(x, y)| *x -= c * y);
            }
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|b| nv > b.2 + 1e-12) {
                best = Some((ax, v, nv));
            }
        }
        let (ax, v, nv) = best.expect("enough axes");
        used[ax] = true;
        let v: Vec<f64> = v.iter().map(|x| x / nv).collect();
        done.push(v.clone());
        out.push(v);
    }
    out
}

/// Max over nodes and a basis of `xi^perp` of `|(Phi X + i X) . phi| / |phi|`.
pub fn vacuum_field_check(rep: &SpinRep, phi: &SpinorField, data: &SasakiData, nodes: &[usize]) -> Result<f64> {
    let n = rep.n;
    let mut worst = 0.0f64;
    for &i in nodes {
        let p = phi.at(i);
        let np = p.norm();
        if !(np > 1e-12) {
            return Err(Error::Precondition(format!("spinor vanishes at node {i}")));
        }
        let m = data.phi.at(i);
        for x in perp_basis(&data.xi.at(i)) {
            let px = mat_vec(n, &m, &x);
            let mut v = rep.vec_apply(&px, &p);
            v.axpy(C64::new(0.0, 1.0), &rep.vec_apply(&x, &p));
            worst = worst.max(v.norm() / np);
        }
    }
    Ok(worst)
}

/// Frame `(b_1, Phi b_1, b_3, Phi b_3, ...)` of `xi^perp` adapted to `Phi`,
/// seeded by `start` (any vector not parallel to `xi`).
pub fn adapted_frame(phi: &[f64], xi: &[f64], start: Option<&[f64]>) -> Vec<Vec<f64>> {
    let n = xi.len();
    let mut done: Vec<Vec<f64>> = vec![xi.to_vec()];
    let mut out = Vec::with_capacity(n - 1);
    let candidates: Vec<Vec<f64>> = start
        .map(|s| vec![s.to_vec()])
        .unwrap_or_default()
        .into_iter()
        .chain(perp_basis(xi))
        .collect();
    let project = |v: &[f64], done: &[Vec<f64>]| -> Vec<f64> {
        let mut v = v.to_vec();
        for d in done {
            let c: f64 = d.iter().zip(v.iter()).map(|(p, q)| p * q).sum();
            v.iter_mut().zip(d.iter()).for_each(|(x, y)| *x -= c * y);
        }
        v
    };
    for cand in candidates {
        if out.len() + 1 >= n {
            break;
        }
        let v = project(&cand, &done);
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv < 1e-6 {
            continue;
        }
        let b: Vec<f64> = v.iter().map(|x| x / nv).collect();
        let pb = mat_vec(n, phi, &b);
        let npb = pb.iter().map(|x| x * x).sum::<f64>().sqrt();
        let pb: Vec<f64> = pb.iter().map(|x| x / npb).collect();
        done.push(b.clone());
        done.push(pb.clone());
        out.push(b);
        out.push(pb);
    }
    out
}

/// Pointwise vacuum field for `data`: at each node the joint kernel of the
/// `F_j^*` built from an adapted frame. `seed` randomizes the frame seed and
/// the phase, so different seeds give independent constructions.
pub fn vacuum_field(rep: &SpinRep, data: &SasakiData, len: usize, seed: u64) -> SpinorField {
    let (r, d) = (rep.clone(), data.clone());
    SpinorField::from_fn(len, move |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let start: Vec<f64> = (0..r.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let frame = adapted_frame(&d.phi.at(i), &d.xi.at(i), Some(&start));
        let ops = ladder_ops_in_frame(&r, &frame);
        let ker = joint_kernel(&ops.fstar, r.dim, 1e-10);
        match ker.first() {
            Some(v) => fix_phase(v.clone()).scale(C64::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(0.0..std::f64::consts::TAU))),
            None => Spinor::zeros(r.dim),
        }
    })
}

/// Sign of `det(b_1, Phi b_1, ..., b_m, Phi b_m, xi)` in frame components.
pub fn adapted_orientation(data: &SasakiData, node: usize) -> f64 {
    let xi = data.xi.at(node);
    let n = xi.len();
    let mut cols = adapted_frame(&data.phi.at(node), &xi, None);
    cols.push(xi.to_vec());
    DMatrix::from_fn(n, n, |a, b| cols[b][a]).determinant().signum()
}

/// Complex dimension of the pointwise vacuum space at a node.
pub fn vacuum_dimension(rep: &SpinRep, data: &SasakiData, node: usize) -> usize {
    let frame = adapted_frame(&data.phi.at(node), &data.xi.at(node), None);
    joint_kernel(&ladder_ops_in_frame(rep, &frame).fstar, rep.dim, 1e-10).len()
}

/// Max over nodes of `|psi - (<psi, phi>/|phi|^2) phi| / |psi|`.
pub fn vacuum_uniqueness_field(phi: &SpinorField, psi: &SpinorField, nodes: &[usize]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &i in nodes {
        let (p, q) = (phi.at(i), psi.at(i));
        let (np, nq) = (p.norm_sqr(), q.norm());
        if !(np > 0.0 && nq > 0.0) {
            return Err(Error::Precondition(format!("vacuum vanishes at node {i}")));
        }
        let proj = p.scale(q.inner(&p) / np);
        worst = worst.max((q - proj).norm() / nq);
    }
    Ok(worst)
}

/// Dense frame components of `beta_ab = Im <e_a e_b phi, phi>`.
pub fn spinor_two_form(rep: &SpinRep, phi: &Spinor) -> Vec<f64> {
    let n = rep.n;
    let mut out = vec![0.0; n * n];
    for b in 0..n {
        let gb = rep.gamma_apply(b, phi);
        for a in 0..n {
            if a != b {
                out[a * n + b] = rep.gamma_apply(a, &gb).inner(phi).im;
            }
        }
    }
    out
}

/// 2-form built from `phi_+` and the checks of the degree-2 equality case.
#[derive(Clone)]
pub struct TwoFormWitness {
    /// Frame components (dense) of `alpha = c beta`, `c = -n / (2 m lambda)`.
    pub alpha_frame: Field<Vec<f64>>,
    pub alpha: KFormField,
    pub lambda: f64,
    /// Max `| |alpha|^2 - n^2/(4 m lambda^2) |` relative to the target.
    pub length: f64,
    /// Max `|d alpha|` relative to `|alpha|` over the nodes.
    pub closedness: f64,
    /// Max relative gap `(m |alpha|^2 |phi|^2 - |alpha . phi|^2) / (m |alpha|^2 |phi|^2)`.
    pub sharp_gap: f64,
    /// Max `|alpha . phi_+ + i (n / 2 lambda) phi_+| / |phi_+|`.
    pub clifford_eigen: f64,
    /// Only for `n = 3 mod 4`.
    pub xibar: Option<XiBarCheck>,
    /// Max `|alpha . phi_- - i (n / 2 lambda) phi_-| / |phi_-|`: how far a
    /// supplied `phi_-` is from solving its half of the split equation.
    pub minus_residual: Option<f64>,
}

/// `xibar = eps (-1)^{(m+1)/2} sum_j Im<e_j phi_+, phi_+> e_j / |phi_+|^2`,
/// with `eps` the volume-element sign of the representation.
#[derive(Clone, Copy, Debug)]
pub struct XiBarCheck {
    pub eps: f64,
    /// Mean of `<xibar, xi>` over the nodes (`+1` when `xibar = xi`, `-1`
    /// when `xibar = -xi`).
    pub alignment: f64,
    /// Max `|xibar . phi_+ + i phi_+| / |phi_+|`.
    pub minus_i: f64,
    /// Max `|xibar . phi_+ - i phi_+| / |phi_+|`.
    pub plus_i: f64,
}

/// Build `alpha` from a `-1/2` Killing spinor on a unit sphere and check the
/// equality-case identities on `nodes`. `lambda = n Vol^{1/n} / (2 sqrt m)`
/// so that `||alpha||_{L^n} = 1`; `Vol` is the chart quadrature unless
/// `volume` is given.
pub fn two_form_equality_witness(
    rep: &SpinRep,
    chart: &Chart,
    phi_plus: &SpinorField,
    phi_minus: Option<&SpinorField>,
    nodes: &[usize],
    volume: Option<f64>,
) -> Result<TwoFormWitness> {
    require_sphere(chart)?;
    let n = chart.n;
    if n % 2 == 0 {
        return Err(Error::Unsupported(format!("degree-2 witness needs odd n, got {n}")));
    }
    let m = n / 2;
    let nf = n as f64;
    let vol = volume.unwrap_or_else(|| chart.volume().value);
    let lambda = nf * vol.powf(1.0 / nf) / (2.0 * (m as f64).sqrt());
    let c = -nf / (2.0 * m as f64 * lambda);
    let (r, p) = (rep.clone(), phi_plus.clone());
    let alpha_frame = Field::from_fn(chart.len(), move |i| {
        let ph = p.at(i);
        let s = c / ph.norm_sqr();
        spinor_two_form(&r, &ph).into_iter().map(|x| s * x).collect::<Vec<f64>>()
    });
    let alpha = KFormField::from_frame(chart, 2, alpha_frame.clone())?;
    let d = crate::forms::exterior_derivative(chart, &alpha)?;
    let target = nf * nf / (4.0 * m as f64 * lambda * lambda);
    let (mut length, mut closed, mut gap, mut eig) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut minus_i, mut plus_i, mut align) = (0.0f64, 0.0f64, 0.0f64);
    let mut minus = 0.0f64;
    let eps = rep.omega_sign.unwrap_or(1) as f64;
    for &i in nodes {
        let a = alpha_frame.at(i);
        let a2: f64 = increasing_coeffs(n, 2, &a).iter().map(|x| x * x).sum();
        length = length.max((a2 - target).abs() / target);
        let dn = d.norm_sqr_at(chart, i).sqrt();
        closed = closed.max(dn / a2.sqrt());
        let ph = phi_plus.at(i);
        let ap = rep.two_form_apply(&a, &ph);
        let rhs = m as f64 * a2 * ph.norm_sqr();
        gap = gap.max((rhs - ap.norm_sqr()) / rhs);
        let mut e = ap.clone();
        e.axpy(C64::new(0.0, nf / (2.0 * lambda)), &ph);
        eig = eig.max(e.norm() / ph.norm());
        if n % 4 == 3 {
            let sign = eps * if ((m + 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            let xbar: Vec<f64> = (0..n).map(|j| sign * rep.gamma_apply(j, &ph).inner(&ph).im / ph.norm_sqr()).collect();
            let xp = rep.vec_apply(&xbar, &ph);
            let iph = ph.scale(C64::new(0.0, 1.0));
            minus_i = minus_i.max((xp.clone() + iph.clone()).norm() / ph.norm());
            plus_i = plus_i.max((xp - iph).norm() / ph.norm());
            let xi = reeb_vector_of(rep, &ph);
            align += xbar.iter().zip(xi.iter()).map(|(a, b)| a * b).sum::<f64>() / nodes.len() as f64;
        }
        if let Some(pm) = phi_minus {
            let q = pm.at(i);
            let mut e = rep.two_form_apply(&a, &q);
            e.axpy(C64::new(0.0, -nf / (2.0 * lambda)), &q);
            minus = minus.max(e.norm() / q.norm());
        }
    }
    Ok(TwoFormWitness {
        alpha_frame,
        alpha,
        lambda,
        length,
        closedness: closed,
        sharp_gap: gap,
        clifford_eigen: eig,
        xibar: (n % 4 == 3).then_some(XiBarCheck { eps, alignment: align, minus_i, plus_i }),
        minus_residual: phi_minus.map(|_| minus),
    })
}
