//! Complex spin representation of `Cl(n)` and its algebraic actions.
//!
//! Gamma matrices are built by the tensor-product recursion
//! `gamma_j -> gamma_j (x) sigma_3`, `gamma_{n+1} = I (x) i sigma_1`,
//! `gamma_{n+2} = I (x) i sigma_2`, starting from `(i sigma_1, i sigma_2)`.
//! For odd `n` the last generator is the (phase-corrected) product of the
//! others. Every generator is then a monomial matrix (one nonzero per row),
//! which gives a cheap action on spinors.
//!
//! With this construction the volume element `gamma_1 ... gamma_n` for odd `n`
//! equals `eps * i^s` with `s = ((n + 1) / 2) mod 2` and
//! `eps = -1, +1, -1, +1` for `n = 3, 5, 7, 9` (computed, not assumed).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::Spinor;
use crate::forms::{antisymmetrize, antisymmetry_defect, increasing_tuples};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Sparse form of a monomial matrix: `(M psi)_r = phase[r] * psi[col[r]]`.
#[derive(Clone, Debug)]
struct Monomial {
    col: Vec<usize>,
    phase: Vec<C64>,
}

impl Monomial {
    fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut col = Vec::with_capacity(m.nrows());
        let mut phase = Vec::with_capacity(m.nrows());
        for r in 0..m.nrows() {
            let c = (0..m.ncols())
                .find(|&c| m[(r, c)].norm() > 0.5)
                .expect("gamma matrices are monomial");
            col.push(c);
            phase.push(m[(r, c)]);
        }
        Monomial { col, phase }
    }
}

/// Complex spin representation for ambient dimension `n`.
#[derive(Clone, Debug)]
pub struct SpinRep {
    pub n: usize,
    /// Spinor dimension `2^[n/2]`.
    pub dim: usize,
    /// `[n/2]`
    pub m: usize,
    pub gamma: Vec<DMatrix<C64>>,
    /// Chirality sign of the volume element (odd `n` only).
    pub omega_sign: Option<i32>,
    /// Power `s` in `gamma_1 ... gamma_n = eps * i^s` (odd `n` only).
    pub omega_power: Option<u32>,
    mono: Vec<Monomial>,
}

fn sigma() -> [DMatrix<C64>; 3] {
    let s1 = DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let s2 = DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]);
    let s3 = DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
    [s1, s2, s3]
}

pub fn build_spin_rep(n: usize) -> Result<SpinRep> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!("n = {n}, need n >= 2")));
    }
    let [s1, s2, s3] = sigma();
    let mut gamma: Vec<DMatrix<C64>> = vec![&s1 * I, &s2 * I];
    while gamma.len() + 2 <= n {
        let d = gamma[0].nrows();
        let id = DMatrix::<C64>::identity(d, d);
        let mut next: Vec<DMatrix<C64>> = gamma.iter().map(|g| g.kronecker(&s3)).collect();
        next.push(id.kronecker(&(&s1 * I)));
        next.push(id.kronecker(&(&s2 * I)));
        gamma = next;
    }
    let dim = gamma[0].nrows();
    let id = DMatrix::<C64>::identity(dim, dim);
    let (mut omega_sign, mut omega_power) = (None, None);
    if n % 2 == 1 {
        let prod = gamma.iter().fold(id.clone(), |acc, g| acc * g);
        let sq = &prod * &prod;
        let last = if (sq[(0, 0)] + ONE).norm() < 1e-12 { prod } else { prod * I };
        gamma.push(last);
        let vol = gamma.iter().fold(id.clone(), |acc, g| acc * g);
        let s = (((n + 1) / 2) % 2) as u32;
        let eps = vol[(0, 0)] / I.powu(s);
        omega_sign = Some(if eps.re > 0.0 { 1 } else { -1 });
        omega_power = Some(s);
    }
    let mono = gamma.iter().map(Monomial::from_dense).collect();
    Ok(SpinRep { n, dim, m: n / 2, gamma, omega_sign, omega_power, mono })
}

impl SpinRep {
    /// `gamma_j psi` (0-based `j`).
    #[inline]
    pub fn gamma_apply(&self, j: usize, psi: &Spinor) -> Spinor {
        let mo = &self.mono[j];
        Spinor((0..self.dim).map(|r| mo.phase[r] * psi.0[mo.col[r]]).collect())
    }

    /// `X . psi` for frame components `x`.
    pub fn vec_apply(&self, x: &[f64], psi: &Spinor) -> Spinor {
        let mut out = Spinor::zeros(self.dim);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                let mo = &self.mono[j];
                for r in 0..self.dim {
                    out.0[r] += mo.phase[r] * psi.0[mo.col[r]] * xj;
                }
            }
        }
        out
    }

    /// `gamma_{i_1} ... gamma_{i_k} psi` (rightmost applied first).
    pub fn product_apply(&self, idx: &[usize], psi: &Spinor) -> Spinor {
        idx.iter().rev().fold(psi.clone(), |acc, &j| self.gamma_apply(j, &acc))
    }

    /// Action of a 2-form given as a dense antisymmetric `n x n` frame array,
    /// `sum_{i<j} a_ij gamma_i gamma_j psi`. No validation.
    pub fn two_form_apply(&self, a: &[f64], psi: &Spinor) -> Spinor {
        let n = self.n;
        let mut out = Spinor::zeros(self.dim);
        for j in 0..n {
            let gj = self.gamma_apply(j, psi);
            for i in 0..j {
                let c = a[i * n + j];
                if c != 0.0 {
                    let gij = self.gamma_apply(i, &gj);
                    out.add_scaled_re(c, &gij);
                }
            }
        }
        out
    }

    /// Volume element `gamma_1 ... gamma_n` as a scalar, odd `n` only.
    pub fn volume_scalar(&self) -> Option<C64> {
        match (self.omega_sign, self.omega_power) {
            (Some(e), Some(s)) => Some(I.powu(s) * e as f64),
            _ => None,
        }
    }
}

impl Spinor {
    fn add_scaled_re(&mut self, a: f64, x: &Spinor) {
        for (s, v) in self.0.iter_mut().zip(x.0.iter()) {
            *s += v * a;
        }
    }
}

fn check_spinor(rep: &SpinRep, psi: &Spinor) -> Result<()> {
    if psi.dim() != rep.dim {
        return Err(Error::Shape(format!("spinor has {} components, rep needs {}", psi.dim(), rep.dim)));
    }
    Ok(())
}

/// `X . psi = sum_j X_j gamma_j psi`.
pub fn clifford_mul(rep: &SpinRep, x: &[f64], psi: &Spinor) -> Result<Spinor> {
    check_spinor(rep, psi)?;
    if x.len() != rep.n {
        return Err(Error::Shape(format!("vector has {} components, need {}", x.len(), rep.n)));
    }
    Ok(rep.vec_apply(x, psi))
}

/// Action of a `k`-form with dense antisymmetric coefficients (`n^k` entries,
/// row-major): `sum_{i_1<...<i_k} a_{i_1...i_k} gamma_{i_1}...gamma_{i_k} psi`.
pub fn kform_action(rep: &SpinRep, k: usize, coeffs: &[f64], psi: &Spinor) -> Result<Spinor> {
    check_spinor(rep, psi)?;
    let n = rep.n;
    if k > n {
        return Err(Error::Shape(format!("degree {k} exceeds dimension {n}")));
    }
    if coeffs.len() != n.pow(k as u32) {
        return Err(Error::Shape(format!("{} coefficients for a {k}-form in dimension {n}", coeffs.len())));
    }
    let defect = antisymmetry_defect(n, k, coeffs);
    let scale = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs())).max(1e-300);
    if defect > 1e-10 * scale {
        return Err(Error::Contract(format!("coefficients not antisymmetric (defect {defect:e})")));
    }
    let a = antisymmetrize(n, k, coeffs);
    let mut out = Spinor::zeros(rep.dim);
    for tuple in increasing_tuples(n, k) {
        let flat = tuple.iter().fold(0, |acc, &i| acc * n + i);
        let c = a[flat];
        if c != 0.0 {
            out.add_scaled_re(c, &rep.product_apply(&tuple, psi));
        }
    }
    Ok(out)
}

/// `i^{[(k+1)/2]}`, the factor making the `k`-form action symmetric.
pub fn symmetrizing_phase(k: usize) -> C64 {
    I.powu(((k + 1) / 2) as u32)
}

/// Ladder operators `F_j = (gamma_{2j-1} + i gamma_{2j}) / 2` and their
/// partners `F_j^* = (gamma_{2j-1} - i gamma_{2j}) / 2`, `j = 1..m`.
#[derive(Clone, Debug)]
pub struct LadderOps {
    pub f: Vec<DMatrix<C64>>,
    pub fstar: Vec<DMatrix<C64>>,
}

pub fn build_ladder_ops(rep: &SpinRep) -> LadderOps {
    ladder_ops_in_frame(rep, &identity_frame(rep.n))
}

fn identity_frame(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|j| (0..n).map(|k| if j == k { 1.0 } else { 0.0 }).collect()).collect()
}

/// Clifford matrix of a frame vector.
pub fn vector_matrix(rep: &SpinRep, x: &[f64]) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(rep.dim, rep.dim);
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            out += &rep.gamma[j] * C64::new(xj, 0.0);
        }
    }
    out
}

/// Ladder operators built from an orthonormal frame `b_1, ..., b_{2m}`
/// (given as frame-component vectors) instead of the standard one.
pub fn ladder_ops_in_frame(rep: &SpinRep, basis: &[Vec<f64>]) -> LadderOps {
    let half = C64::new(0.5, 0.0);
    let mut f = Vec::with_capacity(rep.m);
    let mut fstar = Vec::with_capacity(rep.m);
    for j in 0..rep.m {
        let a = vector_matrix(rep, &basis[2 * j]);
        let b = vector_matrix(rep, &basis[2 * j + 1]);
        f.push((&a + &b * I) * half);
        fstar.push((&a - &b * I) * half);
    }
    LadderOps { f, fstar }
}

/// Orthonormal basis (deterministic phases) of the joint kernel of `ops`,
/// using a singular-value cutoff relative to the largest singular value.
pub fn joint_kernel(ops: &[DMatrix<C64>], dim: usize, cutoff: f64) -> Vec<Spinor> {
    if ops.is_empty() {
        return (0..dim).map(|k| Spinor::basis(dim, k)).collect();
    }
    let rows: usize = ops.iter().map(|o| o.nrows()).sum();
    let mut stacked = DMatrix::<C64>::zeros(rows.max(dim), dim);
    let mut r0 = 0;
    for o in ops {
        stacked.view_mut((r0, 0), (o.nrows(), dim)).copy_from(o);
        r0 += o.nrows();
    }
    let svd = stacked.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max).max(1.0);
    let mut out = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff * smax {
            let v: Vec<C64> = (0..dim).map(|c| vt[(i, c)].conj()).collect();
            out.push(fix_phase(Spinor::from_slice(&v)));
        }
    }
    out
}

/// Normalize and rotate so that the first non-negligible component is real
/// and positive.
pub fn fix_phase(mut s: Spinor) -> Spinor {
    let nrm = s.norm();
    if nrm == 0.0 {
        return s;
    }
    let lead = s.0.iter().copied().find(|c| c.norm() > 1e-8 * nrm).unwrap_or(ONE);
    let rot = lead.conj() / (lead.norm() * nrm);
    s = s.scale(rot);
    s
}

/// The joint kernel of all `F_j^*`.
pub fn pointwise_vacua(rep: &SpinRep, ops: &LadderOps) -> Vec<Spinor> {
    joint_kernel(&ops.fstar, rep.dim, 1e-10)
}

fn mat_apply(m: &DMatrix<C64>, psi: &Spinor) -> Spinor {
    Spinor::from_dvector(&(m * psi.to_dvector()))
}

/// `{F_{j_1} ... F_{j_l} phi0 : j_1 < ... < j_l}`, ordered by `l` then
/// lexicographically.
pub fn vacuum_basis(rep: &SpinRep, phi0: &Spinor) -> Result<Vec<Spinor>> {
    vacuum_basis_with(rep, &build_ladder_ops(rep), phi0)
}

pub fn vacuum_basis_with(rep: &SpinRep, ops: &LadderOps, phi0: &Spinor) -> Result<Vec<Spinor>> {
    check_spinor(rep, phi0)?;
    let nrm = phi0.norm();
    if nrm == 0.0 {
        return Err(Error::Precondition("vacuum must be nonzero".into()));
    }
    for (j, fs) in ops.fstar.iter().enumerate() {
        let r = mat_apply(fs, phi0).norm() / nrm;
        if r > 1e-10 {
            return Err(Error::Precondition(format!("F_{}^* phi0 has relative size {r:e}", j + 1)));
        }
    }
    let mut out = Vec::with_capacity(1 << rep.m);
    for l in 0..=rep.m {
        for tuple in increasing_tuples(rep.m, l) {
            let v = tuple.iter().rev().fold(phi0.clone(), |acc, &j| mat_apply(&ops.f[j], &acc));
            out.push(v);
        }
    }
    Ok(out)
}

/// Largest entry modulus.
pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise residual of the Clifford relations and anti-Hermiticity.
pub fn clifford_relation_residual(rep: &SpinRep) -> f64 {
    let d = rep.dim;
    let id = DMatrix::<C64>::identity(d, d);
    let mut worst = 0.0f64;
    for j in 0..rep.n {
        let gj = &rep.gamma[j];
        worst = worst.max(max_abs(&(gj.adjoint() + gj)));
        for k in 0..rep.n {
            let gk = &rep.gamma[k];
            let mut anti = gj * gk + gk * gj;
            if j == k {
                anti += &id * C64::new(2.0, 0.0);
            }
            worst = worst.max(max_abs(&anti));
        }
    }
    worst
}

/// Largest entrywise residual of the ladder relations
/// `{F_j, F_k} = {F_j^*, F_k^*} = 0`, `{F_j, F_k^*} = -delta_jk`, and
/// `F_j^dagger = -F_j^*`.
pub fn ladder_relation_residual(ops: &LadderOps) -> f64 {
    let m = ops.f.len();
    if m == 0 {
        return 0.0;
    }
    let d = ops.f[0].nrows();
    let id = DMatrix::<C64>::identity(d, d);
    let mut worst = 0.0f64;
    for j in 0..m {
        worst = worst.max(max_abs(&(ops.f[j].adjoint() + &ops.fstar[j])));
        for k in 0..m {
            let (fj, fk, sj, sk) = (&ops.f[j], &ops.f[k], &ops.fstar[j], &ops.fstar[k]);
            worst = worst.max(max_abs(&(fj * fk + fk * fj)));
            worst = worst.max(max_abs(&(sj * sk + sk * sj)));
            let mut mixed = fj * sk + sk * fj;
            if j == k {
                mixed += &id;
            }
            worst = worst.max(max_abs(&mixed));
        }
    }
    worst
}
