//! Exterior algebra and calculus: dense antisymmetric index arrays,
//! antisymmetric normal forms, Clifford identities for 2-forms, and
//! `d`, `d*`, `*`, `∧` on chart fields.

use nalgebra::DMatrix;

use crate::chart::Chart;
use crate::clifford::SpinRep;
use crate::error::{Error, Result};
use crate::field::{Field, Spinor};
use crate::C64;


/// All strictly increasing `k`-tuples from `0..n`, lexicographic.
pub fn increasing_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// All permutations of `0..k` with their signs.
pub fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    if k == 0 {
        return vec![(vec![], 1.0)];
    }
    let mut out = Vec::new();
    for (p, s) in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            let sign = if (p.len() - pos) % 2 == 0 { s } else { -s };
            out.push((q, sign));
        }
    }
    out
}

pub fn flat_index(n: usize, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

pub fn unflatten(n: usize, k: usize, mut flat: usize) -> Vec<usize> {
    let mut idx = vec![0; k];
    for slot in idx.iter_mut().rev() {
        *slot = flat % n;
        flat /= n;
    }
    idx
}

/// Full antisymmetrization `(1/k!) sum_sigma sgn(sigma) a_{sigma(I)}`.
pub fn antisymmetrize(n: usize, k: usize, a: &[f64]) -> Vec<f64> {
    let perms = permutations(k);
    let fact = perms.len() as f64;
    let mut out = vec![0.0; a.len()];
    for (flat, o) in out.iter_mut().enumerate() {
        let idx = unflatten(n, k, flat);
        let mut s = 0.0;
        for (p, sign) in &perms {
            let permuted: Vec<usize> = p.iter().map(|&j| idx[j]).collect();
            s += sign * a[flat_index(n, &permuted)];
        }
        *o = s / fact;
    }
    out
}

/// Largest entry of `a - antisymmetrize(a)`.
pub fn antisymmetry_defect(n: usize, k: usize, a: &[f64]) -> f64 {
    antisymmetrize(n, k, a).iter().zip(a.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Write `vals[t]` (one value per increasing tuple, in [`increasing_tuples`]
/// order) into a dense antisymmetric array.
pub fn fill_antisymmetric(n: usize, k: usize, vals: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n.pow(k as u32)];
    let perms = permutations(k);
    for (t, &v) in increasing_tuples(n, k).iter().zip(vals.iter()) {
        if v == 0.0 {
            continue;
        }
        for (p, sign) in &perms {
            let idx: Vec<usize> = p.iter().map(|&j| t[j]).collect();
            out[flat_index(n, &idx)] = sign * v;
        }
    }
    out
}

/// Increasing-tuple coefficients of a dense antisymmetric array.
pub fn increasing_coeffs(n: usize, k: usize, dense: &[f64]) -> Vec<f64> {
    increasing_tuples(n, k).iter().map(|t| dense[flat_index(n, t)]).collect()
}

/// Sign of the permutation sorting the concatenation `a ++ b` (zero if they
/// share an index).
pub fn shuffle_sign(a: &[usize], b: &[usize]) -> f64 {
    let mut v: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
    let mut sign = 1.0;
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] == v[j + 1] {
                return 0.0;
            }
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    sign
}

fn check_two_form(n: usize, b: &[f64]) -> Result<()> {
    if b.len() != n * n {
        return Err(Error::Shape(format!("2-form needs {} coefficients, got {}", n * n, b.len())));
    }
    let scale = b.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let defect = antisymmetry_defect(n, 2, b);
    if defect > 1e-10 * scale.max(1.0) {
        return Err(Error::Contract(format!("2-form not antisymmetric (defect {defect:e})")));
    }
    Ok(())
}

/// Real normal form of an antisymmetric matrix: `Q^T B Q` is block diagonal
/// with blocks `[[0, -s_j], [s_j, 0]]` (and a trailing zero for odd `n`).
#[derive(Clone, Debug)]
pub struct CanonicalFormResult {
    pub q: DMatrix<f64>,
    /// Sorted descending.
    pub s: Vec<f64>,
}

impl CanonicalFormResult {
    /// The block-diagonal normal form.
    pub fn normal_form(&self) -> DMatrix<f64> {
        let n = self.q.nrows();
        let mut b = DMatrix::zeros(n, n);
        for (j, &s) in self.s.iter().enumerate() {
            b[(2 * j + 1, 2 * j)] = s;
            b[(2 * j, 2 * j + 1)] = -s;
        }
        b
    }
}

fn lex_cmp(a: &[C64], b: &[C64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let o = x.re.partial_cmp(&y.re).unwrap_or(std::cmp::Ordering::Equal);
        if o != std::cmp::Ordering::Equal {
            return o;
        }
        let o = x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal);
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

/// Canonical form via the Hermitian eigenproblem of `iB`: each eigenvector
/// `x + iy` for an eigenvalue `s > 0` gives the orthonormal pair
/// `(sqrt2 x, sqrt2 y)` with `Bx = s y`, `By = -s x`. The kernel gets a real
/// orthonormal basis from an SVD.
pub fn antisym_canonical_form(b: &DMatrix<f64>) -> Result<CanonicalFormResult> {
    let n = b.nrows();
    if b.ncols() != n {
        return Err(Error::Shape("matrix must be square".into()));
    }
    let asym = (b + b.transpose()).abs().max();
    if asym > 1e-10 {
        return Err(Error::Contract(format!("matrix not antisymmetric (|B + B^T| = {asym:e})")));
    }
    let m = n / 2;
    let scale = b.abs().max();
    let tol = 1e-12 * scale.max(1e-300) * n as f64;
    let ib = b.map(|x| C64::new(0.0, x));
    let eig = ib.symmetric_eigen();
    let mut pos: Vec<(f64, Vec<C64>)> = (0..n)
        .filter(|&k| eig.eigenvalues[k] > tol)
        .map(|k| {
            let v: Vec<C64> = eig.eigenvectors.column(k).iter().copied().collect();
            let s = crate::clifford::fix_phase(Spinor::from_slice(&v));
            (eig.eigenvalues[k], s.0.to_vec())
        })
        .collect();
    pos.sort_by(|a, c| c.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then_with(|| lex_cmp(&a.1, &c.1)));
    pos.truncate(m);
    let mut q = DMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(m);
    let r2 = std::f64::consts::SQRT_2;
    for (j, (val, v)) in pos.iter().enumerate() {
        for i in 0..n {
            q[(i, 2 * j)] = r2 * v[i].re;
            q[(i, 2 * j + 1)] = r2 * v[i].im;
        }
        s.push(*val);
    }
    let used = 2 * pos.len();
    if used < n {
        let svd = b.clone().svd(false, true);
        let vt = svd.v_t.expect("right singular vectors requested");
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| svd.singular_values[x].partial_cmp(&svd.singular_values[y]).unwrap_or(std::cmp::Ordering::Equal));
        for (c, &k) in order.iter().take(n - used).enumerate() {
            let mut col: Vec<f64> = (0..n).map(|i| vt[(k, i)]).collect();
            if let Some(lead) = col.iter().copied().find(|x| x.abs() > 1e-8) {
                if lead < 0.0 {
                    col.iter_mut().for_each(|x| *x = -*x);
                }
            }
            for i in 0..n {
                q[(i, used + c)] = col[i];
            }
        }
    }
    while s.len() < m {
        s.push(0.0);
    }
    Ok(CanonicalFormResult { q, s })
}

/// `(|alpha . psi|^2, m |alpha|^2 |psi|^2)` for a 2-form given as a dense
/// antisymmetric `n x n` array.
pub fn sharp_bound_check(rep: &SpinRep, alpha: &[f64], psi: &Spinor) -> Result<(f64, f64)> {
    check_two_form(rep.n, alpha)?;
    if psi.dim() != rep.dim {
        return Err(Error::Shape("spinor dimension".into()));
    }
    let a = antisymmetrize(rep.n, 2, alpha);
    let lhs = rep.two_form_apply(&a, psi).norm_sqr();
    let norm2: f64 = increasing_coeffs(rep.n, 2, &a).iter().map(|x| x * x).sum();
    Ok((lhs, rep.m as f64 * norm2 * psi.norm_sqr()))
}

/// Matrix of `X -> X ⌟ alpha`: `(Psi X)_j = sum_i X_i alpha_ij`, i.e. `alpha^T`.
pub fn psi_of_alpha(n: usize, alpha: &[f64]) -> Result<DMatrix<f64>> {
    check_two_form(n, alpha)?;
    Ok(DMatrix::from_fn(n, n, |j, i| alpha[i * n + j]))
}

/// `X ⌟ alpha` for a dense 2-form.
pub fn contract(n: usize, x: &[f64], alpha: &[f64]) -> Vec<f64> {
    (0..n).map(|j| (0..n).map(|i| x[i] * alpha[i * n + j]).sum()).collect()
}

/// Dense wedge product of a `k1`-form and a `k2`-form.
pub fn wedge_dense(n: usize, k1: usize, a: &[f64], k2: usize, b: &[f64]) -> Result<Vec<f64>> {
    let k = k1 + k2;
    if k > n {
        return Err(Error::Shape(format!("degree {k} exceeds dimension {n}")));
    }
    let vals: Vec<f64> = increasing_tuples(n, k)
        .iter()
        .map(|t| {
            let mut acc = 0.0;
            for pick in increasing_tuples(k, k1) {
                let ai: Vec<usize> = pick.iter().map(|&p| t[p]).collect();
                let bi: Vec<usize> = (0..k).filter(|p| !pick.contains(p)).map(|p| t[p]).collect();
                let sg = shuffle_sign(&ai, &bi);
                acc += sg * a[flat_index(n, &ai)] * b[flat_index(n, &bi)];
            }
            acc
        })
        .collect();
    Ok(fill_antisymmetric(n, k, &vals))
}

/// Residuals of `X.alpha. = (X^b ∧ alpha - X⌟alpha).` and
/// `alpha.X. = (X^b ∧ alpha + X⌟alpha).` applied to `psi`.
pub fn commutation_check(rep: &SpinRep, alpha: &[f64], x: &[f64], psi: &Spinor) -> Result<(f64, f64)> {
    let n = rep.n;
    check_two_form(n, alpha)?;
    let a = antisymmetrize(n, 2, alpha);
    let xa = rep.vec_apply(x, &rep.two_form_apply(&a, psi));
    let ax = rep.two_form_apply(&a, &rep.vec_apply(x, psi));
    let wedge = if n >= 3 {
        crate::clifford::kform_action(rep, 3, &wedge_dense(n, 1, x, 2, &a)?, psi)?
    } else {
        Spinor::zeros(rep.dim)
    };
    let inner = rep.vec_apply(&contract(n, x, &a), psi);
    let r1 = (xa - (wedge.clone() - inner.clone())).norm();
    let r2 = (ax - (wedge + inner)).norm();
    Ok((r1, r2))
}

/// A `k`-form field stored as dense antisymmetric coordinate components
/// (`omega = (1/k!) sum omega_{i_1..i_k} dx^{i_1} ∧ ... ∧ dx^{i_k}`). Frame
/// components are `e^{-k w}` times these.
#[derive(Clone)]
pub struct KFormField {
    pub k: usize,
    pub n: usize,
    pub coeffs: Field<Vec<f64>>,
}

impl KFormField {
    pub fn new(n: usize, k: usize, coeffs: Field<Vec<f64>>) -> Result<Self> {
        if k > n {
            return Err(Error::Shape(format!("degree {k} exceeds dimension {n}")));
        }
        Ok(KFormField { k, n, coeffs })
    }

    /// From frame components (dense antisymmetric) on a chart.
    pub fn from_frame(chart: &Chart, k: usize, frame: Field<Vec<f64>>) -> Result<Self> {
        let c = chart.clone();
        let coeffs = Field::from_fn(chart.len(), move |i| {
            let s = (k as f64 * c.log_weight(i)).exp();
            frame.at(i).iter().map(|x| x * s).collect()
        });
        Self::new(chart.n, k, coeffs)
    }

    /// Dense frame components at a node.
    pub fn frame_at(&self, chart: &Chart, node: usize) -> Vec<f64> {
        let s = (-(self.k as f64) * chart.log_weight(node)).exp();
        self.coeffs.at(node).iter().map(|x| x * s).collect()
    }

    /// Pointwise metric norm squared (unit norm for `e^1 ∧ e^2`).
    pub fn norm_sqr_at(&self, chart: &Chart, node: usize) -> f64 {
        increasing_coeffs(self.n, self.k, &self.frame_at(chart, node)).iter().map(|x| x * x).sum()
    }
}

fn check_chart(chart: &Chart, w: &KFormField) -> Result<()> {
    if w.n != chart.n || w.coeffs.len() != chart.len() {
        return Err(Error::Shape("form does not match chart".into()));
    }
    Ok(())
}

/// `d omega`, metric independent.
pub fn exterior_derivative(chart: &Chart, w: &KFormField) -> Result<KFormField> {
    check_chart(chart, w)?;
    let (n, k) = (w.n, w.k);
    if k + 1 > n {
        return Err(Error::Shape(format!("d of a {k}-form in dimension {n}")));
    }
    let (c, f) = (chart.clone(), w.coeffs.clone());
    let tuples = increasing_tuples(n, k + 1);
    let coeffs = Field::from_fn(chart.len(), move |node| {
        let grads: Vec<Vec<f64>> = (0..n).map(|a| c.d1(node, a, |j| f.at(j))).collect();
        let vals: Vec<f64> = tuples
            .iter()
            .map(|t| {
                let mut acc = 0.0;
                for (pos, &a) in t.iter().enumerate() {
                    let rest: Vec<usize> = t.iter().enumerate().filter(|(p, _)| *p != pos).map(|(_, &v)| v).collect();
                    let sg = if pos % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sg * grads[a][flat_index(n, &rest)];
                }
                acc
            })
            .collect();
        fill_antisymmetric(n, k + 1, &vals)
    });
    KFormField::new(n, k + 1, coeffs)
}

/// Hodge star of the chart metric: `*e^I = sign(I, J) e^J` in an oriented
/// orthonormal frame, so coordinate components pick up `e^{(n - 2k) w}`.
pub fn hodge_star(chart: &Chart, w: &KFormField) -> Result<KFormField> {
    check_chart(chart, w)?;
    let (n, k) = (w.n, w.k);
    let (c, f) = (chart.clone(), w.coeffs.clone());
    let targets = increasing_tuples(n, n - k);
    let plan: Vec<(usize, f64)> = targets
        .iter()
        .map(|jt| {
            let it: Vec<usize> = (0..n).filter(|i| !jt.contains(i)).collect();
            (flat_index(n, &it), shuffle_sign(&it, jt))
        })
        .collect();
    let coeffs = Field::from_fn(chart.len(), move |node| {
        let src = f.at(node);
        let s = ((n as f64 - 2.0 * k as f64) * c.log_weight(node)).exp();
        let vals: Vec<f64> = plan.iter().map(|&(fi, sg)| s * sg * src[fi]).collect();
        fill_antisymmetric(n, n - k, &vals)
    });
    KFormField::new(n, n - k, coeffs)
}

/// `d* = (-1)^{n(k+1)+1} * d *` on `k`-forms (the formal `L^2` adjoint of `d`).
pub fn codifferential(chart: &Chart, w: &KFormField) -> Result<KFormField> {
    check_chart(chart, w)?;
    let (n, k) = (w.n, w.k);
    if k == 0 {
        return Err(Error::Shape("codifferential of a 0-form".into()));
    }
    let out = hodge_star(chart, &exterior_derivative(chart, &hodge_star(chart, w)?)?)?;
    let sign = if (n * (k + 1) + 1) % 2 == 0 { 1.0 } else { -1.0 };
    let f = out.coeffs.clone();
    KFormField::new(n, k - 1, f.map(move |v| v.iter().map(|x| sign * x).collect()))
}

/// `omega_1 ∧ omega_2`, pointwise.
pub fn wedge(a: &KFormField, b: &KFormField) -> Result<KFormField> {
    if a.n != b.n || a.coeffs.len() != b.coeffs.len() {
        return Err(Error::Shape("wedge of forms on different charts".into()));
    }
    let (n, k1, k2) = (a.n, a.k, b.k);
    if k1 + k2 > n {
        return Err(Error::Shape(format!("degree {} exceeds dimension {n}", k1 + k2)));
    }
    let (fa, fb) = (a.coeffs.clone(), b.coeffs.clone());
    let coeffs = Field::from_fn(fa.len(), move |i| wedge_dense(n, k1, &fa.at(i), k2, &fb.at(i)).expect("degrees checked"));
    KFormField::new(n, k1 + k2, coeffs)
}

/// `L^2` inner product `int <a, b>_g dV_g`.
pub fn l2_inner(chart: &Chart, a: &KFormField, b: &KFormField) -> Result<f64> {
    check_chart(chart, a)?;
    check_chart(chart, b)?;
    if a.k != b.k {
        return Err(Error::Shape("inner product of forms of different degree".into()));
    }
    let (n, k) = (a.n, a.k);
    Ok(chart
        .integrate_fn(&|i| {
            let s = (-2.0 * k as f64 * chart.log_weight(i)).exp();
            let (x, y) = (increasing_coeffs(n, k, &a.coeffs.at(i)), increasing_coeffs(n, k, &b.coeffs.at(i)));
            s * x.iter().zip(y.iter()).map(|(p, q)| p * q).sum::<f64>()
        })
        .value)
}
