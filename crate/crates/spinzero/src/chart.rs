//! Conformally flat model charts sampled on uniform grids.
//!
//! The metric is `g = u^{4/(n-2)} dx^2` for `n >= 3` (the stored factor is
//! `u`) and `g = e^{2f} dx^2` for `n = 2` (the stored factor is `f`).
//! Internally both are read as `g = e^{2w} dx^2` with log-weight `w`.
//!
//! Derivatives are finite differences: 4th-order central stencils in the
//! interior, periodic wrap on the torus and 4th-order one-sided stencils at
//! the faces of box and sphere charts. Quadrature uses the alternative
//! extended Simpson rule per axis on boxes and the rectangle rule on the
//! torus, with pairwise (fixed-split) summation.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::field::{Lin, RVec, ScalarField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChartKind {
    FlatBox,
    PeriodicTorus,
    SphereStereographic,
}

impl ChartKind {
    pub fn name(&self) -> &'static str {
        match self {
            ChartKind::FlatBox => "flat-box",
            ChartKind::PeriodicTorus => "periodic-torus",
            ChartKind::SphereStereographic => "sphere-stereographic",
        }
    }

    pub fn code(&self) -> u32 {
        match self {
            ChartKind::FlatBox => 0,
            ChartKind::PeriodicTorus => 1,
            ChartKind::SphereStereographic => 2,
        }
    }

    pub fn from_code(c: u32) -> Option<Self> {
        match c {
            0 => Some(ChartKind::FlatBox),
            1 => Some(ChartKind::PeriodicTorus),
            2 => Some(ChartKind::SphereStereographic),
            _ => None,
        }
    }
}

/// Finite-difference accuracy. `Second` exists for convergence controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdOrder {
    Second,
    Fourth,
}

/// Kind-specific chart parameters.
#[derive(Clone, Debug, Default)]
pub struct ChartParams {
    /// Torus side lengths (one per axis, or one shared value).
    pub periods: Option<Vec<f64>>,
    /// Half-width of box and sphere charts, which cover `[-r_max, r_max]^n`.
    pub r_max: Option<f64>,
}

/// A finite-difference stencil: node offsets along one axis and weights.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub nodes: [usize; 6],
    pub weights: [f64; 6],
    pub len: usize,
}

#[derive(Clone)]
pub struct Chart {
    pub kind: ChartKind,
    pub n: usize,
    pub res: usize,
    pub h: Vec<f64>,
    pub lo: Vec<f64>,
    pub r_max: Option<f64>,
    pub order: FdOrder,
    conf: ScalarField,
    quad: Arc<Vec<Vec<f64>>>,
    len: usize,
}

/// Quadrature value with the recorded truncation bound (zero on the torus).
#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub value: f64,
    pub tail_bound: f64,
}

/// Volume of the unit round sphere `S^n`.
pub fn unit_sphere_volume(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 1.0) * unit_sphere_volume(n - 2),
    }
}

fn simpson_weights(res: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; res];
    let ends = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];
    for (k, e) in ends.iter().enumerate() {
        w[k] = e * h;
        w[res - 1 - k] = e * h;
    }
    w
}

pub fn make_chart(kind: ChartKind, n: usize, res: usize, params: &ChartParams) -> Result<Chart> {
    if n < 2 {
        return Err(Error::Config(format!("dimension {n} < 2")));
    }
    if res < 8 {
        return Err(Error::Config(format!("resolution {res} < 8")));
    }
    let len = res
        .checked_pow(n as u32)
        .filter(|&l| l <= 1usize << 36)
        .ok_or_else(|| Error::Config(format!("grid {res}^{n} too large")))?;
    let (h, lo, r_max) = match kind {
        ChartKind::PeriodicTorus => {
            let p = params.periods.clone().unwrap_or_else(|| vec![2.0 * std::f64::consts::PI]);
            let p = match p.len() {
                1 => vec![p[0]; n],
                l if l == n => p,
                l => return Err(Error::Config(format!("{l} periods for dimension {n}"))),
            };
            if p.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::Config("periods must be positive".into()));
            }
            (p.iter().map(|x| x / res as f64).collect(), vec![0.0; n], None)
        }
        ChartKind::FlatBox | ChartKind::SphereStereographic => {
            let r = params.r_max.unwrap_or(4.0);
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::Config(format!("r_max = {r} must be positive")));
            }
            if kind == ChartKind::SphereStereographic && r <= 1.0 {
                return Err(Error::Config(format!("sphere chart needs r_max > 1, got {r}")));
            }
            (vec![2.0 * r / (res as f64 - 1.0); n], vec![-r; n], Some(r))
        }
    };
    let quad: Vec<Vec<f64>> = (0..n)
        .map(|a| match kind {
            ChartKind::PeriodicTorus => vec![h[a]; res],
            _ => simpson_weights(res, h[a]),
        })
        .collect();
    let mut chart = Chart {
        kind,
        n,
        res,
        h,
        lo,
        r_max,
        order: FdOrder::Fourth,
        conf: ScalarField::constant(len, if n == 2 { 0.0 } else { 1.0 }),
        quad: Arc::new(quad),
        len,
    };
    if kind == ChartKind::SphereStereographic {
        let c = chart.clone();
        let nf = n as f64;
        chart.conf = ScalarField::from_fn(len, move |i| {
            let x = c.coords(i);
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let base = 2.0 / (1.0 + r2);
            if n == 2 {
                base.ln()
            } else {
                base.powf((nf - 2.0) / 2.0)
            }
        });
    }
    Ok(chart)
}

impl Chart {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_periodic(&self) -> bool {
        self.kind == ChartKind::PeriodicTorus
    }

    /// Same grid, different finite-difference order.
    pub fn with_order(&self, order: FdOrder) -> Chart {
        let mut c = self.clone();
        c.order = order;
        c
    }

    /// Same grid with a new stored conformal factor (`u`, or `f` when n = 2).
    pub fn with_conf(&self, conf: ScalarField) -> Result<Chart> {
        if conf.len() != self.len {
            return Err(Error::Shape(format!("conformal factor has {} nodes, chart {}", conf.len(), self.len)));
        }
        if self.n >= 3 {
            let bad = (0..self.len).find(|&i| !(conf.at(i) > 0.0 && conf.at(i).is_finite()));
            if let Some(i) = bad {
                return Err(Error::Parameter(format!("conformal factor {} at node {i} is not positive", conf.at(i))));
            }
        }
        let mut c = self.clone();
        c.conf = conf;
        Ok(c)
    }

    /// Stored conformal factor: `u` for n >= 3, `f` for n = 2.
    pub fn conf(&self) -> &ScalarField {
        &self.conf
    }

    #[inline]
    pub fn conf_at(&self, node: usize) -> f64 {
        self.conf.at(node)
    }

    /// Log-weight `w` with `g = e^{2w} dx^2`.
    #[inline]
    pub fn log_weight(&self, node: usize) -> f64 {
        let c = self.conf.at(node);
        if self.n == 2 {
            c
        } else {
            2.0 / (self.n as f64 - 2.0) * c.ln()
        }
    }

    /// `dV_g / dx`.
    #[inline]
    pub fn volume_density(&self, node: usize) -> f64 {
        (self.n as f64 * self.log_weight(node)).exp()
    }

    #[inline]
    pub fn axis_index(&self, node: usize, axis: usize) -> usize {
        (node / self.res.pow(axis as u32)) % self.res
    }

    pub fn multi_index(&self, node: usize) -> SmallVec<[usize; 8]> {
        let mut rest = node;
        (0..self.n)
            .map(|_| {
                let i = rest % self.res;
                rest /= self.res;
                i
            })
            .collect()
    }

    pub fn node_of(&self, multi: &[usize]) -> usize {
        multi.iter().rev().fold(0, |acc, &i| acc * self.res + i)
    }

    pub fn coords(&self, node: usize) -> RVec {
        let mut rest = node;
        (0..self.n)
            .map(|a| {
                let i = rest % self.res;
                rest /= self.res;
                self.lo[a] + i as f64 * self.h[a]
            })
            .collect()
    }

    /// Nodes at least `margin` steps away from every non-periodic face.
    pub fn is_interior(&self, node: usize, margin: usize) -> bool {
        self.is_periodic()
            || self.multi_index(node).iter().all(|&i| i >= margin && i + margin < self.res)
    }

    /// Nodes on a face of a non-periodic chart.
    pub fn is_boundary(&self, node: usize) -> bool {
        !self.is_periodic() && self.multi_index(node).iter().any(|&i| i == 0 || i + 1 == self.res)
    }

    fn stencil_from(&self, node: usize, axis: usize, offs: &[isize], w: &[f64], scale: f64) -> Stencil {
        let stride = self.res.pow(axis as u32) as isize;
        let i = self.axis_index(node, axis) as isize;
        let r = self.res as isize;
        let mut st = Stencil { nodes: [0; 6], weights: [0.0; 6], len: offs.len() };
        for (k, (&o, &wk)) in offs.iter().zip(w.iter()).enumerate() {
            let j = if self.is_periodic() { (i + o).rem_euclid(r) } else { i + o };
            st.nodes[k] = (node as isize + (j - i) * stride) as usize;
            st.weights[k] = wk * scale;
        }
        st
    }

    /// First-derivative stencil along `axis` at `node`.
    pub fn d1_stencil(&self, node: usize, axis: usize) -> Stencil {
        let i = self.axis_index(node, axis);
        let last = self.res - 1;
        let s = 1.0 / self.h[axis];
        let periodic = self.is_periodic();
        match self.order {
            FdOrder::Fourth => {
                let s = s / 12.0;
                if periodic || (i >= 2 && i + 2 <= last) {
                    self.stencil_from(node, axis, &[-2, -1, 1, 2], &[1.0, -8.0, 8.0, -1.0], s)
                } else if i == 0 {
                    self.stencil_from(node, axis, &[0, 1, 2, 3, 4], &[-25.0, 48.0, -36.0, 16.0, -3.0], s)
                } else if i == 1 {
                    self.stencil_from(node, axis, &[-1, 0, 1, 2, 3], &[-3.0, -10.0, 18.0, -6.0, 1.0], s)
                } else if i == last - 1 {
                    self.stencil_from(node, axis, &[-3, -2, -1, 0, 1], &[-1.0, 6.0, -18.0, 10.0, 3.0], s)
                } else {
                    self.stencil_from(node, axis, &[-4, -3, -2, -1, 0], &[3.0, -16.0, 36.0, -48.0, 25.0], s)
                }
            }
            FdOrder::Second => {
                let s = s / 2.0;
                if periodic || (i >= 1 && i < last) {
                    self.stencil_from(node, axis, &[-1, 1], &[-1.0, 1.0], s)
                } else if i == 0 {
                    self.stencil_from(node, axis, &[0, 1, 2], &[-3.0, 4.0, -1.0], s)
                } else {
                    self.stencil_from(node, axis, &[-2, -1, 0], &[1.0, -4.0, 3.0], s)
                }
            }
        }
    }

    /// Second-derivative stencil along `axis` at `node`.
    pub fn d2_stencil(&self, node: usize, axis: usize) -> Stencil {
        let i = self.axis_index(node, axis);
        let last = self.res - 1;
        let s = 1.0 / (self.h[axis] * self.h[axis]);
        let periodic = self.is_periodic();
        match self.order {
            FdOrder::Fourth => {
                let s = s / 12.0;
                if periodic || (i >= 2 && i + 2 <= last) {
                    self.stencil_from(node, axis, &[-2, -1, 0, 1, 2], &[-1.0, 16.0, -30.0, 16.0, -1.0], s)
                } else if i == 0 {
                    self.stencil_from(node, axis, &[0, 1, 2, 3, 4, 5], &[45.0, -154.0, 214.0, -156.0, 61.0, -10.0], s)
                } else if i == 1 {
                    self.stencil_from(node, axis, &[-1, 0, 1, 2, 3, 4], &[10.0, -15.0, -4.0, 14.0, -6.0, 1.0], s)
                } else if i == last - 1 {
                    self.stencil_from(node, axis, &[-4, -3, -2, -1, 0, 1], &[1.0, -6.0, 14.0, -4.0, -15.0, 10.0], s)
                } else {
                    self.stencil_from(node, axis, &[-5, -4, -3, -2, -1, 0], &[-10.0, 61.0, -156.0, 214.0, -154.0, 45.0], s)
                }
            }
            FdOrder::Second => {
                if periodic || (i >= 1 && i < last) {
                    self.stencil_from(node, axis, &[-1, 0, 1], &[1.0, -2.0, 1.0], s)
                } else if i == 0 {
                    self.stencil_from(node, axis, &[0, 1, 2, 3], &[2.0, -5.0, 4.0, -1.0], s)
                } else {
                    self.stencil_from(node, axis, &[-3, -2, -1, 0], &[-1.0, 4.0, -5.0, 2.0], s)
                }
            }
        }
    }

    /// Apply a stencil to any node-indexed evaluator.
    #[inline]
    pub fn apply<T: Lin>(&self, st: &Stencil, eval: impl Fn(usize) -> T) -> T {
        let mut acc = eval(st.nodes[0]).scaled(st.weights[0]);
        for k in 1..st.len {
            acc.add_scaled(st.weights[k], &eval(st.nodes[k]));
        }
        acc
    }

    /// `d/dx_axis` of an evaluator at `node`.
    #[inline]
    pub fn d1<T: Lin>(&self, node: usize, axis: usize, eval: impl Fn(usize) -> T) -> T {
        self.apply(&self.d1_stencil(node, axis), eval)
    }

    /// `d^2/dx_axis^2` of an evaluator at `node`.
    #[inline]
    pub fn d2<T: Lin>(&self, node: usize, axis: usize, eval: impl Fn(usize) -> T) -> T {
        self.apply(&self.d2_stencil(node, axis), eval)
    }

    /// Flat Laplacian of a scalar evaluator.
    pub fn flat_laplacian(&self, node: usize, eval: impl Fn(usize) -> f64) -> f64 {
        (0..self.n).map(|a| self.d2(node, a, &eval)).sum()
    }

    /// Coordinate gradient of the log-weight.
    pub fn grad_log_weight(&self, node: usize) -> RVec {
        (0..self.n).map(|a| self.d1(node, a, |j| self.log_weight(j))).collect()
    }

    /// Product quadrature weight of a node (flat measure `dx`).
    #[inline]
    pub fn quad_weight(&self, node: usize) -> f64 {
        let mut rest = node;
        let mut w = 1.0;
        for a in 0..self.n {
            w *= self.quad[a][rest % self.res];
            rest /= self.res;
        }
        w
    }

    /// Deterministic pairwise sum of `f` over all nodes.
    pub fn node_sum(&self, f: &(dyn Fn(usize) -> f64 + Sync)) -> f64 {
        pairwise(0, self.len, f)
    }

    /// `int s dx` (flat measure).
    pub fn integrate_flat(&self, s: &(dyn Fn(usize) -> f64 + Sync)) -> f64 {
        self.node_sum(&|i| self.quad_weight(i) * s(i))
    }

    /// `int s dV_g`.
    pub fn integrate_fn(&self, s: &(dyn Fn(usize) -> f64 + Sync)) -> Quadrature {
        let value = self.node_sum(&|i| self.quad_weight(i) * self.volume_density(i) * s(i));
        let tail_bound = match self.kind {
            ChartKind::SphereStereographic => {
                let smax = self.boundary_max(&|i| s(i).abs());
                smax * self.sphere_tail_volume()
            }
            _ => 0.0,
        };
        Quadrature { value, tail_bound }
    }

    pub fn integrate(&self, s: &ScalarField) -> Quadrature {
        self.integrate_fn(&|i| s.at(i))
    }

    /// Volume of the chart region (plus tail bound on sphere charts).
    pub fn volume(&self) -> Quadrature {
        self.integrate_fn(&|_| 1.0)
    }

    /// Upper bound for the round-sphere volume outside the box, which lies
    /// outside the ball of radius `r_max`.
    pub fn sphere_tail_volume(&self) -> f64 {
        let r = self.r_max.unwrap_or(f64::INFINITY);
        let n = self.n as f64;
        unit_sphere_volume(self.n - 1) * 2f64.powf(n) * r.powf(-n) / n
    }

    fn boundary_max(&self, s: &(dyn Fn(usize) -> f64 + Sync)) -> f64 {
        let mut best = 0.0f64;
        for a in 0..self.n {
            let stride = self.res.pow(a as u32);
            for face in [0, self.res - 1] {
                let count = self.len / self.res;
                for k in 0..count {
                    let low = k % stride;
                    let high = k / stride;
                    let node = low + face * stride + high * stride * self.res;
                    best = best.max(s(node));
                }
            }
        }
        best
    }

    /// Deterministic random subset of nodes at least `margin` steps from any
    /// non-periodic face, lying on the coarse lattice of spacing `step` nodes
    /// (so that refined charts with `res - 1` a multiple share sample points).
    pub fn sample_nodes(&self, count: usize, margin: usize, step: usize, seed: u64) -> Vec<usize> {
        let step = step.max(1);
        let axis_vals: Vec<usize> = (0..self.res)
            .filter(|&i| i % step == 0 && (self.is_periodic() || (i >= margin && i + margin < self.res)))
            .collect();
        let total = axis_vals.len().pow(self.n as u32);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pick = |k: usize| {
            let mut rest = k;
            let multi: Vec<usize> = (0..self.n)
                .map(|_| {
                    let v = axis_vals[rest % axis_vals.len()];
                    rest /= axis_vals.len();
                    v
                })
                .collect();
            self.node_of(&multi)
        };
        if total <= count {
            return (0..total).map(pick).collect();
        }
        let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, total, count).into_iter().collect();
        chosen.sort_unstable();
        chosen.into_iter().map(pick).collect()
    }
}

/// Deterministic pairwise sum of `f` over `lo..hi` (fixed split, parallel
/// above 65536 terms).
pub fn pairwise(lo: usize, hi: usize, f: &(dyn Fn(usize) -> f64 + Sync)) -> f64 {
    const BLOCK: usize = 512;
    if hi - lo <= BLOCK {
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        return s;
    }
    let mid = lo + (hi - lo) / 2;
    if hi - lo > 1 << 16 {
        let (a, b) = rayon::join(|| pairwise(lo, mid, f), || pairwise(mid, hi, f));
        a + b
    } else {
        pairwise(lo, mid, f) + pairwise(mid, hi, f)
    }
}

/// `c_n = 4(n-1)/(n-2)`.
pub fn conformal_constant(n: usize) -> f64 {
    4.0 * (n as f64 - 1.0) / (n as f64 - 2.0)
}

/// Scalar curvature `R = u^{-(n+2)/(n-2)} (-c_n Lap u)` of `u^{4/(n-2)} dx^2`.
pub fn scalar_curvature(chart: &Chart) -> Result<ScalarField> {
    if chart.n < 3 {
        return Err(Error::InvalidDimension("scalar_curvature needs n >= 3; use gauss_curvature_2d".into()));
    }
    let c = chart.clone();
    let n = chart.n as f64;
    let cn = conformal_constant(chart.n);
    Ok(ScalarField::from_fn(chart.len(), move |i| {
        let lap = c.flat_laplacian(i, |j| c.conf_at(j));
        c.conf_at(i).powf(-(n + 2.0) / (n - 2.0)) * (-cn * lap)
    }))
}

/// Gauss curvature `K = e^{-2f} (-Lap f)` of `e^{2f} dx^2`.
pub fn gauss_curvature_2d(chart: &Chart) -> Result<ScalarField> {
    if chart.n != 2 {
        return Err(Error::InvalidDimension(format!("gauss_curvature_2d needs n = 2, got {}", chart.n)));
    }
    let c = chart.clone();
    Ok(ScalarField::from_fn(chart.len(), move |i| {
        let lap = c.flat_laplacian(i, |j| c.conf_at(j));
        (-2.0 * c.conf_at(i)).exp() * (-lap)
    }))
}

/// `L^a_g v = -a c_n Lap_g v + R v`, discretized in the conformally covariant
/// form `a u^{-(n+2)/(n-2)} (-c_n Lap_flat (u v)) + (1 - a) R v`.
///
/// With this form the discrete operator inherits the exact transformation
/// rule `L_{h^{4/(n-2)} g} v = h^{-(n+2)/(n-2)} L_g (h v)` on the grid.
pub fn conformal_laplacian_apply(chart: &Chart, a: f64, v: &ScalarField) -> Result<ScalarField> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::Parameter(format!("a = {a} must lie in (0, 1]")));
    }
    if chart.n < 3 {
        return Err(Error::InvalidDimension("conformal Laplacian needs n >= 3".into()));
    }
    if v.len() != chart.len() {
        return Err(Error::Shape("field does not match chart".into()));
    }
    let r = scalar_curvature(chart)?;
    let c = chart.clone();
    let v = v.clone();
    let n = chart.n as f64;
    let cn = conformal_constant(chart.n);
    Ok(ScalarField::from_fn(chart.len(), move |i| {
        let lap = c.flat_laplacian(i, |j| c.conf_at(j) * v.at(j));
        a * c.conf_at(i).powf(-(n + 2.0) / (n - 2.0)) * (-cn * lap) + (1.0 - a) * r.at(i) * v.at(i)
    }))
}

/// `(int |A|_g^p dV_g)^{1/p}` for a pointwise metric norm `norm_at`.
pub fn lp_norm_fn(chart: &Chart, norm_at: &(dyn Fn(usize) -> f64 + Sync), p: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::Parameter(format!("p = {p} < 1")));
    }
    Ok(chart.integrate_fn(&|i| norm_at(i).powf(p)).value.powf(1.0 / p))
}

/// Lp norm of a field given by orthonormal-frame components; for forms the
/// components are the increasing-index coefficients.
pub fn lp_norm(chart: &Chart, field: &crate::field::VectorField, p: f64) -> Result<f64> {
    lp_norm_fn(chart, &|i| field.at(i).iter().map(|x| x * x).sum::<f64>().sqrt(), p)
}

/// Smooth random periodic function `1 + amp * sum_k c_k trig(k . x)` on a torus
/// chart, built from integer wave vectors with entries in `-max_mode..=max_mode`.
pub fn smooth_periodic(chart: &Chart, seed: u64, amp: f64, max_mode: i32, terms: usize) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = chart.n;
    let modes: Vec<(Vec<f64>, f64, f64)> = (0..terms)
        .map(|_| {
            let k: Vec<f64> = (0..n)
                .map(|a| {
                    let m = rng.gen_range(-max_mode..=max_mode) as f64;
                    let period = chart.h[a] * chart.res as f64;
                    m * 2.0 * std::f64::consts::PI / period
                })
                .collect();
            (k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let c = chart.clone();
    let norm = terms.max(1) as f64;
    ScalarField::from_fn(chart.len(), move |i| {
        let x = c.coords(i);
        let s: f64 = modes
            .iter()
            .map(|(k, a, ph)| a * (k.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() + ph).cos())
            .sum();
        1.0 + amp * s / norm
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sphere(n: usize, res: usize, r: f64) -> Chart {
        make_chart(ChartKind::SphereStereographic, n, res, &ChartParams { r_max: Some(r), ..Default::default() }).unwrap()
    }

    #[test]
    fn config_errors() {
        let p = ChartParams::default();
        assert!(matches!(make_chart(ChartKind::FlatBox, 3, 7, &p), Err(Error::Config(_))));
        let bad = ChartParams { r_max: Some(0.5), ..Default::default() };
        assert!(matches!(make_chart(ChartKind::SphereStereographic, 3, 16, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn stencils_exact_on_polynomials() {
        // 4th-order stencils differentiate quartics exactly, everywhere.
        let c = make_chart(ChartKind::FlatBox, 2, 9, &ChartParams { r_max: Some(1.3), ..Default::default() }).unwrap();
        let p = |x: f64| 0.3 - 1.1 * x + 0.7 * x * x + 0.2 * x.powi(3) - 0.4 * x.powi(4);
        let dp = |x: f64| -1.1 + 1.4 * x + 0.6 * x * x - 1.6 * x.powi(3);
        let ddp = |x: f64| 1.4 + 1.2 * x - 4.8 * x * x;
        for node in 0..c.len() {
            let x = c.coords(node)[1];
            let d = c.d1(node, 1, |j| p(c.coords(j)[1]));
            let dd = c.d2(node, 1, |j| p(c.coords(j)[1]));
            assert!((d - dp(x)).abs() < 1e-11, "node {node}");
            assert!((dd - ddp(x)).abs() < 1e-10, "node {node}: {dd} vs {}", ddp(x));
        }
        let c2 = c.with_order(FdOrder::Second);
        let q = |x: f64| 1.0 + x - 2.0 * x * x;
        for node in 0..c2.len() {
            let x = c2.coords(node)[0];
            assert!((c2.d1(node, 0, |j| q(c2.coords(j)[0])) - (1.0 - 4.0 * x)).abs() < 1e-11);
            assert!((c2.d2(node, 0, |j| q(c2.coords(j)[0])) + 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn flat_box_conf_is_one_and_flat_curvature_vanishes() {
        let c = make_chart(ChartKind::FlatBox, 3, 32, &ChartParams::default()).unwrap();
        assert!((0..c.len()).all(|i| c.conf_at(i) == 1.0));
        let r = scalar_curvature(&c).unwrap();
        assert!((0..c.len()).step_by(97).all(|i| r.at(i).abs() < 1e-12));
    }

    #[test]
    fn sphere_conf_at_origin() {
        let c = sphere(3, 65, 8.0);
        let mid = c.node_of(&[32, 32, 32]);
        assert!(c.coords(mid).iter().all(|x| x.abs() < 1e-12));
        assert!((c.conf_at(mid) - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn torus_volume() {
        let c = make_chart(ChartKind::PeriodicTorus, 4, 16, &ChartParams::default()).unwrap();
        let v = c.volume();
        assert!((v.value - (2.0 * PI).powi(4)).abs() < 1e-9 * v.value);
        assert_eq!(v.tail_bound, 0.0);
    }

    #[test]
    fn sphere_curvature_converges_at_fourth_order() {
        // interior nodes within |x| <= 1 avoid the coarse far field
        for n in [3usize, 5] {
            let mut errs = Vec::new();
            let resolutions: &[usize] = if n == 3 { &[33, 65] } else { &[17, 33] };
            for &res in resolutions {
                let c = sphere(n, res, 2.0);
                let r = scalar_curvature(&c).unwrap();
                let target = (n * (n - 1)) as f64;
                let mut e = 0.0f64;
                for i in c.sample_nodes(400, 2, (res - 1) / 8, 1) {
                    if c.coords(i).iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                        e = e.max((r.at(i) - target).abs());
                    }
                }
                errs.push(e);
            }
            let order = (errs[0] / errs[1]).log2();
            assert!(order > 3.5, "n = {n}: errors {errs:?}, order {order}");
        }
    }

    #[test]
    fn sphere_volume_under_refinement() {
        let target = 2.0 * PI * PI;
        let c = sphere(3, 129, 30.0);
        let v = c.volume();
        assert!(((v.value - target) / target).abs() < 1e-3, "{} vs {target}", v.value);
        assert!(v.tail_bound > 0.0 && v.tail_bound < 1e-3 * target);
        assert!((target - v.value) <= v.tail_bound * 1.01 + 1e-3);
    }

    #[test]
    fn gauss_curvature_of_unit_sphere_and_gauss_bonnet() {
        let c = sphere(2, 801, 40.0);
        let k = gauss_curvature_2d(&c).unwrap();
        let mid = c.node_of(&[400, 400]);
        assert!((k.at(mid) - 1.0).abs() < 1e-3, "{}", k.at(mid));
        let total = c.integrate(&k);
        assert!(((total.value - 4.0 * PI) / (4.0 * PI)).abs() < 1e-3, "{}", total.value);
        let torus = make_chart(ChartKind::PeriodicTorus, 2, 16, &ChartParams::default()).unwrap();
        let kt = gauss_curvature_2d(&torus).unwrap();
        assert!((0..torus.len()).all(|i| kt.at(i).abs() < 1e-12));
        assert!(gauss_curvature_2d(&sphere(3, 16, 2.0)).is_err());
    }

    #[test]
    fn conformal_laplacian_constant_on_sphere_is_curvature() {
        let c = sphere(3, 33, 2.0);
        let one = ScalarField::constant(c.len(), 1.0);
        for a in [0.2, 1.0] {
            let l = conformal_laplacian_apply(&c, a, &one).unwrap();
            let mid = c.node_of(&[16, 16, 16]);
            assert!((l.at(mid) - 6.0).abs() < 1e-2, "{}", l.at(mid));
        }
        assert!(matches!(conformal_laplacian_apply(&c, 0.0, &one), Err(Error::Parameter(_))));
        assert!(matches!(conformal_laplacian_apply(&c, 1.5, &one), Err(Error::Parameter(_))));
    }

    #[test]
    fn harmonic_polynomial_in_flat_box() {
        let c = make_chart(ChartKind::FlatBox, 3, 16, &ChartParams { r_max: Some(1.0), ..Default::default() }).unwrap();
        let cc = c.clone();
        let v = ScalarField::from_fn(c.len(), move |i| {
            let x = cc.coords(i);
            x[0] * x[0] - x[1] * x[1] + x[0] * x[2]
        });
        let l = conformal_laplacian_apply(&c, 1.0, &v).unwrap();
        for i in 0..c.len() {
            if c.is_interior(i, 2) {
                assert!(l.at(i).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn torus_operator_matches_explicit_matrix() {
        // Assemble the discrete operator as a sparse triplet list and compare.
        let t = make_chart(ChartKind::PeriodicTorus, 3, 8, &ChartParams::default()).unwrap();
        let u = smooth_periodic(&t, 3, 0.3, 1, 4).materialize();
        let c = t.with_conf(u).unwrap();
        let v = smooth_periodic(&t, 4, 1.0, 2, 5).materialize();
        let a = 0.4;
        let applied = conformal_laplacian_apply(&c, a, &v).unwrap();
        let r = scalar_curvature(&c).unwrap();
        let n = 3.0f64;
        let cn = conformal_constant(3);
        let mut trip: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..c.len() {
            let pre = a * c.conf_at(i).powf(-(n + 2.0) / (n - 2.0)) * (-cn);
            for ax in 0..3 {
                let st = c.d2_stencil(i, ax);
                for k in 0..st.len {
                    trip.push((i, st.nodes[k], pre * st.weights[k] * c.conf_at(st.nodes[k])));
                }
            }
            trip.push((i, i, (1.0 - a) * r.at(i)));
        }
        let mut out = vec![0.0; c.len()];
        for (i, j, w) in trip {
            out[i] += w * v.at(j);
        }
        for i in 0..c.len() {
            assert!((out[i] - applied.at(i)).abs() < 1e-10 * (1.0 + out[i].abs()));
        }
    }

    #[test]
    fn integrate_is_linear_and_positive() {
        let c = sphere(3, 24, 3.0);
        let f = ScalarField::from_fn(c.len(), |i| (i % 7) as f64);
        let g = ScalarField::from_fn(c.len(), |i| (i % 5) as f64 * 0.5);
        let fg = ScalarField::from_fn(c.len(), |i| 2.0 * (i % 7) as f64 - 3.0 * (i % 5) as f64 * 0.5);
        let lhs = c.integrate(&fg).value;
        let rhs = 2.0 * c.integrate(&f).value - 3.0 * c.integrate(&g).value;
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        assert!(c.integrate(&f).value > 0.0);
    }

    #[test]
    fn lp_norm_of_constant_covector_on_torus() {
        let c = make_chart(ChartKind::PeriodicTorus, 3, 8, &ChartParams::default()).unwrap();
        let a = crate::field::VectorField::constant(c.len(), SmallVec::from_slice(&[0.0, 1.0, 0.0]));
        let nrm = lp_norm(&c, &a, 3.0).unwrap();
        assert!((nrm - (2.0 * PI).powi(3).powf(1.0 / 3.0)).abs() < 1e-10);
    }

    #[test]
    fn sample_nodes_are_shared_across_refinement() {
        let a = sphere(3, 17, 2.0);
        let b = sphere(3, 33, 2.0);
        let pa = a.sample_nodes(30, 4, 2, 9);
        let pb = b.sample_nodes(30, 8, 4, 9);
        for (x, y) in pa.iter().zip(pb.iter()) {
            let (cx, cy) = (a.coords(*x), b.coords(*y));
            assert!(cx.iter().zip(cy.iter()).all(|(p, q)| (p - q).abs() < 1e-12));
        }
    }
}
