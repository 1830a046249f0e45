//! Refinement studies: error series over resolutions and their observed
//! convergence orders.

use std::fmt::Write as _;
use std::sync::Arc;

use spinzero::chart::{gauss_curvature_2d, scalar_curvature, unit_sphere_volume, Chart};
use spinzero::clifford::{build_spin_rep, clifford_relation_residual};
use spinzero::field::ScalarField;
use spinzero::refine::{order_above_floor, successive_orders, OrderVerdict};
use spinzero::sasaki::{reeb_from_zero_mode, sasakian_check, standard_orientation, two_form_equality_witness};
use spinzero::spectral::yamabe_quotient;
use spinzero::spincalc::{
    killing_spinor_sphere, schrodinger_lichnerowicz_report, sphere_zero_mode, sphere_zero_mode_with_lambda, KillingSpec,
};
use spinzero::{Error, Result};

use crate::checks::{smooth_spinor, Ctx};
use crate::config::SuiteConfig;
use crate::suites;

/// Orders below this are flagged.
pub const MIN_ORDER: f64 = 3.0;
/// Errors at or below this are rounding noise.
pub const FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub resolutions: Vec<usize>,
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Row {
    pub series: Series,
    pub verdict: OrderVerdict,
    pub flagged: bool,
}

#[derive(Clone, Debug)]
pub struct Table {
    pub suite: String,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn any_flagged(&self) -> bool {
        self.rows.iter().any(|r| r.flagged)
    }

    /// Tab-separated, one line per level, then one verdict line per series.
    pub fn render(&self) -> String {
        let mut out = format!("# suite {}\nseries\tres\th\terror\torder\n", self.suite);
        for r in &self.rows {
            let s = &r.series;
            let steps = successive_orders(&s.h, &s.errors);
            for k in 0..s.h.len() {
                let order = match k {
                    0 => "-".to_string(),
                    _ if s.errors[k] <= FLOOR || s.errors[k - 1] <= FLOOR => "exact".to_string(),
                    _ => format!("{:.3}", steps[k - 1]),
                };
                let _ = writeln!(out, "{}\t{}\t{:.6e}\t{:.6e}\t{}", s.name, s.resolutions[k], s.h[k], s.errors[k], order);
            }
        }
        for r in &self.rows {
            let verdict = match r.verdict {
                OrderVerdict::Exact => "exact".to_string(),
                OrderVerdict::Order(p) => format!("order {p:.3}"),
            };
            let _ = writeln!(out, "# {}: {}{}", r.series.name, verdict, if r.flagged { " FLAGGED (below 3)" } else { "" });
        }
        out
    }
}

fn series(name: &str, resolutions: &[usize], level: impl Fn(usize) -> Result<(f64, f64)>) -> Result<Series> {
    let mut s = Series { name: name.into(), resolutions: resolutions.to_vec(), h: vec![], errors: vec![] };
    for &res in resolutions {
        let (h, e) = level(res)?;
        s.h.push(h);
        s.errors.push(e);
    }
    Ok(s)
}

fn interior_max(chart: &Chart, f: impl Fn(usize) -> f64) -> f64 {
    let margin = ((chart.res - 1) / 8).max(2);
    (0..chart.len()).filter(|&i| chart.is_interior(i, margin)).map(f).fold(0.0, f64::max)
}

fn curvature_error(ctx: &Ctx, n: usize, res: usize) -> Result<(f64, f64)> {
    let chart = ctx.sphere(n, res, 1.5)?;
    let (k, exact) = if n == 2 { (gauss_curvature_2d(&chart)?, 1.0) } else { (scalar_curvature(&chart)?, (n * (n - 1)) as f64) };
    Ok((chart.h[0], interior_max(&chart, |i| (k.at(i) - exact).abs()) / exact))
}

/// Default resolutions of the refinement study of `suite`.
pub fn default_resolutions(suite: &str) -> &'static [usize] {
    match suite {
        "sphere-zero-mode" => &[32, 48, 64],
        "spectral-mu-a" => &[33, 49, 65],
        "inequality-chain" => &[12, 16, 24],
        "surface-case" => &[101, 201, 401],
        _ => &[33, 65, 129],
    }
}

pub fn refine_and_extrapolate(suite: &str, cfg: &SuiteConfig) -> Result<Table> {
    let ctx = suites::context(cfg);
    let res = cfg.resolutions.clone().unwrap_or_else(|| default_resolutions(suite).to_vec());
    if res.len() < 3 {
        return Err(Error::Config(format!("a refinement study needs at least 3 resolutions, got {}", res.len())));
    }
    let dim = |default: usize| cfg.dims.as_ref().and_then(|d| d.first().copied()).unwrap_or(default);
    let mut list = Vec::new();
    match suite {
        "clifford-algebra" => {
            for &n in cfg.dims.as_deref().unwrap_or(&[2, 3, 4, 5, 6, 7, 8]) {
                let rep = build_spin_rep(n)?;
                list.push(series(&format!("clifford-relations n={n}"), &res, |r| Ok((1.0 / r as f64, clifford_relation_residual(&rep))))?);
            }
        }
        "sphere-zero-mode" => {
            let n = dim(3);
            let rep = Arc::new(build_spin_rep(n)?);
            list.push(series(&format!("zero-mode-residual n={n}"), &res, |r| {
                let rec = sphere_zero_mode(&ctx.sphere(n, r, 3.0)?, rep.clone())?;
                Ok((rec.chart.h[0], rec.residual))
            })?);
            list.push(series(&format!("curvature n={n}"), &res, |r| curvature_error(&ctx, n, r))?);
        }
        "spectral-mu-a" => {
            let n = dim(3);
            let exact = (n * (n - 1)) as f64 * unit_sphere_volume(n).powf(2.0 / n as f64);
            list.push(series(&format!("yamabe-quotient n={n}"), &res, |r| {
                let chart = ctx.sphere(n, r, 1.5)?;
                let q = yamabe_quotient(&chart, &ScalarField::constant(chart.len(), 1.0))?;
                Ok((chart.h[0], (q - exact).abs() / exact))
            })?);
        }
        "inequality-chain" => {
            let rep = build_spin_rep(3)?;
            list.push(series("lichnerowicz", &res, |r| {
                let chart = ctx.bumpy_torus(3, r, 21)?;
                let rpt = schrodinger_lichnerowicz_report(&chart, &rep, &smooth_spinor(&chart, 2, ctx.seed * 1000))?;
                Ok((chart.h[0], rpt.relative))
            })?);
        }
        "sasaki-structure" => {
            let n = dim(3);
            let rep = Arc::new(build_spin_rep(n)?);
            let lambda = 0.5 * n as f64 * unit_sphere_volume(n).powf(1.0 / n as f64);
            list.push(series(&format!("sasakian n={n}"), &res, |r| {
                let chart = ctx.sphere(n, r, 1.5)?;
                let rec = sphere_zero_mode_with_lambda(&chart, rep.clone(), lambda)?;
                let at = nodes(&chart);
                let ex = reeb_from_zero_mode(&rec, &at, 1e-2)?;
                Ok((chart.h[0], sasakian_check(&chart, &ex.data, &at)))
            })?);
        }
        "kform-bounds" => {
            let rep = build_spin_rep(5)?;
            let (_, psi0) = standard_orientation(&rep)?;
            list.push(series("two-form-closedness n=5", &res, |r| {
                let chart = ctx.sphere(5, r, 1.5)?;
                let phi = killing_spinor_sphere(&chart, &rep, KillingSpec::new(-0.5)?, &psi0)?;
                let w = two_form_equality_witness(&rep, &chart, &phi, None, &nodes(&chart), Some(unit_sphere_volume(5)))?;
                Ok((chart.h[0], w.closedness))
            })?);
        }
        "surface-case" => list.push(series("gauss-curvature n=2", &res, |r| curvature_error(&ctx, 2, r))?),
        other => return Err(Error::Config(format!("unknown suite {other}"))),
    }
    let rows = list
        .into_iter()
        .map(|s| {
            let verdict = order_above_floor(&s.h, &s.errors, FLOOR)?;
            let flagged = matches!(verdict, OrderVerdict::Order(p) if p < MIN_ORDER);
            Ok(Row { series: s, verdict, flagged })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table { suite: suite.into(), rows })
}

fn nodes(chart: &Chart) -> Vec<usize> {
    let step = ((chart.res - 1) / 8).max(1);
    chart.sample_nodes(100, 2 * step, step, 5)
}
