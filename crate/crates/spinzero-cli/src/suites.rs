//! The suite catalog.

use spinzero::chart::ChartKind;
use spinzero::report::{Check, Report};
use spinzero::{Error, Result};

use crate::checks::{self, Ctx};
use crate::config::SuiteConfig;

pub const CATALOG: [&str; 7] = [
    "clifford-algebra",
    "sphere-zero-mode",
    "spectral-mu-a",
    "inequality-chain",
    "sasaki-structure",
    "kform-bounds",
    "surface-case",
];


pub fn exists(name: &str) -> bool {
    CATALOG.contains(&name)
}

/// Default dimensions and resolutions of each suite.
pub fn defaults(name: &str) -> (&'static [usize], &'static [usize]) {
    match name {
        "clifford-algebra" => (&[2, 3, 4, 5, 6, 7, 8], &[]),
        "sphere-zero-mode" => (&[3], &[64]),
        "spectral-mu-a" => (&[3], &[16]),
        "inequality-chain" => (&[3], &[49]),
        "sasaki-structure" => (&[3, 5], &[33, 65, 129]),
        "kform-bounds" => (&[4, 5, 6, 7], &[33, 65, 129]),
        "surface-case" => (&[2], &[64]),
        _ => (&[], &[]),
    }
}

pub fn context(cfg: &SuiteConfig) -> Ctx {
    Ctx { seed: cfg.seed, order: cfg.stencil.order(), tolerances: cfg.tolerances.clone() }
}

fn require_kind(cfg: &SuiteConfig, kind: ChartKind) -> Result<f64> {
    match &cfg.chart {
        Some(c) if c.kind != kind => Err(Error::Config(format!("this suite needs a {} chart, got {}", kind.name(), c.kind.name()))),
        Some(c) => Ok(c.r_max.unwrap_or(3.0)),
        None => Ok(3.0),
    }
}

fn odd_dims(dims: &[usize]) -> Result<()> {
    match dims.iter().find(|&&n| n % 2 == 0 || n < 3) {
        Some(n) => Err(Error::Config(format!("dimension {n} carries no Sasakian structure; use odd n >= 3"))),
        None => Ok(()),
    }
}

/// Checks of suite `name`; the caller has validated the name.
pub fn checks(name: &str, cfg: &SuiteConfig) -> Result<Vec<Check>> {
    let ctx = context(cfg);
    let (d, r) = defaults(name);
    let (dims, resolutions) = (cfg.dims_or(d), cfg.resolutions_or(r));
    let mut out = Vec::new();
    match name {
        "clifford-algebra" => out.extend(checks::clifford_algebra(&ctx, &dims)?),
        "sphere-zero-mode" => {
            let r_max = require_kind(cfg, ChartKind::SphereStereographic)?;
            odd_dims(&dims)?;
            for &n in &dims {
                for &res in &resolutions {
                    let (ratio, residual) = if n == 3 { (1e-3, 1e-4) } else { (1e-2, 1e-2) };
                    out.extend(checks::sphere_equality(&ctx, n, res, r_max, ctx.tol("equality-ratio", ratio), ctx.tol("zero-mode-residual", residual))?);
                }
            }
            out.extend(checks::transformation_invariance(&ctx)?);
            out.extend(checks::negative_controls(&ctx)?);
        }
        "spectral-mu-a" => {
            require_kind(cfg, ChartKind::PeriodicTorus)?;
            for &n in &dims {
                if n < 3 {
                    return Err(Error::Config("the mu_a family needs n >= 3".into()));
                }
                let oracle = (512f64.powf(1.0 / n as f64).floor() as usize).max(4);
                for &res in &resolutions {
                    out.extend(checks::spectral_family(&ctx, n, oracle, res)?);
                    out.extend(checks::extremal_identity(&ctx, n, res)?);
                }
            }
        }
        "inequality-chain" => {
            out.extend(checks::lichnerowicz(&ctx, 20, 16, 32)?);
            for &res in &resolutions {
                out.extend(checks::inequality_chain(&ctx, res)?);
            }
        }
        "sasaki-structure" => {
            odd_dims(&dims)?;
            out.extend(checks::vacuum_machinery(&ctx)?);
            out.extend(checks::sasaki_extraction(&ctx, &dims, &resolutions)?);
        }
        "kform-bounds" => {
            out.extend(checks::kform_bounds(&ctx, 1000)?);
            out.extend(checks::two_form_pipeline(&ctx, &resolutions, 12)?);
        }
        "surface-case" => out.extend(checks::surface_case(&ctx, 801, resolutions[0])?),
        other => return Err(Error::Config(format!("unknown suite {other}"))),
    }
    Ok(out)
}

/// Run suite `name` into a report. Errors leave nothing behind.
pub fn run_suite(name: &str, cfg: &SuiteConfig) -> std::result::Result<Report, SuiteError> {
    if !exists(name) {
        return Err(SuiteError::Unknown(name.into()));
    }
    let checks = checks(name, cfg).map_err(SuiteError::Run)?;
    let (d, r) = defaults(name);
    let mut report = Report::new(name, cfg.seed, cfg.dims_or(d), cfg.resolutions_or(r));
    for c in checks {
        report.push(c);
    }
    Ok(report)
}

#[derive(Debug)]
pub enum SuiteError {
    Unknown(String),
    Run(Error),
}
