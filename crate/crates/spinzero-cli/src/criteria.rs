//! The twelve acceptance criteria, each a fixed composition of checks.

use spinzero::report::Check;
use spinzero::Result;

use crate::checks::{self, Ctx};

pub const COUNT: usize = 12;

pub fn title(k: usize) -> &'static str {
    match k {
        1 => "Clifford and ladder relations",
        2 => "sphere equality case",
        3 => "gauge and conformal invariance",
        4 => "mu_a family and dense oracle",
        5 => "extremal metric identity",
        6 => "Schroedinger-Lichnerowicz identity",
        7 => "sharp k-form bound",
        8 => "vacuum machinery",
        9 => "Sasakian structure from zero modes",
        10 => "2-form equality pipeline",
        11 => "surface case",
        12 => "negative controls",
        _ => "unknown",
    }
}

/// Checks of criterion `k` (1-based).
pub fn run(k: usize, ctx: &Ctx) -> Result<Vec<Check>> {
    match k {
        1 => checks::clifford_algebra(ctx, &[2, 3, 4, 5, 6, 7, 8]),
        2 => {
            let mut out = checks::sphere_equality(ctx, 3, 64, 3.0, 1e-3, 1e-4)?;
            out.extend(checks::sphere_equality(ctx, 5, 32, 3.0, 1e-2, 1e-2)?);
            Ok(out)
        }
        3 => checks::transformation_invariance(ctx),
        4 => checks::spectral_family(ctx, 3, 8, 16),
        5 => checks::extremal_identity(ctx, 3, 16),
        6 => checks::lichnerowicz(ctx, 20, 16, 32),
        7 => checks::kform_bounds(ctx, 1000),
        8 => checks::vacuum_machinery(ctx),
        9 => checks::sasaki_extraction(ctx, &[3, 5], &[33, 65, 129]),
        10 => checks::two_form_pipeline(ctx, &[33, 65, 129], 12),
        11 => checks::surface_case(ctx, 801, 64),
        12 => checks::negative_controls(ctx),
        _ => Ok(vec![]),
    }
}
