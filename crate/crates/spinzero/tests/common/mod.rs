#![allow(dead_code)]

use spinzero::chart::{make_chart, smooth_periodic, Chart, ChartKind, ChartParams};
use spinzero::field::{Spinor, SpinorField};
use spinzero::C64;

pub fn torus(n: usize, res: usize) -> Chart {
    make_chart(ChartKind::PeriodicTorus, n, res, &ChartParams::default()).unwrap()
}

pub fn sphere(n: usize, res: usize, r_max: f64) -> Chart {
    make_chart(ChartKind::SphereStereographic, n, res, &ChartParams { r_max: Some(r_max), ..Default::default() }).unwrap()
}

/// Torus with a smooth random conformal factor (`u` for n >= 3, log-factor for n = 2).
pub fn bumpy_torus(n: usize, res: usize, seed: u64) -> Chart {
    let t = torus(n, res);
    let conf = smooth_periodic(&t, seed, 0.3, 1, 4);
    let conf = if n == 2 { conf.map(|v| v - 1.0) } else { conf };
    t.with_conf(conf).unwrap()
}

/// Smooth random periodic spinor field.
pub fn smooth_spinor(chart: &Chart, dim: usize, seed: u64) -> SpinorField {
    let parts: Vec<_> = (0..2 * dim).map(|k| smooth_periodic(chart, seed * 97 + k as u64, 1.0, 2, 4)).collect();
    SpinorField::from_fn(chart.len(), move |i| {
        Spinor((0..dim).map(|c| C64::new(parts[2 * c].at(i) - 1.0, parts[2 * c + 1].at(i) - 1.0) + C64::new(0.2, 0.0)).collect())
    })
}
