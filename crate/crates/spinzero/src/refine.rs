//! Convergence orders from resolution sweeps.

use crate::error::{Error, Result};

/// Observed order between successive errors: `log(e_i / e_{i+1}) / log(h_i / h_{i+1})`.
pub fn successive_orders(h: &[f64], err: &[f64]) -> Vec<f64> {
    h.windows(2)
        .zip(err.windows(2))
        .map(|(hw, ew)| (ew[0] / ew[1]).ln() / (hw[0] / hw[1]).ln())
        .collect()
}

/// Least-squares slope of `log err` against `log h`.
pub fn fitted_order(h: &[f64], err: &[f64]) -> Result<f64> {
    if h.len() != err.len() || h.len() < 2 {
        return Err(Error::Parameter("need at least two (h, error) pairs".into()));
    }
    if err.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Degenerate("errors must be positive to fit an order".into()));
    }
    let xs: Vec<f64> = h.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|x| x.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Richardson extrapolation of the last two values assuming order `p`.
pub fn richardson(h: &[f64], values: &[f64], p: f64) -> Result<f64> {
    let k = h.len();
    if k < 2 || values.len() != k {
        return Err(Error::Parameter("need at least two (h, value) pairs".into()));
    }
    let r = (h[k - 2] / h[k - 1]).powf(p);
    Ok((r * values[k - 1] - values[k - 2]) / (r - 1.0))
}

/// Outcome of an order check on a resolution sweep.
#[derive(Clone, Debug, PartialEq)]
pub enum OrderVerdict {
    /// Every error is at or below the floor: nothing to converge.
    Exact,
    /// Fitted order over the errors above the floor.
    Order(f64),
}

/// Fit an order to the errors that exceed `floor`; all-below-floor sweeps
/// are reported as exact.
pub fn order_above_floor(h: &[f64], err: &[f64], floor: f64) -> Result<OrderVerdict> {
    let pairs: Vec<(f64, f64)> = h.iter().zip(err.iter()).filter(|(_, e)| **e > floor).map(|(a, b)| (*a, *b)).collect();
    if pairs.len() < 2 {
        if err.iter().all(|e| *e <= floor) {
            return Ok(OrderVerdict::Exact);
        }
        return Err(Error::Degenerate("fewer than two errors above the floor".into()));
    }
    let (hs, es): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(OrderVerdict::Order(fitted_order(&hs, &es)?))
}
