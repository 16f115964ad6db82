//! Extrapolation of per-degree values to k → ∞.
//!
//! Normalized log-determinants carry a `log N_k!/(kN_k)` term of size
//! `log k / k` on top of the usual `1/k` corrections, so the model is
//! `a + b/k + c·log(k)/k`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::least_squares;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Extrapolation {
    /// The limit `a`.
    pub limit: f64,
    pub coeff_inv_k: f64,
    pub coeff_log_k: f64,
    /// Largest absolute deviation of the data from the fitted curve.
    pub residual: f64,
}

/// Least-squares fit of `a + b/k + c·log(k)/k`; needs at least three
/// distinct degrees.
pub fn extrapolate(ks: &[usize], values: &[f64]) -> Result<Extrapolation> {
    if ks.len() != values.len() {
        return Err(Error::param("degree and value lists differ in length"));
    }
    let mut distinct = ks.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 || distinct[0] == 0 {
        return Err(Error::param("extrapolation needs at least three positive degrees"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation("non-finite value in extrapolation data".into()));
    }
    let rows: Vec<Vec<f64>> = ks.iter().map(|&k| basis_row(k)).collect();
    let beta = least_squares(&rows, values)?;
    let residual = rows
        .iter()
        .zip(values)
        .map(|(r, v)| (r.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>() - v).abs())
        .fold(0.0, f64::max);
    Ok(Extrapolation {
        limit: beta[0],
        coeff_inv_k: beta[1],
        coeff_log_k: beta[2],
        residual,
    })
}

fn basis_row(k: usize) -> Vec<f64> {
    let k = k as f64;
    vec![1.0, 1.0 / k, k.ln() / k]
}

impl Extrapolation {
    /// Value of the fitted curve at degree k.
    pub fn at(&self, k: usize) -> f64 {
        let r = basis_row(k);
        self.limit + self.coeff_inv_k * r[1] + self.coeff_log_k * r[2]
    }
}
