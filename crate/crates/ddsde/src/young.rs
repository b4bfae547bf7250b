//! Averaged fields `T^W b`, nonlinear Young integrals, and Hölder-exponent
//! estimation.
//!
//! The averaged field `T^W b(t, x) = int_0^t b(x + W_s) ds` is computed
//! mode-by-mode: for a band-limited field the spatial dependence factors out
//! and only the oscillatory time integrals `I_k(t) = int_0^t e^{i omega k W_s} ds`
//! need quadrature. The nonlinear Young integral is the Riemann-sum limit
//! `sum_{[u,v]} A_{u,v}(theta_u)` over dyadic partitions.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{FbmPath, TimeGrid};
use crate::field::SpectralField;

/// Discretized averaged field `T^W b` on a time grid times a 1-D space grid;
/// `values[i][j][o]` is output component `o` at `(t_i, x_j)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AveragedField {
    pub x_grid: Vec<f64>,
    pub grid: TimeGrid,
    pub output_dim: usize,
    pub values: Vec<Vec<Vec<f64>>>,
}

impl AveragedField {
    /// `A(t_i, x)` by cubic (Catmull-Rom) interpolation on the uniform
    /// `x_grid`; `x` must lie inside the grid hull.
    pub fn interpolate(&self, i: usize, x: f64) -> Result<Vec<f64>> {
        let n = self.x_grid.len();
        let (x0, x_end) = (self.x_grid[0], self.x_grid[n - 1]);
        if x < x0 || x > x_end {
            return Err(Error::Domain(format!(
                "x = {x} outside the interpolation hull [{x0}, {x_end}]"
            )));
        }
        let dx = (x_end - x0) / (n - 1) as f64;
        let u = (x - x0) / dx;
        let j = (u.floor() as usize).min(n - 2);
        let s = u - j as f64;
        // Catmull-Rom weights on the cell [j, j+1]; edge cells clamp the
        // outer stencil points.
        let jm = j.saturating_sub(1);
        let jp = (j + 2).min(n - 1);
        let row = &self.values[i];
        let w0 = 0.5 * (-s + 2.0 * s * s - s * s * s);
        let w1 = 0.5 * (2.0 - 5.0 * s * s + 3.0 * s * s * s);
        let w2 = 0.5 * (s + 4.0 * s * s - 3.0 * s * s * s);
        let w3 = 0.5 * (-s * s + s * s * s);
        Ok((0..self.output_dim)
            .map(|o| w0 * row[jm][o] + w1 * row[j][o] + w2 * row[j + 1][o] + w3 * row[jp][o])
            .collect())
    }

    /// Discrete `C^gamma` seminorm in time of component `o`, sup over the
    /// space grid.
    pub fn time_seminorm(&self, gamma: f64, o: usize) -> Result<f64> {
        let times = self.grid.times();
        let mut sup: f64 = 0.0;
        for j in 0..self.x_grid.len() {
            let path: Vec<(f64, f64)> =
                times.iter().enumerate().map(|(i, &t)| (t, self.values[i][j][o])).collect();
            sup = sup.max(crate::fbm::holder_seminorm(&path, gamma)?);
        }
        Ok(sup)
    }
}

/// Default space grid: 257 equispaced points covering one period.
pub fn default_x_grid(period: f64) -> Vec<f64> {
    uniform_x_grid(0.0, period, 257)
}

pub fn uniform_x_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64).collect()
}

/// `T^W b(t_i, x_j)`, exact in `x`, trapezoid quadrature in `t` per mode.
pub fn averaged_field(b: &SpectralField, w: &FbmPath, x_grid: &[f64]) -> Result<AveragedField> {
    if b.dim != 1 || w.dim() != 1 {
        return Err(Error::Domain("averaged_field is implemented for 1-D fields and paths".into()));
    }
    if x_grid.len() < 4 {
        return Err(Error::Contract("x_grid needs at least 4 points".into()));
    }
    let grid = w.grid;
    let n_t = grid.n_steps();
    let dt = grid.dt();
    let omega = b.omega();
    let path = &w.values[0];

    // Per-mode cumulative trapezoid of e^{i omega k W_s}.
    let modes: Vec<(i64, Vec<Complex64>)> = b
        .blocks
        .iter()
        .flat_map(|bl| bl.modes.iter())
        .map(|m| (m.k[0], m.coeff.clone()))
        .collect();
    let integrals: Vec<Vec<Complex64>> = modes
        .par_iter()
        .map(|(k, _)| {
            let ok = omega * *k as f64;
            let mut acc = Vec::with_capacity(n_t + 1);
            let mut sum = Complex64::default();
            let mut prev = Complex64::from_polar(1.0, ok * path[0]);
            acc.push(sum);
            for i in 1..=n_t {
                let cur = Complex64::from_polar(1.0, ok * path[i]);
                sum += (prev + cur) * (0.5 * dt);
                acc.push(sum);
                prev = cur;
            }
            acc
        })
        .collect();

    let out = b.output_dim;
    let values: Vec<Vec<Vec<f64>>> = (0..=n_t)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![vec![0.0; out]; x_grid.len()];
            for ((k, coeff), ints) in modes.iter().zip(&integrals) {
                let ik = ints[i];
                for (j, &x) in x_grid.iter().enumerate() {
                    let phase = Complex64::from_polar(1.0, omega * *k as f64 * x);
                    let pi = phase * ik;
                    for (o, c) in coeff.iter().enumerate() {
                        row[j][o] += (c * pi).re;
                    }
                }
            }
            row
        })
        .collect();

    Ok(AveragedField { x_grid: x_grid.to_vec(), grid, output_dim: out, values })
}

/// Riemann-sum nonlinear Young integral `sum_{[u,v] in D} A_{u,v}(theta_u)`
/// cumulated along the grid; the dyadic partition has `2^partition_level`
/// intervals and must refine the time grid.
pub fn nonlinear_young_integral(
    a: &AveragedField,
    theta: &[f64],
    partition_level: u32,
) -> Result<Vec<Vec<f64>>> {
    let n_t = a.grid.n_steps();
    if theta.len() != n_t + 1 {
        return Err(Error::Contract(format!(
            "theta has {} entries, expected {}",
            theta.len(),
            n_t + 1
        )));
    }
    let pieces = 1usize
        .checked_shl(partition_level)
        .filter(|p| *p <= n_t)
        .ok_or_else(|| Error::Contract("partition must refine the time grid".into()))?;
    if n_t % pieces != 0 {
        return Err(Error::Contract(format!(
            "2^{partition_level} partition intervals do not divide {n_t} grid steps"
        )));
    }
    let stride = n_t / pieces;

    let mut out = Vec::with_capacity(n_t + 1);
    out.push(vec![0.0; a.output_dim]);
    let mut anchor_val = a.interpolate(0, theta[0])?;
    for i in 0..n_t {
        let u = i - i % stride;
        if i == u && i > 0 {
            anchor_val = a.interpolate(u, theta[u])?;
        }
        let next = a.interpolate(i + 1, theta[u])?;
        let cur = if i == u { anchor_val.clone() } else { a.interpolate(i, theta[u])? };
        let prev = &out[i];
        out.push((0..a.output_dim).map(|o| prev[o] + next[o] - cur[o]).collect());
    }
    Ok(out)
}

/// Least-squares slope of `log value` against `log scale`, with `r^2`.
pub fn estimate_holder_exponent(seminorms: &[(f64, f64)]) -> Result<(f64, f64)> {
    if seminorms.len() < 4 {
        return Err(Error::Contract(format!(
            "need at least 4 scales to fit an exponent, got {}",
            seminorms.len()
        )));
    }
    if seminorms.iter().any(|&(s, v)| s <= 0.0 || v <= 0.0) {
        return Err(Error::Domain("scales and seminorm values must be positive".into()));
    }
    let xs: Vec<f64> = seminorms.iter().map(|&(s, _)| s.ln()).collect();
    let ys: Vec<f64> = seminorms.iter().map(|&(_, v)| v.ln()).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let ss_tot: f64 = ys.iter().map(|y| (y - ym) * (y - ym)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let fit = ym + slope * (x - xm);
            (y - fit) * (y - fit)
        })
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok((slope, r2))
}

/// [`estimate_holder_exponent`] with a fixed robustness rule: when the full
/// fit has `r^2 < 0.98`, the two finest scales are discarded (discretization
/// floor) and the exponent refitted.
pub fn estimate_holder_exponent_robust(seminorms: &[(f64, f64)]) -> Result<(f64, f64)> {
    let (gamma, r2) = estimate_holder_exponent(seminorms)?;
    if r2 >= 0.98 || seminorms.len() < 6 {
        return Ok((gamma, r2));
    }
    let mut sorted = seminorms.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    estimate_holder_exponent(&sorted[2..])
}

/// RMS increments of a path at dyadic lags: entry `k` is
/// `(2^k dt, sqrt(mean_i (v_{i+2^k} - v_i)^2))`.
pub fn dyadic_increment_seminorms(values: &[f64], dt: f64, n_scales: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n_scales);
    for k in 0..n_scales {
        let lag = 1usize << k;
        if lag >= values.len() {
            break;
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..values.len() - lag {
            let d = values[i + lag] - values[i];
            sum += d * d;
            count += 1;
        }
        out.push((lag as f64 * dt, (sum / count as f64).sqrt()));
    }
    out
}
