//! Empirical probability measures, Wasserstein distances, moment norms, and
//! convolution of spectral fields against measures.

mod transport;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::TimeGrid;
use crate::field::SpectralField;

pub use transport::transport_simplex;

/// Largest `n_mu * n_nu` accepted by the exact solver.
pub const MAX_EXACT_CELLS: usize = 1_000_000;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Weighted point cloud representing a probability measure on `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Contract("empirical measure needs at least one atom".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::Contract("points and weights must have equal length".into()));
        }
        let d = points[0].len();
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::Contract("all atoms must share the ambient dimension".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Contract("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Contract(format!("weights must sum to 1 within {WEIGHT_SUM_TOL}, got {total}")));
        }
        Ok(Self { points, weights })
    }

    /// Uniform weights on the given atoms.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::Contract("empirical measure needs at least one atom".into()));
        }
        let w = 1.0 / n as f64;
        let mut weights = vec![w; n];
        // Compensate rounding so the sum is exactly 1.
        let sum: f64 = weights.iter().sum();
        weights[n - 1] += 1.0 - sum;
        Self::new(points, weights)
    }

    pub fn dirac(point: Vec<f64>) -> Self {
        Self { points: vec![point], weights: vec![1.0] }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn translate(&self, h: &[f64]) -> Self {
        let points = self
            .points
            .iter()
            .map(|p| p.iter().zip(h).map(|(x, y)| x + y).collect())
            .collect();
        Self { points, weights: self.weights.clone() }
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d];
        for (p, &w) in self.points.iter().zip(&self.weights) {
            for (mi, xi) in m.iter_mut().zip(p) {
                *mi += w * xi;
            }
        }
        m
    }

    /// Moment norm `(int ||x||^p mu(dx))^{1/p}`.
    pub fn moment_norm(&self, p: f64) -> Result<f64> {
        if p < 1.0 {
            return Err(Error::Domain(format!("moment order must be >= 1, got {p}")));
        }
        let s: f64 = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(x, &w)| w * norm(x).powf(p))
            .sum();
        Ok(s.powf(1.0 / p))
    }

    /// CSV serialization with header `w,x_1,...,x_d`.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut out = String::from("w");
        for i in 1..=d {
            out.push_str(&format!(",x_{i}"));
        }
        out.push('\n');
        for (p, w) in self.points.iter().zip(&self.weights) {
            out.push_str(&format!("{w}"));
            for x in p {
                out.push_str(&format!(",{x}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 2 {
                return Err(Error::Contract(format!("csv line {} has too few fields", lineno + 1)));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Contract(format!("csv line {}: {e}", lineno + 1)))
            };
            weights.push(parse(fields[0])?);
            points.push(fields[1..].iter().map(|s| parse(s)).collect::<Result<Vec<f64>>>()?);
        }
        Self::new(points, weights)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Time-indexed family of empirical measures.
#[derive(Clone, Debug)]
pub struct MeasureFlow {
    pub grid: TimeGrid,
    pub measures: Vec<EmpiricalMeasure>,
}

impl MeasureFlow {
    pub fn new(grid: TimeGrid, measures: Vec<EmpiricalMeasure>) -> Result<Self> {
        if measures.len() != grid.n_steps() + 1 {
            return Err(Error::Contract(format!(
                "flow needs {} measures, got {}",
                grid.n_steps() + 1,
                measures.len()
            )));
        }
        let d = measures[0].dim();
        if measures.iter().any(|m| m.dim() != d) {
            return Err(Error::Contract("all measures in a flow must share the ambient dimension".into()));
        }
        Ok(Self { grid, measures })
    }

    pub fn dim(&self) -> usize {
        self.measures[0].dim()
    }

    /// `sup_t d_p` over the thinned time grid (every `stride`-th index, final
    /// time always included). Uses the quantile coupling in 1-D and the exact
    /// solver otherwise.
    pub fn sup_distance(&self, other: &Self, p: f64, stride: usize) -> Result<f64> {
        let stride = stride.max(1);
        let n = self.measures.len();
        let mut sup: f64 = 0.0;
        let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
        if *idx.last().unwrap() != n - 1 {
            idx.push(n - 1);
        }
        for i in idx {
            let d = if self.dim() == 1 {
                wasserstein_1d(&self.measures[i], &other.measures[i], p)?
            } else {
                wasserstein_exact(&self.measures[i], &other.measures[i], p)?
            };
            sup = sup.max(d);
        }
        Ok(sup)
    }
}

/// Exact 1-D Wasserstein distance via the monotone (quantile) coupling,
/// integrating over the piecewise-constant quantile functions.
pub fn wasserstein_1d(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<f64> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(Error::Contract("wasserstein_1d requires 1-D measures".into()));
    }
    if p < 1.0 {
        return Err(Error::Domain(format!("order p must be >= 1, got {p}")));
    }
    let sorted = |m: &EmpiricalMeasure| -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = m
            .points()
            .iter()
            .zip(m.weights())
            .filter(|(_, &w)| w > 0.0)
            .map(|(x, &w)| (x[0], w))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let a = sorted(mu);
    let b = sorted(nu);
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ra, mut rb) = (a[0].1, b[0].1); // remaining mass of current atoms
    let mut cost = 0.0;
    loop {
        let du = ra.min(rb);
        cost += du * (a[i].0 - b[j].0).abs().powf(p);
        ra -= du;
        rb -= du;
        if ra <= 0.0 {
            i += 1;
            if i == a.len() {
                break;
            }
            ra = a[i].1;
        }
        if rb <= 0.0 {
            j += 1;
            if j == b.len() {
                break;
            }
            rb = b[j].1;
        }
    }
    Ok(cost.powf(1.0 / p))
}

/// Exact Wasserstein distance in any dimension by solving the discrete
/// optimal-transport linear program.
pub fn wasserstein_exact(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::Contract("measures must share the ambient dimension".into()));
    }
    if p < 1.0 {
        return Err(Error::Domain(format!("order p must be >= 1, got {p}")));
    }
    if mu.len() * nu.len() > MAX_EXACT_CELLS {
        return Err(Error::Resource(format!(
            "instance with {} x {} atoms exceeds the exact-solver limit; use wasserstein_sinkhorn",
            mu.len(),
            nu.len()
        )));
    }
    let cost: Vec<Vec<f64>> = mu
        .points()
        .iter()
        .map(|x| nu.points().iter().map(|y| dist(x, y).powf(p)).collect())
        .collect();
    let total = transport_simplex(mu.weights(), nu.weights(), &cost);
    Ok(total.max(0.0).powf(1.0 / p))
}

/// Outcome of a Sinkhorn run.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SinkhornReport {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub marginal_error: f64,
}

/// Entropically regularized transport cost (p-th root, no debiasing),
/// converged when the column-marginal violation drops below `1e-8`.
pub fn wasserstein_sinkhorn(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    p: f64,
    reg: f64,
    max_iter: usize,
) -> Result<SinkhornReport> {
    if reg <= 0.0 {
        return Err(Error::Domain(format!("regularization must be positive, got {reg}")));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::Contract("measures must share the ambient dimension".into()));
    }
    let m = mu.len();
    let n = nu.len();
    let cost: Vec<Vec<f64>> = mu
        .points()
        .iter()
        .map(|x| nu.points().iter().map(|y| dist(x, y).powf(p)).collect())
        .collect();
    let log_a: Vec<f64> = mu.weights().iter().map(|&w| w.max(1e-300).ln()).collect();
    let log_b: Vec<f64> = nu.weights().iter().map(|&w| w.max(1e-300).ln()).collect();

    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let lse = |terms: &mut dyn Iterator<Item = f64>| -> f64 {
        let vals: Vec<f64> = terms.collect();
        let mx = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if mx == f64::NEG_INFINITY {
            return mx;
        }
        mx + vals.iter().map(|v| (v - mx).exp()).sum::<f64>().ln()
    };

    let mut iterations = 0;
    let mut marginal_error = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        // Simultaneous (Jacobi) updates keep the iteration exactly symmetric
        // under swapping the two measures; the 1/2 damping suppresses the
        // period-2 oscillation Jacobi scaling is prone to.
        let f_new: Vec<f64> = (0..m)
            .map(|i| -reg * lse(&mut (0..n).map(|j| (g[j] - cost[i][j]) / reg + log_b[j])))
            .collect();
        let g_new: Vec<f64> = (0..n)
            .map(|j| -reg * lse(&mut (0..m).map(|i| (f[i] - cost[i][j]) / reg + log_a[i])))
            .collect();
        for (fi, fnew) in f.iter_mut().zip(&f_new) {
            *fi = 0.5 * (*fi + fnew);
        }
        for (gj, gnew) in g.iter_mut().zip(&g_new) {
            *gj = 0.5 * (*gj + gnew);
        }
        let mut row_err = 0.0;
        for i in 0..m {
            let row: f64 = (0..n)
                .map(|j| ((f[i] + g[j] - cost[i][j]) / reg + log_a[i] + log_b[j]).exp())
                .sum();
            row_err += (row - mu.weights()[i]).abs();
        }
        let mut col_err = 0.0;
        for j in 0..n {
            let col: f64 = (0..m)
                .map(|i| ((f[i] + g[j] - cost[i][j]) / reg + log_a[i] + log_b[j]).exp())
                .sum();
            col_err += (col - nu.weights()[j]).abs();
        }
        marginal_error = row_err.max(col_err);
        if marginal_error < 1e-8 {
            break;
        }
    }
    let converged = marginal_error < 1e-8;
    if !converged {
        log::warn!("sinkhorn did not converge in {max_iter} iterations (marginal error {marginal_error:.3e})");
    }
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..n {
            let pi = ((f[i] + g[j] - cost[i][j]) / reg + log_a[i] + log_b[j]).exp();
            total += pi * cost[i][j];
        }
    }
    Ok(SinkhornReport { value: total.max(0.0).powf(1.0 / p), converged, iterations, marginal_error })
}

/// Default Sinkhorn regularization: `1e-3 * diameter^2` of the joint support.
pub fn default_sinkhorn_reg(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    let mut diam: f64 = 0.0;
    let all = || mu.points().iter().chain(nu.points().iter());
    for x in all() {
        for y in all() {
            diam = diam.max(dist(x, y));
        }
    }
    1e-3 * diam * diam
}

/// Spectral convolution `b * mu`: each Fourier coefficient is multiplied by
/// the empirical characteristic value of the measure.
pub fn convolve_field(b: &SpectralField, mu: &EmpiricalMeasure) -> Result<SpectralField> {
    if b.dim != mu.dim() {
        return Err(Error::Contract("field and measure dimensions disagree".into()));
    }
    b.convolved_with(mu.points(), mu.weights())
}
