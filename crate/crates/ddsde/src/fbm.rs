//! Fractional Brownian motion sampling and path seminorms.
//!
//! Two samplers are provided: exact Cholesky factorization of the fractional
//! Gaussian noise covariance, and circulant embedding (Davies-Harte) for large
//! grids. Both produce paths on a uniform grid with `W_0 = 0` and independent
//! components.
//!
//! Note on the covariance: we use
//! `E[W_s W_t] = (|t|^{2H} + |s|^{2H} - |t-s|^{2H}) / 2`,
//! the standard sign convention; with a plus sign in front of the increment
//! term the kernel would not be positive semi-definite and the `H = 1/2` case
//! would not reduce to `min(s, t)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest grid accepted by the Cholesky sampler.
pub const MAX_CHOLESKY_STEPS: usize = 4096;

/// Uniform time grid on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        if n_steps < 1 {
            return Err(Error::Domain("n_steps must be >= 1".into()));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }
}

/// Discretized d-dimensional fBm sample path; `values[c][i]` is component `c`
/// at grid time `t_i`, with `values[c][0] = 0`.
#[derive(Clone, Debug)]
pub struct FbmPath {
    pub hurst: f64,
    pub grid: TimeGrid,
    pub values: Vec<Vec<f64>>,
}

impl FbmPath {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Position at grid index `i` as a vector.
    pub fn at(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|c| c[i]).collect()
    }

    /// Increment of component `c` over `[t_i, t_{i+1}]`.
    pub fn increment(&self, c: usize, i: usize) -> f64 {
        self.values[c][i + 1] - self.values[c][i]
    }
}

fn check_hurst(hurst: f64) -> Result<()> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::Domain(format!("Hurst parameter must lie in (0,1), got {hurst}")));
    }
    Ok(())
}

/// Covariance of one-dimensional fBm, `(|t|^{2H} + |s|^{2H} - |t-s|^{2H}) / 2`.
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if s < 0.0 || t < 0.0 {
        return Err(Error::Domain(format!("times must be nonnegative, got ({s}, {t})")));
    }
    let h2 = 2.0 * hurst;
    Ok(0.5 * (t.abs().powf(h2) + s.abs().powf(h2) - (t - s).abs().powf(h2)))
}

/// Autocovariance of unit-spaced fractional Gaussian noise at integer lag `k`:
/// `(|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2`.
pub fn fgn_autocovariance(k: f64, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * ((k + 1.0).abs().powf(h2) - 2.0 * k.abs().powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Common interface of the two path samplers.
pub trait FbmSampler {
    fn grid(&self) -> TimeGrid;
    fn hurst(&self) -> f64;

    /// Sample one unit-spacing fGn sequence of length `n_steps`.
    fn sample_fgn(&self, rng: &mut ChaCha12Rng) -> Vec<f64>;

    /// Sample a d-dimensional path by cumulating one independent fGn sequence
    /// per component, scaled to the grid spacing.
    fn sample(&self, d: usize, rng: &mut ChaCha12Rng) -> FbmPath {
        let grid = self.grid();
        let scale = grid.dt().powf(self.hurst());
        let values = (0..d)
            .map(|_| {
                let fgn = self.sample_fgn(rng);
                let mut path = Vec::with_capacity(grid.n_steps() + 1);
                let mut acc = 0.0;
                path.push(0.0);
                for x in fgn {
                    acc += scale * x;
                    path.push(acc);
                }
                path
            })
            .collect();
        FbmPath { hurst: self.hurst(), grid, values }
    }
}

/// Exact sampler: Cholesky factor of the fGn covariance, reusable across paths.
pub struct CholeskySampler {
    grid: TimeGrid,
    hurst: f64,
    factor: DMatrix<f64>,
}

impl CholeskySampler {
    pub fn new(grid: TimeGrid, hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        let n = grid.n_steps();
        if n > MAX_CHOLESKY_STEPS {
            return Err(Error::Resource(format!(
                "grid with {n} steps exceeds the Cholesky sampler limit of {MAX_CHOLESKY_STEPS}; use the circulant sampler"
            )));
        }
        // Unit-spacing fGn covariance; the dt^H scaling is applied at sampling time.
        let cov = DMatrix::from_fn(n, n, |i, j| fgn_autocovariance(i.abs_diff(j) as f64, hurst));
        let chol = cov.cholesky().ok_or_else(|| {
            Error::Numerical(format!(
                "fGn covariance (n = {n}, H = {hurst}) is not numerically positive definite"
            ))
        })?;
        Ok(Self { grid, hurst, factor: chol.unpack() })
    }
}

impl FbmSampler for CholeskySampler {
    fn grid(&self) -> TimeGrid {
        self.grid
    }

    fn hurst(&self) -> f64 {
        self.hurst
    }

    fn sample_fgn(&self, rng: &mut ChaCha12Rng) -> Vec<f64> {
        let n = self.grid.n_steps();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.factor * z).iter().copied().collect()
    }
}

/// Circulant-embedding (Davies-Harte) sampler, O(n log n) per path.
pub struct CirculantSampler {
    grid: TimeGrid,
    hurst: f64,
    /// sqrt of the (clipped) circulant eigenvalues, length 2 n_steps.
    sqrt_eigs: Vec<f64>,
    /// Fraction of total eigenvalue mass removed by clipping negatives.
    pub clipped_mass: f64,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl CirculantSampler {
    pub fn new(grid: TimeGrid, hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        let n = grid.n_steps();
        let m = 2 * n;
        // First row of the circulant embedding of the fGn Toeplitz covariance.
        let mut row = Vec::with_capacity(m);
        for k in 0..=n {
            row.push(Complex64::new(fgn_autocovariance(k as f64, hurst), 0.0));
        }
        for k in (1..n).rev() {
            row.push(Complex64::new(fgn_autocovariance(k as f64, hurst), 0.0));
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut row);

        let mut clipped = 0.0;
        let mut total = 0.0;
        let sqrt_eigs = row
            .iter()
            .map(|e| {
                let lam = e.re;
                total += lam.abs();
                if lam < 0.0 {
                    clipped += -lam;
                    0.0
                } else {
                    lam.sqrt()
                }
            })
            .collect();
        let clipped_mass = if total > 0.0 { clipped / total } else { 0.0 };
        if clipped_mass > 1e-12 {
            log::warn!(
                "circulant embedding (n = {n}, H = {hurst}): clipped negative eigenvalue mass {clipped_mass:.3e}"
            );
        }
        Ok(Self { grid, hurst, sqrt_eigs, clipped_mass, fft })
    }
}

impl FbmSampler for CirculantSampler {
    fn grid(&self) -> TimeGrid {
        self.grid
    }

    fn hurst(&self) -> f64 {
        self.hurst
    }

    fn sample_fgn(&self, rng: &mut ChaCha12Rng) -> Vec<f64> {
        let n = self.grid.n_steps();
        let m = 2 * n;
        let mf = m as f64;
        let mut z = vec![Complex64::default(); m];
        let z0: f64 = rng.sample(StandardNormal);
        z[0] = Complex64::new(self.sqrt_eigs[0] / mf.sqrt() * z0, 0.0);
        let zh: f64 = rng.sample(StandardNormal);
        z[n] = Complex64::new(self.sqrt_eigs[n] / mf.sqrt() * zh, 0.0);
        for j in 1..n {
            let u: f64 = rng.sample(StandardNormal);
            let v: f64 = rng.sample(StandardNormal);
            let a = self.sqrt_eigs[j] / (2.0 * mf).sqrt();
            z[j] = Complex64::new(a * u, a * v);
            z[m - j] = Complex64::new(a * u, -a * v);
        }
        self.fft.process(&mut z);
        z[..n].iter().map(|c| c.re).collect()
    }
}

/// One-shot exact sample (builds the Cholesky factor each call; prefer
/// [`CholeskySampler`] for ensembles).
pub fn sample_fbm_cholesky(grid: TimeGrid, hurst: f64, d: usize, rng: &mut ChaCha12Rng) -> Result<FbmPath> {
    Ok(CholeskySampler::new(grid, hurst)?.sample(d, rng))
}

/// One-shot circulant-embedding sample.
pub fn sample_fbm_circulant(grid: TimeGrid, hurst: f64, d: usize, rng: &mut ChaCha12Rng) -> Result<FbmPath> {
    Ok(CirculantSampler::new(grid, hurst)?.sample(d, rng))
}

/// Discrete Hölder seminorm: `max_{s != t} |f_t - f_s| / |t - s|^gamma` over
/// all grid pairs.
pub fn holder_seminorm(points: &[(f64, f64)], gamma: f64) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Domain("holder_seminorm needs at least 2 points".into()));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Domain(format!("gamma must lie in (0,1], got {gamma}")));
    }
    let mut sup: f64 = 0.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let (s, fs) = points[i];
            let (t, ft) = points[j];
            if s == t {
                continue;
            }
            sup = sup.max((ft - fs).abs() / (t - s).abs().powf(gamma));
        }
    }
    Ok(sup)
}
