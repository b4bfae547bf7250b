//! Spectral fields on a periodic domain with Littlewood-Paley block structure.
//!
//! A (possibly distributional) vector field is stored as finitely many Fourier
//! modes grouped into dyadic blocks: block `n >= 0` holds the frequencies with
//! `|k| in (2^{n-1}, 2^n]` (integer frequency magnitude), block `-1` the
//! constant mode. Besov norms `B^alpha_{inf,inf}` are computed block-wise as
//! `sup_n 2^{alpha n} ||Delta_n f||_inf`, with the supremum sampled on a grid
//! well above the Nyquist rate of the top block.
//!
//! The domain is a torus of period `L` rather than all of `R^d`; experiments
//! pick `L` much larger than the diffusion range so periodization artifacts
//! stay negligible.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid oversampling relative to the top-block frequency used for sup norms
/// (samples per cycle of the fastest mode).
const SUP_SAMPLES_PER_CYCLE: usize = 32;

/// Littlewood-Paley level of an integer frequency vector: `-1` for the zero
/// mode, otherwise the unique `n >= 0` with `4^{n-1} < |k|^2 <= 4^n`.
pub fn block_level(k: &[i64]) -> i32 {
    let m2: i64 = k.iter().map(|x| x * x).sum();
    if m2 == 0 {
        return -1;
    }
    let mut n = 0;
    while (1i64 << (2 * n)) < m2 {
        n += 1;
    }
    n as i32
}

/// A single Fourier mode: integer frequency vector and one complex coefficient
/// per output component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "ModeRepr", into = "ModeRepr")]
pub struct Mode {
    pub k: Vec<i64>,
    pub coeff: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct ModeRepr {
    k: Vec<i64>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl From<ModeRepr> for Mode {
    fn from(r: ModeRepr) -> Self {
        let coeff = r.re.iter().zip(&r.im).map(|(&re, &im)| Complex64::new(re, im)).collect();
        Mode { k: r.k, coeff }
    }
}

impl From<Mode> for ModeRepr {
    fn from(m: Mode) -> Self {
        ModeRepr {
            k: m.k,
            re: m.coeff.iter().map(|c| c.re).collect(),
            im: m.coeff.iter().map(|c| c.im).collect(),
        }
    }
}

/// One dyadic frequency block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpBlock {
    pub level: i32,
    pub modes: Vec<Mode>,
}

/// Band-limited realization of a vector field (or distribution) on the torus
/// of period `period` in dimension `dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub dim: usize,
    pub period: f64,
    pub output_dim: usize,
    pub blocks: Vec<LpBlock>,
}

impl SpectralField {
    pub fn zero(dim: usize, period: f64, output_dim: usize) -> Self {
        Self { dim, period, output_dim, blocks: Vec::new() }
    }

    /// Constant field (a single block `-1` mode).
    pub fn constant(dim: usize, period: f64, value: &[f64]) -> Self {
        let mode = Mode {
            k: vec![0; dim],
            coeff: value.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        };
        Self::from_modes(dim, period, value.len(), vec![mode])
    }

    /// Build a field from raw modes: groups them into dyadic blocks, merges
    /// duplicate frequencies, sorts deterministically, drops zero coefficients.
    pub fn from_modes(dim: usize, period: f64, output_dim: usize, modes: Vec<Mode>) -> Self {
        use std::collections::BTreeMap;
        let mut by_key: BTreeMap<(i32, Vec<i64>), Vec<Complex64>> = BTreeMap::new();
        for m in modes {
            debug_assert_eq!(m.k.len(), dim);
            debug_assert_eq!(m.coeff.len(), output_dim);
            let level = block_level(&m.k);
            let entry = by_key.entry((level, m.k)).or_insert_with(|| vec![Complex64::default(); output_dim]);
            for (acc, c) in entry.iter_mut().zip(&m.coeff) {
                *acc += c;
            }
        }
        let mut blocks: Vec<LpBlock> = Vec::new();
        for ((level, k), coeff) in by_key {
            if coeff.iter().all(|c| c.norm_sqr() == 0.0) {
                continue;
            }
            match blocks.last_mut() {
                Some(b) if b.level == level => b.modes.push(Mode { k, coeff }),
                _ => blocks.push(LpBlock { level, modes: vec![Mode { k, coeff }] }),
            }
        }
        Self { dim, period, output_dim, blocks }
    }

    pub fn max_level(&self) -> i32 {
        self.blocks.iter().map(|b| b.level).max().unwrap_or(-1)
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.is_empty()
    }

    fn all_modes(&self) -> impl Iterator<Item = &Mode> {
        self.blocks.iter().flat_map(|b| b.modes.iter())
    }

    /// Angular frequency of the fundamental mode.
    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }

    /// Exact trigonometric-sum evaluation; periodic with period `period` in
    /// each coordinate.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        let omega = self.omega();
        let mut out = vec![0.0; self.output_dim];
        for mode in self.all_modes() {
            let mut phase = 0.0;
            for (ki, xi) in mode.k.iter().zip(x) {
                phase += *ki as f64 * xi.rem_euclid(self.period);
            }
            let e = Complex64::from_polar(1.0, omega * phase);
            for (o, c) in out.iter_mut().zip(&mode.coeff) {
                *o += (c * e).re;
            }
        }
        out
    }

    /// Drop every block above `level_cut` (sharp dyadic frequency cutoff).
    pub fn mollify(&self, level_cut: i32) -> Self {
        Self {
            dim: self.dim,
            period: self.period,
            output_dim: self.output_dim,
            blocks: self.blocks.iter().filter(|b| b.level <= level_cut).cloned().collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map_coeffs(|_k, c| c * factor)
    }

    /// Apply a frequency-dependent multiplier to every coefficient.
    fn map_coeffs(&self, f: impl Fn(&[i64], Complex64) -> Complex64) -> Self {
        let mut out = self.clone();
        for b in &mut out.blocks {
            for m in &mut b.modes {
                for c in &mut m.coeff {
                    *c = f(&m.k, *c);
                }
            }
        }
        out
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.output_dim != other.output_dim || self.period != other.period {
            return Err(Error::Contract(format!(
                "incompatible fields: (dim {}, out {}, L {}) vs (dim {}, out {}, L {})",
                self.dim, self.output_dim, self.period, other.dim, other.output_dim, other.period
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let modes = self.all_modes().chain(other.all_modes()).cloned().collect();
        Ok(Self::from_modes(self.dim, self.period, self.output_dim, modes))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Translate by `h`: the result evaluated at `x` equals `self` at `x - h`.
    pub fn translate(&self, h: &[f64]) -> Self {
        let omega = self.omega();
        self.map_coeffs(|k, c| {
            let phase: f64 = k.iter().zip(h).map(|(&ki, &hi)| ki as f64 * hi).sum();
            c * Complex64::from_polar(1.0, -omega * phase)
        })
    }

    /// Convolve against a weighted point cloud: each coefficient is multiplied
    /// by the empirical characteristic value `sum_j w_j e^{-i omega k . x_j}`.
    /// Block structure is preserved.
    pub fn convolved_with(&self, points: &[Vec<f64>], weights: &[f64]) -> Result<Self> {
        if points.iter().any(|p| p.len() != self.dim) {
            return Err(Error::Contract("measure dimension does not match field dimension".into()));
        }
        let omega = self.omega();
        let period = self.period;
        Ok(self.map_coeffs(|k, c| {
            let mut chf = Complex64::default();
            for (p, &w) in points.iter().zip(weights) {
                let phase: f64 = k.iter().zip(p).map(|(&ki, &xi)| ki as f64 * xi.rem_euclid(period)).sum();
                chf += w * Complex64::from_polar(1.0, -omega * phase);
            }
            c * chf
        }))
    }

    /// Spatial derivative along coordinate `axis` (coefficient-wise `i omega k`).
    pub fn derivative(&self, axis: usize) -> Self {
        let omega = self.omega();
        self.map_coeffs(|k, c| c * Complex64::new(0.0, omega * k[axis] as f64))
    }

    /// Side length of the sampling grid used for sup norms.
    fn norm_grid_size(&self) -> usize {
        let top = self.max_level().max(0) as u32;
        (SUP_SAMPLES_PER_CYCLE << top).max(64)
    }

    /// Pointwise Euclidean norms of one block sampled on the standard grid.
    fn block_grid_norms(&self, block: &LpBlock) -> Vec<f64> {
        let n = self.norm_grid_size();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_inverse(n);
        match self.dim {
            1 => {
                let mut norms = vec![0.0; n];
                for o in 0..self.output_dim {
                    let mut spectrum = vec![Complex64::default(); n];
                    for m in &block.modes {
                        let idx = (m.k[0].rem_euclid(n as i64)) as usize;
                        spectrum[idx] += m.coeff[o];
                    }
                    fft.process(&mut spectrum);
                    for (acc, v) in norms.iter_mut().zip(&spectrum) {
                        *acc += v.re * v.re;
                    }
                }
                norms.iter_mut().for_each(|v| *v = v.sqrt());
                norms
            }
            2 => {
                let mut norms = vec![0.0; n * n];
                for o in 0..self.output_dim {
                    let mut spectrum = vec![Complex64::default(); n * n];
                    for m in &block.modes {
                        let i = (m.k[0].rem_euclid(n as i64)) as usize;
                        let j = (m.k[1].rem_euclid(n as i64)) as usize;
                        spectrum[i * n + j] += m.coeff[o];
                    }
                    for row in spectrum.chunks_mut(n) {
                        fft.process(row);
                    }
                    let mut col = vec![Complex64::default(); n];
                    for j in 0..n {
                        for i in 0..n {
                            col[i] = spectrum[i * n + j];
                        }
                        fft.process(&mut col);
                        for i in 0..n {
                            spectrum[i * n + j] = col[i];
                        }
                    }
                    for (acc, v) in norms.iter_mut().zip(&spectrum) {
                        *acc += v.re * v.re;
                    }
                }
                norms.iter_mut().for_each(|v| *v = v.sqrt());
                norms
            }
            d => panic!("sup norms supported in dimension 1 and 2, got {d}"),
        }
    }

    /// Grid-sampled sup norm of a single block.
    pub fn block_sup_norm(&self, block: &LpBlock) -> f64 {
        if block.level == -1 {
            // Constant mode: exact.
            let m = &block.modes[0];
            return m.coeff.iter().map(|c| c.re * c.re).sum::<f64>().sqrt();
        }
        self.block_grid_norms(block).into_iter().fold(0.0, f64::max)
    }

    /// Besov norm `sup_n 2^{alpha n} ||Delta_n f||_inf`.
    pub fn besov_norm(&self, alpha: f64) -> f64 {
        self.blocks
            .iter()
            .map(|b| 2f64.powf(alpha * b.level as f64) * self.block_sup_norm(b))
            .fold(0.0, f64::max)
    }

    /// Level at which the Besov sup is attained (None for the zero field).
    pub fn besov_argmax_level(&self, alpha: f64) -> Option<i32> {
        self.blocks
            .iter()
            .map(|b| (b.level, 2f64.powf(alpha * b.level as f64) * self.block_sup_norm(b)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(l, _)| l)
    }

    /// Grid-sampled sup norm of the whole field.
    pub fn grid_sup_norm(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let whole = LpBlock {
            level: 0,
            modes: self.all_modes().cloned().collect(),
        };
        self.block_grid_norms(&whole).into_iter().fold(0.0, f64::max)
    }

    /// Values of a scalar 1-D field on the standard norm grid (for seminorm
    /// diagnostics).
    pub fn grid_values_1d(&self) -> Result<Vec<(f64, f64)>> {
        if self.dim != 1 || self.output_dim != 1 {
            return Err(Error::Contract("grid_values_1d requires a scalar 1-D field".into()));
        }
        let n = self.norm_grid_size();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_inverse(n);
        let mut spectrum = vec![Complex64::default(); n];
        for m in self.all_modes() {
            let idx = (m.k[0].rem_euclid(n as i64)) as usize;
            spectrum[idx] += m.coeff[0];
        }
        fft.process(&mut spectrum);
        let dx = self.period / n as f64;
        Ok(spectrum.iter().enumerate().map(|(j, v)| (j as f64 * dx, v.re)).collect())
    }
}

/// Synthesize a random field with prescribed Besov regularity: block `n`
/// carries random phases and is rescaled so `||Delta_n f||_inf = 2^{-alpha n}`
/// exactly (on the norm grid), hence `besov_norm(f, alpha) = 1`.
pub fn synth_besov_field(alpha: f64, max_level: i32, d: usize, rng: &mut ChaCha12Rng) -> Result<SpectralField> {
    synth_besov_field_with(alpha, max_level, d, d, 2.0 * std::f64::consts::PI, rng)
}

/// Full-control variant of [`synth_besov_field`].
pub fn synth_besov_field_with(
    alpha: f64,
    max_level: i32,
    d: usize,
    output_dim: usize,
    period: f64,
    rng: &mut ChaCha12Rng,
) -> Result<SpectralField> {
    if max_level < 1 {
        return Err(Error::Domain("max_level must be >= 1".into()));
    }
    if d != 1 && d != 2 {
        return Err(Error::Domain(format!("supported dimensions are 1 and 2, got {d}")));
    }
    let mut modes = Vec::new();
    for n in 0..=max_level {
        for k in annulus_canonical(d, n) {
            let coeff: Vec<Complex64> = (0..output_dim)
                .map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * std::f64::consts::PI)))
                .collect();
            let neg: Vec<i64> = k.iter().map(|&ki| -ki).collect();
            modes.push(Mode { k: neg, coeff: coeff.iter().map(|c| c.conj()).collect() });
            modes.push(Mode { k, coeff });
        }
    }
    let mut field = SpectralField::from_modes(d, period, output_dim, modes);
    // Rescale each block so its grid sup norm is exactly 2^{-alpha n}.
    let scales: Vec<(i32, f64)> = field
        .blocks
        .iter()
        .map(|b| {
            let sup = field.block_sup_norm(b);
            (b.level, 2f64.powf(-alpha * b.level as f64) / sup)
        })
        .collect();
    for (block, (level, s)) in field.blocks.iter_mut().zip(scales) {
        debug_assert_eq!(block.level, level);
        for m in &mut block.modes {
            for c in &mut m.coeff {
                *c *= s;
            }
        }
    }
    Ok(field)
}

/// Canonical (positive) half of the integer frequencies in the dyadic annulus
/// at level `n`; the conjugate partner `-k` is added by the caller.
fn annulus_canonical(d: usize, n: i32) -> Vec<Vec<i64>> {
    let hi = 1i64 << n;
    let lo2 = if n == 0 { 0 } else { 1i64 << (2 * (n - 1)) };
    let hi2 = 1i64 << (2 * n);
    match d {
        1 => ((lo2 as f64).sqrt() as i64 + 1..=hi).filter(|k| k * k > lo2).map(|k| vec![k]).collect(),
        2 => {
            let mut out = Vec::new();
            for k1 in -hi..=hi {
                for k2 in -hi..=hi {
                    let m2 = k1 * k1 + k2 * k2;
                    if m2 > lo2 && m2 <= hi2 && (k1 > 0 || (k1 == 0 && k2 > 0)) {
                        out.push(vec![k1, k2]);
                    }
                }
            }
            out
        }
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn test_rng(seed: u64) -> ChaCha12Rng {
        rng::stream(seed, &[rng::role::FIELD])
    }

    #[test]
    fn block_level_boundaries() {
        assert_eq!(block_level(&[0]), -1);
        assert_eq!(block_level(&[1]), 0);
        assert_eq!(block_level(&[-1]), 0);
        assert_eq!(block_level(&[2]), 1);
        assert_eq!(block_level(&[3]), 2);
        assert_eq!(block_level(&[4]), 2);
        assert_eq!(block_level(&[5]), 3);
        assert_eq!(block_level(&[1, 1]), 1); // |k|^2 = 2 in (1, 4]
        assert_eq!(block_level(&[2, 0]), 1);
        assert_eq!(block_level(&[2, 1]), 2);
    }

    #[test]
    fn zero_field_norms() {
        let f = SpectralField::zero(1, 2.0 * std::f64::consts::PI, 1);
        assert_eq!(f.besov_norm(0.5), 0.0);
        assert_eq!(f.evaluate(&[0.3]), vec![0.0]);
    }

    #[test]
    fn constant_field_evaluates_everywhere() {
        let f = SpectralField::constant(1, 4.0, &[2.5]);
        for x in [0.0, 0.7, 3.9, -11.0] {
            assert!((f.evaluate(&[x])[0] - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_besov_norm() {
        // f(x) = c sin(2^j omega x): one conjugate mode pair in block j,
        // sup norm |c|, Besov norm |c| 2^{j alpha} within the grid tolerance.
        let l = 2.0 * std::f64::consts::PI;
        for j in [0i32, 3, 5] {
            let c = 1.7;
            let k = 1i64 << j;
            let modes = vec![
                Mode { k: vec![k], coeff: vec![Complex64::new(0.0, -c / 2.0)] },
                Mode { k: vec![-k], coeff: vec![Complex64::new(0.0, c / 2.0)] },
            ];
            let f = SpectralField::from_modes(1, l, 1, modes);
            for alpha in [-0.5, 0.0, 0.8] {
                let expected = c * 2f64.powf(alpha * j as f64);
                let got = f.besov_norm(alpha);
                assert!(
                    (got - expected).abs() < 0.01 * expected,
                    "j={j} alpha={alpha}: {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn evaluate_is_periodic() {
        let mut r = test_rng(3);
        let f = synth_besov_field(0.5, 4, 1, &mut r).unwrap();
        let l = f.period;
        for x in [0.1, 1.9, 4.4] {
            let a = f.evaluate(&[x])[0];
            let b = f.evaluate(&[x + l])[0];
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn synth_is_normalized_and_deterministic() {
        let f = synth_besov_field(0.5, 8, 1, &mut test_rng(9)).unwrap();
        assert!((f.besov_norm(0.5) - 1.0).abs() < 1e-10);
        let g = synth_besov_field(0.5, 8, 1, &mut test_rng(9)).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn synth_negative_alpha_block_bookkeeping() {
        let max_level = 6;
        let f = synth_besov_field(-0.3, max_level, 1, &mut test_rng(4)).unwrap();
        assert!((f.besov_norm(-0.3) - 1.0).abs() < 1e-10);
        let expected = 2f64.powf(0.3 * max_level as f64);
        assert!((f.besov_norm(0.0) - expected).abs() < 1e-8 * expected);
    }

    #[test]
    fn mollify_truncates_and_contracts_norm() {
        let mut r = test_rng(5);
        let f = synth_besov_field(-0.4, 8, 1, &mut r).unwrap();
        assert_eq!(f.mollify(20), f);
        let g = f.mollify(4);
        assert_eq!(g.max_level(), 4);
        assert!(g.besov_norm(-0.4) <= f.besov_norm(-0.4) + 1e-12);
    }

    #[test]
    fn mollify_tail_bound() {
        // ||f - mollify(f, N)||_{B^{alpha-delta}} <= 2^{-delta N} ||f||_{B^alpha}
        let alpha = 0.3;
        let delta = 0.2;
        let f = synth_besov_field(alpha, 9, 1, &mut test_rng(6)).unwrap();
        let norm = f.besov_norm(alpha);
        for cut in [3i32, 5, 7] {
            let tail = f.sub(&f.mollify(cut)).unwrap();
            let lhs = tail.besov_norm(alpha - delta);
            let rhs = 2f64.powf(-delta * cut as f64) * norm;
            assert!(lhs <= rhs * (1.0 + 1e-9), "cut {cut}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn mollified_gradient_growth_follows_bernstein() {
        // sup |grad mollify(f, N)| grows like 2^{N (1-alpha)}: the log-gradient
        // regression over N has slope 1-alpha within 0.1.
        let alpha = 0.4;
        let f = synth_besov_field(alpha, 9, 1, &mut test_rng(7)).unwrap();
        let cuts = [4i32, 5, 6, 7, 8, 9];
        let pts: Vec<(f64, f64)> = cuts
            .iter()
            .map(|&c| (c as f64 * 2f64.ln(), f.mollify(c).derivative(0).grid_sup_norm().ln()))
            .collect();
        let slope = ols_slope(&pts);
        let expected = 1.0 - alpha;
        assert!((slope - expected).abs() < 0.1, "slope {slope} vs {expected}");
    }

    fn ols_slope(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn block_partition_roundtrips() {
        let f = synth_besov_field(-0.2, 6, 1, &mut test_rng(8)).unwrap();
        let modes: Vec<Mode> = f.blocks.iter().flat_map(|b| b.modes.iter().cloned()).collect();
        let g = SpectralField::from_modes(f.dim, f.period, f.output_dim, modes);
        assert_eq!(f, g);
    }

    #[test]
    fn serialization_roundtrip_is_bit_exact() {
        let f = synth_besov_field(0.5, 5, 2, &mut test_rng(10)).unwrap();
        let text = serde_json::to_string(&f).unwrap();
        let g: SpectralField = serde_json::from_str(&text).unwrap();
        assert_eq!(f, g);
        assert_eq!(text, serde_json::to_string(&g).unwrap());
    }

    #[test]
    fn translate_shifts_evaluation() {
        let f = synth_besov_field(0.6, 5, 1, &mut test_rng(11)).unwrap();
        let g = f.translate(&[0.7]);
        for x in [0.0, 0.3, 2.2] {
            let a = g.evaluate(&[x + 0.7])[0];
            let b = f.evaluate(&[x])[0];
            assert!((a - b).abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn besov_norm_homogeneous(seed in 0u64..50, c in 0.1..8.0f64) {
            let f = synth_besov_field(0.5, 4, 1, &mut test_rng(seed)).unwrap();
            let a = f.scale(c).besov_norm(0.3);
            let b = c * f.besov_norm(0.3);
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + b));
        }

        #[test]
        fn besov_triangle_inequality(s1 in 0u64..30, s2 in 30u64..60) {
            let f = synth_besov_field(0.4, 5, 1, &mut test_rng(s1)).unwrap();
            let g = synth_besov_field(-0.2, 5, 1, &mut test_rng(s2)).unwrap();
            let alpha = 0.1;
            let sum = f.add(&g).unwrap().besov_norm(alpha);
            prop_assert!(sum <= f.besov_norm(alpha) + g.besov_norm(alpha) + 1e-9);
        }

        #[test]
        fn besov_norm_monotone_in_alpha(seed in 0u64..30) {
            // Constant-free synthesized fields: top block at level >= 1.
            let f = synth_besov_field(0.2, 5, 1, &mut test_rng(seed)).unwrap();
            let a = f.besov_norm(-0.3);
            let b = f.besov_norm(0.4);
            prop_assert!(a <= b + 1e-9);
        }
    }

    #[test]
    fn holder_besov_equivalence_for_positive_alpha() {
        // Grid Hölder seminorm comparable to the Besov norm across random
        // fields, alpha in (0,1).
        let alpha = 0.5;
        let mut ratios = Vec::new();
        for seed in 0..50u64 {
            let f = synth_besov_field(alpha, 5, 1, &mut test_rng(100 + seed)).unwrap();
            let pts = f.grid_values_1d().unwrap();
            // Subsample the grid to keep the O(n^2) seminorm cheap.
            let sub: Vec<(f64, f64)> = pts.iter().step_by(4).copied().collect();
            let sn = crate::fbm::holder_seminorm(&sub, alpha).unwrap();
            ratios.push(sn / f.besov_norm(alpha));
        }
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
        assert!(lo > 0.05 && hi < 50.0, "seminorm/norm ratios in [{lo}, {hi}]");
    }
}
