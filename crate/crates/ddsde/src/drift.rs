//! Declarative measure-dependent drifts `B_t(x, mu)`, their frozen effective
//! fields `b^mu_t = B_t(., mu_t)`, and the admissibility gates for the two
//! regularity regimes.
//!
//! Supported drift shapes:
//! - `Zero`;
//! - `Convolutional`: `B_t(., mu) = h_t (kernel * mu + external)`;
//! - `BilinearKernel`: `B_t(., mu) = h_t int b(., y) mu(dy)` with `b` a
//!   band-limited kernel in doubled coordinates;
//! - `Statistic`: `B_t(., mu) = h_t base(. - <phi, mu>)` for `phi` the mean
//!   or a moment norm.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Mode, SpectralField};
use crate::measure::{wasserstein_1d, wasserstein_exact, EmpiricalMeasure};

/// Statistic entering the `Statistic` drift variant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    Mean,
    /// Translation by `(moment_norm(mu, p), 0, ..., 0)`.
    Moment(f64),
}

/// Nonnegative scalar time profile `h_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeProfile {
    Constant(f64),
    /// Values tabulated on a uniform grid over `[0, horizon]`, linearly
    /// interpolated.
    Tabulated { horizon: f64, values: Vec<f64> },
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant(c) => *c,
            TimeProfile::Tabulated { horizon, values } => {
                let n = values.len();
                if n == 1 {
                    return values[0];
                }
                let u = (t / horizon).clamp(0.0, 1.0) * (n - 1) as f64;
                let i = (u.floor() as usize).min(n - 2);
                let frac = u - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            TimeProfile::Constant(c) => *c >= 0.0,
            TimeProfile::Tabulated { horizon, values } => {
                *horizon > 0.0 && !values.is_empty() && values.iter().all(|v| *v >= 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Contract("time profile must be nonnegative".into()))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum DriftVariant {
    Zero,
    Convolutional {
        kernel: SpectralField,
        external: SpectralField,
    },
    /// Kernel in doubled coordinates: a `2 dim`-dimensional field sliced in
    /// its second argument against the measure. Only `dim = 1` is supported.
    BilinearKernel { kernel: SpectralField },
    Statistic {
        base: SpectralField,
        statistic: Statistic,
    },
}

/// Declarative description of `B_t(x, mu)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub dim: usize,
    pub period: f64,
    pub variant: DriftVariant,
    pub time_profile: TimeProfile,
}

impl DriftSpec {
    pub fn zero(dim: usize, period: f64) -> Self {
        Self { dim, period, variant: DriftVariant::Zero, time_profile: TimeProfile::Constant(1.0) }
    }

    pub fn convolutional(kernel: SpectralField, external: SpectralField, time_profile: TimeProfile) -> Result<Self> {
        let spec = Self {
            dim: kernel.dim,
            period: kernel.period,
            variant: DriftVariant::Convolutional { kernel, external },
            time_profile,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.time_profile.validate()?;
        match &self.variant {
            DriftVariant::Zero => Ok(()),
            DriftVariant::Convolutional { kernel, external } => {
                if kernel.dim != self.dim || external.dim != self.dim {
                    return Err(Error::Contract("convolutional drift members must share the ambient dimension".into()));
                }
                if kernel.period != self.period || external.period != self.period {
                    return Err(Error::Contract("convolutional drift members must share the period".into()));
                }
                if kernel.output_dim != self.dim || external.output_dim != self.dim {
                    return Err(Error::Contract("drift fields must be vector fields in the ambient dimension".into()));
                }
                Ok(())
            }
            DriftVariant::BilinearKernel { kernel } => {
                if self.dim != 1 {
                    return Err(Error::Contract("bilinear-kernel drifts are supported in dimension 1 only".into()));
                }
                if kernel.dim != 2 || kernel.output_dim != 1 || kernel.period != self.period {
                    return Err(Error::Contract(
                        "bilinear kernel must be a scalar field in doubled coordinates with the ambient period".into(),
                    ));
                }
                Ok(())
            }
            DriftVariant::Statistic { base, .. } => {
                if base.dim != self.dim || base.output_dim != self.dim || base.period != self.period {
                    return Err(Error::Contract("statistic drift base must match the ambient dimension and period".into()));
                }
                Ok(())
            }
        }
    }

    /// The frozen field `b^mu_t = B_t(., mu)`.
    pub fn effective_field(&self, mu: &EmpiricalMeasure, t: f64) -> Result<SpectralField> {
        if mu.dim() != self.dim {
            return Err(Error::Contract(format!(
                "measure dimension {} does not match drift dimension {}",
                mu.dim(),
                self.dim
            )));
        }
        let h = self.time_profile.value(t);
        let field = match &self.variant {
            DriftVariant::Zero => SpectralField::zero(self.dim, self.period, self.dim),
            DriftVariant::Convolutional { kernel, external } => {
                kernel.convolved_with(mu.points(), mu.weights())?.add(external)?
            }
            DriftVariant::BilinearKernel { kernel } => slice_bilinear(kernel, mu),
            DriftVariant::Statistic { base, statistic } => {
                let shift = match statistic {
                    Statistic::Mean => mu.mean(),
                    Statistic::Moment(p) => {
                        let mut s = vec![0.0; self.dim];
                        s[0] = mu.moment_norm(*p)?;
                        s
                    }
                };
                base.translate(&shift)
            }
        };
        Ok(field.scale(h))
    }
}

/// `sum_j w_j b(., y_j)` for a kernel in doubled coordinates (ambient d = 1).
fn slice_bilinear(kernel: &SpectralField, mu: &EmpiricalMeasure) -> SpectralField {
    use std::collections::BTreeMap;
    let omega = kernel.omega();
    let mut coeffs: BTreeMap<i64, Complex64> = BTreeMap::new();
    for block in &kernel.blocks {
        for mode in &block.modes {
            let (k1, k2) = (mode.k[0], mode.k[1]);
            let mut chf = Complex64::default();
            for (p, &w) in mu.points().iter().zip(mu.weights()) {
                chf += w * Complex64::from_polar(1.0, omega * k2 as f64 * p[0].rem_euclid(kernel.period));
            }
            *coeffs.entry(k1).or_default() += mode.coeff[0] * chf;
        }
    }
    let modes = coeffs
        .into_iter()
        .map(|(k, c)| Mode { k: vec![k], coeff: vec![c] })
        .collect();
    SpectralField::from_modes(1, kernel.period, 1, modes)
}

/// Regularity-regime parameters `(H, alpha, q, p, beta)`; `q = None` means
/// `q = infinity`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub hurst: f64,
    pub alpha: f64,
    #[serde(default)]
    pub q: Option<f64>,
    pub p: f64,
    #[serde(default)]
    pub beta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `H > 1/2`, Hölder drift class, gate `alpha > 1 - 1/(2H)`.
    HolderClass,
    /// `H <= 1/2`, Besov drift class, gate `alpha > 1 + 1/(Hq) - 1/(2H)`.
    BesovClass,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeDecision {
    pub regime: Regime,
    pub threshold: f64,
    pub margin: f64,
    pub admissible: bool,
}

/// Which well-posedness regime (if any) the parameters fall into, with the
/// margin `alpha - threshold`.
pub fn regime_gate(params: &RegimeParams) -> RegimeDecision {
    let h = params.hurst;
    if h > 0.5 {
        let threshold = 1.0 - 1.0 / (2.0 * h);
        let margin = params.alpha - threshold;
        RegimeDecision { regime: Regime::HolderClass, threshold, margin, admissible: margin > 0.0 }
    } else {
        let inv_q = match params.q {
            None => 0.0,
            Some(q) => 1.0 / q,
        };
        let threshold = 1.0 + inv_q / h - 1.0 / (2.0 * h);
        let margin = params.alpha - threshold;
        let q_ok = params.q.map_or(true, |q| q > 2.0);
        RegimeDecision { regime: Regime::BesovClass, threshold, margin, admissible: q_ok && margin > 0.0 }
    }
}

/// Empirical admissibility certificate: suprema over probe pairs of the two
/// defining ratios of the drift classes.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClassReport {
    /// `sup besov_norm(B_t(mu), alpha) / h_t`.
    pub norm_ratio: f64,
    /// `sup ||B_t(mu) - B_t(nu)||_{B^{alpha-1}} / (h_t d_p(mu, nu))`.
    pub lipschitz_ratio: f64,
    /// Fitted constant `||B||`: the larger of the two ratios.
    pub fitted_constant: f64,
    pub n_probes: usize,
}

/// Probe the drift-class conditions over a family of measure pairs.
pub fn check_class(
    drift: &DriftSpec,
    params: &RegimeParams,
    probes: &[(EmpiricalMeasure, EmpiricalMeasure)],
    t_samples: &[f64],
) -> Result<ClassReport> {
    if probes.len() < 10 {
        return Err(Error::Contract(format!("check_class needs at least 10 probe pairs, got {}", probes.len())));
    }
    let mut norm_ratio: f64 = 0.0;
    let mut lipschitz_ratio: f64 = 0.0;
    for (mu, nu) in probes {
        let dp = if drift.dim == 1 {
            wasserstein_1d(mu, nu, params.p)?
        } else {
            wasserstein_exact(mu, nu, params.p)?
        };
        for &t in t_samples {
            let h = drift.time_profile.value(t);
            let b_mu = drift.effective_field(mu, t)?;
            let b_nu = drift.effective_field(nu, t)?;
            let norm = b_mu.besov_norm(params.alpha);
            if norm > 0.0 {
                norm_ratio = norm_ratio.max(norm / h);
            }
            if dp > 0.0 {
                let diff = b_mu.sub(&b_nu)?.besov_norm(params.alpha - 1.0);
                if diff > 0.0 {
                    lipschitz_ratio = lipschitz_ratio.max(diff / (h * dp));
                }
            }
        }
    }
    Ok(ClassReport {
        norm_ratio,
        lipschitz_ratio,
        fitted_constant: norm_ratio.max(lipschitz_ratio),
        n_probes: probes.len(),
    })
}

/// Standard probe family: point masses, Gaussian clouds at several scales,
/// and two-point pairs at distances from 1e-3 to 1.
pub fn standard_probe_pairs(dim: usize, n_pairs: usize, seed: u64) -> Vec<(EmpiricalMeasure, EmpiricalMeasure)> {
    use rand::Rng;
    use rand_distr::StandardNormal;

    let mut out = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        let mut r = crate::rng::stream(seed, &[crate::rng::role::PROBE, i as u64]);
        let pair = match i % 3 {
            0 => {
                // Point masses at random positions.
                let a: Vec<f64> = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
                let b: Vec<f64> = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
                (EmpiricalMeasure::dirac(a), EmpiricalMeasure::dirac(b))
            }
            1 => {
                // Gaussian clouds at scales from 0.1 to 2.
                let scale = 0.1 * 20f64.powf(r.gen_range(0.0..1.0));
                let cloud = |r: &mut rand_chacha::ChaCha12Rng| {
                    let pts = (0..16)
                        .map(|_| (0..dim).map(|_| scale * r.sample::<f64, _>(StandardNormal)).collect())
                        .collect();
                    EmpiricalMeasure::uniform(pts).unwrap()
                };
                (cloud(&mut r), cloud(&mut r))
            }
            _ => {
                // Adversarial two-point pairs at small distances.
                let dist = 1e-3 * 1000f64.powf(r.gen_range(0.0..1.0));
                let base: Vec<f64> = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
                let mut shifted = base.clone();
                shifted[0] += dist;
                (EmpiricalMeasure::dirac(base), EmpiricalMeasure::dirac(shifted))
            }
        };
        out.push(pair);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::synth_besov_field;
    use crate::rng;

    fn unit_kernel(seed: u64, alpha: f64) -> SpectralField {
        synth_besov_field(alpha, 5, 1, &mut rng::stream(seed, &[rng::role::FIELD])).unwrap()
    }

    #[test]
    fn zero_drift_gives_zero_field() {
        let drift = DriftSpec::zero(1, 2.0 * std::f64::consts::PI);
        let mu = EmpiricalMeasure::dirac(vec![0.4]);
        let f = drift.effective_field(&mu, 0.3).unwrap();
        assert!(f.is_zero());
    }

    #[test]
    fn convolutional_with_zero_kernel_is_external() {
        let external = unit_kernel(1, 0.5);
        let kernel = SpectralField::zero(1, external.period, 1);
        let drift = DriftSpec::convolutional(kernel, external.clone(), TimeProfile::Constant(1.0)).unwrap();
        for mu in [EmpiricalMeasure::dirac(vec![0.0]), EmpiricalMeasure::dirac(vec![1.7])] {
            let f = drift.effective_field(&mu, 0.0).unwrap();
            for x in [0.1, 2.0] {
                assert!((f.evaluate(&[x])[0] - external.evaluate(&[x])[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn statistic_mean_matches_convolution_with_dirac() {
        let base = unit_kernel(2, 0.5);
        let y = 0.8;
        let stat_drift = DriftSpec {
            dim: 1,
            period: base.period,
            variant: DriftVariant::Statistic { base: base.clone(), statistic: Statistic::Mean },
            time_profile: TimeProfile::Constant(1.0),
        };
        let conv_drift = DriftSpec::convolutional(
            base.clone(),
            SpectralField::zero(1, base.period, 1),
            TimeProfile::Constant(1.0),
        )
        .unwrap();
        let mu = EmpiricalMeasure::dirac(vec![y]);
        let a = stat_drift.effective_field(&mu, 0.0).unwrap();
        let b = conv_drift.effective_field(&mu, 0.0).unwrap();
        for x in [0.0, 0.5, 3.0] {
            assert!((a.evaluate(&[x])[0] - b.evaluate(&[x])[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn bilinear_slice_matches_direct_integration() {
        let kernel = crate::field::synth_besov_field_with(
            0.5,
            3,
            2,
            1,
            2.0 * std::f64::consts::PI,
            &mut rng::stream(3, &[rng::role::FIELD]),
        )
        .unwrap();
        let drift = DriftSpec {
            dim: 1,
            period: kernel.period,
            variant: DriftVariant::BilinearKernel { kernel: kernel.clone() },
            time_profile: TimeProfile::Constant(1.0),
        };
        let mu = EmpiricalMeasure::uniform(vec![vec![0.3], vec![1.1], vec![-0.4]]).unwrap();
        let f = drift.effective_field(&mu, 0.0).unwrap();
        for x in [0.0, 0.7, 2.5] {
            let direct: f64 = mu
                .points()
                .iter()
                .zip(mu.weights())
                .map(|(p, &w)| w * kernel.evaluate(&[x, p[0]])[0])
                .sum();
            assert!((f.evaluate(&[x])[0] - direct).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn time_profile_homogeneity() {
        let kernel = unit_kernel(4, 0.5);
        let mu = EmpiricalMeasure::dirac(vec![0.2]);
        for c in [0.5, 2.0] {
            let d1 = DriftSpec::convolutional(
                kernel.clone(),
                SpectralField::zero(1, kernel.period, 1),
                TimeProfile::Constant(1.0),
            )
            .unwrap();
            let dc = DriftSpec::convolutional(
                kernel.clone(),
                SpectralField::zero(1, kernel.period, 1),
                TimeProfile::Constant(c),
            )
            .unwrap();
            let a = d1.effective_field(&mu, 0.1).unwrap();
            let b = dc.effective_field(&mu, 0.1).unwrap();
            for x in [0.0, 1.2] {
                assert!((c * a.evaluate(&[x])[0] - b.evaluate(&[x])[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn translation_covariance_of_convolutional_drift() {
        let kernel = unit_kernel(5, 0.5);
        let drift = DriftSpec::convolutional(
            kernel.clone(),
            SpectralField::zero(1, kernel.period, 1),
            TimeProfile::Constant(1.0),
        )
        .unwrap();
        let mu = EmpiricalMeasure::uniform(vec![vec![0.1], vec![0.9]]).unwrap();
        let h = 0.37;
        let shifted = drift.effective_field(&mu.translate(&[h]), 0.0).unwrap();
        let base = drift.effective_field(&mu, 0.0).unwrap();
        for x in [0.0, 0.6, 2.0] {
            assert!((shifted.evaluate(&[x + h])[0] - base.evaluate(&[x])[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn regime_gate_examples() {
        let d = regime_gate(&RegimeParams { hurst: 0.25, alpha: -0.5, q: None, p: 1.0, beta: None });
        assert_eq!(d.regime, Regime::BesovClass);
        assert!(d.admissible);
        assert!((d.threshold - (-1.0)).abs() < 1e-12);
        assert!((d.margin - 0.5).abs() < 1e-12);

        let d = regime_gate(&RegimeParams { hurst: 1.0 / 3.0, alpha: 0.2, q: Some(4.0), p: 1.0, beta: None });
        assert!(!d.admissible);
        assert!((d.threshold - 0.25).abs() < 1e-12);

        let d = regime_gate(&RegimeParams { hurst: 0.75, alpha: 0.4, q: None, p: 1.0, beta: Some(0.75) });
        assert_eq!(d.regime, Regime::HolderClass);
        assert!(d.admissible);
        assert!((d.margin - (0.4 - 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn regime_gate_monotone() {
        // Increasing alpha or q never flips admissible -> inadmissible.
        for h in [0.2, 0.4, 0.5, 0.7] {
            for a10 in -10..10 {
                let alpha = a10 as f64 / 10.0;
                let base = regime_gate(&RegimeParams { hurst: h, alpha, q: Some(4.0), p: 1.0, beta: None });
                let up_alpha = regime_gate(&RegimeParams { hurst: h, alpha: alpha + 0.3, q: Some(4.0), p: 1.0, beta: None });
                let up_q = regime_gate(&RegimeParams { hurst: h, alpha, q: Some(8.0), p: 1.0, beta: None });
                if base.admissible {
                    assert!(up_alpha.admissible);
                    assert!(up_q.admissible);
                }
            }
        }
    }

    #[test]
    fn check_class_zero_drift_is_zero() {
        let drift = DriftSpec::zero(1, 2.0 * std::f64::consts::PI);
        let params = RegimeParams { hurst: 0.3, alpha: -0.5, q: None, p: 1.0, beta: None };
        let probes = standard_probe_pairs(1, 12, 77);
        let rep = check_class(&drift, &params, &probes, &[0.0, 0.5]).unwrap();
        assert_eq!(rep.norm_ratio, 0.0);
        assert_eq!(rep.lipschitz_ratio, 0.0);
    }

    #[test]
    fn check_class_requires_enough_probes() {
        let drift = DriftSpec::zero(1, 2.0 * std::f64::consts::PI);
        let params = RegimeParams { hurst: 0.3, alpha: -0.5, q: None, p: 1.0, beta: None };
        let probes = standard_probe_pairs(1, 4, 77);
        assert!(check_class(&drift, &params, &probes, &[0.0]).is_err());
    }

    #[test]
    fn check_class_convolutional_lipschitz_bounded() {
        let alpha = 0.5;
        let kernel = unit_kernel(6, alpha);
        let drift = DriftSpec::convolutional(
            kernel.clone(),
            SpectralField::zero(1, kernel.period, 1),
            TimeProfile::Constant(1.0),
        )
        .unwrap();
        let params = RegimeParams { hurst: 0.3, alpha, q: None, p: 1.0, beta: None };
        let probes = standard_probe_pairs(1, 30, 91);
        let rep = check_class(&drift, &params, &probes, &[0.0]).unwrap();
        assert!(rep.lipschitz_ratio.is_finite() && rep.lipschitz_ratio > 0.0);
        // Stable under doubling the probe family.
        let more = standard_probe_pairs(1, 60, 91);
        let rep2 = check_class(&drift, &params, &more, &[0.0]).unwrap();
        assert!(rep2.lipschitz_ratio <= 2.0 * rep.lipschitz_ratio + 1e-9);
    }
}
