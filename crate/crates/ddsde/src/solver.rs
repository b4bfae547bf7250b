//! Frozen-drift Euler integration, the Picard map on measure flows, and the
//! interacting particle system.
//!
//! The distribution-dependent equation is solved as a fixed point of the
//! frozen-drift map: given a candidate measure flow, freeze the drift along
//! it, solve the resulting SDE for every particle, and read the next flow off
//! the ensemble. With common random numbers the same `(xi, W)` draws are
//! reused across iterations, so the measured gaps isolate the contraction of
//! the map itself.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::fbm::{FbmPath, FbmSampler, TimeGrid};
use crate::field::SpectralField;
use crate::measure::{EmpiricalMeasure, MeasureFlow};
use crate::rng::{self, role};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Cholesky,
    Circulant,
}

/// Integration settings shared by the frozen solver, the Picard iteration,
/// and the particle system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid: TimeGrid,
    pub n_particles: usize,
    /// Littlewood-Paley cutoff applied to every drift field before stepping;
    /// required when the field is rough (sup-level Besov mass at the top
    /// block).
    pub mollify_level: Option<i32>,
    pub seed: u64,
    pub sampler: SamplerKind,
    /// Reuse the same `(xi, W)` draws across Picard iterations.
    pub common_random_numbers: bool,
    /// Stride of the thinned grid used for `sup_t d_p`; defaults to
    /// `ceil(n_steps / 32)`.
    pub thin_stride: Option<usize>,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 1 {
            return Err(Error::Config("n_particles must be >= 1".into()));
        }
        Ok(())
    }

    pub fn thin(&self) -> usize {
        self.thin_stride.unwrap_or_else(|| self.grid.n_steps().div_ceil(32)).max(1)
    }
}

/// Initial-condition sampler for `xi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum InitialLaw {
    Dirac { point: Vec<f64> },
    Gaussian { mean: Vec<f64>, std: f64 },
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
}

impl InitialLaw {
    pub fn dim(&self) -> usize {
        match self {
            InitialLaw::Dirac { point } => point.len(),
            InitialLaw::Gaussian { mean, .. } => mean.len(),
            InitialLaw::Uniform { lo, .. } => lo.len(),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            InitialLaw::Dirac { .. } => "dirac",
            InitialLaw::Gaussian { .. } => "gaussian",
            InitialLaw::Uniform { .. } => "uniform",
        }
    }

    pub fn sample(&self, rng: &mut rand_chacha::ChaCha12Rng) -> Vec<f64> {
        use rand::Rng;
        use rand_distr::StandardNormal;
        match self {
            InitialLaw::Dirac { point } => point.clone(),
            InitialLaw::Gaussian { mean, std } => mean
                .iter()
                .map(|m| m + std * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            InitialLaw::Uniform { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(&a, &b)| rng.gen_range(a..b))
                .collect(),
        }
    }
}

/// Particle trajectories on a common time grid; `trajectories[i][t][c]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Ensemble {
    pub grid: TimeGrid,
    pub dim: usize,
    pub trajectories: Vec<Vec<Vec<f64>>>,
    pub initial_law: String,
    pub seed: u64,
}

impl Ensemble {
    pub fn n_particles(&self) -> usize {
        self.trajectories.len()
    }
}

/// Picard-iteration diagnostics; `gaps[k]` is `sup_t d_p` between iterates
/// `k` and `k+1` on the thinned grid.
#[derive(Clone, Debug, Serialize)]
pub struct PicardReport {
    pub gaps: Vec<f64>,
    pub contraction_ratios: Vec<f64>,
    pub converged: bool,
    pub diverged: bool,
    pub iterations: usize,
    pub tolerance: f64,
    /// Gap produced by re-applying the map to the final flow
    /// (self-consistency residual).
    pub residual: f64,
    #[serde(skip)]
    pub iterates: Vec<MeasureFlow>,
}

impl PicardReport {
    pub fn final_flow(&self) -> &MeasureFlow {
        self.iterates.last().expect("picard keeps at least the initial flow")
    }
}

/// Whether a drift field is rough enough that stepping it without
/// mollification is meaningless: its `B^1` mass keeps growing up to the top
/// block and the band is wide.
pub fn needs_mollification(field: &SpectralField) -> bool {
    field.max_level() >= 6 && field.besov_argmax_level(1.0) == Some(field.max_level())
}

/// Draw `n` initial points from `law`, one RNG stream per particle.
pub fn sample_initial(law: &InitialLaw, n: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| law.sample(&mut rng::stream(seed, &[role::INITIAL, i as u64])))
        .collect()
}

/// Draw `n` independent fBm paths, one RNG stream per particle. An extra
/// label distinguishes redraws (Picard without common random numbers,
/// replicas).
pub fn sample_noise(
    grid: TimeGrid,
    hurst: f64,
    d: usize,
    n: usize,
    seed: u64,
    extra: u64,
    sampler: SamplerKind,
) -> Result<Vec<FbmPath>> {
    match sampler {
        SamplerKind::Cholesky => {
            let s = crate::fbm::CholeskySampler::new(grid, hurst)?;
            (0..n)
                .into_par_iter()
                .map(|i| Ok(s.sample(d, &mut rng::stream(seed, &[role::NOISE, extra, i as u64]))))
                .collect()
        }
        SamplerKind::Circulant => {
            let s = crate::fbm::CirculantSampler::new(grid, hurst)?;
            (0..n)
                .into_par_iter()
                .map(|i| Ok(s.sample(d, &mut rng::stream(seed, &[role::NOISE, extra, i as u64]))))
                .collect()
        }
    }
}

fn prepare_fields(field_flow: &[SpectralField], config: &SolverConfig) -> Result<Vec<SpectralField>> {
    let n = config.grid.n_steps();
    if field_flow.len() != n && field_flow.len() != 1 {
        return Err(Error::Contract(format!(
            "field flow must hold 1 or {n} fields, got {}",
            field_flow.len()
        )));
    }
    match config.mollify_level {
        Some(level) => {
            let dt = config.grid.dt();
            if 2f64.powi(level) * dt.powf(0.9) > 1.0 {
                log::warn!(
                    "mollification level {level} is under-resolved at dt = {dt:.3e} \
                     (2^level dt^0.9 > 1)"
                );
            }
            Ok(field_flow.iter().map(|f| f.mollify(level)).collect())
        }
        None => {
            if field_flow.iter().any(needs_mollification) {
                return Err(Error::Config(
                    "drift field is rough (Besov mass concentrated at the top block); \
                     set mollify_level"
                        .into(),
                ));
            }
            Ok(field_flow.to_vec())
        }
    }
}

/// Explicit Euler on a frozen (time-indexed) drift field flow:
/// `X_{i+1} = X_i + b_i(X_i) dt + (W_{i+1} - W_i)`.
pub fn solve_frozen_sde(
    field_flow: &[SpectralField],
    xi: &[Vec<f64>],
    w: &[FbmPath],
    config: &SolverConfig,
) -> Result<Ensemble> {
    config.validate()?;
    if xi.len() != config.n_particles || w.len() != config.n_particles {
        return Err(Error::Contract(format!(
            "expected {} initial points and noise paths, got {} and {}",
            config.n_particles,
            xi.len(),
            w.len()
        )));
    }
    let fields = prepare_fields(field_flow, config)?;
    let n = config.grid.n_steps();
    let dt = config.grid.dt();
    let d = xi.first().map_or(0, |p| p.len());

    let trajectories: Result<Vec<Vec<Vec<f64>>>> = xi
        .par_iter()
        .zip(w.par_iter())
        .enumerate()
        .map(|(pi, (x0, path))| {
            if path.grid != config.grid || path.dim() != d {
                return Err(Error::Contract(format!(
                    "noise path {pi} does not match the solver grid/dimension"
                )));
            }
            let mut traj = Vec::with_capacity(n + 1);
            traj.push(x0.clone());
            // Drift is accumulated separately so that X_i = xi + D_i + W_i;
            // for zero drift the noise is reproduced bit-exactly.
            let mut acc = vec![0.0; d];
            for i in 0..n {
                let b = &fields[if fields.len() == 1 { 0 } else { i }];
                let bx = b.evaluate(&traj[i]);
                let mut x = vec![0.0; d];
                for c in 0..d {
                    acc[c] += bx[c] * dt;
                    x[c] = x0[c] + acc[c] + path.values[c][i + 1];
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numerical(format!(
                        "particle {pi} blew up at step {}",
                        i + 1
                    )));
                }
                traj.push(x);
            }
            Ok(traj)
        })
        .collect();

    Ok(Ensemble {
        grid: config.grid,
        dim: d,
        trajectories: trajectories?,
        initial_law: "explicit".into(),
        seed: config.seed,
    })
}

/// Uniform-weight empirical measure of the ensemble at every time index.
pub fn law_flow(ensemble: &Ensemble) -> Result<MeasureFlow> {
    let n = ensemble.grid.n_steps();
    let measures: Result<Vec<EmpiricalMeasure>> = (0..=n)
        .map(|i| {
            EmpiricalMeasure::uniform(
                ensemble.trajectories.iter().map(|traj| traj[i].clone()).collect(),
            )
        })
        .collect();
    MeasureFlow::new(ensemble.grid, measures?)
}

/// Freeze the drift along `flow` (one field per time step).
fn freeze_drift(drift: &DriftSpec, flow: &MeasureFlow) -> Result<Vec<SpectralField>> {
    let grid = flow.grid;
    (0..grid.n_steps())
        .into_par_iter()
        .map(|i| drift.effective_field(&flow.measures[i], grid.time(i)))
        .collect()
}

/// Picard iteration for the law of the distribution-dependent SDE, started
/// from the zero-drift flow.
pub fn picard_iterate(
    drift: &DriftSpec,
    mu0: &InitialLaw,
    params: &crate::drift::RegimeParams,
    config: &SolverConfig,
    tol: f64,
    max_iter: usize,
) -> Result<PicardReport> {
    config.validate()?;
    drift.validate()?;
    let decision = crate::drift::regime_gate(params);
    if !decision.admissible {
        log::warn!(
            "regime gate inadmissible (threshold {:.4}, margin {:.4}); iterating anyway",
            decision.threshold,
            decision.margin
        );
    }
    let d = mu0.dim();
    let xi = sample_initial(mu0, config.n_particles, config.seed);
    let mut noise =
        sample_noise(config.grid, params.hurst, d, config.n_particles, config.seed, 0, config.sampler)?;

    // mu^0: the zero-drift flow, law of xi + W.
    let zero = vec![SpectralField::zero(drift.dim, drift.period, drift.dim)];
    let mut flow = law_flow(&solve_frozen_sde(&zero, &xi, &noise, config)?)?;
    let mut iterates = vec![flow.clone()];
    let mut gaps: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut diverged = false;
    let mut rising = 0usize;

    for k in 0..max_iter {
        if !config.common_random_numbers {
            noise = sample_noise(
                config.grid,
                params.hurst,
                d,
                config.n_particles,
                config.seed,
                k as u64 + 1,
                config.sampler,
            )?;
        }
        let fields = freeze_drift(drift, &flow)?;
        let next = law_flow(&solve_frozen_sde(&fields, &xi, &noise, config)?)?;
        let gap = flow.sup_distance(&next, params.p, config.thin())?;
        if let Some(&last) = gaps.last() {
            rising = if gap > last { rising + 1 } else { 0 };
        }
        gaps.push(gap);
        flow = next;
        iterates.push(flow.clone());
        if gap < tol {
            converged = true;
            break;
        }
        if rising >= 5 {
            diverged = true;
            break;
        }
    }

    // Self-consistency residual: one more application of the map.
    let fields = freeze_drift(drift, &flow)?;
    let reapplied = law_flow(&solve_frozen_sde(&fields, &xi, &noise, config)?)?;
    let residual = flow.sup_distance(&reapplied, params.p, config.thin())?;

    let contraction_ratios = gaps
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { f64::NAN })
        .collect();
    Ok(PicardReport {
        iterations: gaps.len(),
        gaps,
        contraction_ratios,
        converged,
        diverged,
        tolerance: tol,
        residual,
        iterates,
    })
}

/// Interacting particle system: the effective field is rebuilt from the
/// current empirical measure at every step.
pub fn particle_system(
    drift: &DriftSpec,
    mu0: &InitialLaw,
    hurst: f64,
    config: &SolverConfig,
) -> Result<Ensemble> {
    let xi = sample_initial(mu0, config.n_particles, config.seed);
    let noise = sample_noise(
        config.grid,
        hurst,
        mu0.dim(),
        config.n_particles,
        config.seed,
        0,
        config.sampler,
    )?;
    let mut ens = particle_system_with(drift, &xi, &noise, config)?;
    ens.initial_law = mu0.tag().into();
    Ok(ens)
}

/// [`particle_system`] on externally supplied draws (used for coupling
/// tests and exchangeability checks).
pub fn particle_system_with(
    drift: &DriftSpec,
    xi: &[Vec<f64>],
    noise: &[FbmPath],
    config: &SolverConfig,
) -> Result<Ensemble> {
    config.validate()?;
    drift.validate()?;
    if xi.len() != config.n_particles || noise.len() != config.n_particles {
        return Err(Error::Contract(format!(
            "expected {} initial points and noise paths, got {} and {}",
            config.n_particles,
            xi.len(),
            noise.len()
        )));
    }
    let n = config.grid.n_steps();
    let dt = config.grid.dt();
    let d = xi.first().map_or(0, |p| p.len());

    // Roughness is checked once on the initial empirical measure.
    let mu_init = EmpiricalMeasure::uniform(xi.to_vec())?;
    let probe = drift.effective_field(&mu_init, 0.0)?;
    if config.mollify_level.is_none() && needs_mollification(&probe) {
        return Err(Error::Config(
            "drift field is rough (Besov mass concentrated at the top block); set mollify_level"
                .into(),
        ));
    }

    let mut positions: Vec<Vec<f64>> = xi.to_vec();
    // Per-particle accumulated drift, so X_i = xi + D_i + W_i (bit-exact
    // noise reproduction for zero drift).
    let mut accs: Vec<Vec<f64>> = vec![vec![0.0; d]; xi.len()];
    let mut trajectories: Vec<Vec<Vec<f64>>> =
        xi.iter().map(|x| vec![x.clone()]).collect();
    for i in 0..n {
        let mu = EmpiricalMeasure::uniform(positions.clone())?;
        let mut field = drift.effective_field(&mu, config.grid.time(i))?;
        if let Some(level) = config.mollify_level {
            field = field.mollify(level);
        }
        let steps: Result<Vec<Vec<f64>>> = positions
            .par_iter()
            .zip(accs.par_iter_mut())
            .enumerate()
            .map(|(pi, (x, acc))| {
                let bx = field.evaluate(x);
                let next: Vec<f64> = (0..d)
                    .map(|c| {
                        acc[c] += bx[c] * dt;
                        xi[pi][c] + acc[c] + noise[pi].values[c][i + 1]
                    })
                    .collect();
                if next.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numerical(format!(
                        "particle {pi} blew up at step {}",
                        i + 1
                    )));
                }
                Ok(next)
            })
            .collect();
        positions = steps?;
        for (traj, x) in trajectories.iter_mut().zip(&positions) {
            traj.push(x.clone());
        }
    }

    Ok(Ensemble {
        grid: config.grid,
        dim: d,
        trajectories,
        initial_law: "explicit".into(),
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{RegimeParams, TimeProfile};
    use crate::field::{synth_besov_field, Mode};
    use num_complex::Complex64;

    const TAU: f64 = 2.0 * std::f64::consts::PI;

    fn config(n_steps: usize, n_particles: usize, seed: u64) -> SolverConfig {
        SolverConfig {
            grid: TimeGrid::new(1.0, n_steps).unwrap(),
            n_particles,
            mollify_level: None,
            seed,
            sampler: SamplerKind::Circulant,
            common_random_numbers: true,
            thin_stride: None,
        }
    }

    fn zero_noise(grid: TimeGrid, d: usize, n: usize) -> Vec<FbmPath> {
        (0..n)
            .map(|_| FbmPath {
                hurst: 0.5,
                grid,
                values: vec![vec![0.0; grid.n_steps() + 1]; d],
            })
            .collect()
    }

    #[test]
    fn zero_field_reproduces_noise() {
        let cfg = config(64, 4, 1);
        let law = InitialLaw::Gaussian { mean: vec![0.0], std: 1.0 };
        let xi = sample_initial(&law, 4, cfg.seed);
        let w = sample_noise(cfg.grid, 0.4, 1, 4, cfg.seed, 0, cfg.sampler).unwrap();
        let zero = vec![SpectralField::zero(1, TAU, 1)];
        let ens = solve_frozen_sde(&zero, &xi, &w, &cfg).unwrap();
        for p in 0..4 {
            for i in 0..=64 {
                let want = xi[p][0] + w[p].values[0][i];
                assert_eq!(ens.trajectories[p][i][0], want);
            }
        }
    }

    #[test]
    fn constant_field_is_exact() {
        let cfg = config(128, 2, 2);
        let c = 0.8;
        let field = vec![SpectralField::constant(1, TAU, &[c])];
        let xi = vec![vec![0.3], vec![-1.1]];
        let w = sample_noise(cfg.grid, 0.6, 1, 2, cfg.seed, 0, cfg.sampler).unwrap();
        let ens = solve_frozen_sde(&field, &xi, &w, &cfg).unwrap();
        for p in 0..2 {
            for i in 0..=128 {
                let want = xi[p][0] + c * cfg.grid.time(i) + w[p].values[0][i];
                assert!((ens.trajectories[p][i][0] - want).abs() < 1e-12);
            }
        }
    }

    /// b(x) = -sin(omega x)/omega, a band-limited stand-in for -x near 0.
    fn soft_linear_field(period: f64) -> SpectralField {
        let omega = TAU / period;
        // -sin(omega x)/omega = i/(2 omega) (e^{i omega x} - e^{-i omega x}) ... with sign:
        // sin(z) = (e^{iz} - e^{-iz}) / (2i), so -sin/omega has k=1 coeff -1/(2i omega).
        let c = Complex64::new(0.0, 1.0) / (2.0 * omega);
        SpectralField::from_modes(
            1,
            period,
            1,
            vec![
                Mode { k: vec![1], coeff: vec![c] },
                Mode { k: vec![-1], coeff: vec![c.conj()] },
            ],
        )
    }

    #[test]
    fn euler_is_first_order_on_ode() {
        let period = 16.0;
        let field = vec![soft_linear_field(period)];
        // Fine-grid reference for the ODE x' = -sin(omega x)/omega, x(0) = 1.
        let reference = {
            let cfg = SolverConfig { grid: TimeGrid::new(1.0, 1 << 15).unwrap(), ..config(1, 1, 3) };
            let w = zero_noise(cfg.grid, 1, 1);
            solve_frozen_sde(&field, &[vec![1.0]], &w, &cfg).unwrap().trajectories[0][1 << 15][0]
        };
        assert!((reference - (-1.0f64).exp()).abs() < 0.02, "reference {reference}");
        let mut pts = Vec::new();
        for n in [64usize, 128, 256, 512] {
            let cfg = SolverConfig { grid: TimeGrid::new(1.0, n).unwrap(), ..config(1, 1, 3) };
            let w = zero_noise(cfg.grid, 1, 1);
            let ens = solve_frozen_sde(&field, &[vec![1.0]], &w, &cfg).unwrap();
            pts.push((1.0 / n as f64, (ens.trajectories[0][n][0] - reference).abs()));
        }
        let (order, _) = crate::young::estimate_holder_exponent(&pts).unwrap();
        assert!(order >= 0.9, "Euler order {order}");
    }

    #[test]
    fn rough_field_requires_mollification() {
        let b = synth_besov_field(-0.5, 8, 1, &mut crate::rng::stream(4, &[crate::rng::role::FIELD])).unwrap();
        let cfg = config(32, 1, 5);
        let w = sample_noise(cfg.grid, 0.3, 1, 1, cfg.seed, 0, cfg.sampler).unwrap();
        let err = solve_frozen_sde(&[b.clone()], &[vec![0.0]], &w, &cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        let cfg = SolverConfig { mollify_level: Some(4), ..cfg };
        assert!(solve_frozen_sde(&[b], &[vec![0.0]], &w, &cfg).is_ok());
    }

    #[test]
    fn law_flow_of_single_constant_trajectory() {
        let cfg = config(16, 1, 6);
        let zero = vec![SpectralField::zero(1, TAU, 1)];
        let w = zero_noise(cfg.grid, 1, 1);
        let ens = solve_frozen_sde(&zero, &[vec![0.7]], &w, &cfg).unwrap();
        let flow = law_flow(&ens).unwrap();
        for m in &flow.measures {
            assert_eq!(m.points(), &[vec![0.7]]);
        }
    }

    #[test]
    fn law_flow_is_permutation_invariant() {
        let cfg = config(32, 8, 7);
        let law = InitialLaw::Gaussian { mean: vec![0.0], std: 1.0 };
        let xi = sample_initial(&law, 8, cfg.seed);
        let w = sample_noise(cfg.grid, 0.5, 1, 8, cfg.seed, 0, cfg.sampler).unwrap();
        let zero = vec![SpectralField::zero(1, TAU, 1)];
        let ens = solve_frozen_sde(&zero, &xi, &w, &cfg).unwrap();
        let mut permuted = ens.clone();
        permuted.trajectories.rotate_left(3);
        let d = law_flow(&ens)
            .unwrap()
            .sup_distance(&law_flow(&permuted).unwrap(), 2.0, 1)
            .unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn zero_drift_second_moment_identity() {
        // E |X_T|^2 = E |xi|^2 + d T^{2H} for X = xi + W.
        let hurst = 0.7;
        let cfg = config(64, 4096, 8);
        let law = InitialLaw::Gaussian { mean: vec![0.0], std: 1.0 };
        let xi = sample_initial(&law, cfg.n_particles, cfg.seed);
        let w = sample_noise(cfg.grid, hurst, 1, cfg.n_particles, cfg.seed, 0, cfg.sampler).unwrap();
        let zero = vec![SpectralField::zero(1, TAU, 1)];
        let ens = solve_frozen_sde(&zero, &xi, &w, &cfg).unwrap();
        let flow = law_flow(&ens).unwrap();
        let m2 = flow.measures[64].moment_norm(2.0).unwrap().powi(2);
        let want = 1.0 + 1.0f64.powf(2.0 * hurst);
        // 3 sigma for the mean of X^2, X ~ N(0, want).
        let sigma = (2.0 * want * want / cfg.n_particles as f64).sqrt();
        assert!((m2 - want).abs() < 3.0 * sigma, "m2 {m2} vs {want} (sigma {sigma})");
    }

    #[test]
    fn solver_is_deterministic() {
        let kernel = synth_besov_field(0.8, 3, 1, &mut crate::rng::stream(9, &[crate::rng::role::FIELD])).unwrap();
        let drift = DriftSpec::convolutional(
            kernel.clone(),
            SpectralField::zero(1, kernel.period, 1),
            TimeProfile::Constant(1.0),
        )
        .unwrap();
        let law = InitialLaw::Gaussian { mean: vec![0.0], std: 0.5 };
        let cfg = config(64, 32, 10);
        let a = particle_system(&drift, &law, 0.4, &cfg).unwrap();
        let b = particle_system(&drift, &law, 0.4, &cfg).unwrap();
        assert_eq!(a.trajectories, b.trajectories);
    }

    #[test]
    fn translation_covariance_is_exact() {
        let kernel = synth_besov_field(0.8, 3, 1, &mut crate::rng::stream(11, &[crate::rng::role::FIELD])).unwrap();
        let drift = DriftSpec::convolutional(
            kernel.clone(),
            SpectralField::zero(1, kernel.period, 1),
            TimeProfile::Constant(1.0),
        )
        .unwrap();
        let cfg = config(128, 16, 12);
        let law = InitialLaw::Gaussian { mean: vec![0.0], std: 0.5 };
        let xi = sample_initial(&law, 16, cfg.seed);
        let w = sample_noise(cfg.grid, 0.4, 1, 16, cfg.seed, 0, cfg.sampler).unwrap();
        let h = 0.37;
        let shifted: Vec<Vec<f64>> = xi.iter().map(|x| vec![x[0] + h]).collect();
        let a = particle_system_with(&drift, &xi, &w, &cfg).unwrap();
        let b = particle_system_with(&drift, &shifted, &w, &cfg).unwrap();
        let mut worst: f64 = 0.0;
        for p in 0..16 {
            for i in 0..=128 {
                worst = worst.max((b.trajectories[p][i][0] - a.trajectories[p][i][0] - h).abs());
            }
        }
        assert!(worst < 1e-10, "translation gap {worst}");
    }

    #[test]
    fn particle_system_is_exchangeable() {
        let kernel = synth_besov_field(0.8, 3, 1, &mut crate::rng::stream(13, &[crate::rng::role::FIELD])).unwrap();
        let drift = DriftSpec::convolutional(
            kernel.clone(),
            SpectralField::zero(1, kernel.period, 1),
            TimeProfile::Constant(1.0),
        )
        .unwrap();
        let cfg = config(64, 12, 14);
        let law = InitialLaw::Gaussian { mean: vec![0.0], std: 0.5 };
        let xi = sample_initial(&law, 12, cfg.seed);
        let w = sample_noise(cfg.grid, 0.4, 1, 12, cfg.seed, 0, cfg.sampler).unwrap();
        let mut xi_p = xi.clone();
        let mut w_p = w.clone();
        xi_p.rotate_left(5);
        w_p.rotate_left(5);
        let a = particle_system_with(&drift, &xi, &w, &cfg).unwrap();
        let b = particle_system_with(&drift, &xi_p, &w_p, &cfg).unwrap();
        // The law flow (a symmetric statistic) is unchanged by reindexing.
        let d = law_flow(&a).unwrap().sup_distance(&law_flow(&b).unwrap(), 1.0, 1).unwrap();
        assert!(d < 1e-9, "exchangeability gap {d}");
    }

    #[test]
    fn self_interaction_of_single_particle() {
        let kernel = synth_besov_field(0.8, 3, 1, &mut crate::rng::stream(15, &[crate::rng::role::FIELD])).unwrap();
        let b0 = kernel.evaluate(&[0.0])[0];
        let drift = DriftSpec::convolutional(
            kernel.clone(),
            SpectralField::zero(1, kernel.period, 1),
            TimeProfile::Constant(1.0),
        )
        .unwrap();
        let cfg = config(64, 1, 16);
        let xi = vec![vec![0.2]];
        let w = sample_noise(cfg.grid, 0.5, 1, 1, cfg.seed, 0, cfg.sampler).unwrap();
        let ens = particle_system_with(&drift, &xi, &w, &cfg).unwrap();
        for i in 0..=64 {
            let want = xi[0][0] + b0 * cfg.grid.time(i) + w[0].values[0][i];
            assert!((ens.trajectories[0][i][0] - want).abs() < 1e-10);
        }
    }

    fn regime(hurst: f64) -> RegimeParams {
        RegimeParams { hurst, alpha: 1.0, q: None, p: 1.0, beta: None }
    }

    #[test]
    fn picard_zero_drift_converges_immediately() {
        let drift = DriftSpec::zero(1, TAU);
        let law = InitialLaw::Gaussian { mean: vec![0.0], std: 1.0 };
        let cfg = config(64, 64, 17);
        let rep = picard_iterate(&drift, &law, &regime(0.5), &cfg, 1e-10, 10).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.gaps[0], 0.0);
        assert!(rep.residual == 0.0);
    }

    #[test]
    fn picard_constant_external_is_translated_zero_flow() {
        let c = 0.6;
        let drift = DriftSpec::convolutional(
            SpectralField::zero(1, TAU, 1),
            SpectralField::constant(1, TAU, &[c]),
            TimeProfile::Constant(1.0),
        )
        .unwrap();
        let law = InitialLaw::Gaussian { mean: vec![0.0], std: 1.0 };
        let cfg = config(64, 64, 18);
        let rep = picard_iterate(&drift, &law, &regime(0.5), &cfg, 1e-10, 10).unwrap();
        assert!(rep.converged);
        // Fixed point: zero-drift flow translated by c t.
        let zero_rep = picard_iterate(&DriftSpec::zero(1, TAU), &law, &regime(0.5), &cfg, 1e-10, 10).unwrap();
        let fixed = rep.final_flow();
        let base = zero_rep.final_flow();
        for i in (0..=64).step_by(16) {
            let shifted = base.measures[i].translate(&[c * cfg.grid.time(i)]);
            let d = crate::measure::wasserstein_1d(&fixed.measures[i], &shifted, 1.0).unwrap();
            assert!(d < 1e-10, "t index {i}: {d}");
        }
    }

    #[test]
    fn picard_contracts_for_lipschitz_drift() {
        let kernel = synth_besov_field(1.0, 3, 1, &mut crate::rng::stream(19, &[crate::rng::role::FIELD])).unwrap();
        let drift = DriftSpec::convolutional(
            kernel.clone(),
            SpectralField::zero(1, kernel.period, 1),
            TimeProfile::Constant(1.0),
        )
        .unwrap();
        let law = InitialLaw::Gaussian { mean: vec![0.0], std: 0.5 };
        let cfg = SolverConfig {
            grid: TimeGrid::new(0.5, 256).unwrap(),
            n_particles: 256,
            mollify_level: None,
            seed: 20,
            sampler: SamplerKind::Circulant,
            common_random_numbers: true,
            thin_stride: None,
        };
        let params = RegimeParams { hurst: 0.3, alpha: 1.0, q: None, p: 1.0, beta: None };
        let rep = picard_iterate(&drift, &law, &params, &cfg, 1e-9, 25).unwrap();
        assert!(rep.converged, "gaps {:?}", rep.gaps);
        assert!(rep.residual <= 2.0 * rep.tolerance, "residual {}", rep.residual);
        let ratios: Vec<f64> = rep
            .contraction_ratios
            .iter()
            .copied()
            .filter(|r| r.is_finite() && rep.gaps.iter().any(|&g| g > 1e-12))
            .collect();
        // All ratios below 1, stable within +-0.15 of their median while the
        // gaps are above the numerical floor.
        let meaningful: Vec<f64> = rep
            .gaps
            .windows(2)
            .filter(|w| w[1] > 1e-10)
            .map(|w| w[1] / w[0])
            .collect();
        assert!(!meaningful.is_empty());
        for r in &meaningful {
            assert!(*r < 1.0, "ratio {r} not contracting: {:?}", rep.gaps);
        }
        let mut sorted = meaningful.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        for r in &meaningful {
            assert!((r - median).abs() <= 0.15, "ratio {r} vs median {median}: {ratios:?}");
        }
    }
}
