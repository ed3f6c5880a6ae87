//! A one-dimensional Gaussian beam of free particles.
//!
//! Each particle carries the beam's convective velocity `v` plus its own
//! diffusive velocity `u`, drawn with variance `u₀² = (D/σ₀)²`
//! independently of its position. Free flight then spreads the beam
//! ballistically, `σ²(t) = σ₀² + u₀²t²`, while the kinetic energy moves
//! from the diffusive to the convective share and the total stays put.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{DerivedConstants, PhysicalParams};
use crate::rng::{domain, StreamId};
use crate::stats::{mean_with_stderr, neumaier_sum, EstimateWithError};
use crate::verify::{CheckKind, CheckResult};

/// Relative tolerance for the closed-form conservation series.
pub const CONSERVATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error("invalid preparation: {field} = {value}")]
    InvalidPreparation { field: &'static str, value: f64 },
    #[error("cannot evolve backwards from t = {from} to t = {to}")]
    TimeReversed { from: f64, to: f64 },
    #[error("need at least {need} time points, have {have}")]
    TooFewPoints { have: usize, need: usize },
    #[error("kinetic energy not conserved: worst defect {defect} at t = {worst_t}")]
    ConservationViolated {
        worst_t: f64,
        defect: f64,
        result: Box<CheckResult>,
    },
}

/// How the beam is prepared at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrep {
    pub sigma0: f64,
    pub x0: f64,
    pub v_conv: f64,
    /// Number of particles.
    pub count: usize,
}

impl GaussianPrep {
    pub fn check(&self) -> Result<(), EnsembleError> {
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(EnsembleError::InvalidPreparation {
                field: "sigma0",
                value: self.sigma0,
            });
        }
        for (field, value) in [("x0", self.x0), ("v_conv", self.v_conv)] {
            if !value.is_finite() {
                return Err(EnsembleError::InvalidPreparation { field, value });
            }
        }
        if self.count < 2 {
            return Err(EnsembleError::InvalidPreparation {
                field: "count",
                value: self.count as f64,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    pub t: f64,
    pub positions: Vec<f64>,
    /// Diffusive velocity `u` of each particle.
    pub diff_velocities: Vec<f64>,
    pub v_conv: f64,
    /// Beam center at `t = 0`.
    pub x0: f64,
}

impl EnsembleState {
    /// Convective center `x₀ + v t`.
    pub fn center(&self) -> f64 {
        self.x0 + self.v_conv * self.t
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Kinetic energy per particle split into convective and diffusive parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticSplit {
    pub t: f64,
    pub sigma_sq: f64,
    pub convective: f64,
    pub diffusive: f64,
    pub total: f64,
    /// Standard error of `total`; zero for closed forms.
    pub total_stderr: f64,
}

/// Initial diffusive speed `u₀ = D/σ₀`.
pub fn initial_u0(d: &DerivedConstants, sigma0: f64) -> f64 {
    d.u0_of(sigma0)
}

/// Width at which `ζσ₀ = D/σ₀`, i.e. `σ₀ = √(D/ζ)`.
pub fn dual_form_width(p: &PhysicalParams, d: &DerivedConstants) -> f64 {
    (d.diffusion / p.zeta).sqrt()
}

/// Samples the beam with one random stream per particle, so the result is
/// independent of the number of worker threads.
pub fn prepare_gaussian(
    prep: &GaussianPrep,
    d: &DerivedConstants,
    seed: u64,
) -> Result<EnsembleState, EnsembleError> {
    prepare_gaussian_batch(prep, d, seed, 0)
}

/// As [`prepare_gaussian`], drawing from batch `batch` of the seed so that
/// several beams prepared under one seed are independent.
pub fn prepare_gaussian_batch(
    prep: &GaussianPrep,
    d: &DerivedConstants,
    seed: u64,
    batch: u64,
) -> Result<EnsembleState, EnsembleError> {
    prep.check()?;
    let stream_domain = domain::GAUSSIAN_PREP + batch;
    let u0 = initial_u0(d, prep.sigma0);
    let (positions, diff_velocities): (Vec<f64>, Vec<f64>) = (0..prep.count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = StreamId::new(seed, stream_domain, i).rng();
            let zx: f64 = rng.sample(StandardNormal);
            let zu: f64 = rng.sample(StandardNormal);
            (prep.x0 + prep.sigma0 * zx, u0 * zu)
        })
        .unzip();
    Ok(EnsembleState {
        t: 0.0,
        positions,
        diff_velocities,
        v_conv: prep.v_conv,
        x0: prep.x0,
    })
}

/// Osmotic velocity `(ħ/2m)(x - x₀)/σ²` of a Gaussian of variance `σ²`.
pub fn osmotic_velocity(
    x: f64,
    x0: f64,
    sigma_sq: f64,
    p: &PhysicalParams,
    d: &DerivedConstants,
) -> f64 {
    d.hbar / (2.0 * p.m) * (x - x0) / sigma_sq
}

/// The two expressions for the heat gradient at `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatGradient {
    /// `m ζ u(x)`.
    pub from_friction: f64,
    /// `2ω₀ m u(x)`.
    pub from_boltzmann: f64,
}

impl HeatGradient {
    pub fn ratio(&self) -> f64 {
        self.from_friction / self.from_boltzmann
    }
}

pub fn heat_gradient(
    x: f64,
    x0: f64,
    sigma_sq: f64,
    p: &PhysicalParams,
    d: &DerivedConstants,
) -> HeatGradient {
    let u = osmotic_velocity(x, x0, sigma_sq, p, d);
    HeatGradient {
        from_friction: p.m * p.zeta * u,
        from_boltzmann: 2.0 * p.omega0 * p.m * u,
    }
}

/// Free flight to `t_target`; velocities are unchanged.
pub fn ballistic_evolve(e: &EnsembleState, t_target: f64) -> Result<EnsembleState, EnsembleError> {
    if !(t_target >= e.t) {
        return Err(EnsembleError::TimeReversed {
            from: e.t,
            to: t_target,
        });
    }
    let dt = t_target - e.t;
    let positions = e
        .positions
        .par_iter()
        .zip(&e.diff_velocities)
        .map(|(x, u)| x + (e.v_conv + u) * dt)
        .collect();
    Ok(EnsembleState {
        t: t_target,
        positions,
        diff_velocities: e.diff_velocities.clone(),
        v_conv: e.v_conv,
        x0: e.x0,
    })
}

/// Variance of positions about the convective center, with its standard
/// error.
pub fn spread(e: &EnsembleState) -> EstimateWithError {
    let c = e.center();
    let sq: Vec<f64> = e.positions.iter().map(|x| (x - c) * (x - c)).collect();
    mean_with_stderr(&sq)
}

pub fn ballistic_variance(sigma0: f64, u0: f64, t: f64) -> f64 {
    sigma0 * sigma0 + u0 * u0 * t * t
}

/// Ordinary diffusion `σ₀² + 2Dt`, as seen in the rest frame of the bath.
pub fn restframe_variance(sigma0: f64, diffusion: f64, t: f64) -> f64 {
    sigma0 * sigma0 + 2.0 * diffusion * t
}

/// Time `2σ₀²/D` after which ballistic spreading overtakes ordinary
/// diffusion.
pub fn crossover_time(sigma0: f64, diffusion: f64) -> f64 {
    2.0 * sigma0 * sigma0 / diffusion
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadPoint {
    pub t: f64,
    pub var_emp: EstimateWithError,
    pub var_ballistic: f64,
    pub var_restframe: f64,
}

/// Empirical spread at each time of `grid` together with both closed-form
/// curves. Every point is evolved directly from the prepared state.
pub fn variance_series(
    prep: &GaussianPrep,
    d: &DerivedConstants,
    grid: &[f64],
    seed: u64,
) -> Result<Vec<SpreadPoint>, EnsembleError> {
    let initial = prepare_gaussian(prep, d, seed)?;
    spread_series(&initial, d, prep.sigma0, grid)
}

/// As [`variance_series`] for an already prepared beam.
pub fn spread_series(
    initial: &EnsembleState,
    d: &DerivedConstants,
    sigma0: f64,
    grid: &[f64],
) -> Result<Vec<SpreadPoint>, EnsembleError> {
    let u0 = initial_u0(d, sigma0);
    grid.iter()
        .map(|&t| {
            let e = ballistic_evolve(initial, t)?;
            Ok(SpreadPoint {
                t,
                var_emp: spread(&e),
                var_ballistic: ballistic_variance(sigma0, u0, t),
                var_restframe: restframe_variance(sigma0, d.diffusion, t),
            })
        })
        .collect()
}

/// Closed-form kinetic split at time `t`.
pub fn kinetic_decomposition(
    d: &DerivedConstants,
    p: &PhysicalParams,
    sigma0: f64,
    t: f64,
) -> KineticSplit {
    let u0 = initial_u0(d, sigma0);
    let sigma_sq = ballistic_variance(sigma0, u0, t);
    let scale = 0.5 * p.m * u0 * u0;
    let convective = scale * (u0 * u0 * t * t) / sigma_sq;
    let diffusive = scale * (sigma0 * sigma0) / sigma_sq;
    KineticSplit {
        t,
        sigma_sq,
        convective,
        diffusive,
        total: convective + diffusive,
        total_stderr: 0.0,
    }
}

/// Empirical split of a beam. The part of `u` linear in the displacement
/// from the center is convective, the remainder diffusive.
pub fn empirical_kinetic_split(e: &EnsembleState, m: f64) -> KineticSplit {
    let c = e.center();
    let n = e.len() as f64;
    let sxx = neumaier_sum(e.positions.iter().map(|x| (x - c) * (x - c))) / n;
    let sxu = neumaier_sum(
        e.positions
            .iter()
            .zip(&e.diff_velocities)
            .map(|(x, u)| (x - c) * u),
    ) / n;
    let energies: Vec<f64> = e.diff_velocities.iter().map(|u| 0.5 * m * u * u).collect();
    let total = mean_with_stderr(&energies);
    let convective = 0.5 * m * sxu * sxu / sxx;
    KineticSplit {
        t: e.t,
        sigma_sq: sxx,
        convective,
        diffusive: total.value - convective,
        total: total.value,
        total_stderr: total.stderr,
    }
}

/// Monte-Carlo `(m/2)⟨u(x)²⟩` of the osmotic velocity over a beam of
/// variance `sigma_sq`.
pub fn osmotic_kinetic_energy(
    e: &EnsembleState,
    sigma_sq: f64,
    p: &PhysicalParams,
    d: &DerivedConstants,
) -> EstimateWithError {
    let c = e.center();
    let energies: Vec<f64> = e
        .positions
        .iter()
        .map(|&x| {
            let u = osmotic_velocity(x, c, sigma_sq, p, d);
            0.5 * p.m * u * u
        })
        .collect();
    mean_with_stderr(&energies)
}

/// Checks `convective + diffusive == expected_total` at every point.
///
/// A series with zero standard errors is held to a relative
/// [`CONSERVATION_TOLERANCE`]; otherwise each point must lie within three
/// standard errors. The returned result describes the worst point.
pub fn check_energy_conservation(
    series: &[KineticSplit],
    expected_total: f64,
) -> Result<CheckResult, EnsembleError> {
    if series.len() < 2 {
        return Err(EnsembleError::TooFewPoints {
            have: series.len(),
            need: 2,
        });
    }
    let exact = series.iter().all(|s| s.total_stderr == 0.0);
    let result_at = |s: &KineticSplit| {
        let sum = s.convective + s.diffusive;
        if exact {
            CheckResult::relative(
                "kinetic_conservation",
                CheckKind::Algebraic,
                sum,
                expected_total,
                CONSERVATION_TOLERANCE,
                "convective + diffusive = (m/2)u0^2",
            )
        } else {
            CheckResult::statistical(
                "kinetic_conservation",
                EstimateWithError {
                    value: sum,
                    stderr: s.total_stderr,
                    n_samples: 0,
                },
                expected_total,
                "convective + diffusive = (m/2)u0^2",
            )
        }
    };
    // Worst point: the largest error relative to what is allowed there.
    let (worst_t, worst) = series
        .iter()
        .map(|s| (s.t, result_at(s)))
        .max_by(|a, b| {
            let ka = a.1.abs_error / a.1.tolerance.max(f64::MIN_POSITIVE);
            let kb = b.1.abs_error / b.1.tolerance.max(f64::MIN_POSITIVE);
            ka.total_cmp(&kb)
        })
        .expect("series has at least two points");
    if worst.pass {
        Ok(worst)
    } else {
        Err(EnsembleError::ConservationViolated {
            worst_t,
            defect: worst.abs_error,
            result: Box::new(worst),
        })
    }
}
