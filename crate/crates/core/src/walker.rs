//! The walker: a Langevin particle `m u̇ = -m ζ u + f(t)` driven by white
//! noise of strength `λ`, `⟨f(t) f(t')⟩ = λ δ(t - t')`.
//!
//! The velocity is an Ornstein-Uhlenbeck process. The default integrator
//! samples the exact joint transition of `(x, u)`, so ensemble statistics
//! carry Monte-Carlo error only; Euler-Maruyama is kept to show the
//! discretisation bias of a naive scheme.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{DerivedConstants, PhysicalParams};
use crate::rng::StreamId;
use crate::stats::{
    mean_with_stderr, neumaier_sum, ols_slope_weights, ratio_of_means, EstimateWithError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WalkerError {
    #[error("step {dt} exceeds the Euler-Maruyama limit {max} (0.1/ζ)")]
    StepTooLarge { dt: f64, max: f64 },
    #[error("invalid time interval: dt = {dt}, t_start = {t_start}, t_end = {t_end}")]
    InvalidInterval { dt: f64, t_start: f64, t_end: f64 },
    #[error("window [{lo}, {hi}] is outside the usable range [{min}, {max}]")]
    WindowOutOfRange {
        lo: f64,
        hi: f64,
        min: f64,
        max: f64,
    },
    #[error("need at least {need} samples, have {have}")]
    TooFewSamples { have: usize, need: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Noise strength `λ`.
    pub lambda: f64,
    /// Friction `ζ`.
    pub zeta: f64,
    pub m: f64,
}

impl NoiseModel {
    pub fn new(lambda: f64, zeta: f64, m: f64) -> Self {
        Self { lambda, zeta, m }
    }

    pub fn from_params(p: &PhysicalParams, d: &DerivedConstants) -> Self {
        Self::new(d.lambda, p.zeta, p.m)
    }

    /// `⟨u²⟩` at equilibrium, `λ/(2ζm²)`.
    pub fn equilibrium_msv(&self) -> f64 {
        self.lambda / (2.0 * self.zeta * self.m * self.m)
    }

    /// Mean kinetic energy at equilibrium, `λ/(4ζm)`.
    pub fn zero_point_energy(&self) -> f64 {
        self.lambda / (4.0 * self.zeta * self.m)
    }

    /// `λ/(2ζ²m²)`.
    pub fn diffusion(&self) -> f64 {
        self.lambda / (2.0 * self.zeta * self.zeta * self.m * self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkerState {
    pub x: f64,
    pub u: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    OuExact,
    EulerMaruyama,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkerTrajectory {
    pub dt: f64,
    pub samples: Vec<WalkerState>,
    pub stream: StreamId,
    pub integrator: Integrator,
}

/// `(1 - e^{-h}) `, accurate for small `h`.
fn one_minus_exp(h: f64) -> f64 {
    -(-h).exp_m1()
}

/// `h - 2(1 - e^{-h}) + (1 - e^{-2h})/2`, the scaled variance of the
/// integrated OU increment. Its leading term is `h³/3`, so the direct form
/// cancels badly for small `h`.
fn integrated_variance_factor(h: f64) -> f64 {
    if h < 1e-2 {
        let tail = 1.0 / 24.0 - h * (31.0 / 2520.0 - h / 320.0);
        h * h * h * (1.0 / 3.0 - h * (0.25 - h * (7.0 / 60.0 - h * tail)))
    } else {
        h - 2.0 * one_minus_exp(h) + 0.5 * one_minus_exp(2.0 * h)
    }
}

/// Exact transition of `(x, u)` over `dt`, driven by two independent
/// standard normals.
///
/// With `a = e^{-ζdt}` and `b² = λ/m²`, the pair is jointly Gaussian with
///
/// ```text
/// E[u'] = u a                       Var u' = b²/(2ζ) (1 - a²)
/// E[x'] = x + u (1 - a)/ζ           Var x' = b²/ζ³ (ζdt - 2(1 - a) + (1 - a²)/2)
///                                   Cov    = b²/(2ζ²) (1 - a)²
/// ```
pub fn ou_exact_step(
    s: WalkerState,
    dt: f64,
    model: &NoiseModel,
    xi1: f64,
    xi2: f64,
) -> WalkerState {
    let zeta = model.zeta;
    let h = zeta * dt;
    let decay = (-h).exp();
    let one_minus = one_minus_exp(h);
    let b2 = model.lambda / (model.m * model.m);
    let var_u = b2 / (2.0 * zeta) * one_minus_exp(2.0 * h);
    let var_x = b2 / (zeta * zeta * zeta) * integrated_variance_factor(h);
    let cov = b2 / (2.0 * zeta * zeta) * one_minus * one_minus;

    let sd_u = var_u.sqrt();
    let (x_from_xi1, sd_x_rest) = if sd_u > 0.0 {
        let coupled = cov / sd_u;
        (coupled, (var_x - coupled * coupled).max(0.0).sqrt())
    } else {
        (0.0, var_x.max(0.0).sqrt())
    };
    WalkerState {
        u: s.u * decay + sd_u * xi1,
        x: s.x + s.u * one_minus / zeta + x_from_xi1 * xi1 + sd_x_rest * xi2,
        t: s.t + dt,
    }
}

/// Largest Euler-Maruyama step accepted, `0.1/ζ`.
pub fn euler_step_limit(model: &NoiseModel) -> f64 {
    0.1 / model.zeta
}

/// `u' = u - ζ u dt + √(λ dt)/m ξ`, `x' = x + u dt`.
pub fn euler_maruyama_step(
    s: WalkerState,
    dt: f64,
    model: &NoiseModel,
    xi: f64,
) -> Result<WalkerState, WalkerError> {
    let max = euler_step_limit(model);
    if dt > max * (1.0 + 1e-12) {
        return Err(WalkerError::StepTooLarge { dt, max });
    }
    Ok(WalkerState {
        u: s.u - model.zeta * s.u * dt + (model.lambda * dt).sqrt() / model.m * xi,
        x: s.x + s.u * dt,
        t: s.t + dt,
    })
}

fn step_count(t_start: f64, t_end: f64, dt: f64) -> Result<usize, WalkerError> {
    if !(dt > 0.0) || !(t_end >= t_start) || !dt.is_finite() || !t_end.is_finite() {
        return Err(WalkerError::InvalidInterval { dt, t_start, t_end });
    }
    Ok(((t_end - t_start) / dt - 1e-9).ceil().max(0.0) as usize)
}

fn advance<R: Rng>(
    s: WalkerState,
    dt: f64,
    model: &NoiseModel,
    integrator: Integrator,
    rng: &mut R,
) -> Result<WalkerState, WalkerError> {
    match integrator {
        Integrator::OuExact => {
            let xi1: f64 = rng.sample(StandardNormal);
            let xi2: f64 = rng.sample(StandardNormal);
            Ok(ou_exact_step(s, dt, model, xi1, xi2))
        }
        Integrator::EulerMaruyama => euler_maruyama_step(s, dt, model, rng.sample(StandardNormal)),
    }
}

fn run<R: Rng>(
    model: &NoiseModel,
    init: WalkerState,
    steps: usize,
    dt: f64,
    integrator: Integrator,
    rng: &mut R,
) -> Result<Vec<WalkerState>, WalkerError> {
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(init);
    let mut state = init;
    for k in 1..=steps {
        state = advance(state, dt, model, integrator, rng)?;
        // Pin the clock to the grid rather than accumulating dt.
        state.t = init.t + k as f64 * dt;
        samples.push(state);
    }
    Ok(samples)
}

/// One trajectory from `init` to `t_end` on a uniform grid. The same
/// `(stream, integrator, dt)` always reproduces the same samples.
pub fn simulate_walker(
    model: &NoiseModel,
    init: WalkerState,
    t_end: f64,
    dt: f64,
    stream: StreamId,
    integrator: Integrator,
) -> Result<WalkerTrajectory, WalkerError> {
    let steps = step_count(init.t, t_end, dt)?;
    if integrator == Integrator::EulerMaruyama && dt > euler_step_limit(model) * (1.0 + 1e-12) {
        return Err(WalkerError::StepTooLarge {
            dt,
            max: euler_step_limit(model),
        });
    }
    let mut rng = stream.rng();
    let samples = run(model, init, steps, dt, integrator, &mut rng)?;
    Ok(WalkerTrajectory {
        dt,
        samples,
        stream,
        integrator,
    })
}

/// Recipe for an ensemble of independent walkers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub count: usize,
    /// Initial velocity of every walker.
    pub u0: f64,
    /// Unrecorded relaxation time before recording starts. Afterwards the
    /// clock and the position are reset to zero.
    pub burn_in: f64,
    /// Recorded duration.
    pub duration: f64,
    pub dt: f64,
    pub integrator: Integrator,
    pub master_seed: u64,
    pub domain: u64,
}

/// Runs an ensemble in parallel. Walker `i` uses stream `i` of the
/// `(master_seed, domain)` key, so the result does not depend on the
/// number of worker threads.
pub fn simulate_ensemble(
    model: &NoiseModel,
    spec: &EnsembleSpec,
) -> Result<Vec<WalkerTrajectory>, WalkerError> {
    let burn_steps = step_count(0.0, spec.burn_in, spec.dt)?;
    let steps = step_count(0.0, spec.duration, spec.dt)?;
    if spec.integrator == Integrator::EulerMaruyama
        && spec.dt > euler_step_limit(model) * (1.0 + 1e-12)
    {
        return Err(WalkerError::StepTooLarge {
            dt: spec.dt,
            max: euler_step_limit(model),
        });
    }
    (0..spec.count as u64)
        .into_par_iter()
        .map(|i| {
            let stream = StreamId::new(spec.master_seed, spec.domain, i);
            let mut rng = stream.rng();
            let mut state = WalkerState {
                x: 0.0,
                u: spec.u0,
                t: 0.0,
            };
            for _ in 0..burn_steps {
                state = advance(state, spec.dt, model, spec.integrator, &mut rng)?;
            }
            let start = WalkerState {
                x: 0.0,
                u: state.u,
                t: 0.0,
            };
            let samples = run(model, start, steps, spec.dt, spec.integrator, &mut rng)?;
            Ok(WalkerTrajectory {
                dt: spec.dt,
                samples,
                stream,
                integrator: spec.integrator,
            })
        })
        .collect()
}

/// `⟨u²(t)⟩ = λ/(2ζm²)(1 - e^{-2ζt}) + u₀² e^{-2ζt}`.
pub fn msv_analytic(model: &NoiseModel, t: f64, u0: f64) -> f64 {
    let decay = (-2.0 * model.zeta * t).exp();
    model.equilibrium_msv() * one_minus_exp(2.0 * model.zeta * t) + u0 * u0 * decay
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsdAnalytic {
    /// Long-time form `2Dt`, valid for `t ≫ 1/ζ`.
    pub asymptotic: f64,
    /// Integrated OU process started from equilibrium,
    /// `2D(t - (1 - e^{-ζt})/ζ)`.
    pub exact: f64,
}

pub fn msd_analytic(model: &NoiseModel, t: f64) -> MsdAnalytic {
    let d = model.diffusion();
    MsdAnalytic {
        asymptotic: 2.0 * d * t,
        exact: 2.0 * d * (t - one_minus_exp(model.zeta * t) / model.zeta),
    }
}

/// Closed-form walker work over `n` periods for `N` degrees of freedom,
/// `n·N·(4π/ω₀)·ζ·E_zp`.
pub fn walker_work(p: &PhysicalParams, d: &DerivedConstants, n: u64) -> f64 {
    n as f64 * f64::from(p.n_dof) * 4.0 * PI / p.omega0 * p.zeta * d.e_zp
}

/// Walker work `N·m ζ ∫⟨u²⟩ dt` over the recorded span, from the
/// ensemble-averaged instantaneous friction power.
pub fn walker_work_quadrature(
    trajs: &[WalkerTrajectory],
    model: &NoiseModel,
    n_dof: u32,
) -> Result<EstimateWithError, WalkerError> {
    check_ensemble(trajs)?;
    let per_walker: Vec<f64> = trajs
        .iter()
        .map(|tr| {
            let n = tr.samples.len();
            let weighted = tr.samples.iter().enumerate().map(|(i, s)| {
                let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
                w * s.u * s.u
            });
            tr.dt * neumaier_sum(weighted)
        })
        .collect();
    Ok(mean_with_stderr(&per_walker).scale(f64::from(n_dof) * model.m * model.zeta))
}

fn check_ensemble(trajs: &[WalkerTrajectory]) -> Result<(), WalkerError> {
    if trajs.len() < 2 {
        return Err(WalkerError::TooFewSamples {
            have: trajs.len(),
            need: 2,
        });
    }
    Ok(())
}

fn sample_index(trajs: &[WalkerTrajectory], t: f64) -> Result<usize, WalkerError> {
    let first = &trajs[0];
    let t0 = first.samples[0].t;
    let t_max = first.samples[first.samples.len() - 1].t;
    let k = ((t - t0) / first.dt).round();
    let out = WalkerError::WindowOutOfRange {
        lo: t,
        hi: t,
        min: t0,
        max: t_max,
    };
    if k < 0.0 || k as usize >= first.samples.len() {
        return Err(out);
    }
    let k = k as usize;
    if (first.samples[k].t - t).abs() > 1e-9 * first.dt.max(t.abs()) {
        return Err(out);
    }
    Ok(k)
}

/// `⟨u²⟩` across the ensemble at grid time `t`.
pub fn ensemble_msv(trajs: &[WalkerTrajectory], t: f64) -> Result<EstimateWithError, WalkerError> {
    check_ensemble(trajs)?;
    let k = sample_index(trajs, t)?;
    let u2: Vec<f64> = trajs.iter().map(|tr| tr.samples[k].u.powi(2)).collect();
    Ok(mean_with_stderr(&u2))
}

/// `⟨u²(t)⟩` at every recorded time.
pub fn ensemble_msv_series(
    trajs: &[WalkerTrajectory],
) -> Result<Vec<(f64, EstimateWithError)>, WalkerError> {
    check_ensemble(trajs)?;
    Ok((0..trajs[0].samples.len())
        .map(|k| {
            let u2: Vec<f64> = trajs.iter().map(|tr| tr.samples[k].u.powi(2)).collect();
            (trajs[0].samples[k].t, mean_with_stderr(&u2))
        })
        .collect())
}

/// Mean-square displacement from each walker's first recorded position.
pub fn ensemble_msd(
    trajs: &[WalkerTrajectory],
) -> Result<Vec<(f64, EstimateWithError)>, WalkerError> {
    check_ensemble(trajs)?;
    Ok((0..trajs[0].samples.len())
        .map(|k| {
            let d2: Vec<f64> = trajs
                .iter()
                .map(|tr| (tr.samples[k].x - tr.samples[0].x).powi(2))
                .collect();
            (trajs[0].samples[k].t, mean_with_stderr(&d2))
        })
        .collect())
}

/// Diffusion constant from the MSD over `window`.
///
/// Walkers started from equilibrium have `MSD(t) = 2D·g(t)` with
/// `g(t) = t - (1 - e^{-ζt})/ζ` (times counted from the first recorded
/// sample). Regressing each walker's squared displacement on `g` gives an
/// unbiased slope `2D` for any window, including windows that start before
/// the MSD has become linear in `t`. The slope is linear in the data, so the
/// mean of per-walker slopes is the slope of the ensemble MSD, and their
/// spread gives a standard error that accounts for the correlation between
/// MSD values at different times.
pub fn fit_diffusion(
    trajs: &[WalkerTrajectory],
    window: (f64, f64),
    model: &NoiseModel,
) -> Result<EstimateWithError, WalkerError> {
    check_ensemble(trajs)?;
    let (lo, hi) = window;
    let samples = &trajs[0].samples;
    let t_min = samples[0].t;
    let t_max = samples[samples.len() - 1].t;
    let slack = 1e-9 * trajs[0].dt;
    if !(lo < hi) || lo < t_min - slack || hi > t_max + slack {
        return Err(WalkerError::WindowOutOfRange {
            lo,
            hi,
            min: t_min,
            max: t_max,
        });
    }
    let idx: Vec<usize> = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.t >= lo - slack && s.t <= hi + slack)
        .map(|(k, _)| k)
        .collect();
    if idx.len() < 3 {
        return Err(WalkerError::TooFewSamples {
            have: idx.len(),
            need: 3,
        });
    }
    let g: Vec<f64> = idx
        .iter()
        .map(|&k| {
            let t = samples[k].t - t_min;
            t - one_minus_exp(model.zeta * t) / model.zeta
        })
        .collect();
    let weights = ols_slope_weights(&g);
    let per_walker: Vec<f64> = trajs
        .iter()
        .map(|tr| {
            let x0 = tr.samples[0].x;
            let terms = idx
                .iter()
                .zip(&weights)
                .map(|(&k, w)| w * (tr.samples[k].x - x0).powi(2));
            0.5 * neumaier_sum(terms)
        })
        .collect();
    Ok(mean_with_stderr(&per_walker))
}

/// Normalised velocity autocorrelation `⟨u(t) u(t+Δ)⟩ / ⟨u(t)²⟩` at lags
/// given in steps, averaged over all time origins and walkers. Lag zero is
/// exactly 1.
pub fn velocity_autocorrelation(
    trajs: &[WalkerTrajectory],
    lags: &[usize],
) -> Result<Vec<(f64, EstimateWithError)>, WalkerError> {
    check_ensemble(trajs)?;
    let n = trajs[0].samples.len();
    lags.iter()
        .map(|&lag| {
            if lag >= n {
                return Err(WalkerError::TooFewSamples {
                    have: n,
                    need: lag + 1,
                });
            }
            let origins = n - lag;
            let (num, den): (Vec<f64>, Vec<f64>) = trajs
                .iter()
                .map(|tr| {
                    let s = &tr.samples;
                    let a = neumaier_sum((0..origins).map(|k| s[k].u * s[k + lag].u));
                    let b = neumaier_sum((0..origins).map(|k| s[k].u * s[k].u));
                    (a / origins as f64, b / origins as f64)
                })
                .unzip();
            Ok((lag as f64 * trajs[0].dt, ratio_of_means(&num, &den)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{canonical_params, derive_constants};
    use crate::rng::domain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn canon() -> NoiseModel {
        let p = canonical_params(1.0, 1.0, 1.0).unwrap();
        NoiseModel::from_params(&p, &derive_constants(&p))
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn at(x: f64, u: f64) -> WalkerState {
        WalkerState { x, u, t: 0.0 }
    }

    #[test]
    fn model_constants() {
        let m = canon();
        assert_eq!((m.lambda, m.zeta, m.m), (4.0, 2.0, 1.0));
        assert_eq!(m.equilibrium_msv(), 1.0);
        assert_eq!(m.zero_point_energy(), 0.5);
        assert_eq!(m.diffusion(), 0.5);
    }

    #[test]
    fn exact_step_noiseless_decay() {
        let model = NoiseModel::new(0.0, 2.0, 1.0);
        let s = ou_exact_step(at(0.0, 1.0), 0.3, &model, 1.7, -0.4);
        assert_eq!(s.u, (-0.6f64).exp());
        assert!((s.x - (1.0 - (-0.6f64).exp()) / 2.0).abs() < 1e-16);
    }

    #[test]
    fn exact_step_decay_factor() {
        // ζ dt = 0.5 at dt = 0.25; ζ dt = 1 at dt = 0.5.
        let s = ou_exact_step(at(0.0, 2.0), 0.25, &canon(), 0.0, 0.0);
        assert!(rel(s.u, 1.213_061_319_425_266_8) < 1e-15);
        let s = ou_exact_step(at(0.0, 2.0), 0.5, &canon(), 0.0, 0.0);
        assert!(rel(s.u, 0.735_758_882_342_884_6) < 1e-15);
    }

    #[test]
    fn integrated_variance_series_matches_direct_form() {
        for h in [1e-3, 5e-3, 9.99e-3] {
            let h: f64 = h;
            let direct = h + 2.0 * (-h).exp_m1() - 0.5 * (-2.0 * h).exp_m1();
            assert!(rel(integrated_variance_factor(h), direct) < 1e-9);
        }
        // Both branches agree at the switch.
        let below = integrated_variance_factor(1e-2 * (1.0 - 1e-12));
        let above = integrated_variance_factor(1e-2);
        assert!(rel(below, above) < 1e-9);
    }

    #[test]
    fn exact_step_moments() {
        // Sample the transition from a fixed state and compare the joint
        // moments with the closed form.
        let model = canon();
        let dt = 0.3;
        let n = 200_000;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let start = at(0.0, 0.5);
        let draws: Vec<WalkerState> = (0..n)
            .map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                ou_exact_step(start, dt, &model, a, b)
            })
            .collect();
        let a = (-model.zeta * dt).exp();
        let b2 = model.lambda;
        let z = model.zeta;
        let var_u = b2 / (2.0 * z) * (1.0 - a * a);
        let var_x = b2 / z.powi(3) * (z * dt - 2.0 * (1.0 - a) + (1.0 - a * a) / 2.0);
        let cov = b2 / (2.0 * z * z) * (1.0 - a).powi(2);
        let mu = 0.5 * a;
        let mx = 0.5 * (1.0 - a) / z;
        let uu: Vec<f64> = draws.iter().map(|s| (s.u - mu).powi(2)).collect();
        let xx: Vec<f64> = draws.iter().map(|s| (s.x - mx).powi(2)).collect();
        let xu: Vec<f64> = draws.iter().map(|s| (s.x - mx) * (s.u - mu)).collect();
        for (est, target) in [
            (mean_with_stderr(&uu), var_u),
            (mean_with_stderr(&xx), var_x),
            (mean_with_stderr(&xu), cov),
        ] {
            assert!(est.z_score(target) < 4.0, "{est:?} vs {target}");
        }
    }

    #[test]
    fn exact_step_preserves_stationary_law() {
        let model = canon();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sd = model.equilibrium_msv().sqrt();
        let n = 100_000;
        let moved: Vec<f64> = (0..n)
            .map(|_| {
                let u = sd * rng.sample::<f64, _>(StandardNormal);
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                ou_exact_step(at(0.0, u), 0.4, &model, a, b).u
            })
            .collect();
        let mean = mean_with_stderr(&moved);
        assert!(mean.z_score(0.0) < 4.0);
        let sq: Vec<f64> = moved.iter().map(|u| u * u).collect();
        assert!(mean_with_stderr(&sq).z_score(1.0) < 4.0);
        let quart: Vec<f64> = moved.iter().map(|u| u.powi(4)).collect();
        assert!(mean_with_stderr(&quart).z_score(3.0) < 4.0);
    }

    #[test]
    fn euler_step_examples() {
        let model = NoiseModel::new(0.0, 2.0, 1.0);
        let s = euler_maruyama_step(at(0.0, 1.0), 0.01, &model, 0.3).unwrap();
        assert!((s.u - 0.98).abs() < 1e-15);
        assert_eq!(s.x, 0.01);
        let err = euler_maruyama_step(at(0.0, 1.0), 0.5, &model, 0.0).unwrap_err();
        assert!(matches!(err, WalkerError::StepTooLarge { .. }));
        // The limit itself is accepted.
        assert!(euler_maruyama_step(at(0.0, 1.0), 0.05, &model, 0.0).is_ok());
    }

    #[test]
    fn euler_one_step_variance() {
        let model = canon();
        let dt = 0.01;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u2: Vec<f64> = (0..100_000)
            .map(|_| {
                let xi: f64 = rng.sample(StandardNormal);
                euler_maruyama_step(at(0.0, 0.0), dt, &model, xi)
                    .unwrap()
                    .u
                    .powi(2)
            })
            .collect();
        assert!(mean_with_stderr(&u2).z_score(model.lambda * dt) < 4.0);
    }

    #[test]
    fn deterministic_limit() {
        let model = NoiseModel::new(0.0, 2.0, 1.0);
        let stream = StreamId::new(1, 0, 0);
        let tr =
            simulate_walker(&model, at(0.0, 1.0), 3.0, 0.05, stream, Integrator::OuExact).unwrap();
        for s in &tr.samples {
            assert!((s.u - (-2.0 * s.t).exp()).abs() < 1e-12);
        }
        let tr = simulate_walker(
            &model,
            at(0.0, 1.0),
            3.0,
            0.001,
            stream,
            Integrator::EulerMaruyama,
        )
        .unwrap();
        let worst = tr
            .samples
            .iter()
            .map(|s| (s.u - (-2.0 * s.t).exp()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3 && worst > 0.0, "{worst}");
    }

    #[test]
    fn simulation_is_reproducible() {
        let model = canon();
        let stream = StreamId::new(99, domain::WALKER_EQUILIBRIUM, 5);
        let a =
            simulate_walker(&model, at(0.0, 0.0), 2.0, 0.01, stream, Integrator::OuExact).unwrap();
        let b =
            simulate_walker(&model, at(0.0, 0.0), 2.0, 0.01, stream, Integrator::OuExact).unwrap();
        assert_eq!(a.samples, b.samples);
        let other = StreamId { index: 6, ..stream };
        let c =
            simulate_walker(&model, at(0.0, 0.0), 2.0, 0.01, other, Integrator::OuExact).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn euler_guard_on_whole_run() {
        let model = canon();
        let err = simulate_walker(
            &model,
            at(0.0, 0.0),
            1.0,
            0.5,
            StreamId::new(0, 0, 0),
            Integrator::EulerMaruyama,
        )
        .unwrap_err();
        assert!(matches!(err, WalkerError::StepTooLarge { .. }));
    }

    #[test]
    fn msv_closed_form() {
        let model = canon();
        assert_eq!(msv_analytic(&model, 0.0, 2.0), 4.0);
        assert!(rel(msv_analytic(&model, 100.0, 2.0), 1.0) < 1e-15);
        // 1 + 3/e
        assert!(rel(msv_analytic(&model, 0.25, 2.0), 2.103_638_323_514_327) < 1e-15);
    }

    #[test]
    fn msd_closed_form() {
        let model = canon();
        assert_eq!(msd_analytic(&model, 10.0).asymptotic, 10.0);
        let zero = msd_analytic(&model, 0.0);
        assert_eq!((zero.asymptotic, zero.exact), (0.0, 0.0));
        let half = msd_analytic(&model, 0.5);
        assert_eq!(half.asymptotic, 0.5);
        assert!(rel(half.exact, 0.183_939_720_585_721_16) < 1e-14);
    }

    #[test]
    fn work_closed_form() {
        let p = canonical_params(1.0, 1.0, 1.0).unwrap();
        let d = derive_constants(&p);
        assert!(rel(walker_work(&p, &d, 1), 4.0 * PI) < 1e-15);
        assert!(rel(walker_work(&p, &d, 3), 12.0 * PI) < 1e-15);
        let p3 = p.with_n_dof(3).unwrap();
        let mut d3 = derive_constants(&p3);
        // Keep E_zp of the one-dimensional case to see the factor N.
        d3.e_zp = d.e_zp;
        assert!(rel(walker_work(&p3, &d3, 1), 12.0 * PI) < 1e-15);
    }

    #[test]
    fn quadrature_work_matches_closed_form() {
        let p = canonical_params(1.0, 1.0, 1.0).unwrap();
        let d = derive_constants(&p);
        let model = NoiseModel::from_params(&p, &d);
        let spec = EnsembleSpec {
            count: 2000,
            u0: 0.0,
            burn_in: 5.0,
            duration: 3.0 * d.tau,
            dt: d.tau / 200.0,
            integrator: Integrator::OuExact,
            master_seed: 5,
            domain: domain::WALKER_EQUILIBRIUM,
        };
        let trajs = simulate_ensemble(&model, &spec).unwrap();
        let w = walker_work_quadrature(&trajs, &model, p.n_dof).unwrap();
        assert!(w.z_score(walker_work(&p, &d, 3)) < 4.0, "{w:?}");
    }

    #[test]
    fn estimator_errors() {
        let model = canon();
        let one = vec![simulate_walker(
            &model,
            at(0.0, 0.0),
            1.0,
            0.1,
            StreamId::new(0, 0, 0),
            Integrator::OuExact,
        )
        .unwrap()];
        assert!(matches!(
            ensemble_msv(&one, 0.0),
            Err(WalkerError::TooFewSamples { .. })
        ));
        let spec = EnsembleSpec {
            count: 4,
            u0: 0.0,
            burn_in: 0.0,
            duration: 10.0,
            dt: 0.1,
            integrator: Integrator::OuExact,
            master_seed: 0,
            domain: 0,
        };
        let trajs = simulate_ensemble(&model, &spec).unwrap();
        assert!(matches!(
            fit_diffusion(&trajs, (-1.0, 10.0), &model),
            Err(WalkerError::WindowOutOfRange { .. })
        ));
        assert!(matches!(
            fit_diffusion(&trajs, (3.0, 3.1), &model),
            Err(WalkerError::TooFewSamples { .. })
        ));
        assert!(matches!(
            fit_diffusion(&trajs, (2.5, 12.0), &model),
            Err(WalkerError::WindowOutOfRange { .. })
        ));
        assert!(matches!(
            ensemble_msv(&trajs, 11.0),
            Err(WalkerError::WindowOutOfRange { .. })
        ));
        assert!(matches!(
            ensemble_msv(&trajs, 0.05),
            Err(WalkerError::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn noiseless_ensemble_does_not_diffuse() {
        let model = NoiseModel::new(0.0, 2.0, 1.0);
        let spec = EnsembleSpec {
            count: 8,
            u0: 0.0,
            burn_in: 5.0,
            duration: 10.0,
            dt: 0.1,
            integrator: Integrator::OuExact,
            master_seed: 1,
            domain: 0,
        };
        let trajs = simulate_ensemble(&model, &spec).unwrap();
        let d = fit_diffusion(&trajs, (2.5, 10.0), &model).unwrap();
        assert_eq!((d.value, d.stderr), (0.0, 0.0));
        assert!(ensemble_msd(&trajs)
            .unwrap()
            .iter()
            .all(|(_, e)| e.value == 0.0));
    }

    #[test]
    fn ensemble_statistics_match_oracles() {
        let model = canon();
        let spec = EnsembleSpec {
            count: 10_000,
            u0: 0.0,
            burn_in: 5.0,
            duration: 10.0,
            dt: 0.05,
            integrator: Integrator::OuExact,
            master_seed: 2024,
            domain: domain::WALKER_EQUILIBRIUM,
        };
        let trajs = simulate_ensemble(&model, &spec).unwrap();
        let msv = ensemble_msv(&trajs, 0.0).unwrap();
        assert!(msv.z_score(1.0) < 3.0, "{msv:?}");
        let d = fit_diffusion(&trajs, (2.5, 10.0), &model).unwrap();
        assert!(d.z_score(0.5) < 3.0, "{d:?}");
        // Small-time MSD follows the exact integrated-OU form.
        let msd = ensemble_msd(&trajs).unwrap();
        let (t, e) = msd[10];
        assert!(e.z_score(msd_analytic(&model, t).exact) < 4.0);
        // Correlation time 1/ζ: ten steps of 0.05.
        let acf = velocity_autocorrelation(&trajs, &[0, 10]).unwrap();
        assert_eq!(acf[0].1.value, 1.0);
        assert!(acf[1].1.z_score((-1.0f64).exp()) < 3.0, "{:?}", acf[1]);
    }

    #[test]
    fn diffusion_fit_is_unbiased_before_the_linear_regime() {
        // ζ = 1: over [0.5, 3] the MSD is far from linear in t, and a plain
        // linear fit would come out about 20% low.
        let model = NoiseModel::new(4.0, 1.0, 1.0);
        let spec = EnsembleSpec {
            count: 10_000,
            u0: 0.0,
            burn_in: 10.0,
            duration: 3.0,
            dt: 0.05,
            integrator: Integrator::OuExact,
            master_seed: 5,
            domain: domain::WALKER_EQUILIBRIUM,
        };
        let trajs = simulate_ensemble(&model, &spec).unwrap();
        let d = fit_diffusion(&trajs, (0.5, 3.0), &model).unwrap();
        assert!(d.z_score(model.diffusion()) < 3.0, "{d:?}");
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let model = canon();
        let spec = EnsembleSpec {
            count: 64,
            u0: 1.0,
            burn_in: 1.0,
            duration: 1.0,
            dt: 0.1,
            integrator: Integrator::OuExact,
            master_seed: 77,
            domain: domain::WALKER_EQUILIBRIUM,
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_ensemble(&model, &spec).unwrap())
        };
        let a = run(1);
        let b = run(5);
        assert_eq!(a, b);
        assert_eq!(
            fit_diffusion(&a, (0.0, 1.0), &model).unwrap(),
            fit_diffusion(&b, (0.0, 1.0), &model).unwrap()
        );
        assert_eq!(
            ensemble_msv(&a, 1.0).unwrap(),
            ensemble_msv(&b, 1.0).unwrap()
        );
    }

    #[test]
    fn euler_maruyama_weak_first_order() {
        // Stationary ⟨u²⟩ of the scheme is b²/(ζ(2 - ζdt)), so its bias
        // relative to the exact λ/(2ζm²) is ζdt/(2 - ζdt): halving dt
        // roughly halves it.
        let model = canon();
        let exact = model.equilibrium_msv();
        let scheme = |dt: f64| model.lambda / (model.zeta * (2.0 - model.zeta * dt));
        let mut biases = Vec::new();
        for dt in [0.05, 0.025] {
            let spec = EnsembleSpec {
                count: 100_000,
                u0: 0.0,
                burn_in: 5.0,
                duration: 0.0,
                dt,
                integrator: Integrator::EulerMaruyama,
                master_seed: 8,
                domain: domain::WALKER_EULER,
            };
            let trajs = simulate_ensemble(&model, &spec).unwrap();
            let est = ensemble_msv(&trajs, 0.0).unwrap();
            assert!(est.z_score(scheme(dt)) < 4.0, "dt {dt}: {est:?}");
            assert!(est.z_score(exact) > 4.0, "dt {dt}: bias not resolved");
            biases.push(scheme(dt) - exact);
        }
        let ratio = biases[0] / biases[1];
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }
}
