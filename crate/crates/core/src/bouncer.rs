//! The bouncer: a driven, damped harmonic oscillator
//!
//! ```text
//! ẍ = -ω₀² x - 2γ ẋ + (F₀/m) cos(ωt)
//! ```
//!
//! integrated with a fixed-step classical Runge-Kutta scheme, together with
//! its closed-form stationary solution, per-period energy accounting, the
//! polar (circular-motion) picture and the heat ledger of one cycle.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{DerivedConstants, PhysicalParams};
use crate::stats::neumaier_sum;

/// Relative drift of the Hamiltonian over one period tolerated for a
/// segment to count as steady.
pub const STEADY_STATE_TOLERANCE: f64 = 1e-6;

/// Default number of integration steps per period.
pub const STEPS_PER_PERIOD: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BouncerError {
    #[error("step {dt} exceeds the limit {max} (one hundredth of a period)")]
    StepTooLarge { dt: f64, max: f64 },
    #[error("invalid time interval: dt = {dt}, t_end = {t_end}, t_start = {t_start}")]
    InvalidInterval { dt: f64, t_start: f64, t_end: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error(
        "segment is not in steady state: relative Hamiltonian drift {drift:e} over one period"
    )]
    NotSteadyState { drift: f64 },
    #[error("period {period} is not an integer multiple of the step {dt}")]
    PeriodMisaligned { period: f64, dt: f64 },
    #[error("trajectory has {have} samples, one period needs {need}")]
    TooShort { have: usize, need: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscState {
    pub x: f64,
    pub v: f64,
    pub t: f64,
}

impl OscState {
    pub fn at_rest(t: f64) -> Self {
        Self { x: 0.0, v: 0.0, t }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscTrajectory {
    pub dt: f64,
    pub samples: Vec<OscState>,
    pub drive_omega: f64,
    pub params: PhysicalParams,
}

impl OscTrajectory {
    /// The final stretch of samples covering exactly one drive period,
    /// both endpoints included.
    pub fn last_period(&self) -> Result<&[OscState], BouncerError> {
        let steps = steps_per_period(self.drive_omega, self.dt)?;
        let need = steps + 1;
        if self.samples.len() < need {
            return Err(BouncerError::TooShort {
                have: self.samples.len(),
                need,
            });
        }
        Ok(&self.samples[self.samples.len() - need..])
    }
}

fn steps_per_period(omega: f64, dt: f64) -> Result<usize, BouncerError> {
    let period = 2.0 * PI / omega;
    let steps = period / dt;
    let rounded = steps.round();
    if !(rounded >= 1.0) || (steps - rounded).abs() > 1e-6 * steps {
        return Err(BouncerError::PeriodMisaligned { period, dt });
    }
    Ok(rounded as usize)
}

/// `x(t) = A cos(ωt + φ)` with `φ ∈ (-π, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarySolution {
    pub amplitude: f64,
    pub phase: f64,
}

impl StationarySolution {
    pub fn position(&self, omega: f64, t: f64) -> f64 {
        self.amplitude * (omega * t + self.phase).cos()
    }

    pub fn velocity(&self, omega: f64, t: f64) -> f64 {
        -self.amplitude * omega * (omega * t + self.phase).sin()
    }

    pub fn state(&self, omega: f64, t: f64) -> OscState {
        OscState {
            x: self.position(omega, t),
            v: self.velocity(omega, t),
            t,
        }
    }
}

/// Amplitude and phase lag of the steady response to a drive at `omega`.
pub fn stationary_solution(p: &PhysicalParams, omega: f64) -> StationarySolution {
    let detuning = p.omega0 * p.omega0 - omega * omega;
    let damping = 2.0 * p.gamma * omega;
    let amplitude = (p.f0 / p.m) / detuning.hypot(damping);
    // atan2 of (-0, +) is -0; fold it onto the closed end of (-π, 0].
    let phase = (-damping).atan2(detuning);
    let phase = if phase == 0.0 { 0.0 } else { phase };
    StationarySolution { amplitude, phase }
}

/// Drive frequency that maximises the amplitude response, `√(ω₀² − 2γ²)`,
/// or zero when the response is monotone.
pub fn amplitude_peak_frequency(p: &PhysicalParams) -> f64 {
    let arg = p.omega0 * p.omega0 - 2.0 * p.gamma * p.gamma;
    if arg > 0.0 {
        arg.sqrt()
    } else {
        0.0
    }
}

fn acceleration(p: &PhysicalParams, omega: f64, t: f64, x: f64, v: f64) -> f64 {
    -p.omega0 * p.omega0 * x - 2.0 * p.gamma * v + (p.f0 / p.m) * (omega * t).cos()
}

fn rk4_step(p: &PhysicalParams, omega: f64, s: OscState, dt: f64) -> (f64, f64) {
    let h = 0.5 * dt;
    let k1x = s.v;
    let k1v = acceleration(p, omega, s.t, s.x, s.v);
    let k2x = s.v + h * k1v;
    let k2v = acceleration(p, omega, s.t + h, s.x + h * k1x, s.v + h * k1v);
    let k3x = s.v + h * k2v;
    let k3v = acceleration(p, omega, s.t + h, s.x + h * k2x, s.v + h * k2v);
    let k4x = s.v + dt * k3v;
    let k4v = acceleration(p, omega, s.t + dt, s.x + dt * k3x, s.v + dt * k3v);
    (
        s.x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        s.v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )
}

/// Integrates the oscillator from `init` up to (at least) `t_end`.
///
/// Samples sit at `init.t + k·dt`; the last one is the first grid point at or
/// beyond `t_end`.
pub fn integrate_bouncer(
    p: &PhysicalParams,
    omega: f64,
    init: OscState,
    t_end: f64,
    dt: f64,
) -> Result<OscTrajectory, BouncerError> {
    if !(dt > 0.0) || !(t_end > init.t) || !dt.is_finite() || !t_end.is_finite() {
        return Err(BouncerError::InvalidInterval {
            dt,
            t_start: init.t,
            t_end,
        });
    }
    let max = 2.0 * PI / p.omega0 / 100.0;
    if dt > max * (1.0 + 1e-12) {
        return Err(BouncerError::StepTooLarge { dt, max });
    }
    let steps = ((t_end - init.t) / dt - 1e-9).ceil() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(init);
    let mut state = init;
    for k in 1..=steps {
        let (x, v) = rk4_step(p, omega, state, dt);
        let t = init.t + k as f64 * dt;
        if !x.is_finite() || !v.is_finite() {
            return Err(BouncerError::NonFinite { t });
        }
        state = OscState { x, v, t };
        samples.push(state);
    }
    Ok(OscTrajectory {
        dt,
        samples,
        drive_omega: omega,
        params: *p,
    })
}

/// Time after which the transient has decayed by `e^-30` relative to the
/// stationary response, rounded up to whole periods.
pub fn settle_time(p: &PhysicalParams) -> f64 {
    let rate = if p.gamma < p.omega0 {
        p.gamma
    } else {
        p.gamma - (p.gamma * p.gamma - p.omega0 * p.omega0).sqrt()
    };
    let tau = 2.0 * PI / p.omega0;
    // Critical damping carries an extra factor t; a few periods cover it.
    let periods = (30.0 / rate / tau).ceil() + 2.0;
    periods * tau
}

/// Integrates from rest at resonance until the transient is gone and one
/// more full period has been recorded.
pub fn steady_state_trajectory(
    p: &PhysicalParams,
    steps_per_period: usize,
) -> Result<OscTrajectory, BouncerError> {
    let tau = 2.0 * PI / p.omega0;
    let dt = tau / steps_per_period as f64;
    let t_end = settle_time(p) + tau;
    integrate_bouncer(p, p.omega0, OscState::at_rest(0.0), t_end, dt)
}

pub fn hamiltonian(s: &OscState, p: &PhysicalParams) -> f64 {
    0.5 * p.m * s.v * s.v + 0.5 * p.m * p.omega0 * p.omega0 * s.x * s.x
}

pub fn kinetic_energy(s: &OscState, p: &PhysicalParams) -> f64 {
    0.5 * p.m * s.v * s.v
}

/// Relative Hamiltonian drift between the ends of a one-period segment.
fn check_steady(segment: &[OscState], p: &PhysicalParams) -> Result<(), BouncerError> {
    let h0 = hamiltonian(&segment[0], p);
    let h1 = hamiltonian(&segment[segment.len() - 1], p);
    let scale = h0.abs().max(h1.abs());
    let drift = if scale > 0.0 {
        (h1 - h0).abs() / scale
    } else {
        0.0
    };
    if drift > STEADY_STATE_TOLERANCE {
        return Err(BouncerError::NotSteadyState { drift });
    }
    Ok(())
}

fn trapezoid(dt: f64, values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    let weighted = values
        .enumerate()
        .map(|(i, v)| if i == 0 || i + 1 == n { 0.5 * v } else { v });
    dt * neumaier_sum(weighted)
}

pub enum WorkMethod<'a> {
    /// `γ m ω₀² r² τ = 2πγħ`.
    Analytic,
    /// Trapezoid quadrature of the drive power over the last period of a trajectory.
    Quadrature(&'a OscTrajectory),
}

/// Work taken up by the oscillator from the drive over one period.
pub fn work_per_period(
    p: &PhysicalParams,
    d: &DerivedConstants,
    method: WorkMethod<'_>,
) -> Result<f64, BouncerError> {
    match method {
        WorkMethod::Analytic => Ok(p.gamma * p.m * p.omega0 * p.omega0 * d.r * d.r * d.tau),
        WorkMethod::Quadrature(traj) => {
            let segment = traj.last_period()?;
            let p = &traj.params;
            if p.f0 == 0.0 {
                return Ok(0.0);
            }
            check_steady(segment, p)?;
            let omega = traj.drive_omega;
            Ok(trapezoid(
                traj.dt,
                segment.iter().map(|s| p.f0 * (omega * s.t).cos() * s.v),
            ))
        }
    }
}

/// `∫ (F₀ cos(ωt) v − 2γ m v²) dt` over the last period: the net change of
/// the Hamiltonian, zero in steady state.
pub fn net_power_balance(traj: &OscTrajectory) -> Result<f64, BouncerError> {
    let segment = traj.last_period()?;
    let p = &traj.params;
    let omega = traj.drive_omega;
    Ok(trapezoid(
        traj.dt,
        segment
            .iter()
            .map(|s| p.f0 * (omega * s.t).cos() * s.v - 2.0 * p.gamma * p.m * s.v * s.v),
    ))
}

/// Amplitude and phase of the last recorded period, by projecting `x(t)` on
/// `cos ωt` and `sin ωt`.
pub fn fit_stationary(traj: &OscTrajectory) -> Result<StationarySolution, BouncerError> {
    let segment = traj.last_period()?;
    let omega = traj.drive_omega;
    // Uniform samples over one full period: drop the duplicated endpoint.
    let body = &segment[..segment.len() - 1];
    let n = body.len() as f64;
    let a = 2.0 / n * neumaier_sum(body.iter().map(|s| s.x * (omega * s.t).cos()));
    let b = 2.0 / n * neumaier_sum(body.iter().map(|s| s.x * (omega * s.t).sin()));
    Ok(StationarySolution {
        amplitude: a.hypot(b),
        phase: (-b).atan2(a),
    })
}

/// Largest deviation of the samples with `t >= t_from` from `sol`, relative
/// to the stationary amplitude (position) and `A·ω` (velocity).
pub fn max_relative_deviation(traj: &OscTrajectory, sol: &StationarySolution, t_from: f64) -> f64 {
    let omega = traj.drive_omega;
    traj.samples
        .iter()
        .filter(|s| s.t >= t_from)
        .map(|s| {
            let dx = (s.x - sol.position(omega, s.t)).abs() / sol.amplitude;
            let dv = (s.v - sol.velocity(omega, s.t)).abs() / (sol.amplitude * omega);
            dx.max(dv)
        })
        .fold(0.0, f64::max)
}

/// Motion in the plane `(x, -v/ω₀)` in polar form: radius and unwrapped angle.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularEmbedding {
    pub dt: f64,
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
}

impl CircularEmbedding {
    /// Uniform circle of radius `r` traversed at angular rate `omega`.
    pub fn uniform(r: f64, omega: f64, phase: f64, dt: f64, n: usize) -> Self {
        Self {
            dt,
            r: vec![r; n],
            theta: (0..n).map(|k| omega * k as f64 * dt + phase).collect(),
        }
    }

    /// Reconstructs the circle from an oscillator trajectory; for the
    /// stationary solution at resonance this gives `r = A`, `θ = ω₀t + φ`.
    pub fn from_trajectory(samples: &[OscState], dt: f64, omega0: f64) -> Self {
        let mut r = Vec::with_capacity(samples.len());
        let mut theta = Vec::with_capacity(samples.len());
        let mut offset = 0.0;
        let mut prev: Option<f64> = None;
        for s in samples {
            let y = -s.v / omega0;
            r.push(s.x.hypot(y));
            let raw = y.atan2(s.x);
            if let Some(p) = prev {
                let jump = raw + offset - p;
                if jump < -PI {
                    offset += 2.0 * PI;
                } else if jump > PI {
                    offset -= 2.0 * PI;
                }
            }
            let unwrapped = raw + offset;
            theta.push(unwrapped);
            prev = Some(unwrapped);
        }
        Self { dt, r, theta }
    }

    fn derivatives(series: &[f64], dt: f64, k: usize) -> (f64, f64) {
        let d1 = (series[k + 1] - series[k - 1]) / (2.0 * dt);
        let d2 = (series[k + 1] - 2.0 * series[k] + series[k - 1]) / (dt * dt);
        (d1, d2)
    }

    /// Centered-difference angular rate at interior samples.
    pub fn theta_dot(&self) -> Vec<f64> {
        (1..self.theta.len().saturating_sub(1))
            .map(|k| Self::derivatives(&self.theta, self.dt, k).0)
            .collect()
    }

    /// Radii matching [`Self::theta_dot`].
    pub fn interior_r(&self) -> &[f64] {
        let n = self.r.len();
        if n < 3 {
            &[]
        } else {
            &self.r[1..n - 1]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarResiduals {
    /// `max |r̈ − r θ̇² + ω₀² r|`.
    pub radial: f64,
    /// `max |r θ̈ + 2 ṙ θ̇|`.
    pub tangential: f64,
}

/// Residuals of the polar equations of motion, by centered differences.
pub fn polar_residuals(emb: &CircularEmbedding, p: &PhysicalParams) -> PolarResiduals {
    let mut radial = 0.0_f64;
    let mut tangential = 0.0_f64;
    for k in 1..emb.r.len().saturating_sub(1) {
        let r = emb.r[k];
        let (r_dot, r_ddot) = CircularEmbedding::derivatives(&emb.r, emb.dt, k);
        let (th_dot, th_ddot) = CircularEmbedding::derivatives(&emb.theta, emb.dt, k);
        radial = radial.max((r_ddot - r * th_dot * th_dot + p.omega0 * p.omega0 * r).abs());
        tangential = tangential.max((r * th_ddot + 2.0 * r_dot * th_dot).abs());
    }
    PolarResiduals { radial, tangential }
}

/// `L(t) = m r² θ̇` for time-aligned series.
pub fn angular_momentum_series(r: &[f64], theta_dot: &[f64], m: f64) -> Vec<f64> {
    r.iter()
        .zip(theta_dot)
        .map(|(r, w)| m * r * r * w)
        .collect()
}

/// Per-period heat bookkeeping of the kinetic energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatCycleLedger {
    /// `∫ max(dE_kin/dt, 0) dt` over the period.
    pub absorbed: f64,
    /// `∫ max(-dE_kin/dt, 0) dt` over the period.
    pub emitted: f64,
    /// Energy throughput of the cycle; compare with `E_tot`.
    pub throughput: f64,
    pub ekin_min: f64,
    pub ekin_max: f64,
}

/// Heat ledger of the last period of a steady-state trajectory.
pub fn heat_cycle_ledger(traj: &OscTrajectory) -> Result<HeatCycleLedger, BouncerError> {
    let segment = traj.last_period()?;
    check_steady(segment, &traj.params)?;
    Ok(ledger_of(segment, &traj.params, true))
}

/// Heat ledger of an arbitrary segment, without the steady-state check.
/// Useful for diagnosing transients and decays.
pub fn heat_cycle_ledger_unchecked(segment: &[OscState], p: &PhysicalParams) -> HeatCycleLedger {
    ledger_of(segment, p, false)
}

/// Splits `E_kin(t)` into monotone runs between its turning points and sums
/// the rises and falls. The integral of the positive (negative) part of the
/// derivative over a monotone run is exactly the run's rise (fall), so only
/// the turning values need resolving: each is located by a sign change of
/// the centered-difference derivative and refined by the parabola through
/// the three neighbouring samples.
///
/// `cyclic` treats the segment as one period of a periodic signal (its last
/// sample repeating the first), which removes any bias from where the
/// period boundary falls.
fn ledger_of(segment: &[OscState], p: &PhysicalParams, cyclic: bool) -> HeatCycleLedger {
    let ekin: Vec<f64> = segment.iter().map(|s| kinetic_energy(s, p)).collect();
    let n = ekin.len();
    if n < 3 {
        let rise = if n == 2 { ekin[1] - ekin[0] } else { 0.0 };
        return HeatCycleLedger {
            absorbed: rise.max(0.0),
            emitted: (-rise).max(0.0),
            throughput: rise.max(0.0),
            ekin_min: ekin.iter().copied().fold(f64::INFINITY, f64::min),
            ekin_max: ekin.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        };
    }

    let turning_at = |prev: f64, here: f64, next: f64| -> Option<f64> {
        let left = here - prev;
        let right = next - here;
        let is_max = left > 0.0 && right <= 0.0;
        let is_min = left < 0.0 && right >= 0.0;
        if !(is_max || is_min) {
            return None;
        }
        // Parabola through the three samples; `slope` is the centered
        // difference derivative (times 2dt), `curv` the second difference.
        let slope = 0.5 * (next - prev);
        let curv = next - 2.0 * here + prev;
        if curv == 0.0 {
            Some(here)
        } else {
            Some(here - slope * slope / (2.0 * curv))
        }
    };

    let mut turning = Vec::new();
    if cyclic {
        // Samples 0..n-1 are one period; sample n-1 duplicates sample 0.
        let m = n - 1;
        for k in 0..m {
            let prev = ekin[(k + m - 1) % m];
            let next = ekin[(k + 1) % m];
            if let Some(e) = turning_at(prev, ekin[k], next) {
                turning.push(e);
            }
        }
        if let Some(&first) = turning.first() {
            turning.push(first);
        } else {
            turning.extend([ekin[0], ekin[m]]);
        }
    } else {
        turning.push(ekin[0]);
        for k in 1..n - 1 {
            if let Some(e) = turning_at(ekin[k - 1], ekin[k], ekin[k + 1]) {
                turning.push(e);
            }
        }
        turning.push(ekin[n - 1]);
    }

    let rises = turning.windows(2).map(|w| (w[1] - w[0]).max(0.0));
    let falls = turning.windows(2).map(|w| (w[0] - w[1]).max(0.0));
    let absorbed = neumaier_sum(rises);
    let emitted = neumaier_sum(falls);
    let all = turning.iter().chain(&ekin).copied();
    let (ekin_min, ekin_max) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
        (lo.min(e), hi.max(e))
    });
    HeatCycleLedger {
        absorbed,
        emitted,
        throughput: absorbed,
        ekin_min: ekin_min.max(0.0),
        ekin_max,
    }
}
