//! Relation checks and the verification report.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bouncer::{
    angular_momentum_series, fit_stationary, hamiltonian, heat_cycle_ledger,
    max_relative_deviation, net_power_balance, polar_residuals, settle_time, stationary_solution,
    steady_state_trajectory, work_per_period, CircularEmbedding, HeatCycleLedger, WorkMethod,
};
use crate::cli::{ConfigError, EnsembleBlock, RunConfig};
use crate::constants::{
    bouncer_work_per_period, derive_constants, DerivedConstants, PhysicalParams,
};
use crate::ensemble::{
    ballistic_evolve, ballistic_variance, check_energy_conservation, crossover_time,
    dual_form_width, empirical_kinetic_split, heat_gradient, initial_u0, kinetic_decomposition,
    osmotic_kinetic_energy, prepare_gaussian_batch, restframe_variance, spread_series,
    EnsembleError, GaussianPrep, KineticSplit,
};
use crate::rng::domain;
use crate::stats::EstimateWithError;
use crate::walker::{
    ensemble_msv, ensemble_msv_series, fit_diffusion, msv_analytic, simulate_ensemble, walker_work,
    walker_work_quadrature, EnsembleSpec, Integrator, NoiseModel,
};

/// Relative tolerance for identities between closed forms.
pub const ALGEBRAIC_TOLERANCE: f64 = 1e-10;
/// Relative tolerance for deterministic numerical results.
pub const NUMERIC_TOLERANCE: f64 = 1e-6;
/// Allowed deviation of a Monte-Carlo estimate, in standard errors.
pub const STATISTICAL_SIGMAS: f64 = 3.0;
/// Absolute floor of the statistical criterion.
pub const STATISTICAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Algebraic,
    DeterministicNumeric,
    Statistical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

/// What a relation assumes about the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Premise {
    /// Holds for any valid parameter set.
    General,
    /// Holds only when `γ = ζ = 2ω₀`.
    CanonicalCoupling,
}

/// One checked relation `lhs == rhs`.
///
/// `tolerance` is the bound actually applied: relative for algebraic and
/// deterministic-numeric checks, absolute for statistical ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub kind: CheckKind,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub stderr: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub verdict: Verdict,
    pub premise: Premise,
    /// The relation being checked, in words and symbols.
    #[serde(rename = "paper_anchor")]
    pub relation: String,
}

fn relative(abs_error: f64, rhs: f64) -> f64 {
    if rhs == 0.0 {
        abs_error
    } else {
        abs_error / rhs.abs()
    }
}

impl CheckResult {
    /// Compares with an explicit relative tolerance.
    pub fn relative(
        name: impl Into<String>,
        kind: CheckKind,
        lhs: f64,
        rhs: f64,
        tolerance: f64,
        relation: impl Into<String>,
    ) -> Self {
        let abs_error = (lhs - rhs).abs();
        let rel_error = relative(abs_error, rhs);
        let pass = rel_error <= tolerance;
        Self {
            name: name.into(),
            kind,
            lhs,
            rhs,
            abs_error,
            rel_error,
            stderr: None,
            tolerance,
            pass,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            premise: Premise::General,
            relation: relation.into(),
        }
    }

    pub fn algebraic(
        name: impl Into<String>,
        lhs: f64,
        rhs: f64,
        relation: impl Into<String>,
    ) -> Self {
        Self::relative(
            name,
            CheckKind::Algebraic,
            lhs,
            rhs,
            ALGEBRAIC_TOLERANCE,
            relation,
        )
    }

    pub fn numeric(
        name: impl Into<String>,
        lhs: f64,
        rhs: f64,
        relation: impl Into<String>,
    ) -> Self {
        Self::relative(
            name,
            CheckKind::DeterministicNumeric,
            lhs,
            rhs,
            NUMERIC_TOLERANCE,
            relation,
        )
    }

    /// `|estimate - rhs| ≤ max(3·stderr, 1e-12)`.
    pub fn statistical(
        name: impl Into<String>,
        estimate: EstimateWithError,
        rhs: f64,
        relation: impl Into<String>,
    ) -> Self {
        let lhs = estimate.value;
        let abs_error = (lhs - rhs).abs();
        let tolerance = (STATISTICAL_SIGMAS * estimate.stderr).max(STATISTICAL_FLOOR);
        let pass = abs_error <= tolerance;
        Self {
            name: name.into(),
            kind: CheckKind::Statistical,
            lhs,
            rhs,
            abs_error,
            rel_error: relative(abs_error, rhs),
            stderr: Some(estimate.stderr),
            tolerance,
            pass,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            premise: Premise::General,
            relation: relation.into(),
        }
    }

    /// Marks the check as skipped: it counts as passing but says so.
    pub fn not_applicable(mut self) -> Self {
        self.pass = true;
        self.verdict = Verdict::NotApplicable;
        self
    }

    pub fn with_premise(mut self, premise: Premise) -> Self {
        self.premise = premise;
        self
    }
}

impl CheckResult {
    /// Passes when the estimate is *distinguishable* from `rhs`: the
    /// deviation exceeds `max(3·stderr, 1e-12)`.
    pub fn statistical_distinct(
        name: impl Into<String>,
        estimate: EstimateWithError,
        rhs: f64,
        relation: impl Into<String>,
    ) -> Self {
        let mut r = Self::statistical(name, estimate, rhs, relation);
        r.pass = r.abs_error > r.tolerance;
        r.verdict = if r.pass { Verdict::Pass } else { Verdict::Fail };
        r
    }

    /// A failed check standing in for a computation that could not run.
    pub fn errored(
        name: impl Into<String>,
        kind: CheckKind,
        error: impl std::fmt::Display,
    ) -> Self {
        Self {
            name: name.into(),
            kind,
            lhs: f64::NAN,
            rhs: f64::NAN,
            abs_error: f64::NAN,
            rel_error: f64::NAN,
            stderr: None,
            tolerance: f64::NAN,
            pass: false,
            verdict: Verdict::Fail,
            premise: Premise::General,
            relation: format!("not evaluated: {error}"),
        }
    }

    /// How far the check is from its limit: `abs_error / tolerance`.
    fn strain(&self) -> f64 {
        if self.tolerance > 0.0 {
            self.abs_error / self.tolerance
        } else if self.abs_error == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// The result with the largest error relative to its tolerance.
fn worst(results: impl IntoIterator<Item = CheckResult>) -> Option<CheckResult> {
    results
        .into_iter()
        .max_by(|a, b| a.strain().total_cmp(&b.strain()))
}

/// Whether `γ = ζ = 2ω₀` holds exactly.
pub fn coupling_holds(p: &PhysicalParams) -> bool {
    p.gamma == 2.0 * p.omega0 && p.zeta == 2.0 * p.omega0
}

/// `γ = ζ = 2ω₀`, exactly. Reports whichever friction deviates more.
pub fn check_coupling(p: &PhysicalParams) -> CheckResult {
    let target = 2.0 * p.omega0;
    let lhs = if (p.gamma - target).abs() >= (p.zeta - target).abs() {
        p.gamma
    } else {
        p.zeta
    };
    CheckResult::relative(
        "coupling",
        CheckKind::Algebraic,
        lhs,
        target,
        0.0,
        "γ = ζ = 2ω₀",
    )
    .with_premise(Premise::CanonicalCoupling)
}

/// `λ = 4ζmE_zp`.
pub fn check_einstein(p: &PhysicalParams, d: &DerivedConstants) -> CheckResult {
    CheckResult::algebraic(
        "einstein",
        d.lambda,
        4.0 * p.zeta * p.m * d.e_zp,
        "λ = 4ζmE_zp",
    )
}

/// `(m/2)⟨u²⟩ = E_zp` for an equilibrium ensemble; `kinetic` is the
/// estimate of the left side.
pub fn check_equipartition(kinetic: EstimateWithError, d: &DerivedConstants) -> CheckResult {
    CheckResult::statistical(
        "equipartition",
        kinetic,
        d.e_zp,
        "(m/2)⟨u²⟩ = E_zp = λ/(4ζm)",
    )
}

/// Fitted `D̂` against `λ/(2ζ²m²)`, the Einstein form `2E_zp/(ζm)` and,
/// when the coupling holds with one degree of freedom, `ħ/2m`.
pub fn check_diffusion(
    fit: EstimateWithError,
    p: &PhysicalParams,
    d: &DerivedConstants,
) -> Vec<CheckResult> {
    let model_d = d.lambda / (2.0 * p.zeta * p.zeta * p.m * p.m);
    let hbar_d = d.hbar / (2.0 * p.m);
    let applies = coupling_holds(p) && p.n_dof == 1;
    let gate = |r: CheckResult| {
        let r = r.with_premise(Premise::CanonicalCoupling);
        if applies {
            r
        } else {
            r.not_applicable()
        }
    };
    vec![
        CheckResult::statistical("diffusion_fit", fit, model_d, "D̂ = λ/(2ζ²m²)"),
        CheckResult::algebraic(
            "diffusion_einstein",
            model_d,
            2.0 * d.e_zp / (p.zeta * p.m),
            "λ/(2ζ²m²) = 2E_zp/(ζm)",
        ),
        gate(CheckResult::algebraic(
            "diffusion_hbar",
            d.diffusion,
            hbar_d,
            "D = ħ/2m",
        )),
        gate(CheckResult::statistical(
            "diffusion_fit_hbar",
            fit,
            hbar_d,
            "D̂ = ħ/2m",
        )),
    ]
}

/// `n·W_bouncer = W_walker(n)`.
pub fn check_work_matching(p: &PhysicalParams, d: &DerivedConstants, n: u64) -> CheckResult {
    CheckResult::algebraic(
        "work_matching",
        n as f64 * bouncer_work_per_period(p, d),
        walker_work(p, d, n),
        format!("n·2πγħ = n·N·(4π/ω₀)·ζ·E_zp, n = {n}"),
    )
    .with_premise(Premise::CanonicalCoupling)
}

/// `E_tot = 2N·E_zp = ħω₀ = 2·E_bouncer`.
pub fn check_total_energy(p: &PhysicalParams, d: &DerivedConstants) -> Vec<CheckResult> {
    let n = f64::from(p.n_dof);
    vec![
        CheckResult::algebraic(
            "total_energy_dof",
            d.e_tot,
            2.0 * n * d.e_zp,
            "E_tot = 2N·E_zp",
        ),
        CheckResult::algebraic(
            "total_energy_action",
            d.e_tot,
            d.hbar * p.omega0,
            "E_tot = ħω₀",
        )
        .with_premise(Premise::CanonicalCoupling),
        CheckResult::algebraic(
            "total_energy_bouncer",
            d.e_tot,
            2.0 * d.e_bouncer,
            "E_tot = 2·(m/2)ω₀²r²",
        )
        .with_premise(Premise::CanonicalCoupling),
    ]
}

/// Heat absorbed per period `= ħω₀`, peak kinetic energy `= ħω₀/2`, and
/// absorbed `=` emitted to within `1e-6·E_tot`.
pub fn check_entropic_cycle(
    ledger: &HeatCycleLedger,
    p: &PhysicalParams,
    d: &DerivedConstants,
) -> Vec<CheckResult> {
    let quantum = d.hbar * p.omega0;
    vec![
        CheckResult::numeric(
            "entropic_absorbed",
            ledger.absorbed,
            quantum,
            "ΔQ absorbed per period = ħω₀",
        ),
        CheckResult::numeric(
            "entropic_ekin_max",
            ledger.ekin_max,
            0.5 * quantum,
            "max E_kin = ħω₀/2",
        ),
        CheckResult::relative(
            "entropic_balance",
            CheckKind::DeterministicNumeric,
            (ledger.absorbed - ledger.emitted) / quantum,
            0.0,
            NUMERIC_TOLERANCE,
            "(absorbed − emitted)/ħω₀ = 0",
        ),
    ]
}

/// `mζu(x) = 2ω₀mu(x)` across a grid of displacements.
pub fn check_heat_gradient_coupling(p: &PhysicalParams, d: &DerivedConstants) -> CheckResult {
    let results = (1..=8)
        .flat_map(|k| [k as f64 * 0.5, -(k as f64) * 0.5])
        .map(|x| {
            let g = heat_gradient(x, 0.0, 1.0, p, d);
            CheckResult::algebraic(
                "heat_gradient_coupling",
                g.from_friction,
                g.from_boltzmann,
                "mζu(x) = 2ω₀m·u(x)",
            )
        });
    worst(results)
        .expect("non-empty grid")
        .with_premise(Premise::CanonicalCoupling)
}

/// At `σ₀ = √(D/ζ)` the two forms of the initial speed agree, `D/σ₀ = ζσ₀`.
pub fn check_u0_dual_form(p: &PhysicalParams, d: &DerivedConstants) -> CheckResult {
    let w = dual_form_width(p, d);
    CheckResult::algebraic(
        "u0_dual_form",
        initial_u0(d, w),
        p.zeta * w,
        "D/σ₀ = ζσ₀ at σ₀ = √(D/ζ)",
    )
}

/// Algebraic relations between the derived constants.
pub fn constant_checks(
    p: &PhysicalParams,
    d: &DerivedConstants,
    work_periods: u64,
) -> Vec<CheckResult> {
    let mut out = vec![
        check_coupling(p),
        check_einstein(p, d),
        CheckResult::algebraic(
            "hbar_action",
            d.hbar,
            p.m * d.r * d.r * p.omega0,
            "ħ = m r² ω₀",
        ),
        check_work_matching(p, d, work_periods),
    ];
    out.extend(check_total_energy(p, d));
    out.push(check_heat_gradient_coupling(p, d));
    out.push(check_u0_dual_form(p, d));
    out
}

/// Deterministic checks on the oscillator at resonance.
pub fn bouncer_checks(
    p: &PhysicalParams,
    d: &DerivedConstants,
    steps_per_period: usize,
) -> Vec<CheckResult> {
    use CheckKind::DeterministicNumeric as Num;
    let traj = match steady_state_trajectory(p, steps_per_period) {
        Ok(t) => t,
        Err(e) => return vec![CheckResult::errored("bouncer_steady_state", Num, e)],
    };
    let mut out = Vec::new();
    let analytic = bouncer_work_per_period(p, d);
    out.push(match work_per_period(p, d, WorkMethod::Quadrature(&traj)) {
        Ok(w) => CheckResult::numeric("bouncer_work", w, analytic, "∮F₀cos(ω₀t)·v dt = 2πγħ"),
        Err(e) => CheckResult::errored("bouncer_work", Num, e),
    });
    out.push(match net_power_balance(&traj) {
        Ok(net) => CheckResult::relative(
            "power_balance",
            Num,
            net / d.e_tot,
            0.0,
            1e-8,
            "∮(F₀cos(ω₀t)·v − 2γmv²) dt / E_tot = 0",
        ),
        Err(e) => CheckResult::errored("power_balance", Num, e),
    });

    let sol = stationary_solution(p, p.omega0);
    out.push(match fit_stationary(&traj) {
        Ok(fit) => CheckResult::numeric(
            "stationary_amplitude",
            fit.amplitude,
            sol.amplitude,
            "fitted amplitude = (F₀/m)/√((ω₀²−ω²)² + (2γω)²)",
        ),
        Err(e) => CheckResult::errored("stationary_amplitude", Num, e),
    });
    out.push(CheckResult::relative(
        "stationary_attractor",
        Num,
        max_relative_deviation(&traj, &sol, settle_time(p)),
        0.0,
        NUMERIC_TOLERANCE,
        "x(t) → A cos(ωt + φ) for t ≫ 1/γ",
    ));

    // Along the exact stationary orbit at resonance.
    let n = steps_per_period;
    let h_ref = 0.5 * p.m * p.omega0 * p.omega0 * sol.amplitude * sol.amplitude;
    let h_dev = (0..n)
        .map(|k| {
            let s = sol.state(p.omega0, k as f64 * d.tau / n as f64);
            (hamiltonian(&s, p) - h_ref).abs() / h_ref
        })
        .fold(0.0, f64::max);
    out.push(CheckResult::relative(
        "hamiltonian_constancy",
        Num,
        h_dev,
        0.0,
        1e-8,
        "H(t) = mω₀²A²/2",
    ));

    match traj.last_period() {
        Ok(segment) => {
            let emb = CircularEmbedding::from_trajectory(segment, traj.dt, p.omega0);
            let l = angular_momentum_series(emb.interior_r(), &emb.theta_dot(), p.m);
            let results = l
                .iter()
                .map(|&l| CheckResult::numeric("angular_momentum", l, d.hbar, "m r² θ̇ = ħ"));
            out.push(worst(results).expect("period has interior samples"));
            let res = polar_residuals(&emb, p);
            let scale = sol.amplitude * p.omega0 * p.omega0;
            out.push(CheckResult::relative(
                "polar_residuals",
                Num,
                res.radial.max(res.tangential) / scale,
                0.0,
                NUMERIC_TOLERANCE,
                "r̈ − rθ̇² + ω₀²r = 0 and rθ̈ + 2ṙθ̇ = 0",
            ));
        }
        Err(e) => out.push(CheckResult::errored("angular_momentum", Num, e)),
    }

    match heat_cycle_ledger(&traj) {
        Ok(ledger) => out.extend(check_entropic_cycle(&ledger, p, d)),
        Err(e) => out.push(CheckResult::errored("entropic_cycle", Num, e)),
    }
    out
}

/// Walker ensemble settings used by [`walker_checks`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkerPlan {
    pub ensemble_size: usize,
    pub seed: u64,
    /// Burn-in in units of `1/ζ`.
    pub burn_in: f64,
    pub fit_window: (f64, f64),
    pub dt: f64,
    pub integrator: Integrator,
    pub relaxation_u0: f64,
    pub relaxation_points: usize,
}

impl WalkerPlan {
    pub fn from_config(cfg: &RunConfig) -> Self {
        let r = &cfg.run;
        Self {
            ensemble_size: r.ensemble_size,
            seed: r.seed,
            burn_in: r.burn_in,
            fit_window: (r.fit_window[0], r.fit_window[1]),
            dt: r.walker_dt,
            integrator: r.integrator,
            relaxation_u0: r.relaxation_u0,
            relaxation_points: r.relaxation_points,
        }
    }
}

/// Statistical checks on the walker: equipartition, diffusion, work rate
/// and relaxation of the mean-square velocity.
pub fn walker_checks(
    p: &PhysicalParams,
    d: &DerivedConstants,
    plan: &WalkerPlan,
) -> Vec<CheckResult> {
    use CheckKind::Statistical as Stat;
    let model = NoiseModel::from_params(p, d);
    let mut out = Vec::new();

    let spec = EnsembleSpec {
        count: plan.ensemble_size,
        u0: 0.0,
        burn_in: plan.burn_in / p.zeta,
        duration: plan.fit_window.1,
        dt: plan.dt,
        integrator: plan.integrator,
        master_seed: plan.seed,
        domain: domain::WALKER_EQUILIBRIUM,
    };
    match simulate_ensemble(&model, &spec) {
        Ok(trajs) => {
            out.push(match ensemble_msv(&trajs, 0.0) {
                Ok(msv) => check_equipartition(msv.scale(0.5 * p.m), d),
                Err(e) => CheckResult::errored("equipartition", Stat, e),
            });
            match fit_diffusion(&trajs, plan.fit_window, &model) {
                Ok(fit) => out.extend(check_diffusion(fit, p, d)),
                Err(e) => out.push(CheckResult::errored("diffusion_fit", Stat, e)),
            }
            let span = trajs[0].samples.last().map_or(0.0, |s| s.t);
            out.push(match walker_work_quadrature(&trajs, &model, p.n_dof) {
                Ok(w) => CheckResult::statistical(
                    "walker_work",
                    w,
                    walker_work(p, d, 1) * span / d.tau,
                    "N·mζ∫⟨u²⟩dt = N·(4π/ω₀)·ζ·E_zp per period",
                ),
                Err(e) => CheckResult::errored("walker_work", Stat, e),
            });
        }
        Err(e) => out.push(CheckResult::errored("equipartition", Stat, e)),
    }

    let horizon = 5.0 / p.zeta;
    let relax = EnsembleSpec {
        count: plan.ensemble_size,
        u0: plan.relaxation_u0,
        burn_in: 0.0,
        duration: horizon,
        dt: horizon / (plan.relaxation_points - 1) as f64,
        integrator: plan.integrator,
        master_seed: plan.seed,
        domain: domain::WALKER_RELAXATION,
    };
    out.push(
        match simulate_ensemble(&model, &relax).and_then(|t| ensemble_msv_series(&t)) {
            Ok(series) => {
                let results = series.into_iter().map(|(t, est)| {
                    CheckResult::statistical(
                        "velocity_relaxation",
                        est,
                        msv_analytic(&model, t, plan.relaxation_u0),
                        format!(
                            "⟨u²(t)⟩ = λ/(2ζm²)(1 − e^(−2ζt)) + u₀²e^(−2ζt), worst of {} times, here t = {t}",
                            plan.relaxation_points
                        ),
                    )
                });
                worst(results).expect("at least two grid points")
            }
            Err(e) => CheckResult::errored("velocity_relaxation", Stat, e),
        },
    );
    out
}

/// Statistical and algebraic checks on Gaussian beams of each width.
pub fn ensemble_checks(
    p: &PhysicalParams,
    d: &DerivedConstants,
    cfg: &EnsembleBlock,
    seed: u64,
) -> Vec<CheckResult> {
    use CheckKind::Statistical as Stat;
    let mut out = Vec::new();
    let m = p.m;
    for (k, &sigma0) in cfg.sigma0.iter().enumerate() {
        let tag = |name: &str| format!("{name}[sigma0={sigma0}]");
        let prep = GaussianPrep {
            sigma0,
            x0: cfg.x0,
            v_conv: cfg.v_conv,
            count: cfg.size,
        };
        let state = match prepare_gaussian_batch(&prep, d, seed, k as u64) {
            Ok(s) => s,
            Err(e) => {
                out.push(CheckResult::errored(tag("ballistic_spread"), Stat, e));
                continue;
            }
        };
        let u0 = initial_u0(d, sigma0);
        let t_cross = crossover_time(sigma0, d.diffusion);

        // Ballistic law on the configured grid.
        match spread_series(&state, d, sigma0, &cfg.times) {
            Ok(series) => {
                let results = series.iter().map(|s| {
                    CheckResult::statistical(
                        tag("ballistic_spread"),
                        s.var_emp,
                        s.var_ballistic,
                        format!(
                            "σ²(t) = σ₀² + u₀²t², u₀ = D/σ₀, worst over t, here t = {}",
                            s.t
                        ),
                    )
                });
                out.push(worst(results).expect("times non-empty"));
            }
            Err(e) => out.push(CheckResult::errored(tag("ballistic_spread"), Stat, e)),
        }

        // Ordinary diffusion must be ruled out beyond the crossover.
        let probes: Vec<f64> = cfg
            .times
            .iter()
            .copied()
            .filter(|&t| t > t_cross)
            .chain(std::iter::once(2.0 * t_cross))
            .collect();
        out.push(match spread_series(&state, d, sigma0, &probes) {
            Ok(series) => series
                .iter()
                .map(|s| {
                    CheckResult::statistical_distinct(
                        tag("restframe_divergence"),
                        s.var_emp,
                        s.var_restframe,
                        format!(
                            "σ²(t) ≠ σ₀² + 2Dt for t > 2σ₀²/D = {t_cross}, weakest at t = {}",
                            s.t
                        ),
                    )
                })
                .min_by(|a, b| a.strain().total_cmp(&b.strain()))
                .expect("at least one probe"),
            Err(e) => CheckResult::errored(tag("restframe_divergence"), Stat, e),
        });
        out.push(CheckResult::algebraic(
            tag("crossover"),
            ballistic_variance(sigma0, u0, t_cross),
            restframe_variance(sigma0, d.diffusion, t_cross),
            "σ₀² + u₀²t*² = σ₀² + 2Dt* at t* = 2σ₀²/D",
        ));

        // Kinetic energy: closed forms on a dense grid, then the beam itself.
        let expected = 0.5 * m * u0 * u0;
        let t_max = cfg.times.iter().copied().fold(t_cross, f64::max) * 2.0;
        let analytic: Vec<KineticSplit> = (0..=100)
            .map(|i| kinetic_decomposition(d, p, sigma0, t_max * i as f64 / 100.0))
            .collect();
        out.push(conservation_result(
            tag("kinetic_conservation_analytic"),
            &analytic,
            expected,
        ));
        let empirical: Result<Vec<KineticSplit>, EnsembleError> = cfg
            .times
            .iter()
            .map(|&t| ballistic_evolve(&state, t).map(|e| empirical_kinetic_split(&e, m)))
            .collect();
        out.push(match empirical {
            Ok(series) => {
                conservation_result(tag("kinetic_conservation_empirical"), &series, expected)
            }
            Err(e) => CheckResult::errored(tag("kinetic_conservation_empirical"), Stat, e),
        });

        out.push(CheckResult::statistical(
            tag("osmotic_link"),
            osmotic_kinetic_energy(&state, sigma0 * sigma0, p, d),
            d.hbar * d.hbar / (8.0 * m * sigma0 * sigma0),
            "(m/2)⟨u(x)²⟩ = ħ²/(8mσ₀²), u(x) = (ħ/2m)(x − x₀)/σ₀²",
        ));
    }
    out
}

fn conservation_result(name: String, series: &[KineticSplit], expected: f64) -> CheckResult {
    let mut r = match check_energy_conservation(series, expected) {
        Ok(r) => r,
        Err(EnsembleError::ConservationViolated { result, .. }) => *result,
        Err(e) => CheckResult::errored(name.clone(), CheckKind::Statistical, e),
    };
    r.name = name;
    r
}

/// Machine-readable outcome of [`run_all`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub config: RunConfig,
    pub params: PhysicalParams,
    pub derived: DerivedConstants,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub overall_pass: bool,
    /// Wall-clock seconds per group of checks. The only part of a report
    /// that differs between runs with the same configuration.
    pub timing: BTreeMap<String, f64>,
}

impl Report {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// The report as JSON with the timing block removed.
    pub fn to_json_without_timing(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timing");
        }
        v
    }
}

/// Runs every check for `cfg` and collects the results. Individual
/// failures (including computations that could not run) are recorded in
/// the report; only an invalid configuration is an error.
pub fn run_all(cfg: &RunConfig) -> Result<Report, ConfigError> {
    let p = cfg.check()?;
    let d = derive_constants(&p);
    let seed = cfg.run.seed;
    let mut checks = Vec::new();
    let mut timing = BTreeMap::new();
    let mut timed = |group: &str, f: &mut dyn FnMut() -> Vec<CheckResult>| {
        let start = Instant::now();
        checks.extend(f());
        timing.insert(group.to_string(), start.elapsed().as_secs_f64());
    };
    timed("constants", &mut || {
        constant_checks(&p, &d, cfg.run.work_periods)
    });
    timed("bouncer", &mut || {
        bouncer_checks(&p, &d, cfg.steps_per_period(&p))
    });
    timed("walker", &mut || {
        walker_checks(&p, &d, &WalkerPlan::from_config(cfg))
    });
    timed("ensemble", &mut || {
        ensemble_checks(&p, &d, &cfg.ensemble, seed)
    });
    let overall_pass = checks.iter().all(|c| c.pass);
    Ok(Report {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        params: p,
        derived: d,
        seed,
        checks,
        overall_pass,
        timing,
    })
}
