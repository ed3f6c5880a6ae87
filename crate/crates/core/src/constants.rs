//! Model parameters and the closed-form constants derived from them.
//!
//! Units are whatever the caller chooses; everything here is a pure number.
//! The CLI defaults to `m = 1`, `ω₀ = 1` and an action target of 1.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter `{field}` must be strictly positive and finite, got {value}")]
    NonPositiveParameter { field: &'static str, value: f64 },
    #[error("n_dof must be at least 1")]
    ZeroDegreesOfFreedom,
    #[error("canonical coupling requires {field} = {expected}, got {value}")]
    CouplingMismatch {
        field: &'static str,
        value: f64,
        expected: f64,
    },
}

/// Unresolved parameter block as written by a user.
///
/// Optional fields are filled during [`validate_params`]: `gamma` and `zeta`
/// default to `2ω₀`, `f0` is chosen so that `ħ` hits `hbar_target`, and
/// `e_zp` defaults to the coupled steady-state value `ħω₀/(2N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamInput {
    pub m: f64,
    pub omega0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f0: Option<f64>,
    pub hbar_target: f64,
    pub n_dof: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_zp: Option<f64>,
    pub canonical_coupling: bool,
}

impl Default for ParamInput {
    fn default() -> Self {
        Self {
            m: 1.0,
            omega0: 1.0,
            gamma: None,
            zeta: None,
            f0: None,
            hbar_target: 1.0,
            n_dof: 1,
            e_zp: None,
            canonical_coupling: true,
        }
    }
}

/// Validated model parameters.
///
/// `gamma` is the bouncer friction, `zeta` the walker friction, `f0` the
/// drive amplitude. `e_zp` is the bath's mean kinetic energy per degree of
/// freedom; under canonical coupling it always equals `ħω₀/(2N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub m: f64,
    pub omega0: f64,
    pub gamma: f64,
    pub zeta: f64,
    pub f0: f64,
    pub n_dof: u32,
    pub e_zp: f64,
    pub canonical_coupling: bool,
}

impl PhysicalParams {
    /// Free (non-canonical) parameter set with every value given explicitly.
    pub fn free(
        m: f64,
        omega0: f64,
        gamma: f64,
        zeta: f64,
        f0: f64,
        e_zp: f64,
    ) -> Result<Self, ParamError> {
        validate_params(&ParamInput {
            m,
            omega0,
            gamma: Some(gamma),
            zeta: Some(zeta),
            f0: Some(f0),
            e_zp: Some(e_zp),
            canonical_coupling: false,
            ..ParamInput::default()
        })
    }

    /// Same parameters with `N` degrees of freedom. Under canonical coupling
    /// `e_zp` is rescaled to keep `2N·E_zp = ħω₀`.
    pub fn with_n_dof(mut self, n_dof: u32) -> Result<Self, ParamError> {
        if n_dof == 0 {
            return Err(ParamError::ZeroDegreesOfFreedom);
        }
        self.n_dof = n_dof;
        if self.canonical_coupling {
            self.e_zp = coupled_e_zp(self.m, self.omega0, self.gamma, self.f0, n_dof);
        }
        Ok(self)
    }

    /// Re-checks the invariants of an already constructed value.
    pub fn check(&self) -> Result<(), ParamError> {
        positive("m", self.m)?;
        positive("omega0", self.omega0)?;
        positive("gamma", self.gamma)?;
        positive("zeta", self.zeta)?;
        positive("f0", self.f0)?;
        positive("e_zp", self.e_zp)?;
        if self.n_dof == 0 {
            return Err(ParamError::ZeroDegreesOfFreedom);
        }
        if self.canonical_coupling {
            let expected = 2.0 * self.omega0;
            if self.gamma != expected {
                return Err(ParamError::CouplingMismatch {
                    field: "gamma",
                    value: self.gamma,
                    expected,
                });
            }
            if self.zeta != expected {
                return Err(ParamError::CouplingMismatch {
                    field: "zeta",
                    value: self.zeta,
                    expected,
                });
            }
        }
        Ok(())
    }
}

fn positive(field: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ParamError::NonPositiveParameter { field, value })
    }
}

fn resonance_amplitude(m: f64, omega0: f64, gamma: f64, f0: f64) -> f64 {
    f0 / (2.0 * gamma * m * omega0)
}

fn coupled_e_zp(m: f64, omega0: f64, gamma: f64, f0: f64, n_dof: u32) -> f64 {
    let r = resonance_amplitude(m, omega0, gamma, f0);
    let hbar = m * r * r * omega0;
    hbar * omega0 / (2.0 * f64::from(n_dof))
}

/// Drive amplitude that makes `m r² ω₀` equal `hbar_target` for friction `gamma`.
pub fn drive_for_action(m: f64, omega0: f64, gamma: f64, hbar_target: f64) -> f64 {
    2.0 * gamma * m * omega0 * (hbar_target / (m * omega0)).sqrt()
}

/// Resolves defaults and checks every invariant.
///
/// Under canonical coupling `gamma` and `zeta` become `2ω₀`; an explicit
/// value that disagrees is a [`ParamError::CouplingMismatch`].
pub fn validate_params(input: &ParamInput) -> Result<PhysicalParams, ParamError> {
    positive("m", input.m)?;
    positive("omega0", input.omega0)?;
    positive("hbar_target", input.hbar_target)?;
    if input.n_dof == 0 {
        return Err(ParamError::ZeroDegreesOfFreedom);
    }
    let canonical = 2.0 * input.omega0;
    let resolve = |field: &'static str, given: Option<f64>| -> Result<f64, ParamError> {
        match given {
            Some(value) if input.canonical_coupling && value != canonical => {
                Err(ParamError::CouplingMismatch {
                    field,
                    value,
                    expected: canonical,
                })
            }
            Some(value) => positive(field, value).map(|_| value),
            None => Ok(canonical),
        }
    };
    let gamma = resolve("gamma", input.gamma)?;
    let zeta = resolve("zeta", input.zeta)?;
    let f0 = match input.f0 {
        Some(f0) => {
            positive("f0", f0)?;
            f0
        }
        None => drive_for_action(input.m, input.omega0, gamma, input.hbar_target),
    };
    let coupled = coupled_e_zp(input.m, input.omega0, gamma, f0, input.n_dof);
    let e_zp = match input.e_zp {
        Some(value) if input.canonical_coupling => {
            positive("e_zp", value)?;
            if (value - coupled).abs() > 1e-12 * coupled {
                return Err(ParamError::CouplingMismatch {
                    field: "e_zp",
                    value,
                    expected: coupled,
                });
            }
            coupled
        }
        Some(value) => {
            positive("e_zp", value)?;
            value
        }
        None => coupled,
    };
    let params = PhysicalParams {
        m: input.m,
        omega0: input.omega0,
        gamma,
        zeta,
        f0,
        n_dof: input.n_dof,
        e_zp,
        canonical_coupling: input.canonical_coupling,
    };
    params.check()?;
    Ok(params)
}

/// Canonically coupled parameters (`γ = ζ = 2ω₀`) whose drive produces the
/// requested action `ħ`.
pub fn canonical_params(
    m: f64,
    omega0: f64,
    hbar_target: f64,
) -> Result<PhysicalParams, ParamError> {
    validate_params(&ParamInput {
        m,
        omega0,
        hbar_target,
        ..ParamInput::default()
    })
}

/// Constants derived from a [`PhysicalParams`] in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// Stationary amplitude at resonance, `F₀/(2γmω₀)`.
    pub r: f64,
    /// Period `2π/ω₀`.
    pub tau: f64,
    /// Angular-momentum invariant `m r² ω₀`.
    pub hbar: f64,
    /// Mean kinetic energy of the bath per degree of freedom.
    pub e_zp: f64,
    /// Total particle energy, `2N·E_zp` (equal to `ħω₀` under canonical coupling).
    pub e_tot: f64,
    /// Oscillator energy `m ω₀² r² / 2`.
    pub e_bouncer: f64,
    /// Noise strength `4ζ m E_zp`.
    pub lambda: f64,
    /// Diffusion constant `λ/(2ζ²m²)`.
    pub diffusion: f64,
}

impl DerivedConstants {
    /// Initial diffusive speed `D/σ₀` of a Gaussian prepared with width `sigma0`.
    pub fn u0_of(&self, sigma0: f64) -> f64 {
        self.diffusion / sigma0
    }
}

pub fn derive_constants(p: &PhysicalParams) -> DerivedConstants {
    let r = resonance_amplitude(p.m, p.omega0, p.gamma, p.f0);
    let hbar = p.m * r * r * p.omega0;
    let n = f64::from(p.n_dof);
    let (e_zp, e_tot) = if p.canonical_coupling {
        let e_tot = hbar * p.omega0;
        (e_tot / (2.0 * n), e_tot)
    } else {
        (p.e_zp, 2.0 * n * p.e_zp)
    };
    let lambda = 4.0 * p.zeta * p.m * e_zp;
    DerivedConstants {
        r,
        tau: 2.0 * PI / p.omega0,
        hbar,
        e_zp,
        e_tot,
        e_bouncer: 0.5 * p.m * p.omega0 * p.omega0 * r * r,
        lambda,
        diffusion: lambda / (2.0 * p.zeta * p.zeta * p.m * p.m),
    }
}

/// Work the bouncer takes up per period, `2πγħ`.
pub fn bouncer_work_per_period(p: &PhysicalParams, d: &DerivedConstants) -> f64 {
    2.0 * PI * p.gamma * d.hbar
}
