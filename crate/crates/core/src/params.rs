//! System parameters and the master-equation coefficients derived from them.
//!
//! All rates share one arbitrary unit. The gain coefficient `a` is expressed
//! in that unit as well, so `kappa = 0.8, a = 100` reproduces the usual
//! operating point without any conversion layer.

use crate::error::{Error, Result};

/// Microscopic origin of the macroscopic knobs.
///
/// `tau` (atomic transit time) is carried for bookkeeping only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroscopicParams {
    /// Atom–cavity coupling.
    pub g: f64,
    /// Pump–atom coupling.
    pub g_prime: f64,
    /// Pump amplitude.
    pub mu: f64,
    /// Crystal–pump coupling.
    pub lambda_c: f64,
    /// Atomic injection rate.
    pub r_a: f64,
    /// Atomic decay rate, shared by all three levels.
    pub gamma: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Linear gain coefficient `2 g^2 r_a / gamma^2`.
    pub a: f64,
    /// Cavity damping constant.
    pub kappa: f64,
    /// Pump Rabi frequency over atomic decay rate.
    pub beta: f64,
    /// Parametric drive strength.
    pub epsilon: f64,
}

/// Coefficients of the cavity-mode master equation plus the two quadrature
/// decay rates `lambda_minus = (S-R) - (U-V+eps)` and
/// `lambda_plus = (S-R) + (U-V+eps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub r: f64,
    pub s: f64,
    pub u: f64,
    pub v: f64,
    /// `(1 + beta^2)(1 + beta^2/4)`
    pub b: f64,
    pub epsilon: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
}

impl Coefficients {
    /// `S - R`, the common relaxation rate of both quadratures.
    pub fn relaxation(&self) -> f64 {
        self.s - self.r
    }

    /// `U - V + eps`, the phase-sensitive coupling between `alpha` and `alpha*`.
    pub fn coupling(&self) -> f64 {
        self.u - self.v + self.epsilon
    }

    /// Diffusion `eps - 2V + 2R` driving the plus quadrature.
    pub fn diffusion_plus(&self) -> f64 {
        self.epsilon - 2.0 * self.v + 2.0 * self.r
    }

    /// Diffusion `eps - 2V - 2R` driving the minus quadrature. May be negative.
    pub fn diffusion_minus(&self) -> f64 {
        self.epsilon - 2.0 * self.v - 2.0 * self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    AtThreshold,
    Unstable,
}

/// Relative tolerance used to classify `lambda_minus` as zero.
pub const THRESHOLD_TOL: f64 = 1e-9;

fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {x}")))
    }
}

/// Maps microscopic couplings onto `(A, kappa, beta, epsilon)`.
pub fn from_microscopic(m: &MicroscopicParams, kappa: f64) -> Result<SystemParams> {
    for (name, x) in [
        ("g", m.g),
        ("g_prime", m.g_prime),
        ("mu", m.mu),
        ("lambda_c", m.lambda_c),
        ("r_a", m.r_a),
        ("gamma", m.gamma),
        ("tau", m.tau),
    ] {
        check_finite(name, x)?;
    }
    if m.gamma <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {}",
            m.gamma
        )));
    }
    if m.r_a < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "r_a must be non-negative, got {}",
            m.r_a
        )));
    }
    let omega = 2.0 * m.g_prime * m.mu;
    SystemParams::new(
        2.0 * m.g * m.g * m.r_a / (m.gamma * m.gamma),
        kappa,
        omega / m.gamma,
        m.lambda_c * m.mu,
    )
}

impl SystemParams {
    pub fn new(a: f64, kappa: f64, beta: f64, epsilon: f64) -> Result<Self> {
        let p = SystemParams {
            a,
            kappa,
            beta,
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("a", self.a)?;
        check_finite("kappa", self.kappa)?;
        check_finite("beta", self.beta)?;
        check_finite("epsilon", self.epsilon)?;
        if self.a < 0.0 {
            return Err(Error::InvalidParameter(format!("a must be >= 0, got {}", self.a)));
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "kappa must be > 0, got {}",
                self.kappa
            )));
        }
        if self.beta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        if self.epsilon < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Same system with a different parametric drive.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        SystemParams { epsilon, ..*self }
    }

    /// Same system driven at `frac` times its threshold drive.
    pub fn at_threshold_fraction(&self, frac: f64) -> Result<Self> {
        let eps = frac * self.threshold_epsilon();
        let p = self.with_epsilon(eps);
        p.validate()?;
        Ok(p)
    }

    /// `(1 + beta^2)(1 + beta^2/4)`
    pub fn b_factor(&self) -> f64 {
        let b2 = self.beta * self.beta;
        (1.0 + b2) * (1.0 + b2 / 4.0)
    }

    pub fn coefficients(&self) -> Coefficients {
        let beta = self.beta;
        let b2 = beta * beta;
        let b3 = b2 * beta;
        let bf = self.b_factor();
        let pref = self.a / (4.0 * bf);
        let r = pref * (1.0 - 1.5 * beta + b2);
        // S = (A/4B)(2 kappa B / A + ...) with the kappa term pulled out so A = 0 is regular.
        let s = 0.5 * self.kappa + pref * (1.0 + 1.5 * beta + b2);
        let u = pref * (-1.0 + 0.5 * beta + 0.5 * b2 + 0.5 * b3);
        let v = pref * (-1.0 - 0.5 * beta + 0.5 * b2 - 0.5 * b3);
        let relax = s - r;
        let coupling = u - v + self.epsilon;
        Coefficients {
            r,
            s,
            u,
            v,
            b: bf,
            epsilon: self.epsilon,
            lambda_minus: relax - coupling,
            lambda_plus: relax + coupling,
        }
    }

    /// Drive strength at which `lambda_minus` vanishes; `self.epsilon` is ignored.
    pub fn threshold_epsilon(&self) -> f64 {
        let beta = self.beta;
        0.5 * self.kappa + self.a * (2.0 * beta - beta.powi(3)) / (4.0 * self.b_factor())
    }

    pub fn stability(&self) -> Stability {
        let lm = self.coefficients().lambda_minus;
        if lm.abs() <= THRESHOLD_TOL * self.kappa.max(1.0) {
            Stability::AtThreshold
        } else if lm > 0.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        }
    }

    /// Errors with [`Error::NotStable`] unless strictly below threshold.
    pub fn require_stable(&self) -> Result<Coefficients> {
        let c = self.coefficients();
        match self.stability() {
            Stability::Stable => Ok(c),
            _ => Err(Error::NotStable {
                lambda_minus: c.lambda_minus,
            }),
        }
    }
}
