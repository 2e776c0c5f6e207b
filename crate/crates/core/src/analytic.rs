//! Closed-form results for the Gaussian cavity state: quadrature variances,
//! squeezing spectra, mean photon number, Q function and photon statistics.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{Coefficients, Stability, SystemParams};

/// A variance that diverges at threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variance {
    Finite(f64),
    Infinite,
}

impl Variance {
    /// The value, with `f64::INFINITY` standing in for [`Variance::Infinite`].
    pub fn value(self) -> f64 {
        match self {
            Variance::Finite(v) => v,
            Variance::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Variance::Finite(v) => Some(v),
            Variance::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Variance::Infinite)
    }
}

/// `Δa₊²` and `Δa₋²`, normalised so the vacuum gives 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureVariances {
    pub plus: Variance,
    pub minus: f64,
}

fn not_stable(c: &Coefficients) -> Error {
    Error::NotStable {
        lambda_minus: c.lambda_minus,
    }
}

/// Stationary `(⟨α₊²⟩, ⟨α₋²⟩) = ((ε − 2V + 2R)/λ₋, (ε − 2V − 2R)/λ₊)`.
pub fn steady_alpha_sq(c: &Coefficients) -> Result<(f64, f64)> {
    if !(c.lambda_minus > 0.0 && c.lambda_plus > 0.0) {
        return Err(not_stable(c));
    }
    Ok((c.diffusion_plus() / c.lambda_minus, c.diffusion_minus() / c.lambda_plus))
}

/// Stationary quadrature variances. At threshold the plus variance is infinite.
pub fn variance_steady(p: &SystemParams) -> Result<QuadratureVariances> {
    p.validate()?;
    match p.stability() {
        Stability::AtThreshold => return variance_threshold(p),
        Stability::Unstable => return Err(not_stable(&p.coefficients())),
        Stability::Stable => {}
    }
    let (k, a, b, e) = (p.kappa, p.a, p.beta, p.epsilon);
    let bf = p.b_factor();
    let plus = (2.0 * k * bf + a * (4.0 + b * b)) / ((2.0 * k - 4.0 * e) * bf + a * (2.0 * b - b.powi(3)));
    let minus = (2.0 * k * bf + 3.0 * a * b * b) / ((2.0 * k + 4.0 * e) * bf + a * (4.0 * b + b.powi(3)));
    Ok(QuadratureVariances {
        plus: Variance::Finite(plus),
        minus,
    })
}

/// Variances with the drive set to its threshold value; `p.epsilon` is ignored.
pub fn variance_threshold(p: &SystemParams) -> Result<QuadratureVariances> {
    p.validate()?;
    let (k, a, b) = (p.kappa, p.a, p.beta);
    let bf = p.b_factor();
    Ok(QuadratureVariances {
        plus: Variance::Infinite,
        minus: (2.0 * k * bf + 3.0 * a * b * b) / (4.0 * k * bf + 6.0 * a * b),
    })
}

/// Variances without the parametric crystal (`ε = 0`); `p.epsilon` is ignored.
pub fn variance_no_crystal(p: &SystemParams) -> Result<QuadratureVariances> {
    p.validate()?;
    let (k, a, b) = (p.kappa, p.a, p.beta);
    let bf = p.b_factor();
    let den_plus = 2.0 * k * bf + a * (2.0 * b - b.powi(3));
    if !(den_plus > 0.0) {
        return Err(Error::NotStable {
            lambda_minus: den_plus / (4.0 * bf),
        });
    }
    Ok(QuadratureVariances {
        plus: Variance::Finite((2.0 * k * bf + a * (4.0 + b * b)) / den_plus),
        minus: (2.0 * k * bf + 3.0 * a * b * b) / (2.0 * k * bf + a * (4.0 * b + b.powi(3))),
    })
}

/// Strong-pump limit `(κ/(κ − 2A/β), κ/(κ + 2A/β))` of the crystal-free variances.
pub fn variance_strong_pump(a: f64, kappa: f64, beta: f64) -> Result<QuadratureVariances> {
    if !(a >= 0.0 && kappa > 0.0 && beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need a >= 0, kappa > 0, beta > 0; got ({a}, {kappa}, {beta})"
        )));
    }
    let x = 2.0 * a / beta;
    if !(kappa - x > 0.0) {
        return Err(Error::NotStable {
            lambda_minus: 0.5 * (kappa - x),
        });
    }
    Ok(QuadratureVariances {
        plus: Variance::Finite(kappa / (kappa - x)),
        minus: kappa / (kappa + x),
    })
}

/// Variances of the parametric amplifier alone (`A = β = 0`).
pub fn variance_dpa(kappa: f64, epsilon: f64) -> Result<QuadratureVariances> {
    variance_steady(&SystemParams::new(0.0, kappa, 0.0, epsilon)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimizeMode {
    /// Minus variance at threshold.
    Threshold,
    /// Minus variance without the crystal, over the stable part of the range.
    NoCrystal,
}

/// Location and value of the smallest minus variance over `β ∈ [0, 2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceMinimum {
    pub beta: f64,
    pub minus: f64,
}

pub const BETA_SCAN_MAX: f64 = 2.0;
const BETA_SCAN_STEP: f64 = 1e-4;
const BETA_TOL: f64 = 1e-6;

/// Grid scan of `β ∈ [0, 2]` at step 1e-4, then golden-section refinement.
///
/// Ties go to the smallest `β`.
pub fn minimize_minus_variance(a: f64, kappa: f64, mode: MinimizeMode) -> Result<VarianceMinimum> {
    SystemParams::new(a, kappa, 0.0, 0.0)?;
    let f = |beta: f64| -> Option<f64> {
        let p = SystemParams {
            a,
            kappa,
            beta,
            epsilon: 0.0,
        };
        match mode {
            MinimizeMode::Threshold => variance_threshold(&p).ok().map(|v| v.minus),
            MinimizeMode::NoCrystal => variance_no_crystal(&p).ok().map(|v| v.minus),
        }
    };
    let n = (BETA_SCAN_MAX / BETA_SCAN_STEP).round() as usize;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..=n {
        let beta = i as f64 * BETA_SCAN_STEP;
        if let Some(v) = f(beta) {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
    }
    let (i, v) = best.ok_or(Error::NotStable { lambda_minus: 0.0 })?;
    let beta_grid = i as f64 * BETA_SCAN_STEP;

    let mut lo = (beta_grid - BETA_SCAN_STEP).max(0.0);
    let mut hi = (beta_grid + BETA_SCAN_STEP).min(BETA_SCAN_MAX);
    let eval = |beta: f64| f(beta).unwrap_or(f64::INFINITY);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (eval(x1), eval(x2));
    while hi - lo > BETA_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = eval(x2);
        }
    }
    let beta_ref = 0.5 * (lo + hi);
    let v_ref = eval(beta_ref);
    // Keep the grid point on plateaus so ties resolve to the smaller beta.
    if v_ref < v {
        Ok(VarianceMinimum {
            beta: beta_ref,
            minus: v_ref,
        })
    } else {
        Ok(VarianceMinimum {
            beta: beta_grid,
            minus: v,
        })
    }
}

/// Output squeezing spectra sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCurve {
    pub omega_grid: Vec<f64>,
    pub s_plus: Vec<Variance>,
    pub s_minus: Vec<f64>,
}

/// `S₋(ω)`. Only needs `λ₊ > 0`; the threshold form is used at threshold.
pub fn spectrum_minus(p: &SystemParams, omega: f64) -> Result<f64> {
    p.validate()?;
    if p.stability() == Stability::AtThreshold {
        return Ok(spectrum_minus_threshold(p, omega));
    }
    let c = p.coefficients();
    if !(c.lambda_plus > 0.0) {
        return Err(not_stable(&c));
    }
    Ok(1.0 - 2.0 * p.kappa * c.diffusion_minus() / (c.lambda_plus * c.lambda_plus + omega * omega))
}

/// `S₊(ω)`; infinite at `ω = 0` on threshold.
pub fn spectrum_plus(p: &SystemParams, omega: f64) -> Result<Variance> {
    p.validate()?;
    match p.stability() {
        Stability::AtThreshold => return Ok(spectrum_plus_threshold(p, omega)),
        Stability::Unstable => return Err(not_stable(&p.coefficients())),
        Stability::Stable => {}
    }
    let c = p.coefficients();
    Ok(Variance::Finite(
        1.0 + 2.0 * p.kappa * c.diffusion_plus() / (c.lambda_minus * c.lambda_minus + omega * omega),
    ))
}

/// `S₋(ω)` with the drive at threshold; `p.epsilon` is ignored.
pub fn spectrum_minus_threshold(p: &SystemParams, omega: f64) -> f64 {
    let (k, a, b) = (p.kappa, p.a, p.beta);
    let b2 = b * b;
    let num = k * (k + a * b * (3.0 - 1.5 * b) / ((1.0 + b2) * (1.0 + 0.25 * b2)));
    let rate = k + 3.0 * a * b / ((1.0 + b2) * (2.0 + 0.5 * b2));
    1.0 - num / (rate * rate + omega * omega)
}

/// `S₊(ω)` with the drive at threshold; `p.epsilon` is ignored.
pub fn spectrum_plus_threshold(p: &SystemParams, omega: f64) -> Variance {
    if omega == 0.0 {
        return Variance::Infinite;
    }
    let (k, a, b) = (p.kappa, p.a, p.beta);
    let b2 = b * b;
    let num = k * (k + a * (4.0 + b2) / ((1.0 + b2) * (2.0 + 0.5 * b2)));
    Variance::Finite(1.0 + num / (omega * omega))
}

pub fn spectrum(p: &SystemParams, omega_grid: &[f64]) -> Result<SpectrumCurve> {
    let mut s_plus = Vec::with_capacity(omega_grid.len());
    let mut s_minus = Vec::with_capacity(omega_grid.len());
    for &w in omega_grid {
        s_plus.push(spectrum_plus(p, w)?);
        s_minus.push(spectrum_minus(p, w)?);
    }
    Ok(SpectrumCurve {
        omega_grid: omega_grid.to_vec(),
        s_plus,
        s_minus,
    })
}

/// `(1 − e^{−2λt})/λ`, with its `2t` limit near `λt = 0` and `t = ∞` allowed for `λ > 0`.
fn growth(lambda: f64, t: f64) -> Option<f64> {
    if t.is_infinite() {
        return (lambda > 0.0).then(|| 1.0 / lambda);
    }
    let x = lambda * t;
    if x.abs() < 1e-6 {
        Some(2.0 * t * (1.0 - x + 2.0 * x * x / 3.0))
    } else {
        Some(-(-2.0 * x).exp_m1() / lambda)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    Ok(())
}

/// Second moments and Q-function coefficients of the Gaussian state at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianRecord {
    pub t: f64,
    /// `⟨α²⟩`, real for vacuum initial conditions.
    pub alpha_sq: f64,
    /// `⟨α*α⟩`.
    pub n_cl: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl GaussianRecord {
    pub fn from_moments(t: f64, alpha_sq: f64, n_cl: f64) -> Result<Self> {
        let a = 1.0 + n_cl;
        let b = alpha_sq;
        let det = a * a - b * b;
        let (c, d) = (a / det, b / det);
        if !(det > 0.0 && a > 0.0) {
            return Err(Error::QFunctionUndefined { c, d });
        }
        Ok(GaussianRecord {
            t,
            alpha_sq,
            n_cl,
            a,
            b,
            c,
            d,
        })
    }

    pub fn vacuum() -> Self {
        GaussianRecord {
            t: 0.0,
            alpha_sq: 0.0,
            n_cl: 0.0,
            a: 1.0,
            b: 0.0,
            c: 1.0,
            d: 0.0,
        }
    }

    /// `⟨α₊²⟩ = 2⟨α²⟩ + 2⟨α*α⟩`.
    pub fn alpha_plus_sq(&self) -> f64 {
        2.0 * self.alpha_sq + 2.0 * self.n_cl
    }

    /// `⟨α₋²⟩ = 2⟨α²⟩ − 2⟨α*α⟩`.
    pub fn alpha_minus_sq(&self) -> f64 {
        2.0 * self.alpha_sq - 2.0 * self.n_cl
    }
}

/// Moments at time `t` starting from vacuum. `t = f64::INFINITY` gives the
/// stationary state (stable parameters only).
pub fn transient_moments(p: &SystemParams, t: f64) -> Result<GaussianRecord> {
    p.validate()?;
    check_time(t)?;
    if t == 0.0 {
        return Ok(GaussianRecord::vacuum());
    }
    let c = p.coefficients();
    let gm = growth(c.lambda_minus, t).ok_or_else(|| not_stable(&c))?;
    let gp = growth(c.lambda_plus, t).ok_or_else(|| not_stable(&c))?;
    let k_minus = 0.25 * (2.0 * c.r - 2.0 * c.v + c.epsilon);
    let k_plus = 0.25 * (2.0 * c.r + 2.0 * c.v - c.epsilon);
    GaussianRecord::from_moments(t, k_minus * gm - k_plus * gp, k_minus * gm + k_plus * gp)
}

pub fn steady_record(p: &SystemParams) -> Result<GaussianRecord> {
    transient_moments(p, f64::INFINITY)
}

/// Mean photon number at time `t` from vacuum, in closed form.
pub fn mean_photon_number(p: &SystemParams, t: f64) -> Result<f64> {
    p.validate()?;
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let (k, a, b, e) = (p.kappa, p.a, p.beta, p.epsilon);
    let bf = p.b_factor();
    let (b2, b3) = (b * b, b * b * b);
    let num1 = 2.0 * e * bf + a * (2.0 - b + 0.5 * b2 + 0.5 * b3);
    let den1 = 4.0 * bf * (k - 2.0 * e) + 2.0 * a * (2.0 * b - b3);
    let num2 = 2.0 * e * bf + a * (2.0 * b - 1.5 * b2 + 0.5 * b3);
    let den2 = 4.0 * bf * (k + 2.0 * e) + 2.0 * a * (4.0 * b + b3);
    // den = 8B λ, and num/den (1 − e^{−2λt}) = num/(8B) (1 − e^{−2λt})/λ.
    let lm = den1 / (8.0 * bf);
    let lp = den2 / (8.0 * bf);
    let gm = growth(lm, t).ok_or(Error::NotStable { lambda_minus: lm })?;
    let gp = growth(lp, t).ok_or(Error::NotStable { lambda_minus: lm })?;
    Ok((num1 * gm - num2 * gp) / (8.0 * bf))
}

/// Propagator pair `(A(t), B(t))` with `α(t) = A α(0) + B α*(0) + noise`.
pub fn propagator(c: &Coefficients, t: f64) -> (f64, f64) {
    let em = (-c.lambda_minus * t).exp();
    let ep = (-c.lambda_plus * t).exp();
    (0.5 * (em + ep), 0.5 * (em - ep))
}

/// Gaussian Q function `√(c² − d²)/π · exp[−c|α|² + d Re(α²)]`.
pub fn q_function(rec: &GaussianRecord, alpha: Complex64) -> Result<f64> {
    if !(rec.c > rec.d.abs()) {
        return Err(Error::QFunctionUndefined { c: rec.c, d: rec.d });
    }
    let norm = (rec.c * rec.c - rec.d * rec.d).sqrt() / std::f64::consts::PI;
    Ok(norm * (-rec.c * alpha.norm_sqr() + rec.d * (alpha * alpha).re).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhotonDistribution {
    /// `P(0), …, P(n_max)`.
    pub probs: Vec<f64>,
    pub n_max: usize,
}

impl PhotonDistribution {
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }
}

/// Photon-number distribution of the Gaussian state with Q coefficients `c`, `d`.
///
/// `P(n) = √(c² − d²) Σ_{l ≤ n/2} n! (1−c)^{n−2l} d^{2l} / (4^l l!² (n−2l)!)`.
/// Every term for a given `n` has the sign of `(1−c)^n`, so the sum is done
/// in log space without cancellation.
pub fn photon_distribution(rec: &GaussianRecord, n_max: usize) -> Result<PhotonDistribution> {
    let (c, d) = (rec.c, rec.d);
    if !(c > d.abs()) {
        return Err(Error::QFunctionUndefined { c, d });
    }
    let mut ln_fact = Vec::with_capacity(n_max + 1);
    ln_fact.push(0.0);
    for k in 1..=n_max {
        ln_fact.push(ln_fact[k - 1] + (k as f64).ln());
    }
    let one_c = 1.0 - c;
    let ln_one_c = one_c.abs().ln();
    let ln_d2_4 = 2.0 * d.abs().ln() - 4f64.ln();
    let ln_norm = 0.5 * (c * c - d * d).ln();

    let mut probs = Vec::with_capacity(n_max + 1);
    let mut logs: Vec<f64> = Vec::new();
    for n in 0..=n_max {
        logs.clear();
        for l in 0..=n / 2 {
            let k = n - 2 * l;
            let mut x = ln_fact[n] - 2.0 * ln_fact[l] - ln_fact[k];
            if k > 0 {
                if one_c == 0.0 {
                    continue;
                }
                x += k as f64 * ln_one_c;
            }
            if l > 0 {
                if d == 0.0 {
                    continue;
                }
                x += l as f64 * ln_d2_4;
            }
            logs.push(x);
        }
        let p = if logs.is_empty() {
            0.0
        } else {
            let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = logs.iter().map(|x| (x - top).exp()).sum();
            let sign = if one_c < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
            sign * (ln_norm + top + s.ln()).exp()
        };
        probs.push(if p < 0.0 && p > -1e-12 { 0.0 } else { p });
    }
    Ok(PhotonDistribution { probs, n_max })
}

#[cfg(test)]
mod tests;
