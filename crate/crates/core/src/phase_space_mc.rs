//! Stochastic c-number dynamics in a doubled phase space.
//!
//! Each trajectory carries an independent pair `(α, α⁺)` where `α⁺` stands in
//! for `α*` inside averages. The diffusion matrix on the pair is
//! `[[ε−2V, 2R], [2R, ε−2V]]`; it is split along `(1, ±1)` into two amplitudes
//! that become imaginary when the corresponding radicand is negative, which
//! is what lets `⟨α₋²⟩` take the sign the squeezed regime requires.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::{Coefficients, Stability, SystemParams};

/// Trajectories whose `|α|` or `|α⁺|` exceed this abort the run.
pub const BLOWUP_LIMIT: f64 = 1e6;
/// Largest allowed `dt · max(λ₊, |λ₋|)`.
pub const MAX_RATE_STEP: f64 = 0.05;
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFactorization {
    /// `√((ε − 2V + 2R)/2)`.
    pub amp_plus: Complex64,
    /// `√((ε − 2V − 2R)/2)`.
    pub amp_minus: Complex64,
}

pub fn factor_noise(c: &Coefficients) -> NoiseFactorization {
    NoiseFactorization {
        amp_plus: Complex64::new(0.5 * c.diffusion_plus(), 0.0).sqrt(),
        amp_minus: Complex64::new(0.5 * c.diffusion_minus(), 0.0).sqrt(),
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// `|mean − target|` in units of the standard error.
    pub fn z(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if self.se > 0.0 {
            d / self.se
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            se: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEstimate {
    pub re: Estimate,
    pub im: Estimate,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn merge(&mut self, o: &Sum) {
        self.add(o.s);
        self.add(o.c);
    }

    fn value(&self) -> f64 {
        self.s + self.c
    }
}

/// First and second raw moments of one sampled quantity.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    x: Sum,
    xx: Sum,
}

impl Moments {
    fn add(&mut self, x: f64) {
        self.x.add(x);
        self.xx.add(x * x);
    }

    fn merge(&mut self, o: &Moments) {
        self.x.merge(&o.x);
        self.xx.merge(&o.xx);
    }

    fn estimate(&self, n: usize) -> Estimate {
        let nf = n as f64;
        let mean = self.x.value() / nf;
        let var = if n > 1 {
            ((self.xx.value() - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            se: (var / nf).sqrt(),
        }
    }
}

fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// One Euler–Maruyama step for a single `(α, α⁺)` pair.
#[inline]
fn advance(c: &Coefficients, noise: &NoiseFactorization, sdt: f64, dt: f64, state: &mut (Complex64, Complex64), rng: &mut ChaCha8Rng) {
    let g = c.relaxation();
    let k = c.coupling();
    let xi1: f64 = rng.sample(StandardNormal);
    let xi2: f64 = rng.sample(StandardNormal);
    let (a, ad) = *state;
    let w1 = noise.amp_plus * (xi1 * sdt);
    let w2 = noise.amp_minus * (xi2 * sdt);
    state.0 = a + (-g * a + k * ad) * dt + w1 + w2;
    state.1 = ad + (-g * ad + k * a) * dt + w1 - w2;
}

fn check_step(c: &Coefficients, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let rate = c.lambda_plus.abs().max(c.lambda_minus.abs());
    if !(dt * rate < MAX_RATE_STEP) {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt} too large: dt * max(lambda+, |lambda-|) = {} must be < {MAX_RATE_STEP}",
            dt * rate
        )));
    }
    Ok(())
}

fn blowup(state: &(Complex64, Complex64), step: usize, dt: f64) -> Result<()> {
    let mag = state.0.norm().max(state.1.norm());
    if !(mag <= BLOWUP_LIMIT) {
        return Err(Error::Blowup {
            magnitude: mag,
            step,
            t: step as f64 * dt,
        });
    }
    Ok(())
}

/// An ensemble of trajectories, each with its own random stream derived from
/// `(seed, trajectory index)`.
#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    pub n_traj: usize,
    pub dt: f64,
    pub seed: u64,
    /// `(α, α⁺)` per trajectory.
    pub states: Vec<(Complex64, Complex64)>,
    rngs: Vec<ChaCha8Rng>,
    steps: usize,
}

impl TrajectoryEnsemble {
    /// All trajectories start at the vacuum.
    pub fn new(n_traj: usize, dt: f64, seed: u64) -> Self {
        TrajectoryEnsemble {
            n_traj,
            dt,
            seed,
            states: vec![(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); n_traj],
            rngs: (0..n_traj).map(|i| trajectory_rng(seed, i)).collect(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// One Euler–Maruyama step for every trajectory.
    pub fn step(&mut self, c: &Coefficients, noise: &NoiseFactorization) -> Result<()> {
        let (dt, sdt) = (self.dt, self.dt.sqrt());
        self.steps += 1;
        for (s, rng) in self.states.iter_mut().zip(&mut self.rngs) {
            advance(c, noise, sdt, dt, s, rng);
            blowup(s, self.steps, dt)?;
        }
        Ok(())
    }

    /// `⟨α⟩`, `⟨α⁺⟩` over the ensemble.
    pub fn means(&self) -> (ComplexEstimate, ComplexEstimate) {
        let mut m = [Moments::default(); 4];
        for (a, ad) in &self.states {
            m[0].add(a.re);
            m[1].add(a.im);
            m[2].add(ad.re);
            m[3].add(ad.im);
        }
        let e = |i: usize| m[i].estimate(self.n_traj);
        (
            ComplexEstimate { re: e(0), im: e(1) },
            ComplexEstimate { re: e(2), im: e(3) },
        )
    }
}

/// Ensemble moments at the sampled times.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    pub mean_alpha: Vec<ComplexEstimate>,
    pub mean_alpha_dag: Vec<ComplexEstimate>,
    /// Real part of `mean(α·α)`.
    pub alpha_sq: Vec<Estimate>,
    /// Real part of `mean(α⁺·α)`.
    pub n_cl: Vec<Estimate>,
    /// Real part of `mean((α⁺ + α)²)`.
    pub alpha_plus_sq: Vec<Estimate>,
    /// Real part of `mean((α⁺ − α)²)`.
    pub alpha_minus_sq: Vec<Estimate>,
    pub n_traj: usize,
}

impl MomentSeries {
    pub fn last_index(&self) -> usize {
        self.times.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Number of sampling intervals; samples are taken at `t = 0` and
    /// `samples` further evenly spaced steps.
    pub samples: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { samples: 50 }
    }
}

const N_QTY: usize = 8;

fn record(acc: &mut [Moments], a: Complex64, ad: Complex64) {
    let vals = [
        a.re,
        a.im,
        ad.re,
        ad.im,
        (a * a).re,
        (ad * a).re,
        ((ad + a) * (ad + a)).re,
        ((ad - a) * (ad - a)).re,
    ];
    for (m, v) in acc.iter_mut().zip(vals) {
        m.add(v);
    }
}

fn require_stable(p: &SystemParams) -> Result<Coefficients> {
    p.validate()?;
    let c = p.coefficients();
    if p.stability() != Stability::Stable {
        return Err(Error::NotStable {
            lambda_minus: c.lambda_minus,
        });
    }
    Ok(c)
}

/// Ensemble moment time series from the vacuum.
pub fn run(p: &SystemParams, n_traj: usize, t_end: f64, dt: f64, seed: u64) -> Result<MomentSeries> {
    run_with(p, n_traj, t_end, dt, seed, &RunOptions::default())
}

pub fn run_with(p: &SystemParams, n_traj: usize, t_end: f64, dt: f64, seed: u64, opts: &RunOptions) -> Result<MomentSeries> {
    let c = require_stable(p)?;
    check_step(&c, dt)?;
    if n_traj < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 trajectories, got {n_traj}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_end must be finite and >= 0, got {t_end}")));
    }
    let noise = factor_noise(&c);
    let steps = (t_end / dt).round() as usize;
    let samples = opts.samples.clamp(1, steps.max(1));
    // Sample step indices, evenly spread and always including 0 and the end.
    let sample_steps: Vec<usize> = (0..=samples).map(|k| k * steps / samples).collect();
    let n_chunks = n_traj.div_ceil(CHUNK);
    let sdt = dt.sqrt();

    let partials: Vec<Result<Vec<Moments>>> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut acc = vec![Moments::default(); sample_steps.len() * N_QTY];
            let lo = ci * CHUNK;
            let hi = (lo + CHUNK).min(n_traj);
            for i in lo..hi {
                let mut rng = trajectory_rng(seed, i);
                let mut s = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                let mut next = 0;
                for step in 0..=steps {
                    if step > 0 {
                        advance(&c, &noise, sdt, dt, &mut s, &mut rng);
                        blowup(&s, step, dt)?;
                    }
                    while next < sample_steps.len() && sample_steps[next] == step {
                        record(&mut acc[next * N_QTY..(next + 1) * N_QTY], s.0, s.1);
                        next += 1;
                    }
                }
            }
            Ok(acc)
        })
        .collect();

    let mut total = vec![Moments::default(); sample_steps.len() * N_QTY];
    for part in partials {
        for (t, x) in total.iter_mut().zip(part?) {
            t.merge(&x);
        }
    }
    let est = |k: usize, q: usize| total[k * N_QTY + q].estimate(n_traj);
    let n = sample_steps.len();
    Ok(MomentSeries {
        times: sample_steps.iter().map(|&s| s as f64 * dt).collect(),
        mean_alpha: (0..n).map(|k| ComplexEstimate { re: est(k, 0), im: est(k, 1) }).collect(),
        mean_alpha_dag: (0..n).map(|k| ComplexEstimate { re: est(k, 2), im: est(k, 3) }).collect(),
        alpha_sq: (0..n).map(|k| est(k, 4)).collect(),
        n_cl: (0..n).map(|k| est(k, 5)).collect(),
        alpha_plus_sq: (0..n).map(|k| est(k, 6)).collect(),
        alpha_minus_sq: (0..n).map(|k| est(k, 7)).collect(),
        n_traj,
    })
}

/// Sample covariances of the noise increments, each divided by `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseCovariance {
    /// `⟨ΔW_α ΔW_α⟩/dt`, target `ε − 2V`.
    pub aa: Estimate,
    /// `⟨ΔW_α ΔW_α⁺⟩/dt`, target `2R`.
    pub a_ad: Estimate,
    /// `⟨ΔW_α⁺ ΔW_α⁺⟩/dt`, target `ε − 2V`.
    pub adad: Estimate,
    /// `⟨ΔW_α⟩/√dt`, target 0.
    pub mean: ComplexEstimate,
}

/// Draws `n_samples` increments exactly as [`TrajectoryEnsemble::step`] does.
pub fn noise_increment_covariance(c: &Coefficients, n_samples: usize, dt: f64, seed: u64) -> NoiseCovariance {
    let noise = factor_noise(c);
    let sdt = dt.sqrt();
    let n_chunks = n_samples.div_ceil(CHUNK);
    let parts: Vec<[Moments; 5]> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut m = [Moments::default(); 5];
            let lo = ci * CHUNK;
            let hi = (lo + CHUNK).min(n_samples);
            for i in lo..hi {
                let mut rng = trajectory_rng(seed, i);
                let xi1: f64 = rng.sample(StandardNormal);
                let xi2: f64 = rng.sample(StandardNormal);
                let w1 = noise.amp_plus * (xi1 * sdt);
                let w2 = noise.amp_minus * (xi2 * sdt);
                let (wa, wd) = (w1 + w2, w1 - w2);
                m[0].add((wa * wa).re / dt);
                m[1].add((wa * wd).re / dt);
                m[2].add((wd * wd).re / dt);
                m[3].add(wa.re / sdt);
                m[4].add(wa.im / sdt);
            }
            m
        })
        .collect();
    let mut m = [Moments::default(); 5];
    for p in &parts {
        for (a, b) in m.iter_mut().zip(p) {
            a.merge(b);
        }
    }
    NoiseCovariance {
        aa: m[0].estimate(n_samples),
        a_ad: m[1].estimate(n_samples),
        adad: m[2].estimate(n_samples),
        mean: ComplexEstimate {
            re: m[3].estimate(n_samples),
            im: m[4].estimate(n_samples),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationOptions {
    pub n_traj: usize,
    pub dt: f64,
    pub seed: u64,
    /// Burn-in before the first time origin; `None` means `10/λ₋`.
    pub t_burn: Option<f64>,
    pub n_origins: usize,
    pub origin_spacing: f64,
    /// Independent trajectory batches used for the standard errors.
    pub n_batches: usize,
    /// Frequencies at which to evaluate the integrated spectrum.
    pub omegas: Vec<f64>,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        CorrelationOptions {
            n_traj: 20_000,
            dt: 1e-3,
            seed: 1,
            t_burn: None,
            n_origins: 8,
            origin_spacing: 1.0,
            n_batches: 20,
            omegas: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumEstimate {
    pub omega: f64,
    pub s_plus: Estimate,
    pub s_minus: Estimate,
}

/// Stationary two-time correlations `⟨α±(t) α±(t+τ)⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    pub tau_grid: Vec<f64>,
    pub corr_plus: Vec<Estimate>,
    pub corr_minus: Vec<Estimate>,
    /// Fitted exponential decay rate of `corr_plus`.
    pub decay_plus: Estimate,
    /// Fitted exponential decay rate of `corr_minus`.
    pub decay_minus: Estimate,
    pub spectrum: Vec<SpectrumEstimate>,
}

/// Least-squares slope of `ln(y/y₀)` against `τ`, over the points where the
/// reference curve stays above a fifth of its start.
fn fit_decay(tau: &[f64], y: &[f64], use_point: &[bool]) -> f64 {
    let y0 = y[0];
    let pts: Vec<(f64, f64)> = tau
        .iter()
        .zip(y)
        .zip(use_point)
        .filter(|&((_, &v), &u)| u && v / y0 > 0.0)
        .map(|((&t, &v), _)| (t, (v / y0).ln()))
        .collect();
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    -sxy / sxx
}

/// `∫₀^∞ C(τ) cos ωτ dτ` by the trapezoid rule on the grid, with the tail past
/// the last point completed by `C(τ_max) e^{−λ(τ−τ_max)}`.
fn cosine_transform(tau: &[f64], y: &[f64], decay: f64, omega: f64) -> f64 {
    let mut s = 0.0;
    for i in 1..tau.len() {
        let h = tau[i] - tau[i - 1];
        s += 0.5 * h * (y[i] * (omega * tau[i]).cos() + y[i - 1] * (omega * tau[i - 1]).cos());
    }
    let tm = *tau.last().unwrap();
    let ym = *y.last().unwrap();
    if decay > 0.0 {
        s += ym * (decay * (omega * tm).cos() - omega * (omega * tm).sin()) / (decay * decay + omega * omega);
    }
    s
}

/// Lag products averaged over trajectories and time origins, with standard
/// errors from independent trajectory batches. Also fits the decay rates and,
/// if `opts.omegas` is non-empty, integrates the output spectrum
/// `S±(ω) = 1 ± 2κ ∫₀^∞ C±(τ) cos ωτ dτ`.
pub fn two_time_correlation(p: &SystemParams, tau_grid: &[f64], opts: &CorrelationOptions) -> Result<CorrelationEstimate> {
    let c = require_stable(p)?;
    let dt = opts.dt;
    check_step(&c, dt)?;
    if tau_grid.is_empty() || tau_grid[0] != 0.0 || tau_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("tau grid must start at 0 and increase strictly".into()));
    }
    if opts.n_batches < 2 || opts.n_traj < opts.n_batches || opts.n_origins == 0 {
        return Err(Error::InvalidParameter(format!(
            "need n_traj >= n_batches >= 2 and n_origins >= 1, got {} / {} / {}",
            opts.n_traj, opts.n_batches, opts.n_origins
        )));
    }
    let noise = factor_noise(&c);
    let sdt = dt.sqrt();
    let t_burn = opts.t_burn.unwrap_or(10.0 / c.lambda_minus);
    let burn_steps = (t_burn / dt).round() as usize;
    let lag_steps: Vec<usize> = tau_grid.iter().map(|t| (t / dt).round() as usize).collect();
    let spacing = ((opts.origin_spacing / dt).round() as usize).max(1);
    let window = (opts.n_origins - 1) * spacing + lag_steps.last().unwrap() + 1;
    let total_steps = burn_steps + window - 1;
    let n_lag = tau_grid.len();
    let tau: Vec<f64> = lag_steps.iter().map(|&s| s as f64 * dt).collect();

    // Per batch: mean lag products, plus and minus.
    let batches: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..opts.n_batches)
        .into_par_iter()
        .map(|b| {
            let lo = b * opts.n_traj / opts.n_batches;
            let hi = (b + 1) * opts.n_traj / opts.n_batches;
            let mut sp = vec![Sum::default(); n_lag];
            let mut sm = vec![Sum::default(); n_lag];
            let mut buf_p = vec![Complex64::new(0.0, 0.0); window];
            let mut buf_m = vec![Complex64::new(0.0, 0.0); window];
            for i in lo..hi {
                let mut rng = trajectory_rng(opts.seed, i);
                let mut s = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                for step in 1..=total_steps {
                    advance(&c, &noise, sdt, dt, &mut s, &mut rng);
                    blowup(&s, step, dt)?;
                    if step >= burn_steps {
                        buf_p[step - burn_steps] = s.1 + s.0;
                        buf_m[step - burn_steps] = s.1 - s.0;
                    }
                }
                if burn_steps == 0 {
                    buf_p[0] = Complex64::new(0.0, 0.0);
                    buf_m[0] = Complex64::new(0.0, 0.0);
                }
                for o in 0..opts.n_origins {
                    let t0 = o * spacing;
                    for (k, &l) in lag_steps.iter().enumerate() {
                        sp[k].add((buf_p[t0] * buf_p[t0 + l]).re);
                        sm[k].add((buf_m[t0] * buf_m[t0 + l]).re);
                    }
                }
            }
            let n = ((hi - lo) * opts.n_origins) as f64;
            Ok((
                sp.iter().map(|x| x.value() / n).collect(),
                sm.iter().map(|x| x.value() / n).collect(),
            ))
        })
        .collect();
    let batches: Vec<(Vec<f64>, Vec<f64>)> = batches.into_iter().collect::<Result<_>>()?;

    let column = |k: usize, plus: bool| -> Vec<f64> {
        batches.iter().map(|(p, m)| if plus { p[k] } else { m[k] }).collect()
    };
    let corr_plus: Vec<Estimate> = (0..n_lag).map(|k| Estimate::from_samples(&column(k, true))).collect();
    let corr_minus: Vec<Estimate> = (0..n_lag).map(|k| Estimate::from_samples(&column(k, false))).collect();

    let mask = |corr: &[Estimate]| -> Vec<bool> {
        let y0 = corr[0].mean;
        corr.iter().map(|e| e.mean / y0 > 0.2).collect()
    };
    let mask_p = mask(&corr_plus);
    let mask_m = mask(&corr_minus);
    let decays: Vec<(f64, f64)> = batches
        .iter()
        .map(|(p, m)| (fit_decay(&tau, p, &mask_p), fit_decay(&tau, m, &mask_m)))
        .collect();
    let decay_plus = Estimate::from_samples(&decays.iter().map(|d| d.0).collect::<Vec<_>>());
    let decay_minus = Estimate::from_samples(&decays.iter().map(|d| d.1).collect::<Vec<_>>());

    let kappa = p.kappa;
    let spectrum = opts
        .omegas
        .iter()
        .map(|&w| {
            let (plus, minus): (Vec<f64>, Vec<f64>) = batches
                .iter()
                .zip(&decays)
                .map(|((bp, bm), d)| {
                    (
                        1.0 + 2.0 * kappa * cosine_transform(&tau, bp, d.0, w),
                        1.0 - 2.0 * kappa * cosine_transform(&tau, bm, d.1, w),
                    )
                })
                .unzip();
            SpectrumEstimate {
                omega: w,
                s_plus: Estimate::from_samples(&plus),
                s_minus: Estimate::from_samples(&minus),
            }
        })
        .collect();

    Ok(CorrelationEstimate {
        tau_grid: tau,
        corr_plus,
        corr_minus,
        decay_plus,
        decay_minus,
        spectrum,
    })
}
