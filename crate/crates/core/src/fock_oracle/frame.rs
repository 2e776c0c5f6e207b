//! Truncation in a squeezed number basis.
//!
//! A strongly squeezed state needs thousands of ordinary Fock levels but only
//! a few dozen levels of the basis `S(r)|n⟩`, with
//! `S(r) = exp[r (a² − a†²) / 2]` and `S† a S = a cosh r − a† sinh r`.
//! The stored matrix is `ρ̃ = S† ρ S`; the generator acting on it is the same
//! master equation with every `a` replaced by `a cosh r − a† sinh r`, which is
//! exact before truncation. `r = 0` is the ordinary Fock basis.

use num_complex::Complex64;

use super::{DensityMatrix, OracleObservables};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezedFrame {
    r: f64,
}

impl SqueezedFrame {
    pub const IDENTITY: SqueezedFrame = SqueezedFrame { r: 0.0 };

    pub fn new(r: f64) -> Result<Self> {
        if !r.is_finite() {
            return Err(Error::InvalidParameter(format!("squeeze parameter must be finite, got {r}")));
        }
        Ok(SqueezedFrame { r })
    }

    /// Frame in which a state with these quadrature variances has equal variances.
    pub fn balancing(var_plus: f64, var_minus: f64) -> Result<Self> {
        if !(var_plus > 0.0 && var_minus > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "variances must be positive, got ({var_plus}, {var_minus})"
            )));
        }
        Self::new(0.25 * (var_minus / var_plus).ln())
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `(cosh r, sinh r)`.
    pub fn mu_nu(&self) -> (f64, f64) {
        (self.r.cosh(), self.r.sinh())
    }

    /// Matrix elements `⟨m|S(r)|j⟩` for `m < rows`, `j < cols`, row-major.
    pub fn matrix(&self, rows: usize, cols: usize) -> Vec<f64> {
        let mut s = vec![0.0; rows * cols];
        if self.r == 0.0 {
            for k in 0..rows.min(cols) {
                s[k * cols + k] = 1.0;
            }
            return s;
        }
        let mut prev: Vec<f64> = Vec::new();
        for j in 0..cols {
            let col = self.column(j, &prev);
            for m in 0..rows.min(col.len()) {
                s[m * cols + j] = col[m];
            }
            prev = col;
        }
        s
    }

    /// `S|j⟩` in the number basis, given `S|j−1⟩` to fix the sign.
    ///
    /// `S|j⟩` is the eigenvector with eigenvalue `j` of
    /// `S a†a S† = (a† cosh r + a sinh r)(a cosh r + a† sinh r)`, which is
    /// tridiagonal on each parity chain. The three-term recurrence is run
    /// upward from the bottom of the chain and downward from far beyond the
    /// outer turning point, each in its stable direction, and the two halves
    /// are joined at the peak.
    fn column(&self, j: usize, prev: &[f64]) -> Vec<f64> {
        let (mu, nu) = self.mu_nu();
        let jf = j as f64;
        let p = j % 2;
        let decay = -(nu / mu).abs().ln();
        let turning = (2.0 * jf + 1.0) * (2.0 * self.r).cosh();
        let mut top = (turning + 2.0 * (90.0 / decay).ceil() + 20.0) as usize;
        if top % 2 != p {
            top += 1;
        }
        let mn = mu * nu;
        let diag = |m: usize| {
            let mf = m as f64;
            jf - mu * mu * mf - nu * nu * (mf + 1.0)
        };
        let up = |m: usize| mn * ((m as f64 + 1.0) * (m as f64 + 2.0)).sqrt();
        let down = |m: usize| mn * (m as f64 * (m as f64 - 1.0)).sqrt();

        let mut back = vec![0.0; top + 3];
        back[top] = 1.0;
        let mut m = top;
        while m >= p + 2 {
            back[m - 2] = (diag(m) * back[m] - up(m) * back[m + 2]) / down(m);
            if back[m - 2].abs() > 1e150 {
                for x in &mut back[m - 2..=top] {
                    *x *= 1e-150;
                }
            }
            m -= 2;
        }
        let peak = (p..=top)
            .step_by(2)
            .max_by(|&a, &b| back[a].abs().total_cmp(&back[b].abs()))
            .unwrap_or(p);

        let mut fwd = vec![0.0; peak + 1];
        fwd[p] = 1.0;
        let mut m = p;
        while m + 2 <= peak {
            let below = if m >= 2 { fwd[m - 2] } else { 0.0 };
            fwd[m + 2] = (diag(m) * fwd[m] - down(m) * below) / up(m);
            if fwd[m + 2].abs() > 1e150 {
                for x in &mut fwd[p..=m + 2] {
                    *x *= 1e-150;
                }
            }
            m += 2;
        }
        let mut psi = back;
        let k = psi[peak] / fwd[peak];
        for m in (p..peak).step_by(2) {
            psi[m] = fwd[m] * k;
        }

        let norm = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut sign = 1.0 / norm;
        if j == 0 {
            if psi[0] < 0.0 {
                sign = -sign;
            }
        } else {
            // (a cosh r + a† sinh r) S|j⟩ = √j S|j−1⟩ with a positive coefficient.
            let mut dot = 0.0;
            for (k, &v) in prev.iter().enumerate() {
                let kf = k as f64;
                let lowered = mu * (kf + 1.0).sqrt() * psi.get(k + 1).copied().unwrap_or(0.0)
                    + if k >= 1 { nu * kf.sqrt() * psi[k - 1] } else { 0.0 };
                dot += v * lowered;
            }
            if dot < 0.0 {
                sign = -sign;
            }
        }
        psi.truncate(top + 1);
        for x in &mut psi {
            *x *= sign;
        }
        psi
    }

    /// The vacuum `|0⟩⟨0|` expressed in this frame, `S†|0⟩⟨0|S`.
    pub fn vacuum(&self, dim: usize) -> DensityMatrix {
        let v = squeezed_vacuum(-self.r, dim);
        let mut rho = DensityMatrix::zeros(dim);
        for m in 0..dim {
            for n in 0..dim {
                rho[(m, n)] = Complex64::new(v[m] * v[n], 0.0);
            }
        }
        rho
    }
}

/// Number-basis amplitudes of `S(r)|0⟩`.
fn squeezed_vacuum(r: f64, len: usize) -> Vec<f64> {
    let (mu, nu) = (r.cosh(), r.sinh());
    let mut c = vec![0.0; len];
    if len == 0 {
        return c;
    }
    c[0] = 1.0 / mu.sqrt();
    let mut k = 1;
    while k + 1 < len {
        let kf = k as f64;
        c[k + 1] = -(nu / mu) * (kf / (kf + 1.0)).sqrt() * c[k - 1];
        k += 2;
    }
    c
}

/// A density matrix together with the frame it is stored in.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameState {
    pub rho: DensityMatrix,
    pub frame: SqueezedFrame,
}

impl FrameState {
    /// Moments and variances of the physical state `S ρ̃ S†`.
    ///
    /// `pnd` holds the first `dim` physical photon-number probabilities.
    pub fn observables(&self) -> OracleObservables {
        let inner = super::observables(&self.rho);
        if self.frame.r == 0.0 {
            return inner;
        }
        let (mu, nu) = self.frame.mu_nu();
        let d = self.rho.dim();
        // Literal truncated Tr(aa† ρ̃).
        let aad: f64 = (0..d)
            .filter(|&k| k + 1 < d)
            .map(|k| (k as f64 + 1.0) * self.rho[(k, k)].re)
            .sum();
        let a1 = inner.mean_a;
        let a2 = inner.mean_a_sq;
        let n = inner.mean_n;
        let mean_a = a1 * mu - a1.conj() * nu;
        let mean_a_sq = a2 * (mu * mu) + a2.conj() * (nu * nu) - Complex64::new(mu * nu * (aad + n), 0.0);
        let mean_n = mu * mu * n + nu * nu * aad - 2.0 * mu * nu * a2.re;
        let e2r = (2.0 * self.frame.r).exp();
        OracleObservables {
            mean_a,
            mean_a_sq,
            mean_n,
            var_plus: inner.var_plus / e2r,
            var_minus: inner.var_minus * e2r,
            pnd: self.photon_distribution(d),
            trace_err: inner.trace_err,
            min_eig: None,
        }
    }

    /// Physical `P(n) = ⟨n|S ρ̃ S†|n⟩` for `n < len`.
    pub fn photon_distribution(&self, len: usize) -> Vec<f64> {
        let d = self.rho.dim();
        if self.frame.r == 0.0 {
            let mut p = self.rho.diagonal();
            p.resize(len, 0.0);
            return p;
        }
        let s = self.frame.matrix(len, d);
        (0..len)
            .map(|n| {
                let row = &s[n * d..(n + 1) * d];
                let mut acc = 0.0;
                for j in 0..d {
                    if row[j] == 0.0 {
                        continue;
                    }
                    let mut inner = 0.0;
                    for k in 0..d {
                        inner += self.rho[(j, k)].re * row[k];
                    }
                    acc += row[j] * inner;
                }
                acc
            })
            .collect()
    }

    /// Husimi function `⟨α|S ρ̃ S†|α⟩/π` of the physical state.
    pub fn husimi(&self, alpha: Complex64) -> f64 {
        let d = self.rho.dim();
        if self.frame.r == 0.0 {
            return super::husimi(&self.rho, alpha);
        }
        // Coherent amplitudes out to well past the Poisson bulk.
        let n2 = alpha.norm_sqr();
        let rows = (n2 + 12.0 * n2.sqrt() + 60.0).ceil() as usize;
        let coh = super::coherent_amplitudes(alpha, rows);
        let s = self.frame.matrix(rows, d);
        // v_j = ⟨j|S†|α⟩ = Σ_m ⟨m|S|j⟩ ⟨m|α⟩.
        let mut v = vec![Complex64::new(0.0, 0.0); d];
        for m in 0..rows {
            for j in 0..d {
                v[j] += coh[m] * s[m * d + j];
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 0..d {
            let mut row = Complex64::new(0.0, 0.0);
            for n in 0..d {
                row += self.rho[(m, n)] * v[n];
            }
            acc += v[m].conj() * row;
        }
        acc.re / std::f64::consts::PI
    }
}
