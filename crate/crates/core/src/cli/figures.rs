//! Preset parameter sweeps behind `figure 2..6`.

use rayon::prelude::*;

use super::svg::PlotKind;
use super::table::{Cell, Table};
use crate::analytic::{self, MinimizeMode};
use crate::error::Result;
use crate::params::{Stability, SystemParams};

/// Knob overrides; `None` keeps the preset.
#[derive(Debug, Clone, Default)]
pub struct FigureOverrides {
    pub a: Option<Vec<f64>>,
    pub kappa: Option<f64>,
    pub beta: Option<f64>,
    pub epsilon: Option<Vec<f64>>,
    pub omega: Option<f64>,
    pub beta_step: Option<f64>,
    pub n_max: Option<usize>,
}

pub struct Figure {
    pub table: Table,
    pub title: String,
    pub kind: PlotKind,
    /// Human-readable notes on clipped sweep regions.
    pub clipped: Vec<String>,
}

pub const BETA_MAX: f64 = 2.0;
pub const DEFAULT_BETA_STEP: f64 = 1e-3;

fn beta_grid(step: f64) -> Vec<f64> {
    let n = (BETA_MAX / step + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

fn fmt_knob(x: f64) -> String {
    format!("{x}")
}

fn params(a: f64, kappa: f64, beta: f64, epsilon: f64) -> Result<SystemParams> {
    SystemParams::new(a, kappa, beta, epsilon)
}

fn clip_note(fig: u8, what: &str, clipped: usize, total: usize) -> Option<String> {
    (clipped > 0).then(|| format!("figure {fig}: clipped {clipped} of {total} points of {what} where lambda- <= 0"))
}

/// Evaluates `f` over the β grid in parallel, keeping grid order.
fn sweep<F>(grid: &[f64], f: F) -> Result<Vec<Vec<Cell>>>
where
    F: Fn(f64) -> Result<Vec<Cell>> + Sync,
{
    grid.par_iter().map(|&b| f(b)).collect()
}

fn count_empty(rows: &[Vec<Cell>], col: usize) -> usize {
    rows.iter().filter(|r| r[col] == Cell::Empty).count()
}

pub fn build(n: u8, o: &FigureOverrides) -> Result<Figure> {
    let step = o.beta_step.unwrap_or(DEFAULT_BETA_STEP);
    if !(step > 0.0 && step <= BETA_MAX) {
        return Err(crate::Error::InvalidParameter(format!("beta step must be in (0, {BETA_MAX}], got {step}")));
    }
    let kappa = o.kappa.unwrap_or(0.8);
    let grid = beta_grid(step);
    let first_a = |default: f64| o.a.as_ref().and_then(|v| v.first().copied()).unwrap_or(default);
    match n {
        2 => {
            let a = first_a(100.0);
            params(a, kappa, 0.0, 0.0)?;
            let rows = sweep(&grid, |b| {
                let p = params(a, kappa, b, 0.0)?;
                let nc = match analytic::variance_no_crystal(&p) {
                    Ok(v) => Cell::Num(v.minus),
                    Err(_) => Cell::Empty,
                };
                Ok(vec![b.into(), nc, analytic::variance_threshold(&p)?.minus.into()])
            })?;
            let mut table = Table::new(&["beta", "minus_no_crystal", "minus_threshold"]);
            let clipped = clip_note(2, "minus_no_crystal", count_empty(&rows, 1), rows.len()).into_iter().collect();
            table.rows = rows;
            let m = analytic::minimize_minus_variance(a, kappa, MinimizeMode::Threshold)?;
            Ok(Figure {
                table,
                title: format!("Quadrature variance, A={}, kappa={} (threshold minimum {:.4} at beta={:.4})", fmt_knob(a), fmt_knob(kappa), m.minus, m.beta),
                kind: PlotKind::Line,
                clipped,
            })
        }
        3 => {
            let list = o.a.clone().unwrap_or_else(|| vec![25.0, 50.0, 100.0]);
            for &a in &list {
                params(a, kappa, 0.0, 0.0)?;
            }
            let rows = sweep(&grid, |b| {
                let mut row = vec![Cell::Num(b)];
                for &a in &list {
                    row.push(analytic::variance_threshold(&params(a, kappa, b, 0.0)?)?.minus.into());
                }
                Ok(row)
            })?;
            let mut header = vec!["beta".to_string()];
            header.extend(list.iter().map(|a| format!("minus_threshold_a{}", fmt_knob(*a))));
            let mut table = Table::new(&header);
            table.rows = rows;
            Ok(Figure {
                table,
                title: format!("Threshold quadrature variance, kappa={}", fmt_knob(kappa)),
                kind: PlotKind::Line,
                clipped: Vec::new(),
            })
        }
        4 => {
            let a = first_a(25.0);
            let omega = o.omega.unwrap_or(0.0);
            params(a, kappa, 0.0, 0.0)?;
            let rows = sweep(&grid, |b| {
                let p = params(a, kappa, b, 0.0)?;
                let nc = if p.stability() == Stability::Stable {
                    Cell::Num(analytic::spectrum_minus(&p, omega)?)
                } else {
                    Cell::Empty
                };
                Ok(vec![b.into(), nc, analytic::spectrum_minus_threshold(&p, omega).into()])
            })?;
            let mut table = Table::new(&["beta", "s_minus_no_crystal", "s_minus_threshold"]);
            let clipped = clip_note(4, "s_minus_no_crystal", count_empty(&rows, 1), rows.len()).into_iter().collect();
            table.rows = rows;
            Ok(Figure {
                table,
                title: format!("Squeezing spectrum at omega={}, A={}, kappa={}", fmt_knob(omega), fmt_knob(a), fmt_knob(kappa)),
                kind: PlotKind::Line,
                clipped,
            })
        }
        5 => {
            let a = first_a(25.0);
            let eps = o.epsilon.clone().unwrap_or_else(|| vec![0.0, 0.3]);
            for &e in &eps {
                params(a, kappa, 0.0, e)?;
            }
            let rows = sweep(&grid, |b| {
                let mut row = vec![Cell::Num(b)];
                for &e in &eps {
                    let p = params(a, kappa, b, e)?;
                    row.push(if p.stability() == Stability::Stable {
                        analytic::mean_photon_number(&p, f64::INFINITY)?.into()
                    } else {
                        Cell::Empty
                    });
                }
                Ok(row)
            })?;
            let mut header = vec!["beta".to_string()];
            header.extend(eps.iter().map(|e| format!("n_eps{}", fmt_knob(*e))));
            let clipped = eps
                .iter()
                .enumerate()
                .filter_map(|(k, e)| clip_note(5, &format!("epsilon={}", fmt_knob(*e)), count_empty(&rows, k + 1), rows.len()))
                .collect();
            let mut table = Table::new(&header);
            table.rows = rows;
            Ok(Figure {
                table,
                title: format!("Steady-state mean photon number, A={}, kappa={}", fmt_knob(a), fmt_knob(kappa)),
                kind: PlotKind::Line,
                clipped,
            })
        }
        6 => {
            let a = first_a(100.0);
            let beta = o.beta.unwrap_or(0.067);
            let eps = o.epsilon.clone().unwrap_or_else(|| vec![0.0, 0.3]);
            let n_max = o.n_max.unwrap_or(30);
            let mut cols = Vec::new();
            let mut clipped = Vec::new();
            for &e in &eps {
                let p = params(a, kappa, beta, e)?;
                if p.stability() == Stability::Stable {
                    let rec = analytic::steady_record(&p)?;
                    cols.push(Some(analytic::photon_distribution(&rec, n_max)?.probs));
                } else {
                    clipped.push(format!("figure 6: epsilon={} is not below threshold; column left empty", fmt_knob(e)));
                    cols.push(None);
                }
            }
            let mut header = vec!["n".to_string()];
            header.extend(eps.iter().map(|e| format!("p_eps{}", fmt_knob(*e))));
            let mut table = Table::new(&header);
            for n in 0..=n_max {
                let mut row = vec![Cell::from(n)];
                for c in &cols {
                    row.push(c.as_ref().map_or(Cell::Empty, |v| Cell::Num(v[n])));
                }
                table.push(row);
            }
            Ok(Figure {
                table,
                title: format!("Photon number distribution, A={}, beta={}, kappa={}", fmt_knob(a), fmt_knob(beta), fmt_knob(kappa)),
                kind: PlotKind::Stem,
                clipped,
            })
        }
        _ => Err(crate::Error::InvalidParameter(format!("figure must be 2..=6, got {n}"))),
    }
}
