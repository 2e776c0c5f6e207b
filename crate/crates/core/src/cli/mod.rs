//! Command-line front end.
//!
//! Knob flags accept a single value, a comma list, or `start:stop:step`
//! ranges (and lists of those); sweeps run over the Cartesian product in the
//! order `a`, `kappa`, `beta`, `epsilon`.

pub mod figures;
pub mod svg;
pub mod table;
pub mod verify;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::Error;
use crate::params::{Stability, SystemParams};
use crate::{analytic, fock_oracle, phase_space_mc};
use table::{Cell, Table};

pub const OUT_DIR_ENV: &str = "CASCADE_LASER_OUT_DIR";

pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const INVALID: i32 = 2;
    pub const NOT_STABLE: i32 = 3;
    pub const MISMATCH: i32 = 4;
    pub const IO: i32 = 5;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Csv,
    Svg,
}

#[derive(Parser, Debug)]
#[command(
    name = "cascade-laser",
    version,
    about = "Squeezing and photon statistics of a cascade laser with a parametric amplifier",
    after_help = "Knob values: 0.3 | 0.1,0.2 | 0:2:0.01 (start:stop:step). \
Numbers are written with 12 significant digits; clipped points are left empty. \
`figure` writes fig<N>.csv (and fig<N>.svg with --format svg) into --out, \
defaulting to $CASCADE_LASER_OUT_DIR or the current directory. \
Exit codes: 0 ok, 2 invalid parameters, 3 not stable, 4 verification mismatch, 5 I/O."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Subcommand, Debug, Clone, PartialEq)]
pub enum Command {
    /// Master-equation coefficients: a,kappa,beta,epsilon,R,S,U,V,B,lambda_minus,lambda_plus,epsilon_threshold.
    Coeffs,
    /// Stationary quadrature variances: ...,var_plus,var_minus (inf at threshold).
    Variance,
    /// Output squeezing spectra: ...,omega,s_plus,s_minus.
    Spectrum,
    /// Mean photon number from vacuum at --t-end (default: stationary): ...,t,mean_photon.
    MeanPhoton,
    /// Photon-number distribution of the Gaussian state, n < --dim (default 31): ...,n,p.
    Pnd,
    /// Figure data presets.
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(2..=6))]
        n: u8,
    },
    /// Analytic vs master-equation oracle vs Monte Carlo vs moment equations at one point.
    Verify,
    /// Doubled-phase-space Monte Carlo moments from vacuum: t,n_cl,n_cl_se,...
    Mc,
    /// Truncated-Fock master-equation oracle (stationary, or transient with --t-end).
    Oracle,
}

#[derive(clap::Args, Debug, Clone, Default)]
pub struct Options {
    /// Linear gain coefficient A (default 25).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Cavity damping constant (default 0.8).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub kappa: Option<String>,
    /// Pump Rabi frequency over atomic decay rate (default 0.1).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub beta: Option<String>,
    /// Parametric drive strength (default 0).
    #[arg(long, global = true, allow_hyphen_values = true, conflicts_with = "epsilon_rel_threshold")]
    pub epsilon: Option<String>,
    /// Parametric drive as a fraction of its threshold value.
    #[arg(long, global = true)]
    pub epsilon_rel_threshold: Option<String>,
    /// Frequency for spectra (default 0).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub omega: Option<String>,
    #[arg(long, global = true)]
    pub t_end: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Fock truncation (oracle, verify) or number of photon levels (pnd, figure 6).
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub n_traj: Option<usize>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Output file (directory for `figure`); stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Step of the beta grid for figure presets.
    #[arg(long, global = true)]
    pub beta_step: Option<f64>,
}

#[derive(Debug)]
pub enum CliError {
    Model(Error),
    Io { path: PathBuf, source: std::io::Error },
    Mismatch,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Model(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Mismatch => write!(f, "verification mismatch"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(Error::InvalidParameter(_)) => exit::INVALID,
            CliError::Model(Error::NotStable { .. }) => exit::NOT_STABLE,
            CliError::Model(_) => exit::FAILURE,
            CliError::Io { .. } => exit::IO,
            CliError::Mismatch => exit::MISMATCH,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `0.3`, `0.1,0.2` or `start:stop:step` (and comma lists of those).
pub fn parse_knob(text: &str) -> crate::Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("cannot parse value list '{text}'"));
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        match parts.as_slice() {
            [x] => out.push(num(x)?),
            [a, b, s] => {
                let (a, b, s) = (num(a)?, num(b)?, num(s)?);
                if !(s > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "range '{item}' needs start <= stop and step > 0"
                    )));
                }
                let n = ((b - a) / s + 1e-9).floor() as usize;
                out.extend((0..=n).map(|i| a + i as f64 * s));
            }
            _ => return Err(bad()),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn knob(v: &Option<String>, default: f64) -> crate::Result<Vec<f64>> {
    v.as_deref().map_or(Ok(vec![default]), parse_knob)
}

/// Parameter points of the sweep, in deterministic order.
pub fn sweep_points(o: &Options) -> crate::Result<Vec<SystemParams>> {
    let a = knob(&o.a, 25.0)?;
    let k = knob(&o.kappa, 0.8)?;
    let b = knob(&o.beta, 0.1)?;
    let rel = o.epsilon_rel_threshold.as_deref().map(parse_knob).transpose()?;
    let e = knob(&o.epsilon, 0.0)?;
    let mut pts = Vec::new();
    for &a in &a {
        for &k in &k {
            for &b in &b {
                let base = SystemParams::new(a, k, b, 0.0)?;
                match &rel {
                    Some(fr) => {
                        for &f in fr {
                            pts.push(base.at_threshold_fraction(f)?);
                        }
                    }
                    None => {
                        for &e in &e {
                            pts.push(SystemParams::new(a, k, b, e)?);
                        }
                    }
                }
            }
        }
    }
    Ok(pts)
}

fn knob_cells(p: &SystemParams) -> Vec<Cell> {
    vec![p.a.into(), p.kappa.into(), p.beta.into(), p.epsilon.into()]
}

fn header(extra: &[&str]) -> Vec<String> {
    ["a", "kappa", "beta", "epsilon"].iter().chain(extra).map(|s| s.to_string()).collect()
}

/// Drops points without a stationary state, reporting the clip on stderr.
/// Errors if nothing is left.
fn stable_only(points: Vec<SystemParams>, err: &mut dyn Write) -> CliResult<Vec<SystemParams>> {
    let total = points.len();
    let first_bad = points.iter().find(|p| p.stability() != Stability::Stable).copied();
    let kept: Vec<SystemParams> = points.into_iter().filter(|p| p.stability() == Stability::Stable).collect();
    if kept.is_empty() {
        let lm = first_bad.map_or(0.0, |p| p.coefficients().lambda_minus);
        return Err(Error::NotStable { lambda_minus: lm }.into());
    }
    if kept.len() < total {
        let _ = writeln!(err, "clipped {} of {} points where lambda- <= 0", total - kept.len(), total);
    }
    Ok(kept)
}

fn single_point(o: &Options) -> CliResult<SystemParams> {
    let pts = sweep_points(o)?;
    if pts.len() != 1 {
        return Err(Error::InvalidParameter(format!("this command takes a single parameter point, got {}", pts.len())).into());
    }
    Ok(pts[0])
}

fn rows_par<F>(points: &[SystemParams], f: F) -> CliResult<Vec<Vec<Cell>>>
where
    F: Fn(&SystemParams) -> crate::Result<Vec<Vec<Cell>>> + Send + Sync,
{
    let parts: Vec<crate::Result<Vec<Vec<Cell>>>> = points.par_iter().map(f).collect();
    let mut rows = Vec::new();
    for p in parts {
        rows.extend(p?);
    }
    Ok(rows)
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(table: &Table, title: &str, o: &Options, out: &mut dyn Write) -> CliResult<()> {
    let text = match o.format {
        Format::Csv => table.to_csv(),
        Format::Svg => svg::render(table, title, svg::PlotKind::Line),
    };
    match &o.out {
        Some(path) => write_file(path, &text),
        None => out.write_all(text.as_bytes()).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn run_command(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let o = &cli.opts;
    match &cli.command {
        Command::Coeffs => {
            let pts = sweep_points(o)?;
            let mut t = Table::new(&header(&["R", "S", "U", "V", "B", "lambda_minus", "lambda_plus", "epsilon_threshold"]));
            for p in &pts {
                let c = p.coefficients();
                let mut row = knob_cells(p);
                row.extend([c.r, c.s, c.u, c.v, c.b, c.lambda_minus, c.lambda_plus, p.threshold_epsilon()].map(Cell::Num));
                t.push(row);
            }
            emit(&t, "Coefficients", o, out)
        }
        Command::Variance => {
            let pts = sweep_points(o)?;
            let total = pts.len();
            let pts: Vec<SystemParams> = pts.into_iter().filter(|p| p.stability() != Stability::Unstable).collect();
            if pts.is_empty() {
                let p = sweep_points(o)?[0];
                return Err(Error::NotStable { lambda_minus: p.coefficients().lambda_minus }.into());
            }
            if pts.len() < total {
                let _ = writeln!(err, "clipped {} of {} points where lambda- < 0", total - pts.len(), total);
            }
            let mut t = Table::new(&header(&["var_plus", "var_minus"]));
            t.rows = rows_par(&pts, |p| {
                let v = analytic::variance_steady(p)?;
                let mut row = knob_cells(p);
                row.extend([Cell::Num(v.plus.value()), Cell::Num(v.minus)]);
                Ok(vec![row])
            })?;
            emit(&t, "Quadrature variances", o, out)
        }
        Command::Spectrum => {
            let pts = sweep_points(o)?;
            let total = pts.len();
            let pts: Vec<SystemParams> = pts.into_iter().filter(|p| p.stability() != Stability::Unstable).collect();
            if pts.is_empty() {
                let p = sweep_points(o)?[0];
                return Err(Error::NotStable { lambda_minus: p.coefficients().lambda_minus }.into());
            }
            if pts.len() < total {
                let _ = writeln!(err, "clipped {} of {} points where lambda- < 0", total - pts.len(), total);
            }
            let omegas = knob(&o.omega, 0.0)?;
            let mut t = Table::new(&header(&["omega", "s_plus", "s_minus"]));
            t.rows = rows_par(&pts, |p| {
                let curve = analytic::spectrum(p, &omegas)?;
                Ok((0..omegas.len())
                    .map(|i| {
                        let mut row = knob_cells(p);
                        row.extend([curve.omega_grid[i], curve.s_plus[i].value(), curve.s_minus[i]].map(Cell::Num));
                        row
                    })
                    .collect())
            })?;
            emit(&t, "Squeezing spectrum", o, out)
        }
        Command::MeanPhoton => {
            let t_end = o.t_end.unwrap_or(f64::INFINITY);
            let pts = sweep_points(o)?;
            let pts = if t_end.is_infinite() { stable_only(pts, err)? } else { pts };
            let mut t = Table::new(&header(&["t", "mean_photon"]));
            t.rows = rows_par(&pts, |p| {
                let mut row = knob_cells(p);
                row.extend([Cell::Num(t_end), Cell::Num(analytic::mean_photon_number(p, t_end)?)]);
                Ok(vec![row])
            })?;
            emit(&t, "Mean photon number", o, out)
        }
        Command::Pnd => {
            let t_end = o.t_end.unwrap_or(f64::INFINITY);
            let n_levels = o.dim.unwrap_or(31).max(1);
            let pts = sweep_points(o)?;
            let pts = if t_end.is_infinite() { stable_only(pts, err)? } else { pts };
            let mut t = Table::new(&header(&["n", "p"]));
            t.rows = rows_par(&pts, |p| {
                let rec = analytic::transient_moments(p, t_end)?;
                let pd = analytic::photon_distribution(&rec, n_levels - 1)?;
                Ok(pd
                    .probs
                    .iter()
                    .enumerate()
                    .map(|(n, &x)| {
                        let mut row = knob_cells(p);
                        row.extend([Cell::from(n), Cell::Num(x)]);
                        row
                    })
                    .collect())
            })?;
            emit(&t, "Photon number distribution", o, out)
        }
        Command::Figure { n } => {
            let ov = figures::FigureOverrides {
                a: o.a.as_deref().map(parse_knob).transpose()?,
                kappa: o.kappa.as_deref().map(parse_knob).transpose()?.map(|v| v[0]),
                beta: o.beta.as_deref().map(parse_knob).transpose()?.map(|v| v[0]),
                epsilon: o.epsilon.as_deref().map(parse_knob).transpose()?,
                omega: o.omega.as_deref().map(parse_knob).transpose()?.map(|v| v[0]),
                beta_step: o.beta_step,
                n_max: o.dim.map(|d| d.max(1) - 1),
            };
            let fig = figures::build(*n, &ov)?;
            for note in &fig.clipped {
                let _ = writeln!(err, "{note}");
            }
            let dir = o
                .out
                .clone()
                .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
            let csv = dir.join(format!("fig{n}.csv"));
            write_file(&csv, &fig.table.to_csv())?;
            let _ = writeln!(out, "{}", csv.display());
            if o.format == Format::Svg {
                let path = dir.join(format!("fig{n}.svg"));
                write_file(&path, &svg::render(&fig.table, &fig.title, fig.kind))?;
                let _ = writeln!(out, "{}", path.display());
            }
            Ok(())
        }
        Command::Verify => {
            let p = single_point(o)?;
            let vo = verify::VerifyOptions {
                dim: o.dim.unwrap_or(150),
                n_traj: o.n_traj.unwrap_or(10_000),
                seed: o.seed,
                dt: o.dt,
            };
            let (t, ok) = verify::verify(&p, &vo)?;
            emit(&t, "Verification", o, out)?;
            if ok {
                Ok(())
            } else {
                Err(CliError::Mismatch)
            }
        }
        Command::Mc => {
            let p = single_point(o)?;
            let c = p.require_stable()?;
            let t_end = o.t_end.unwrap_or(10.0 / c.lambda_minus);
            let dt = o.dt.unwrap_or_else(|| (2e-3f64).min(0.02 / c.lambda_plus.max(c.lambda_minus.abs())));
            let s = phase_space_mc::run(&p, o.n_traj.unwrap_or(10_000), t_end, dt, o.seed)?;
            let mut t = Table::new(&[
                "t",
                "n_cl",
                "n_cl_se",
                "alpha_sq",
                "alpha_sq_se",
                "alpha_plus_sq",
                "alpha_plus_sq_se",
                "alpha_minus_sq",
                "alpha_minus_sq_se",
            ]);
            for k in 0..s.times.len() {
                t.push(
                    [
                        s.times[k],
                        s.n_cl[k].mean,
                        s.n_cl[k].se,
                        s.alpha_sq[k].mean,
                        s.alpha_sq[k].se,
                        s.alpha_plus_sq[k].mean,
                        s.alpha_plus_sq[k].se,
                        s.alpha_minus_sq[k].mean,
                        s.alpha_minus_sq[k].se,
                    ]
                    .map(Cell::Num)
                    .to_vec(),
                );
            }
            emit(&t, "Monte Carlo moments", o, out)
        }
        Command::Oracle => {
            let p = single_point(o)?;
            let dim = o.dim.unwrap_or(150);
            let (obs, r, t) = match o.t_end {
                None => {
                    let st = fock_oracle::steady_state_adaptive(&p, dim)?;
                    (st.observables(), st.frame.r(), f64::INFINITY)
                }
                Some(t_end) => {
                    let dt = o.dt.unwrap_or_else(|| fock_oracle::max_step(&p));
                    let ev = fock_oracle::evolve(&fock_oracle::DensityMatrix::vacuum(dim), &p, t_end, dt)?;
                    (fock_oracle::observables(&ev.rho), 0.0, ev.t)
                }
            };
            let mut tab = Table::new(&["quantity", "value"]);
            let scalars = [
                ("t", t),
                ("frame_r", r),
                ("mean_n", obs.mean_n),
                ("mean_a_sq_re", obs.mean_a_sq.re),
                ("var_plus", obs.var_plus),
                ("var_minus", obs.var_minus),
                ("trace_err", obs.trace_err),
            ];
            for (k, v) in scalars {
                tab.push(vec![k.into(), v.into()]);
            }
            for (n, x) in obs.pnd.iter().enumerate() {
                tab.push(vec![format!("p_{n}").into(), (*x).into()]);
            }
            emit(&tab, "Oracle", o, out)
        }
    }
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => exit::OK,
                _ => exit::INVALID,
            };
            let text = e.render().to_string();
            if code == exit::OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let go = |out: &mut Vec<u8>, err: &mut Vec<u8>| match run_command(&cli, out, err) {
        Ok(()) => exit::OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    };
    let (mut o_buf, mut e_buf) = (Vec::new(), Vec::new());
    let code = match cli.opts.jobs {
        Some(j) => match rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build() {
            Ok(pool) => pool.install(|| go(&mut o_buf, &mut e_buf)),
            Err(e) => {
                let _ = writeln!(e_buf, "error: cannot start worker pool: {e}");
                exit::FAILURE
            }
        },
        None => go(&mut o_buf, &mut e_buf),
    };
    let _ = err.write_all(&e_buf);
    if out.write_all(&o_buf).and_then(|_| out.flush()).is_err() && code == exit::OK {
        return exit::IO;
    }
    code
}
