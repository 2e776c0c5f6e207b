//! Cross-engine comparison at a single parameter point.

use super::table::{Cell, Table};
use crate::error::Result;
use crate::params::SystemParams;
use crate::{analytic, fock_oracle, moments_ode, phase_space_mc};

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub dim: usize,
    pub n_traj: usize,
    pub seed: u64,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
enum Tol {
    Rel(f64),
    Abs(f64),
    /// Multiples of the Monte Carlo standard error.
    Se(f64, f64),
}

struct Report {
    table: Table,
    failures: usize,
}

impl Report {
    fn new() -> Self {
        Report {
            table: Table::new(&["check", "engine", "value", "reference", "delta", "tolerance", "status"]),
            failures: 0,
        }
    }

    fn compare(&mut self, check: &str, engine: &str, value: f64, reference: f64, tol: Tol) {
        let delta = (value - reference).abs();
        let allowed = match tol {
            Tol::Rel(r) => r * reference.abs(),
            Tol::Abs(a) => a,
            Tol::Se(k, se) => k * se,
        };
        let pass = delta <= allowed || delta <= 1e-12;
        let tol_text = match tol {
            Tol::Rel(r) => format!("rel {r:e}"),
            Tol::Abs(a) => format!("abs {a:e}"),
            Tol::Se(k, se) => format!("{k} SE (SE {se:.3e})"),
        };
        if !pass {
            self.failures += 1;
        }
        self.table.push(vec![
            check.into(),
            engine.into(),
            value.into(),
            reference.into(),
            delta.into(),
            tol_text.into(),
            if pass { "PASS" } else { "FAIL" }.into(),
        ]);
    }

    fn engine_error(&mut self, check: &str, engine: &str, err: &crate::Error) {
        self.failures += 1;
        self.table.push(vec![
            check.into(),
            engine.into(),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            format!("ERROR: {err}").into(),
        ]);
    }
}

/// Returns the report and whether every check passed. Fails early only when
/// the point has no stationary state.
pub fn verify(p: &SystemParams, o: &VerifyOptions) -> Result<(Table, bool)> {
    let c = p.require_stable()?;
    let rec = analytic::steady_record(p)?;
    let var = analytic::variance_steady(p)?;
    let (ap, am) = analytic::steady_alpha_sq(&c)?;
    let mut r = Report::new();

    match moments_ode::steady_from_linear_solve(p) {
        Ok(m) => {
            r.compare("steady n", "moments_ode", m.n_cl, rec.n_cl, Tol::Rel(1e-8));
            r.compare("steady <alpha+^2>", "moments_ode", m.var_flow_plus, ap, Tol::Rel(1e-8));
            r.compare("steady <alpha-^2>", "moments_ode", m.var_flow_minus, am, Tol::Rel(1e-8));
        }
        Err(e) => r.engine_error("steady moments", "moments_ode", &e),
    }
    let t1 = 1.0 / c.lambda_minus;
    let opts = moments_ode::PropagateOptions {
        stride: usize::MAX,
        ..Default::default()
    };
    match moments_ode::propagate_with(p, t1, moments_ode::max_step(p), &opts) {
        Ok(s) => {
            let last = s.last().expect("series has the start state");
            let tr = analytic::transient_moments(p, last.t)?;
            r.compare("transient n at 1/lambda-", "moments_ode", last.n_cl, tr.n_cl, Tol::Rel(1e-8));
        }
        Err(e) => r.engine_error("transient n", "moments_ode", &e),
    }

    match fock_oracle::steady_state_adaptive(p, o.dim) {
        Ok(st) => {
            let obs = st.observables();
            r.compare("steady n", "fock_oracle", obs.mean_n, rec.n_cl, Tol::Rel(1e-3));
            r.compare("steady var+", "fock_oracle", obs.var_plus, var.plus.value(), Tol::Rel(1e-3));
            r.compare("steady var-", "fock_oracle", obs.var_minus, var.minus, Tol::Rel(1e-3));
            let pd = analytic::photon_distribution(&rec, o.dim - 1)?;
            let worst = obs
                .pnd
                .iter()
                .zip(&pd.probs)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            r.compare("max |P(n) - P_gauss(n)|", "fock_oracle", worst, 0.0, Tol::Abs(1e-4));
        }
        Err(e) => r.engine_error("steady state", "fock_oracle", &e),
    }

    let rate = c.lambda_plus.max(c.lambda_minus.abs());
    let dt = o.dt.unwrap_or_else(|| (2e-3f64).min(0.02 / rate));
    let t_end = 10.0 / c.lambda_minus;
    let opts = phase_space_mc::RunOptions { samples: 1 };
    match phase_space_mc::run_with(p, o.n_traj, t_end, dt, o.seed, &opts) {
        Ok(s) => {
            let k = s.last_index();
            let tr = analytic::transient_moments(p, s.times[k])?;
            let n = s.n_cl[k];
            r.compare("n at 10/lambda-", "phase_space_mc", n.mean, tr.n_cl, Tol::Se(4.0, n.se));
            let x = s.alpha_plus_sq[k];
            r.compare("<alpha+^2> at 10/lambda-", "phase_space_mc", x.mean, tr.alpha_plus_sq(), Tol::Se(4.0, x.se));
            let x = s.alpha_minus_sq[k];
            r.compare("<alpha-^2> at 10/lambda-", "phase_space_mc", x.mean, tr.alpha_minus_sq(), Tol::Se(4.0, x.se));
        }
        Err(e) => r.engine_error("moments", "phase_space_mc", &e),
    }
    let ok = r.failures == 0;
    Ok((r.table, ok))
}
