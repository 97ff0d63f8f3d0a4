//! Convergence studies, single runs and order-condition reports behind the
//! `cpd-bench` binary.

pub mod config;
pub mod study;

use std::io::Write;

use crate::error::{CpdError, Result};
use crate::integrators::order_conditions::{check_order_conditions, OrderConditionReport};
use crate::integrators::solver::{solve, SolveOptions, Trajectory};
use crate::integrators::Method;
use crate::problems::Problem;
use crate::reference::{boris_solve, gauss4_solve};
use crate::tau::DEFAULT_N_TAU;
use crate::twoscale::InitVariant;

pub use config::{parse_number, parse_number_list, StudyConfig};
pub use study::{fit_order, run_convergence, ConvergenceRecord, ErrorKind, OrderFit, StudyResult};

/// Two-scale settings shared by every run of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub n_tau: usize,
    pub init_order: Option<usize>,
    pub init_variant: InitVariant,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            n_tau: DEFAULT_N_TAU,
            init_order: None,
            init_variant: InitVariant::Literal,
        }
    }
}

/// Runs any method on [0, t_end]; `record` keeps every step.
pub fn run_method(
    problem: &Problem,
    method: Method,
    h: f64,
    t_end: f64,
    settings: &RunSettings,
    record: bool,
) -> Result<Trajectory> {
    let mut traj = match (method, method.tableau()) {
        (_, Some(tab)) => {
            let opts = SolveOptions {
                n_tau: settings.n_tau,
                init_order: settings.init_order,
                init_variant: settings.init_variant,
                record,
            };
            return solve(problem, &tab, h, t_end, &opts);
        }
        (Method::Boris, None) => boris_solve(problem, h, t_end)?,
        (Method::Gauss4, None) => gauss4_solve(problem, h, t_end)?,
        (m, None) => {
            return Err(CpdError::Unsupported {
                method: m.name().into(),
                problem: problem.name().into(),
            })
        }
    };
    if !record && traj.t.len() > 2 {
        let last = traj.t.len() - 1;
        traj.t = vec![traj.t[0], traj.t[last]];
        traj.x = vec![traj.x[0].clone(), traj.x[last].clone()];
        traj.v = vec![traj.v[0].clone(), traj.v[last].clone()];
    }
    Ok(traj)
}

/// Parameters of a single trajectory dump.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleRun {
    pub problem: String,
    pub method: Method,
    pub h: f64,
    pub eps: Option<f64>,
    pub t_end: f64,
    pub settings: RunSettings,
}

/// One recorded solve of the named problem.
pub fn run_single(run: &SingleRun) -> Result<Trajectory> {
    let mut problem = crate::problems::problem_by_name(&run.problem)?;
    if let Some(eps) = run.eps {
        problem = problem.with_eps(eps);
    }
    run_method(&problem, run.method, run.h, run.t_end, &run.settings, true)
}

/// CSV with columns t, x1..xd, v1..vd.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, w: W) -> Result<()> {
    let d = traj.x.first().map_or(0, Vec::len);
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| CpdError::Io(e.to_string());
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    header.extend((1..=d).map(|i| format!("v{i}")));
    wr.write_record(&header).map_err(io)?;
    for ((t, x), v) in traj.t.iter().zip(&traj.x).zip(&traj.v) {
        let row = std::iter::once(t)
            .chain(x)
            .chain(v)
            .map(|a| format!("{a:e}"));
        wr.write_record(row).map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}

/// Order-condition report of a two-scale method at the default samples.
pub fn report_order_conditions(method: Method) -> Result<OrderConditionReport> {
    let tab = method.tableau().ok_or_else(|| CpdError::Unsupported {
        method: method.name().into(),
        problem: "order-condition check".into(),
    })?;
    Ok(check_order_conditions(&tab, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_rejects_direct_solvers() {
        assert!(report_order_conditions(Method::Boris).is_err());
        let r = report_order_conditions(Method::Io4).unwrap();
        assert!(r.lower_orders_satisfied);
    }

    #[test]
    fn trajectory_csv_shape() {
        let run = SingleRun {
            problem: "paper-2d".into(),
            method: Method::Boris,
            h: 0.25,
            eps: Some(0.5),
            t_end: 1.0,
            settings: RunSettings::default(),
        };
        let traj = run_single(&run).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("t,x1,x2,v1,v2\n0e0,1e-1,1e-1,2e-1,1e-1\n"));
    }
}
