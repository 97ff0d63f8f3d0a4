//! Time stepping of the two-scale system on the τ grid.
//!
//! Stage i:  U^{ni}  = φ₀(c_iΥ)Uⁿ + h Σ_j ā_ij(Υ) f_τ(U^{nj})
//! Update:   U^{n+1} = φ₀(Υ)Uⁿ    + h Σ_j b̄_j(Υ)  f_τ(U^{nj})
//! with Υ = (h/ε̃)∂_τ applied mode by mode.

use num_complex::Complex64;

use crate::error::{CpdError, Result};
use crate::integrators::tableau::Tableau;
use crate::problems::Problem;
use crate::tau::{MultiplierSpec, Spectrum, TauField, TauGrid};
use crate::twoscale::{prepare_initial, InitVariant, TwoScaleRhs, TwoScaleState};

pub const FIXED_POINT_TOL: f64 = 1e-13;
pub const FIXED_POINT_MAX_ITER: usize = 100;
/// Runs abort when the monitored norm exceeds this multiple of its initial value.
pub const GROWTH_LIMIT: f64 = 10.0;
/// Largest number of steps a single run may take.
pub const MAX_STEPS: usize = 10_000_000;

/// Sup-norm monitor max(‖first‖, ‖second‖/second_scale) with an upper limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monitor {
    pub second_scale: f64,
    pub limit: f64,
}

impl Monitor {
    pub fn measure(&self, u: &TauField) -> f64 {
        let d = u.dim() / 2;
        u.sup_norm_of(0..d).max(u.sup_norm_of(d..2 * d) / self.second_scale)
    }

    /// Monitor allowing [`GROWTH_LIMIT`] times the size of `initial`.
    pub fn for_state(rhs: &TwoScaleRhs, initial: &TwoScaleState) -> Self {
        let second_scale = if rhs.dim() == 2 {
            rhs.eps_tilde().abs()
        } else {
            1.0
        };
        let m = Monitor {
            second_scale,
            limit: f64::INFINITY,
        };
        let size = m.measure(&initial.stacked()).max(f64::MIN_POSITIVE);
        Monitor {
            second_scale,
            limit: GROWTH_LIMIT * size,
        }
    }

    fn check(&self, t: f64, u: &TauField) -> Result<()> {
        if self.measure(u) > self.limit {
            return Err(CpdError::Unbounded {
                t,
                limit: GROWTH_LIMIT,
            });
        }
        Ok(())
    }
}

/// Symbol tables of one tableau at one step size.
#[derive(Debug, Clone)]
pub struct StepPlan {
    tab: Tableau,
    rhs: TwoScaleRhs,
    grid: TauGrid,
    h: f64,
    propagator: Vec<Complex64>,
    stage_propagators: Vec<Vec<Complex64>>,
    a: Vec<Vec<Option<Vec<Complex64>>>>,
    b: Vec<Option<Vec<Complex64>>>,
    monitor: Option<Monitor>,
    iterations: usize,
}

impl StepPlan {
    pub fn new(tab: &Tableau, rhs: &TwoScaleRhs, grid: &TauGrid, h: f64) -> Result<Self> {
        if !h.is_finite() || h == 0.0 {
            return Err(CpdError::BadStep(h));
        }
        if grid.n_tau() != rhs.n_tau() {
            return Err(CpdError::DimensionMismatch {
                expected: rhs.n_tau(),
                got: grid.n_tau(),
            });
        }
        let sigma = h / rhs.eps_tilde();
        let table = |g: &MultiplierSpec| (!g.is_zero()).then(|| grid.symbol(g, sigma));
        Ok(StepPlan {
            tab: tab.clone(),
            rhs: rhs.clone(),
            grid: grid.clone(),
            h,
            propagator: grid.symbol(&MultiplierSpec::phi(0, 1.0), sigma),
            stage_propagators: tab
                .c
                .iter()
                .map(|&c| grid.symbol(&MultiplierSpec::phi(0, c), sigma))
                .collect(),
            a: tab.abar.iter().map(|row| row.iter().map(table).collect()).collect(),
            b: tab.bbar.iter().map(table).collect(),
            monitor: None,
            iterations: 0,
        })
    }

    pub fn with_monitor(mut self, monitor: Monitor) -> Self {
        self.monitor = Some(monitor);
        self
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Fixed-point iterations used by the last implicit step.
    pub fn last_iterations(&self) -> usize {
        self.iterations
    }

    fn stage(&self, i: usize, uh: &Spectrum, fh: &[Spectrum]) -> TauField {
        let mut s = uh.clone();
        s.apply_symbol(&self.stage_propagators[i]);
        for (j, f) in fh.iter().enumerate() {
            if let Some(sym) = &self.a[i][j] {
                s.add_symbol_times(self.h, sym, f);
            }
        }
        self.grid.inverse(&s)
    }

    fn eval(&self, t: f64, u: &TauField) -> Result<Spectrum> {
        Ok(self.grid.forward(&self.rhs.eval_field(t, u)?))
    }

    pub fn step(&mut self, state: &TwoScaleState) -> Result<TwoScaleState> {
        let t = state.t;
        let u = state.stacked();
        let uh = self.grid.forward(&u);
        let s = self.tab.stages();
        let mut fh: Vec<Spectrum> = Vec::with_capacity(s);

        if self.tab.explicit {
            for i in 0..s {
                let si = self.stage(i, &uh, &fh);
                if let Some(m) = &self.monitor {
                    m.check(t, &si)?;
                }
                fh.push(self.eval(t + self.tab.c[i] * self.h, &si)?);
            }
        } else {
            let f0 = self.eval(t, &u)?;
            fh = vec![f0; s];
            let mut prev: Option<Vec<TauField>> = None;
            let mut gap = f64::INFINITY;
            let mut converged = false;
            for it in 1..=FIXED_POINT_MAX_ITER {
                let stages: Vec<TauField> = (0..s).map(|i| self.stage(i, &uh, &fh)).collect();
                if let Some(p) = &prev {
                    gap = stages
                        .iter()
                        .zip(p)
                        .fold(0.0, |m, (a, b)| m.max(a.max_abs_diff(b)));
                }
                if !gap.is_finite() && prev.is_some() {
                    break;
                }
                fh = stages
                    .iter()
                    .enumerate()
                    .map(|(i, si)| self.eval(t + self.tab.c[i] * self.h, si))
                    .collect::<Result<_>>()?;
                self.iterations = it;
                if gap < FIXED_POINT_TOL {
                    converged = true;
                    if let Some(m) = &self.monitor {
                        for si in &stages {
                            m.check(t, si)?;
                        }
                    }
                    break;
                }
                prev = Some(stages);
            }
            if !converged {
                return Err(CpdError::FixedPointDiverged {
                    iterations: FIXED_POINT_MAX_ITER,
                    gap,
                });
            }
        }

        let mut next = uh;
        next.apply_symbol(&self.propagator);
        for (j, f) in fh.iter().enumerate() {
            if let Some(sym) = &self.b[j] {
                next.add_symbol_times(self.h, sym, f);
            }
        }
        let u1 = self.grid.inverse(&next);
        let t1 = t + self.h;
        if let Some(l) = (0..u1.n_tau()).find(|&l| u1.node_values(l).iter().any(|v| !v.is_finite())) {
            return Err(CpdError::NonFinite { t: t1, node: l });
        }
        if let Some(m) = &self.monitor {
            m.check(t1, &u1)?;
        }
        Ok(TwoScaleState::from_stacked(t1, &u1))
    }
}

/// One step of size `h` (negative steps are allowed).
pub fn step(
    tab: &Tableau,
    rhs: &TwoScaleRhs,
    grid: &TauGrid,
    state: &TwoScaleState,
    h: f64,
) -> Result<TwoScaleState> {
    StepPlan::new(tab, rhs, grid, h)?.step(state)
}

/// Number of steps and the step size snapped so that they tile [0, t_end].
pub fn step_count(h: f64, t_end: f64) -> Result<(usize, f64)> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(CpdError::BadStep(h));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(CpdError::Config(format!("t_end must be nonnegative, got {t_end}")));
    }
    if t_end == 0.0 {
        return Ok((0, h));
    }
    let ratio = t_end / h;
    let n = ratio.round().max(1.0);
    if n > MAX_STEPS as f64 {
        return Err(CpdError::Config(format!(
            "{n} steps exceed the limit of {MAX_STEPS}"
        )));
    }
    if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        log::warn!("t_end/h = {ratio} is not an integer; using {n} steps of {}", t_end / n);
    }
    Ok((n as usize, t_end / n))
}

/// Settings of a two-scale run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub n_tau: usize,
    /// Initial-data order; defaults to the tableau's requirement.
    pub init_order: Option<usize>,
    pub init_variant: InitVariant,
    /// Keep every step rather than only the endpoints.
    pub record: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            n_tau: crate::tau::DEFAULT_N_TAU,
            init_order: None,
            init_variant: InitVariant::Literal,
            record: true,
        }
    }
}

/// Physical trajectory samples (t_n, x_n, v_n).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub steps: usize,
}

impl Trajectory {
    pub fn push(&mut self, t: f64, x: Vec<f64>, v: Vec<f64>) {
        self.t.push(t);
        self.x.push(x);
        self.v.push(v);
    }

    /// Last sample (t, x, v).
    pub fn last(&self) -> Option<(f64, &[f64], &[f64])> {
        let i = self.t.len().checked_sub(1)?;
        Some((self.t[i], &self.x[i], &self.v[i]))
    }
}

/// Two-scale solve on [0, t_end], reconstructing (x, v) on the diagonal.
pub fn solve(
    problem: &Problem,
    tab: &Tableau,
    h: f64,
    t_end: f64,
    opts: &SolveOptions,
) -> Result<Trajectory> {
    let (n, h) = step_count(h, t_end)?;
    let rhs = TwoScaleRhs::new(problem, opts.n_tau)?;
    let grid = TauGrid::new(opts.n_tau)?;
    let j = opts.init_order.unwrap_or(tab.min_init_order);
    let mut state = prepare_initial(&rhs, &grid, &rhs.initial_vector(), j, opts.init_variant)?;

    let mut traj = Trajectory::default();
    traj.push(0.0, problem.x0(), problem.v0());
    if n == 0 {
        return Ok(traj);
    }
    let mut plan = StepPlan::new(tab, &rhs, &grid, h)?.with_monitor(Monitor::for_state(&rhs, &state));
    for k in 1..=n {
        state = plan.step(&state)?;
        // keep t exact rather than accumulated
        state.t = k as f64 * h;
        let (x, v) = rhs.reconstruct(&grid, &state);
        problem.check_domain(state.t, &x)?;
        if opts.record || k == n {
            traj.push(state.t, x, v);
        }
    }
    traj.steps = n;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::tableau::{tableau_eo2, tableau_io2, Io2Variant};
    use crate::problems::builtin_2d;

    #[test]
    fn step_count_snaps() {
        assert_eq!(step_count(0.25, 1.0).unwrap(), (4, 0.25));
        let (n, h) = step_count(0.3, 1.0).unwrap();
        assert_eq!(n, 3);
        assert!((h - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(step_count(0.1, 0.0).unwrap().0, 0);
        assert!(step_count(-0.1, 1.0).is_err());
    }

    #[test]
    fn t_end_zero_returns_initial_data() {
        let p = Problem::Planar(builtin_2d());
        let tr = solve(&p, &tableau_eo2(), 0.1, 0.0, &SolveOptions::default()).unwrap();
        assert_eq!(tr.t, vec![0.0]);
        assert_eq!(tr.x[0], vec![0.1, 0.1]);
        assert_eq!(tr.v[0], vec![0.2, 0.1]);
    }

    #[test]
    fn records_every_step() {
        let p = Problem::Planar(builtin_2d().with_eps(0.25));
        let tr = solve(&p, &tableau_io2(Io2Variant::Midpoint), 0.125, 1.0, &SolveOptions::default()).unwrap();
        assert_eq!(tr.t.len(), 9);
        assert_eq!(tr.steps, 8);
        assert_eq!(tr.t[8], 1.0);
    }
}
