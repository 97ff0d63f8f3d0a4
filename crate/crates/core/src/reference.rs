//! Direct integrators of ẋ = v, v̇ = v × B(x) + E(x) used as comparators
//! and as the source of reference solutions.

use nalgebra::{DMatrix, DVector};

use crate::error::{CpdError, Result};
use crate::integrators::solver::{step_count, Trajectory};
use crate::problems::Problem;

/// Smallest tolerance accepted by [`reference_solution`].
pub const MIN_REFERENCE_TOL: f64 = 1e-12;
/// Number of step halvings tried by [`reference_solution`].
pub const REFERENCE_ROUNDS: usize = 4;
/// Convergence threshold of the Gauss stage solve.
pub const STAGE_TOL: f64 = 1e-13;

const SQRT3_6: f64 = 0.288_675_134_594_812_9;
const GAUSS_A: [[f64; 2]; 2] = [[0.25, 0.25 - SQRT3_6], [0.25 + SQRT3_6, 0.25]];
const GAUSS_C: [f64; 2] = [0.5 - SQRT3_6, 0.5 + SQRT3_6];

/// Result of [`reference_solution`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub t_end: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// Relative gap between the last two step sizes.
    pub accuracy: f64,
    pub steps: usize,
    pub rounds: usize,
}

fn finite(t: f64, x: &[f64], v: &[f64]) -> Result<()> {
    if x.iter().chain(v).all(|a| a.is_finite()) {
        Ok(())
    } else {
        Err(CpdError::NonFinite { t, node: 0 })
    }
}

/// Boris step in drift–kick–rotate–kick–drift form; the rotation is the
/// exact gyration about B at the midpoint position.
fn boris_step(problem: &Problem, x: &mut [f64], v: &mut [f64], h: f64) {
    let d = x.len();
    for i in 0..d {
        x[i] += 0.5 * h * v[i];
    }
    let e = problem.electric(x);
    for i in 0..d {
        v[i] += 0.5 * h * e[i];
    }
    let r = problem.rotate_velocity(x, v, h);
    for i in 0..d {
        v[i] = r[i] + 0.5 * h * e[i];
        x[i] += 0.5 * h * v[i];
    }
}

pub fn boris_solve(problem: &Problem, h: f64, t_end: f64) -> Result<Trajectory> {
    direct(problem, h, t_end, true, |x, v, h| {
        boris_step(problem, x, v, h);
        Ok(())
    })
}

fn direct(
    problem: &Problem,
    h: f64,
    t_end: f64,
    record: bool,
    mut advance: impl FnMut(&mut [f64], &mut [f64], f64) -> Result<()>,
) -> Result<Trajectory> {
    let (n, h) = step_count(h, t_end)?;
    let (mut x, mut v) = (problem.x0(), problem.v0());
    let mut traj = Trajectory::default();
    traj.push(0.0, x.clone(), v.clone());
    for k in 1..=n {
        advance(&mut x, &mut v, h)?;
        let t = k as f64 * h;
        finite(t, &x, &v)?;
        problem.check_domain(t, &x)?;
        if record || k == n {
            traj.push(t, x.clone(), v.clone());
        }
    }
    traj.steps = n;
    Ok(traj)
}

/// Two-stage Gauss–Legendre collocation with compensated accumulation.
struct Gauss<'a> {
    problem: &'a Problem,
    d: usize,
    comp: Vec<f64>,
}

impl Gauss<'_> {
    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        let d = self.d;
        out[..d].copy_from_slice(&y[d..]);
        self.problem.acceleration(&y[..d], &y[d..], &mut out[d..]);
    }

    /// Stage increments Z_i = h Σ_j a_ij g(y + Z_j), stacked.
    fn residual(&self, y: &[f64], z: &[f64], h: f64) -> Vec<f64> {
        let m = 2 * self.d;
        let mut g = vec![vec![0.0; m]; 2];
        let mut yi = vec![0.0; m];
        for (j, gj) in g.iter_mut().enumerate() {
            for k in 0..m {
                yi[k] = y[k] + z[j * m + k];
            }
            self.rhs(&yi, gj);
        }
        let mut r = vec![0.0; 2 * m];
        for i in 0..2 {
            for k in 0..m {
                r[i * m + k] = z[i * m + k] - h * (GAUSS_A[i][0] * g[0][k] + GAUSS_A[i][1] * g[1][k]);
            }
        }
        r
    }

    fn fixed_point(&self, y: &[f64], z: &mut [f64], h: f64) -> bool {
        let mut prev_gap = f64::INFINITY;
        for _ in 0..30 {
            let r = self.residual(y, z, h);
            let gap = r.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            if !gap.is_finite() || gap > 0.5 * prev_gap && prev_gap.is_finite() && gap > STAGE_TOL {
                return false;
            }
            for (zk, rk) in z.iter_mut().zip(&r) {
                *zk -= rk;
            }
            if gap <= STAGE_TOL {
                // one extra sweep costs little and removes the last contraction error
                let r = self.residual(y, z, h);
                for (zk, rk) in z.iter_mut().zip(&r) {
                    *zk -= rk;
                }
                return true;
            }
            prev_gap = gap;
        }
        false
    }

    fn newton(&self, y: &[f64], z: &mut [f64], h: f64) -> Result<()> {
        let n = z.len();
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            let r = self.residual(y, z, h);
            let norm = r.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            if norm <= STAGE_TOL * 1e-2 {
                return Ok(());
            }
            let mut jac = DMatrix::<f64>::zeros(n, n);
            for k in 0..n {
                let step = 1e-7 * z[k].abs().max(1e-3);
                let mut zp = z.to_vec();
                zp[k] += step;
                let rp = self.residual(y, &zp, h);
                for i in 0..n {
                    jac[(i, k)] = (rp[i] - r[i]) / step;
                }
            }
            let delta = jac
                .lu()
                .solve(&DVector::from_column_slice(&r))
                .ok_or(CpdError::StageSolveFailed { residual: norm })?;
            let dn = delta.amax();
            for (zk, dk) in z.iter_mut().zip(delta.iter()) {
                *zk -= dk;
            }
            if !dn.is_finite() {
                break;
            }
            if dn <= STAGE_TOL {
                return Ok(());
            }
            last = dn;
        }
        Err(CpdError::StageSolveFailed { residual: last })
    }

    fn step(&mut self, x: &mut [f64], v: &mut [f64], h: f64) -> Result<()> {
        let d = self.d;
        let m = 2 * d;
        let y: Vec<f64> = x.iter().chain(v.iter()).copied().collect();
        let mut g0 = vec![0.0; m];
        self.rhs(&y, &mut g0);
        let guess: Vec<f64> = (0..2)
            .flat_map(|i| g0.iter().map(move |g| GAUSS_C[i] * h * g))
            .collect();
        let mut z = guess.clone();
        if !self.fixed_point(&y, &mut z, h) {
            z = guess;
            self.newton(&y, &mut z, h)?;
        }
        // y₁ = y + h Σ b_i g(y + Z_i) = y + Σ d_i Z_i with d = (−√3, √3)
        let sqrt3 = 3f64.sqrt();
        for k in 0..m {
            let inc = sqrt3 * (z[m + k] - z[k]);
            let target = if k < d { &mut x[k] } else { &mut v[k - d] };
            let yk = inc - self.comp[k];
            let sum = *target + yk;
            self.comp[k] = (sum - *target) - yk;
            *target = sum;
        }
        Ok(())
    }
}

fn gauss4(problem: &Problem, h: f64, t_end: f64, record: bool) -> Result<Trajectory> {
    let d = problem.dim();
    let mut g = Gauss {
        problem,
        d,
        comp: vec![0.0; 2 * d],
    };
    direct(problem, h, t_end, record, |x, v, h| g.step(x, v, h))
}

pub fn gauss4_solve(problem: &Problem, h: f64, t_end: f64) -> Result<Trajectory> {
    gauss4(problem, h, t_end, true)
}

fn rel_gap(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|q| q * q).sum::<f64>().sqrt();
    if norm > 0.0 {
        diff / norm
    } else {
        diff
    }
}

/// Gauss4 at h = min(ε/200, 10⁻³t_end), halving until two successive
/// solutions agree to `tol` in relative x and v, for at most
/// [`REFERENCE_ROUNDS`] rounds.
pub fn reference_solution(problem: &Problem, t_end: f64, tol: f64) -> Result<ReferenceSolution> {
    if !(tol >= MIN_REFERENCE_TOL) {
        return Err(CpdError::Config(format!(
            "reference tolerance {tol:e} is below {MIN_REFERENCE_TOL:e}"
        )));
    }
    if t_end == 0.0 {
        return Ok(ReferenceSolution {
            t_end,
            x: problem.x0(),
            v: problem.v0(),
            accuracy: 0.0,
            steps: 0,
            rounds: 0,
        });
    }
    let mut h = (problem.eps() / 200.0).min(1e-3 * t_end);
    let end = |tr: Trajectory| {
        let (_, x, v) = tr.last().expect("nonempty");
        (x.to_vec(), v.to_vec(), tr.steps)
    };
    let mut coarse = end(gauss4(problem, h, t_end, false)?);
    let mut gap = f64::INFINITY;
    for round in 1..=REFERENCE_ROUNDS {
        h /= 2.0;
        let fine = end(gauss4(problem, h, t_end, false)?);
        gap = rel_gap(&coarse.0, &fine.0).max(rel_gap(&coarse.1, &fine.1));
        log::debug!("reference round {round}: h = {h:e}, gap = {gap:e}");
        if gap <= tol {
            return Ok(ReferenceSolution {
                t_end,
                x: fine.0,
                v: fine.1,
                accuracy: gap,
                steps: fine.2,
                rounds: round,
            });
        }
        coarse = fine;
    }
    Err(CpdError::ReferenceNotConverged { tol, gap })
}
