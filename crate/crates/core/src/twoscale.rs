//! Two-scale reformulation: node-wise right-hand sides f_τ, well-prepared
//! initial data and reconstruction of (x, v) on the diagonal τ = t/ε̃.
//!
//! Both variants solve ∂_t U + (1/ε̃)∂_τ U = f_τ(U) with U periodic in τ.
//! 2D stacks (X, V) where x = X + τφ₁(τJ)V and v = φ₀(τJ)V/ε̃.
//! 3D stacks (X, W) where x = X and v = exp(τN̂)W.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{CpdError, Result};
use crate::phi::{rot2, rot3_unchecked};
use crate::problems::{remainder_2d, remainder_3d, Frame2D, Frame3D, Problem, Problem2D, Problem3D};
use crate::tau::{TauField, TauGrid};

/// Largest supported order of the initial-data recursion.
pub const MAX_INIT_ORDER: usize = 4;

/// Constant used by the bracket guard ‖bracket‖ ≤ C|ε̃|^m in the recursion.
pub const BRACKET_GUARD: f64 = 1e3;

/// The two τ-periodic unknowns at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleState {
    pub t: f64,
    /// X, the position-like component.
    pub first: TauField,
    /// V in 2D, W in 3D.
    pub second: TauField,
}

impl TwoScaleState {
    pub fn from_stacked(t: f64, u: &TauField) -> Self {
        let d = u.dim() / 2;
        TwoScaleState {
            t,
            first: u.slice(0..d),
            second: u.slice(d..2 * d),
        }
    }

    pub fn stacked(&self) -> TauField {
        TauField::stack(&self.first, &self.second)
    }

    pub fn n_tau(&self) -> usize {
        self.first.n_tau()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frame {
    Planar(Frame2D),
    Spatial(Frame3D),
}

impl Frame {
    pub fn eps_tilde(&self) -> f64 {
        match self {
            Frame::Planar(f) => f.eps_tilde,
            Frame::Spatial(f) => f.eps_tilde,
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Planar {
        frame: Frame2D,
        problem: Problem2D,
        // (sφ₁(τ), φ₀(τ), sφ₁(−τ), φ₀(−τ)) per node
        ops: Vec<[Matrix2<f64>; 4]>,
    },
    Spatial {
        frame: Frame3D,
        problem: Problem3D,
        rots: Vec<Matrix3<f64>>,
    },
}

/// f_τ evaluated node by node on a fixed grid.
#[derive(Debug, Clone)]
pub struct TwoScaleRhs {
    kind: Kind,
    n_tau: usize,
}

pub fn make_ftau_2d(frame: Frame2D, problem: Problem2D, n_tau: usize) -> TwoScaleRhs {
    let ops = (0..n_tau)
        .map(|l| {
            let tau = crate::tau::node(n_tau, l);
            let (p, m) = (rot2(tau), rot2(-tau));
            [p.sphi1, p.phi0, m.sphi1, m.phi0]
        })
        .collect();
    TwoScaleRhs {
        kind: Kind::Planar {
            frame,
            problem,
            ops,
        },
        n_tau,
    }
}

pub fn make_ftau_3d(frame: Frame3D, problem: Problem3D, n_tau: usize) -> TwoScaleRhs {
    let rots = (0..n_tau)
        .map(|l| rot3_unchecked(&frame.axis, crate::tau::node(n_tau, l)).matrix)
        .collect();
    TwoScaleRhs {
        kind: Kind::Spatial {
            frame,
            problem,
            rots,
        },
        n_tau,
    }
}

impl TwoScaleRhs {
    /// Builds the frame and right-hand side for either problem dimension.
    pub fn new(problem: &Problem, n_tau: usize) -> Result<Self> {
        TauGrid::new(n_tau)?;
        Ok(match problem {
            Problem::Planar(p) => make_ftau_2d(Frame2D::new(p)?, p.clone(), n_tau),
            Problem::Spatial(p) => make_ftau_3d(Frame3D::new(p)?, p.clone(), n_tau),
        })
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    /// Physical dimension d; the stacked state has 2d components.
    pub fn dim(&self) -> usize {
        match self.kind {
            Kind::Planar { .. } => 2,
            Kind::Spatial { .. } => 3,
        }
    }

    pub fn frame(&self) -> Frame {
        match &self.kind {
            Kind::Planar { frame, .. } => Frame::Planar(*frame),
            Kind::Spatial { frame, .. } => Frame::Spatial(*frame),
        }
    }

    pub fn eps_tilde(&self) -> f64 {
        self.frame().eps_tilde()
    }

    /// Stacked constant U̲⁰: (x₀, ε̃v₀) in 2D, (x₀, v₀) in 3D.
    pub fn initial_vector(&self) -> Vec<f64> {
        match &self.kind {
            Kind::Planar { frame, problem, .. } => {
                let p = problem.v0 * frame.eps_tilde;
                vec![problem.x0.x, problem.x0.y, p.x, p.y]
            }
            Kind::Spatial { problem, .. } => {
                let (x, v) = (problem.x0, problem.v0);
                vec![x.x, x.y, x.z, v.x, v.y, v.z]
            }
        }
    }

    /// f_τ at node `l` for the stacked node state `u`.
    pub fn eval_node(&self, l: usize, u: &[f64], out: &mut [f64]) {
        match &self.kind {
            Kind::Planar {
                frame,
                problem,
                ops,
            } => {
                let [sp, pp, sm, pm] = &ops[l];
                let x = Vector2::new(u[0], u[1]);
                let v = Vector2::new(u[2], u[3]);
                let a = x + sp * v;
                let b = pp * v;
                let f = remainder_2d(frame, problem, &a, &b);
                let dx = sm * f;
                let dv = pm * f;
                out[..4].copy_from_slice(&[dx.x, dx.y, dv.x, dv.y]);
            }
            Kind::Spatial {
                frame,
                problem,
                rots,
            } => {
                let r = &rots[l];
                let x = Vector3::new(u[0], u[1], u[2]);
                let w = Vector3::new(u[3], u[4], u[5]);
                let rw = r * w;
                let f = r.transpose() * remainder_3d(frame, problem, &x, &rw);
                out[..6].copy_from_slice(&[rw.x, rw.y, rw.z, f.x, f.y, f.z]);
            }
        }
    }

    /// f_τ applied node-wise to a stacked field; non-finite output is an error.
    pub fn eval_field(&self, t: f64, u: &TauField) -> Result<TauField> {
        let d = 2 * self.dim();
        if u.dim() != d || u.n_tau() != self.n_tau {
            return Err(CpdError::DimensionMismatch {
                expected: d * self.n_tau,
                got: u.dim() * u.n_tau(),
            });
        }
        let mut out = TauField::zeros(self.n_tau, d);
        let mut ui = vec![0.0; d];
        let mut fi = vec![0.0; d];
        for l in 0..self.n_tau {
            u.read_node(l, &mut ui);
            self.eval_node(l, &ui, &mut fi);
            if fi.iter().any(|v| !v.is_finite()) {
                return Err(CpdError::NonFinite { t, node: l });
            }
            out.set_node(l, &fi);
        }
        Ok(out)
    }

    /// Physical (x, v) from a state via trigonometric interpolation at τ* = t/ε̃.
    pub fn reconstruct(&self, grid: &TauGrid, state: &TwoScaleState) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            Kind::Planar { frame, .. } => {
                let (x, v) = reconstruct_2d(grid, state, frame);
                (vec![x.x, x.y], vec![v.x, v.y])
            }
            Kind::Spatial { frame, .. } => {
                let (x, v) = reconstruct_3d(grid, state, frame);
                (vec![x.x, x.y, x.z], vec![v.x, v.y, v.z])
            }
        }
    }
}

/// Which operator appears inside the prepared-data formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitVariant {
    /// U̲⁰ + ε̃B_τ^[j](U̲^[j]) − ε̃B₀^[j](U̲^[j]).
    #[default]
    Literal,
    /// Same with B^[j−1] in place of B^[j].
    Lagged,
}

struct Recursion<'a> {
    rhs: &'a TwoScaleRhs,
    grid: &'a TauGrid,
    eps: f64,
}

impl Recursion<'_> {
    /// B_τ^[k](U) for a constant stacked vector U.
    fn b(&self, k: usize, u: &[f64]) -> Result<TauField> {
        let n = self.rhs.n_tau;
        if k == 0 {
            return Ok(TauField::zeros(n, u.len()));
        }
        let bk = self.b(k - 1, u)?;
        let arg = bk.scaled(self.eps).add_constant(u);
        let fv = self.rhs.eval_field(0.0, &arg)?;
        let mean = self.grid.average(&fv);
        let mut out = self.grid.linv(&self.grid.remove_mean(&fv))?;
        let m = k - 1;
        if m >= 1 {
            let em = self.eps.powi(m as i32);
            let shifted: Vec<f64> = u.iter().zip(&mean).map(|(a, b)| a + em * b).collect();
            let bracket = self.b(m, &shifted)?.axpy(-1.0, &bk);
            if m >= 2 {
                let bound = BRACKET_GUARD * em.abs();
                let size = bracket.sup_norm();
                if size > bound {
                    return Err(CpdError::BracketGuard {
                        level: k,
                        bracket: size,
                        bound,
                    });
                }
            }
            let corr = self.grid.linv(&self.grid.remove_mean(&bracket))?;
            out = out.axpy(-1.0 / self.eps.powi(m as i32 - 1), &corr);
        }
        Ok(out)
    }

    fn b_at_zero(&self, k: usize, u: &[f64]) -> Result<Vec<f64>> {
        let f = self.b(k, u)?;
        // node 0 is τ = 0
        Ok(f.node_values(0))
    }
}

/// Well-prepared initial data U^[j](τ) at t = 0 from the stacked constant `u0`.
pub fn prepare_initial(
    rhs: &TwoScaleRhs,
    grid: &TauGrid,
    u0: &[f64],
    j: usize,
    variant: InitVariant,
) -> Result<TwoScaleState> {
    if j > MAX_INIT_ORDER {
        return Err(CpdError::InitOrderTooHigh(j));
    }
    if u0.len() != 2 * rhs.dim() {
        return Err(CpdError::DimensionMismatch {
            expected: 2 * rhs.dim(),
            got: u0.len(),
        });
    }
    let n = rhs.n_tau;
    if j == 0 {
        return Ok(TwoScaleState::from_stacked(0.0, &TauField::constant(n, u0)));
    }
    let rec = Recursion {
        rhs,
        grid,
        eps: rhs.eps_tilde(),
    };
    let eps = rec.eps;

    let mut avg = u0.to_vec();
    for k in 1..=j {
        let b0 = rec.b_at_zero(k - 1, &avg)?;
        avg = u0.iter().zip(&b0).map(|(a, b)| a - eps * b).collect();
    }
    let level = match variant {
        InitVariant::Literal => j,
        InitVariant::Lagged => j - 1,
    };
    let b = rec.b(level, &avg)?;
    let b_zero = b.node_values(0);
    let offset: Vec<f64> = u0.iter().zip(&b_zero).map(|(a, z)| a - eps * z).collect();
    let u = b.scaled(eps).add_constant(&offset);
    Ok(TwoScaleState::from_stacked(0.0, &u))
}

/// Physical (x, v) of the planar two-scale state at time `state.t`.
pub fn reconstruct_2d(
    grid: &TauGrid,
    state: &TwoScaleState,
    frame: &Frame2D,
) -> (Vector2<f64>, Vector2<f64>) {
    let tau = (state.t / frame.eps_tilde).rem_euclid(2.0 * std::f64::consts::PI);
    let xs = grid.evaluate_at(&state.first, tau);
    let vs = grid.evaluate_at(&state.second, tau);
    let (xs, vs) = (Vector2::new(xs[0], xs[1]), Vector2::new(vs[0], vs[1]));
    let r = rot2(tau);
    (xs + r.sphi1 * vs, r.phi0 * vs / frame.eps_tilde)
}

/// Physical (x, v) of the spatial two-scale state at time `state.t`.
pub fn reconstruct_3d(
    grid: &TauGrid,
    state: &TwoScaleState,
    frame: &Frame3D,
) -> (Vector3<f64>, Vector3<f64>) {
    let tau = (state.t / frame.eps_tilde).rem_euclid(2.0 * std::f64::consts::PI);
    let xs = grid.evaluate_at(&state.first, tau);
    let ws = grid.evaluate_at(&state.second, tau);
    let r = rot3_unchecked(&frame.axis, tau).matrix;
    (
        Vector3::new(xs[0], xs[1], xs[2]),
        r * Vector3::new(ws[0], ws[1], ws[2]),
    )
}
