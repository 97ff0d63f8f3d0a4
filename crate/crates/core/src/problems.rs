//! Charged-particle problems and the remainder functions of the filtered
//! reformulations.
//!
//! 2D: ẋ = v, v̇ = (b(x)/ε) J v + E(x).
//! 3D (maximal ordering): ẋ = v, v̇ = v × b(εx)/ε + E(x).

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{CpdError, Result};
use crate::phi::{cross_operator, j_matrix, rot2, rot3_unchecked};

pub type ScalarField2 = Arc<dyn Fn(&Vector2<f64>) -> f64 + Send + Sync>;
pub type VectorField2 = Arc<dyn Fn(&Vector2<f64>) -> Vector2<f64> + Send + Sync>;
pub type VectorField3 = Arc<dyn Fn(&Vector3<f64>) -> Vector3<f64> + Send + Sync>;

/// Distance to the x₃-axis below which the 3D test potential is treated as singular.
pub const AXIS_GUARD: f64 = 1e-6;

/// Planar problem with scalar magnetic intensity `b`.
#[derive(Clone)]
pub struct Problem2D {
    pub name: String,
    pub b: ScalarField2,
    pub e: VectorField2,
    pub x0: Vector2<f64>,
    pub v0: Vector2<f64>,
    pub eps: f64,
    /// Lower bound c_b for |b| along trajectories.
    pub min_field: f64,
}

/// Spatial problem in maximal ordering; `bvec` is evaluated at y = εx.
#[derive(Clone)]
pub struct Problem3D {
    pub name: String,
    pub bvec: VectorField3,
    pub e: VectorField3,
    pub x0: Vector3<f64>,
    pub v0: Vector3<f64>,
    pub eps: f64,
    pub min_field: f64,
    /// Abort when the trajectory comes within [`AXIS_GUARD`] of the x₃-axis.
    pub axis_singular: bool,
}

impl fmt::Debug for Problem2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem2D")
            .field("name", &self.name)
            .field("x0", &self.x0)
            .field("v0", &self.v0)
            .field("eps", &self.eps)
            .finish()
    }
}

impl fmt::Debug for Problem3D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem3D")
            .field("name", &self.name)
            .field("x0", &self.x0)
            .field("v0", &self.v0)
            .field("eps", &self.eps)
            .finish()
    }
}

/// Test problem of the 2D experiments.
pub fn builtin_2d() -> Problem2D {
    Problem2D {
        name: "paper-2d".into(),
        b: Arc::new(|x: &Vector2<f64>| 1.0 + x.x.sin() * x.y.sin()),
        e: Arc::new(|x: &Vector2<f64>| {
            Vector2::new(
                (x.x / 2.0).cos() * x.y.sin() / 2.0,
                (x.x / 2.0).sin() * x.y.cos(),
            )
        }),
        x0: Vector2::new(0.1, 0.1),
        v0: Vector2::new(0.2, 0.1),
        eps: 1.0 / 16.0,
        min_field: 1e-8,
    }
}

/// Test problem of the 3D experiments: B(x) = (0,0,1)/ε + (−x₁, 0, x₃),
/// E = −∇(1/√(x₁² + x₂²)).
pub fn builtin_3d() -> Problem3D {
    Problem3D {
        name: "paper-3d".into(),
        bvec: Arc::new(|y: &Vector3<f64>| Vector3::new(-y.x, 0.0, 1.0 + y.z)),
        e: Arc::new(|x: &Vector3<f64>| {
            let r2 = x.x * x.x + x.y * x.y;
            let r3 = r2 * r2.sqrt();
            Vector3::new(x.x / r3, x.y / r3, 0.0)
        }),
        x0: Vector3::new(1.0 / 3.0, 1.0 / 4.0, 1.0 / 2.0),
        v0: Vector3::new(2.0 / 5.0, 2.0 / 3.0, 1.0),
        eps: 1.0 / 32.0,
        min_field: 1e-8,
        axis_singular: true,
    }
}

impl Problem2D {
    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn check_domain(&self, t: f64, x: &Vector2<f64>) -> Result<()> {
        let value = (self.b)(x);
        if !(value.abs() >= self.min_field) {
            return Err(CpdError::FieldVanishes {
                t,
                value,
                min: self.min_field,
            });
        }
        Ok(())
    }
}

impl Problem3D {
    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    /// Physical field B(x) = b(εx)/ε.
    pub fn field(&self, x: &Vector3<f64>) -> Vector3<f64> {
        (self.bvec)(&(x * self.eps)) / self.eps
    }

    pub fn check_domain(&self, t: f64, x: &Vector3<f64>) -> Result<()> {
        if self.axis_singular {
            let r = (x.x * x.x + x.y * x.y).sqrt();
            if !(r >= AXIS_GUARD) {
                return Err(CpdError::SingularRegion { t, r });
            }
        }
        let value = (self.bvec)(&(x * self.eps)).norm();
        if !(value >= self.min_field) {
            return Err(CpdError::FieldVanishes {
                t,
                value,
                min: self.min_field,
            });
        }
        Ok(())
    }
}

/// Rescaling of a planar problem by b₀ = b(x₀).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame2D {
    pub b0: f64,
    pub eps: f64,
    /// ε̃ = ε/b₀, signed.
    pub eps_tilde: f64,
}

impl Frame2D {
    pub fn new(problem: &Problem2D) -> Result<Self> {
        let b0 = (problem.b)(&problem.x0);
        problem.check_domain(0.0, &problem.x0)?;
        Ok(Frame2D {
            b0,
            eps: problem.eps,
            eps_tilde: problem.eps / b0,
        })
    }
}

/// Frozen field at the initial position, factored as B̂₀ = |b₀| N̂(n).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame3D {
    pub b0: Vector3<f64>,
    pub bhat0: Matrix3<f64>,
    pub axis: Vector3<f64>,
    pub b0norm: f64,
    pub eps: f64,
    /// ε̃ = ε/|b(εx₀)|.
    pub eps_tilde: f64,
}

impl Frame3D {
    pub fn new(problem: &Problem3D) -> Result<Self> {
        problem.check_domain(0.0, &problem.x0)?;
        let b0 = (problem.bvec)(&(problem.x0 * problem.eps));
        let b0norm = b0.norm();
        Ok(Frame3D {
            b0,
            bhat0: cross_operator(&b0),
            axis: b0 / b0norm,
            b0norm,
            eps: problem.eps,
            eps_tilde: problem.eps / b0norm,
        })
    }
}

/// F(q, p) = ((b(q) − b₀)/(ε̃ b₀)) J p + ε̃ E(q).
pub fn remainder_2d(
    frame: &Frame2D,
    problem: &Problem2D,
    q: &Vector2<f64>,
    p: &Vector2<f64>,
) -> Vector2<f64> {
    let coef = ((problem.b)(q) - frame.b0) / (frame.eps_tilde * frame.b0);
    j_matrix() * p * coef + (problem.e)(q) * frame.eps_tilde
}

/// F(x, v) = ((B̂(εx) − B̂₀)/ε) v + E(x), with B̂(y)v = v × b(y).
pub fn remainder_3d(
    frame: &Frame3D,
    problem: &Problem3D,
    x: &Vector3<f64>,
    v: &Vector3<f64>,
) -> Vector3<f64> {
    let db = ((problem.bvec)(&(x * frame.eps)) - frame.b0) / frame.eps;
    v.cross(&db) + (problem.e)(x)
}

/// A problem of either dimension.
#[derive(Debug, Clone)]
pub enum Problem {
    Planar(Problem2D),
    Spatial(Problem3D),
}

impl Problem {
    pub fn name(&self) -> &str {
        match self {
            Problem::Planar(p) => &p.name,
            Problem::Spatial(p) => &p.name,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Problem::Planar(_) => 2,
            Problem::Spatial(_) => 3,
        }
    }

    pub fn eps(&self) -> f64 {
        match self {
            Problem::Planar(p) => p.eps,
            Problem::Spatial(p) => p.eps,
        }
    }

    pub fn with_eps(self, eps: f64) -> Self {
        match self {
            Problem::Planar(p) => Problem::Planar(p.with_eps(eps)),
            Problem::Spatial(p) => Problem::Spatial(p.with_eps(eps)),
        }
    }

    pub fn x0(&self) -> Vec<f64> {
        match self {
            Problem::Planar(p) => p.x0.as_slice().to_vec(),
            Problem::Spatial(p) => p.x0.as_slice().to_vec(),
        }
    }

    pub fn v0(&self) -> Vec<f64> {
        match self {
            Problem::Planar(p) => p.v0.as_slice().to_vec(),
            Problem::Spatial(p) => p.v0.as_slice().to_vec(),
        }
    }

    /// v̇ of the original system at (x, v).
    pub fn acceleration(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        match self {
            Problem::Planar(p) => {
                let xv = Vector2::new(x[0], x[1]);
                let b = (p.b)(&xv) / p.eps;
                let e = (p.e)(&xv);
                out[0] = b * v[1] + e.x;
                out[1] = -b * v[0] + e.y;
            }
            Problem::Spatial(p) => {
                let xv = Vector3::new(x[0], x[1], x[2]);
                let vv = Vector3::new(v[0], v[1], v[2]);
                let a = vv.cross(&p.field(&xv)) + (p.e)(&xv);
                out.copy_from_slice(a.as_slice());
            }
        }
    }

    pub fn electric(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Problem::Planar(p) => (p.e)(&Vector2::new(x[0], x[1])).as_slice().to_vec(),
            Problem::Spatial(p) => (p.e)(&Vector3::new(x[0], x[1], x[2])).as_slice().to_vec(),
        }
    }

    /// Exact flow of v̇ = v × B(x) over time `h` with B frozen at `x`.
    pub fn rotate_velocity(&self, x: &[f64], v: &[f64], h: f64) -> Vec<f64> {
        match self {
            Problem::Planar(p) => {
                let b = (p.b)(&Vector2::new(x[0], x[1])) / p.eps;
                let r = rot2(h * b).phi0 * Vector2::new(v[0], v[1]);
                vec![r.x, r.y]
            }
            Problem::Spatial(p) => {
                let field = p.field(&Vector3::new(x[0], x[1], x[2]));
                let strength = field.norm();
                let vv = Vector3::new(v[0], v[1], v[2]);
                if strength == 0.0 {
                    return v.to_vec();
                }
                let r = rot3_unchecked(&(field / strength), h * strength).matrix * vv;
                vec![r.x, r.y, r.z]
            }
        }
    }

    pub fn check_domain(&self, t: f64, x: &[f64]) -> Result<()> {
        match self {
            Problem::Planar(p) => p.check_domain(t, &Vector2::new(x[0], x[1])),
            Problem::Spatial(p) => p.check_domain(t, &Vector3::new(x[0], x[1], x[2])),
        }
    }
}

/// Names accepted by [`problem_by_name`].
pub const PROBLEM_NAMES: [&str; 2] = ["paper-2d", "paper-3d"];

pub fn problem_by_name(name: &str) -> Result<Problem> {
    match name {
        "paper-2d" => Ok(Problem::Planar(builtin_2d())),
        "paper-3d" => Ok(Problem::Spatial(builtin_3d())),
        other => Err(CpdError::UnknownProblem(other.to_string())),
    }
}
