//! Exponential Runge–Kutta tableaus with operator-valued coefficients.
//!
//! Every coefficient is a [`MultiplierSpec`] in z, to be applied at
//! Υ = (h/ε̃)∂_τ. Internal scalings such as φ_k(c_j z) are carried by the
//! term scales.

use serde::Serialize;

use crate::error::{CpdError, Result};
use crate::integrators::order_conditions::{check_order_conditions, construction_residuals};
use crate::tau::MultiplierSpec;

/// Tolerance of the construction-time order checks.
pub const TABLEAU_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tableau {
    pub name: String,
    pub c: Vec<f64>,
    pub abar: Vec<Vec<MultiplierSpec>>,
    pub bbar: Vec<MultiplierSpec>,
    /// ā strictly lower triangular.
    pub explicit: bool,
    pub order: usize,
    /// Initial-data order needed to reach `order`.
    pub min_init_order: usize,
}

/// Which IO2 stage weight to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Io2Variant {
    /// ā₁₁(z) = c₁φ₁(c₁z), the exponential midpoint weight.
    #[default]
    Midpoint,
    /// ā₁₁(z) = φ₁(c₁z).
    Literal,
}

fn phi(order: usize, scale: f64) -> MultiplierSpec {
    MultiplierSpec::phi(order, scale)
}

impl Tableau {
    /// Builds a tableau; with `checked`, rejects it unless every condition of
    /// order below `order` holds at all samples, ψ_order(0) = 0 and the weak
    /// order-`order` conditions hold at z = 0.
    pub fn new(
        name: &str,
        c: Vec<f64>,
        abar: Vec<Vec<MultiplierSpec>>,
        bbar: Vec<MultiplierSpec>,
        order: usize,
        checked: bool,
    ) -> Result<Self> {
        let s = c.len();
        if abar.len() != s || abar.iter().any(|row| row.len() != s) || bbar.len() != s {
            return Err(CpdError::TableauCheck {
                name: name.into(),
                condition: "shape".into(),
                residual: f64::NAN,
            });
        }
        let explicit = (0..s).all(|i| (i..s).all(|j| abar[i][j].is_zero()));
        let tab = Tableau {
            name: name.into(),
            c,
            abar,
            bbar,
            explicit,
            order,
            min_init_order: if order >= 4 { 4 } else { 2 },
        };
        if checked {
            let report = check_order_conditions(&tab, None);
            for (condition, residual) in construction_residuals(&report) {
                if !(residual <= TABLEAU_TOL) {
                    return Err(CpdError::TableauCheck {
                        name: name.into(),
                        condition,
                        residual,
                    });
                }
            }
        }
        Ok(tab)
    }

    pub fn stages(&self) -> usize {
        self.c.len()
    }
}

pub fn tableau_io2(variant: Io2Variant) -> Tableau {
    let (name, a11, checked) = match variant {
        Io2Variant::Midpoint => ("io2", 0.5 * phi(1, 0.5), true),
        Io2Variant::Literal => ("io2-literal", phi(1, 0.5), false),
    };
    Tableau::new(name, vec![0.5], vec![vec![a11]], vec![phi(1, 1.0)], 2, checked)
        .expect("io2 coefficients")
}

/// Two evaluations: f at the step start, then at the midpoint predictor.
pub fn tableau_eo2() -> Tableau {
    let z = MultiplierSpec::zero;
    Tableau::new(
        "eo2",
        vec![0.0, 0.5],
        vec![vec![z(), z()], vec![0.5 * phi(1, 0.5), z()]],
        vec![z(), phi(1, 1.0)],
        2,
        true,
    )
    .expect("eo2 coefficients")
}

fn io4_weights() -> Vec<MultiplierSpec> {
    vec![
        4.0 * phi(3, 1.0) - phi(2, 1.0),
        4.0 * phi(2, 1.0) - 8.0 * phi(3, 1.0),
        phi(1, 1.0) - 3.0 * phi(2, 1.0) + 4.0 * phi(3, 1.0),
    ]
}

fn io4_with(a23_phi3_scale: f64, name: &str, checked: bool) -> Result<Tableau> {
    let b = io4_weights();
    let z = MultiplierSpec::zero;
    let row2 = vec![
        -0.25 * phi(2, 0.5) + 0.5 * phi(3, 0.5),
        phi(2, 0.5) - phi(3, 0.5),
        0.5 * phi(1, 0.5) - 0.75 * phi(2, 0.5) + 0.5 * phi(3, a23_phi3_scale),
    ];
    Tableau::new(
        name,
        vec![1.0, 0.5, 0.0],
        vec![b.clone(), row2, vec![z(), z(), z()]],
        b,
        4,
        checked,
    )
}

/// Three-stage implicit order-4 tableau, c = (1, 1/2, 0).
pub fn tableau_io4() -> Tableau {
    io4_with(0.5, "io4", true).expect("io4 coefficients")
}

/// IO4 with ā₂₃ containing φ₃(z) instead of φ₃(z/2); fails ψ₁,₂ ≡ 0.
pub fn tableau_io4_printed() -> Tableau {
    io4_with(1.0, "io4-printed", false).expect("io4-printed shape")
}

fn eo4_with(repaired: bool) -> Result<Tableau> {
    let z = MultiplierSpec::zero;
    // φ_{i,j} = φ_i(c_j z) with c = (0, 1/2, 1/2, 1, 1/2)
    let p = |i: usize, j: usize| phi(i, [0.0, 0.5, 0.5, 1.0, 0.5][j - 1]);
    let (a52, a54) = if repaired {
        let a52 = 0.5 * p(2, 5) - p(3, 4) + 0.25 * p(2, 4) - 0.5 * p(3, 5);
        let a54 = 0.25 * p(2, 5) - a52.clone();
        (a52, a54)
    } else {
        let a52 = 0.5 * p(2, 5) - p(3, 4) + 0.5 * p(2, 4) - 0.5 * p(3, 5);
        let a54 = 0.5 * p(2, 5) - phi(5, 0.5);
        (a52, a54)
    };
    let a51 = 0.5 * p(1, 5) - 2.0 * a52.clone() - a54.clone();
    let abar = vec![
        vec![z(), z(), z(), z(), z()],
        vec![0.5 * p(1, 2), z(), z(), z(), z()],
        vec![0.5 * p(1, 3) - p(2, 3), p(2, 3), z(), z(), z()],
        vec![p(1, 4) - 2.0 * p(2, 4), p(2, 4), p(2, 4), z(), z()],
        vec![a51, a52.clone(), a52, a54, z()],
    ];
    let bbar = vec![
        phi(1, 1.0) - 3.0 * phi(2, 1.0) + 4.0 * phi(3, 1.0),
        z(),
        z(),
        4.0 * phi(3, 1.0) - phi(2, 1.0),
        4.0 * phi(2, 1.0) - 8.0 * phi(3, 1.0),
    ];
    let name = if repaired { "eo4" } else { "eo4-printed" };
    Tableau::new(name, vec![0.0, 0.5, 0.5, 1.0, 0.5], abar, bbar, 4, repaired)
}

/// Five-stage explicit order-4 tableau, c = (0, 1/2, 1/2, 1, 1/2).
pub fn tableau_eo4() -> Tableau {
    eo4_with(true).expect("eo4 coefficients")
}

/// EO4 with the uncorrected fifth-stage entries, kept for comparison.
pub fn tableau_eo4_printed() -> Tableau {
    eo4_with(false).expect("eo4-printed shape")
}
