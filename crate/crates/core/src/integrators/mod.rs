//! Two-scale exponential integrators and their coefficient sets.

pub mod order_conditions;
pub mod solver;
pub mod tableau;

use std::fmt;
use std::str::FromStr;

use crate::error::{CpdError, Result};
pub use order_conditions::{check_order_conditions, default_samples, OrderConditionReport};
pub use solver::{solve, step, step_count, Monitor, SolveOptions, StepPlan, Trajectory};
pub use tableau::{
    tableau_eo2, tableau_eo4, tableau_eo4_printed, tableau_io2, tableau_io4, tableau_io4_printed,
    Io2Variant, Tableau,
};

/// Every integrator the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Eo2,
    Io2,
    Io2Literal,
    Eo4,
    Io4,
    Io4Printed,
    Eo4Printed,
    Boris,
    Gauss4,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Eo2,
        Method::Io2,
        Method::Io2Literal,
        Method::Eo4,
        Method::Io4,
        Method::Io4Printed,
        Method::Eo4Printed,
        Method::Boris,
        Method::Gauss4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Eo2 => "eo2",
            Method::Io2 => "io2",
            Method::Io2Literal => "io2-literal",
            Method::Eo4 => "eo4",
            Method::Io4 => "io4",
            Method::Io4Printed => "io4-printed",
            Method::Eo4Printed => "eo4-printed",
            Method::Boris => "boris",
            Method::Gauss4 => "gauss4",
        }
    }

    /// Coefficients of a two-scale method; `None` for the direct solvers.
    pub fn tableau(self) -> Option<Tableau> {
        Some(match self {
            Method::Eo2 => tableau_eo2(),
            Method::Io2 => tableau_io2(Io2Variant::Midpoint),
            Method::Io2Literal => tableau_io2(Io2Variant::Literal),
            Method::Eo4 => tableau_eo4(),
            Method::Io4 => tableau_io4(),
            Method::Io4Printed => tableau_io4_printed(),
            Method::Eo4Printed => tableau_eo4_printed(),
            Method::Boris | Method::Gauss4 => return None,
        })
    }

    pub fn order(self) -> usize {
        match self {
            Method::Eo2 | Method::Io2 | Method::Io2Literal | Method::Boris => 2,
            _ => 4,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = CpdError;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| CpdError::UnknownMethod(s.to_string()))
    }
}
