//! Stiff order conditions of exponential Runge–Kutta tableaus, checked with
//! the bounded operators of the conditions set to the identity.
//!
//! ψ_j(z)     = φ_j(z) − Σ_k b̄_k(z) c_k^{j−1}/(j−1)!
//! ψ_{j,i}(z) = φ_j(c_i z) c_i^j − Σ_k ā_ik(z) c_k^{j−1}/(j−1)!

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::integrators::tableau::{Tableau, TABLEAU_TOL};
use crate::phi::{factorial, phi};

/// Imaginary parts of the default sample points: 0 and 2^m for m = −3..6.
pub fn default_samples() -> Vec<f64> {
    std::iter::once(0.0)
        .chain((-3..=6).map(|m| 2f64.powi(m)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowForm {
    /// Full operator-valued condition.
    Strong,
    /// Outer weights b̄_i(z) replaced by b̄_i(0).
    Weak,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionRow {
    pub label: String,
    pub order: usize,
    pub form: RowForm,
    /// |residual| at each sample, aligned with the report's samples.
    pub residuals: Vec<f64>,
}

impl ConditionRow {
    pub fn max(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, &r| m.max(r))
    }

    pub fn at_zero(&self) -> f64 {
        self.residuals[0]
    }

    pub fn status(&self) -> &'static str {
        if self.max() <= TABLEAU_TOL {
            "identically satisfied"
        } else if self.at_zero() <= TABLEAU_TOL {
            "satisfied at z=0"
        } else {
            "failed"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderConditionReport {
    pub tableau: String,
    pub order: usize,
    /// Imaginary parts of the sample points; the first is 0.
    pub samples: Vec<f64>,
    pub rows: Vec<ConditionRow>,
    /// Every row of order below `order` vanishes at all samples.
    pub lower_orders_satisfied: bool,
    /// |ψ_order(0)|.
    pub leading_at_zero: f64,
    /// The weak order-`order` rows vanish at all samples.
    pub weak_satisfied: bool,
    pub classification: String,
}

struct Eval<'a> {
    tab: &'a Tableau,
    z: Complex64,
    b: Vec<Complex64>,
    b0: Vec<f64>,
    a: Vec<Vec<Complex64>>,
}

impl<'a> Eval<'a> {
    fn new(tab: &'a Tableau, z: Complex64) -> Self {
        Eval {
            tab,
            z,
            b: tab.bbar.iter().map(|g| g.eval(z)).collect(),
            b0: tab.bbar.iter().map(|g| g.at_zero()).collect(),
            a: tab
                .abar
                .iter()
                .map(|row| row.iter().map(|g| g.eval(z)).collect())
                .collect(),
        }
    }

    fn psi(&self, j: usize) -> Complex64 {
        let w = 1.0 / factorial(j - 1);
        let sum: Complex64 = self
            .b
            .iter()
            .zip(&self.tab.c)
            .map(|(b, c)| b * c.powi(j as i32 - 1) * w)
            .sum();
        phi(j, self.z) - sum
    }

    fn psi_stage(&self, j: usize, i: usize) -> Complex64 {
        let w = 1.0 / factorial(j - 1);
        let ci = self.tab.c[i];
        let sum: Complex64 = self.a[i]
            .iter()
            .zip(&self.tab.c)
            .map(|(a, c)| a * c.powi(j as i32 - 1) * w)
            .sum();
        phi(j, ci * self.z) * ci.powi(j as i32) - sum
    }

    fn outer(&self, i: usize, form: RowForm) -> Complex64 {
        match form {
            RowForm::Strong => self.b[i],
            RowForm::Weak => Complex64::new(self.b0[i], 0.0),
        }
    }

    fn weighted(&self, j: usize, form: RowForm) -> Complex64 {
        (0..self.tab.stages())
            .map(|i| self.outer(i, form) * self.psi_stage(j, i))
            .sum()
    }

    fn nested(&self, form: RowForm) -> Complex64 {
        let s = self.tab.stages();
        (0..s)
            .map(|i| {
                let inner: Complex64 = (0..s).map(|j| self.a[i][j] * self.psi_stage(2, j)).sum();
                self.outer(i, form) * inner
            })
            .sum()
    }

    fn node_weighted(&self, form: RowForm) -> Complex64 {
        (0..self.tab.stages())
            .map(|i| self.outer(i, form) * self.tab.c[i] * self.psi_stage(2, i))
            .sum()
    }
}

type RowFn = Box<dyn Fn(&Eval) -> Complex64>;

/// Condition rows up to `order`; composite rows of the leading order appear
/// in both forms.
fn rows_for(tab: &Tableau, order: usize) -> Vec<(String, usize, RowForm, RowFn)> {
    let mut rows: Vec<(String, usize, RowForm, RowFn)> = Vec::new();
    for k in 1..=order.max(1) {
        rows.push((format!("psi_{k}"), k, RowForm::Strong, Box::new(move |e| e.psi(k))));
        let forms: &[RowForm] = if k == order {
            &[RowForm::Strong, RowForm::Weak]
        } else {
            &[RowForm::Strong]
        };
        match k {
            2 => {
                for i in 0..tab.stages() {
                    rows.push((
                        format!("psi_1,{}", i + 1),
                        2,
                        RowForm::Strong,
                        Box::new(move |e| e.psi_stage(1, i)),
                    ));
                }
            }
            3 => {
                for &f in forms {
                    rows.push(("sum_i b_i psi_2,i".into(), 3, f, Box::new(move |e| e.weighted(2, f))));
                }
            }
            4 => {
                for &f in forms {
                    rows.push(("sum_i b_i psi_3,i".into(), 4, f, Box::new(move |e| e.weighted(3, f))));
                    rows.push((
                        "sum_i b_i sum_j a_ij psi_2,j".into(),
                        4,
                        f,
                        Box::new(move |e| e.nested(f)),
                    ));
                    rows.push((
                        "sum_i b_i c_i psi_2,i".into(),
                        4,
                        f,
                        Box::new(move |e| e.node_weighted(f)),
                    ));
                }
            }
            _ => {}
        }
    }
    rows
}

/// Evaluates all conditions up to the tableau's order at z = i·y for each
/// `samples` entry y (default: 0 and 2^m, m = −3..6).
pub fn check_order_conditions(tab: &Tableau, samples: Option<&[f64]>) -> OrderConditionReport {
    let mut ys: Vec<f64> = samples.map(<[f64]>::to_vec).unwrap_or_else(default_samples);
    if ys.first() != Some(&0.0) {
        ys.retain(|&y| y != 0.0);
        ys.insert(0, 0.0);
    }
    let evals: Vec<Eval> = ys.iter().map(|&y| Eval::new(tab, Complex64::new(0.0, y))).collect();
    let r = tab.order;
    let rows: Vec<ConditionRow> = rows_for(tab, r)
        .into_iter()
        .map(|(label, order, form, f)| ConditionRow {
            label,
            order,
            form,
            residuals: evals.iter().map(|e| f(e).norm()).collect(),
        })
        .collect();

    let lower = rows.iter().filter(|row| row.order < r).all(|row| row.max() <= TABLEAU_TOL);
    let leading = rows
        .iter()
        .find(|row| row.label == format!("psi_{r}"))
        .map(ConditionRow::at_zero)
        .unwrap_or(f64::NAN);
    let weak = weak_rows(&rows, r).all(|row| row.max() <= TABLEAU_TOL);
    let classification = if lower && leading <= TABLEAU_TOL && weak {
        format!("order {r}: satisfied (weak form)")
    } else if lower && leading <= TABLEAU_TOL {
        format!("order {r}: weak conditions hold at z=0 only")
    } else {
        format!("order {r}: failed")
    };
    OrderConditionReport {
        tableau: tab.name.clone(),
        order: r,
        samples: ys,
        rows,
        lower_orders_satisfied: lower,
        leading_at_zero: leading,
        weak_satisfied: weak,
        classification,
    }
}

/// Leading-order rows other than ψ_r, in the form they are required in.
fn weak_rows(rows: &[ConditionRow], r: usize) -> impl Iterator<Item = &ConditionRow> {
    rows.iter().filter(move |row| {
        row.order == r
            && row.label != format!("psi_{r}")
            && (row.form == RowForm::Weak || row.label.starts_with("psi_1,"))
    })
}

/// Residuals a checked tableau must keep below tolerance: all lower-order
/// rows at every sample, ψ_r(0), and the weak leading-order rows at z = 0.
pub(crate) fn construction_residuals(report: &OrderConditionReport) -> Vec<(String, f64)> {
    let r = report.order;
    let mut out: Vec<(String, f64)> = report
        .rows
        .iter()
        .filter(|row| row.order < r)
        .map(|row| (row.label.clone(), row.max()))
        .collect();
    out.push((format!("psi_{r}(0)"), report.leading_at_zero));
    out.extend(weak_rows(&report.rows, r).map(|row| (format!("{} at z=0", row.label), row.at_zero())));
    out
}

impl OrderConditionReport {
    /// Fixed-width residual table followed by the classification line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tableau {} (declared order {})", self.tableau, self.order);
        let _ = write!(s, "{:<34} {:>6} ", "condition", "form");
        for y in &self.samples {
            let _ = write!(s, " {:>9}", format!("{y}i"));
        }
        let _ = writeln!(s, "  status");
        for row in &self.rows {
            let form = match row.form {
                RowForm::Strong => "strong",
                RowForm::Weak => "weak",
            };
            let _ = write!(s, "{:<34} {:>6} ", row.label, form);
            for r in &row.residuals {
                let _ = write!(s, " {:>9.2e}", r);
            }
            let _ = writeln!(s, "  {}", row.status());
        }
        let _ = writeln!(
            s,
            "lower orders identically satisfied: {}",
            if self.lower_orders_satisfied { "yes" } else { "no" }
        );
        let _ = writeln!(s, "|psi_{}(0)| = {:.2e}", self.order, self.leading_at_zero);
        let _ = writeln!(s, "{}", self.classification);
        s
    }
}
