use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bench::config::StudyConfig;
use crate::bench::{run_method, RunSettings};
use crate::error::{CpdError, Result};
use crate::integrators::Method;
use crate::reference::{reference_solution, ReferenceSolution};

pub const CSV_HEADER: [&str; 9] = [
    "method",
    "h",
    "eps",
    "ntau",
    "err_x",
    "err_v",
    "err_combined",
    "wall_seconds",
    "status",
];

/// One (method, h, eps) run of a study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub method: String,
    pub h: f64,
    pub eps: f64,
    /// τ nodes; 0 for the direct solvers.
    pub n_tau: usize,
    pub err_x: f64,
    pub err_v: f64,
    pub err_combined: f64,
    pub wall_seconds: f64,
    /// "ok" or "error: <reason>".
    pub status: String,
}

impl ConvergenceRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn fields(&self) -> [String; 9] {
        [
            self.method.clone(),
            format!("{:e}", self.h),
            format!("{:e}", self.eps),
            self.n_tau.to_string(),
            format!("{:e}", self.err_x),
            format!("{:e}", self.err_v),
            format!("{:e}", self.err_combined),
            format!("{:e}", self.wall_seconds),
            self.status.clone(),
        ]
    }
}

/// Reference data used for one eps value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceInfo {
    pub eps: f64,
    pub accuracy: f64,
    pub rounds: usize,
    pub steps: usize,
    pub status: String,
}

/// Which error column a fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    X,
    V,
    Combined,
}

impl ErrorKind {
    fn of(self, r: &ConvergenceRecord) -> f64 {
        match self {
            ErrorKind::X => r.err_x,
            ErrorKind::V => r.err_v,
            ErrorKind::Combined => r.err_combined,
        }
    }
}

/// Least-squares line through (log₂ p, log₂ err).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderFit {
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub points_used: usize,
}

impl OrderFit {
    pub fn is_conclusive(&self) -> bool {
        self.slope.is_some()
    }
}

/// Fits log₂ err against log₂ p, dropping points with err below
/// 10 × `floor` or non-finite; fewer than 3 usable points is inconclusive.
pub fn fit_order(points: &[(f64, f64)], floor: f64) -> OrderFit {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(p, e)| p.is_finite() && *p > 0.0 && e.is_finite() && *e > 0.0 && *e >= 10.0 * floor)
        .map(|(p, e)| (p.log2(), e.log2()))
        .collect();
    let n = usable.len();
    if n < 3 {
        return OrderFit {
            slope: None,
            intercept: None,
            points_used: n,
        };
    }
    let nf = n as f64;
    let mx = usable.iter().map(|u| u.0).sum::<f64>() / nf;
    let my = usable.iter().map(|u| u.1).sum::<f64>() / nf;
    let sxx: f64 = usable.iter().map(|u| (u.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|u| (u.0 - mx) * (u.1 - my)).sum();
    if sxx == 0.0 {
        return OrderFit {
            slope: None,
            intercept: None,
            points_used: n,
        };
    }
    let slope = sxy / sxx;
    OrderFit {
        slope: Some(slope),
        intercept: Some(my - slope * mx),
        points_used: n,
    }
}

/// Records and reference metadata of a finished study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub references: Vec<ReferenceInfo>,
    pub records: Vec<ConvergenceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub method: String,
    /// "h" (eps fixed) or "eps" (h fixed).
    pub sweep: String,
    pub fixed: f64,
    pub err_x: OrderFit,
    pub err_v: OrderFit,
    pub err_combined: OrderFit,
}

impl StudyResult {
    fn floor(&self, eps: f64) -> f64 {
        self.references
            .iter()
            .find(|r| r.eps == eps)
            .map(|r| r.accuracy)
            .unwrap_or(0.0)
    }

    /// Error against h at fixed eps.
    pub fn fit_h(&self, method: &str, eps: f64, kind: ErrorKind) -> OrderFit {
        let pts: Vec<(f64, f64)> = self
            .records
            .iter()
            .filter(|r| r.method == method && r.eps == eps && r.is_ok())
            .map(|r| (r.h, kind.of(r)))
            .collect();
        fit_order(&pts, self.floor(eps))
    }

    /// Error against eps at fixed h; each point is filtered against its own reference.
    pub fn fit_eps(&self, method: &str, h: f64, kind: ErrorKind) -> OrderFit {
        let pts: Vec<(f64, f64)> = self
            .records
            .iter()
            .filter(|r| r.method == method && r.h == h && r.is_ok())
            .filter(|r| kind.of(r) >= 10.0 * self.floor(r.eps))
            .map(|r| (r.eps, kind.of(r)))
            .collect();
        fit_order(&pts, 0.0)
    }

    pub fn record(&self, method: &str, h: f64, eps: f64) -> Option<&ConvergenceRecord> {
        self.records
            .iter()
            .find(|r| r.method == method && r.h == h && r.eps == eps)
    }

    /// h-fits for every (method, eps) and eps-fits for every (method, h).
    pub fn fits(&self) -> Vec<FitSummary> {
        let mut keys: BTreeMap<(String, u8, u64), ()> = BTreeMap::new();
        for r in &self.records {
            keys.insert((r.method.clone(), 0, r.eps.to_bits()), ());
            keys.insert((r.method.clone(), 1, r.h.to_bits()), ());
        }
        let mut out: Vec<FitSummary> = keys
            .into_keys()
            .map(|(method, axis, bits)| {
                let fixed = f64::from_bits(bits);
                let fit = |k| {
                    if axis == 0 {
                        self.fit_h(&method, fixed, k)
                    } else {
                        self.fit_eps(&method, fixed, k)
                    }
                };
                FitSummary {
                    sweep: if axis == 0 { "h" } else { "eps" }.into(),
                    fixed,
                    err_x: fit(ErrorKind::X),
                    err_v: fit(ErrorKind::V),
                    err_combined: fit(ErrorKind::Combined),
                    method,
                }
            })
            .collect();
        out.sort_by(|a, b| {
            (a.method.as_str(), a.sweep.as_str())
                .cmp(&(b.method.as_str(), b.sweep.as_str()))
                .then(a.fixed.total_cmp(&b.fixed))
        });
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_records(&self.records, w)
    }

    /// JSON with the config, references, fits and failure count.
    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            config: &'a StudyConfig,
            references: &'a [ReferenceInfo],
            fits: Vec<FitSummary>,
            runs: usize,
            failures: usize,
        }
        let s = Summary {
            config: &self.config,
            references: &self.references,
            fits: self.fits(),
            runs: self.records.len(),
            failures: self.records.iter().filter(|r| !r.is_ok()).count(),
        };
        serde_json::to_string_pretty(&s).map_err(|e| CpdError::Io(e.to_string()))
    }
}

pub fn write_records<W: Write>(records: &[ConvergenceRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| CpdError::Io(e.to_string());
    wr.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        wr.write_record(r.fields()).map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}

/// Path of the JSON summary written next to a CSV file.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.json")
}

fn relative(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|q| q * q).sum::<f64>().sqrt();
    d / n
}

fn run_one(
    config: &StudyConfig,
    settings: &RunSettings,
    method: Method,
    h: f64,
    eps: f64,
    reference: &std::result::Result<ReferenceSolution, CpdError>,
) -> ConvergenceRecord {
    let n_tau = if method.tableau().is_some() { config.n_tau } else { 0 };
    let mut rec = ConvergenceRecord {
        method: method.name().into(),
        h,
        eps,
        n_tau,
        err_x: f64::NAN,
        err_v: f64::NAN,
        err_combined: f64::NAN,
        wall_seconds: 0.0,
        status: "ok".into(),
    };
    let reference = match reference {
        Ok(r) => r,
        Err(e) => {
            rec.status = format!("error: reference failed: {e}");
            return rec;
        }
    };
    let start = Instant::now();
    let outcome = config
        .problem()
        .and_then(|p| run_method(&p.with_eps(eps), method, h, config.t_end, settings, false));
    if config.record_timing {
        rec.wall_seconds = start.elapsed().as_secs_f64();
    }
    match outcome {
        Ok(traj) => {
            let (_, x, v) = traj.last().expect("trajectory has endpoints");
            rec.err_x = relative(x, &reference.x);
            rec.err_v = relative(v, &reference.v);
            rec.err_combined = rec.err_x + rec.err_v;
        }
        Err(e) => rec.status = format!("error: {e}"),
    }
    rec
}

/// Runs every (method, h, eps) combination against one cached reference
/// per eps. Failed runs become error rows; output order is method (as
/// listed), then eps, then h, each in the order given.
pub fn run_convergence(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let problem = config.problem()?;
    let methods = config.method_list()?;
    let hs = config.h_values()?;
    let eps_list = config.eps_values()?;
    let settings = RunSettings {
        n_tau: config.n_tau,
        init_order: config.init_order,
        init_variant: config.variant()?,
    };

    let work = || {
        let refs: Vec<_> = eps_list
            .par_iter()
            .map(|&eps| reference_solution(&problem.clone().with_eps(eps), config.t_end, config.ref_tol))
            .collect();
        let (ne, nh) = (eps_list.len(), hs.len());
        let jobs: Vec<(usize, usize, usize)> = (0..methods.len())
            .flat_map(|m| (0..ne).flat_map(move |e| (0..nh).map(move |h| (m, e, h))))
            .collect();
        let records: Vec<ConvergenceRecord> = jobs
            .par_iter()
            .map(|&(m, e, h)| run_one(config, &settings, methods[m], hs[h], eps_list[e], &refs[e]))
            .collect();
        (refs, records)
    };
    let (refs, records) = match config.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CpdError::Config(e.to_string()))?
            .install(work),
        None => work(),
    };

    let references = eps_list
        .iter()
        .zip(&refs)
        .map(|(&eps, r)| match r {
            Ok(r) => ReferenceInfo {
                eps,
                accuracy: r.accuracy,
                rounds: r.rounds,
                steps: r.steps,
                status: "ok".into(),
            },
            Err(e) => ReferenceInfo {
                eps,
                accuracy: f64::NAN,
                rounds: 0,
                steps: 0,
                status: format!("error: {e}"),
            },
        })
        .collect();
    Ok(StudyResult {
        config: config.clone(),
        references,
        records,
    })
}
