//! Acceptance report: one PASS/FAIL line per criterion followed by the
//! numbers behind it.
//!
//! A FAIL is reported, not hidden: the binary exits 0 so that the rest of
//! the test suite still runs, unless ACCEPTANCE_STRICT=1 is set, in which
//! case any FAIL makes it exit 1.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use num_complex::Complex64;

use cpd_twoscale::bench::{run_convergence, run_method, ErrorKind, OrderFit, RunSettings, StudyConfig, StudyResult};
use cpd_twoscale::bench::config::{dyadic, NumberSpec};
use cpd_twoscale::integrators::{check_order_conditions, tableau_io2, Io2Variant, Method};
use cpd_twoscale::phi::{cross_operator, factorial, phi, rot2, rot3};
use cpd_twoscale::problems::{builtin_2d, builtin_3d, Problem};
use cpd_twoscale::reference::{gauss4_solve, reference_solution};
use cpd_twoscale::tau::{MultiplierSpec, TauField, TauGrid};
use cpd_twoscale::twoscale::{prepare_initial, InitVariant, MAX_INIT_ORDER};
use cpd_twoscale::TwoScaleRhs;

const TWO_SCALE: [&str; 4] = ["eo2", "io2", "eo4", "io4"];

struct Verdict {
    name: &'static str,
    pass: bool,
    notes: Vec<String>,
}

impl Verdict {
    fn new(name: &'static str) -> Self {
        Verdict {
            name,
            pass: true,
            notes: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, note: String) {
        self.pass &= ok;
        self.notes.push(format!("{} {note}", if ok { "ok  " } else { "FAIL" }));
    }

    fn info(&mut self, note: String) {
        self.notes.push(format!("info {note}"));
    }

    fn print(&self) {
        println!("{}  {}", if self.pass { "PASS" } else { "FAIL" }, self.name);
        for n in &self.notes {
            println!("        {n}");
        }
    }
}

fn p2(k: i32) -> f64 {
    2f64.powi(-k)
}

fn study(problem: &str, methods: &[&str], hs: &[f64], eps: &[f64], n_tau: usize) -> (StudyResult, Duration) {
    let config = StudyConfig {
        problem: problem.into(),
        methods: methods.iter().map(|m| m.to_string()).collect(),
        h_list: hs.iter().copied().map(NumberSpec::Value).collect(),
        eps_list: Some(eps.iter().copied().map(NumberSpec::Value).collect()),
        n_tau,
        record_timing: false,
        ..StudyConfig::default()
    };
    let start = Instant::now();
    let result = run_convergence(&config).expect("valid study");
    (result, start.elapsed())
}

fn describe(fit: &OrderFit) -> String {
    match fit.slope {
        Some(s) => format!("slope {s:.3} from {} points", fit.points_used),
        None => format!("inconclusive, {} point(s) above the reference floor", fit.points_used),
    }
}

fn slope_at_least(v: &mut Verdict, label: String, fit: OrderFit, min: f64) {
    let ok = fit.slope.is_some_and(|s| s >= min);
    v.require(ok, format!("{label}: {} (need >= {min})", describe(&fit)));
}

/// Consecutive log₂ slopes of one series, for context only.
fn local_slopes(result: &StudyResult, method: &str, kind: ErrorKind, by_h: bool) -> String {
    let pts: Vec<(f64, f64)> = result
        .records
        .iter()
        .filter(|r| r.method == method && r.is_ok())
        .map(|r| {
            let e = match kind {
                ErrorKind::X => r.err_x,
                ErrorKind::V => r.err_v,
                ErrorKind::Combined => r.err_combined,
            };
            (if by_h { r.h } else { r.eps }, e)
        })
        .collect();
    let errs: Vec<String> = pts.iter().map(|p| format!("{:.2e}", p.1)).collect();
    let slopes: Vec<String> = pts
        .windows(2)
        .map(|w| format!("{:.2}", (w[0].1 / w[1].1).log2() / (w[0].0 / w[1].0).log2()))
        .collect();
    format!("errors [{}], local slopes [{}]", errs.join(", "), slopes.join(", "))
}

fn floors(result: &StudyResult) -> String {
    result
        .references
        .iter()
        .map(|r| format!("eps {:e}: gap {:.2e}", r.eps, r.accuracy))
        .collect::<Vec<_>>()
        .join("; ")
}

fn planar_h_convergence() -> Verdict {
    let mut v = Verdict::new("2d h-convergence: eps = 2^-4, h = 2^-1..2^-6, err_x slope >= 1.7 (order 2), >= 3.5 (order 4)");
    let (res, took) = study("paper-2d", &TWO_SCALE, &dyadic(1, 6), &[p2(4)], 64);
    for m in TWO_SCALE {
        let min = if m.ends_with('2') { 1.7 } else { 3.5 };
        slope_at_least(&mut v, m.into(), res.fit_h(m, p2(4), ErrorKind::X), min);
        v.info(format!("{m}: {}", local_slopes(&res, m, ErrorKind::X, true)));
    }
    v.info(format!("reference {} (floor = 10 x gap)", floors(&res)));
    v.require(took.as_secs_f64() <= 120.0, format!("runtime {:.2} s (limit 120 s)", took.as_secs_f64()));
    v
}

fn planar_eps_scaling() -> (Verdict, Verdict) {
    let mut v = Verdict::new("2d eps-scaling: h = 2^-4, eps = 2^-1..2^-6, err_x slope >= 1.5, err_v slope >= 0.7");
    let mut methods = TWO_SCALE.to_vec();
    methods.extend(["boris", "gauss4"]);
    let (res, took) = study("paper-2d", &methods, &[p2(4)], &dyadic(1, 6), 64);
    for m in TWO_SCALE {
        slope_at_least(&mut v, format!("{m} err_x"), res.fit_eps(m, p2(4), ErrorKind::X), 1.5);
        slope_at_least(&mut v, format!("{m} err_v"), res.fit_eps(m, p2(4), ErrorKind::V), 0.7);
        v.info(format!("{m} err_x: {}", local_slopes(&res, m, ErrorKind::X, false)));
    }
    v.info(format!("references {}", floors(&res)));
    v.require(took.as_secs_f64() <= 120.0, format!("runtime {:.2} s (limit 120 s)", took.as_secs_f64()));

    let mut c = Verdict::new("comparator degradation: boris and gauss4 err_x at eps = 2^-6 exceeds eps = 2^-1 (h = 2^-4)");
    for m in ["boris", "gauss4"] {
        let large = res.record(m, p2(4), p2(1)).map_or(f64::NAN, |r| r.err_x);
        let small = res.record(m, p2(4), p2(6)).map_or(f64::NAN, |r| r.err_x);
        c.require(small > large, format!("{m}: {large:.3e} at eps 2^-1, {small:.3e} at eps 2^-6"));
    }
    (v, c)
}

fn spatial_uniformity() -> Verdict {
    let mut v = Verdict::new("3d uniform accuracy: h = 2^-4 max/min err_combined over eps = 2^-3..2^-8 <= 20; slopes at eps = 2^-5");
    let (by_eps, t1) = study("paper-3d", &TWO_SCALE, &[p2(4)], &dyadic(3, 8), 64);
    for m in TWO_SCALE {
        let errs: Vec<f64> = by_eps
            .records
            .iter()
            .filter(|r| r.method == m)
            .map(|r| if r.is_ok() { r.err_combined } else { f64::NAN })
            .collect();
        let hi = errs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = errs.iter().copied().fold(f64::INFINITY, f64::min);
        let ratio = hi / lo;
        let listed: Vec<String> = errs.iter().map(|e| format!("{e:.2e}")).collect();
        v.require(
            ratio <= 20.0 && errs.iter().all(|e| e.is_finite()),
            format!("{m}: ratio {ratio:.1} over [{}]", listed.join(", ")),
        );
    }
    let (by_h, t2) = study("paper-3d", &TWO_SCALE, &dyadic(1, 6), &[p2(5)], 64);
    for m in TWO_SCALE {
        let min = if m.ends_with('2') { 1.7 } else { 3.5 };
        slope_at_least(&mut v, format!("{m} h-slope"), by_h.fit_h(m, p2(5), ErrorKind::Combined), min);
        v.info(format!("{m}: {}", local_slopes(&by_h, m, ErrorKind::Combined, true)));
    }
    v.info(format!("references {}", floors(&by_eps)));
    let took = (t1 + t2).as_secs_f64();
    v.require(took <= 300.0, format!("runtime {took:.2} s (limit 300 s)"));
    v
}

fn order_conditions() -> Verdict {
    let mut v = Verdict::new("stiff order conditions: lower orders <= 1e-12 at z in {0, i 2^m, m = -3..6} and |psi_r(0)| <= 1e-12");
    for m in [Method::Io2, Method::Io4, Method::Eo2, Method::Eo4] {
        let tab = m.tableau().expect("two-scale method");
        let rep = check_order_conditions(&tab, None);
        let lower = rep
            .rows
            .iter()
            .filter(|r| r.order < rep.order)
            .map(|r| r.max())
            .fold(0.0, f64::max);
        v.require(
            lower <= 1e-12 && rep.leading_at_zero <= 1e-12,
            format!("{m}: lower-order max {lower:.1e}, |psi_{}(0)| {:.1e}, {}", rep.order, rep.leading_at_zero, rep.classification),
        );
    }
    v
}

fn lemma_bounds() -> Verdict {
    let mut v = Verdict::new("well-preparedness and drift: ||V0||/|eps~| within x4 over eps = 2^-1..2^-6; sup|b(q)-b0|/eps~ within x4 per halving");
    let grid = TauGrid::new(64).unwrap();
    let j = tableau_io2(Io2Variant::Midpoint).min_init_order;
    let mut sizes = Vec::new();
    let mut drift = Vec::new();
    for k in 1..=6 {
        let eps = p2(k);
        let p = builtin_2d().with_eps(eps);
        let problem = Problem::Planar(p.clone());
        let rhs = TwoScaleRhs::new(&problem, 64).unwrap();
        let et = rhs.eps_tilde();
        let s = prepare_initial(&rhs, &grid, &rhs.initial_vector(), j, InitVariant::Literal).unwrap();
        sizes.push(s.second.sup_norm() / et.abs());

        let traj = gauss4_solve(&problem, (eps / 200.0).min(1e-3), 1.0).unwrap();
        let b0 = (p.b)(&p.x0);
        let sup = traj
            .x
            .iter()
            .map(|x| ((p.b)(&Vector2::new(x[0], x[1])) - b0).abs())
            .fold(0.0, f64::max);
        drift.push(sup / et.abs());
    }
    let hi = sizes.iter().copied().fold(0.0, f64::max);
    let lo = sizes.iter().copied().fold(f64::INFINITY, f64::min);
    let listed: Vec<String> = sizes.iter().map(|s| format!("{s:.4}")).collect();
    v.require(hi / lo <= 4.0, format!("||V0||/|eps~| = [{}], spread x{:.2}", listed.join(", "), hi / lo));
    let ratios: Vec<f64> = drift.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios.iter().all(|r| (0.25..=4.0).contains(r));
    let listed: Vec<String> = drift.iter().map(|s| format!("{s:.4}")).collect();
    let rl: Vec<String> = ratios.iter().map(|s| format!("{s:.2}")).collect();
    v.require(ok, format!("sup|b(q)-b0|/eps~ = [{}], halving ratios [{}]", listed.join(", "), rl.join(", ")));
    v
}

fn spectral_saturation() -> Verdict {
    let mut v = Verdict::new("spectral saturation: eps = 2^-3, h = 2^-5, eo4 errors at N_tau = 32 and 64 agree to 1%");
    let problem = Problem::Planar(builtin_2d().with_eps(p2(3)));
    let reference = reference_solution(&problem, 1.0, 1e-12).unwrap();
    let rel = |a: &[f64], b: &[f64]| {
        let d: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        d / b.iter().map(|q| q * q).sum::<f64>().sqrt()
    };
    let errs = |n_tau: usize| {
        let s = RunSettings {
            n_tau,
            ..RunSettings::default()
        };
        let tr = run_method(&problem, Method::Eo4, p2(5), 1.0, &s, false).unwrap();
        let (_, x, vv) = tr.last().unwrap();
        (rel(x, &reference.x), rel(vv, &reference.v), x.to_vec())
    };
    let (x32, v32, sx32) = errs(32);
    let (x64, v64, sx64) = errs(64);
    for (label, a, b) in [("err_x", x32, x64), ("err_v", v32, v64)] {
        let d = (a - b).abs() / b;
        v.require(d <= 0.01, format!("{label}: {a:.4e} vs {b:.4e}, relative difference {:.2}%", 100.0 * d));
    }
    v.info(format!(
        "reference gap {:.2e}; ||x(32) - x(64)||/||x|| = {:.1e}",
        reference.accuracy,
        rel(&sx32, &sx64)
    ));
    v
}

/// Deterministic samples in [-1, 1].
fn sample(i: usize) -> f64 {
    ((i as f64 + 1.0) * 12.9898).sin() * 0.999
}

fn band_limited(n_tau: usize, dim: usize, seed: usize, mean: f64) -> TauField {
    TauField::from_fn(n_tau, dim, |tau, out| {
        for (c, o) in out.iter_mut().enumerate() {
            *o = mean;
            for k in 1..n_tau / 2 {
                let i = seed + 97 * c + 2 * k;
                *o += (sample(i) * (k as f64 * tau).cos() + sample(i + 1) * (k as f64 * tau).sin()) / k as f64;
            }
        }
    })
}

fn identities() -> Verdict {
    let mut v = Verdict::new("unit and property identities at their stated tolerances");

    let mut worst: f64 = 0.0;
    for k in 0..=6 {
        for m in 0..=110 {
            let y = 10f64.powf(-8.0 + m as f64 * 0.1);
            for z in [Complex64::new(0.0, y), Complex64::new(0.0, -y)] {
                let r = (z * phi(k + 1, z) + 1.0 / factorial(k) - phi(k, z)).norm();
                worst = worst.max(r / phi(k, z).norm().max(1.0));
            }
        }
    }
    v.require(worst <= 1e-13, format!("phi recurrence on i[1e-8, 1e3], k <= 6: worst {worst:.1e} (<= 1e-13)"));

    let (mut orth, mut period, mut oracle): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..100 {
        let s = 40.0 * sample(3 * i);
        let r2 = rot2(s);
        orth = orth.max((r2.phi0 * r2.phi0.transpose() - Matrix2::identity()).amax());
        period = period.max((rot2(s + 2.0 * PI).phi0 - r2.phi0).amax());
        let n = Vector3::new(sample(3 * i + 1), sample(3 * i + 2), sample(3 * i + 500)).normalize();
        let r3 = rot3(&n, s).unwrap().matrix;
        orth = orth.max((r3 * r3.transpose() - Matrix3::identity()).amax());
        period = period.max((rot3(&n, s + 2.0 * PI).unwrap().matrix - r3).amax());
        oracle = oracle.max((r3 - (cross_operator(&n) * s).exp()).amax());
    }
    v.require(orth <= 1e-13 && period <= 1e-13, format!("rotation orthogonality {orth:.1e}, 2pi-periodicity {period:.1e} (<= 1e-13)"));
    v.require(oracle <= 1e-12, format!("rot3 vs matrix exponential over 100 samples: {oracle:.1e} (<= 1e-12)"));

    let (mut round, mut pi_linv, mut d_linv, mut semi, mut transport): (f64, f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let phi0 = MultiplierSpec::phi(0, 1.0);
    for (seed, n) in [8usize, 16, 32, 64].iter().enumerate() {
        let grid = TauGrid::new(*n).unwrap();
        let f = band_limited(*n, 3, 31 * seed, 0.3);
        round = round.max(grid.inverse(&grid.forward(&f)).max_abs_diff(&f));
        let centred = grid.remove_mean(&f);
        let g = grid.linv(&centred).unwrap();
        pi_linv = pi_linv.max(grid.average(&g).iter().fold(0.0, |m, a| m.max(a.abs())));
        d_linv = d_linv.max(grid.derivative(&g).max_abs_diff(&centred));
        let (s1, s2) = (7.0 * sample(seed + 900), 7.0 * sample(seed + 901));
        let two = grid.apply_multiplier(&phi0, s1, &grid.apply_multiplier(&phi0, s2, &f));
        semi = semi.max(two.max_abs_diff(&grid.apply_multiplier(&phi0, s1 + s2, &f)));
        let sigma = 0.3 / 0.07;
        let cos = TauField::from_fn(*n, 1, |tau, o| o[0] = tau.cos());
        let exact = TauField::from_fn(*n, 1, |tau, o| o[0] = (tau - sigma).cos());
        transport = transport.max(grid.apply_multiplier(&phi0, sigma, &cos).max_abs_diff(&exact));
    }
    v.require(round <= 1e-13, format!("transform round trip {round:.1e} (<= 1e-13)"));
    v.require(
        pi_linv <= 1e-12 && d_linv <= 1e-12,
        format!("average of L^-1 {pi_linv:.1e}, d/dtau L^-1 - (I - average) {d_linv:.1e} (<= 1e-12)"),
    );
    v.require(semi <= 1e-12, format!("propagator semigroup {semi:.1e} (<= 1e-12)"));
    v.require(transport <= 1e-12, format!("transport shift cos(tau - h/eps) {transport:.1e} (<= 1e-12)"));

    let mut trip: f64 = 0.0;
    let grid = TauGrid::new(64).unwrap();
    for problem in [Problem::Planar(builtin_2d().with_eps(0.25)), Problem::Spatial(builtin_3d().with_eps(0.125))] {
        let rhs = TwoScaleRhs::new(&problem, 64).unwrap();
        for j in 0..=MAX_INIT_ORDER {
            let s = prepare_initial(&rhs, &grid, &rhs.initial_vector(), j, InitVariant::Literal).unwrap();
            let (x, vv) = rhs.reconstruct(&grid, &s);
            let err = x
                .iter()
                .zip(problem.x0())
                .chain(vv.iter().zip(problem.v0()))
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            trip = trip.max(err);
        }
    }
    v.require(trip <= 1e-10, format!("reconstruction of prepared data at t = 0, j = 0..4, 2d and 3d: {trip:.1e} (<= 1e-10)"));
    v
}

fn main() {
    let started = Instant::now();
    let (eps_scaling, comparators) = planar_eps_scaling();
    let verdicts = vec![
        planar_h_convergence(),
        eps_scaling,
        comparators,
        spatial_uniformity(),
        order_conditions(),
        lemma_bounds(),
        spectral_saturation(),
        identities(),
    ];
    println!();
    for v in &verdicts {
        v.print();
    }
    let passed = verdicts.iter().filter(|v| v.pass).count();
    println!(
        "\n{passed}/{} criteria passed in {:.1} s",
        verdicts.len(),
        started.elapsed().as_secs_f64()
    );
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|s| s == "1");
    if strict && passed < verdicts.len() {
        std::process::exit(1);
    }
}
