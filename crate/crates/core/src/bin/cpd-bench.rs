use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cpd_twoscale::bench::config::NumberSpec;
use cpd_twoscale::bench::study::summary_path;
use cpd_twoscale::bench::{
    parse_number, parse_number_list, report_order_conditions, run_convergence, run_single,
    write_trajectory_csv, RunSettings, SingleRun, StudyConfig,
};
use cpd_twoscale::error::{CpdError, Result};
use cpd_twoscale::integrators::Method;

#[derive(Parser, Debug)]
#[command(name = "cpd-bench", version, about = "Convergence studies for two-scale charged-particle integrators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Error-vs-h and error-vs-eps sweeps against reference solutions.
    Convergence(ConvergenceArgs),
    /// One recorded trajectory.
    Single(SingleArgs),
    /// Residual table of the stiff order conditions.
    OrderConditions(OrderArgs),
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    /// TOML file with study settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// Comma-separated method names.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated step sizes, e.g. "2^-1,2^-2,1/8".
    #[arg(long)]
    h_list: Option<String>,
    #[arg(long)]
    eps_list: Option<String>,
    #[arg(long)]
    ntau: Option<usize>,
    #[arg(long)]
    tend: Option<String>,
    #[arg(long)]
    init_order: Option<usize>,
    /// "literal" or "lagged".
    #[arg(long)]
    init_variant: Option<String>,
    #[arg(long)]
    ref_tol: Option<String>,
    /// CSV destination; a JSON summary is written next to it. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Write wall_seconds as 0 for byte-identical output.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug)]
struct SingleArgs {
    #[arg(long, default_value = "paper-2d")]
    problem: String,
    #[arg(long, alias = "methods", default_value = "eo2")]
    method: String,
    #[arg(long, alias = "h-list")]
    h: String,
    #[arg(long, alias = "eps-list")]
    eps: Option<String>,
    #[arg(long, default_value_t = cpd_twoscale::tau::DEFAULT_N_TAU)]
    ntau: usize,
    #[arg(long, default_value = "1")]
    tend: String,
    #[arg(long)]
    init_order: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OrderArgs {
    /// Comma-separated method names; defaults to the four main tableaus.
    #[arg(long, default_value = "eo2,io2,eo4,io4")]
    methods: String,
    /// Emit JSON instead of the text table.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn numbers(s: &str) -> Result<Vec<NumberSpec>> {
    Ok(parse_number_list(s)?.into_iter().map(NumberSpec::Value).collect())
}

fn study_config(a: ConvergenceArgs) -> Result<StudyConfig> {
    let mut c = match &a.config {
        Some(path) => StudyConfig::from_file(path)?,
        None => StudyConfig::default(),
    };
    if let Some(p) = a.problem {
        c.problem = p;
    }
    if let Some(m) = a.methods {
        c.methods = m.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    }
    if let Some(h) = a.h_list {
        c.h_list = numbers(&h)?;
    }
    if let Some(e) = a.eps_list {
        c.eps_list = Some(numbers(&e)?);
    }
    if let Some(n) = a.ntau {
        c.n_tau = n;
    }
    if let Some(t) = a.tend {
        c.t_end = parse_number(&t)?;
    }
    if a.init_order.is_some() {
        c.init_order = a.init_order;
    }
    if let Some(v) = a.init_variant {
        c.init_variant = v;
    }
    if let Some(t) = a.ref_tol {
        c.ref_tol = parse_number(&t)?;
    }
    if a.out.is_some() {
        c.out = a.out;
    }
    if a.jobs.is_some() {
        c.jobs = a.jobs;
    }
    if a.no_timing {
        c.record_timing = false;
    }
    Ok(c)
}

fn convergence(a: ConvergenceArgs) -> Result<()> {
    let config = study_config(a)?;
    let result = run_convergence(&config)?;
    let mut w = output(&config.out)?;
    result.write_csv(&mut w)?;
    w.flush()?;
    if let Some(path) = &config.out {
        std::fs::write(summary_path(path), result.summary_json()?)?;
    }
    for fit in result.fits() {
        if let Some(s) = fit.err_x.slope {
            eprintln!(
                "{:<12} {:>3}-sweep at {:<9e} slope err_x {:6.3}  err_v {}",
                fit.method,
                fit.sweep,
                fit.fixed,
                s,
                fit.err_v.slope.map_or("n/a".into(), |v| format!("{v:6.3}"))
            );
        }
    }
    let failures = result.records.iter().filter(|r| !r.is_ok()).count();
    if failures > 0 {
        eprintln!("{failures} run(s) failed; see the status column");
    }
    Ok(())
}

fn single(a: SingleArgs) -> Result<()> {
    let run = SingleRun {
        problem: a.problem,
        method: a.method.parse()?,
        h: parse_number(&a.h)?,
        eps: a.eps.as_deref().map(parse_number).transpose()?,
        t_end: parse_number(&a.tend)?,
        settings: RunSettings {
            n_tau: a.ntau,
            init_order: a.init_order,
            ..RunSettings::default()
        },
    };
    let traj = run_single(&run)?;
    let mut w = output(&a.out)?;
    write_trajectory_csv(&traj, &mut w)?;
    w.flush()?;
    Ok(())
}

fn order_conditions(a: OrderArgs) -> Result<()> {
    let methods: Vec<Method> = a.methods.split(',').map(str::parse).collect::<Result<_>>()?;
    let reports = methods
        .into_iter()
        .map(report_order_conditions)
        .collect::<Result<Vec<_>>>()?;
    let mut w = output(&a.out)?;
    if a.json {
        let text = serde_json::to_string_pretty(&reports).map_err(|e| CpdError::Io(e.to_string()))?;
        writeln!(w, "{text}")?;
    } else {
        for r in &reports {
            writeln!(w, "{}", r.to_text())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Convergence(a) => convergence(a),
        Command::Single(a) => single(a),
        Command::OrderConditions(a) => order_conditions(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
