//! Command-line front end.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::asymptotics::{excess_demand, gaussian_approx, ApproxDocument, GaussianApprox};
use crate::closed_form::HypergeometricLaw;
use crate::config::{resolve_seed, RunConfig, SEED_ENV};
use crate::distributions::validate_assumptions;
use crate::error::{Error, Result};
use crate::market::empirical_excess;
use crate::montecarlo::{
    draw_realization, normality_diagnostics_at, run_simulation, write_ellipses_csv, Mat2,
    NormalityDiagnostics, SimulationReport, Vec2, ELLIPSE_POINTS, MIN_DIAGNOSTIC_REPLICATIONS,
};
use crate::output::fmt_f64;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const CURVE_GRID: usize = 512;

#[derive(Debug, Parser)]
#[command(
    name = "market-asymptotics",
    version,
    about = "Gaussian approximation and simulation of efficient double-auction outcomes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Approximation parameters; writes approx.json.
    Approx(CommonArgs),
    /// Monte Carlo; writes records.csv, ellipses.csv and diagnostics.json.
    Simulate(CommonArgs),
    /// Exact law of K for equal buyer and seller laws; writes pmf.csv.
    Exact(CommonArgs),
    /// Checks the regularity assumptions; writes assumptions.json.
    Validate(CommonArgs),
    /// Scatter, ellipse and quantile-curve data for plotting.
    EmitFigureData(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Approx(_) => "approx",
            Command::Simulate(_) => "simulate",
            Command::Exact(_) => "exact",
            Command::Validate(_) => "validate",
            Command::EmitFigureData(_) => "emit-figure-data",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Approx(a)
            | Command::Simulate(a)
            | Command::Exact(a)
            | Command::Validate(a)
            | Command::EmitFigureData(a) => a,
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_config_error() {
        EXIT_CONFIG
    } else {
        EXIT_NUMERIC
    }
}

/// Everything a run needs, resolved from the config file and flags.
struct Context {
    cfg: RunConfig,
    out: PathBuf,
    seed: Option<u64>,
    workers: usize,
}

impl Context {
    fn new(args: &CommonArgs) -> Result<Self> {
        let cfg = RunConfig::load(&args.config)?;
        if args.workers == Some(0) {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        let workers = args.workers.or(cfg.workers).unwrap_or(0);
        let env = std::env::var(SEED_ENV).ok();
        let seed = resolve_seed(args.seed, cfg.seed, env.as_deref()).ok();
        fs::create_dir_all(&args.out)?;
        Ok(Self {
            cfg,
            out: args.out.clone(),
            seed,
            workers,
        })
    }

    fn require_seed(&self, args: &CommonArgs) -> Result<u64> {
        let env = std::env::var(SEED_ENV).ok();
        resolve_seed(args.seed, self.cfg.seed, env.as_deref())
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let args = cli.command.args();
    let ctx = Context::new(args)?;
    let digest = match &cli.command {
        Command::Approx(_) => cmd_approx(&ctx)?,
        Command::Simulate(a) => {
            let seed = ctx.require_seed(a)?;
            cmd_simulate(&ctx, seed)?
        }
        Command::Exact(_) => cmd_exact(&ctx)?,
        Command::Validate(_) => cmd_validate(&ctx)?,
        Command::EmitFigureData(a) => {
            let seed = ctx.require_seed(a)?;
            cmd_emit_figure_data(&ctx, seed)?
        }
    };
    write_metadata(&ctx, cli.command.name(), &digest)
}

#[derive(Debug, Serialize)]
struct RunMetadata<'a> {
    command: &'a str,
    package_version: &'a str,
    unix_time_seconds: u64,
    seed: Option<u64>,
    workers: usize,
    output_digest: &'a str,
}

/// Timestamps and run details live here, so primary outputs stay byte-identical.
fn write_metadata(ctx: &Context, command: &str, digest: &str) -> Result<()> {
    let meta = RunMetadata {
        command,
        package_version: env!("CARGO_PKG_VERSION"),
        unix_time_seconds: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        seed: ctx.seed,
        workers: ctx.workers,
        output_digest: digest,
    };
    let mut w = ctx.create(&format!("{command}.meta.json"))?;
    serde_json::to_writer_pretty(&mut w, &meta)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(ctx: &Context, name: &str, value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(ctx.out.join(name), &text)?;
    Ok(text)
}

fn approx_for(cfg: &RunConfig) -> Result<GaussianApprox> {
    gaussian_approx(&cfg.effective_spec()?)
}

fn summary(a: &GaussianApprox) -> String {
    format!(
        "N={} M={} lambda={}\n\
         t_alpha      {}\n\
         E'(t_alpha)  {}\n\
         mean K       {}\n\
         mean W       {}\n\
         sigma^2      {}\n\
         varsigma^2   {}\n\
         kappa        {}\n\
         correlation  {}\n",
        a.n_buyers,
        a.n_sellers,
        a.lambda,
        fmt_f64(a.t_alpha),
        fmt_f64(a.e_prime_at_t),
        fmt_f64(a.mean_k),
        fmt_f64(a.mean_w),
        fmt_f64(a.sigma2),
        fmt_f64(a.varsigma2),
        fmt_f64(a.kappa),
        fmt_f64(a.correlation()),
    )
}

fn cmd_approx(ctx: &Context) -> Result<String> {
    let a = approx_for(&ctx.cfg)?;
    write_json(ctx, "approx.json", &ApproxDocument::from(&a))?;
    print!("{}", summary(&a));
    for w in &a.warnings {
        eprintln!("warning: {w}");
    }
    Ok("approx.json".into())
}

/// Contents of diagnostics.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationDiagnostics {
    pub config_digest: String,
    pub seed: u64,
    pub replications: usize,
    pub approx: ApproxDocument,
    pub empirical_mean: Vec2,
    pub empirical_cov: Mat2,
    /// Absent below the minimum replication count.
    pub normality: Option<NormalityDiagnostics>,
}

fn simulation_diagnostics(rep: &SimulationReport, levels: &[f64]) -> Result<SimulationDiagnostics> {
    let normality = if rep.records.len() >= MIN_DIAGNOSTIC_REPLICATIONS {
        Some(normality_diagnostics_at(rep, levels)?)
    } else {
        None
    };
    Ok(SimulationDiagnostics {
        config_digest: rep.config_digest.clone(),
        seed: rep.seed,
        replications: rep.records.len(),
        approx: ApproxDocument::from(&rep.approx),
        empirical_mean: rep.empirical_mean,
        empirical_cov: rep.empirical_cov,
        normality,
    })
}

fn simulate(ctx: &Context, seed: u64) -> Result<SimulationReport> {
    run_simulation(&ctx.cfg.simulation(seed)?, ctx.workers)
}

fn cmd_simulate(ctx: &Context, seed: u64) -> Result<String> {
    let rep = simulate(ctx, seed)?;
    let mut w = ctx.create("records.csv")?;
    rep.write_records_csv(&mut w)?;
    w.flush()?;
    // Fewer than three distinct points have no empirical ellipse.
    let ellipses = rep.empirical_ellipses(&ctx.cfg.levels).unwrap_or_default();
    let mut w = ctx.create("ellipses.csv")?;
    write_ellipses_csv(&ellipses, &mut w)?;
    w.flush()?;
    let diag = simulation_diagnostics(&rep, &ctx.cfg.levels)?;
    write_json(ctx, "diagnostics.json", &diag)?;
    println!(
        "{} replications, seed {}, digest {}",
        rep.records.len(),
        seed,
        rep.config_digest
    );
    Ok(rep.config_digest)
}

pub fn write_pmf_csv<W: Write>(law: &HypergeometricLaw, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "probability"])?;
    for (k, p) in law.pmf_table().into_iter().enumerate() {
        w.write_record([k.to_string(), fmt_f64(p)])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_exact(ctx: &Context) -> Result<String> {
    if !ctx.cfg.equal_laws {
        return Err(Error::Config(
            "exact requires \"equal_laws\": true (buyers and sellers drawn from one continuous law)"
                .into(),
        ));
    }
    let law = HypergeometricLaw::new(
        ctx.cfg.market.n_buyers as u64,
        ctx.cfg.market.n_sellers as u64,
    )?;
    let mut buf = Vec::new();
    write_pmf_csv(&law, &mut buf)?;
    fs::write(ctx.out.join("pmf.csv"), &buf)?;
    std::io::stdout().write_all(&buf)?;
    Ok("pmf.csv".into())
}

fn cmd_validate(ctx: &Context) -> Result<String> {
    let spec = ctx.cfg.effective_spec()?;
    let report = validate_assumptions(
        spec.buyer_law.as_ref(),
        spec.seller_law.as_ref(),
        ctx.cfg.epsilon,
        ctx.cfg.grid,
        Some(spec.lambda()),
    )?;
    let text = write_json(ctx, "assumptions.json", &report)?;
    print!("{text}");
    Ok("assumptions.json".into())
}

fn write_figure_ellipses(path: &Path, rep: &SimulationReport, levels: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["kind", "level", "x", "y"])?;
    let sets = [
        ("empirical", rep.empirical_ellipses(levels)?),
        ("theoretical", rep.theoretical_ellipses(levels)?),
    ];
    for (kind, ellipses) in &sets {
        for e in ellipses {
            for p in e.boundary(ELLIPSE_POINTS) {
                w.write_record([
                    kind.to_string(),
                    fmt_f64(e.level),
                    fmt_f64(p[0]),
                    fmt_f64(p[1]),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_emit_figure_data(ctx: &Context, seed: u64) -> Result<String> {
    let rep = simulate(ctx, seed)?;

    let mut w = csv::Writer::from_path(ctx.out.join("scatter.csv"))?;
    w.write_record(["K_std", "W_std"])?;
    for p in &rep.standardized_records {
        w.write_record([fmt_f64(p[0]), fmt_f64(p[1])])?;
    }
    w.flush()?;

    write_figure_ellipses(&ctx.out.join("figure_ellipses.csv"), &rep, &ctx.cfg.levels)?;

    // Quantile curves of the laws together with one realization's step functions.
    let spec = ctx.cfg.effective_spec()?;
    let lambda = spec.lambda();
    let base = ctx.cfg.market_spec()?;
    let sim = ctx.cfg.simulation(seed)?;
    let mut r = draw_realization(&base, seed, 0);
    if let Some(tp) = &sim.transform {
        r.valuations
            .iter_mut()
            .for_each(|v| *v = tp.buyer_map.apply(*v));
        r.costs
            .iter_mut()
            .for_each(|c| *c = tp.seller_map.apply(*c));
        r.buyer_floor = r.buyer_floor.map(|a| tp.buyer_map.apply(a));
        r.seller_cap = r.seller_cap.map(|d| tp.seller_map.apply(d));
    }
    let mut w = csv::Writer::from_path(ctx.out.join("quantile_curves.csv"))?;
    w.write_record([
        "t",
        "buyer_quantile",
        "seller_quantile",
        "excess",
        "empirical_excess",
    ])?;
    for i in 0..=CURVE_GRID {
        let t = i as f64 / CURVE_GRID as f64;
        w.write_record([
            fmt_f64(t),
            fmt_f64(spec.buyer_law.quantile(1.0 - t)),
            fmt_f64(spec.seller_law.quantile((t / lambda).min(1.0))),
            fmt_f64(excess_demand(&spec, t)?),
            fmt_f64(empirical_excess(&r, t)?),
        ])?;
    }
    w.flush()?;
    println!("figure data written to {}", ctx.out.display());
    Ok(rep.config_digest)
}
