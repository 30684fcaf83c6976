//! Command line driver: curve inspection, period computation with caching,
//! hypersurface export, and the verification suite.

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use kummerlab::checks::{run_checks, CheckConfig, CheckGroup};
use kummerlab::curve::{default_curve, CurveSpec};
use kummerlab::embed::EmbeddingContext;
use kummerlab::periods::{compute_periods_cached, DEFAULT_PRECISION};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "kummerlab",
    about = "Numerical geometry of genus-2 Jacobians: theta embeddings, \
             Kummer models, polar dualities",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CurveOpts {
    /// Curve file {"f": [[re,im]; 7], "eta_index": k}; defaults to y² = x⁵ - x
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Refinement target for period integrals
    #[arg(long, default_value_t = DEFAULT_PRECISION)]
    precision: f64,
    /// Directory for the period cache (populated on first use)
    #[arg(long)]
    period_cache: Option<PathBuf>,
    /// Seed for deterministic sampling
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a curve and print its branch data
    Curve(CurveOpts),
    /// Compute the period matrix and theta characteristic
    Periods(CurveOpts),
    /// Coble cubic operations
    Coble {
        #[command(subcommand)]
        action: CobleAction,
    },
    /// Run verification checks
    Verify {
        /// Check group to run
        #[arg(value_name = "GROUP")]
        group: String,
        /// Override per-check sample counts
        #[arg(long, default_value_t = 0)]
        samples: usize,
        /// Write the JSON report here
        #[arg(long)]
        json: Option<PathBuf>,
        #[command(flatten)]
        opts: CurveOpts,
    },
    /// Export the fitted hypersurfaces to a directory
    Export {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: CurveOpts,
    },
}

#[derive(Subcommand)]
enum CobleAction {
    /// Fit the cubic and write its coefficients with the gap certificate
    Export {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: CurveOpts,
    },
}

fn load_curve(opts: &CurveOpts) -> anyhow::Result<CurveSpec> {
    match &opts.curve {
        None => Ok(default_curve()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let v: serde_json::Value = serde_json::from_str(&text)?;
            CurveSpec::from_json(&v).map_err(|e| anyhow!("invalid curve: {e}"))
        }
    }
}

fn context_for(opts: &CurveOpts) -> anyhow::Result<EmbeddingContext> {
    let curve = load_curve(opts)?;
    let pd = compute_periods_cached(&curve, opts.precision, opts.period_cache.as_deref())
        .map_err(|e| anyhow!("period computation failed: {e}"))?;
    Ok(EmbeddingContext::new(pd, opts.seed))
}

fn coble_json(ctx: &EmbeddingContext) -> anyhow::Result<serde_json::Value> {
    let (form, gap) = ctx
        .coble_cubic()
        .map_err(|e| anyhow!("coble fit failed: {e}"))?;
    Ok(serde_json::json!({
        "form": form,
        "gap": gap,
        "sampling": { "seed": ctx.seed(), "samples": 40, "conditions": "gradient" },
        "curve_hash": format!("{:016x}", ctx.periods().curve.content_hash()),
    }))
}

fn kummer_json(ctx: &EmbeddingContext) -> anyhow::Result<serde_json::Value> {
    let (form, gap) = ctx
        .kummer_quartic()
        .map_err(|e| anyhow!("kummer quartic fit failed: {e}"))?;
    Ok(serde_json::json!({
        "form": form,
        "gap": gap,
        "sampling": { "seed": ctx.seed(), "samples": 60, "conditions": "evaluation" },
        "curve_hash": format!("{:016x}", ctx.periods().curve.content_hash()),
    }))
}

fn run() -> anyhow::Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Curve(opts) => {
            let curve = load_curve(&opts)?;
            println!("degree {}", curve.degree());
            for (i, b) in curve.branch_points().iter().enumerate() {
                let marker = if i == curve.eta_index() { "  <- marked" } else { "" };
                println!("branch[{i}] = {:+.12} {:+.12}i{marker}", b.re, b.im);
            }
            if curve.degree() == 5 {
                let marker = if curve.eta_index() == curve.branch_points().len() {
                    "  <- marked"
                } else {
                    ""
                };
                println!("branch[inf]{marker}");
            }
            Ok(true)
        }
        Command::Periods(opts) => {
            let curve = load_curve(&opts)?;
            let pd =
                compute_periods_cached(&curve, opts.precision, opts.period_cache.as_deref())
                    .map_err(|e| anyhow!("period computation failed: {e}"))?;
            println!("omega:");
            for i in 0..2 {
                println!(
                    "  [{:+.12}{:+.12}i, {:+.12}{:+.12}i]",
                    pd.omega[(i, 0)].re,
                    pd.omega[(i, 0)].im,
                    pd.omega[(i, 1)].re,
                    pd.omega[(i, 1)].im
                );
            }
            println!(
                "delta: a = [{}/12, {}/12], b = [{}/12, {}/12]",
                pd.delta.a[0], pd.delta.a[1], pd.delta.b[0], pd.delta.b[1]
            );
            println!(
                "quadrature order {} after {} refinements, theta scale {:.3e}",
                pd.quadrature_order, pd.refinements, pd.theta_scale
            );
            Ok(true)
        }
        Command::Coble { action } => match action {
            CobleAction::Export { out, opts } => {
                let ctx = context_for(&opts)?;
                let doc = coble_json(&ctx)?;
                std::fs::write(&out, serde_json::to_string_pretty(&doc)?)?;
                println!("wrote {}", out.display());
                Ok(true)
            }
        },
        Command::Verify {
            group,
            samples,
            json,
            opts,
        } => {
            let Some(group) = CheckGroup::parse(&group) else {
                eprintln!(
                    "error: unknown group '{group}'; one of: {}",
                    CheckGroup::names()
                );
                std::process::exit(2);
            };
            let ctx = context_for(&opts)?;
            let cfg = CheckConfig { seed: opts.seed, samples };
            let mut print = |r: &kummerlab::checks::CheckRecord| {
                println!(
                    "{:<42} {:>8} samples  gap {:>12.3e}  thr {:>9.1e}  {}  [{:.0} ms]",
                    r.name,
                    r.samples,
                    r.worst_gap,
                    r.threshold,
                    if r.pass { "PASS" } else { "FAIL" },
                    r.wall_time_ms
                );
            };
            let report = run_checks(&ctx, group, &cfg, Some(&mut print));
            if let Some(path) = json {
                std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
                println!("report written to {}", path.display());
            }
            if !report.pass {
                let failing: Vec<&str> = report
                    .records
                    .iter()
                    .filter(|r| !r.pass)
                    .map(|r| r.name.as_str())
                    .collect();
                eprintln!("failing checks: {}", failing.join(", "));
            }
            Ok(report.pass)
        }
        Command::Export { out, opts } => {
            let ctx = context_for(&opts)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(
                out.join("coble.json"),
                serde_json::to_string_pretty(&coble_json(&ctx)?)?,
            )?;
            std::fs::write(
                out.join("kummer.json"),
                serde_json::to_string_pretty(&kummer_json(&ctx)?)?,
            )?;
            println!("wrote {}", out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
