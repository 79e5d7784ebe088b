mod config;
mod dispatch;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bcq_core::oracle::{OracleInstance, OracleManifest};
use bcq_core::theorems::specker_certificate;
use bcq_core::{Certificate, TheoremTag, Verdict};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use config::{grid, ParamValue, RunConfig};
use dispatch::{axes, Evaluator, Quantity, Row};

#[derive(Parser)]
#[command(name = "bcq", version, about = "Exact certificates for quantitative Borel-Cantelli and Kochen-Stone bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify a theorem at every grid point of the config; writes a JSON array.
    Check {
        theorem: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate a quantity along one axis as CSV.
    Sweep {
        quantity: String,
        #[arg(long)]
        axis: String,
        #[arg(long)]
        range: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Honest moduli and reduction errors for a Specker sequence, l = 1..L.
    Specker {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare closed forms against brute-force enumeration.
    OracleDiff {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_CONFIG: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(cli.command) {
        Ok(verdict) => ExitCode::from(exit_code(verdict)),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn exit_code(v: Verdict) -> u8 {
    match v {
        Verdict::Pass => 0,
        Verdict::Fail => 1,
        Verdict::Undecided => 2,
    }
}

fn run(command: Command) -> Result<Verdict> {
    match command {
        Command::Check { theorem, config, out } => {
            let cfg = RunConfig::load(&config)?;
            let tag: TheoremTag = theorem.parse().map_err(anyhow::Error::msg)?;
            let certs = check(&cfg, tag)?;
            let text = serde_json::to_string_pretty(&certs)? + "\n";
            emit(out.as_deref().or(cfg.out.as_deref()), &text)?;
            Ok(summarize(certs.iter().map(|c| c.verdict)))
        }
        Command::Sweep { quantity, axis, range, config, out } => {
            let mut cfg = RunConfig::load(&config)?;
            let q = Quantity::parse(&quantity)?;
            let values = ParamValue::parse(&range).map_err(anyhow::Error::msg)?;
            if !matches!(values, ParamValue::Ints(_)) {
                bail!("--range must be integers, got {range:?}");
            }
            cfg.params.insert(axis.clone(), values);
            if !axes(q, &cfg).iter().any(|(name, _)| *name == axis) {
                bail!("{quantity} has no axis {axis:?}");
            }
            let rows = evaluate(&cfg, q)?.into_iter().map(|(row, _)| row).collect::<Vec<_>>();
            let names: Vec<&str> = axes(q, &cfg).into_iter().map(|(n, _)| n).collect();
            let text = output::csv_table(&names, &rows)?;
            emit(out.as_deref().or(cfg.out.as_deref()), &text)?;
            Ok(summarize(rows.iter().map(|r| r.verdict)))
        }
        Command::Specker { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let (report, verdict) = specker_report(&cfg)?;
            emit(out.as_deref().or(cfg.out.as_deref()), &(serde_json::to_string_pretty(&report)? + "\n"))?;
            Ok(verdict)
        }
        Command::OracleDiff { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let (report, verdict) = oracle_report(&cfg)?;
            emit(out.as_deref().or(cfg.out.as_deref()), &(serde_json::to_string_pretty(&report)? + "\n"))?;
            Ok(verdict)
        }
    }
}

fn evaluate(cfg: &RunConfig, q: Quantity) -> Result<Vec<(Row, Option<Certificate>)>> {
    let ctx = Evaluator::new(cfg, q)?;
    let points = grid(cfg, &axes(q, cfg))?;
    let results: Vec<Result<_>> = points.par_iter().map(|p| ctx.evaluate(q, p)).collect();
    results.into_iter().zip(&points).map(|(r, p)| r.with_context(|| format!("at {}", output::point_label(p)))).collect()
}

fn check(cfg: &RunConfig, tag: TheoremTag) -> Result<Vec<Certificate>> {
    Ok(evaluate(cfg, Quantity::Theorem(tag))?.into_iter().filter_map(|(_, c)| c).collect())
}

fn summarize(verdicts: impl Iterator<Item = Verdict>) -> Verdict {
    let (mut pass, mut fail, mut undecided) = (0usize, 0usize, 0usize);
    let mut all = Verdict::Pass;
    for v in verdicts {
        match v {
            Verdict::Pass => pass += 1,
            Verdict::Fail => fail += 1,
            Verdict::Undecided => undecided += 1,
        }
        all = all.combine(v);
    }
    eprintln!("{pass} pass, {fail} fail, {undecided} undecided");
    all
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn specker_report(cfg: &RunConfig) -> Result<(serde_json::Value, Verdict)> {
    let q = cfg.specker()?;
    let levels = match cfg.ints("l")? {
        Some(ls) => ls,
        None => (1..=cfg.ints("L")?.map_or(Ok(10), |v| single(&v, "L"))?).collect(),
    };
    let mut rows = Vec::new();
    let mut verdict = Verdict::Pass;
    for l in levels {
        let l = u32::try_from(l).context("l is too large")?;
        let c = specker_certificate(q, l)?;
        verdict = verdict.combine(c.verdict);
        rows.push(json!({
            "l": l,
            "phi_0_l": c.trace["phi_0_l"],
            "approximation": c.trace["approximation"],
            "error": c.lhs,
            "bound": c.rhs,
            "margin": bcq_core::numerics::format_rational(&c.margin),
            "verdict": c.verdict,
        }));
    }
    let report = json!({
        "enumeration": q.enumeration(),
        "reveal_steps": q.reveal_steps(),
        "limit": bcq_core::numerics::format_rational(&q.limit()),
        "rows": rows,
    });
    Ok((report, verdict))
}

fn single(v: &[u64], name: &str) -> Result<u64> {
    match v {
        [x] => Ok(*x),
        _ => bail!("parameter {name:?} must be a single integer"),
    }
}

fn oracle_report(cfg: &RunConfig) -> Result<(serde_json::Value, Verdict)> {
    let mut instances = Vec::new();
    let seed = cfg.oracle.as_ref().map(|o| o.seed);
    if let Some(o) = &cfg.oracle {
        instances = OracleManifest::generate(o.seed, o.count).instances;
    }
    if let Some(model) = &cfg.model {
        for p in grid(cfg, &[("n", Some(1)), ("m", None)])? {
            instances.push(OracleInstance { model: model.clone(), n: p["n"], m: p["m"] });
        }
    }
    if instances.is_empty() {
        bail!("oracle-diff needs \"oracle\" or a \"model\" with an \"m\" parameter");
    }
    let diffs: Vec<_> = instances.par_iter().map(OracleInstance::diff).collect();
    let mut mismatches = Vec::new();
    for d in diffs {
        let d = d?;
        if !d.agrees() {
            mismatches.push(d);
        }
    }
    let verdict = if mismatches.is_empty() { Verdict::Pass } else { Verdict::Fail };
    eprintln!("{} instances, {} mismatches", instances.len(), mismatches.len());
    let report = json!({
        "seed": seed,
        "instances": instances.len(),
        "mismatches": mismatches,
        "verdict": verdict,
    });
    Ok((report, verdict))
}
