mod commands;
mod config;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{ensure, Context};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use commands::Outcome;
use config::*;
use output::{svg_plot, write_file, Verdict};
use pathcalc::{Error, Generator};

#[derive(Parser)]
#[command(name = "pathcalc", version, about = "Pathwise calculus experiments on grid paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Replaces every generator seed (and the MC seed list).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Partition level range `a..b`.
    #[arg(long, global = true)]
    levels: Option<String>,
    /// Also write SVG plots of the convergence tables.
    #[arg(long, global = true)]
    plot: bool,
    /// Treat inconclusive trend tests as failures.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Quadratic variation or covariation along a partition sequence.
    Qv,
    /// Follmer integral of an integrand against a path.
    Integrate,
    /// Residual table of the pathwise Ito formula.
    ItoCheck,
    /// Associativity of the integral.
    Assoc,
    /// Linear equation Z = H + int Z_- dX.
    Linear,
    /// Nonlinear equation with a built-in drift.
    Nonlinear,
    /// Drawdown-constrained path through the Azema-Yor transform.
    Drawdown,
    /// Constant proportion portfolio insurance.
    Cppi,
    /// Portfolio insurance with a path-dependent multiplier.
    Dppi,
    /// Monte Carlo QV along Lebesgue partitions.
    Mc,
    /// Pushforward measures converging to a limit measure.
    AppendixMeasure,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Qv => "qv",
            Command::Integrate => "integrate",
            Command::ItoCheck => "ito-check",
            Command::Assoc => "assoc",
            Command::Linear => "linear",
            Command::Nonlinear => "nonlinear",
            Command::Drawdown => "drawdown",
            Command::Cppi => "cppi",
            Command::Dppi => "dppi",
            Command::Mc => "mc",
            Command::AppendixMeasure => "appendix-measure",
        }
    }
}

/// Overrides and metadata shared by the config types.
trait Experiment: Serialize + DeserializeOwned {
    fn generators(&mut self) -> Vec<&mut Generator>;
    fn set_levels(&mut self, levels: [u32; 2]);
    fn partition(&self) -> (PartitionKindConfig, [u32; 2]);
    fn validate(&self) -> anyhow::Result<()>;

    fn set_seed(&mut self, seed: u64) {
        // Distinct trees get seeds 1000 apart so they never share a stream.
        for (k, g) in self.generators().into_iter().enumerate() {
            g.reseed(seed.wrapping_add(1000 * k as u64));
        }
    }
}

macro_rules! grid_experiment {
    ($ty:ty, [$($gen:ident),*], [$($opt:ident),*], |$c:ident| $extra:expr) => {
        impl Experiment for $ty {
            fn generators(&mut self) -> Vec<&mut Generator> {
                #[allow(unused_mut)]
                let mut v: Vec<&mut Generator> = vec![$(&mut self.$gen),*];
                $(if let Some(g) = self.$opt.as_mut() { v.push(g); })*
                v
            }
            fn set_levels(&mut self, levels: [u32; 2]) {
                self.partition.levels = levels;
            }
            fn partition(&self) -> (PartitionKindConfig, [u32; 2]) {
                (self.partition.kind, self.partition.levels)
            }
            fn validate(&self) -> anyhow::Result<()> {
                let $c = self;
                check_tol("trend.tol", $c.trend.as_ref().and_then(|t| t.tol))?;
                $extra
            }
        }
    };
}

grid_experiment!(QvConfig, [path], [other], |_c| Ok(()));
grid_experiment!(IntegrateConfig, [x], [], |_c| Ok(()));
grid_experiment!(ItoConfig, [x], [a], |c| check_tol("max_residual", c.max_residual));
grid_experiment!(AssocConfig, [x], [a, eta], |c| check_tol("max_gap", c.max_gap));
grid_experiment!(LinearConfig, [x], [], |c| {
    check_tol("expect.tol", c.expect.as_ref().map(|e| e.tol))?;
    check_tol("agreement_tol", c.agreement_tol)
});
grid_experiment!(NonlinearConfig, [x], [], |c| {
    check_tol("expect.tol", c.expect.as_ref().map(|e| e.tol))?;
    check_tol("spot_radius", c.spot_radius)
});
grid_experiment!(DrawdownConfig, [x], [], |c| check_tol("round_trip_tol", Some(c.round_trip_tol)));
grid_experiment!(InsuranceConfig, [s], [b], |_c| Ok(()));
grid_experiment!(MeasureConfig, [f], [], |c| check_tol("tol", c.tol));

impl Experiment for McConfig {
    fn generators(&mut self) -> Vec<&mut Generator> {
        Vec::new()
    }
    fn set_seed(&mut self, seed: u64) {
        let n = self.experiment.seeds.len() as u64;
        self.experiment.seeds = (0..n).map(|k| seed.wrapping_add(k)).collect();
    }
    fn set_levels(&mut self, [lo, hi]: [u32; 2]) {
        self.experiment.n_min = lo;
        self.experiment.n_max = hi;
    }
    fn partition(&self) -> (PartitionKindConfig, [u32; 2]) {
        (
            PartitionKindConfig::Lebesgue,
            [self.experiment.n_min, self.experiment.n_max],
        )
    }
    fn validate(&self) -> anyhow::Result<()> {
        check_tol("experiment.tol", Some(self.experiment.tol))?;
        ensure!(
            (0.0..=1.0).contains(&self.min_pass_fraction),
            "min_pass_fraction must lie in [0, 1]"
        );
        Ok(())
    }
}

/// Numerical conditions met while running; everything else is a setup error.
fn is_runtime(e: &Error) -> bool {
    matches!(
        e,
        Error::QvUnavailable(_) | Error::ZeroHit { .. } | Error::BlowUp { .. } | Error::NonFinite(_)
    )
}

enum Failure {
    Config(anyhow::Error),
    Runtime(Error),
}

struct Prepared<T> {
    config: T,
    hash: String,
}

fn prepare<T: Experiment>(cli: &Cli) -> Result<Prepared<T>, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config(anyhow::anyhow!("--config is required")))?;
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Config)?;
    let mut config: T = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::Config)?;
    if let Some(l) = &cli.levels {
        config.set_levels(parse_levels(l).map_err(Failure::Config)?);
    }
    if let Some(s) = cli.seed {
        config.set_seed(s);
    }
    config.validate().map_err(Failure::Config)?;
    let canonical = serde_json::to_vec(&config).map_err(|e| Failure::Config(e.into()))?;
    let hash = hex::encode(Sha256::digest(&canonical));
    Ok(Prepared { config, hash })
}

fn run_command<T: Experiment>(
    cli: &Cli,
    f: impl FnOnce(&T) -> pathcalc::Result<Outcome>,
) -> Result<(Prepared<T>, Outcome), (Option<String>, Failure)> {
    let p = prepare::<T>(cli).map_err(|e| (None, e))?;
    match f(&p.config) {
        Ok(o) => Ok((p, o)),
        Err(e) if is_runtime(&e) => Err((Some(p.hash), Failure::Runtime(e))),
        Err(e) => Err((Some(p.hash), Failure::Config(e.into()))),
    }
}

fn emit<T: Experiment>(cli: &Cli, cmd: Command, p: &Prepared<T>, out: &Outcome) -> anyhow::Result<bool> {
    let (kind, [lo, hi]) = p.config.partition();
    let kind = match kind {
        PartitionKindConfig::Dyadic => "dyadic",
        PartitionKindConfig::Lebesgue => "lebesgue",
    };
    let manifest = format!(
        "# manifest: config_sha256={} command={} partition={kind} levels={lo}..{hi}",
        p.hash,
        cmd.name()
    );
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    for t in &out.tables {
        write_file(&cli.out, &format!("{}.csv", t.name), &t.to_csv(&manifest))?;
    }
    if cli.plot {
        for (table, x, ys) in &out.plots {
            let Some(t) = out.tables.iter().find(|t| &t.name == table) else {
                continue;
            };
            let ys: Vec<&str> = ys.iter().map(String::as_str).collect();
            if let Some(svg) = svg_plot(t, x, &ys) {
                write_file(&cli.out, &format!("{table}.svg"), &svg)?;
            }
        }
    }
    let passed = !out.assertions.iter().any(|a| a.fails(cli.strict));
    let report = json!({
        "command": cmd.name(),
        "config_sha256": p.hash,
        "config": p.config,
        "strict": cli.strict,
        "passed": passed,
        "assertions": out.assertions,
        "details": out.details,
    });
    write_file(&cli.out, "report.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
    for a in &out.assertions {
        let tag = match a.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive if cli.strict => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        };
        println!("{tag} {}: {}", a.name, a.detail);
    }
    if passed {
        // A stale report from an earlier failing run would contradict this one.
        let _ = fs::remove_file(cli.out.join("failures.json"));
    } else {
        let failures: Vec<_> = out.assertions.iter().filter(|a| a.fails(cli.strict)).collect();
        let doc = json!({
            "command": cmd.name(),
            "config_sha256": p.hash,
            "failures": failures,
        });
        write_file(&cli.out, "failures.json", &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    }
    Ok(passed)
}

fn report_runtime(cli: &Cli, cmd: Command, hash: Option<&str>, e: &Error) -> anyhow::Result<()> {
    fs::create_dir_all(&cli.out)?;
    let doc = json!({
        "command": cmd.name(),
        "config_sha256": hash,
        "failures": [{ "name": "run", "verdict": "fail", "detail": e.to_string() }],
    });
    write_file(&cli.out, "failures.json", &(serde_json::to_string_pretty(&doc)? + "\n"))
}

fn execute<T: Experiment>(
    cli: &Cli,
    cmd: Command,
    f: impl FnOnce(&T) -> pathcalc::Result<Outcome>,
) -> ExitCode {
    match run_command::<T>(cli, f) {
        Ok((p, out)) => match emit(cli, cmd, &p, &out) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
        Err((hash, Failure::Runtime(e))) => {
            eprintln!("failed: {e}");
            if let Err(w) = report_runtime(cli, cmd, hash.as_deref(), &e) {
                eprintln!("error: {w:#}");
            }
            ExitCode::from(1)
        }
        Err((_, Failure::Config(e))) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let cmd = cli.command;
    match cmd {
        Command::Qv => execute(&cli, cmd, commands::qv),
        Command::Integrate => execute(&cli, cmd, commands::integrate),
        Command::ItoCheck => execute(&cli, cmd, commands::ito_check),
        Command::Assoc => execute(&cli, cmd, commands::assoc),
        Command::Linear => execute(&cli, cmd, commands::linear),
        Command::Nonlinear => execute(&cli, cmd, commands::nonlinear),
        Command::Drawdown => execute(&cli, cmd, commands::drawdown),
        Command::Cppi => execute(&cli, cmd, |c: &InsuranceConfig| commands::insurance(c, true)),
        Command::Dppi => execute(&cli, cmd, |c: &InsuranceConfig| commands::insurance(c, false)),
        Command::Mc => execute(&cli, cmd, commands::mc),
        Command::AppendixMeasure => execute(&cli, cmd, commands::appendix_measure),
    }
}
