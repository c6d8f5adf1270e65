use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use slodowy_core::commands::{self, FlowRequest};
use slodowy_core::config::RunConfig;
use slodowy_core::json::parse_matrix;
use slodowy_core::linalg::CMatrix;
use slodowy_core::report::Verdict;
use slodowy_core::Error;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

/// Verification tools for the phase space G x S_reg of SL_n(C).
///
/// Tolerances are overridden with `--tol.<name>=<value>` (see `info` for names).
#[derive(Parser, Debug)]
#[command(name = "slodowy", version)]
struct Cli {
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true, value_enum)]
    form: Option<FormArg>,
    /// Append the constant top shifts to the argument-shift family.
    #[arg(long, global = true)]
    mf_include_constants: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// key=value file with the same keys as the flags; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormArg {
    Trace,
    Killing,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    /// The negated principal nilpotent.
    NegXi,
    Zero,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every static verification suite.
    VerifyAll,
    /// Report the fibre of Phi over a regular element.
    Fiber {
        /// Matrix JSON `{"n", "re", "im"}` or a path to a file holding it.
        #[arg(long, conflicts_with = "preset")]
        x: Option<String>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
    /// Build and sweep the argument-shift family.
    Mf {
        /// Shift direction as matrix JSON or a path.
        #[arg(long, conflicts_with = "random")]
        beta: Option<String>,
        /// Draw a seeded random regular semisimple shift.
        #[arg(long)]
        random: bool,
    },
    /// Build and sweep the invariant-pullback system.
    RankSystem {
        /// Regular probe point as matrix JSON or a path.
        #[arg(long)]
        probe: Option<String>,
    },
    /// Integrate a system's flows and tabulate conservation.
    Flow {
        /// System manifest, or a report from `mf` / `rank-system`.
        #[arg(long)]
        manifest: PathBuf,
        /// Only this Hamiltonian; all members by default.
        #[arg(long)]
        index: Option<usize>,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[arg(long = "t", default_value_t = 1.0)]
        horizon: f64,
    },
    /// Dimensions, counts and tolerances for the configured n.
    Info,
}

type SplitArgs = (Vec<String>, Vec<(String, String)>);

/// Splits `--tol.<name>=<v>` and `--tol.<name> <v>` out of the argument list.
fn split_tolerances(args: Vec<String>) -> Result<SplitArgs, String> {
    let mut rest = Vec::new();
    let mut tols = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if let Some(spec) = a.strip_prefix("--tol.") {
            match spec.split_once('=') {
                Some((k, v)) => tols.push((k.to_string(), v.to_string())),
                None => {
                    let v = it.next().ok_or_else(|| format!("--tol.{spec} needs a value"))?;
                    tols.push((spec.to_string(), v));
                }
            }
        } else {
            rest.push(a);
        }
    }
    Ok((rest, tols))
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::Json(_) | Error::DimensionMismatch { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

fn build_config(cli: &Cli, tols: &[(String, String)]) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_file_text(&text)?;
    }
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(s) = cli.samples {
        cfg.samples = s;
    }
    if let Some(f) = cli.form {
        cfg.form = match f {
            FormArg::Trace => slodowy_core::lie::FormKind::TraceForm,
            FormArg::Killing => slodowy_core::lie::FormKind::KillingForm,
        };
    }
    if cli.mf_include_constants {
        cfg.mf_include_constants = true;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    for (k, v) in tols {
        cfg.apply(&format!("tol.{k}"), v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_matrix(arg: &str) -> Result<CMatrix, Failure> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| Failure::Usage(format!("cannot read {arg}: {e}")))?
    };
    parse_matrix(&text).map_err(|e| Failure::Usage(format!("cannot parse matrix: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Domain(format!("cannot write {}: {e}", path.display())))
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), Failure> {
    match &cfg.out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Pass => 0,
        _ => EXIT_FAIL,
    }
}

fn run(cli: &Cli, cfg: &RunConfig) -> Result<u8, Failure> {
    match &cli.command {
        Command::VerifyAll => {
            let report = commands::cmd_verify_all(cfg)?;
            for r in report.records.iter().filter(|r| !r.passed()) {
                eprintln!("{}", r.summary_line());
            }
            eprintln!(
                "verify-all n={} seed={}: {} checks, verdict {:?}",
                cfg.n,
                cfg.seed,
                report.records.len(),
                report.verdict
            );
            emit(cfg, &to_json(&report))?;
            Ok(verdict_code(report.verdict))
        }
        Command::Fiber { x, preset } => {
            let x = match (x, preset) {
                (Some(s), _) => read_matrix(s)?,
                (None, Some(p)) => {
                    let ps = cfg.phase_space()?;
                    match p {
                        Preset::NegXi => -&ps.slice.triple.xi,
                        Preset::Zero => CMatrix::zeros(cfg.n, cfg.n),
                    }
                }
                (None, None) => return Err(Failure::Usage("fiber needs --x or --preset".into())),
            };
            let report = commands::cmd_fiber(cfg, &x)?;
            emit(cfg, &to_json(&report))?;
            Ok(0)
        }
        Command::Mf { beta, random: _ } => {
            let beta = beta.as_deref().map(read_matrix).transpose()?;
            let report = commands::cmd_mf(cfg, beta.as_ref())?;
            write_system(cfg, &report)?;
            Ok(verdict_code(report.verdict))
        }
        Command::RankSystem { probe } => {
            let probe = probe.as_deref().map(read_matrix).transpose()?;
            let report = commands::cmd_rank_system(cfg, probe.as_ref())?;
            write_system(cfg, &report)?;
            Ok(verdict_code(report.verdict))
        }
        Command::Flow {
            manifest,
            index,
            h,
            horizon,
        } => {
            let text = std::fs::read_to_string(manifest)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", manifest.display())))?;
            let m = commands::parse_manifest(&text)?;
            let out = commands::cmd_flow(
                cfg,
                &m,
                FlowRequest {
                    index: *index,
                    h: *h,
                    horizon: *horizon,
                },
            )?;
            for f in &out.report.flows {
                eprintln!("H{} {}: max drift {:.3e}", f.hamiltonian, f.label, f.max_drift);
            }
            if let Some(p) = &cfg.out {
                write_file(&p.with_extension("jsonl"), &out.trajectory_jsonl)?;
                write_file(&p.with_extension("csv"), &out.trajectory_csv)?;
            }
            emit(cfg, &to_json(&out.report))?;
            Ok(verdict_code(out.report.verdict))
        }
        Command::Info => {
            emit(cfg, &to_json(&commands::cmd_info(cfg)?))?;
            Ok(0)
        }
    }
}

fn write_system(cfg: &RunConfig, report: &commands::SystemReport) -> Result<(), Failure> {
    if let Some(p) = &cfg.out {
        write_file(&p.with_extension("manifest.json"), &to_json(&report.manifest))?;
    }
    eprintln!(
        "{}: {} functions, bracket {:.3e}, full-rank fraction {:.3}",
        report.suite, report.manifest.count, report.commutativity.max_upstairs_scaled, report.independence.full_rank_fraction
    );
    emit(cfg, &to_json(report))
}

fn main() -> ExitCode {
    let (args, tols) = match split_tolerances(std::env::args().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = build_config(&cli, &tols).and_then(|cfg| run(&cli, &cfg));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}
