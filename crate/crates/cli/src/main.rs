//! Command-line front end: validation, bisimulation minimisation, quotient
//! construction, bounded PCTL checking, fixture generation, reduction
//! reports and oracle cross-validation.
//!
//! Machine-readable results go to stdout, diagnostics to stderr. Exit
//! codes: 0 success, 1 parse/validation/usage failure, 2 internal invariant
//! breach, 3 oracle disagreement.

use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use imdp_core::bisim::{
    bisimulation, brute_force_bisimulation, quotient, BisimKind, OracleConfig,
};
use imdp_core::format::{parse, serialize};
use imdp_core::interval::Interval;
use imdp_core::model::{validate, Imdp};
use imdp_core::rational::parse_rat;
use imdp_core::semantics::{check_state_formula, parse_formula, path_values, StateFormula};
use imdp_core::workbench::{gen_csma, gen_example1, gen_wsn, reduction_report};

#[derive(Parser)]
#[command(
    name = "imdp",
    about = "Exact bisimulation minimisation and bounded PCTL checking for interval MDPs",
    version
)]
struct Cli {
    /// Worker threads for refinement sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Semantics {
    /// Cooperative bisimulation: scheduler and nature resolved jointly.
    Coop,
    /// Competitive bisimulation: scheduler against nature.
    Comp,
}

impl From<Semantics> for BisimKind {
    fn from(s: Semantics) -> BisimKind {
        match s {
            Semantics::Coop => BisimKind::Cooperative,
            Semantics::Comp => BisimKind::Competitive,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a model for well-formedness; exit 0 iff valid.
    Validate {
        /// Model file; `-` or absent reads stdin.
        file: Option<PathBuf>,
    },
    /// Compute a bisimulation, print the partition and a reduction report.
    Minimize {
        file: Option<PathBuf>,
        #[arg(long, value_enum)]
        semantics: Semantics,
        /// Write the quotient model here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the quotient model of a bisimulation to stdout or a file.
    Quotient {
        file: Option<PathBuf>,
        #[arg(long, value_enum)]
        semantics: Semantics,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a bounded PCTL formula; one line per state.
    Mc {
        file: Option<PathBuf>,
        /// e.g. 'P>=0.7 [ "a" U<=4 "b" ] mode=maximin'
        #[arg(long)]
        formula: String,
    },
    /// Generate fixture models.
    #[command(subcommand)]
    Generate(Generate),
    /// Reduction report between a model and its minimised version.
    Report {
        original: PathBuf,
        minimised: PathBuf,
    },
    /// Run partition refinement against the brute-force oracle; exit 3 on
    /// disagreement. IMDP_ORACLE_BOUND overrides the state cap (default 8).
    OracleCheck {
        file: Option<PathBuf>,
        #[arg(long, value_enum)]
        semantics: Semantics,
    },
}

#[derive(Subcommand)]
enum Generate {
    /// Closed wireless-sensor-network model with uncertain message loss.
    Wsn {
        #[arg(long)]
        sensors: usize,
        /// Loss probability interval, e.g. `0.1,0.2`.
        #[arg(long)]
        p: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Shared-medium contention model with exponential backoff.
    Csma {
        #[arg(long)]
        nodes: usize,
        #[arg(long = "max-collisions")]
        max_collisions: u32,
        /// Per-slot transmission probability interval, e.g. `0.5,0.75`.
        #[arg(long = "p-send")]
        p_send: String,
        /// Collision probability interval, e.g. `0.1,0.3`.
        #[arg(long = "p-collide")]
        p_collide: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The six-pair fixture from the introduction example.
    Example1 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure with a chosen exit code; message printed to stderr.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn disagreement(message: impl Into<String>) -> Failure {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // ignore the error when a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_input(file: &Option<PathBuf>) -> Result<String, Failure> {
    match file {
        Some(path) if path.as_os_str() != "-" => fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display()))),
        _ => {
            let mut text = String::new();
            std::io::stdin()
                .read_to_string(&mut text)
                .map_err(|e| Failure::usage(format!("cannot read stdin: {e}")))?;
            Ok(text)
        }
    }
}

fn load_model(file: &Option<PathBuf>) -> Result<Imdp, Failure> {
    let text = read_input(file)?;
    let m = parse(&text).map_err(|e| Failure::usage(format!("parse error: {e}")))?;
    let report = validate(&m);
    if !report.is_valid() {
        return Err(Failure::usage(format!("invalid model:\n{report}")));
    }
    Ok(m)
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn parse_interval_arg(text: &str, what: &str) -> Result<Interval, Failure> {
    let (lo, hi) = text
        .split_once(',')
        .ok_or_else(|| Failure::usage(format!("{what}: expected `lo,hi`, got `{text}`")))?;
    let lo = parse_rat(lo).map_err(|e| Failure::usage(format!("{what}: {e}")))?;
    let hi = parse_rat(hi).map_err(|e| Failure::usage(format!("{what}: {e}")))?;
    Interval::new(lo, hi).map_err(|e| Failure::usage(format!("{what}: {e}")))
}

fn run(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Validate { file } => {
            let text = read_input(&file)?;
            let m = parse(&text).map_err(|e| Failure::usage(format!("parse error: {e}")))?;
            let report = validate(&m);
            print!("{report}");
            Ok(if report.is_valid() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Minimize { file, semantics, out } => {
            let m = load_model(&file)?;
            let p = bisimulation(&m, semantics.into());
            let q = quotient(&m, &p).map_err(|e| Failure::internal(format!("quotient: {e}")))?;
            let check = validate(&q);
            if !check.is_valid() {
                return Err(Failure::internal(format!("quotient failed validation:\n{check}")));
            }
            print!("{}", p.dump(&m));
            print!("{}", reduction_report(&m, &q).render_kv());
            if let Some(path) = out {
                write_output(&Some(path), &serialize(&q))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Quotient { file, semantics, out } => {
            let m = load_model(&file)?;
            let p = bisimulation(&m, semantics.into());
            let q = quotient(&m, &p).map_err(|e| Failure::internal(format!("quotient: {e}")))?;
            write_output(&out, &serialize(&q))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Mc { file, formula } => {
            let m = load_model(&file)?;
            let phi = parse_formula(&formula).map_err(|e| Failure::usage(e.to_string()))?;
            let sat = check_state_formula(&m, &phi).map_err(|e| Failure::usage(e.to_string()))?;
            let values = match &phi {
                StateFormula::Threshold { mode, path, .. } => Some(
                    path_values(&m, path, *mode).map_err(|e| Failure::usage(e.to_string()))?,
                ),
                _ => None,
            };
            for s in m.states() {
                let value = values
                    .as_ref()
                    .map(|v| v[s.0].to_string())
                    .unwrap_or_else(|| "-".to_string());
                println!("{} {} {}", m.state_name(s), sat.contains(&s), value);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate(what) => {
            let (model, out) = match what {
                Generate::Wsn { sensors, p, out } => {
                    let p = parse_interval_arg(&p, "--p")?;
                    let m = gen_wsn(sensors, &p).map_err(|e| Failure::usage(e.to_string()))?;
                    (m, out)
                }
                Generate::Csma {
                    nodes,
                    max_collisions,
                    p_send,
                    p_collide,
                    out,
                } => {
                    if nodes < 2 {
                        return Err(Failure::usage("--nodes must be at least 2"));
                    }
                    if max_collisions < 1 {
                        return Err(Failure::usage("--max-collisions must be at least 1"));
                    }
                    let p_send = parse_interval_arg(&p_send, "--p-send")?;
                    let p_collide = parse_interval_arg(&p_collide, "--p-collide")?;
                    (gen_csma(nodes, max_collisions, &p_send, &p_collide), out)
                }
                Generate::Example1 { out } => (gen_example1(), out),
            };
            write_output(&out, &serialize(&model))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { original, minimised } => {
            let m = load_model(&Some(original))?;
            let q = load_model(&Some(minimised))?;
            let report = reduction_report(&m, &q);
            eprint!("{}", report.render_table());
            print!("{}", report.render_kv());
            Ok(ExitCode::SUCCESS)
        }
        Command::OracleCheck { file, semantics } => {
            let m = load_model(&file)?;
            let bound = std::env::var("IMDP_ORACLE_BOUND")
                .ok()
                .and_then(|v| v.parse::<usize>().ok())
                .unwrap_or(8);
            let cfg = OracleConfig {
                max_states: bound,
                ..OracleConfig::default()
            };
            let kind: BisimKind = semantics.into();
            let fast = bisimulation(&m, kind);
            let slow = brute_force_bisimulation(&m, kind, &cfg)
                .map_err(|e| Failure::usage(e.to_string()))?;
            if fast == slow {
                println!("agreement blocks={}", fast.num_blocks());
                Ok(ExitCode::SUCCESS)
            } else {
                Err(Failure::disagreement(format!(
                    "oracle disagreement\n--- partition refinement ---\n{}--- brute force ---\n{}",
                    fast.dump(&m),
                    slow.dump(&m)
                )))
            }
        }
    }
}

