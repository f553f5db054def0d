//! Command-line front end. `run_cli` parses arguments, executes and returns
//! the process exit code.

mod config;
mod pipeline;

use std::collections::BTreeMap;
use std::net::TcpListener;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Result, SsmError};
use crate::model::write_matrix_market;
use crate::models::{builtin, builtin_names, describe_builtin};
use crate::protocol::{serve_stdio, serve_tcp};

pub use config::{
    AnalysisConfig, BackboneConfig, ContinuationTuning, ExternalModel, ForcingConfig, FrcConfig, ModelConfig,
    RunConfig, SimulateConfig, SolutionMode, SsmConfig, SubspaceConfig,
};
pub use pipeline::{build_model, eig_options, fmt_f64, run, ssm_options, OutputFile, RunReport, Stage};

mod verify;
pub use verify::{compare_tables, verify_builtin, verify_model, VerifyReport};

#[derive(Parser, Debug)]
#[command(name = "ssm", version, about = "Non-intrusive SSM reduction of nonlinear mechanical systems")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Inspect or export built-in models.
    Model {
        #[command(subcommand)]
        action: ModelAction,
    },
    /// Master-subspace eigenvalues.
    Eig(RunArgs),
    /// SSM coefficients and reduced dynamics.
    Compute(RunArgs),
    /// Backbone curve of the autonomous SSM.
    Backbone(RunArgs),
    /// Forced response curve with bifurcations.
    Frc(RunArgs),
    /// Time integration of the reduced (and optionally full) model.
    Simulate(RunArgs),
    /// Every stage present in the configuration.
    Run(RunArgs),
    /// Compare black-box and tensor-based coefficients on built-in models.
    Verify {
        /// Models to check (default: every model with explicit tensors).
        #[arg(long)]
        model: Vec<String>,
        #[arg(long, default_value_t = 5)]
        order: u32,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Serve a built-in nonlinearity over the evaluation protocol.
    Serve {
        #[arg(long)]
        model: String,
        /// `name=value` parameter override (repeatable).
        #[arg(long = "param")]
        params: Vec<String>,
        /// Listen on `host:port`.
        #[arg(long, conflicts_with = "stdio")]
        tcp: Option<String>,
        #[arg(long)]
        stdio: bool,
        /// Exit after this many TCP connections.
        #[arg(long)]
        max_connections: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
pub enum ModelAction {
    List,
    Describe {
        name: String,
        #[arg(long = "param")]
        params: Vec<String>,
    },
    /// Write M, C, K as Matrix Market files.
    Export {
        name: String,
        #[arg(long = "param")]
        params: Vec<String>,
        #[arg(long, default_value = ".")]
        dir: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Built-in model, replacing the configured one.
    #[arg(long)]
    pub model: Option<String>,
    /// `name=value` model parameter override (repeatable).
    #[arg(long = "param")]
    pub params: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub order: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_params(items: &[String]) -> Result<BTreeMap<String, f64>> {
    items
        .iter()
        .map(|s| {
            let (k, v) = s.split_once('=').ok_or_else(|| SsmError::Config {
                field: "param".into(),
                message: format!("expected name=value, got `{s}`"),
            })?;
            let v: f64 = v.trim().parse().map_err(|_| SsmError::Config {
                field: format!("model.params.{}", k.trim()),
                message: format!("not a number: `{v}`"),
            })?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

/// Configuration file plus command-line overrides.
pub fn resolve_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let mut cfg = RunConfig::load(path)?;
            if let (Some(ext), Some(base)) = (cfg.model.external.as_mut(), path.parent()) {
                for p in [&mut ext.mass, &mut ext.damping, &mut ext.stiffness] {
                    *p = pipeline::resolve(base, p);
                }
            }
            cfg
        }
        None => {
            let name = args.model.clone().ok_or_else(|| SsmError::Config {
                field: "model".into(),
                message: "give --config or --model".into(),
            })?;
            RunConfig::from_toml(&format!("[model]\nbuiltin = {name:?}\n"))?
        }
    };
    if let Some(m) = &args.model {
        if cfg.model.builtin.as_ref() != Some(m) {
            cfg.model.params.clear();
        }
        cfg.model.builtin = Some(m.clone());
        cfg.model.external = None;
    }
    cfg.model.params.extend(parse_params(&args.params)?);
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    if let Some(o) = args.order {
        cfg.ssm.max_order = o;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init(cli: &Cli) {
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn stage_command(args: &RunArgs, stage: Stage, name: &str) -> Result<()> {
    let cfg = resolve_config(args)?;
    let report = run(&cfg, stage, name)?;
    for o in &report.outputs {
        println!("{}", cfg.output_dir.join(&o.path).display());
    }
    println!("{}", cfg.output_dir.join("manifest.json").display());
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Model { action } => match action {
            ModelAction::List => {
                for n in builtin_names() {
                    println!("{n:<14} {}", describe_builtin(n).unwrap_or(""));
                }
                Ok(())
            }
            ModelAction::Describe { name, params } => {
                let b = builtin(name, &parse_params(params)?)?;
                println!("model: {}", b.id);
                println!("dofs: {}", b.dofs());
                for (k, v) in &b.params {
                    println!("  {k} = {v}");
                }
                println!("explicit tensors: {}", b.tensors.is_some());
                let (c, k) = b.model.asymmetry();
                println!("asymmetry: damping {} stiffness {}", fmt_f64(c), fmt_f64(k));
                Ok(())
            }
            ModelAction::Export { name, params, dir } => {
                let b = builtin(name, &parse_params(params)?)?;
                std::fs::create_dir_all(dir)?;
                for (file, m) in [
                    ("mass.mtx", b.model.mass()),
                    ("damping.mtx", b.model.damping()),
                    ("stiffness.mtx", b.model.stiffness()),
                ] {
                    write_matrix_market(dir.join(file), m)?;
                    println!("{}", dir.join(file).display());
                }
                Ok(())
            }
        },
        Command::Eig(a) => stage_command(a, Stage::Eig, "eig"),
        Command::Compute(a) => stage_command(a, Stage::Compute, "compute"),
        Command::Backbone(a) => stage_command(a, Stage::Backbone, "backbone"),
        Command::Frc(a) => stage_command(a, Stage::Frc, "frc"),
        Command::Simulate(a) => stage_command(a, Stage::Simulate, "simulate"),
        Command::Run(a) => stage_command(a, Stage::All, "run"),
        Command::Verify { model, order, tol } => {
            let names: Vec<String> = if model.is_empty() {
                builtin_names()
                    .into_iter()
                    .filter(|n| builtin(n, &BTreeMap::new()).map(|b| b.tensors.is_some()).unwrap_or(false))
                    .map(String::from)
                    .collect()
            } else {
                model.clone()
            };
            let mut failed = Vec::new();
            for n in &names {
                let r = verify_builtin(n, *order, &BTreeMap::new())?;
                let ok = r.max_rel_w <= *tol && r.max_rel_r <= *tol;
                println!(
                    "{} {n:<14} order {order} coefficients {} max_rel_W {} max_rel_R {}",
                    if ok { "PASS" } else { "FAIL" },
                    r.coefficients,
                    fmt_f64(r.max_rel_w),
                    fmt_f64(r.max_rel_r)
                );
                if !ok {
                    failed.push(n.clone());
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(SsmError::Numerical(format!("oracle mismatch for {}", failed.join(", "))))
            }
        }
        Command::Serve {
            model,
            params,
            tcp,
            stdio,
            max_connections,
        } => {
            let b = builtin(model, &parse_params(params)?)?;
            let nl = b.model.nonlinearity().clone();
            match (tcp, stdio) {
                (Some(addr), _) => {
                    let listener = TcpListener::bind(addr)?;
                    eprintln!("listening on {}", listener.local_addr()?);
                    serve_tcp(nl.as_ref(), listener, *max_connections)
                }
                (None, true) => serve_stdio(nl.as_ref()),
                (None, false) => Err(SsmError::Config {
                    field: "serve".into(),
                    message: "give --tcp ADDR or --stdio".into(),
                }),
            }
        }
    }
}

/// Parse `args`, run, and return the exit code (0 success, 2 invalid input,
/// 3 numerical failure).
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init(&cli);
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
