//! `spherical`: command-line driver for the dissipative spherical-model solver.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use spherical_core::saddle::Engine;

use config::{parse_range, parse_sweep, ClassicalBlock, ParamSource, QuantumBlock, RunConfig};
use error::CliError;
use output::{Meta, Outputs, Sink};

#[derive(Parser)]
#[command(name = "spherical", version, about = "Exact large-n solver for the Ohmic-dissipative spherical model")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file, or directory (existing, or ending in '/'). Stdout if absent.
    #[arg(long, short = 'o', global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// finite-m, continuum or radial.
    #[arg(long, global = true, value_parser = parse_engine)]
    engine: Option<Engine>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long = "d", global = true)]
    d: Option<f64>,
    #[arg(long = "K", global = true)]
    k: Option<f64>,
    #[arg(long = "Kperp", global = true)]
    kperp: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long = "h", global = true)]
    h: Option<f64>,
    #[arg(long = "M", global = true)]
    m: Option<usize>,

    #[arg(long = "A", global = true)]
    a: Option<f64>,
    #[arg(long = "B", global = true)]
    b: Option<f64>,
    #[arg(long = "J0", global = true)]
    j0: Option<f64>,
    #[arg(long = "h0", global = true)]
    h0: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Temporal kernel table S_nu, lambda_nu and the large-M check.
    Kernel,
    /// Solve the saddle-point constraint.
    Saddle,
    /// Critical K_c over an alpha sweep and the ln G_c slope.
    PhaseBoundary {
        /// alpha_min:alpha_max:points
        #[arg(long = "alpha-sweep", value_parser = parse_sweep)]
        alpha_sweep: Option<(f64, f64, usize)>,
    },
    /// Propagator G(r, rho) at the solved saddle.
    Correlator {
        #[arg(long = "r-range", value_parser = parse_range)]
        r_range: Option<(i64, i64)>,
        #[arg(long = "rho-range", value_parser = parse_range)]
        rho_range: Option<(i64, i64)>,
    },
    /// Imaginary-time tail against the asymptotic formulas.
    Tail {
        #[arg(long = "rho-range", value_parser = parse_range)]
        rho_range: Option<(i64, i64)>,
    },
    /// Closed-form and fitted critical exponents.
    Exponents,
    /// Run the brute-force referee chain.
    OracleCheck {
        /// Linear lattice size of the dense system.
        #[arg(long = "L")]
        l: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Saddle => "saddle",
            Command::PhaseBoundary { .. } => "phase-boundary",
            Command::Correlator { .. } => "correlator",
            Command::Tail { .. } => "tail",
            Command::Exponents => "exponents",
            Command::OracleCheck { .. } => "oracle-check",
        }
    }
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    s.parse::<Engine>().map_err(|e| e.to_string())
}

const DEFAULT_TOL: f64 = 1e-10;

struct Run {
    params: ParamSource,
    file: RunConfig,
    tol: f64,
    engine: Option<Engine>,
}

impl Run {
    fn meta(&self, command: &'static str, engine: Engine, extra: serde_json::Value) -> Meta {
        let mut config = json!({
            "params": self.params,
            "tol": self.tol,
        });
        if let (Some(obj), serde_json::Value::Object(more)) = (config.as_object_mut(), extra) {
            obj.extend(more);
        }
        Meta {
            command,
            version: env!("CARGO_PKG_VERSION"),
            engine: engine.name().into(),
            config,
        }
    }

    /// Commands built on the continuum integrals reject other engines.
    fn continuum_only(&self, command: &str) -> Result<Engine, CliError> {
        match self.engine {
            None | Some(Engine::Continuum) => Ok(Engine::Continuum),
            Some(e) => Err(CliError::Validation(format!("{command} runs on the continuum engine, not {}", e.name()))),
        }
    }
}

fn int_dim(d: Option<f64>) -> Result<usize, CliError> {
    let d = d.unwrap_or(1.0);
    if d >= 1.0 && d.fract() == 0.0 {
        Ok(d as usize)
    } else {
        Err(CliError::Validation(format!("d must be a positive integer here, got {d}")))
    }
}

fn dispatch(cmd: &Command, run: &Run, meta_slot: &mut Option<Meta>) -> Result<(Outputs, bool), CliError> {
    let tol = run.tol;
    let ok = |o: Outputs| Ok((o, true));
    match cmd {
        Command::Kernel => {
            let engine = run.engine.unwrap_or(Engine::FiniteM);
            let meta = meta_slot.insert(run.meta("kernel", engine, json!({})));
            let p = run.params.resolve(Engine::FiniteM)?;
            meta.config["classical"] = json!(p);
            ok(commands::kernel(&p, meta)?)
        }
        Command::Saddle => {
            let engine = run.engine.unwrap_or(Engine::FiniteM);
            let meta = meta_slot.insert(run.meta("saddle", engine, json!({})));
            let p = run.params.resolve(engine)?;
            meta.config["classical"] = json!(p);
            ok(commands::saddle(&p, engine, tol, meta)?)
        }
        Command::PhaseBoundary { alpha_sweep } => {
            let engine = run.continuum_only("phase-boundary")?;
            let sweep = alpha_sweep
                .or(run.file.alpha_sweep)
                .ok_or_else(|| CliError::Validation("missing --alpha-sweep".into()))?;
            let d = int_dim(run.params.d())?;
            let kperp = run
                .params
                .kperp()
                .ok_or_else(|| CliError::Validation("missing --Kperp".into()))?;
            let meta = meta_slot.insert(run.meta(
                "phase-boundary",
                engine,
                json!({"alpha_sweep": sweep, "d": d, "Kperp": kperp}),
            ));
            ok(commands::phase_boundary(d, kperp, sweep, tol, meta)?)
        }
        Command::Correlator { r_range, rho_range } => {
            let engine = run.engine.unwrap_or(Engine::FiniteM);
            let r_range = r_range.or(run.file.r_range).unwrap_or((0, 8));
            let rho_range = rho_range.or(run.file.rho_range).unwrap_or((0, 8));
            let meta = meta_slot.insert(run.meta(
                "correlator",
                engine,
                json!({"r_range": r_range, "rho_range": rho_range}),
            ));
            let p = run.params.resolve(engine)?;
            meta.config["classical"] = json!(p);
            ok(commands::correlator(&p, engine, tol, r_range, rho_range, meta)?)
        }
        Command::Tail { rho_range } => {
            let engine = run.continuum_only("tail")?;
            let rho_range = rho_range.or(run.file.rho_range);
            let meta = meta_slot.insert(run.meta("tail", engine, json!({"rho_range": rho_range})));
            let p = run.params.resolve(engine)?;
            meta.config["classical"] = json!(p);
            ok(commands::tail(&p, tol, rho_range, meta)?)
        }
        Command::Exponents => {
            let engine = run.continuum_only("exponents")?;
            let args = commands::ExponentArgs {
                d: int_dim(run.params.d())?,
                alpha: run.params.alpha().unwrap_or(0.5),
                kperp: run.params.kperp().unwrap_or(2.0),
                g_grid: run.file.g_grid.clone().unwrap_or_else(commands::default_g_grid),
                h_grid: run.file.h_grid.clone().unwrap_or_else(commands::default_h_grid),
                u_grid: run.file.u_grid.clone(),
                tol,
            };
            let meta = meta_slot.insert(run.meta(
                "exponents",
                engine,
                json!({
                    "d": args.d,
                    "alpha": args.alpha,
                    "Kperp": args.kperp,
                    "g_grid": args.g_grid,
                    "h_grid": args.h_grid,
                    "u_grid": args.u_grid,
                }),
            ));
            ok(commands::exponents(&args, meta)?)
        }
        Command::OracleCheck { l } => {
            let engine = run.engine.unwrap_or(Engine::FiniteM);
            let l = l.or(run.file.l).unwrap_or(commands::ORACLE_DEFAULT_L);
            let meta = meta_slot.insert(run.meta("oracle-check", engine, json!({"L": l})));
            let explicit = match &run.params {
                ParamSource::Classical(c) => c.k.is_some() || c.kperp.is_some() || c.m.is_some(),
                ParamSource::Quantum { .. } => true,
            };
            let p = if explicit {
                run.params.resolve(Engine::FiniteM)?
            } else {
                commands::oracle_defaults()
            };
            meta.config["classical"] = json!(p);
            commands::oracle_check(&p, l, meta)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = cli.command.name();
    let file = match &cli.global.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    };
    let out = cli.global.out.clone().or_else(|| file.as_ref().ok().and_then(|f| f.out.clone()));
    let sink = Sink { out, command };
    let mut meta = None;

    let result = (|| {
        let file = file?;
        let g = &cli.global;
        let tol = g.tol.or(file.tol).unwrap_or(DEFAULT_TOL);
        if !(tol > 0.0) {
            return Err(CliError::Validation(format!("tolerance must be positive, got {tol}")));
        }
        if let Some(n) = g.threads.or(file.threads) {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Validation(e.to_string()))?;
        }
        let flags_c = ClassicalBlock { d: g.d, k: g.k, kperp: g.kperp, alpha: g.alpha, h: g.h, m: g.m };
        let flags_q = QuantumBlock { a: g.a, b: g.b, j0: g.j0, h0: g.h0, beta: g.beta, m: None };
        let run = Run {
            params: ParamSource::merge(&file, flags_c, flags_q)?,
            engine: g.engine.or(file.engine),
            file,
            tol,
        };
        let (outputs, pass) = dispatch(&cli.command, &run, &mut meta)?;
        sink.emit(&outputs)?;
        Ok(pass)
    })();

    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: {command}: checks failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            sink.emit_failure(meta.as_ref(), &e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
