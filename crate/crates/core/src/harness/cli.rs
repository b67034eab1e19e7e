//! `fracwalk solve | converge | check`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::checks::{run_suite, Suite};
use super::config::{load, Format, Method, RunConfig, ValidatedRun};
use super::output::{field_csv, sweep_csv, sweep_svg};
use crate::montecarlo::{convergence_sweep, McError};
use crate::symbols::SolutionField;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fracwalk", version, about = "Random-walk representations of fractional high-order heat-type equations")]
pub struct Cli {
    /// Overrides `estimator.seed` (and seeds the Monte Carlo checks).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for Monte Carlo; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Overrides `output.directory`.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one configured problem and write the field.
    Solve { config: PathBuf },
    /// Sweep `n` (and `m`) against the reference solution.
    Converge { config: PathBuf },
    /// Run an identity battery.
    Check {
        #[arg(value_enum)]
        suite: Suite,
    },
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

fn numerical(op: &str, e: McError) -> Failure {
    Failure::Numerical(format!("{op}: {e}"))
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure::Numerical(format!("writing {}: {e}", path.display()))
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            eprintln!("config error: --workers must be at least 1");
            return EXIT_CONFIG;
        }
        builder = builder.num_threads(w);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("numerical error: thread pool: {e}");
            return EXIT_NUMERICAL;
        }
    };
    pool.install(|| dispatch(&cli))
}

fn dispatch(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Solve { config } => solve(cli, config).map(|_| EXIT_OK),
        Command::Converge { config } => converge(cli, config).map(|_| EXIT_OK),
        Command::Check { suite } => check(cli, *suite),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{f}");
            f.code()
        }
    }
}

struct Loaded {
    text: String,
    config: RunConfig,
    run: ValidatedRun,
    out_dir: PathBuf,
    stem: String,
}

fn load_config(cli: &Cli, path: &Path) -> Result<Loaded, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("reading {}: {e}", path.display())))?;
    let (config, mut run) = load(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if let Some(seed) = cli.seed {
        run.estimator.seed = seed;
    }
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from(&run.directory));
    let stem = run.stem.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    });
    Ok(Loaded {
        text,
        config,
        run,
        out_dir,
        stem,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn prepare_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn sidecar(cli: &Cli, command: &str, l: &Loaded, artifacts: &[String], wall: f64, extra: serde_json::Value) -> serde_json::Value {
    json!({
        "tool": "fracwalk",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_sha256": hex(&Sha256::digest(l.text.as_bytes())),
        "config": l.config,
        "seed": l.run.estimator.seed,
        "seed_override": cli.seed,
        "samples": l.run.estimator.samples(),
        "chunk_size": l.run.estimator.chunk_size(),
        "variant": l.run.estimator.variant,
        "workers": cli.workers,
        "artifacts": artifacts,
        "wall_time_seconds": wall,
        "result": extra,
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// The field a `solve` config asks for.
pub fn solve_field(run: &ValidatedRun) -> Result<SolutionField, McError> {
    match run.method {
        Method::Reference => run.problem.reference(),
        Method::MonteCarlo => run.problem.estimate(run.n.expect("validated"), run.m, &run.estimator),
    }
}

fn solve(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let l = load_config(cli, path)?;
    let start = Instant::now();
    let op = match l.run.method {
        Method::Reference => "solve (reference)",
        Method::MonteCarlo => "solve (monte_carlo)",
    };
    let field = solve_field(&l.run).map_err(|e| numerical(op, e))?;
    let wall = start.elapsed().as_secs_f64();
    if l.run.formats.is_empty() {
        return Ok(());
    }
    prepare_dir(&l.out_dir)?;
    let mut artifacts = Vec::new();
    if l.run.formats.contains(&Format::Csv) {
        let name = format!("{}.csv", l.stem);
        write(&l.out_dir.join(&name), &field_csv(&field))?;
        artifacts.push(name);
    }
    let meta = json!({ "t": field.t, "points": field.x_grid.len(), "meta": field.meta });
    let doc = sidecar(cli, "solve", &l, &artifacts, wall, meta);
    write(&l.out_dir.join(format!("{}.json", l.stem)), &pretty(&doc))?;
    println!("solve: wrote {} point(s) to {}", field.x_grid.len(), l.out_dir.display());
    Ok(())
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn converge(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let l = load_config(cli, path)?;
    let (ns, ms) = l
        .run
        .sweep
        .clone()
        .ok_or_else(|| Failure::Config(format!("{}: sweep: section required for converge", path.display())))?;
    let start = Instant::now();
    let table = convergence_sweep(&l.run.problem, &ns, &ms, &l.run.estimator).map_err(|e| numerical("convergence_sweep", e))?;
    let wall = start.elapsed().as_secs_f64();
    if l.run.formats.is_empty() {
        return Ok(());
    }
    prepare_dir(&l.out_dir)?;
    let stem = format!("{}_converge", l.stem);
    let mut artifacts = Vec::new();
    if l.run.formats.contains(&Format::Csv) {
        let name = format!("{stem}.csv");
        write(&l.out_dir.join(&name), &sweep_csv(&table))?;
        artifacts.push(name);
    }
    if l.run.formats.contains(&Format::Svg) {
        let name = format!("{stem}.svg");
        write(&l.out_dir.join(&name), &sweep_svg(&table, &format!("{}: max error against n", l.stem)))?;
        artifacts.push(name);
    }
    let doc = sidecar(cli, "converge", &l, &artifacts, wall, json!(table));
    write(&l.out_dir.join(format!("{stem}.json")), &pretty(&doc))?;
    match table.slope {
        Some(s) => println!("converge: {} row(s), slope {s:.4}", table.rows.len()),
        None => println!("converge: {} row(s), slope absent", table.rows.len()),
    }
    Ok(())
}

fn check(cli: &Cli, suite: Suite) -> Result<i32, Failure> {
    let seed = cli.seed.unwrap_or(0);
    let report = run_suite(suite, seed);
    for c in &report.checks {
        let status = if c.passed { "pass" } else { "FAIL" };
        match &c.error {
            Some(e) => println!("{status} {} error: {e}", c.name),
            None => println!("{status} {} residual {:e} (tol {:e})", c.name, c.residual, c.tolerance),
        }
    }
    let dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from(super::config::DEFAULT_OUT_DIR));
    prepare_dir(&dir)?;
    let doc = json!({
        "tool": "fracwalk",
        "version": env!("CARGO_PKG_VERSION"),
        "report": report,
    });
    let path = dir.join(format!("check_{}.json", suite.name()));
    write(&path, &pretty(&doc))?;
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    println!("check {}: {} passed, {failed} failed", suite.name(), report.checks.len() - failed);
    Ok(if report.passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}
