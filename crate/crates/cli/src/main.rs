use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};
use varp_stokes::config::MAX_LEVEL;
use varp_stokes::reference::{self, TableCheck};
use varp_stokes::report::matrix_markdown;
use varp_stokes::{run_study_with, verify, ConvergenceReport, Error, ExperimentConfig, MatrixSpec, OutputFormat, RunEvent};

const EXIT_IO: u8 = 1;
const EXIT_TABLES: u8 = 4;

#[derive(Parser)]
#[command(name = "varp-stokes", version, about = "Convergence studies for the unsteady p(t,x)-Stokes equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one manufactured-solution study over levels 0..=max_level.
    Study(StudyArgs),
    /// Run a grid of studies and print tables in the published layout.
    Matrix(MatrixArgs),
    /// Run the seeded property suites.
    Verify(VerifyArgs),
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    p_minus: Option<f64>,
    #[arg(long)]
    p_plus: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    case: Option<u32>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    nu0: Option<f64>,
    #[arg(long)]
    max_level: Option<usize>,
    /// Any configuration key, as KEY=VALUE; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    fn pairs(&self) -> Result<Vec<(String, String)>, Error> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("p_minus", self.p_minus.map(|v| v.to_string()));
        push("p_plus", self.p_plus.map(|v| v.to_string()));
        push("alpha", self.alpha.map(|v| v.to_string()));
        push("beta", self.beta.map(|v| v.to_string()));
        push("gamma", self.gamma.map(|v| v.to_string()));
        push("case", self.case.map(|v| v.to_string()));
        push("delta", self.delta.map(|v| v.to_string()));
        push("nu0", self.nu0.map(|v| v.to_string()));
        push("max_level", self.max_level.map(|v| v.to_string()));
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            out.push((k.to_string(), v.to_string()));
        }
        Ok(out)
    }
}

#[derive(Args)]
struct StudyArgs {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    format: Option<OutputFormat>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Compare EOCs with the published tables; exit 4 if any differs by more than TOL.
    #[arg(long, value_name = "TOL")]
    check_tables: Option<f64>,
    /// Write progress events as JSON lines.
    #[arg(long, value_name = "PATH")]
    run_log: Option<PathBuf>,
}

#[derive(Args)]
struct MatrixArgs {
    /// Matrix file: comma lists for p_minus, alpha, case; other keys set the base config.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    p_minus: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    cases: Option<Vec<u32>>,
    #[arg(long)]
    max_level: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value = "md")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_name = "TOL")]
    check_tables: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = ExperimentConfig::default().seed)]
    seed: u64,
    /// Print the results as JSON.
    #[arg(long)]
    json: bool,
}

/// A failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: EXIT_IO,
            message: e.to_string(),
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure {
            code: EXIT_IO,
            message: format!("cannot write '{}': {e}", p.display()),
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn table_failures(report: &ConvergenceReport, tol: f64) -> Vec<TableCheck> {
    let checks = reference::check_report(report, tol);
    if checks.is_empty() {
        warn!("{}: no published values to compare against", report.config.label());
    }
    for c in &checks {
        let line = format!(
            "{} EOC({}) n={}: computed {:.3}, published {:.3}",
            report.config.label(),
            c.quantity,
            c.n,
            c.computed,
            c.published
        );
        if c.within {
            info!("{line}");
        } else {
            eprintln!("table mismatch: {line} (tolerance {tol})");
        }
    }
    checks.into_iter().filter(|c| !c.within).collect()
}

fn study_config(args: &StudyArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    for (k, v) in args.overrides.pairs()? {
        cfg.set(&k, &v)?;
    }
    if let Some(f) = args.format {
        cfg.output.format = f;
    }
    if let Some(p) = &args.out {
        cfg.output.path = Some(p.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_study_command(args: StudyArgs) -> Result<(), Failure> {
    let cfg = study_config(&args)?;
    let mut log_file = match &args.run_log {
        Some(p) => Some(BufWriter::new(File::create(p)?)),
        None => None,
    };
    let mut log_error = None;
    let mut on_event = |event: &RunEvent| {
        if let RunEvent::LevelStart { level, unknowns, steps } = event {
            info!("level {level}: {unknowns} unknowns, {steps} steps");
        }
        if let Some(w) = log_file.as_mut() {
            let line = serde_json::to_string(event).map_err(std::io::Error::from);
            if let Err(e) = line.and_then(|l| writeln!(w, "{l}")) {
                log_error.get_or_insert(e);
            }
        }
    };
    let report = run_study_with(&cfg, &mut on_event)?;
    if let Some(mut w) = log_file {
        w.flush()?;
    }
    if let Some(e) = log_error {
        return Err(e.into());
    }
    write_output(cfg.output.path.as_deref(), &report.render(cfg.output.format)?)?;
    if let Some(f) = &report.failure {
        return Err(Failure {
            code: f.exit_code as u8,
            message: format!("level {} failed: {}", f.level, f.message),
        });
    }
    if let Some(tol) = args.check_tables {
        let bad = table_failures(&report, tol);
        if !bad.is_empty() {
            return Err(Failure {
                code: EXIT_TABLES,
                message: format!("{} EOC(s) outside tolerance {tol} of the published tables", bad.len()),
            });
        }
    }
    Ok(())
}

fn run_matrix_command(args: MatrixArgs) -> Result<(), Failure> {
    let mut spec = match &args.matrix {
        Some(p) => MatrixSpec::from_file(p)?,
        None => MatrixSpec::default(),
    };
    if let Some(v) = args.p_minus {
        spec.p_minus = v;
    }
    if let Some(v) = args.alpha {
        spec.alpha = v;
    }
    if let Some(v) = args.cases {
        spec.cases = v.into_iter().map(varp_stokes::mms::PressureCase::from_index).collect::<Result<_, _>>()?;
    }
    if let Some(l) = args.max_level {
        if l > MAX_LEVEL {
            return Err(Error::Config(format!("max_level must be <= {MAX_LEVEL}, got {l}")).into());
        }
        spec.base.max_level = l;
    }
    if let Some(d) = args.delta {
        spec.base.delta = d;
    }
    let (cells, skipped) = spec.cells();
    for (cfg, reason) in &skipped {
        info!("skipping {}: {reason}", cfg.label());
    }
    let mut reports = Vec::new();
    let mut solver_failure = None;
    for cfg in cells {
        info!("running {}", cfg.label());
        let report = varp_stokes::run_study(&cfg)?;
        if let Some(f) = &report.failure {
            error!("{}: level {} failed: {}", cfg.label(), f.level, f.message);
            solver_failure.get_or_insert(f.exit_code as u8);
        }
        reports.push(report);
    }
    let text = match args.format {
        OutputFormat::Md => matrix_markdown(&reports, &spec.alpha, &spec.p_minus, &spec.cases),
        OutputFormat::Json => serde_json::to_string_pretty(&reports).map_err(Error::from)? + "\n",
        OutputFormat::Csv => reports
            .iter()
            .map(|r| format!("# {}\n{}", r.config.label(), r.to_csv()))
            .collect::<Vec<_>>()
            .join("\n"),
    };
    write_output(args.out.as_deref(), &text)?;
    if let Some(code) = solver_failure {
        return Err(Failure {
            code,
            message: "at least one study failed".into(),
        });
    }
    if let Some(tol) = args.check_tables {
        let bad: usize = reports.iter().map(|r| table_failures(r, tol).len()).sum();
        if bad > 0 {
            return Err(Failure {
                code: EXIT_TABLES,
                message: format!("{bad} EOC(s) outside tolerance {tol} of the published tables"),
            });
        }
    }
    Ok(())
}

fn run_verify_command(args: VerifyArgs) -> Result<(), Failure> {
    let checks = verify::run_all(args.seed);
    let text = if args.json {
        serde_json::to_string_pretty(&checks).map_err(Error::from)? + "\n"
    } else {
        checks
            .iter()
            .map(|c| format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect()
    };
    write_output(None, &text)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure {
            code: EXIT_TABLES,
            message: format!("{failed} property suite(s) failed"),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Study(a) => run_study_command(a),
        Command::Matrix(a) => run_matrix_command(a),
        Command::Verify(a) => run_verify_command(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
