use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hpsem::problems::catalog;
use hpsem::study::{self, StudyConfig, StudyRow};
use hpsem::Error;

#[derive(Parser)]
#[command(name = "hpsem", version, about = "Least-squares h-p spectral element solver and convergence-study harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Study configuration (flat TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Relative preconditioned residual at which PCG stops.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem at one mesh and degree.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Catalog problem, overriding the configuration.
        #[arg(long)]
        problem: Option<String>,
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long)]
        layers: Option<usize>,
        /// Write the residual history next to the report.
        #[arg(long)]
        history: bool,
    },
    /// Run the p-, h- or hp-sweep described by the configuration.
    Study {
        #[command(flatten)]
        common: Common,
    },
    /// Condition numbers of the preconditioned single-element form.
    ConditionStudy {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Degrees to evaluate.
        #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 6, 8, 10, 12, 14, 16])]
        degrees: Vec<usize>,
    },
    /// Write the element table of the configured mesh as CSV.
    MeshDump {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        problem: Option<String>,
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long)]
        layers: Option<usize>,
    },
    /// List the catalog problems.
    List,
}

/// Any failure before or outside the solves; the process exits with 1.
struct Failure(String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(e.to_string())
    }
}

fn load(
    common: &Common,
    problem: Option<String>,
    degree: Option<usize>,
    layers: Option<usize>,
) -> Result<StudyConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => StudyConfig::from_file(p)?,
        None => StudyConfig::default(),
    };
    if let Some(p) = problem {
        cfg.problem = p;
    }
    if let Some(d) = degree {
        cfg.degree = d;
    }
    if let Some(n) = layers {
        cfg.layers = n;
    }
    if let Some(t) = common.tol {
        cfg.tol = t;
    }
    if let Some(m) = common.max_iter {
        cfg.max_iter = m;
    }
    if let Some(o) = &common.out {
        cfg.output = Some(o.clone());
    }
    Ok(cfg)
}

fn print_rows(rows: &[StudyRow]) {
    println!(
        "{:>8} {:>4} {:>4} {:>8} {:>6} {:>10} {:>14} {:>12} {:>9}",
        "param", "W", "N", "DOF", "iter", "status", "error %", "functional", "time s"
    );
    for r in rows {
        println!(
            "{:>8} {:>4} {:>4} {:>8} {:>6} {:>10} {:>14} {:>12.4e} {:>9.3}",
            r.point.param,
            r.point.degree,
            r.point.layers,
            r.dof,
            r.iterations,
            r.status.name(),
            study::display_sci(r.rel_error_percent),
            r.functional_final,
            r.wall_time
        );
    }
}

fn finish(rows: &[StudyRow]) -> ExitCode {
    if rows.iter().all(|r| r.converged()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn write_file(dir: &Path, name: &str, f: impl FnOnce(std::fs::File) -> hpsem::Result<()>) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure(e.to_string()))?;
    let path = dir.join(name);
    f(std::fs::File::create(&path).map_err(|e| Failure(e.to_string()))?)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Solve { common, problem, degree, layers, history } => {
            let mut cfg = load(&common, problem, degree, layers)?;
            cfg.history |= history;
            cfg.validate(false)?;
            let p = catalog(&cfg.problem)?;
            let row = study::solve_point(&cfg, &p, &cfg.single_point(), cfg.sweep)?;
            print_rows(std::slice::from_ref(&row));
            if let Some(dir) = &cfg.output {
                write_file(dir, "solve.csv", |f| study::write_study_csv(std::slice::from_ref(&row), f))?;
                if cfg.history {
                    write_file(dir, "history.csv", |f| study::write_history_csv(&row.residual_history, f))?;
                }
            }
            Ok(finish(std::slice::from_ref(&row)))
        }
        Command::Study { common } => {
            if common.config.is_none() {
                return Err(Failure("study needs --config".into()));
            }
            let cfg = load(&common, None, None, None)?;
            let rows = study::run_study(&cfg)?;
            print_rows(&rows);
            if let Some(dir) = &cfg.output {
                for p in study::write_study_outputs(&cfg, &rows, dir)? {
                    eprintln!("wrote {}", p.display());
                }
            }
            Ok(finish(&rows))
        }
        Command::ConditionStudy { out, degrees } => {
            let rows = study::condition_rows(&degrees).map_err(|e| Failure(e.to_string()))?;
            match out {
                Some(dir) => write_file(&dir, "condition.csv", |f| study::write_condition_csv(&rows, f))?,
                None => study::write_condition_csv(&rows, std::io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::MeshDump { common, problem, degree, layers } => {
            let cfg = load(&common, problem, degree, layers)?;
            cfg.validate(false)?;
            let mesh = cfg.mesh(&cfg.single_point())?;
            match &cfg.output {
                Some(dir) => write_file(dir, "mesh.csv", |f| mesh.write_csv(f))?,
                None => mesh.write_csv(std::io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::List => {
            for name in hpsem::problems::CATALOG {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(Failure(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
