use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use hp_core::harness::{self, Outcome};
use hp_core::model::ModelProblem;
use hp_core::rbound::NonRboundConfig;
use serde::de::DeserializeOwned;
use serde_json::json;

const BUNDLED: [(&str, &str); 3] = [
    ("dirichlet_laplacian", include_str!("../problems/dirichlet_laplacian.json")),
    ("neumann_laplacian", include_str!("../problems/neumann_laplacian.json")),
    ("clamped_bilaplacian", include_str!("../problems/clamped_bilaplacian.json")),
];

#[derive(Parser)]
#[command(name = "hp", version, about = "Half-space parameter-elliptic solvers and estimate checks")]
struct Cli {
    /// Problem JSON file or bundled name (dirichlet_laplacian, neumann_laplacian, clamped_bilaplacian).
    #[arg(long, global = true, default_value = "dirichlet_laplacian")]
    problem: String,
    /// JSON parameter block for the subcommand; missing fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "hp-out")]
    out: PathBuf,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    plot: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, env = "HP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parameter-ellipticity and Lopatinskii-Shapiro check over a sector sample.
    CheckLs,
    /// Evaluate a Poisson operator and compare with the root-basis oracle.
    PoissonEval,
    /// Fit the decay exponent of the Poisson operator norm in |lambda|.
    DecaySweep,
    /// Fit the blow-up rate of the solution norm as x_n -> 0.
    SingularitySweep,
    /// Weighted Hilbert-type operator norm.
    HardyNorm,
    /// Parameter-dependent norm equivalence and mixed lifting.
    NormCheck,
    /// Half-space resolvent convergence, traces and uniform bound.
    ResolventTest,
    /// Contour-quadrature semigroup checks.
    SemigroupTest,
    /// Time-periodic boundary problem against the single-mode closed form.
    ParabolicSolve,
    /// Initial-boundary value problem: images, Duhamel and splitting checks.
    IbvpSolve,
    /// Rademacher ratio growth for the resolvent family.
    RboundSim {
        #[arg(long)]
        p: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CheckLs => "check-ls",
            Command::PoissonEval => "poisson-eval",
            Command::DecaySweep => "decay-sweep",
            Command::SingularitySweep => "singularity-sweep",
            Command::HardyNorm => "hardy-norm",
            Command::NormCheck => "norm-check",
            Command::ResolventTest => "resolvent-test",
            Command::SemigroupTest => "semigroup-test",
            Command::ParabolicSolve => "parabolic-solve",
            Command::IbvpSolve => "ibvp-solve",
            Command::RboundSim { .. } => "rbound-sim",
        }
    }

    fn uses_problem(&self) -> bool {
        !matches!(self, Command::HardyNorm | Command::NormCheck | Command::RboundSim { .. })
    }
}

enum Failure {
    Input(String),
    Compute(hp_core::Error),
}

impl From<hp_core::Error> for Failure {
    fn from(e: hp_core::Error) -> Self {
        use hp_core::Error::*;
        match e {
            InvalidProblem(_) | InvalidArgument(_) | Inadmissible { .. } | Contour(_) | Json(_) | Io(_) => {
                Failure::Input(e.to_string())
            }
            other => Failure::Compute(other),
        }
    }
}

fn parse_json<T: DeserializeOwned>(text: &str, source: &str) -> Result<T, Failure> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Failure::Input(format!("{source}: field `{field}`: {}", e.inner()))
    })
}

fn load_problem(arg: &str) -> Result<ModelProblem, Failure> {
    let name = arg.strip_suffix(".json").unwrap_or(arg);
    if let Some((_, text)) = BUNDLED.iter().find(|(n, _)| *n == name) {
        if !Path::new(arg).exists() {
            return parse_json(text, arg);
        }
    }
    let text = fs::read_to_string(arg).map_err(|e| Failure::Input(format!("{arg}: {e}")))?;
    parse_json(&text, arg)
}

fn load_config<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T, Failure> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
            parse_json(&text, &p.display().to_string())
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let problem = if cli.command.uses_problem() { Some(load_problem(&cli.problem)?) } else { None };
    let p = || problem.as_ref().expect("loaded above");
    let cfg = &cli.config;
    let out = match &cli.command {
        Command::CheckLs => harness::run_check_ls(p(), &load_config(cfg)?)?,
        Command::PoissonEval => harness::run_poisson_eval(p(), &load_config(cfg)?)?,
        Command::DecaySweep => harness::run_decay_sweep(p(), &load_config(cfg)?)?,
        Command::SingularitySweep => harness::run_singularity_sweep(p(), &load_config(cfg)?)?,
        Command::HardyNorm => harness::run_hardy_norm(&load_config(cfg)?)?,
        Command::NormCheck => {
            let mut c: harness::NormCheckConfig = load_config(cfg)?;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            harness::run_norm_check(&c)?
        }
        Command::ResolventTest => harness::run_resolvent_test(p(), &load_config(cfg)?)?,
        Command::SemigroupTest => harness::run_semigroup_test(p(), &load_config(cfg)?)?,
        Command::ParabolicSolve => harness::run_parabolic_solve(p(), &load_config(cfg)?)?,
        Command::IbvpSolve => harness::run_ibvp_solve(p(), &load_config(cfg)?)?,
        Command::RboundSim { p: pp } => {
            let mut c: NonRboundConfig = load_config(cfg)?;
            if let Some(v) = pp {
                c.p = *v;
            }
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            harness::run_rbound_sim(&c)?
        }
    };
    Ok(out)
}

fn write_csv(path: &Path, table: &hp_core::report::Table) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()
}

fn write_artifacts(cli: &Cli, out: &Outcome) -> std::io::Result<()> {
    fs::create_dir_all(&cli.out)?;
    for (name, table) in &out.tables {
        write_csv(&cli.out.join(format!("{name}.csv")), table)?;
    }
    let problem = if cli.command.uses_problem() { json!(cli.problem) } else { json!(null) };
    let summary = json!({ "command": out.command, "problem": problem, "pass": out.pass, "results": out.summary });
    fs::write(cli.out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix": stamp,
        "command": out.command,
        "problem": problem,
        "config": cli.config.as_ref().map(|p| p.display().to_string()),
        "seed": cli.seed,
        "threads": rayon::current_num_threads(),
    });
    fs::write(cli.out.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    if cli.plot {
        for (name, plot) in &out.plots {
            let Some(svg) = plot.to_svg() else {
                eprintln!("warning: plot {name} has no finite points");
                continue;
            };
            if let Err(e) = fs::write(cli.out.join(format!("{name}.svg")), svg) {
                eprintln!("warning: could not write plot {name}: {e}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: {e}");
        }
    }
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
        Err(Failure::Compute(e)) => {
            eprintln!("{}: FAIL: {e}", cli.command.name());
            return ExitCode::from(2);
        }
    };
    if let Err(e) = write_artifacts(&cli, &outcome) {
        eprintln!("error: writing {}: {e}", cli.out.display());
        return ExitCode::from(1);
    }
    println!("{}", serde_json::to_string_pretty(&outcome.summary).unwrap_or_default());
    println!("{}: {}", outcome.command, if outcome.pass { "PASS" } else { "FAIL" });
    if outcome.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
