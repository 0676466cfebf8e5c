use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zoprox::harness::{parse_sizes, run_experiment, ExperimentConfig, ExperimentKind};
use zoprox::Error;

#[derive(Parser, Debug)]
#[command(name = "zoprox", version, about = "Zeroth-order proximal methods: experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convergence profiles of all solvers on random phase retrieval instances.
    PhaseRetrieval(Common),
    /// Single against double Gaussian smoothing over several radius pairs.
    SmoothingSweep(Common),
    /// Tune the pADMM penalty on a training family of PDE problems.
    Tune(Common),
    /// Compare the tuned penalty with fixed penalties on holdout problems.
    GridEval(Common),
    /// Rate of the Moreau envelope gradient on a weakly convex test problem.
    MoreauCheck(Common),
    /// Scaled-down run of every experiment, checked for rerun determinism.
    Selftest(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Output root; files go to <out>/<experiment>/.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `10x30,20x45` for (d, m) pairs, or `9,17,33` for PDE grid sizes.
    #[arg(long)]
    sizes: Option<String>,
    /// Comma-separated solver names.
    #[arg(long, value_delimiter = ',')]
    solvers: Option<Vec<String>>,
    /// `poisson` or `convdiff` for tune and grid-eval.
    #[arg(long)]
    equation: Option<String>,
    /// Also write SVG charts.
    #[arg(long)]
    svg: bool,
}

fn grid_sizes(s: &str) -> Result<Vec<usize>, Error> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|e| Error::Parse(format!("grid size '{v}': {e}")))
        })
        .collect()
}

fn build_config(kind: ExperimentKind, c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::for_experiment(kind),
    };
    cfg.experiment = kind;
    if let Some(e) = &c.equation {
        cfg.tuner.equation = Some(e.clone());
    }
    if kind == ExperimentKind::TunePoisson && cfg.equation()? == zoprox::pde::Equation::ConvectionDiffusion {
        cfg.experiment = ExperimentKind::TuneConvdiff;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(r) = c.replicates {
        cfg.replicates = r;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = &c.solvers {
        cfg.solvers = s.clone();
    }
    if c.svg {
        cfg.svg = true;
    }
    if let Some(s) = &c.sizes {
        if s.contains('x') {
            let pairs = parse_sizes(s)?;
            if kind == ExperimentKind::SmoothingSweep {
                cfg.smoothing_sweep.size = pairs[0];
            } else {
                cfg.phase_retrieval.sizes = pairs;
            }
        } else {
            let sizes = grid_sizes(s)?;
            cfg.tuner.sizes = Some(sizes.clone());
            cfg.tuner.holdout_sizes = Some(sizes);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), Error> {
    let (kind, common) = match &cli.command {
        Command::PhaseRetrieval(c) => (ExperimentKind::PhaseRetrieval, c),
        Command::SmoothingSweep(c) => (ExperimentKind::SmoothingSweep, c),
        Command::Tune(c) => (ExperimentKind::TunePoisson, c),
        Command::GridEval(c) => (ExperimentKind::GridEval, c),
        Command::MoreauCheck(c) => (ExperimentKind::MoreauCheck, c),
        Command::Selftest(c) => (ExperimentKind::Selftest, c),
    };
    let cfg = build_config(kind, common)?;
    let root = cfg.output_dir.clone();
    let out = run_experiment(&cfg, &root)?;
    let dir = out.write(&root)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    for (k, v) in &out.manifest.entries {
        println!("{k} = {v}");
    }
    println!("wrote {} files to {}", out.files.len() + 1, dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: kind=usage message={first}");
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: kind={} message={}", e.kind(), e.to_string().replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
