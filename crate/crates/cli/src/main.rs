//! `sl1`: batch front end for instance generation, solving, condition
//! estimation, proof tracing and grid experiments.
//!
//! Every command reads an optional JSON config (`--config`), applies flag
//! overrides on top and echoes the resolved config into its output. Exit
//! codes: 0 success, 2 invalid arguments, 3 I/O or corrupt input, 4 solver
//! did not reach a feasible point.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sl1_core::generators::{Amplitude, NoiseSpec, SignalSpec};
use sl1_core::solver::SolverMethod;

use config::{CliResult, ConditionsConfig, Failure, GenConfig, GridConfig, SolveConfig, TraceConfig};

#[derive(Parser)]
#[command(
    name = "sl1",
    version,
    about = "Sparse recovery under sparse corruption, via ℓ1-fidelity basis pursuit"
)]
struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "SL1_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw an instance and write it as a bundle directory.
    Gen(GenArgs),
    /// Solve the program of a bundle.
    Solve(SolveArgs),
    /// Estimate the deviation constants of a matrix.
    Conditions(ConditionsArgs),
    /// Solve a bundle and record every step of the error bound argument.
    Trace(TraceArgs),
    /// Run a grid of trials and summarize them per cell.
    Grid(GridArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    LpExact,
    FirstOrder,
}

impl From<Method> for SolverMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::LpExact => SolverMethod::LpExact,
            Method::FirstOrder => SolverMethod::FirstOrder,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AmplitudeArg {
    Unit,
    Gaussian,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    feasibility_tol: Option<f64>,
    #[arg(long)]
    objective_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

impl SolverArgs {
    fn apply(&self, s: &mut sl1_core::SolverConfig) {
        if let Some(m) = self.method {
            s.method = m.into();
        }
        if let Some(t) = self.feasibility_tol {
            s.feasibility_tol = t;
        }
        if let Some(t) = self.objective_tol {
            s.objective_tol = t;
        }
        if let Some(n) = self.max_iters {
            s.max_iters = n;
        }
    }
}

#[derive(Args)]
struct BudgetArgs {
    /// Random supports drawn when enumeration is too expensive.
    #[arg(long)]
    samples: Option<usize>,
    /// Starting directions per support.
    #[arg(long)]
    restarts: Option<usize>,
    /// Enumerate all supports when there are at most this many.
    #[arg(long)]
    exhaustive_cap: Option<u64>,
}

impl BudgetArgs {
    fn apply(&self, b: &mut sl1_core::conditions::SamplingBudget) {
        if let Some(v) = self.samples {
            b.samples = v;
        }
        if let Some(v) = self.restarts {
            b.restarts = v;
        }
        if let Some(v) = self.exhaustive_cap {
            b.exhaustive_cap = v;
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundle directory, created if missing.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(short = 'N', long = "n")]
    n: Option<usize>,
    #[arg(short = 'M', long = "m")]
    m: Option<usize>,
    #[arg(short = 'K', long = "k")]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    stream: Option<u64>,
    /// Sparse signal amplitudes.
    #[arg(long, value_enum, conflicts_with = "decay")]
    amplitude: Option<AmplitudeArg>,
    /// Compressible signal with entries decaying as i^-decay.
    #[arg(long)]
    decay: Option<f64>,
    /// Number of corrupted measurements.
    #[arg(long, conflicts_with_all = ["noiseless", "laplacian"])]
    corrupt: Option<usize>,
    /// ℓ1 norm of the sparse corruption, also the budget ε.
    #[arg(long, requires = "corrupt")]
    noise_l1: Option<f64>,
    /// Dense Laplace noise with ε at this quantile of its ℓ1 norm.
    #[arg(long, conflicts_with = "noiseless")]
    laplacian: Option<f64>,
    #[arg(long)]
    noiseless: bool,
}

impl GenArgs {
    fn resolve(&self) -> CliResult<GenConfig> {
        let mut c: GenConfig = config::load(self.config.as_deref())?;
        set(&mut c.out, self.out.clone());
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.m {
            c.m = v;
        }
        if let Some(v) = self.k {
            c.k = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.stream {
            c.stream = v;
        }
        if let Some(a) = self.amplitude {
            let amplitude = match a {
                AmplitudeArg::Unit => Amplitude::Unit,
                AmplitudeArg::Gaussian => Amplitude::Gaussian,
            };
            c.signal = SignalSpec::Sparse { amplitude };
        }
        if let Some(decay) = self.decay {
            c.signal = SignalSpec::Compressible { decay };
        }
        if let Some(count) = self.corrupt {
            let epsilon = match (self.noise_l1, c.noise) {
                (Some(e), _) | (None, NoiseSpec::Sparse { epsilon: e, .. }) => e,
                _ => 1.0,
            };
            c.noise = NoiseSpec::Sparse { count, epsilon };
        }
        if let Some(quantile) = self.laplacian {
            c.noise = NoiseSpec::Laplacian { quantile };
        }
        if self.noiseless {
            c.noise = NoiseSpec::None;
        }
        Ok(c)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Result file; `result.json` in the bundle by default.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct ConditionsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Matrix in the binary format, or CSV when the name ends in `.csv`.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(short = 'K', long = "k")]
    k: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    budget: BudgetArgs,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Trace file; `trace.json` in the bundle by default.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Estimate the deviation constants to evaluate the conditional steps.
    #[arg(long)]
    estimate: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    budget: BudgetArgs,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(short = 'N', long = "n")]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    ms: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    /// Corrupted measurements per cell; 0 for noiseless cells.
    #[arg(long, value_delimiter = ',')]
    corrupt: Option<Vec<usize>>,
    #[arg(long)]
    noise_l1: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Record wall-clock time per trial; makes outputs non-reproducible.
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn configure_threads(threads: Option<usize>) -> CliResult<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Failure::invalid("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::invalid(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Gen(a) => commands::gen(&mut a.resolve()?),
        Command::Solve(a) => {
            let mut c: SolveConfig = config::load(a.config.as_deref())?;
            set(&mut c.bundle, a.bundle);
            set(&mut c.out, a.out);
            a.solver.apply(&mut c.solver);
            commands::solve_cmd(&mut c)
        }
        Command::Conditions(a) => {
            let mut c: ConditionsConfig = config::load(a.config.as_deref())?;
            set(&mut c.matrix, a.matrix);
            set(&mut c.out, a.out);
            set(&mut c.nu, a.nu);
            if let Some(k) = a.k {
                c.k = k;
            }
            if let Some(s) = a.seed {
                c.seed = s;
            }
            a.budget.apply(&mut c.budget);
            commands::conditions(&mut c)
        }
        Command::Trace(a) => {
            let mut c: TraceConfig = config::load(a.config.as_deref())?;
            set(&mut c.bundle, a.bundle);
            set(&mut c.out, a.out);
            a.solver.apply(&mut c.solver);
            if a.estimate || a.seed.is_some() {
                let e = c.estimate.get_or_insert_with(Default::default);
                if let Some(s) = a.seed {
                    e.seed = s;
                }
                a.budget.apply(&mut e.budget);
            }
            commands::trace(&mut c)
        }
        Command::Grid(a) => {
            let mut c: GridConfig = config::load(a.config.as_deref())?;
            set(&mut c.out_dir, a.out_dir);
            let g = &mut c.grid;
            if let Some(v) = a.n {
                g.n = v;
            }
            if let Some(v) = a.ms {
                g.ms = v;
            }
            if let Some(v) = a.ks {
                g.ks = v;
            }
            if let Some(v) = a.corrupt {
                g.noise_counts = v;
            }
            if let Some(v) = a.noise_l1 {
                g.noise_l1 = v;
            }
            if let Some(v) = a.trials {
                g.trials = v;
            }
            if let Some(v) = a.seed {
                g.seed = v;
            }
            g.timing |= a.timing;
            a.solver.apply(&mut g.solver);
            commands::grid(&mut c)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("sl1: {f}");
            ExitCode::from(f.code)
        }
    }
}
