use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use gql::build::{build_laplacian, build_rbf_kernel, standard_normal_vector, synthetic_spd, SyntheticSpec};
use gql::dpp::{dpp_run, kdpp_run, BoundsPolicy, ChainConfig, DppMode};
use gql::greedy::{double_greedy_run, GreedyConfig};
use gql::harness::{self, Algorithm, BenchConfig};
use gql::io::{read_edge_list, read_matrix_market, read_points_csv};
use gql::matrix::{IndexSet, SpectrumBounds, SymmetricSparseMatrix, NODE_MARGIN};
use gql::quadrature::{run, QuadratureConfig, Reorthogonalization};
use gql::JudgeConfig;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gql", version, about = "Quadrature bounds on bilinear inverse forms, DPP samplers and double greedy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-iteration Gauss, Radau and Lobatto estimates of u^T A^{-1} u as CSV.
    Bounds(Opts),
    /// Unconstrained DPP chain.
    Dpp(Opts),
    /// Fixed-size DPP chain; needs --k.
    Kdpp(Opts),
    /// Double greedy for log det.
    Greedy(Opts),
    /// Time quadrature-driven runs against dense baselines.
    Bench(Opts),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Mm,
    Edges,
    Points,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    #[value(name = "paper", alias = "direct")]
    Direct,
    Reciprocal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Reorth {
    None,
    Full,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum BenchAlgorithm {
    Dpp,
    Kdpp,
    Greedy,
    All,
}

#[derive(Args, Clone)]
struct Opts {
    /// Input file, read according to --format.
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mm")]
    format: Format,
    /// Random sparse SPD instance, e.g. "n=100 density=0.1 lam1=1e-2 seed=3".
    #[arg(long)]
    synthetic: Option<String>,
    /// Added to the diagonal; also the default lambda_min floor.
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    #[arg(long)]
    lambda_min: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    /// Stop once the relative Radau gap is at most this (bounds only).
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    /// Iteration cap; defaults to the dimension.
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value = "paper")]
    mode: Mode,
    /// Lanczos reorthogonalization; full by default up to dimension 2048.
    #[arg(long, value_enum)]
    reorth: Option<Reorth>,
    /// RBF bandwidth for --format points.
    #[arg(long)]
    sigma: Option<f64>,
    /// RBF cutoff radius; defaults to 3 sigma.
    #[arg(long)]
    cutoff: Option<f64>,
    /// Main output (CSV or subset); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-step stats or trace CSV for dpp, kdpp and greedy.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Skip the dense baseline in bench.
    #[arg(long)]
    no_baseline: bool,
    /// Size of the random initial subset of the DPP chain (bench defaults to N/3).
    #[arg(long)]
    init_size: Option<usize>,
    /// Algorithm timed by bench.
    #[arg(long, value_enum, default_value = "all")]
    algorithm: BenchAlgorithm,
}

enum Failure {
    Io(anyhow::Error),
    Numerical(anyhow::Error),
    Config(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Config(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Io(e) | Failure::Numerical(e) | Failure::Config(e) => e,
        }
    }
}

impl From<gql::Error> for Failure {
    fn from(e: gql::Error) -> Self {
        use gql::Error as E;
        match e {
            E::Io(_) | E::Parse { .. } => Failure::Io(e.into()),
            ref n if n.is_numerical() => Failure::Numerical(e.into()),
            _ => Failure::Config(e.into()),
        }
    }
}

fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Config(anyhow::anyhow!(msg.into()))
}

type Outcome<T> = std::result::Result<T, Failure>;

struct Problem {
    matrix: SymmetricSparseMatrix,
    // valid lower bound on the spectrum of every principal submatrix
    floor: Option<f64>,
}

fn open(path: &Path) -> Outcome<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(Failure::Io)
}

fn load(o: &Opts) -> Outcome<Problem> {
    if !(o.ridge >= 0.0 && o.ridge.is_finite()) {
        return Err(config_err(format!("--ridge {} must be a finite value >= 0", o.ridge)));
    }
    let (base, base_floor) = match (&o.input, &o.synthetic) {
        (Some(_), Some(_)) => return Err(config_err("--input and --synthetic are exclusive")),
        (None, None) => return Err(config_err("one of --input or --synthetic is required")),
        (None, Some(spec)) => {
            let s = synthetic_spd(&SyntheticSpec::parse(spec)?)?;
            (s.matrix, Some(s.lambda_1))
        }
        (Some(path), None) => match o.format {
            Format::Mm => {
                let m = read_matrix_market(open(path)?)?;
                let g = m.gershgorin_lower();
                (m, (g > 0.0).then_some(g))
            }
            Format::Edges => {
                let lap = build_laplacian(&read_edge_list(open(path)?)?, None)?;
                if lap.dropped_self_loops > 0 {
                    eprintln!("warning: dropped {} self-loop(s)", lap.dropped_self_loops);
                }
                (lap.matrix, None)
            }
            Format::Points => {
                let sigma = o.sigma.ok_or_else(|| config_err("--format points needs --sigma"))?;
                let cutoff = o.cutoff.unwrap_or(3.0 * sigma);
                (build_rbf_kernel(&read_points_csv(open(path)?)?, sigma, cutoff)?, None)
            }
        },
    };
    let matrix = if o.ridge > 0.0 { base.shifted(o.ridge) } else { base };
    let floor = match (o.lambda_min, base_floor) {
        (Some(l), _) => Some(l),
        (None, Some(b)) => Some(b + o.ridge),
        (None, None) if o.ridge > 0.0 => Some(o.ridge),
        (None, None) => None,
    };
    Ok(Problem { matrix, floor })
}

fn require_floor(p: &Problem) -> Outcome<f64> {
    p.floor.ok_or_else(|| config_err("no valid lambda_min for this input; pass --lambda-min or --ridge"))
}

fn quadrature_cfg(o: &Opts) -> QuadratureConfig {
    QuadratureConfig {
        reorth: o.reorth.map(|r| match r {
            Reorth::None => Reorthogonalization::None,
            Reorth::Full => Reorthogonalization::Full,
        }),
        ..QuadratureConfig::default()
    }
}

fn judge_cfg(o: &Opts) -> JudgeConfig {
    JudgeConfig { max_iter: o.max_iter, quadrature: quadrature_cfg(o), ..JudgeConfig::default() }
}

fn bounds_policy(o: &Opts, p: &Problem) -> Outcome<BoundsPolicy> {
    Ok(BoundsPolicy { floor: require_floor(p)?, ceiling: o.lambda_max })
}

fn chain_cfg(o: &Opts, p: &Problem) -> Outcome<ChainConfig> {
    let mut c = ChainConfig::new(1.0);
    c.bounds = bounds_policy(o, p)?;
    c.judge = judge_cfg(o);
    c.mode = match o.mode {
        Mode::Direct => DppMode::Direct,
        Mode::Reciprocal => DppMode::Reciprocal,
    };
    c.init_size = o.init_size;
    Ok(c)
}

fn greedy_cfg(o: &Opts, p: &Problem) -> Outcome<GreedyConfig> {
    let mut g = GreedyConfig::new(1.0);
    g.bounds = bounds_policy(o, p)?;
    g.judge = judge_cfg(o);
    Ok(g)
}

fn emit(path: &Option<PathBuf>, text: &str) -> Outcome<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())).map_err(Failure::Io),
        None => std::io::stdout().write_all(text.as_bytes()).context("cannot write to stdout").map_err(Failure::Io),
    }
}

fn subset_text(s: &IndexSet) -> String {
    s.iter().map(|i| format!("{i}\n")).collect()
}

fn cmd_bounds(o: &Opts) -> Outcome<()> {
    let p = load(o)?;
    let a = &p.matrix;
    let lmin = match o.lambda_min {
        Some(l) => l,
        None => require_floor(&p)? * (1.0 - NODE_MARGIN),
    };
    let lmax = o.lambda_max.unwrap_or(a.gershgorin_upper() * (1.0 + NODE_MARGIN));
    let bounds = SpectrumBounds::new(lmin, lmax)?;
    let u = standard_normal_vector(a.dim(), o.seed);
    let max_iter = o.max_iter.unwrap_or(a.dim()).max(1);
    let trace = run(a, &u, bounds, o.tol, max_iter, &quadrature_cfg(o))?;
    emit(&o.out, &trace.to_csv())
}

fn cmd_dpp(o: &Opts) -> Outcome<()> {
    let p = load(o)?;
    let r = dpp_run(&p.matrix, o.steps, o.seed, &chain_cfg(o, &p)?, o.stats.is_some())?;
    emit(&o.out, &subset_text(&r.set))?;
    if o.stats.is_some() {
        emit(&o.stats, &r.stats_csv())?;
    }
    Ok(())
}

fn cmd_kdpp(o: &Opts) -> Outcome<()> {
    let p = load(o)?;
    let k = o.k.ok_or_else(|| config_err("kdpp needs --k"))?;
    if k > p.matrix.dim() {
        return Err(config_err(format!("--k {k} exceeds the ground set size {}", p.matrix.dim())));
    }
    let r = kdpp_run(&p.matrix, k, o.steps, o.seed, &chain_cfg(o, &p)?, o.stats.is_some())?;
    emit(&o.out, &subset_text(&r.set))?;
    if o.stats.is_some() {
        emit(&o.stats, &r.stats_csv())?;
    }
    Ok(())
}

fn cmd_greedy(o: &Opts) -> Outcome<()> {
    let p = load(o)?;
    let r = double_greedy_run(&p.matrix, o.seed, &greedy_cfg(o, &p)?)?;
    emit(&o.out, &subset_text(&r.set))?;
    if o.stats.is_some() {
        emit(&o.stats, &r.trace_csv())?;
    }
    Ok(())
}

fn cmd_bench(o: &Opts) -> Outcome<()> {
    let p = load(o)?;
    let n = p.matrix.dim();
    let mut chain = chain_cfg(o, &p)?;
    chain.init_size = Some(o.init_size.unwrap_or(n / 3));
    let cfg = BenchConfig {
        chain,
        greedy: greedy_cfg(o, &p)?,
        steps: o.steps,
        seed: o.seed,
        k: Some(o.k.unwrap_or(n / 3)),
        baseline: !o.no_baseline,
    };
    let algorithms: Vec<Algorithm> = match o.algorithm {
        BenchAlgorithm::Dpp => vec![Algorithm::Dpp],
        BenchAlgorithm::Kdpp => vec![Algorithm::Kdpp],
        BenchAlgorithm::Greedy => vec![Algorithm::Greedy],
        BenchAlgorithm::All => vec![Algorithm::Dpp, Algorithm::Kdpp, Algorithm::Greedy],
    };
    let mut results = Vec::new();
    for alg in algorithms {
        results.push(harness::bench(&p.matrix, alg, &cfg)?);
    }
    emit(&o.out, &harness::to_csv(&results))?;
    let diverged: Vec<_> = results.iter().filter(|r| r.identical == Some(false)).map(|r| r.algorithm.name()).collect();
    if !diverged.is_empty() {
        return Err(Failure::Numerical(anyhow::anyhow!("variants disagree for: {}", diverged.join(", "))));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Bounds(o) => cmd_bounds(o),
        Command::Dpp(o) => cmd_dpp(o),
        Command::Kdpp(o) => cmd_kdpp(o),
        Command::Greedy(o) => cmd_greedy(o),
        Command::Bench(o) => cmd_bench(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
