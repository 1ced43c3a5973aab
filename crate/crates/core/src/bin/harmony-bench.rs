use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use harmony_core::bench::{self, Experiment, RunMetrics};
use harmony_core::pipeline::PipelineConfig;
use harmony_core::workloads::{WorkloadKind, WorkloadSpec};
use harmony_core::{EngineKind, Error, HarmonyOptions};

#[derive(Parser)]
#[command(name = "harmony-bench", version, about = "Run concurrency-control experiments and compare their results")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every combination of the given engines, workloads and parameters.
    Run(Box<RunArgs>),
    /// Join CSV files on (workload, theta, block_size) and rank the engines.
    Compare {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// harmony, fabric, aria or serial
    #[arg(long, value_delimiter = ',')]
    engine: Vec<String>,
    /// ycsb, smallbank or hotspot
    #[arg(long, value_delimiter = ',', default_value = "ycsb")]
    workload: Vec<WorkloadKind>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    theta: Vec<f64>,
    /// Hotspot workload only.
    #[arg(long, value_delimiter = ',')]
    hotspot_prob: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    keys: u64,
    #[arg(long, default_value_t = 10_000)]
    txns: usize,
    #[arg(long, value_delimiter = ',')]
    block_size: Vec<usize>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Maximum per-block network delay in virtual microseconds.
    #[arg(long)]
    delay_max: Option<u64>,
    /// Harmony only; `true,false` runs both.
    #[arg(long, value_delimiter = ',', num_args = 0..=1, default_missing_value = "true")]
    inter_block: Vec<bool>,
    /// Harmony only; `true,false` runs both.
    #[arg(long, value_delimiter = ',')]
    update_optim: Vec<bool>,
    /// Checkpoint interval for the durable node (needs --log-dir).
    #[arg(long)]
    checkpoint_p: Option<u64>,
    /// Write each run's chain log and checkpoints under this directory.
    #[arg(long)]
    log_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Check every block with the serializability oracle (slow).
    #[arg(long)]
    oracle_check: bool,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// gnuplot data file.
    #[arg(long)]
    dat: Option<PathBuf>,
    /// Run grid points concurrently.
    #[arg(long)]
    parallel: bool,
}

enum Failure {
    Usage(String),
    Runtime(Error),
    Violations(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => Failure::Usage(msg),
            other => Failure::Runtime(other),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn or_list<T: Clone>(given: &[T], fallback: T) -> Vec<T> {
    if given.is_empty() {
        vec![fallback]
    } else {
        given.to_vec()
    }
}

fn grid(a: &RunArgs) -> Result<Vec<Experiment>, Failure> {
    let cfg = match &a.config {
        Some(p) => PipelineConfig::from_json(&fs::read_to_string(p)?)?,
        None => PipelineConfig::default(),
    };
    if !a.hotspot_prob.is_empty() && !a.workload.contains(&WorkloadKind::YcsbHotspot) {
        return Err(Failure::Usage("--hotspot-prob needs --workload hotspot".into()));
    }
    if a.checkpoint_p.is_some() && a.log_dir.is_none() {
        return Err(Failure::Usage("--checkpoint-p needs --log-dir".into()));
    }
    let engines = or_list(&a.engine, cfg.engine.clone());
    let engines = engines.iter().map(|e| e.parse::<EngineKind>()).collect::<Result<Vec<_>, _>>()?;
    let inter = or_list(&a.inter_block, cfg.inter_block);
    let optim = or_list(&a.update_optim, cfg.update_optim);
    if engines.iter().all(|e| !matches!(e, EngineKind::Harmony(_))) && (inter.contains(&true) || optim.contains(&false)) {
        return Err(Failure::Usage("--inter-block and --update-optim only apply to the harmony engine".into()));
    }
    let seed = a.seed.unwrap_or(cfg.seed);
    let mut net_cfg = cfg.clone();
    net_cfg.seed = seed;
    if let Some(d) = a.delay_max {
        net_cfg.delay_max = d;
    }

    let mut out = Vec::new();
    for &workload in &a.workload {
        let xs = if workload == WorkloadKind::YcsbHotspot { or_list(&a.hotspot_prob, 0.0) } else { vec![0.0] };
        for &theta in &a.theta {
            for &hot in &xs {
                for &bs in &or_list(&a.block_size, cfg.block_size) {
                    for &engine in &engines {
                        let variants: Vec<EngineKind> = match engine {
                            EngineKind::Harmony(_) => inter
                                .iter()
                                .flat_map(|&i| optim.iter().map(move |&o| EngineKind::Harmony(HarmonyOptions { inter_block: i, update_optim: o })))
                                .collect(),
                            baseline => vec![baseline],
                        };
                        for engine in variants {
                            let spec = WorkloadSpec { kind: workload, keys: a.keys, theta, hotspot_prob: hot, seed, ..WorkloadSpec::default() };
                            let mut exp = Experiment::new(engine, spec);
                            exp.txns = a.txns;
                            exp.block_size = bs;
                            exp.replicas = a.replicas.unwrap_or(cfg.replicas);
                            exp.network = net_cfg.network();
                            exp.oracle_check = a.oracle_check;
                            exp.checkpoint_p = a.checkpoint_p.unwrap_or(cfg.checkpoint_p);
                            exp.log_dir = a.log_dir.as_ref().map(|d| d.join(format!("run-{}", out.len())));
                            exp.check()?;
                            out.push(exp);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let exps = grid(&a)?;
    let mut rows: Vec<RunMetrics> = Vec::with_capacity(exps.len());
    let mut violations = Vec::new();
    for (exp, outcome) in exps.iter().zip(bench::run_grid(&exps, a.parallel)) {
        let o = outcome?;
        let m = &o.metrics;
        eprintln!(
            "{:<22} {:<9} theta={:<4} bs={:<4} abort_rate={:.4} hit_rate={:.4} commits/s={:.0}",
            m.label(),
            m.workload,
            m.theta,
            m.block_size,
            m.abort_rate,
            m.hit_rate,
            m.commits_per_second
        );
        violations.extend(o.violations.iter().map(|v| format!("{} {}: {v}", exp.engine, m.workload)));
        rows.push(o.metrics);
    }
    match &a.out {
        Some(p) => bench::write_csv(&rows, BufWriter::new(File::create(p)?))?,
        None => bench::write_csv(&rows, io::stdout().lock())?,
    }
    if let Some(p) = &a.dat {
        bench::write_dat(&rows, BufWriter::new(File::create(p)?))?;
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violations(violations))
    }
}

fn compare(files: &[PathBuf]) -> Result<(), Failure> {
    let tables = files.iter().map(|f| bench::read_csv(File::open(f)?)).collect::<Result<Vec<_>, Error>>()?;
    print!("{}", bench::compare(&tables));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.cmd {
        Cmd::Run(a) => run(*a),
        Cmd::Compare { files } => compare(&files),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nSee `harmony-bench run --help`.");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Violations(vs)) => {
            for v in vs {
                eprintln!("violation: {v}");
            }
            ExitCode::from(2)
        }
    }
}
