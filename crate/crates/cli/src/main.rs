use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use pooling::algorithms::{self, AlgorithmKind, SolverConfig};
use pooling::bench::{self, BenchConfig, DEFAULT_BENCH_GRID_BUDGET};
use pooling::formulations::{self, ConstraintFamily, FlowVector};
use pooling::instance::{generate_random, GeneratorSpec, Group, PoolingInstance};
use pooling::subproblems::{self, PenaltyState};

const EXIT_INPUT: u8 = 2;
const EXIT_FAILURE: u8 = 3;
const VERIFY_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "pooling", version, about = "LP-based local solvers for the pooling problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write random instances `<group><index>.json` with consecutive seeds.
    Generate {
        #[arg(long)]
        group: Group,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run one algorithm on one instance.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "pdr")]
        algorithm: AlgorithmKind,
        #[command(flatten)]
        overrides: Overrides,
        /// Report JSON path; defaults to `<instance stem>.<algorithm>.json`
        /// next to the instance.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several algorithms over a directory of instances and write a CSV table.
    Bench {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "slp,dr,pdr")]
        settings: Vec<AlgorithmKind>,
        /// Grid points per quality range for the lower bound; 0 disables it.
        #[arg(long, default_value_t = 5)]
        oracle_steps: usize,
        #[arg(long, default_value_t = DEFAULT_BENCH_GRID_BUDGET)]
        grid_budget: f64,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a flow vector against the flow-only model.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        /// JSON array of arc flows, in the instance's arc order.
        #[arg(long)]
        flow: PathBuf,
    },
    /// Print a subproblem built at the relaxation optimum in LP text form.
    DumpLp {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Subproblem::Mcf)]
        subproblem: Subproblem,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Subproblem {
    Mcf,
    SlpP,
    Dr,
    SlpF,
    Pslp,
}

#[derive(clap::Args, Clone)]
struct Overrides {
    #[arg(long)]
    tmax: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    mu0: Option<f64>,
    #[arg(long)]
    nu0: Option<f64>,
    #[arg(long)]
    conv_tol: Option<f64>,
}

impl Overrides {
    fn config(&self) -> SolverConfig {
        let mut c = SolverConfig::default();
        if let Some(v) = self.tmax {
            c.t_max = v;
        }
        if let Some(v) = self.delta {
            c.delta = v;
        }
        if let Some(v) = self.mu0 {
            c.mu0 = v;
        }
        if let Some(v) = self.nu0 {
            c.nu0 = v;
        }
        if let Some(v) = self.conv_tol {
            c.conv_tol = v;
        }
        c
    }
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn input(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_INPUT, error: error.into() }
}

fn failed(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_FAILURE, error: error.into() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate { group, count, seed, out } => generate(group, count, seed, &out).map_err(failed),
        Command::Solve { instance, algorithm, overrides, out } => solve(&instance, algorithm, &overrides, out),
        Command::Bench { dir, settings, oracle_steps, grid_budget, overrides, out } => {
            let config = BenchConfig { settings, solver: overrides.config(), oracle_steps, grid_budget };
            run_bench(&dir, &config, out.as_deref())
        }
        Command::Verify { instance, flow } => verify(&instance, &flow),
        Command::DumpLp { instance, subproblem } => dump_lp(&instance, subproblem),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &Path) -> Result<PoolingInstance, Failure> {
    PoolingInstance::load(path).with_context(|| format!("loading {}", path.display())).map_err(input)
}

fn generate(group: Group, count: usize, seed: u64, out: &Path) -> Result<ExitCode> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for index in 1..=count {
        let inst = generate_random(GeneratorSpec { group, seed: seed + (index - 1) as u64 });
        let path = out.join(format!("{}{index}.json", group.letter()));
        inst.save(&path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn solve(path: &Path, algorithm: AlgorithmKind, overrides: &Overrides, out: Option<PathBuf>) -> Result<ExitCode, Failure> {
    let inst = load(path)?;
    let config = overrides.config();
    config.validate().map_err(input)?;
    let report = algorithms::run(algorithm, &inst, &config).map_err(failed)?;
    let out = out.unwrap_or_else(|| {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("instance");
        path.with_file_name(format!("{stem}.{algorithm}.json"))
    });
    fs::write(&out, report.to_json()).with_context(|| format!("writing {}", out.display())).map_err(failed)?;
    println!(
        "{} Obj={} It={} T={:.2} feasible={}",
        algorithm,
        report.final_objective.map_or(bench::MISSING.to_string(), bench::significant),
        report.iterations,
        report.wall_time,
        report.feasible
    );
    if let Some(reason) = &report.failure_reason {
        eprintln!("failure: {reason}");
        return Ok(ExitCode::from(EXIT_FAILURE));
    }
    Ok(ExitCode::SUCCESS)
}

/// Instance files of a directory ordered by group letter, then index.
fn instance_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    let key = |p: &PathBuf| {
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
        let split = stem.find(|c: char| c.is_ascii_digit()).unwrap_or(stem.len());
        let number = stem[split..].parse::<u64>().ok();
        (stem[..split].to_string(), number, stem)
    };
    files.sort_by_cached_key(key);
    Ok(files)
}

fn run_bench(dir: &Path, config: &BenchConfig, out: Option<&Path>) -> Result<ExitCode, Failure> {
    config.solver.validate().map_err(input)?;
    let files = instance_files(dir).map_err(input)?;
    let mut rows = Vec::with_capacity(files.len());
    for path in &files {
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("?").to_string();
        let row = match PoolingInstance::load(path) {
            Ok(inst) => bench::bench_instance(&id, &inst, config),
            Err(e) => {
                eprintln!("{id}: {e}");
                continue;
            }
        };
        if let Some(e) = &row.error {
            eprintln!("{id}: {e}");
        }
        rows.push(row);
    }

    let sink: Box<dyn std::io::Write> = match out {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display())).map_err(failed)?),
        None => Box::new(std::io::stdout()),
    };
    let mut writer = csv::Writer::from_writer(sink);
    let write = |w: &mut csv::Writer<_>| -> Result<()> {
        w.write_record(bench::header(&config.settings))?;
        for row in &rows {
            w.write_record(row.cells())?;
        }
        w.write_record(bench::average_cells(&rows, &config.settings))?;
        w.flush()?;
        Ok(())
    };
    write(&mut writer).map_err(failed)?;
    Ok(ExitCode::SUCCESS)
}

fn verify(instance: &Path, flow: &Path) -> Result<ExitCode, Failure> {
    let inst = load(instance)?;
    let text = fs::read_to_string(flow).with_context(|| format!("reading {}", flow.display())).map_err(input)?;
    let y: FlowVector = serde_json::from_str(&text).context("flow file must be a JSON array of numbers").map_err(input)?;
    if y.0.len() != inst.num_arcs() {
        return Err(input(anyhow!("flow has {} entries but the instance has {} arcs", y.0.len(), inst.num_arcs())));
    }
    let report = formulations::residuals_f(&inst, &y.0);
    for family in ConstraintFamily::ALL {
        if let Some(v) = report.family_max(family) {
            println!("{family:<22} {v:.6e}");
        }
    }
    println!("objective {}", bench::significant(formulations::objective(&inst, &y.0)));
    let alpha = formulations::pool_quality(&inst, &y.0);
    for (l, q) in alpha.0.iter().enumerate() {
        let cells: Vec<String> = q.iter().map(|v| bench::significant(*v)).collect();
        println!("alpha pool{l} {}", cells.join(" "));
    }
    let feasible = report.max_violation <= VERIFY_TOL;
    println!("max violation {:.6e} {}", report.max_violation, if feasible { "feasible" } else { "infeasible" });
    Ok(if feasible { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn dump_lp(instance: &Path, which: Subproblem) -> Result<ExitCode, Failure> {
    let inst = load(instance)?;
    let (y0, _) = algorithms::initial_point(&inst).map_err(failed)?;
    let alpha = formulations::pool_quality(&inst, &y0.0);
    let built = match which {
        Subproblem::Mcf => Ok(subproblems::build_mcf(&inst)),
        Subproblem::SlpP => subproblems::build_slp_p(&inst, &alpha, &y0.0),
        Subproblem::Dr => subproblems::build_dr(&inst, &alpha, &y0.0),
        Subproblem::SlpF => subproblems::build_slp_f(&inst, &y0.0),
        Subproblem::Pslp => {
            let config = SolverConfig::default();
            subproblems::build_pslp(&inst, &y0.0, &PenaltyState::uniform(&inst, config.mu0, config.nu0))
        }
    };
    let (lp, map) = built.map_err(failed)?;
    print!("{}", lp.to_lp_text(Some(&map.names(&inst))));
    Ok(ExitCode::SUCCESS)
}
