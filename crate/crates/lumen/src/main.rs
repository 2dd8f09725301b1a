use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lumen::format::{self, decomposition_from_text, decomposition_to_text};
use lumen::harness::{self, Check, ExperimentConfig, Mode};
use lumen_core::design::design_q_matrices;
use lumen_core::efficacy::{eff_table, exponent_bound};
use lumen_core::hashing::{hashing_exponent, optimize_gamma, p_eff, GammaOptions, JointDistribution, StochasticPair};
use lumen_core::instances::{gen_null, gen_planted, gen_planted_p};
use lumen_core::solver::{lemma_checks, SolverConfig};
use lumen_core::zoo::{describe, t2112_limit_tensor, zoo_entries, zoo_entry, DEFAULT_EPSILON};
use lumen_core::{Matrix, Tensor};

#[derive(Parser)]
#[command(name = "lumen", version, about = "Planted correlated pair search with fast matrix multiplication tensors")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the built-in tensors or dump one as text.
    Zoo {
        #[command(subcommand)]
        action: ZooCmd,
    },
    /// Efficacy table of a tensor.
    Eff(TensorArg),
    /// Exponent bound log(rank) / log(eff) of a tensor.
    Exponent(TensorArg),
    /// Exponent curves over rho as CSV.
    Exponents {
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write an instance file (and its planted sidecar).
    Gen(GenArgs),
    /// Search an instance for the planted pair; prints a JSON report.
    Solve(SolveArgs),
    /// Success-rate grids and aggregation timings.
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Identity, efficacy, oracle and lemma checks; or check a decomposition file.
    Verify {
        /// Decomposition text file to check against `--tensor`.
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, default_value = "strassen")]
        tensor: String,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        eps: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Optimize the hashing matrices of a tensor for a joint distribution.
    GammaOpt {
        /// A zoo name or `t2112-limit`.
        #[arg(long, default_value = "t2112-limit")]
        tensor: String,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        eps: f64,
        #[command(flatten)]
        law: LawArg,
        #[arg(long, default_value_t = 16)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Construct improving hashing matrices for a subset-of-matmul tensor.
    DesignQ {
        #[arg(long, default_value = "sw")]
        tensor: String,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        eps: f64,
        #[command(flatten)]
        law: LawArg,
        #[arg(long, default_value_t = 0.1)]
        max_boost: f64,
    },
    /// Monte-Carlo checks of the probabilistic lemmas.
    LemmaCheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum ZooCmd {
    List {
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        eps: f64,
    },
    Dump {
        name: String,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        eps: f64,
    },
}

#[derive(Args)]
struct TensorArg {
    /// A zoo name, or `t2112-limit`.
    #[arg(default_value = "t2112")]
    name: String,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    eps: f64,
    /// Read the decomposition from a text file instead.
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct LawArg {
    /// Correlation of the classic law `P_rho`.
    #[arg(long, default_value_t = 0.2)]
    rho: f64,
    /// Joint distribution file (one row per line); overrides `--rho`.
    #[arg(long)]
    p: Option<PathBuf>,
}

impl LawArg {
    fn distribution(&self) -> Result<JointDistribution> {
        match &self.p {
            Some(path) => Ok(JointDistribution::new(harness::parse_matrix(&read(path)?)?)?),
            None => Ok(JointDistribution::rho(self.rho)?),
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0.8)]
    rho: f64,
    /// Joint distribution file; plants a `P`-distributed pair instead.
    #[arg(long)]
    p: Option<PathBuf>,
    /// No planted pair.
    #[arg(long)]
    null: bool,
    /// Alphabet of a null instance.
    #[arg(long, default_value_t = 2)]
    q: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file written by `lumen gen`. Without it an instance is
    /// generated from `--n --d --rho --seed`.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 28672)]
    d: usize,
    #[arg(long, default_value_t = 0.8)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "t2112")]
    tensor: String,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    eps: f64,
    /// Hash buckets through stochastic matrices instead of uniform buckets.
    #[arg(long)]
    lsh: bool,
    /// Flip probability of symmetric 2x2 hashing matrices (with `--lsh`).
    #[arg(long)]
    flip: Option<f64>,
    /// Correlation to search for when the instance has none (null files).
    #[arg(long)]
    search_rho: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    majority: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Also write per-round score statistics as CSV.
    #[arg(long)]
    scores_csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Success rate grid with Wilson intervals (CSV).
    Success {
        #[arg(long, default_value = "t2112")]
        tensor: String,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        eps: f64,
        #[arg(long, value_delimiter = ',', default_value = "256")]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.8")]
        rho: Vec<f64>,
        #[arg(long, default_value_t = 8192)]
        d: usize,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        #[arg(long)]
        lsh: bool,
        #[arg(long, default_value_t = 0.8)]
        search_rho: f64,
        #[arg(long, env = "LUMEN_JOBS")]
        jobs: Option<usize>,
        /// Per-trial rows instead of the per-cell summary.
        #[arg(long)]
        trials: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Naive vs matrix-product aggregation timings (CSV).
    Agg {
        #[arg(long, value_delimiter = ',', default_value = "1,4,16,64,256,1024")]
        g: Vec<usize>,
        #[arg(long, default_value_t = 24)]
        d: usize,
        #[arg(long, default_value_t = 4)]
        r: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

/// Tensor and rank for `eff` / `exponent`.
fn tensor_of(arg: &TensorArg) -> Result<(String, Tensor, usize)> {
    if let Some(path) = &arg.file {
        let d = decomposition_from_text(&read(path)?)?;
        return Ok((path.display().to_string(), d.to_tensor()?, d.rank()));
    }
    if arg.name == "t2112-limit" {
        return Ok((arg.name.clone(), t2112_limit_tensor(), 5));
    }
    let e = zoo_entry(&arg.name, arg.eps)?;
    Ok((e.name.to_string(), e.target, e.declared_rank))
}

fn print_matrix(m: &Matrix<f64>) {
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:>10.6}")).collect();
        println!("  {}", row.join(" "));
    }
}

fn print_checks(checks: &[Check]) -> bool {
    for c in checks {
        println!("{} {:<32} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("{} checks, {failed} failed", checks.len());
    failed == 0
}

fn cmd_solve(a: &SolveArgs) -> Result<bool> {
    let t0 = Instant::now();
    let (mut inst, planted) = match &a.instance {
        Some(path) => (format::load_instance(path)?, format::load_sidecar(path)?.map(|s| (s.i, s.j))),
        None => {
            let p = gen_planted(a.n, a.d, a.rho, a.seed)?;
            (p.instance, Some((p.sidecar.i, p.sidecar.j)))
        }
    };
    if let Some(r) = a.search_rho {
        inst = inst.with_law(lumen_core::instances::PlantedLaw::Rho(r));
    }
    let load_ms = t0.elapsed().as_secs_f64() * 1e3;
    let entry = zoo_entry(&a.tensor, a.eps)?;
    let mut cfg = SolverConfig::for_n(inst.n);
    cfg.reps = a.reps.unwrap_or(cfg.reps);
    cfg.majority = a.majority.unwrap_or(cfg.majority);
    cfg.detect_sigma = a.sigma.unwrap_or(cfg.detect_sigma);
    let mode = match (a.lsh, a.flip) {
        (false, None) => Mode::Uniform,
        (false, Some(_)) => bail!("--flip needs --lsh"),
        (true, Some(f)) => Mode::Lsh(StochasticPair::symmetric_flip(f)?),
        (true, None) => Mode::LshAuto,
    };
    let t1 = Instant::now();
    let rep = harness::solve(&inst, &entry, &mode, &cfg, a.seed)?;
    let solve_ms = t1.elapsed().as_secs_f64() * 1e3;
    let found = planted.map(|p| rep.candidates.contains(&p));
    let report = harness::SolveReport {
        tensor: entry.name.into(),
        eps: a.eps,
        mode: mode.label().into(),
        n: inst.n,
        d: inst.d,
        q: inst.q,
        seed: a.seed,
        plan: harness::plan_echo(&rep),
        rounds: rep.rounds_run(),
        flags: harness::flag_echo(&rep),
        majority_pairs: rep.majority_pairs.clone(),
        candidates: rep.candidates.clone(),
        planted,
        found,
        multiplications: rep.multiplications,
        g_tried: rep.g_tried.clone(),
        load_ms,
        solve_ms,
    };
    if let Some(path) = &a.scores_csv {
        harness::write_csv(fs::File::create(path)?, &harness::round_rows(&rep))?;
    }
    writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(&report)?)?;
    Ok(found.unwrap_or(true))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Zoo { action: ZooCmd::List { eps } } => {
            println!("{:<10} {:<8} {:>4} {:>10} {:>9}", "name", "shape", "rank", "eff", "exponent");
            for e in zoo_entries(eps)? {
                let s = e.shape();
                println!(
                    "{:<10} {:<8} {:>4} {:>10.6} {:>9.4}",
                    e.name,
                    format!("{}x{}x{}", s.qi, s.qj, s.qk),
                    e.declared_rank,
                    e.eff(),
                    e.exponent()?
                );
            }
            Ok(true)
        }
        Cmd::Zoo { action: ZooCmd::Dump { name, eps } } => {
            let e = zoo_entry(&name, eps)?;
            println!("# {}", describe(&e));
            print!("{}", decomposition_to_text(&e.decomposition));
            Ok(true)
        }
        Cmd::Eff(arg) => {
            let (name, t, _) = tensor_of(&arg)?;
            let table = eff_table(&t);
            println!("{name}: eff = {:.6}", table.total);
            print_matrix(&table.per_entry);
            Ok(true)
        }
        Cmd::Exponent(arg) => {
            let (name, t, rank) = tensor_of(&arg)?;
            let eff = eff_table(&t).total;
            println!("{name}: rank {rank}, eff {eff:.6}, exponent {:.6}", exponent_bound(rank, eff)?);
            Ok(true)
        }
        Cmd::Exponents { points, out } => {
            harness::write_csv(output(&out)?, &harness::exponent_grid(points)?)?;
            Ok(true)
        }
        Cmd::Gen(g) => {
            let (inst, side) = if g.null {
                (gen_null(g.n, g.d, g.q, g.seed)?, None)
            } else if let Some(path) = &g.p {
                let p = JointDistribution::new(harness::parse_matrix(&read(path)?)?)?;
                let pl = gen_planted_p(g.n, g.d, &p, g.seed)?;
                (pl.instance, Some(pl.sidecar))
            } else {
                let pl = gen_planted(g.n, g.d, g.rho, g.seed)?;
                (pl.instance, Some(pl.sidecar))
            };
            format::save_instance(&g.out, &inst, side)?;
            eprintln!("wrote {} (sidecar: {})", g.out.display(), side.is_some());
            Ok(true)
        }
        Cmd::Solve(a) => cmd_solve(&a),
        Cmd::Bench(BenchCmd::Success { tensor, eps, n, rho, d, seeds, first_seed, lsh, search_rho, jobs, trials, out }) => {
            let mut cells = Vec::new();
            for &nn in &n {
                for &r in &rho {
                    for seed in first_seed..first_seed + seeds {
                        cells.push(ExperimentConfig {
                            tensor: tensor.clone(),
                            eps,
                            mode: if lsh { Mode::LshAuto } else { Mode::Uniform },
                            n: nn,
                            d,
                            rho: r,
                            search_rho,
                            seed,
                            solver: SolverConfig::for_n(nn),
                        });
                    }
                }
            }
            let rows = harness::run_grid(&cells, harness::jobs(jobs))?;
            if trials {
                harness::write_csv(output(&out)?, &rows)?;
            } else {
                harness::write_csv(output(&out)?, &harness::success_curve(&rows))?;
            }
            Ok(true)
        }
        Cmd::Bench(BenchCmd::Agg { g, d, r, repeats, seed, out }) => {
            let rows = harness::bench_aggregation(&g, d, r, repeats, seed)?;
            harness::write_csv(output(&out)?, &rows)?;
            Ok(rows.iter().all(|r| r.identical))
        }
        Cmd::Verify { file: Some(path), tensor, eps, .. } => {
            let d = decomposition_from_text(&read(&path)?)?;
            Ok(print_checks(&[harness::check_decomposition(&d, &tensor, eps)?]))
        }
        Cmd::Verify { file: None, seed, .. } => Ok(print_checks(&harness::verify_suite(seed)?)),
        Cmd::GammaOpt { tensor, eps, law, starts, seed } => {
            let (t, rank) = if tensor == "t2112-limit" {
                (t2112_limit_tensor(), 5)
            } else {
                let e = zoo_entry(&tensor, eps)?;
                (e.target, e.declared_rank)
            };
            let p = law.distribution()?;
            let opt = optimize_gamma(&t, &p, &GammaOptions { starts, seed, ..GammaOptions::default() })?;
            let q = p.q();
            println!("gamma {:.6} (converged: {})", opt.gamma, opt.converged);
            println!("P-eff {:.6}, exponent {:.6}", p_eff(opt.gamma, q), hashing_exponent(rank, q, opt.gamma)?);
            println!("Q_x:");
            print_matrix(opt.pair.qx());
            println!("Q_y:");
            print_matrix(opt.pair.qy());
            Ok(true)
        }
        Cmd::DesignQ { tensor, eps, law, max_boost } => {
            let e = zoo_entry(&tensor, eps)?;
            let p = law.distribution()?;
            let d = design_q_matrices(&e.target, &p, max_boost)?;
            println!("gamma {:.9} vs uniform {:.9} (boost {:e}, {:?})", d.gamma, d.baseline, d.epsilon, d.construction.case);
            println!("Q_x:");
            print_matrix(d.pair.qx());
            println!("Q_y:");
            print_matrix(d.pair.qy());
            Ok(d.gamma > d.baseline)
        }
        Cmd::LemmaCheck { seed } => {
            let rep = lemma_checks(seed);
            println!("{rep:#?}");
            Ok(rep.pass())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
