//! Experiment orchestration: grids of solver runs, exponent curves, the
//! verification suite, and the JSON/CSV records they produce.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use lumen_core::aggregation::{aggregate_fast, aggregate_naive, AggregationTask, Kernel};
use lumen_core::efficacy::{eff_table, exponent_bound};
use lumen_core::exact::apply_levels_exact;
use lumen_core::hashing::{
    dubiner_exponent, omega_rho_t2112, optimize_gamma, t2112_optimal_a, GammaOptions, JointDistribution,
    StochasticPair,
};
use lumen_core::instances::{gen_planted, Instance, PlantedLaw, PlantedSidecar, PmVector};
use lumen_core::solver::{lemma_checks, solve_lsh, solve_uniform, DetectionReport, PlanKind, SolverConfig};
use lumen_core::tensor::ApplyOptions;
use lumen_core::zoo::{t2112_derivation, t2112_limit_tensor, zoo_entries, zoo_entry, ZooEntry};
use lumen_core::{rng, Decomposition, Matrix, Tensor};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Worker threads: the explicit request, else `LUMEN_JOBS`, else all cores.
pub fn jobs(requested: Option<usize>) -> usize {
    requested
        .or_else(|| std::env::var("LUMEN_JOBS").ok().and_then(|v| v.parse().ok()))
        .filter(|&j| j > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

pub fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

/// How planted pairs are searched for.
#[derive(Clone, Debug, PartialEq)]
pub enum Mode {
    Uniform,
    /// Hashing with an explicit stochastic pair.
    Lsh(StochasticPair),
    /// Hashing with the pair picked for the instance's correlation.
    LshAuto,
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Uniform => "uniform",
            Mode::Lsh(_) | Mode::LshAuto => "lsh",
        }
    }
}

/// Stochastic pair used by `--lsh` when none is given: the closed-form flip
/// for T2112, otherwise the optimizer's best pair for `P_rho`.
pub fn default_pair(entry_name: &str, t: &Tensor, rho: f64) -> Result<StochasticPair> {
    let rho = rho.clamp(0.0, 1.0);
    if entry_name == "t2112" {
        return Ok(StochasticPair::symmetric_flip(t2112_optimal_a(rho)?)?);
    }
    let p = JointDistribution::rho(rho)?;
    Ok(optimize_gamma(t, &p, &GammaOptions::default())?.pair)
}

pub fn solve(
    inst: &Instance,
    entry: &ZooEntry,
    mode: &Mode,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<DetectionReport> {
    let d = &entry.decomposition;
    Ok(match mode {
        Mode::Uniform => solve_uniform(inst, d, cfg, seed)?,
        Mode::Lsh(qp) => solve_lsh(inst, d, qp, cfg, seed)?,
        Mode::LshAuto => {
            let rho = match &inst.law {
                PlantedLaw::Rho(r) => *r,
                PlantedLaw::Joint(_) => bail!("automatic hashing pair needs a rho instance; pass --flip"),
            };
            let qp = default_pair(entry.name, &entry.decomposition.to_tensor()?, rho)?;
            solve_lsh(inst, d, &qp, cfg, seed)?
        }
    })
}

/// One grid cell of a success curve.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub tensor: String,
    pub eps: f64,
    pub mode: Mode,
    pub n: usize,
    pub d: usize,
    /// Planted correlation. Zero plants an uncorrelated pair, which is then
    /// searched for as if it had correlation `search_rho`.
    pub rho: f64,
    pub search_rho: f64,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl ExperimentConfig {
    pub fn id(&self) -> String {
        format!("{}-{}-n{}-d{}-rho{}-s{}", self.tensor, self.mode.label(), self.n, self.d, self.rho, self.seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub id: String,
    pub tensor: String,
    pub eps: f64,
    pub mode: String,
    pub rho: f64,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    #[serde(rename = "N")]
    pub big_n: usize,
    /// Tensor levels per application (`2N` when hashing).
    pub levels: usize,
    pub g: usize,
    pub rounds: usize,
    pub success: bool,
    /// Some reported pair is not the planted one.
    pub false_positive: bool,
    pub wall_s: f64,
    /// `rank^levels * rounds`.
    pub multiplications: u64,
    pub max_score: f64,
    pub mean_score: f64,
}

impl ResultRow {
    /// Everything except the wall time, for determinism checks.
    pub fn without_time(&self) -> ResultRow {
        ResultRow { wall_s: 0.0, ..self.clone() }
    }
}

pub fn run_cell(cfg: &ExperimentConfig) -> Result<ResultRow> {
    let entry = zoo_entry(&cfg.tensor, cfg.eps)?;
    let t0 = Instant::now();
    let planted = gen_planted(cfg.n, cfg.d, cfg.rho, cfg.seed)?;
    let PlantedSidecar { i, j } = planted.sidecar;
    let mut inst = planted.instance;
    if cfg.rho == 0.0 {
        inst = inst.with_law(PlantedLaw::Rho(cfg.search_rho));
    }
    let rep = solve(&inst, &entry, &cfg.mode, &cfg.solver, cfg.seed)?;
    let wall_s = t0.elapsed().as_secs_f64();
    let rounds = rep.rounds_run();
    let levels = rep.plan.level_count();
    let max_score = rep.rounds.iter().map(|r| r.max_score).fold(f64::NEG_INFINITY, f64::max);
    let mean_score = rep.rounds.iter().map(|r| r.mean_score).sum::<f64>() / rounds.max(1) as f64;
    Ok(ResultRow {
        id: cfg.id(),
        tensor: cfg.tensor.clone(),
        eps: cfg.eps,
        mode: cfg.mode.label().into(),
        rho: cfg.rho,
        n: cfg.n,
        d: cfg.d,
        seed: cfg.seed,
        big_n: rep.plan.big_n,
        levels,
        g: rep.g_tried.last().copied().unwrap_or(rep.plan.g),
        rounds,
        success: rep.candidates.contains(&(i, j)),
        false_positive: rep.candidates.iter().any(|&c| c != (i, j)),
        wall_s,
        multiplications: rep.multiplications,
        max_score: if max_score.is_finite() { max_score } else { 0.0 },
        mean_score,
    })
}

/// Runs every cell on `jobs` threads. Rows come back sorted by
/// `(n, rho, seed)` whatever order the cells finished in.
pub fn run_grid(cells: &[ExperimentConfig], jobs: usize) -> Result<Vec<ResultRow>> {
    let rows: Vec<ResultRow> =
        pool(jobs)?.install(|| cells.par_iter().map(run_cell).collect::<Result<Vec<_>>>())?;
    let mut keyed: Vec<((usize, u64, u64, String), ResultRow)> =
        rows.into_iter().map(|r| ((r.n, r.rho.to_bits(), r.seed, r.mode.clone()), r)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(keyed.into_iter().map(|(_, r)| r).collect())
}

/// 95% Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let (nf, p) = (n as f64, k as f64 / n as f64);
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub tensor: String,
    pub mode: String,
    pub n: usize,
    pub rho: f64,
    pub trials: usize,
    pub successes: usize,
    pub false_positives: usize,
    pub rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub mean_wall_s: f64,
    pub mean_multiplications: f64,
}

pub fn success_curve(rows: &[ResultRow]) -> Vec<CurveRow> {
    let mut cells: BTreeMap<(String, String, usize, u64), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        cells.entry((r.tensor.clone(), r.mode.clone(), r.n, r.rho.to_bits())).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((tensor, mode, n, rho), rs)| {
            let trials = rs.len();
            let successes = rs.iter().filter(|r| r.success).count();
            let (wilson_lo, wilson_hi) = wilson(successes, trials);
            CurveRow {
                tensor,
                mode,
                n,
                rho: f64::from_bits(rho),
                trials,
                successes,
                false_positives: rs.iter().filter(|r| r.false_positive).count(),
                rate: successes as f64 / trials as f64,
                wilson_lo,
                wilson_hi,
                mean_wall_s: rs.iter().map(|r| r.wall_s).sum::<f64>() / trials as f64,
                mean_multiplications: rs.iter().map(|r| r.multiplications as f64).sum::<f64>() / trials as f64,
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize, W: Write>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentRow {
    pub rho: f64,
    /// The hashing solver on T2112.
    pub t2112_hashing: f64,
    /// `log 5 / log sqrt 6`, the same tensor without hashing.
    pub t2112_flat: f64,
    pub dubiner: f64,
}

pub fn exponent_row(rho: f64) -> Result<ExponentRow> {
    Ok(ExponentRow {
        rho,
        t2112_hashing: omega_rho_t2112(rho)?,
        t2112_flat: exponent_bound(5, 6f64.sqrt())?,
        dubiner: dubiner_exponent(rho)?,
    })
}

/// `points` evenly spaced values of rho in `[0, 1]` plus the branch point
/// `1/3`.
pub fn exponent_grid(points: usize) -> Result<Vec<ExponentRow>> {
    let mut rhos: Vec<f64> = (0..points).map(|k| k as f64 / (points.max(2) - 1) as f64).collect();
    if !rhos.iter().any(|r| (r - 1.0 / 3.0).abs() < 1e-12) {
        rhos.push(1.0 / 3.0);
    }
    rhos.sort_by(f64::total_cmp);
    rhos.into_iter().map(exponent_row).collect()
}

/// One line of the verification suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

fn identity_checks(out: &mut Vec<Check>) -> Result<()> {
    for eps in [0.5, 0.1, 0.025] {
        for e in zoo_entries(eps)? {
            if e.name != "t2112" && eps != 0.025 {
                continue;
            }
            let got = e.decomposition.to_tensor()?;
            let (diff, tol) = if e.decomposition.is_integral() {
                (got.max_abs_diff(&e.target)?, 0.0)
            } else {
                // the eps = 0.5 expansion cancels less evenly
                (got.relative_diff(&e.target)?, if eps == 0.5 { 1e-10 } else { 1e-12 })
            };
            out.push(Check::new(format!("identity {} eps={eps}", e.name), diff <= tol, format!("error {diff:e}")));
        }
    }
    for eps in [0.5, 0.1] {
        let c = t2112_derivation(eps)?;
        out.push(Check::new(
            format!("t2112 derivation eps={eps}"),
            c.matches,
            format!("{} grouped terms, max rel err {:e}", c.group_terms, c.max_rel_err),
        ));
    }
    Ok(())
}

fn efficacy_checks(out: &mut Vec<Check>) -> Result<()> {
    for e in zoo_entries(0.025)? {
        let eff = e.eff();
        // T2112 sits O(eps^2) below its limit
        let tol = if e.name == "t2112" { 1e-2 } else { 1e-12 };
        out.push(Check::new(
            format!("efficacy {}", e.name),
            (eff - e.declared_eff).abs() <= tol,
            format!("eff {eff:.6} vs {:.6}, exponent {:.4}", e.declared_eff, e.exponent()?),
        ));
    }
    let limit = eff_table(&t2112_limit_tensor()).total;
    out.push(Check::new("efficacy t2112 limit", (limit - 6f64.sqrt()).abs() < 1e-12, format!("{limit:.12}")));
    Ok(())
}

/// Recursive application against the dense Kronecker power, on random
/// inputs in `[-8, 8]`. Decompositions with fractional coefficients go
/// through the exact integer route, which is what the solver uses for them;
/// plain `f64` recursion on those loses to cancellation at small eps.
pub fn oracle_check(d: &Decomposition, big_n: usize, pairs: usize, seed: u64) -> Result<(f64, u64)> {
    let dense = d.to_tensor()?.power(big_n as u32)?;
    let s = dense.shape();
    let mut r = rng::seeded(seed);
    let mut worst = 0.0f64;
    let mut mults = 0;
    let levels = vec![d; big_n];
    for _ in 0..pairs {
        let a = Matrix::from_fn(s.qi, s.qk, |_, _| r.gen_range(-8i64..=8));
        let b = Matrix::from_fn(s.qj, s.qk, |_, _| r.gen_range(-8i64..=8));
        let slow = dense.apply_direct(&a.map(|v| v as f64), &b.map(|v| v as f64))?;
        let fast = if d.is_integral() {
            let (c, stats) = d.apply_power(big_n, &a, &b, ApplyOptions::default())?;
            mults = stats.multiplications;
            c.map(|v| v as f64)
        } else {
            let (c, stats) = apply_levels_exact(&levels, &a, &b, ApplyOptions::default())?;
            mults = stats.apply.multiplications;
            c
        };
        worst = worst.max(fast.max_abs_diff(&slow) / slow.max_abs().max(1.0));
    }
    Ok((worst, mults))
}

/// Plain `f64` recursion against the dense power on inputs in `[-1, 1)`.
pub fn oracle_check_f64(d: &Decomposition, big_n: usize, pairs: usize, seed: u64) -> Result<(f64, u64)> {
    let dense = d.to_tensor()?.power(big_n as u32)?;
    let s = dense.shape();
    let mut r = rng::seeded(seed);
    let mut worst = 0.0f64;
    let mut mults = 0;
    for _ in 0..pairs {
        let a = Matrix::from_fn(s.qi, s.qk, |_, _| r.gen_range(-1.0..1.0));
        let b = Matrix::from_fn(s.qj, s.qk, |_, _| r.gen_range(-1.0..1.0));
        let (fast, stats) = d.apply_power(big_n, &a, &b, ApplyOptions::default())?;
        let slow = dense.apply_direct(&a, &b)?;
        worst = worst.max(fast.max_abs_diff(&slow) / slow.max_abs().max(1e-300));
        mults = stats.multiplications;
    }
    Ok((worst, mults))
}

fn oracle_checks(out: &mut Vec<Check>, pairs: usize) -> Result<()> {
    for e in zoo_entries(0.025)? {
        for big_n in 1..=3 {
            let (err, mults) = oracle_check(&e.decomposition, big_n, pairs, 17 + big_n as u64)?;
            let want = (e.decomposition.rank() as u64).pow(big_n as u32);
            out.push(Check::new(
                format!("oracle {} N={big_n}", e.name),
                err <= 1e-9 && mults == want,
                format!("rel err {err:e}, {mults} multiplications (want {want})"),
            ));
        }
    }
    let t = zoo_entry("t2112", 0.5)?.decomposition;
    for big_n in 1..=3 {
        let (err, _) = oracle_check_f64(&t, big_n, pairs, 29 + big_n as u64)?;
        out.push(Check::new(format!("oracle f64 t2112 eps=0.5 N={big_n}"), err <= 1e-9, format!("rel err {err:e}")));
    }
    Ok(())
}

/// Runs the whole suite. Always includes the lemma checks.
pub fn verify_suite(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    identity_checks(&mut out)?;
    efficacy_checks(&mut out)?;
    oracle_checks(&mut out, 10)?;
    let rep = lemma_checks(seed);
    out.push(Check::new(
        "lemma random signs",
        rep.sign_pass(),
        format!("min rate {:.4} >= {:.4}", rep.sign_min_rate, rep.sign_threshold),
    ));
    out.push(Check::new(
        "lemma random rectangles",
        rep.rect_pass(),
        format!("min rate {:.4} >= {:.4}", rep.rect_min_rate, rep.rect_threshold),
    ));
    out.push(Check::new(
        "lemma regular sets",
        rep.regular_pass(),
        format!("{} sets, {} violations", rep.regular_checked, rep.regular_violations),
    ));
    Ok(out)
}

fn same_term(a: &lumen_core::Rank1Term, b: &lumen_core::Rank1Term, tol: f64) -> bool {
    let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| (p - q).abs() <= tol);
    close(&a.alpha, &b.alpha) && close(&a.beta, &b.beta) && close(&a.gamma, &b.gamma)
}

/// Checks a user-supplied decomposition of zoo tensor `name`. A failure
/// names the first term that matches no term of the reference.
pub fn check_decomposition(d: &Decomposition, name: &str, eps: f64) -> Result<Check> {
    let entry = zoo_entry(name, eps)?;
    if d.shape() != entry.shape() {
        return Ok(Check::new(
            format!("file vs {name}"),
            false,
            format!("shape {} vs {}", d.shape(), entry.shape()),
        ));
    }
    let err = d.to_tensor()?.max_abs_diff(&entry.target)?;
    let tol = if d.is_integral() && entry.decomposition.is_integral() { 0.0 } else { 1e-12 * entry.target.max_abs() };
    if err <= tol {
        return Ok(Check::new(format!("file vs {name}"), true, format!("rank {}, error {err:e}", d.rank())));
    }
    let stray = d.terms().iter().position(|t| !entry.decomposition.terms().iter().any(|r| same_term(t, r, 1e-12)));
    let detail = match stray {
        Some(k) => format!("term {k} matches no reference term; max abs error {err:e}"),
        None => format!("terms match the reference but the sum is off by {err:e}"),
    };
    Ok(Check::new(format!("file vs {name}"), false, detail))
}

/// Echo of a solver run, written as JSON by `lumen solve`.
#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub tensor: String,
    pub eps: f64,
    pub mode: String,
    pub n: usize,
    pub d: usize,
    pub q: usize,
    pub seed: u64,
    pub plan: PlanEcho,
    pub rounds: usize,
    pub flags: Vec<FlagEcho>,
    pub majority_pairs: Vec<(usize, usize, usize)>,
    pub candidates: Vec<(usize, usize)>,
    pub planted: Option<(usize, usize)>,
    pub found: Option<bool>,
    pub multiplications: u64,
    pub g_tried: Vec<usize>,
    pub load_ms: f64,
    pub solve_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PlanEcho {
    pub kind: &'static str,
    pub rho: f64,
    pub q: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub levels: usize,
    pub f: f64,
    pub threshold_size: usize,
    pub symmetrized: bool,
    pub bucket_count: usize,
    pub g: usize,
    pub copies: usize,
    pub gamma: Option<f64>,
    pub reps: usize,
    pub majority: usize,
    pub detect_sigma: f64,
    pub expansion_r: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlagEcho {
    pub round: usize,
    pub bucket_i: usize,
    pub bucket_j: usize,
    pub score: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundRow {
    pub round: usize,
    pub g: usize,
    pub flags: usize,
    pub max_score: f64,
    pub mean_score: f64,
    pub score_var: f64,
}

pub fn round_rows(rep: &DetectionReport) -> Vec<RoundRow> {
    rep.rounds
        .iter()
        .map(|r| RoundRow {
            round: r.round,
            g: r.g,
            flags: r.flags,
            max_score: r.max_score,
            mean_score: r.mean_score,
            score_var: r.score_var,
        })
        .collect()
}

pub fn plan_echo(rep: &DetectionReport) -> PlanEcho {
    let p = &rep.plan;
    PlanEcho {
        kind: match p.kind {
            PlanKind::Uniform => "uniform",
            PlanKind::Lsh => "lsh",
        },
        rho: p.rho,
        q: p.q,
        big_n: p.big_n,
        levels: p.level_count(),
        f: p.f,
        threshold_size: p.threshold.size(),
        symmetrized: p.symmetrized,
        bucket_count: p.bucket_count,
        g: p.g,
        copies: p.copies,
        gamma: p.gamma,
        reps: p.reps,
        majority: p.majority,
        detect_sigma: p.detect_sigma,
        expansion_r: rep.layout.r,
    }
}

pub fn flag_echo(rep: &DetectionReport) -> Vec<FlagEcho> {
    rep.flagged
        .iter()
        .map(|f| FlagEcho { round: f.round, bucket_i: f.bucket_i, bucket_j: f.bucket_j, score: f.score })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggBenchRow {
    pub g: usize,
    pub d: usize,
    pub r: usize,
    pub m: usize,
    pub naive_s: f64,
    pub fast_s: f64,
    pub naive_multiplications: u64,
    pub fast_multiplications: u64,
    pub identical: bool,
}

/// Times the naive and matrix-product aggregation routes over bucket
/// sizes `gs`. Each timing is the best of `repeats` runs.
pub fn bench_aggregation(gs: &[usize], d: usize, r: usize, repeats: usize, seed: u64) -> Result<Vec<AggBenchRow>> {
    let mut rng = rng::seeded(seed);
    let m = lumen_core::instances::SplitFamily::new(0, d, r)?.len();
    gs.iter()
        .map(|&g| {
            let task = AggregationTask { vectors: (0..g).map(|_| PmVector::random(d, &mut rng)).collect(), r, m };
            let mut best = (f64::INFINITY, f64::INFINITY);
            let mut res = None;
            for _ in 0..repeats.max(1) {
                let t0 = Instant::now();
                let a = aggregate_naive(&task)?;
                let t1 = Instant::now();
                let b = aggregate_fast(&task, Kernel::Classical)?;
                let t2 = Instant::now();
                best = (best.0.min((t1 - t0).as_secs_f64()), best.1.min((t2 - t1).as_secs_f64()));
                res = Some((a, b));
            }
            let ((va, sa), (vb, sb)) = res.ok_or_else(|| anyhow!("no repeats"))?;
            Ok(AggBenchRow {
                g,
                d,
                r,
                m,
                naive_s: best.0,
                fast_s: best.1,
                naive_multiplications: sa.multiplications,
                fast_multiplications: sb.multiplications,
                identical: va == vb,
            })
        })
        .collect()
}

/// Parses a `q x q` matrix written one row per line (blank lines and `#`
/// comments skipped).
pub fn parse_matrix(text: &str) -> Result<Matrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().with_context(|| format!("bad entry {t:?}")))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let q = rows.len();
    if q == 0 || rows.iter().any(|r| r.len() != q) {
        bail!("expected a square matrix, got {q} rows of lengths {:?}", rows.iter().map(Vec::len).collect::<Vec<_>>());
    }
    Ok(Matrix::from_vec(q, q, rows.concat())?)
}
