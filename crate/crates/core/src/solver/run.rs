//! The two end-to-end solvers and candidate verification.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::hashing::StochasticPair;
use crate::instances::{to_pm_rows, Instance, PmVector, SplitFamily};
use crate::rng;
use crate::tensor::Decomposition;

use super::bucket::{bucket_lsh, bucket_uniform, BucketState, Window};
use super::detect::{detect, VarianceModel};
use super::plan::{g_schedule, lsh_copies, plan_lsh, plan_uniform, SolverConfig, SolverPlan};

/// Which raw coordinates serve which purpose.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoordinateLayout {
    pub verify_start: usize,
    pub verify_len: usize,
    pub bucket_start: usize,
    pub bucket_len: usize,
    pub expand_start: usize,
    pub expand_len: usize,
    /// Subset size of the expansion; 1 means raw coordinates.
    pub r: usize,
    /// Entries of the expansion one round uses.
    pub window_len: usize,
}

/// Largest verification block.
const VERIFY_MAX: usize = 1024;

impl CoordinateLayout {
    /// Splits `0..d` into expansion, bucketing and verification ranges.
    /// `bucket_need` raw coordinates are wanted for hashing over all
    /// rounds; `bucket_min` is what one round needs.
    fn new(d: usize, bucket_need: usize, bucket_min: usize, r: usize, window_len: usize, rounds: usize) -> Option<Self> {
        let verify_len = VERIFY_MAX.min(d / 4).max(1);
        let free = d.checked_sub(verify_len)?;
        let bucket_len = if bucket_need == 0 { 0 } else { bucket_need.min(bucket_min.max(free / 4)) };
        if bucket_len < bucket_min {
            return None;
        }
        let expand_len = free - bucket_len;
        let fits = if r == 1 {
            expand_len >= rounds * window_len
        } else {
            SplitFamily::new(0, expand_len, r).map(|f| f.len() >= window_len).unwrap_or(false)
        };
        fits.then_some(CoordinateLayout {
            verify_start: d - verify_len,
            verify_len,
            bucket_start: expand_len,
            bucket_len,
            expand_start: 0,
            expand_len,
            r,
            window_len,
        })
    }
}

/// Smallest subset size the expansion may use: 1 if the raw coordinates
/// cover every round, else the smallest even `r` whose family covers one
/// window, as long as `rho^r >= 0.05`.
///
/// `plan_for(rho)` returns the plan, its window length, the raw bucketing
/// coordinates one round needs, and the number of rounds it may run.
fn choose_expansion(
    d: usize,
    rho: f64,
    mut plan_for: impl FnMut(f64) -> Result<(SolverPlan, usize, usize, usize)>,
) -> Result<(SolverPlan, CoordinateLayout)> {
    let mut r = 1;
    loop {
        let rho_r = libm::pow(rho, r as f64);
        if rho_r < 0.05 {
            return Err(Error::domain(format!("d = {d} too short: expansion would need rho^r < 0.05")));
        }
        let (plan, window_len, bucket_min, rounds) = plan_for(rho_r)?;
        let bucket_need = bucket_min * rounds;
        if let Some(layout) = CoordinateLayout::new(d, bucket_need, bucket_min, r, window_len, rounds) {
            return Ok((plan, layout));
        }
        r = if r == 1 { 2 } else { r + 2 };
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundStats {
    pub round: usize,
    pub g: usize,
    pub flags: usize,
    pub max_score: f64,
    pub mean_score: f64,
    pub score_var: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlaggedBuckets {
    pub round: usize,
    pub bucket_i: usize,
    pub bucket_j: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionReport {
    pub plan: SolverPlan,
    pub layout: CoordinateLayout,
    pub rounds: Vec<RoundStats>,
    pub flagged: Vec<FlaggedBuckets>,
    /// Input pairs that reached the majority, with their hit counts.
    pub majority_pairs: Vec<(usize, usize, usize)>,
    /// Pairs that passed verification.
    pub candidates: Vec<(usize, usize)>,
    pub multiplications: u64,
    pub g_tried: Vec<usize>,
}

impl DetectionReport {
    pub fn rounds_run(&self) -> usize {
        self.rounds.len()
    }
}

/// Keeps pairs whose inner product over the verification block is at
/// least `rho * len / 2`.
pub fn verify_candidates(
    xs: &[PmVector],
    ys: &[PmVector],
    pairs: &[(usize, usize)],
    start: usize,
    len: usize,
    rho: f64,
) -> Vec<(usize, usize)> {
    let threshold = rho * len as f64 / 2.0;
    pairs.iter().copied().filter(|&(u, v)| xs[u].dot_range(&ys[v], start, len) as f64 >= threshold).collect()
}

fn round_stats(round: usize, g: usize, score: &crate::matrix::Matrix<f64>, flags: usize) -> RoundStats {
    let data = score.data();
    let n = data.len().max(1) as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    let max_score = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    RoundStats { round, g, flags, max_score, mean_score: mean, score_var: var }
}

/// Shared round loop. `bucketize(round, window, seed)` produces the state
/// of one round.
struct Runner<'a> {
    xs: &'a [PmVector],
    ys: &'a [PmVector],
    rho_raw: f64,
    cfg: SolverConfig,
    levels: Vec<&'a Decomposition>,
    model: VarianceModel,
    layout: CoordinateLayout,
    family: SplitFamily,
}

struct Outcome {
    rounds: Vec<RoundStats>,
    flagged: Vec<FlaggedBuckets>,
    majority_pairs: Vec<(usize, usize, usize)>,
    candidates: Vec<(usize, usize)>,
    multiplications: u64,
}

impl<'a> Runner<'a> {
    fn window(&self, round: usize, r: &mut rng::Rng) -> Window<'_> {
        let len = self.layout.window_len;
        let start = if self.layout.r == 1 {
            (round * len) % (self.family.len() - len + 1)
        } else {
            r.gen_range(0..=self.family.len() - len)
        };
        Window { family: &self.family, start, len }
    }

    fn run(
        &self,
        first_round: usize,
        g: usize,
        seed: u64,
        mut bucketize: impl FnMut(usize, Window<'_>, u64) -> BucketState,
    ) -> Result<Outcome> {
        let reps = self.cfg.reps;
        let majority = self.cfg.majority;
        let mut r = rng::stream(seed, 3);
        let mut hits: BTreeMap<(u32, u32), usize> = BTreeMap::new();
        let mut decided: BTreeMap<(u32, u32), bool> = BTreeMap::new();
        let mut out = Outcome { rounds: vec![], flagged: vec![], majority_pairs: vec![], candidates: vec![], multiplications: 0 };
        for k in 0..reps {
            let round = first_round + k;
            let w = self.window(round, &mut r);
            let state = bucketize(round, w, rng::derive_seed(seed, round as u64));
            let scores = detect(&state, &self.levels, &self.model, self.cfg.detect_sigma, self.cfg.cutoff)?;
            out.multiplications += scores.multiplications;
            out.rounds.push(round_stats(round, g, &scores.score, scores.flags.len()));
            let mut this_round: Vec<(u32, u32)> = Vec::new();
            for &(bi, bj, s) in &scores.flags {
                out.flagged.push(FlaggedBuckets { round, bucket_i: bi, bucket_j: bj, score: s });
                for &u in &state.x_buckets[bi] {
                    for &v in &state.y_buckets[bj] {
                        this_round.push((u, v));
                    }
                }
            }
            this_round.sort_unstable();
            this_round.dedup();
            for p in this_round {
                let h = hits.entry(p).or_insert(0);
                *h += 1;
                if *h >= majority && !decided.contains_key(&p) {
                    let pair = (p.0 as usize, p.1 as usize);
                    let ok = !verify_candidates(
                        self.xs,
                        self.ys,
                        &[pair],
                        self.layout.verify_start,
                        self.layout.verify_len,
                        self.rho_raw,
                    )
                    .is_empty();
                    decided.insert(p, ok);
                    out.majority_pairs.push((pair.0, pair.1, *h));
                    if ok {
                        out.candidates.push(pair);
                    }
                }
            }
            if self.cfg.early_stop {
                if !out.candidates.is_empty() {
                    break;
                }
                let remaining = reps - k - 1;
                let best_open = hits.iter().filter(|(p, _)| !decided.contains_key(p)).map(|(_, h)| *h).max().unwrap_or(0);
                if best_open + remaining < majority {
                    break;
                }
            }
        }
        for (u, v, h) in &mut out.majority_pairs {
            *h = hits[&(*u as u32, *v as u32)];
        }
        Ok(out)
    }
}

/// Uniform-bucket solver.
pub fn solve_uniform(inst: &Instance, decomp: &Decomposition, cfg: &SolverConfig, seed: u64) -> Result<DetectionReport> {
    let (xs, ys, rho_raw) = to_pm_rows(inst, seed)?;
    let qk = decomp.shape().qk;
    let (plan, layout) = choose_expansion(inst.d, rho_raw, |rho| {
        let p = plan_uniform(inst.n, rho, decomp, cfg)?;
        let per = if p.symmetrized { qk * qk } else { qk };
        let window = per.pow(p.big_n as u32);
        Ok((p, window, 0, cfg.reps))
    })?;
    let sym;
    let level = if plan.symmetrized {
        sym = decomp.kron(&decomp.reflect()?)?;
        &sym
    } else {
        decomp
    };
    let levels: Vec<&Decomposition> = vec![level; plan.big_n];
    let model = VarianceModel::new(&levels)?;
    let family = SplitFamily::new(layout.expand_start, layout.expand_len, layout.r)?;
    let runner = Runner { xs: &xs, ys: &ys, rho_raw, cfg: *cfg, levels, model, layout: layout.clone(), family };
    let (bucket_count, copies) = (plan.bucket_count, plan.copies);
    let out = runner.run(0, plan.g, seed, |_, w, s| bucket_uniform(&xs, &ys, bucket_count, copies, w, s))?;
    Ok(DetectionReport {
        g_tried: vec![plan.g],
        plan,
        layout,
        rounds: out.rounds,
        flagged: out.flagged,
        majority_pairs: out.majority_pairs,
        candidates: out.candidates,
        multiplications: out.multiplications,
    })
}

/// Hashing solver: buckets come from the instance's own symbols through
/// `qp`, over `N` levels of the tensor and `N` of its reflection.
pub fn solve_lsh(
    inst: &Instance,
    decomp: &Decomposition,
    qp: &StochasticPair,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<DetectionReport> {
    if qp.q() != inst.q {
        return Err(Error::shape(format!("stochastic pair over q = {}", inst.q), qp.q()));
    }
    let (xs, ys, rho_raw) = to_pm_rows(inst, seed)?;
    let p = inst.law.distribution()?;
    let t = decomp.to_tensor()?;
    let qk = decomp.shape().qk;
    let (plan, layout) = choose_expansion(inst.d, rho_raw, |rho| {
        let pl = plan_lsh(inst.n, &p, rho, decomp, qp, cfg)?;
        let rounds = cfg.reps * g_schedule(rho, &t, pl.big_n).len();
        let (window, per_round) = (qk.pow(2 * pl.big_n as u32), 2 * pl.big_n);
        Ok((pl, window, per_round, rounds))
    })?;
    let refl = decomp.reflect()?;
    let mut levels: Vec<&Decomposition> = vec![decomp; plan.big_n];
    levels.extend(vec![&refl; plan.big_n]);
    let model = VarianceModel::new(&levels)?;
    let family = SplitFamily::new(layout.expand_start, layout.expand_len, layout.r)?;
    let runner = Runner { xs: &xs, ys: &ys, rho_raw, cfg: *cfg, levels, model, layout: layout.clone(), family };
    let per_round = 2 * plan.big_n;
    let mut report = DetectionReport {
        plan: plan.clone(),
        layout: layout.clone(),
        rounds: vec![],
        flagged: vec![],
        majority_pairs: vec![],
        candidates: vec![],
        multiplications: 0,
        g_tried: vec![],
    };
    let mut coord_rng = rng::stream(seed, 4);
    for g in g_schedule(plan.rho, &t, plan.big_n) {
        let copies = lsh_copies(plan.bucket_count, g, inst.n);
        let first = report.rounds.len();
        let mut coords_for = |round: usize| -> Vec<usize> {
            let base = layout.bucket_start;
            if (round + 1) * per_round <= layout.bucket_len {
                (base + round * per_round..base + (round + 1) * per_round).collect()
            } else {
                sample(&mut coord_rng, layout.bucket_len, per_round).into_iter().map(|c| base + c).collect()
            }
        };
        let out = runner.run(first, g, rng::derive_seed(seed, 1000 + g as u64), |round, w, s| {
            let coords = coords_for(round);
            bucket_lsh(&inst.x, &inst.y, &xs, &ys, qp, &coords, copies, w, s)
        })?;
        report.g_tried.push(g);
        report.rounds.extend(out.rounds);
        report.flagged.extend(out.flagged);
        report.majority_pairs.extend(out.majority_pairs);
        report.multiplications += out.multiplications;
        if !out.candidates.is_empty() {
            report.candidates = out.candidates;
            report.plan.g = g;
            report.plan.copies = copies;
            break;
        }
    }
    Ok(report)
}
