//! Null calibration of the detection score.

use crate::error::Result;
use crate::instances::{gen_null, Rows, SplitFamily};
use crate::tensor::Decomposition;

use super::bucket::{bucket_uniform, Window};
use super::detect::{detect, VarianceModel};

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationReport {
    pub reps: usize,
    /// `sum C^2 / sum Var` over every entry and round.
    pub pooled_ratio: f64,
    /// Per-entry `mean_k (C/sigma)^2`, averaged over entries.
    pub mean_entry_ratio: f64,
    pub min_entry_ratio: f64,
    pub max_entry_ratio: f64,
    /// Largest `|mean_k C/sigma|` over entries, times `sqrt(reps)`; about a
    /// standard normal maximum when the score is centred.
    pub max_mean_z: f64,
    pub flagged_fraction: f64,
    /// Entry-rounds scored.
    pub scored: usize,
}

/// Runs `reps` uniform-bucket rounds of `decomp^N` on a planted-free
/// instance of `n` vectors per side and compares the realized scores with
/// the variance model.
pub fn null_calibration(
    decomp: &Decomposition,
    big_n: usize,
    n: usize,
    reps: usize,
    detect_sigma: f64,
    seed: u64,
) -> Result<CalibrationReport> {
    let s = decomp.shape();
    let window = s.qk.pow(big_n as u32);
    let bucket_count = s.qi.pow(big_n as u32);
    let inst = gen_null(n, reps * window, 2, seed)?;
    let (Rows::Bits(xs), Rows::Bits(ys)) = (&inst.x, &inst.y) else {
        unreachable!("binary null instance");
    };
    let family = SplitFamily::new(0, reps * window, 1)?;
    let levels = alloc::vec![decomp; big_n];
    let model = VarianceModel::new(&levels)?;
    let cells = bucket_count * s.qj.pow(big_n as u32);
    let mut sum_sq = alloc::vec![0.0; cells];
    let mut sum = alloc::vec![0.0; cells];
    let mut counts = alloc::vec![0usize; cells];
    let (mut c2, mut v2, mut flagged, mut scored) = (0.0, 0.0, 0usize, 0usize);
    for k in 0..reps {
        let w = Window { family: &family, start: k * window, len: window };
        let state = bucket_uniform(xs, ys, bucket_count, 1, w, crate::rng::derive_seed(seed, k as u64));
        let round = detect(&state, &levels, &model, detect_sigma, 1)?;
        for f in 0..cells {
            let var = round.variance.data()[f];
            if var <= 0.0 {
                continue;
            }
            let c = round.c.data()[f];
            let z = round.score.data()[f];
            c2 += c * c;
            v2 += var;
            sum_sq[f] += z * z;
            sum[f] += z;
            counts[f] += 1;
            scored += 1;
            if z >= detect_sigma {
                flagged += 1;
            }
        }
    }
    let ratios: alloc::vec::Vec<f64> =
        (0..cells).filter(|&f| counts[f] > 0).map(|f| sum_sq[f] / counts[f] as f64).collect();
    let max_mean_z = (0..cells)
        .filter(|&f| counts[f] > 0)
        .map(|f| libm::fabs(sum[f] / counts[f] as f64) * libm::sqrt(counts[f] as f64))
        .fold(0.0, f64::max);
    Ok(CalibrationReport {
        reps,
        pooled_ratio: c2 / v2,
        mean_entry_ratio: ratios.iter().sum::<f64>() / ratios.len().max(1) as f64,
        min_entry_ratio: ratios.iter().cloned().fold(f64::INFINITY, f64::min),
        max_entry_ratio: ratios.iter().cloned().fold(0.0, f64::max),
        max_mean_z,
        flagged_fraction: flagged as f64 / scored.max(1) as f64,
        scored,
    })
}
