use lumen_core::efficacy::{eff_table, exponent_bound};
use lumen_core::exact::apply_levels_exact;
use lumen_core::hashing::{JointDistribution, StochasticPair};
use lumen_core::instances::*;
use lumen_core::solver::bucket::{assign_lsh, assign_uniform};
use lumen_core::solver::*;
use lumen_core::tensor::{ApplyOptions, Decomposition, Rank1Term};
use lumen_core::zoo::*;
use lumen_core::{Matrix, TensorShape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn set(q: usize, pairs: &[(usize, usize)]) -> IndicatorSet {
    IndicatorSet::new(q, pairs)
}

#[test]
fn skew_examples() {
    let diag = skew_metrics(&set(2, &[(0, 0), (1, 1)]));
    assert_eq!((diag.v_x, diag.v_y, diag.regular), (2, 2, true));
    let row = skew_metrics(&set(2, &[(0, 0), (0, 1)]));
    assert_eq!((row.v_x, row.v_y, row.regular), (4, 2, true));
    let ell = skew_metrics(&set(2, &[(0, 0), (0, 1), (1, 0)]));
    assert_eq!((ell.v_x, ell.v_y, ell.regular), (5, 5, false));
}

#[test]
fn indicator_set_kron_and_transpose() {
    let row = set(2, &[(0, 0), (0, 1)]);
    let t = row.transpose();
    assert!(t.contains(0, 0) && t.contains(1, 0) && !t.contains(0, 1));
    let k = row.kron(&t);
    assert_eq!(k.q, 4);
    assert_eq!(k.size(), 4);
    // (0,0) x (1,0) -> (0*2+1, 0*2+0)
    assert!(k.contains(1, 0));
    assert_eq!(skew_metrics(&k).v_x, skew_metrics(&k).v_y);
}

#[test]
fn limit_tie_picks_the_diagonal() {
    let (f, s) = best_threshold_of(&t2112_limit_tensor()).unwrap();
    assert!((f - 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(s, set(2, &[(0, 0), (1, 1)]));
    let m = skew_metrics(&s);
    assert!((m.v_x as f64) <= 2f64.powf(1.5));
}

#[test]
fn matmul_plan_matches_the_exponent_bound() {
    let d = strassen_decomposition();
    let cfg = SolverConfig::for_n(1024);
    let plan = plan_uniform(1024, 0.8, &d, &cfg).unwrap();
    assert!((plan.f - 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(plan.threshold.size(), 4);
    assert!(!plan.symmetrized);
    let implied = 7f64.ln() / (plan.f * (plan.threshold.size() as f64).sqrt()).ln();
    let eff = eff_table(&d.to_tensor().unwrap()).total;
    assert!((implied - exponent_bound(7, eff).unwrap()).abs() < 1e-9);
    assert!((implied - 1.8716).abs() < 1e-4);
    // E2 = 0, t0 = 1, m = 25600^(2/3) = 868.5 -> N = 10, g = floor(0.8 * 32 / 20) = 1, t = 1
    assert_eq!((plan.big_n, plan.g, plan.copies, plan.bucket_count), (10, 1, 1, 1024));
    assert_eq!(plan.level_count(), 10);
    let (m, n) = ((plan.bucket_count * plan.g) as f64, (plan.n * plan.copies) as f64);
    assert!(m / n <= 2.0 && n / m <= 2.0);
}

#[test]
fn zoo_plans_are_consistent_at_the_base_level() {
    for e in zoo_entries(0.025).unwrap() {
        let d = &e.decomposition;
        let (f, s) = best_threshold(d).unwrap();
        let eff = e.eff();
        let implied = (d.rank() as f64).ln() / (f * (s.size() as f64).sqrt()).ln();
        // the partition maximum can only lose against the full efficacy
        assert!(implied >= exponent_bound(d.rank(), eff).unwrap() - 1e-9, "{}", e.name);
    }
}

/// All of a 2x2 product's terms that land in output row 0.
fn one_row_tensor() -> Decomposition {
    let s = TensorShape::new(2, 2, 2).unwrap();
    let mut terms = Vec::new();
    for j in 0..2 {
        for k in 0..2 {
            let mut a = vec![0.0; 4];
            let mut b = vec![0.0; 4];
            let mut g = vec![0.0; 4];
            a[k] = 1.0;
            b[j * 2 + k] = 1.0;
            g[j] = 1.0;
            terms.push(Rank1Term::new(a, b, g));
        }
    }
    Decomposition::new(s, terms).unwrap()
}

#[test]
fn single_row_efficacy_forces_symmetrization() {
    let d = one_row_tensor();
    let plan = plan_uniform(256, 0.8, &d, &SolverConfig::for_n(256)).unwrap();
    assert!(plan.symmetrized);
    assert_eq!(plan.q, 4);
    assert!((plan.f - 2.0).abs() < 1e-12);
    assert_eq!(plan.threshold.size(), 4);
}

#[test]
fn planning_rejects_weak_tensors_and_bad_rho() {
    let unit = Decomposition::unit();
    let s = TensorShape::new(2, 2, 2).unwrap();
    let single = Decomposition::new(s, vec![Rank1Term::new(vec![1.0, 0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0])]).unwrap();
    let cfg = SolverConfig::for_n(64);
    assert!(plan_uniform(64, 0.8, &single, &cfg).is_err());
    assert!(plan_uniform(64, 0.8, &unit, &cfg).is_err());
    assert!(plan_uniform(64, 0.0, &strassen_decomposition(), &cfg).is_err());
    assert!(plan_uniform(64, 1.5, &strassen_decomposition(), &cfg).is_err());
}

#[test]
fn config_constants() {
    let small = SolverConfig::for_n(1024);
    assert_eq!((small.reps, small.majority, small.detect_sigma), (25, 7, 10.0));
    let big = SolverConfig::for_n(1 << 15);
    let ln = ((1u64 << 15) as f64).ln();
    assert_eq!(big.reps, (100.0 * ln).ceil() as usize);
    assert_eq!(big.majority, (20.0 * ln).ceil() as usize);
}

#[test]
fn lsh_plan_solves_the_level_equation() {
    let d = t2112_decomposition(0.025).unwrap();
    let p = JointDistribution::rho(0.8).unwrap();
    let plan = plan_lsh(1024, &p, 0.8, &d, &StochasticPair::identity(2), &SolverConfig::for_n(1024)).unwrap();
    let gm = plan.gamma.unwrap();
    assert!(gm > 0.5);
    let base = 4.0 * gm;
    assert!(base.powi(plan.big_n as i32) >= 20.0 * 1024.0);
    assert!(base.powi(plan.big_n as i32 - 1) < 20.0 * 1024.0);
    assert_eq!(plan.bucket_count, 1 << (2 * plan.big_n));
    assert_eq!(plan.level_count(), 2 * plan.big_n);
    assert_eq!(plan.copies, lsh_copies(plan.bucket_count, plan.g, 1024));
}

#[test]
fn lsh_plan_refuses_small_gamma() {
    // one coefficient: uniform hashing keeps gamma at 1/q^2
    let s = TensorShape::new(2, 2, 2).unwrap();
    let e0 = vec![1.0, 0.0, 0.0, 0.0];
    let d = Decomposition::new(s, vec![Rank1Term::new(e0.clone(), e0.clone(), e0)]).unwrap();
    let p = JointDistribution::rho(0.8).unwrap();
    let err = plan_lsh(1024, &p, 0.8, &d, &StochasticPair::uniform(2), &SolverConfig::for_n(1024));
    assert!(err.is_err());
}

#[test]
fn g_schedule_doubles_up_to_the_cap() {
    let t = t2112_target(0.025).unwrap();
    let s = g_schedule(0.8, &t, 8);
    assert_eq!(s[0], 1);
    assert!(s.windows(2).all(|w| w[1] == 2 * w[0]));
    let max_eff2 = eff_table(&t).squared().data().iter().cloned().fold(0.0, f64::max);
    let cap = 0.8 * max_eff2.powi(8) / 20.0;
    assert!(*s.last().unwrap() as f64 <= cap.max(1.0));
    assert!((*s.last().unwrap() * 2) as f64 > cap);
    assert_eq!(g_schedule(0.8, &t, 1), vec![1]);
}

#[test]
fn uniform_assignment_conserves_copies() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let (n, m, t) = (400, 64, 5);
    let buckets = assign_uniform(n, m, t, &mut r);
    let mut per_input = vec![0usize; n];
    for b in &buckets {
        let mut sorted = b.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), b.len(), "input repeated in a bucket");
        for &u in b {
            per_input[u as usize] += 1;
        }
    }
    assert!(per_input.iter().all(|&c| (1..=t).contains(&c)));
    // expected distinct buckets among t draws from m
    let want = n as f64 * m as f64 * (1.0 - (1.0 - 1.0 / m as f64).powi(t as i32));
    let total: usize = buckets.iter().map(|b| b.len()).sum();
    assert!((total as f64 - want).abs() < 4.0 * (n as f64).sqrt(), "{total} vs {want}");
    let single = assign_uniform(n, m, 1, &mut r);
    assert_eq!(single.iter().map(|b| b.len()).sum::<usize>(), n);
}

#[test]
fn one_copy_per_input_gives_unit_occupancy_on_average() {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let n = 256;
    let mut occupancy0 = 0.0;
    let trials = 4000;
    for _ in 0..trials {
        occupancy0 += assign_uniform(n, n, 1, &mut r)[0].len() as f64;
    }
    let mean = occupancy0 / trials as f64;
    let sd = ((1.0 - 1.0 / n as f64) / trials as f64).sqrt();
    assert!((mean - 1.0).abs() < 3.0 * sd, "{mean}");
}

#[test]
fn planted_copies_meet_a_fixed_bucket_pair_at_rate_one_over_m_squared() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let (m, trials) = (4, 40_000);
    let mut hit = 0;
    for _ in 0..trials {
        let x = assign_uniform(1, m, 1, &mut r);
        let y = assign_uniform(1, m, 1, &mut r);
        hit += (!x[2].is_empty() && !y[1].is_empty()) as usize;
    }
    let p = 1.0 / 16.0;
    let got = hit as f64 / trials as f64;
    assert!((got - p).abs() < 3.0 * (p * (1.0 - p) / trials as f64).sqrt(), "{got}");
}

fn bit_rows(bits: &[Vec<u8>]) -> Rows {
    Rows::Bits(bits.iter().map(|b| PmVector::from_bits(b)).collect())
}

#[test]
fn identity_hashing_follows_the_symbols() {
    let x = bit_rows(&[vec![0, 1, 1], vec![1, 0, 1]]);
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let b = assign_lsh(&x, &[2, 0], &StochasticPair::identity(2), false, 3, &mut r);
    // row 0 reads symbols (1, 0) -> bucket 2, row 1 reads (1, 1) -> bucket 3
    assert_eq!(b[2], vec![0]);
    assert_eq!(b[3], vec![1]);
    let mirrored = assign_lsh(&x, &[2, 0], &StochasticPair::identity(2), true, 1, &mut r);
    assert_eq!(mirrored, b);
}

#[test]
fn flip_hashing_agreement_rate_matches_the_transition_law() {
    let (rho, a) = (0.2, 0.1127);
    let qp = StochasticPair::symmetric_flip(a).unwrap();
    let p = JointDistribution::rho(rho).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let trials = 40_000;
    let mut agree = 0;
    for _ in 0..trials {
        let (s, t) = p.sample(&mut r);
        let x = bit_rows(&[vec![s as u8]]);
        let y = bit_rows(&[vec![t as u8]]);
        let bx = assign_lsh(&x, &[0, 0], &qp, false, 1, &mut r);
        let by = assign_lsh(&y, &[0, 0], &qp, true, 1, &mut r);
        let ix = bx.iter().position(|b| !b.is_empty()).unwrap();
        let iy = by.iter().position(|b| !b.is_empty()).unwrap();
        agree += (ix / 2 == iy / 2) as usize;
    }
    let same = (1.0 - a) * (1.0 - a) + a * a;
    let want = (1.0 + rho) / 2.0 * same + (1.0 - rho) / 2.0 * (1.0 - same);
    let got = agree as f64 / trials as f64;
    assert!((got - want).abs() < 3.0 * (want * (1.0 - want) / trials as f64).sqrt(), "{got} vs {want}");
}

#[test]
fn uniform_hashing_matches_uniform_occupancy() {
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let rows: Vec<Vec<u8>> = (0..512).map(|_| (0..4).map(|_| r.gen_range(0..2)).collect()).collect();
    let x = bit_rows(&rows);
    let trials = 200;
    let mut occ = 0.0;
    for _ in 0..trials {
        occ += assign_lsh(&x, &[0, 1, 2, 3], &StochasticPair::uniform(2), false, 1, &mut r)[5].len() as f64;
    }
    let mean = occ / trials as f64;
    let sd = (512.0 / 16.0 * (15.0 / 16.0) / trials as f64).sqrt();
    assert!((mean - 32.0).abs() < 3.0 * sd, "{mean}");
}

fn empty_state(m: usize, cols: usize) -> BucketState {
    BucketState {
        x_buckets: vec![vec![]; m],
        y_buckets: vec![vec![]; m],
        a: Matrix::zeros(m, cols),
        b: Matrix::zeros(m, cols),
        s_a: vec![1; m],
        s_b: vec![1; m],
    }
}

#[test]
fn zero_aggregates_give_zero_scores() {
    let d = strassen_decomposition();
    let levels = vec![&d; 3];
    let model = VarianceModel::new(&levels).unwrap();
    let mut state = empty_state(8, 8);
    for (b, u) in state.x_buckets.iter_mut().zip(0u32..) {
        b.push(u);
    }
    state.y_buckets = state.x_buckets.clone();
    let out = detect(&state, &levels, &model, 10.0, 2).unwrap();
    assert!(out.score.data().iter().all(|s| *s == 0.0));
    assert!(out.flags.is_empty());
    assert_eq!(out.multiplications, 343);
}

#[test]
fn variance_model_matches_direct_sum() {
    let d = t2112_decomposition(0.5).unwrap();
    let levels = vec![&d; 2];
    let model = VarianceModel::new(&levels).unwrap();
    let sx = [1.0, 2.0, 3.0, 4.0];
    let sy = [2.0, 0.0, 1.0, 5.0];
    let var = model.variances(&sx, &sy).unwrap();
    let t = d.to_tensor().unwrap().power(2).unwrap();
    let s = t.shape();
    for i in 0..4 {
        for j in 0..4 {
            let mut want = 0.0;
            for (x, y, z, c) in t.nonzeros() {
                if z == i * s.qj + j {
                    want += c * c * sx[x / s.qk] * sy[y / s.qk];
                }
            }
            assert!((var.get(i, j) - want).abs() < 1e-9 * want.max(1.0), "({i},{j})");
        }
    }
}

/// One random member per bucket and the planted pair in bucket `i0` on
/// both sides. Returns `s_a s_b C[i0, i0]` and its model sigma.
fn forced_round(d: &Decomposition, big_n: usize, rho: f64, i0: usize, r: &mut ChaCha8Rng) -> (f64, f64, bool) {
    let m = 1usize << big_n;
    let len = 1usize << big_n;
    let mut xs: Vec<PmVector> = (0..m).map(|_| PmVector::random(len, r)).collect();
    let mut ys: Vec<PmVector> = (0..m).map(|_| PmVector::random(len, r)).collect();
    let mut y = xs[i0].clone();
    for l in 0..len {
        if r.gen::<f64>() < (1.0 - rho) / 2.0 {
            y.flip(l);
        }
    }
    ys[i0] = y;
    xs.truncate(m);
    let fam = SplitFamily::new(0, len, 1).unwrap();
    let w = Window { family: &fam, start: 0, len };
    let members: Vec<Vec<u32>> = (0..m as u32).map(|u| vec![u]).collect();
    let (a, s_a) = bucket::aggregate(&members, &xs, w, r);
    let (b, s_b) = bucket::aggregate(&members, &ys, w, r);
    let state = BucketState { x_buckets: members.clone(), y_buckets: members, a, b, s_a, s_b };
    let levels = vec![d; big_n];
    let model = VarianceModel::new(&levels).unwrap();
    let out = detect(&state, &levels, &model, 10.0, 5).unwrap();
    let sc = out.score.get(i0, i0);
    let sigma = out.variance.get(i0, i0).sqrt();
    (sc * sigma, sigma, out.flags.iter().any(|f| f.0 == i0 && f.1 == i0))
}

#[test]
fn planted_pair_in_a_diagonal_bucket_is_flagged_often() {
    // eff_ii of the 2x2 product is sqrt 2 per level: 2^(9/2) = 22.6 >= 20 / rho
    let d = strassen_decomposition();
    let mut r = ChaCha8Rng::seed_from_u64(7);
    let reps = 50;
    let hits = (0..reps).filter(|_| forced_round(&d, 9, 1.0, 37, &mut r).2).count();
    let p = 0.24;
    assert!(hits as f64 / reps as f64 >= p - 3.0 * (p * (1.0 - p) / reps as f64).sqrt(), "{hits}/{reps}");
}

#[test]
fn planted_signal_has_the_predicted_mean() {
    let d = strassen_decomposition();
    let (big_n, rho, i0, reps) = (4, 0.6, 5, 400);
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let mut sum = 0.0;
    let mut sigma = 0.0;
    for _ in 0..reps {
        let (c, s, _) = forced_round(&d, big_n, rho, i0, &mut r);
        sum += c;
        sigma = s;
    }
    // sum_k T(X[i0,k] Y[i0,k] Z[i0,i0]) of the 16x16 product: one per k
    let t = matmul_tensor(2, 2).unwrap().power(big_n as u32).unwrap();
    let s = t.shape();
    let diag: f64 = (0..s.qk).map(|k| t.at(i0 * s.qk + k, i0 * s.qk + k, i0 * s.qj + i0)).sum();
    assert_eq!(diag, 16.0);
    let mean = sum / reps as f64;
    assert!((mean - rho * diag).abs() < 4.0 * sigma / (reps as f64).sqrt(), "{mean} vs {}", rho * diag);
}

#[test]
fn null_scores_are_calibrated() {
    for d in [strassen_decomposition(), t2112_decomposition(0.025).unwrap()] {
        let rep = null_calibration(&d, 4, 64, 200, 10.0, 11).unwrap();
        assert!((0.8..=1.25).contains(&rep.pooled_ratio), "{rep:?}");
        assert!((0.8..=1.25).contains(&rep.mean_entry_ratio), "{rep:?}");
        let p = 0.01;
        assert!(rep.flagged_fraction <= p + 3.0 * (p * (1.0 - p) / rep.scored as f64).sqrt(), "{rep:?}");
        assert!(rep.max_mean_z < 5.0, "{rep:?}");
    }
}

#[test]
fn reflected_tensor_on_swapped_inputs_transposes_the_scores() {
    for d in [strassen_decomposition(), t2112_decomposition(0.025).unwrap()] {
        let refl = d.reflect().unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let a = Matrix::from_fn(8, 8, |_, _| r.gen_range(-4i64..=4));
        let b = Matrix::from_fn(8, 8, |_, _| r.gen_range(-4i64..=4));
        let (c, _) = apply_levels_exact(&[&d; 3], &a, &b, ApplyOptions::default()).unwrap();
        let (ct, _) = apply_levels_exact(&[&refl; 3], &b, &a, ApplyOptions::default()).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert!((c.get(i, j) - ct.get(j, i)).abs() < 1e-9 * c.get(i, j).abs().max(1.0));
            }
        }
        let model = VarianceModel::new(&[&d; 3]).unwrap();
        let model_t = VarianceModel::new(&[&refl; 3]).unwrap();
        let sx: Vec<f64> = (0..8).map(|v| v as f64 + 1.0).collect();
        let sy: Vec<f64> = (0..8).map(|v| 2.0 * v as f64).collect();
        let v = model.variances(&sx, &sy).unwrap();
        let vt = model_t.variances(&sy, &sx).unwrap();
        assert!(v.max_abs_diff(&vt.transpose()) < 1e-9 * v.max_abs());
    }
}

#[test]
fn exact_route_agrees_with_the_dense_tensor() {
    let d = t2112_decomposition(0.025).unwrap();
    let t = t2112_target(0.025).unwrap().power(3).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(10);
    let a = Matrix::from_fn(8, 8, |_, _| r.gen_range(-6i64..=6));
    let b = Matrix::from_fn(8, 8, |_, _| r.gen_range(-6i64..=6));
    let (c, stats) = apply_levels_exact(&[&d; 3], &a, &b, ApplyOptions::default()).unwrap();
    assert!(stats.channels >= 2);
    assert_eq!(stats.apply.multiplications, 125);
    let want = t.apply_direct(&a.map(|v| v as f64), &b.map(|v| v as f64)).unwrap();
    assert!(c.max_abs_diff(&want) < 1e-9 * want.max_abs().max(1.0));
}

#[test]
fn verification_separates_planted_from_random_pairs() {
    let mut r = ChaCha8Rng::seed_from_u64(12);
    let (len, trials) = (2048, 2000);
    let (mut accepted, mut rejected) = (0, 0);
    for _ in 0..trials {
        let x = PmVector::random(len, &mut r);
        let mut y = x.clone();
        for l in 0..len {
            if r.gen::<f64>() < 0.25 {
                y.flip(l);
            }
        }
        let z = PmVector::random(len, &mut r);
        let xs = [x];
        accepted += verify_candidates(&xs, &[y], &[(0, 0)], 0, len, 0.5).len();
        rejected += 1 - verify_candidates(&xs, &[z], &[(0, 0)], 0, len, 0.5).len();
    }
    assert!(accepted as f64 >= 0.999 * trials as f64);
    assert!(rejected as f64 >= 0.999 * trials as f64);
    let x = PmVector::random(64, &mut r);
    assert_eq!(verify_candidates(&[x.clone()], &[x], &[(0, 0)], 0, 64, 1.0), vec![(0, 0)]);
}

#[test]
fn perfect_correlation_is_always_recovered() {
    // the 2x2 product needs N = 9 (n = 256) before 2^(N/2) clears the 10 sigma bar
    let s = strassen_decomposition();
    let cfg = SolverConfig::for_n(256);
    for seed in 0..20 {
        let p = gen_planted(256, 8192, 1.0, seed).unwrap();
        let rep = solve_uniform(&p.instance, &s, &cfg, seed).unwrap();
        assert_eq!(rep.candidates, vec![(p.sidecar.i, p.sidecar.j)], "uniform seed {seed}");
    }
    let t = t2112_decomposition(0.025).unwrap();
    let cfg = SolverConfig::for_n(64);
    for seed in 0..20 {
        let p = gen_planted(64, 8192, 1.0, seed).unwrap();
        let rep = solve_lsh(&p.instance, &t, &StochasticPair::identity(2), &cfg, seed).unwrap();
        assert_eq!(rep.candidates, vec![(p.sidecar.i, p.sidecar.j)], "hashing seed {seed}");
    }
}

#[test]
fn null_instances_report_nothing() {
    let cfg = SolverConfig::for_n(64);
    for seed in 0..5 {
        let inst = gen_null(64, 8192, 2, seed).unwrap().with_law(PlantedLaw::Rho(0.8));
        let rep = solve_uniform(&inst, &strassen_decomposition(), &cfg, seed).unwrap();
        assert!(rep.candidates.is_empty());
        assert!(rep.rounds_run() < cfg.reps, "early stop expected");
    }
}

#[test]
fn solving_is_deterministic() {
    let cfg = SolverConfig::for_n(64);
    let p = gen_planted(64, 8192, 0.9, 3).unwrap();
    let a = solve_uniform(&p.instance, &strassen_decomposition(), &cfg, 5).unwrap();
    let b = solve_uniform(&p.instance, &strassen_decomposition(), &cfg, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.multiplications, 7u64.pow(a.plan.big_n as u32) * a.rounds_run() as u64);
}

#[test]
fn symbol_instances_go_through_the_mapping() {
    let p = JointDistribution::new(Matrix::from_fn(4, 4, |i, j| if i == j { 0.85 / 4.0 } else { 0.15 / 12.0 })).unwrap();
    let planted = gen_planted_p(64, 8192, &p, 2).unwrap();
    let cfg = SolverConfig::for_n(64);
    let rep = solve_uniform(&planted.instance, &strassen_decomposition(), &cfg, 2).unwrap();
    assert_eq!(rep.candidates, vec![(planted.sidecar.i, planted.sidecar.j)]);
}

#[test]
fn lemma_suite_passes() {
    let rep = lemma_checks(1);
    assert!(rep.sign_pass(), "{rep:?}");
    assert!(rep.rect_pass(), "{rep:?}");
    assert!(rep.regular_pass(), "{rep:?}");
}
