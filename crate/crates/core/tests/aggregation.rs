use lumen_core::aggregation::*;
use lumen_core::instances::{subsets_lex, PmVector, SplitFamily};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_task(g: usize, d: usize, r: usize, seed: u64) -> AggregationTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vectors = (0..g).map(|_| PmVector::random(d, &mut rng)).collect();
    let m = SplitFamily::new(0, d, r).unwrap().len();
    AggregationTask { vectors, r, m }
}

/// Brute force over the split family written out by hand: first-half
/// subsets of `0..d/2` crossed with second-half subsets of `d/2..d`.
fn brute_force(task: &AggregationTask) -> Vec<i64> {
    let d = task.vectors[0].len();
    let half = d / 2;
    let first = subsets_lex(half, task.r / 2);
    let second = subsets_lex(half, task.r / 2);
    let mut out = Vec::new();
    for s1 in &first {
        for s2 in &second {
            let sum: i64 = task
                .vectors
                .iter()
                .map(|x| {
                    let p1: i64 = s1.iter().map(|&l| x.get(l) as i64).product();
                    let p2: i64 = s2.iter().map(|&l| x.get(half + l) as i64).product();
                    p1 * p2
                })
                .sum();
            out.push(sum);
        }
    }
    out.truncate(task.m);
    out
}

#[test]
fn single_vector_gives_its_expansion() {
    let task = random_task(1, 10, 2, 1);
    let fam = SplitFamily::new(0, 10, 2).unwrap();
    let want: Vec<i64> = fam.window(&task.vectors[0], 0, fam.len()).iter().map(|&v| v as i64).collect();
    assert_eq!(aggregate_naive(&task).unwrap().0, want);
    assert_eq!(aggregate_fast(&task, Kernel::Classical).unwrap().0, want);
}

#[test]
fn negated_pair_doubles_under_even_subsets() {
    let mut task = random_task(1, 8, 2, 2);
    let neg = PmVector::from_signs(&task.vectors[0].to_signs().iter().map(|s| -s).collect::<Vec<_>>());
    let single = aggregate_naive(&task).unwrap().0;
    task.vectors.push(neg);
    let doubled: Vec<i64> = single.iter().map(|v| 2 * v).collect();
    assert_eq!(aggregate_naive(&task).unwrap().0, doubled);
}

#[test]
fn three_vectors_against_brute_force() {
    let task = random_task(3, 8, 2, 3);
    assert_eq!(task.m, 16);
    assert_eq!(aggregate_naive(&task).unwrap().0, brute_force(&task));
}

#[test]
fn fast_route_matches_naive_on_fifty_tasks() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for t in 0..50 {
        let g = [1, 2, 16, 64][rng.gen_range(0..4)];
        let d = [8, 16, 24][rng.gen_range(0..3)];
        let r = [2, 4][rng.gen_range(0..2)];
        let task = random_task(g, d, r, t);
        let (naive, _) = aggregate_naive(&task).unwrap();
        assert_eq!(naive, brute_force(&task), "task {t}");
        assert_eq!(aggregate_fast(&task, Kernel::Classical).unwrap().0, naive, "task {t}");
        if t % 10 == 0 {
            assert_eq!(aggregate_fast(&task, Kernel::Strassen).unwrap().0, naive, "task {t} strassen");
        }
        assert!(naive.iter().all(|v| v.unsigned_abs() as usize <= g));
    }
}

#[test]
fn fast_route_spends_fewer_multiplications_for_large_buckets() {
    let task = random_task(256, 20, 4, 7);
    let (a, naive) = aggregate_naive(&task).unwrap();
    let (b, fast) = aggregate_fast(&task, Kernel::Classical).unwrap();
    assert_eq!(a, b);
    assert!(fast.multiplications < naive.multiplications, "{fast:?} vs {naive:?}");
}

#[test]
fn partial_outputs_are_prefixes() {
    let mut task = random_task(5, 12, 2, 9);
    let full = aggregate_naive(&task).unwrap().0;
    task.m = 12;
    assert_eq!(aggregate_fast(&task, Kernel::Classical).unwrap().0, full[..12]);
    task.m = 7;
    assert_eq!(aggregate_naive(&task).unwrap().0, full[..7]);
    assert!(aggregate_fast(&task, Kernel::Classical).is_err());
}

#[test]
fn invalid_tasks_are_rejected() {
    let mut task = random_task(2, 8, 2, 1);
    task.r = 3;
    assert!(aggregate_naive(&task).is_err());
    task.r = 2;
    task.m = 17;
    assert!(aggregate_naive(&task).is_err());
    task.m = 4;
    task.vectors.push(PmVector::ones(6));
    assert!(aggregate_naive(&task).is_err());
    assert!(aggregate_naive(&AggregationTask { vectors: vec![], r: 2, m: 1 }).is_err());
}

#[test]
fn window_accumulation_matches_naive() {
    let task = random_task(6, 16, 2, 4);
    let fam = SplitFamily::new(0, 16, 2).unwrap();
    let mut acc = vec![0i64; 20];
    for x in &task.vectors {
        accumulate_window(&mut acc, x, &fam, 10);
    }
    assert_eq!(acc, aggregate_naive(&task).unwrap().0[10..30]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn aggregates_are_bounded_by_bucket_size(g in 1usize..20, half in 2usize..8, seed in any::<u64>()) {
        let task = random_task(g, 2 * half, 2, seed);
        let (out, _) = aggregate_fast(&task, Kernel::Classical).unwrap();
        prop_assert!(out.iter().all(|v| v.unsigned_abs() as usize <= g));
        // parity: every entry is a sum of g signs
        prop_assert!(out.iter().all(|v| (v + g as i64) % 2 == 0));
    }
}
