use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use rk_core::adversary::{ErrorSpec, WorkerPool};
use rk_core::analysis::{
    brute_force_mode_probability, convergence_bound, mode_probabilities, selection_probability,
    to_f64, worker_mode_probability, CategoryCounts, ConvergenceBoundInputs,
};
use rk_core::kaczmarz::generate_problem;
use rk_core::solver::{run, BlocklistConfig, IterationOutcome};
use rk_core::{BlockPolicy, SolveConfig};

/// Every composition of `total` into `parts` positive counts.
fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    (1..=total.saturating_sub(parts as u64 - 1))
        .flat_map(|first| {
            compositions(total - first, parts - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

#[test]
fn analytic_matches_enumeration_on_small_pools() {
    let mut instances = 0;
    for total in 1..=12u64 {
        for k in 0..=4usize {
            if total < k as u64 + 1 {
                continue;
            }
            for counts in compositions(total, k + 1) {
                for n in 1..=total {
                    let cc = CategoryCounts::new(counts.clone(), n).unwrap();
                    let analytic = mode_probabilities(&cc);
                    let brute = brute_force_mode_probability(&counts, n).unwrap();
                    assert_eq!(analytic.per_category, brute, "counts {counts:?}, n {n}");
                    instances += 1;
                }
            }
        }
    }
    assert!(instances > 300);
}

#[test]
fn zero_sized_categories_match_enumeration() {
    for counts in [vec![5u64, 0, 3], vec![0, 4, 4], vec![6, 0, 0, 2]] {
        let total: u64 = counts.iter().sum();
        for n in 1..=total {
            let cc = CategoryCounts::new(counts.clone(), n).unwrap();
            assert_eq!(
                mode_probabilities(&cc).per_category,
                brute_force_mode_probability(&counts, n).unwrap(),
                "counts {counts:?}, n {n}"
            );
        }
    }
}

#[test]
fn probabilities_are_exact_and_bounded() {
    let rate = |num: i64, den: i64| BigRational::new(BigInt::from(num), BigInt::from(den));
    for (p, k, n) in [(rate(4, 5), 5, 5), (rate(4, 5), 15, 5), (rate(1, 5), 10, 20), (rate(1, 2), 3, 7)] {
        let cc = CategoryCounts::equal_split(100, &p, k, n).unwrap();
        let probs = mode_probabilities(&cc);
        let sum: BigRational = probs.per_category.iter().cloned().sum();
        assert_eq!(sum, probs.q);
        assert!(probs.q <= BigRational::one() && probs.q >= BigRational::zero());
        let cond: BigRational = probs.q_conditional.iter().cloned().sum();
        assert_eq!(cond, BigRational::one());
    }
}

#[test]
fn honest_conditional_probability_falls_with_adversary_rate() {
    for k in [5usize, 10] {
        let mut last = f64::INFINITY;
        for pct in (10..=90).step_by(10) {
            let p = BigRational::new(BigInt::from(pct), BigInt::from(100));
            let cc = CategoryCounts::equal_split(100, &p, k, 5).unwrap();
            let q0 = to_f64(&mode_probabilities(&cc).q_conditional[0]);
            assert!(q0 <= last + 1e-12, "k {k}, p {pct}%: {q0} after {last}");
            last = q0;
        }
    }
}

#[test]
fn selection_probability_identity() {
    for total in 2..=40u64 {
        for n in 1..=total {
            let cc = CategoryCounts::new(vec![total - 1, 1], n).unwrap();
            let w = worker_mode_probability(&cc, 0).unwrap();
            assert_eq!(w.p_w, selection_probability(total, n));
        }
    }
}

#[test]
fn bound_without_errors_is_pure_decay() {
    let problem = generate_problem(60, 8, 0.0, 2).unwrap();
    let a = &problem.a;
    let inp = ConvergenceBoundInputs {
        sigma_min_sq: a.sigma_min_sq(),
        frob_sq: a.frobenius_sq(),
        error_norms_sq: vec![0.0; 3],
        q_conditional: vec![0.7, 0.1, 0.1, 0.1],
        x0_error_sq: 3.5,
    };
    for i in [0u64, 10, 100, 1000] {
        let expect = inp.alpha().powf(i as f64 + 1.0) * 3.5;
        let got = convergence_bound(&inp, i).unwrap();
        assert!((got - expect).abs() <= 1e-15 * expect.max(1e-300), "{got} vs {expect}");
    }
}

fn constant_pool(counts: &[usize], seed: u64) -> WorkerPool {
    let errors = (1..counts.len()).map(|l| ErrorSpec::Constant(l as f64)).collect();
    WorkerPool::from_counts(counts, errors, seed).unwrap()
}

#[test]
fn runs_are_deterministic_and_accounted() {
    let problem = generate_problem(200, 20, 0.0, 5).unwrap();
    let pool = constant_pool(&[12, 4, 4], 5);
    let cfg = SolveConfig::new(7, 0.4, 4000, 9).with_blocklist(BlocklistConfig::default());
    let a = run(&problem, &pool, &cfg).unwrap();
    let b = run(&problem, &pool, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.updates + a.skips, a.iterations());
    let skipped = a.records.iter().filter(|r| r.skipped()).count();
    assert_eq!(skipped, a.skips);
}

#[test]
fn blocked_workers_are_never_sampled_again() {
    let problem = generate_problem(200, 20, 0.0, 1).unwrap();
    let pool = constant_pool(&[20, 10, 10, 10, 10], 1);
    let block = BlocklistConfig {
        period: 50,
        ..BlocklistConfig::default()
    };
    let cfg = SolveConfig::new(20, 0.6, 5000, 3).with_blocklist(block);
    let trace = run(&problem, &pool, &cfg).unwrap();
    assert!(!trace.block_events.is_empty());
    let mut blocked = BTreeSet::new();
    let mut events = trace.block_events.iter().peekable();
    for rec in &trace.records {
        assert!(rec.sampled.iter().all(|w| !blocked.contains(w)), "iteration {}", rec.iteration);
        while let Some((it, newly)) = events.next_if(|(it, _)| *it == rec.iteration) {
            assert_eq!(*it, rec.iteration);
            blocked.extend(newly.iter().copied());
        }
    }
    assert_eq!(blocked, trace.blocklist.blocked);
}

#[test]
fn honest_workers_are_safe_when_they_always_qualify() {
    // 16 honest of 20 and n = 10 leaves at least 6 honest responders = T
    let problem = generate_problem(300, 30, 0.0, 8).unwrap();
    let pool = constant_pool(&[16, 2, 2], 8);
    let cfg = SolveConfig::new(10, 0.4, 3000, 8).with_blocklist(BlocklistConfig {
        policy: BlockPolicy::Fraction { tau: 0.5 },
        period: 100,
        min_active: Some(1),
        count_skipped: false,
    });
    assert_eq!(cfg.threshold(), 6);
    let trace = run(&problem, &pool, &cfg).unwrap();
    assert_eq!(trace.skips, 0);
    assert_eq!(trace.corrupted_updates, 0);
    let state = &trace.blocklist;
    for w in 0..pool.len() {
        let honest = pool.category_of(w).unwrap() == 0;
        if honest {
            assert_eq!(state.counter[w], 0, "honest worker {w}");
            assert!(!state.blocked.contains(&w));
        }
    }
    let adversaries: BTreeSet<usize> = pool.adversaries().into_iter().collect();
    assert_eq!(state.blocked, adversaries);
    assert!(trace.final_error() < 1e-10);
}

#[test]
fn corrupted_fraction_matches_analysis() {
    // T = 3 > n/2, so at most one group can qualify and the solver's choice
    // coincides with the strict-maximum mode
    let counts = [12usize, 8];
    let n = 5;
    let problem = generate_problem(200, 10, 0.0, 13).unwrap();
    let pool = constant_pool(&counts, 13);
    let iters = 40_000;
    let cfg = SolveConfig {
        keep_samples: false,
        ..SolveConfig::new(n, 0.4, iters, 21)
    };
    let trace = run(&problem, &pool, &cfg).unwrap();
    let cc = CategoryCounts::new(counts.iter().map(|&c| c as u64).collect(), n as u64).unwrap();
    let probs = mode_probabilities(&cc);

    let expected_skip = 1.0 - probs.q_f64();
    let skip_rate = trace.skips as f64 / iters as f64;
    let sd = (expected_skip * (1.0 - expected_skip) / iters as f64).sqrt();
    assert!((skip_rate - expected_skip).abs() <= 3.0 * sd, "{skip_rate} vs {expected_skip}");

    let expected = 1.0 - probs.q_conditional_f64()[0];
    let updates = trace.updates as f64;
    let observed = trace.corrupted_updates as f64 / updates;
    let sd = (expected * (1.0 - expected) / updates).sqrt();
    assert!((observed - expected).abs() < 3.0 * sd, "{observed} vs {expected} (sd {sd})");

    let from_category: usize = trace
        .records
        .iter()
        .filter(|r| matches!(r.outcome, IterationOutcome::Applied { category: Some(1), .. }))
        .count();
    assert_eq!(from_category, trace.corrupted_updates);
}

#[test]
fn block_list_recovers_adversaries_at_high_rate() {
    let problem = generate_problem(1000, 100, 0.0, 0).unwrap();
    let counts: Vec<usize> = std::iter::once(20).chain(std::iter::repeat_n(8, 10)).collect();
    let pool = constant_pool(&counts, 0);
    let cfg = SolveConfig {
        keep_samples: false,
        ..SolveConfig::new(50, 0.8, 2000, 0)
    }
    .with_blocklist(BlocklistConfig {
        policy: BlockPolicy::Fraction { tau: 0.5 },
        period: 200,
        ..BlocklistConfig::default()
    });
    let trace = run(&problem, &pool, &cfg).unwrap();
    let adversaries: BTreeSet<usize> = pool.adversaries().into_iter().collect();
    let (precision, recall) = rk_core::blocklist::precision_recall(&trace.blocklist.blocked, &adversaries);
    assert_eq!((precision, recall), (1.0, 1.0));
}
