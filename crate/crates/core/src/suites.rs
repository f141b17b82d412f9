//! Named verification suites over randomized cases, shared by the
//! `verify` command and the acceptance tests. Each suite returns a
//! machine-readable outcome with a counterexample description on
//! failure; scale and seed are caller-chosen so failures reproduce.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::Rng;
use rayon::prelude::*;

use crate::algorithms::{
    equal_neighbor_update, mean_value_update, midpoint_update, safety_check, Behavior,
    QuantizationSpec, RoundingMode, Rule,
};
use crate::dynamics::{
    fig1_graph, greedy_adversary, random_nonsplit, random_rooted, round_rng, Fig1Tag, PoolSpec,
    Repeat, Schedule,
};
use crate::engine::{
    contraction_series, delta, run, verify_trace, ExecutionConfig, HorizonPolicy,
};
use crate::error::Error;
use crate::graph::CommunicationGraph;
use crate::value::{Rational, Scalar};

#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub name: String,
    pub pass: bool,
    pub cases: u64,
    pub counterexample: Option<String>,
}

impl SuiteOutcome {
    fn pass(name: &str, cases: u64) -> Self {
        SuiteOutcome {
            name: name.into(),
            pass: true,
            cases,
            counterexample: None,
        }
    }

    fn fail(name: &str, cases: u64, counterexample: String) -> Self {
        SuiteOutcome {
            name: name.into(),
            pass: false,
            cases,
            counterexample: Some(counterexample),
        }
    }

    /// Merges per-case results: first failure wins.
    fn collect(name: &str, results: Vec<Option<String>>) -> Self {
        let cases = results.len() as u64;
        match results.into_iter().flatten().next() {
            None => Self::pass(name, cases),
            Some(cx) => Self::fail(name, cases, cx),
        }
    }
}

fn rat(n: i64, d: i64) -> Rational {
    <Rational as Scalar>::from_ratio(n, d)
}

/// Every product of n-1 random rooted graphs is nonsplit.
pub fn graph_products(max_n: usize, cases_per_n: u64, seed: u64) -> SuiteOutcome {
    let jobs: Vec<(usize, u64)> = (2..=max_n)
        .flat_map(|n| (0..cases_per_n).map(move |c| (n, c)))
        .collect();
    let results: Vec<Option<String>> = jobs
        .par_iter()
        .map(|&(n, case)| {
            let mut rng = round_rng(seed ^ (n as u64) << 32, case);
            let density = rng.gen_range(0.0..0.3);
            let graphs: Vec<_> = (0..n - 1)
                .map(|_| random_rooted(n, &mut rng, density))
                .collect();
            let product = CommunicationGraph::product_of(&graphs).expect("uniform n");
            if product.is_nonsplit() {
                None
            } else {
                Some(format!("n={n} case={case} seed={seed}: product splits"))
            }
        })
        .collect();
    SuiteOutcome::collect("graph-products", results)
}

/// Equal-neighbor and mean-value outputs sit in the 1/n safety
/// interval; midpoint in the 1/2 interval. Exact rational arithmetic.
pub fn safety(cases: u64, max_size: usize, seed: u64) -> SuiteOutcome {
    let results: Vec<Option<String>> = (0..cases)
        .into_par_iter()
        .map(|case| {
            let mut rng = round_rng(seed, case);
            let size = rng.gen_range(1..=max_size);
            let multiset: Vec<Rational> = (0..size)
                .map(|_| rat(rng.gen_range(0..=1000), 1000))
                .collect();
            let lo = multiset.iter().min().expect("size >= 1").clone();
            let hi = multiset.iter().max().expect("size >= 1").clone();
            let rho_n = rat(1, max_size as i64);

            let en = equal_neighbor_update(&multiset).expect("non-empty");
            if !safety_check(&rho_n, &lo, &hi, &en) {
                return Some(format!("case={case}: equal-neighbor broke 1/n-safety"));
            }
            let set: std::collections::BTreeSet<_> = multiset.iter().cloned().collect();
            let mv = mean_value_update(&set).expect("non-empty");
            if !safety_check(&rho_n, &lo, &hi, &mv) {
                return Some(format!("case={case}: mean-value broke 1/n-safety"));
            }
            let mid = midpoint_update(&lo, &hi).expect("lo <= hi");
            if !safety_check(&rat(1, 2), &lo, &hi, &mid) {
                return Some(format!("case={case}: midpoint broke 1/2-safety"));
            }
            None
        })
        .collect();
    SuiteOutcome::collect("safety", results)
}

/// On per-round-nonsplit schedules, every per-round spread ratio of a
/// rho-safe rule is at most 1 - rho. Exact rational arithmetic.
pub fn contraction(schedules: u64, max_n: usize, rounds: u64, seed: u64) -> SuiteOutcome {
    let results: Vec<Option<String>> = (0..schedules)
        .into_par_iter()
        .map(|case| {
            let mut rng = round_rng(seed.wrapping_add(1), case);
            let n = rng.gen_range(2..=max_n);
            let graphs: Vec<_> = (0..rounds)
                .map(|_| random_nonsplit(n, &mut rng, 0.2))
                .collect();
            let schedule = Schedule::explicit(graphs, Repeat::Cycle).expect("non-empty");
            let initial: Vec<Rational> =
                (0..n).map(|_| rat(rng.gen_range(0..=1000), 1000)).collect();
            for rule in [Rule::Midpoint, Rule::EqualNeighbor, Rule::MeanValue] {
                let behavior = Behavior::plain(rule);
                let (num, den) = behavior.rho(n);
                let bound = <Rational as One>::one() - rat(num, den);
                let config = ExecutionConfig {
                    behavior,
                    schedule: schedule.clone(),
                    initial: initial.clone(),
                    epsilon: rat(1, 2),
                    horizon: HorizonPolicy::FixedRounds(rounds),
                };
                let trace = run(&config).expect("valid config");
                for (i, ratio) in contraction_series(&trace, 1).iter().enumerate() {
                    if *ratio > bound {
                        return Some(format!(
                            "case={case} n={n} rule={rule:?} round={}: ratio {} > {}",
                            i + 1,
                            ratio.render(),
                            bound.render()
                        ));
                    }
                }
            }
            None
        })
        .collect();
    SuiteOutcome::collect("contraction", results)
}

/// Third-point under arbitrary mixes of the three two-process graphs
/// contracts by exactly 1/3 every round.
pub fn third_point_exactness(mixes: u64, rounds: u64, seed: u64) -> SuiteOutcome {
    let results: Vec<Option<String>> = (0..mixes)
        .into_par_iter()
        .map(|case| {
            let mut rng = round_rng(seed.wrapping_add(2), case);
            let graphs: Vec<_> = (0..rounds)
                .map(|_| {
                    fig1_graph(match rng.gen_range(0..3) {
                        0 => Fig1Tag::G,
                        1 => Fig1Tag::HPlus,
                        _ => Fig1Tag::HMinus,
                    })
                })
                .collect();
            let schedule = Schedule::explicit(graphs, Repeat::Cycle).expect("non-empty");
            let initial = vec![rat(rng.gen_range(0..500), 1000), rat(rng.gen_range(500..=1000), 1000)];
            let d0 = delta(&initial);
            let config = ExecutionConfig {
                behavior: Behavior::plain(Rule::ThirdPoint),
                schedule,
                initial,
                epsilon: rat(1, 2),
                horizon: HorizonPolicy::FixedRounds(rounds),
            };
            let trace = run(&config).expect("valid config");
            for (k, dk) in trace.deltas.iter().enumerate() {
                let expected = d0.clone() / rat(3i64.pow(k as u32), 1);
                if *dk != expected {
                    return Some(format!(
                        "case={case} round={k}: delta {} != {}",
                        dk.render(),
                        expected.render()
                    ));
                }
            }
            None
        })
        .collect();
    SuiteOutcome::collect("third-point-exactness", results)
}

/// Amortized rule on random rooted schedules: spread at the theorem
/// decision round is at most epsilon, all decide, full verification
/// passes. Exact rational arithmetic.
pub fn amortized_bounds(
    rule: Rule,
    ns: &[usize],
    epsilons: &[BigRational],
    schedules_per_combo: u64,
    seed: u64,
) -> SuiteOutcome {
    let jobs: Vec<(usize, BigRational, u64)> = ns
        .iter()
        .flat_map(|&n| {
            epsilons.iter().flat_map(move |eps| {
                (0..schedules_per_combo).map(move |c| (n, eps.clone(), c))
            })
        })
        .collect();
    let results: Vec<Option<String>> = jobs
        .par_iter()
        .map(|(n, eps, case)| {
            let n = *n;
            let mut rng = round_rng(seed ^ (n as u64) << 24, *case);
            let schedule_seed: u64 = rng.gen();
            let density = rng.gen_range(0.0..0.4);
            let schedule = Schedule::random_rooted(n, schedule_seed, density).expect("n >= 1");
            let initial: Vec<Rational> =
                (0..n).map(|_| rat(rng.gen_range(0..=256), 256)).collect();
            let behavior = Behavior::plain(rule)
                .amortize((n - 1) as u64)
                .expect("macro length >= 1");
            let config = ExecutionConfig {
                behavior,
                schedule,
                initial,
                epsilon: eps.clone(),
                horizon: HorizonPolicy::RunToDecision,
            };
            let trace = run(&config).expect("valid config");
            let eps_s = <Rational as Scalar>::from_rational(eps);
            let final_delta = trace.deltas.last().expect("non-empty").clone();
            if final_delta > eps_s {
                return Some(format!(
                    "{rule:?} n={n} eps={eps} case={case}: delta {} at decision round {}",
                    final_delta.render(),
                    trace.rounds()
                ));
            }
            if !trace.all_decided() {
                return Some(format!("{rule:?} n={n} eps={eps} case={case}: undecided"));
            }
            let report = verify_trace(&trace, &config).expect("schedule accessible");
            if !report.passed() {
                let failed: Vec<_> = report
                    .checks
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| c.name)
                    .collect();
                return Some(format!(
                    "{rule:?} n={n} eps={eps} case={case}: checks failed {failed:?}"
                ));
            }
            None
        })
        .collect();
    SuiteOutcome::collect("amortized-bounds", results)
}

/// Quantized amortized midpoint: 1/Q-agreement at the theorem round,
/// grid closure, at most two adjacent decision values, and the
/// per-macro-round spread recurrence bound.
pub fn quantized(qs: &[u64], ns: &[usize], schedules_per_combo: u64, seed: u64) -> SuiteOutcome {
    let jobs: Vec<(u64, usize, u64)> = qs
        .iter()
        .flat_map(|&q| {
            ns.iter()
                .flat_map(move |&n| (0..schedules_per_combo).map(move |c| (q, n, c)))
        })
        .collect();
    let results: Vec<Option<String>> = jobs
        .par_iter()
        .map(|&(q, n, case)| {
            let mut rng = round_rng(seed ^ q << 40 ^ (n as u64) << 16, case);
            let schedule_seed: u64 = rng.gen();
            let schedule =
                Schedule::random_rooted(n, schedule_seed, rng.gen_range(0.0..0.3)).expect("n >= 1");
            let initial: Vec<Rational> = (0..n)
                .map(|_| rat(rng.gen_range(0..=q) as i64, q as i64))
                .collect();
            let behavior = Behavior::plain(Rule::Midpoint)
                .amortize((n - 1) as u64)
                .expect("macro length >= 1")
                .quantized(QuantizationSpec {
                    q,
                    mode: RoundingMode::Down,
                })
                .expect("q >= 1");
            let config = ExecutionConfig {
                behavior,
                schedule,
                initial,
                epsilon: BigRational::new(BigInt::one(), BigInt::from(q)),
                horizon: HorizonPolicy::RunToDecision,
            };
            let trace = run(&config).expect("valid config");
            let inv_q = rat(1, q as i64);
            let final_delta = trace.deltas.last().expect("non-empty").clone();
            if final_delta > inv_q {
                return Some(format!(
                    "Q={q} n={n} case={case}: delta {} > 1/{q} at round {}",
                    final_delta.render(),
                    trace.rounds()
                ));
            }
            let report = verify_trace(&trace, &config).expect("schedule accessible");
            if !report.passed() {
                let failed: Vec<_> = report
                    .checks
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| c.name)
                    .collect();
                return Some(format!("Q={q} n={n} case={case}: checks failed {failed:?}"));
            }
            // spread recurrence: delta(x(l)) <= 2^-l + (2/Q)(1 - 2^-l)
            let macro_len = (n - 1) as u64;
            let two_over_q = rat(2, q as i64);
            for l in 1..=trace.rounds() / macro_len {
                let measured = &trace.deltas[(l * macro_len) as usize];
                let decay = rat(1, 2i64.pow(l as u32));
                let bound = decay.clone()
                    + two_over_q.clone() * (<Rational as One>::one() - decay);
                if *measured > bound {
                    return Some(format!(
                        "Q={q} n={n} case={case} macro={l}: delta {} > bound {}",
                        measured.render(),
                        bound.render()
                    ));
                }
            }
            None
        })
        .collect();
    SuiteOutcome::collect("quantized", results)
}

/// Suboptimal precision: with eps > 2/Q the spread falls under eps by
/// the earlier adapted round.
pub fn suboptimal_precision(
    q: u64,
    n: usize,
    epsilon: &BigRational,
    runs: u64,
    seed: u64,
) -> SuiteOutcome {
    let results: Vec<Option<String>> = (0..runs)
        .into_par_iter()
        .map(|case| {
            let mut rng = round_rng(seed.wrapping_add(3), case);
            let schedule_seed: u64 = rng.gen();
            let schedule =
                Schedule::random_rooted(n, schedule_seed, rng.gen_range(0.0..0.3)).expect("n >= 1");
            let initial: Vec<Rational> = (0..n)
                .map(|_| rat(rng.gen_range(0..=q) as i64, q as i64))
                .collect();
            let behavior = Behavior::plain(Rule::Midpoint)
                .amortize((n - 1) as u64)
                .expect("macro length >= 1")
                .quantized(QuantizationSpec {
                    q,
                    mode: RoundingMode::Down,
                })
                .expect("q >= 1");
            let config = ExecutionConfig {
                behavior,
                schedule,
                initial,
                epsilon: epsilon.clone(),
                horizon: HorizonPolicy::RunToDecision,
            };
            let trace = run(&config).expect("valid config");
            let eps_s = <Rational as Scalar>::from_rational(epsilon);
            let final_delta = trace.deltas.last().expect("non-empty").clone();
            if final_delta > eps_s {
                return Some(format!(
                    "Q={q} n={n} case={case}: delta {} > eps at round {}",
                    final_delta.render(),
                    trace.rounds()
                ));
            }
            None
        })
        .collect();
    SuiteOutcome::collect("suboptimal-precision", results)
}

/// Partially-rooted schedules: window-L macro ratios stay under
/// 1 - (1/2)^L for the amortized midpoint and the spread still falls
/// under epsilon within the resiliency cap.
pub fn resiliency(
    combos: &[(usize, usize)],
    runs_per_combo: u64,
    epsilon: &BigRational,
    seed: u64,
) -> SuiteOutcome {
    let jobs: Vec<(usize, usize, u64)> = combos
        .iter()
        .flat_map(|&(n, est)| (0..runs_per_combo).map(move |c| (n, est, c)))
        .collect();
    let results: Vec<Option<String>> = jobs
        .par_iter()
        .map(|&(n, estimate, case)| {
            let macro_len = (n - 1) as u64;
            let l_blocks = (n - 1).div_ceil(estimate - 1) as u64;
            let mut rng = round_rng(seed ^ (n as u64) << 8 ^ (estimate as u64), case);
            let schedule_seed: u64 = rng.gen();
            let schedule =
                Schedule::partially_rooted(n, estimate, schedule_seed).expect("2 <= N <= n");
            let initial: Vec<Rational> =
                (0..n).map(|_| rat(rng.gen_range(0..=256), 256)).collect();
            // enough L-macro blocks for the 1 - 2^-L rate to pass epsilon, doubled
            let contractions_needed = {
                let alpha = <Rational as One>::one() - rat(1, 2i64.pow(l_blocks as u32));
                let mut k = 0u64;
                let mut pow = <Rational as One>::one();
                let eps = <Rational as Scalar>::from_rational(epsilon);
                while pow > eps {
                    pow *= alpha.clone();
                    k += 1;
                }
                k
            };
            let rounds = 2 * contractions_needed * l_blocks * macro_len;
            let behavior = Behavior::plain(Rule::Midpoint)
                .amortize(macro_len)
                .expect("macro length >= 1");
            let config = ExecutionConfig {
                behavior,
                schedule,
                initial,
                epsilon: epsilon.clone(),
                horizon: HorizonPolicy::FixedRounds(rounds),
            };
            let trace = run(&config).expect("valid config");
            let window = l_blocks * macro_len;
            let bound = <Rational as One>::one() - rat(1, 2i64.pow(l_blocks as u32));
            for (i, ratio) in contraction_series(&trace, window).iter().enumerate() {
                if *ratio > bound {
                    return Some(format!(
                        "n={n} N={estimate} case={case} window {i}: ratio {} > {}",
                        ratio.render(),
                        bound.render()
                    ));
                }
            }
            let eps_s = <Rational as Scalar>::from_rational(epsilon);
            if !trace.deltas.iter().any(|d| *d <= eps_s) {
                return Some(format!(
                    "n={n} N={estimate} case={case}: spread never reached epsilon in {rounds} rounds"
                ));
            }
            None
        })
        .collect();
    SuiteOutcome::collect("resiliency", results)
}

/// Loops-only schedules never contract and verification pinpoints the
/// agreement failure; rootedness is load-bearing.
pub fn negative_control(ns: &[usize], rounds: u64) -> SuiteOutcome {
    let results: Vec<Option<String>> = ns
        .iter()
        .map(|&n| {
            let schedule = Schedule::loops_only(n).expect("n >= 1");
            let mut initial = vec![rat(0, 1); n];
            initial[n - 1] = rat(1, 1);
            let config = ExecutionConfig {
                behavior: Behavior::plain(Rule::Midpoint),
                schedule,
                initial,
                epsilon: rat(1, 10),
                horizon: HorizonPolicy::FixedRounds(rounds),
            };
            let trace = run(&config).expect("valid config");
            if !trace.deltas.iter().all(|d| *d == rat(1, 1)) {
                return Some(format!("n={n}: loops-only schedule contracted"));
            }
            // re-run to the decision round so the report covers decisions
            let config = ExecutionConfig {
                horizon: HorizonPolicy::RunToDecision,
                ..config
            };
            let trace = run(&config).expect("valid config");
            let report = verify_trace(&trace, &config).expect("schedule accessible");
            let agreement = report
                .checks
                .iter()
                .find(|c| c.name == "epsilon-agreement")
                .expect("agreement check present");
            if agreement.pass {
                return Some(format!("n={n}: verification missed the agreement failure"));
            }
            None
        })
        .collect();
    SuiteOutcome::collect("negative-control", results)
}

/// Outcome of the slow-vs-fast adversary demonstration.
#[derive(Clone, Debug)]
pub struct AdversaryGap {
    pub outcome: SuiteOutcome,
    /// Longest streak of per-round equal-neighbor ratios >= 0.9.
    pub slow_streak: u64,
    /// Largest macro-round ratio of the amortized midpoint on the same
    /// schedule.
    pub midpoint_worst_macro_ratio: Option<Rational>,
}

/// Searches a rooted pool for a schedule that keeps plain
/// equal-neighbor contracting slowly (per-round ratios >= 0.9 over at
/// least `streak_target` consecutive rounds) while the amortized
/// midpoint on the identical schedule keeps every macro ratio <= 1/2.
pub fn adversary_gap(
    n: usize,
    horizon: u64,
    pool_per_round: usize,
    streak_target: u64,
    seed: u64,
) -> AdversaryGap {
    let name = "adversary-gap";
    let mut initial = vec![rat(0, 1); n];
    initial[n - 1] = rat(1, 1);
    let pool = PoolSpec::Random {
        density: 0.0,
        per_round: pool_per_round,
    };
    let behavior = Behavior::plain(Rule::EqualNeighbor);
    let adversary = greedy_adversary(&behavior, n, &initial, horizon, &pool, seed)
        .expect("pool yields rooted graphs");
    let threshold = rat(9, 10);
    let mut best_streak = 0u64;
    let mut streak = 0u64;
    for ratio in &adversary.ratios {
        if *ratio >= threshold {
            streak += 1;
            best_streak = best_streak.max(streak);
        } else {
            streak = 0;
        }
    }
    // same schedule, amortized midpoint
    let macro_len = (n - 1) as u64;
    let config = ExecutionConfig {
        behavior: Behavior::plain(Rule::Midpoint)
            .amortize(macro_len)
            .expect("macro length >= 1"),
        schedule: adversary.schedule,
        initial,
        epsilon: rat(1, 100),
        horizon: HorizonPolicy::FixedRounds(horizon - horizon % macro_len),
    };
    let trace = run(&config).expect("valid config");
    let macro_ratios = contraction_series(&trace, macro_len);
    let worst = macro_ratios.iter().max().cloned();
    let half = rat(1, 2);
    let outcome = if best_streak < streak_target {
        SuiteOutcome::fail(
            name,
            horizon,
            format!(
                "equal-neighbor slow streak only {best_streak} rounds (target {streak_target})"
            ),
        )
    } else if worst.as_ref().is_some_and(|w| *w > half) {
        SuiteOutcome::fail(
            name,
            horizon,
            format!(
                "amortized midpoint macro ratio {} exceeded 1/2",
                worst.as_ref().expect("checked").render()
            ),
        )
    } else {
        SuiteOutcome::pass(name, horizon)
    };
    AdversaryGap {
        outcome,
        slow_streak: best_streak,
        midpoint_worst_macro_ratio: worst,
    }
}

/// The suites exposed through the command line.
pub fn run_named(
    suite: &str,
    max_n: usize,
    cases: u64,
    seed: u64,
) -> Result<Vec<SuiteOutcome>, Error> {
    let eps_mid = crate::value::parse_rational("1/100")?;
    match suite {
        "graph-products" => Ok(vec![graph_products(max_n, cases, seed)]),
        "safety" => Ok(vec![safety(cases, max_n.max(2), seed)]),
        "contraction" => Ok(vec![
            contraction(cases.min(200), max_n.max(2), 50, seed),
            third_point_exactness(cases.min(200), 30, seed),
        ]),
        "amortized-bounds" => {
            let ns: Vec<usize> = [3usize, 5, 8, 16]
                .into_iter()
                .filter(|&n| n <= max_n.max(3))
                .collect();
            let epsilons = vec![
                crate::value::parse_rational("0.1")?,
                crate::value::parse_rational("0.01")?,
            ];
            let per = (cases / 4).max(1);
            Ok(vec![
                amortized_bounds(Rule::Midpoint, &ns, &epsilons, per, seed),
                amortized_bounds(Rule::MeanValue, &ns, &epsilons, per, seed),
            ])
        }
        "quantized" => {
            let ns: Vec<usize> = [3usize, 4, 8]
                .into_iter()
                .filter(|&n| n <= max_n.max(3))
                .collect();
            Ok(vec![quantized(&[4, 10, 64], &ns, (cases / 4).max(1), seed)])
        }
        "resiliency" => {
            let combos: Vec<(usize, usize)> = [(7usize, 4usize), (9, 3), (13, 5)]
                .into_iter()
                .filter(|&(n, _)| n <= max_n.max(7))
                .collect();
            Ok(vec![resiliency(
                &combos,
                (cases / 10).max(1),
                &eps_mid,
                seed,
            )])
        }
        other => Err(Error::Config(format!(
            "unknown suite {other:?}; known: graph-products, safety, contraction, \
             amortized-bounds, quantized, resiliency"
        ))),
    }
}
