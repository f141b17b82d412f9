//! Lock-step round execution, macro-round bookkeeping, the decision
//! rounds coming out of the contraction bounds, and trace-level
//! verification.
//!
//! A single execution is sequential and deterministic; `run` is a pure
//! entry point (config in, trace out), so independent executions can be
//! fanned out freely.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::algorithms::{safety_check, Behavior, ProcessState, Rule};
use crate::dynamics::Schedule;
use crate::error::Error;
use crate::value::Scalar;

/// Spread seminorm: max - min.
pub fn delta<S: Scalar>(values: &[S]) -> S {
    let lo = values.iter().min().expect("non-empty value vector");
    let hi = values.iter().max().expect("non-empty value vector");
    hi.clone() - lo.clone()
}

/// A live execution that can be advanced one round at a time. Used by
/// `run` and cloned freely by the greedy adversary to probe candidate
/// graphs.
#[derive(Clone, Debug)]
pub struct Simulation<S: Scalar> {
    behavior: Behavior,
    states: Vec<ProcessState<S>>,
    round: u64,
}

impl<S: Scalar> Simulation<S> {
    pub fn new(behavior: Behavior, initial: Vec<S>) -> Self {
        let states = initial
            .into_iter()
            .enumerate()
            .map(|(i, x)| behavior.init_state(i as u32 + 1, x))
            .collect();
        Simulation {
            behavior,
            states,
            round: 0,
        }
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn values(&self) -> Vec<S> {
        self.states.iter().map(|s| s.x.clone()).collect()
    }

    /// One round: everyone sends its payload along the graph, merges
    /// what it hears (the self-loop guarantees its own payload), and
    /// updates at macro-round boundaries.
    pub fn step(&mut self, graph: &crate::graph::CommunicationGraph) -> Result<(), Error> {
        let n = self.states.len();
        if graph.n() != n {
            return Err(Error::Config(format!(
                "schedule emitted a graph on {} nodes for {} processes",
                graph.n(),
                n
            )));
        }
        self.round += 1;
        let payloads: Vec<_> = self.states.iter().map(|s| self.behavior.payload(s)).collect();
        for p in 1..=n {
            let received: Vec<_> = graph.in_neighbors(p).map(|q| payloads[q - 1].clone()).collect();
            self.behavior.merge(&mut self.states[p - 1], &received);
        }
        if self.round % self.behavior.macro_length == 0 {
            for (i, state) in self.states.iter_mut().enumerate() {
                self.behavior.apply_update(i as u32 + 1, state)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HorizonPolicy {
    FixedRounds(u64),
    /// Run to the theorem decision round.
    RunToDecision,
}

#[derive(Clone, Debug)]
pub struct ExecutionConfig<S: Scalar> {
    pub behavior: Behavior,
    pub schedule: Schedule,
    /// x(0), all in [0,1].
    pub initial: Vec<S>,
    /// Agreement tolerance, kept exact for decision-round arithmetic.
    pub epsilon: BigRational,
    pub horizon: HorizonPolicy,
}

impl<S: Scalar> ExecutionConfig<S> {
    pub fn validate(&self) -> Result<(), Error> {
        let n = self.schedule.n();
        if self.initial.len() != n {
            return Err(Error::Config(format!(
                "expected {n} initial values, got {}",
                self.initial.len()
            )));
        }
        if self
            .initial
            .iter()
            .any(|v| *v < S::zero() || *v > S::one())
        {
            return Err(Error::Config("initial values must lie in [0,1]".into()));
        }
        if self.epsilon <= BigRational::zero() {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.behavior.rule == Rule::ThirdPoint && n != 2 {
            return Err(Error::Config("the third-point rule is defined for n = 2".into()));
        }
        if let Some(spec) = &self.behavior.quantization {
            if self.initial.iter().any(|v| !v.on_grid(spec.q)) {
                return Err(Error::Config(format!(
                    "quantized run requires initial values on the 1/{} grid",
                    spec.q
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decision<S: Scalar> {
    pub round: u64,
    pub value: S,
}

/// Full record of one execution.
#[derive(Clone, Debug)]
pub struct ExecutionTrace<S: Scalar> {
    /// `values[k]` is the global vector x(k); index 0 is the initial state.
    pub values: Vec<Vec<S>>,
    /// delta(x(k)) for each recorded round.
    pub deltas: Vec<S>,
    pub decisions: Vec<Option<Decision<S>>>,
    /// The theorem decision round, when one applies to the behavior.
    pub decision_round: Option<u64>,
    pub macro_length: u64,
    /// Set when the horizon ended before the decision round.
    pub undecided_at_horizon: bool,
}

impl<S: Scalar> ExecutionTrace<S> {
    pub fn rounds(&self) -> u64 {
        self.values.len() as u64 - 1
    }

    pub fn all_decided(&self) -> bool {
        self.decisions.iter().all(|d| d.is_some())
    }

    /// Long-form CSV: `round,process,value,decided`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,process,value,decided\n");
        for (k, xs) in self.values.iter().enumerate() {
            for (i, v) in xs.iter().enumerate() {
                let decided = self.decisions[i]
                    .as_ref()
                    .is_some_and(|d| d.round <= k as u64);
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    k,
                    i + 1,
                    v.render(),
                    decided as u8
                ));
            }
        }
        out
    }
}

/// Deterministic lock-step execution of a config.
pub fn run<S: Scalar>(config: &ExecutionConfig<S>) -> Result<ExecutionTrace<S>, Error> {
    config.validate()?;
    let n = config.schedule.n();
    let decision_round = match decision_round(&config.behavior, n, &config.epsilon) {
        Ok(r) => Some(r),
        // surface the real reason (impossibility or missing bound) when
        // the horizon depends on the bound; otherwise run without one
        Err(e) => match config.horizon {
            HorizonPolicy::RunToDecision => return Err(e),
            HorizonPolicy::FixedRounds(_) => None,
        },
    };
    let total_rounds = match config.horizon {
        HorizonPolicy::FixedRounds(r) => r,
        HorizonPolicy::RunToDecision => decision_round.expect("present or returned above"),
    };
    let mut sim = Simulation::new(config.behavior.clone(), config.initial.clone());
    let mut values = vec![sim.values()];
    let mut deltas = vec![delta(&values[0])];
    for k in 1..=total_rounds {
        sim.step(&config.schedule.graph_at(k))?;
        let xs = sim.values();
        deltas.push(delta(&xs));
        values.push(xs);
    }
    let mut decisions = vec![None; n];
    let mut undecided_at_horizon = false;
    match decision_round {
        Some(dr) if dr <= total_rounds => {
            for (i, d) in decisions.iter_mut().enumerate() {
                *d = Some(Decision {
                    round: dr,
                    value: values[dr as usize][i].clone(),
                });
            }
        }
        Some(_) => undecided_at_horizon = true,
        None => {}
    }
    Ok(ExecutionTrace {
        values,
        deltas,
        decisions,
        decision_round,
        macro_length: config.behavior.macro_length,
        undecided_at_horizon,
    })
}

/// Smallest k >= 0 with alpha^k <= eps (alpha in (0,1)).
fn ceil_log_inv(alpha: &BigRational, eps: &BigRational) -> u64 {
    let mut k = 0u64;
    let mut pow = BigRational::one();
    while pow > *eps {
        pow *= alpha;
        k += 1;
    }
    k
}

/// Largest j >= 0 with 2^j <= r (r >= 1).
fn floor_log2(r: &BigRational) -> u64 {
    let two = BigRational::from_integer(BigInt::from(2));
    let mut j = 0u64;
    let mut pow = two.clone();
    while pow <= *r {
        pow *= &two;
        j += 1;
    }
    j
}

fn big(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// The round at which every process sets its decision, from the bound
/// matching the behavior:
///
/// * plain rho-safe rules on nonsplit rounds: ceil(log_{1/(1-rho)} 1/eps),
///   with the exact 1/3 rate for the two-process rule;
/// * amortized rho-safe rules: macro_length * ceil(log_{1/(1-rho)} 1/eps);
/// * quantized amortized midpoint: macro_length * (floor(log2(Q-2)) + 2)
///   for 1/Q-agreement, or the earlier suboptimal-precision round when
///   eps > 2/Q. Requires eps >= 1/Q; below that, agreement is not
///   generally achievable in rooted models.
///
/// `n_or_estimate` is the process count known to the processes (the
/// estimate N when one is configured).
pub fn decision_round(
    behavior: &Behavior,
    n_or_estimate: usize,
    epsilon: &BigRational,
) -> Result<u64, Error> {
    if *epsilon <= BigRational::zero() {
        return Err(Error::Config("epsilon must be positive".into()));
    }
    if let Some(spec) = &behavior.quantization {
        if !(behavior.amortized && behavior.rule == Rule::Midpoint) {
            return Err(Error::Config(format!(
                "no decision bound for quantized behavior `{behavior}`; \
                 only the quantized amortized midpoint carries one"
            )));
        }
        let q = spec.q;
        if q < 3 {
            return Err(Error::Config("quantized bound needs Q >= 3".into()));
        }
        let inv_q = BigRational::new(BigInt::one(), BigInt::from(q));
        if *epsilon < inv_q {
            return Err(Error::Impossible(format!(
                "epsilon < 1/Q (= 1/{q}): epsilon-agreement is not generally \
                 achievable with 1/{q}-quantized values in rooted models"
            )));
        }
        let two_over_q = BigRational::new(BigInt::from(2), BigInt::from(q));
        let macro_count = if *epsilon > two_over_q {
            // suboptimal precision: floor(log2((Q-2)/(Q eps - 2))) + 1
            let ratio = big(q as i64 - 2) / (big(q as i64) * epsilon.clone() - big(2));
            floor_log2(&ratio) + 1
        } else {
            floor_log2(&big(q as i64 - 2)) + 2
        };
        return Ok(behavior.macro_length * macro_count);
    }
    let (num, den) = behavior.rho(n_or_estimate);
    if num <= 0 || den <= 0 || 2 * num > den {
        return Err(Error::Config(format!(
            "safety coefficient {num}/{den} outside (0, 1/2]"
        )));
    }
    let alpha = if behavior.rule == Rule::ThirdPoint {
        big(1) / big(3)
    } else {
        BigRational::one() - BigRational::new(BigInt::from(num), BigInt::from(den))
    };
    Ok(behavior.macro_length * ceil_log_inv(&alpha, epsilon))
}

/// Spread ratios delta(x(k+window)) / delta(x(k)) at aligned window
/// starts k = 0, window, 2*window, ... A ratio is reported as 0 once
/// the spread is 0.
pub fn contraction_series<S: Scalar>(trace: &ExecutionTrace<S>, window: u64) -> Vec<S> {
    assert!(window >= 1);
    let mut ratios = Vec::new();
    let mut k = 0u64;
    while k + window <= trace.rounds() {
        let before = &trace.deltas[k as usize];
        let after = &trace.deltas[(k + window) as usize];
        ratios.push(if *before == S::zero() {
            S::zero()
        } else {
            after.clone() / before.clone()
        });
        k += window;
    }
    ratios
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn push(&mut self, name: &'static str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name,
            pass,
            detail: detail.into(),
        });
    }
}

/// Checks a trace against the problem conditions: termination,
/// epsilon-agreement of decisions, validity of decisions and every
/// intermediate value, monotone min/max envelope, per-macro-round
/// rho-safety against the macro-graph's in-neighbor values, and (for
/// quantized runs) grid closure and the two-decision-values property.
pub fn verify_trace<S: Scalar>(
    trace: &ExecutionTrace<S>,
    config: &ExecutionConfig<S>,
) -> Result<VerificationReport, Error> {
    let mut report = VerificationReport { checks: Vec::new() };
    let n = config.schedule.n();

    let decided: Vec<&Decision<S>> = trace.decisions.iter().flatten().collect();
    if trace.decision_round.is_some() {
        let terminated = decided.len() == n && !trace.undecided_at_horizon;
        report.push(
            "termination",
            terminated,
            format!("{} of {n} processes decided", decided.len()),
        );
        if terminated {
            let eps = S::from_rational(&config.epsilon);
            let dec_values: Vec<S> = decided.iter().map(|d| d.value.clone()).collect();
            let spread = delta(&dec_values);
            report.push(
                "epsilon-agreement",
                S::le_approx(&spread, &eps),
                format!(
                    "decision spread {} vs epsilon {}",
                    spread.render(),
                    eps.render()
                ),
            );
        } else {
            report.push("epsilon-agreement", false, "undecided at horizon");
        }
    }

    let lo0 = config.initial.iter().min().expect("n >= 1").clone();
    let hi0 = config.initial.iter().max().expect("n >= 1").clone();
    let mut validity = true;
    let mut where_broken = String::new();
    for (k, xs) in trace.values.iter().enumerate() {
        for (i, v) in xs.iter().enumerate() {
            if *v < lo0 || *v > hi0 {
                validity = false;
                where_broken = format!("x_{}({k}) = {} outside initial range", i + 1, v.render());
            }
        }
    }
    for d in &decided {
        if d.value < lo0 || d.value > hi0 {
            validity = false;
            where_broken = "decision outside initial range".into();
        }
    }
    report.push("validity", validity, where_broken);

    let mut monotone = true;
    let mut detail = String::new();
    for k in 1..trace.values.len() {
        let prev_min = trace.values[k - 1].iter().min().expect("n >= 1");
        let prev_max = trace.values[k - 1].iter().max().expect("n >= 1");
        let cur_min = trace.values[k].iter().min().expect("n >= 1");
        let cur_max = trace.values[k].iter().max().expect("n >= 1");
        if cur_min < prev_min || cur_max > prev_max {
            monotone = false;
            detail = format!("envelope widened at round {k}");
        }
    }
    report.push("monotone-envelope", monotone, detail);

    if config.behavior.quantization.is_none() {
        let (num, den) = config.behavior.rho(n);
        let rho = S::from_ratio(num, den);
        let macro_len = trace.macro_length;
        let macro_count = trace.rounds() / macro_len;
        let mut safe = true;
        let mut detail = String::new();
        'outer: for l in 1..=macro_count {
            let macro_graph = config.schedule.macro_graph(l, macro_len)?;
            let start = ((l - 1) * macro_len) as usize;
            let end = (l * macro_len) as usize;
            for p in 1..=n {
                let incoming: Vec<S> = macro_graph
                    .in_neighbors(p)
                    .map(|q| trace.values[start][q - 1].clone())
                    .collect();
                let lo = incoming.iter().min().expect("self-loop").clone();
                let hi = incoming.iter().max().expect("self-loop").clone();
                let x_new = &trace.values[end][p - 1];
                if !safety_check(&rho, &lo, &hi, x_new) {
                    safe = false;
                    detail = format!("process {p} broke {num}/{den}-safety at macro-round {l}");
                    break 'outer;
                }
            }
        }
        report.push("rho-safety", safe, detail);
    } else {
        let spec = config.behavior.quantization.as_ref().expect("checked");
        let on_grid = trace
            .values
            .iter()
            .all(|xs| xs.iter().all(|v| v.on_grid(spec.q)));
        report.push(
            "grid-closure",
            on_grid,
            format!("all values multiples of 1/{}", spec.q),
        );
        if decided.len() == n {
            let mut distinct: Vec<S> = decided.iter().map(|d| d.value.clone()).collect();
            distinct.sort();
            distinct.dedup();
            let adjacent = match distinct.len() {
                1 => true,
                2 => {
                    let gap = distinct[1].clone() - distinct[0].clone();
                    S::le_approx(&gap, &S::from_ratio(1, spec.q as i64))
                }
                _ => false,
            };
            report.push(
                "two-set-decisions",
                adjacent,
                format!("{} distinct decision values", distinct.len()),
            );
        }
    }

    Ok(report)
}

/// Outcome of probing a quantized run for its finite-time limit.
#[derive(Clone, Debug)]
pub enum FixpointOutcome<S: Scalar> {
    Converged { limits: Vec<S>, macro_rounds: u64 },
    Inconclusive { macro_rounds: u64 },
}

/// Extends a quantized run until no value has changed for
/// `quiescence_macro` consecutive macro-rounds, or gives up at
/// `cap_macro` macro-rounds. Never claims convergence otherwise.
pub fn fixpoint_probe<S: Scalar>(
    config: &ExecutionConfig<S>,
    quiescence_macro: u64,
    cap_macro: u64,
) -> Result<FixpointOutcome<S>, Error> {
    config.validate()?;
    if config.behavior.quantization.is_none() {
        return Err(Error::Config(
            "fixpoint probe applies to quantized behaviors".into(),
        ));
    }
    let macro_len = config.behavior.macro_length;
    let mut sim = Simulation::new(config.behavior.clone(), config.initial.clone());
    let mut last = sim.values();
    let mut streak = 0u64;
    for l in 1..=cap_macro {
        for off in 1..=macro_len {
            sim.step(&config.schedule.graph_at((l - 1) * macro_len + off))?;
        }
        let now = sim.values();
        if now == last {
            streak += 1;
            if streak >= quiescence_macro {
                return Ok(FixpointOutcome::Converged {
                    limits: now,
                    macro_rounds: l,
                });
            }
        } else {
            streak = 0;
            last = now;
        }
    }
    Ok(FixpointOutcome::Inconclusive {
        macro_rounds: cap_macro,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{QuantizationSpec, RoundingMode};
    use crate::dynamics::{fig1_graph, Fig1Tag, Repeat};
    use crate::value::{parse_rational, Rational};

    fn rat(n: i64, d: i64) -> Rational {
        <Rational as Scalar>::from_ratio(n, d)
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta(&[rat(1, 5), rat(7, 10), rat(2, 5)]), rat(1, 2));
        assert_eq!(delta(&[rat(3, 7), rat(3, 7)]), rat(0, 1));
        assert_eq!(delta(&[rat(0, 1), rat(1, 1)]), rat(1, 1));
    }

    #[test]
    fn decision_round_formulas() {
        // amortized midpoint, n=5, eps=0.01 -> 4 * ceil(log2 100) = 28
        let b = Behavior::plain(Rule::Midpoint).amortize(4).unwrap();
        assert_eq!(
            decision_round(&b, 5, &parse_rational("0.01").unwrap()).unwrap(),
            28
        );
        // quantized amortized midpoint, n=4, Q=10 -> 3 * (floor(log2 8) + 2) = 15
        let b = Behavior::plain(Rule::Midpoint)
            .amortize(3)
            .unwrap()
            .quantized(QuantizationSpec { q: 10, mode: RoundingMode::Down })
            .unwrap();
        assert_eq!(
            decision_round(&b, 4, &parse_rational("1/10").unwrap()).unwrap(),
            15
        );
        // amortized 1/n-safe, n=3, eps=1/2 -> 2 * ceil(log_{3/2} 2) = 4
        let b = Behavior::plain(Rule::MeanValue).amortize(2).unwrap();
        assert_eq!(
            decision_round(&b, 3, &parse_rational("1/2").unwrap()).unwrap(),
            4
        );
    }

    #[test]
    fn decision_round_rejects_sub_grid_epsilon() {
        let b = Behavior::plain(Rule::Midpoint)
            .amortize(3)
            .unwrap()
            .quantized(QuantizationSpec { q: 10, mode: RoundingMode::Down })
            .unwrap();
        let err = decision_round(&b, 4, &parse_rational("0.05").unwrap()).unwrap_err();
        assert!(matches!(err, Error::Impossible(_)));
    }

    #[test]
    fn suboptimal_precision_round() {
        // Q=64, eps=3/64 > 2/Q: 7 * (floor(log2(62/1)) + 1) = 42
        let b = Behavior::plain(Rule::Midpoint)
            .amortize(7)
            .unwrap()
            .quantized(QuantizationSpec { q: 64, mode: RoundingMode::Down })
            .unwrap();
        assert_eq!(
            decision_round(&b, 8, &parse_rational("3/64").unwrap()).unwrap(),
            42
        );
    }

    #[test]
    fn third_point_exact_recurrence() {
        let schedule = Schedule::explicit(vec![fig1_graph(Fig1Tag::G)], Repeat::Cycle).unwrap();
        let config = ExecutionConfig {
            behavior: Behavior::plain(Rule::ThirdPoint),
            schedule,
            initial: vec![rat(0, 1), rat(1, 1)],
            epsilon: parse_rational("1/1000").unwrap(),
            horizon: HorizonPolicy::FixedRounds(8),
        };
        let trace = run(&config).unwrap();
        for k in 0..=8usize {
            assert_eq!(trace.deltas[k], rat(1, 3i64.pow(k as u32)));
        }
    }

    #[test]
    fn all_equal_start_is_fixed() {
        let schedule = Schedule::random_rooted(4, 9, 0.3).unwrap();
        let config = ExecutionConfig {
            behavior: Behavior::plain(Rule::MeanValue).amortize(3).unwrap(),
            schedule,
            initial: vec![rat(2, 5); 4],
            epsilon: parse_rational("0.01").unwrap(),
            horizon: HorizonPolicy::FixedRounds(12),
        };
        let trace = run(&config).unwrap();
        for xs in &trace.values {
            assert!(xs.iter().all(|v| *v == rat(2, 5)));
        }
        assert!(contraction_series(&trace, 3).iter().all(|r| *r == rat(0, 1)));
    }

    #[test]
    fn amortized_midpoint_halves_each_macro_round() {
        // n=3, cyclic rooted schedule, x(0)=(0,1,1): check against a
        // hand-unrolled first macro-round.
        let g = crate::graph::CommunicationGraph::new(3, [(1, 2), (2, 3), (3, 1)]).unwrap();
        let schedule = Schedule::explicit(vec![g], Repeat::Cycle).unwrap();
        let config = ExecutionConfig {
            behavior: Behavior::plain(Rule::Midpoint).amortize(2).unwrap(),
            schedule,
            initial: vec![rat(0, 1), rat(1, 1), rat(1, 1)],
            epsilon: parse_rational("1/4").unwrap(),
            horizon: HorizonPolicy::FixedRounds(4),
        };
        let trace = run(&config).unwrap();
        // over rounds 1-2 every process hears both 0 and 1 through the cycle
        assert_eq!(trace.values[2], vec![rat(1, 2), rat(1, 2), rat(1, 2)]);
        for r in contraction_series(&trace, 2) {
            assert!(r <= rat(1, 2));
        }
    }

    #[test]
    fn run_to_decision_and_verification() {
        let schedule = Schedule::random_rooted(5, 21, 0.2).unwrap();
        let config = ExecutionConfig {
            behavior: Behavior::plain(Rule::Midpoint).amortize(4).unwrap(),
            schedule,
            initial: vec![rat(0, 1), rat(1, 4), rat(1, 2), rat(3, 4), rat(1, 1)],
            epsilon: parse_rational("0.01").unwrap(),
            horizon: HorizonPolicy::RunToDecision,
        };
        let trace = run(&config).unwrap();
        assert_eq!(trace.rounds(), 28);
        assert!(trace.all_decided());
        let report = verify_trace(&trace, &config).unwrap();
        assert!(report.passed(), "{:?}", report.checks);
    }

    #[test]
    fn loops_only_never_contracts_and_fails_verification() {
        let schedule = Schedule::loops_only(3).unwrap();
        let config = ExecutionConfig {
            behavior: Behavior::plain(Rule::Midpoint),
            schedule,
            initial: vec![rat(0, 1), rat(0, 1), rat(1, 1)],
            epsilon: parse_rational("0.1").unwrap(),
            horizon: HorizonPolicy::RunToDecision,
        };
        let trace = run(&config).unwrap();
        assert!(trace.deltas.iter().all(|d| *d == rat(1, 1)));
        let report = verify_trace(&trace, &config).unwrap();
        assert!(!report.passed());
        let agreement = report
            .checks
            .iter()
            .find(|c| c.name == "epsilon-agreement")
            .unwrap();
        assert!(!agreement.pass);
    }

    #[test]
    fn fixed_horizon_short_of_decision_reports_undecided() {
        let schedule = Schedule::random_rooted(3, 2, 0.3).unwrap();
        let config = ExecutionConfig {
            behavior: Behavior::plain(Rule::Midpoint).amortize(2).unwrap(),
            schedule,
            initial: vec![rat(0, 1), rat(1, 2), rat(1, 1)],
            epsilon: parse_rational("1/1024").unwrap(),
            horizon: HorizonPolicy::FixedRounds(2),
        };
        let trace = run(&config).unwrap();
        assert!(trace.undecided_at_horizon);
        assert!(!trace.all_decided());
        let report = verify_trace(&trace, &config).unwrap();
        assert!(!report.passed());
    }

    #[test]
    fn fixpoint_probe_trivial_and_small_case() {
        let spec = QuantizationSpec { q: 4, mode: RoundingMode::Down };
        let schedule = Schedule::random_rooted(3, 17, 0.2).unwrap();
        let behavior = Behavior::plain(Rule::Midpoint)
            .amortize(2)
            .unwrap()
            .quantized(spec)
            .unwrap();
        let config = ExecutionConfig {
            behavior: behavior.clone(),
            schedule: schedule.clone(),
            initial: vec![rat(1, 2); 3],
            epsilon: parse_rational("1/4").unwrap(),
            horizon: HorizonPolicy::RunToDecision,
        };
        match fixpoint_probe(&config, 3, 50).unwrap() {
            FixpointOutcome::Converged { limits, .. } => {
                assert_eq!(limits, vec![rat(1, 2); 3]);
            }
            FixpointOutcome::Inconclusive { .. } => panic!("constant start must converge"),
        }

        let config = ExecutionConfig {
            initial: vec![rat(0, 1), rat(1, 2), rat(1, 1)],
            ..config
        };
        match fixpoint_probe(&config, 5, 200).unwrap() {
            FixpointOutcome::Converged { limits, .. } => {
                let spread = delta(&limits);
                assert!(spread == rat(0, 1) || spread == rat(1, 4));
            }
            FixpointOutcome::Inconclusive { .. } => panic!("small case should settle"),
        }
    }

    #[test]
    fn trace_csv_shape() {
        let schedule = Schedule::loops_only(2).unwrap();
        let config = ExecutionConfig {
            behavior: Behavior::plain(Rule::MeanValue),
            schedule,
            initial: vec![rat(0, 1), rat(1, 1)],
            epsilon: parse_rational("1/2").unwrap(),
            horizon: HorizonPolicy::FixedRounds(1),
        };
        let trace = run(&config).unwrap();
        let csv = trace.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "round,process,value,decided");
        assert_eq!(lines.len(), 1 + 2 * 2);
        assert!(lines[1].starts_with("0,1,"));
    }
}
