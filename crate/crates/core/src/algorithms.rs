//! Update rules and per-process state machines: the plain averaging
//! rules, their amortized versions, and quantization.
//!
//! A behavior is pure: `payload`, `merge`, and `apply_update` are
//! functions of the process state and the received payloads, with no
//! shared mutable state. Anonymity is enforced by construction: only
//! the amortized equal-neighbor behavior ever sees sender identities,
//! and only because they travel inside its own payload.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::value::Scalar;

/// The named update rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    MeanValue,
    EqualNeighbor,
    Midpoint,
    /// Two-process rule with contraction rate exactly 1/3.
    ThirdPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundingMode {
    Down,
    Up,
}

/// Grid denominator and rounding direction for quantized variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizationSpec {
    pub q: u64,
    pub mode: RoundingMode,
}

/// A per-process algorithm: update rule, macro-round length, optional
/// quantization.
///
/// `macro_length = 1` with `amortized = false` is the plain algorithm;
/// `amortize` switches to the gather-then-update machinery. The two
/// coincide on every trace when the macro length is 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Behavior {
    pub rule: Rule,
    pub amortized: bool,
    pub macro_length: u64,
    pub quantization: Option<QuantizationSpec>,
}

impl Behavior {
    pub fn plain(rule: Rule) -> Self {
        Behavior {
            rule,
            amortized: false,
            macro_length: 1,
            quantization: None,
        }
    }

    /// The amortized version: gather payloads for `macro_length` rounds,
    /// update once per macro-round, then reset the gathered state to the
    /// singleton of the new value.
    pub fn amortize(mut self, macro_length: u64) -> Result<Self, Error> {
        if macro_length == 0 {
            return Err(Error::Config("macro length must be at least 1".into()));
        }
        self.amortized = true;
        self.macro_length = macro_length;
        Ok(self)
    }

    pub fn quantized(mut self, spec: QuantizationSpec) -> Result<Self, Error> {
        if spec.q == 0 {
            return Err(Error::Config("grid denominator Q must be positive".into()));
        }
        self.quantization = Some(spec);
        Ok(self)
    }

    /// Safety coefficient as a fraction (numerator, denominator), given
    /// the number of processes.
    pub fn rho(&self, n: usize) -> (i64, i64) {
        match self.rule {
            Rule::MeanValue | Rule::EqualNeighbor => (1, n as i64),
            Rule::Midpoint => (1, 2),
            Rule::ThirdPoint => (1, 3),
        }
    }

    /// Whether the behavior works without sender identities. Only the
    /// amortized equal-neighbor rule needs them, to count values per
    /// originating process across a macro-round.
    pub fn is_anonymous(&self) -> bool {
        !(self.amortized && self.rule == Rule::EqualNeighbor)
    }

    pub fn init_state<S: Scalar>(&self, id: u32, x0: S) -> ProcessState<S> {
        let accum = self.reset_accum(id, &x0);
        ProcessState { x: x0, accum }
    }

    fn reset_accum<S: Scalar>(&self, id: u32, x: &S) -> Accum<S> {
        match self.rule {
            Rule::MeanValue | Rule::ThirdPoint => {
                Accum::Values(BTreeSet::from([x.clone()]))
            }
            Rule::EqualNeighbor if self.amortized => {
                Accum::IdValues(BTreeMap::from([(id, x.clone())]))
            }
            Rule::EqualNeighbor => Accum::Multiset(vec![x.clone()]),
            Rule::Midpoint => Accum::MinMax(x.clone(), x.clone()),
        }
    }

    /// The payload a process sends at the start of a round. Plain
    /// behaviors send the bare value; amortized ones relay everything
    /// gathered so far.
    pub fn payload<S: Scalar>(&self, state: &ProcessState<S>) -> Payload<S> {
        if !self.amortized {
            return Payload::Value(state.x.clone());
        }
        match &state.accum {
            Accum::Values(v) => Payload::ValueSet(v.clone()),
            Accum::IdValues(w) => Payload::IdValueSet(w.clone()),
            Accum::MinMax(m, big) => Payload::MinMax(m.clone(), big.clone()),
            Accum::Multiset(_) => unreachable!("plain behaviors send bare values"),
        }
    }

    /// Folds the payloads received this round (own included, via the
    /// self-loop) into the gathered state.
    pub fn merge<S: Scalar>(&self, state: &mut ProcessState<S>, received: &[Payload<S>]) {
        if !self.amortized {
            // plain: the gathered state is rebuilt from this round alone
            state.accum = match self.rule {
                Rule::MeanValue | Rule::ThirdPoint => Accum::Values(BTreeSet::new()),
                Rule::EqualNeighbor => Accum::Multiset(Vec::new()),
                Rule::Midpoint => {
                    let mut vals = received.iter().map(|p| match p {
                        Payload::Value(v) => v.clone(),
                        _ => unreachable!(),
                    });
                    let first = vals.next().expect("self-loop guarantees own payload");
                    let (mut lo, mut hi) = (first.clone(), first);
                    for v in vals {
                        if v < lo {
                            lo = v.clone();
                        }
                        if v > hi {
                            hi = v;
                        }
                    }
                    state.accum = Accum::MinMax(lo, hi);
                    return;
                }
            };
            for p in received {
                let Payload::Value(v) = p else { unreachable!() };
                match &mut state.accum {
                    Accum::Values(set) => {
                        set.insert(v.clone());
                    }
                    Accum::Multiset(vals) => vals.push(v.clone()),
                    _ => unreachable!(),
                }
            }
            return;
        }
        let mut values = BTreeSet::new();
        let mut ids = BTreeMap::new();
        let mut minmax: Option<(S, S)> = None;
        for p in received {
            match p {
                Payload::ValueSet(set) => values.extend(set.iter().cloned()),
                Payload::IdValueSet(map) => {
                    ids.extend(map.iter().map(|(k, v)| (*k, v.clone())))
                }
                Payload::MinMax(m, big) => {
                    minmax = Some(match minmax.take() {
                        None => (m.clone(), big.clone()),
                        Some((lo, hi)) => (lo.min(m.clone()), hi.max(big.clone())),
                    });
                }
                Payload::Value(_) => unreachable!("amortized behaviors send gathered state"),
            }
        }
        state.accum = match self.rule {
            Rule::MeanValue | Rule::ThirdPoint => Accum::Values(values),
            Rule::EqualNeighbor => Accum::IdValues(ids),
            Rule::Midpoint => {
                let (lo, hi) = minmax.expect("self-loop guarantees own payload");
                Accum::MinMax(lo, hi)
            }
        }
    }

    /// Fires the update rule (at rounds `k ≡ 0 mod macro_length`) and
    /// resets the gathered state to the singleton of the new value.
    pub fn apply_update<S: Scalar>(
        &self,
        id: u32,
        state: &mut ProcessState<S>,
    ) -> Result<(), Error> {
        let mut new_x = match (&state.accum, self.rule) {
            (Accum::Values(set), Rule::MeanValue) => mean_value_update(set)?,
            (Accum::Values(set), Rule::ThirdPoint) => {
                let other = set.iter().find(|v| **v != state.x).cloned();
                third_point_update(&state.x, other.as_ref())
            }
            (Accum::Multiset(vals), Rule::EqualNeighbor) => equal_neighbor_update(vals)?,
            (Accum::IdValues(map), Rule::EqualNeighbor) => {
                let vals: Vec<S> = map.values().cloned().collect();
                equal_neighbor_update(&vals)?
            }
            (Accum::MinMax(lo, hi), Rule::Midpoint) => midpoint_update(lo, hi)?,
            _ => unreachable!("accumulator matches rule by construction"),
        };
        if let Some(spec) = &self.quantization {
            new_x = quantize(&new_x, spec)?;
        }
        state.x = new_x;
        state.accum = self.reset_accum(id, &state.x);
        Ok(())
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.amortized {
            write!(f, "amortized ")?;
        }
        let name = match self.rule {
            Rule::MeanValue => "mean-value",
            Rule::EqualNeighbor => "equal-neighbor",
            Rule::Midpoint => "midpoint",
            Rule::ThirdPoint => "third-point",
        };
        write!(f, "{name}")?;
        if let Some(spec) = &self.quantization {
            let mode = match spec.mode {
                RoundingMode::Down => "down",
                RoundingMode::Up => "up",
            };
            write!(f, " quantized({}, {mode})", spec.q)?;
        }
        Ok(())
    }
}

/// What a process sends in a round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload<S: Scalar> {
    Value(S),
    ValueSet(BTreeSet<S>),
    IdValueSet(BTreeMap<u32, S>),
    MinMax(S, S),
}

/// Per-process state: the current value and the gathered payload state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessState<S: Scalar> {
    pub x: S,
    accum: Accum<S>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Accum<S: Scalar> {
    Values(BTreeSet<S>),
    IdValues(BTreeMap<u32, S>),
    MinMax(S, S),
    /// Per-round multiset for the plain equal-neighbor rule.
    Multiset(Vec<S>),
}

/// Mean over a set of distinct values (duplicates already collapsed).
pub fn mean_value_update<S: Scalar>(values: &BTreeSet<S>) -> Result<S, Error> {
    if values.is_empty() {
        return Err(Error::Config("mean over empty value set".into()));
    }
    let sum = values
        .iter()
        .cloned()
        .fold(S::zero(), |acc, v| acc + v);
    Ok(sum / S::from_ratio(values.len() as i64, 1))
}

/// Mean counting multiplicities, one term per incoming neighbor.
pub fn equal_neighbor_update<S: Scalar>(values: &[S]) -> Result<S, Error> {
    if values.is_empty() {
        return Err(Error::Config("mean over empty multiset".into()));
    }
    let sum = values
        .iter()
        .cloned()
        .fold(S::zero(), |acc, v| acc + v);
    Ok(sum / S::from_ratio(values.len() as i64, 1))
}

/// `(m + M) / 2`; rejects an inverted interval.
pub fn midpoint_update<S: Scalar>(lo: &S, hi: &S) -> Result<S, Error> {
    if lo > hi {
        return Err(Error::Config("midpoint of inverted interval".into()));
    }
    Ok((lo.clone() + hi.clone()) / S::from_ratio(2, 1))
}

/// Two-process rule: `x/3 + 2y/3` when the other value was received,
/// otherwise the value is kept.
pub fn third_point_update<S: Scalar>(own: &S, other: Option<&S>) -> S {
    match other {
        Some(y) => {
            own.clone() / S::from_ratio(3, 1)
                + y.clone() * S::from_ratio(2, 1) / S::from_ratio(3, 1)
        }
        None => own.clone(),
    }
}

/// Rounds to the nearest grid multiple of 1/Q in the spec's direction.
pub fn quantize<S: Scalar>(v: &S, spec: &QuantizationSpec) -> Result<S, Error> {
    if *v < S::zero() || *v > S::one() {
        return Err(Error::Config("value outside [0,1] cannot be quantized".into()));
    }
    Ok(match spec.mode {
        RoundingMode::Down => v.quantize_down(spec.q),
        RoundingMode::Up => v.quantize_up(spec.q),
    })
}

/// Checks `ρM + (1−ρ)m ≤ x ≤ (1−ρ)M + ρm`, exact in rational mode and
/// with the fixed absolute tolerance in float mode.
pub fn safety_check<S: Scalar>(rho: &S, lo: &S, hi: &S, x_new: &S) -> bool {
    let one_minus = S::one() - rho.clone();
    let lower = rho.clone() * hi.clone() + one_minus.clone() * lo.clone();
    let upper = one_minus * hi.clone() + rho.clone() * lo.clone();
    S::le_approx(&lower, x_new) && S::le_approx(x_new, &upper)
}

/// Parses a behavior descriptor such as `midpoint`, `amortized
/// mean-value`, or `amortized midpoint quantized(10, down)`. The
/// amortized macro length is filled in from the process-count estimate
/// by the caller; here it defaults to 1.
pub fn parse_behavior(descriptor: &str) -> Result<Behavior, Error> {
    let mut rule = None;
    let mut amortized = false;
    let mut quantization = None;
    // drop whitespace inside parentheses so `quantized(Q, down)` is one token
    let mut depth = 0usize;
    let normalized: String = descriptor
        .chars()
        .filter(|&c| {
            match c {
                '(' => depth += 1,
                ')' => depth = depth.saturating_sub(1),
                _ => {}
            }
            !(c.is_whitespace() && depth > 0)
        })
        .collect();
    for token in normalized.split_whitespace() {
        let token = token.trim_matches(|c| c == '+' || c == ',');
        if token.is_empty() {
            continue;
        }
        match token {
            "mean-value" => rule = Some(Rule::MeanValue),
            "equal-neighbor" => rule = Some(Rule::EqualNeighbor),
            "midpoint" => rule = Some(Rule::Midpoint),
            "third-point" => rule = Some(Rule::ThirdPoint),
            "amortized" => amortized = true,
            t if t.starts_with("quantized(") && t.ends_with(')') => {
                let inner = &t["quantized(".len()..t.len() - 1];
                let parts: Vec<_> = inner.split(',').map(str::trim).collect();
                let [q, mode] = parts[..] else {
                    return Err(Error::Config(format!(
                        "expected quantized(Q, down|up), got {t:?}"
                    )));
                };
                let q: u64 = q
                    .parse()
                    .map_err(|_| Error::Config(format!("bad grid denominator {q:?}")))?;
                let mode = match mode {
                    "down" => RoundingMode::Down,
                    "up" => RoundingMode::Up,
                    other => {
                        return Err(Error::Config(format!(
                            "bad rounding mode {other:?} (down|up)"
                        )))
                    }
                };
                quantization = Some(QuantizationSpec { q, mode });
            }
            other => {
                return Err(Error::Config(format!("unknown behavior token {other:?}")))
            }
        }
    }
    let rule = rule.ok_or_else(|| {
        Error::Config(format!("no update rule named in descriptor {descriptor:?}"))
    })?;
    let mut behavior = Behavior::plain(rule);
    if amortized {
        behavior = behavior.amortize(1)?;
    }
    if let Some(spec) = quantization {
        behavior = behavior.quantized(spec)?;
    }
    Ok(behavior)
}
