//! Sources of communication patterns: the canonical proof
//! constructions, random generators, partially-rooted schedules, and a
//! greedy adversary.
//!
//! Schedules are value objects and round access is pure: the graph for
//! round k is derived from (parameters, seed, k) only, so two schedules
//! built from equal inputs are round-for-round identical.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algorithms::Behavior;
use crate::engine::{delta, Simulation};
use crate::error::Error;
use crate::graph::CommunicationGraph;
use crate::value::Scalar;

/// The three two-process graphs used by the 1/3 lower bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fig1Tag {
    G,
    HPlus,
    HMinus,
}

pub fn fig1_graph(tag: Fig1Tag) -> CommunicationGraph {
    let edges: &[(usize, usize)] = match tag {
        Fig1Tag::G => &[(1, 2), (2, 1)],
        Fig1Tag::HPlus => &[(1, 2)],
        Fig1Tag::HMinus => &[(2, 1)],
    };
    CommunicationGraph::new(2, edges.iter().copied()).expect("static edges in range")
}

/// The two nonsplit graphs used by the 1/2 lower bound for n >= 3:
/// nodes 2..n fully connected, plus edge (2,1) for K or edges (p,1),
/// p in 3..n, for L.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fig2Tag {
    K,
    L,
}

pub fn fig2_graph(n: usize, tag: Fig2Tag) -> Result<CommunicationGraph, Error> {
    if n < 3 {
        return Err(Error::Graph(format!("fig. 2 graphs need n >= 3, got {n}")));
    }
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for p in 2..=n {
        for q in 2..=n {
            edges.push((p, q));
        }
    }
    match tag {
        Fig2Tag::K => edges.push((2, 1)),
        Fig2Tag::L => edges.extend((3..=n).map(|p| (p, 1))),
    }
    CommunicationGraph::new(n, edges)
}

/// splitmix64 finalizer, used to derive per-round RNG streams.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic RNG for round `k` of stream `seed`.
pub fn round_rng(seed: u64, k: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed ^ mix(k)))
}

/// A rooted random graph: a uniform random labeled tree (decoded from a
/// random Pruefer sequence) oriented away from a uniform root, plus
/// each remaining edge independently with probability `density`, plus
/// self-loops.
pub fn random_rooted(n: usize, rng: &mut impl Rng, density: f64) -> CommunicationGraph {
    assert!((0.0..=1.0).contains(&density), "density in [0,1]");
    let mut edges = Vec::new();
    if n >= 2 {
        let undirected = random_tree(n, rng);
        let root = rng.gen_range(1..=n);
        // orient away from the root: edge (parent, child)
        let mut adj = vec![Vec::new(); n + 1];
        for &(a, b) in &undirected {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n + 1];
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    edges.push((v, w));
                    stack.push(w);
                }
            }
        }
        if density > 0.0 {
            for p in 1..=n {
                for q in 1..=n {
                    if p != q && rng.gen_bool(density) {
                        edges.push((p, q));
                    }
                }
            }
        }
    }
    CommunicationGraph::new(n, edges).expect("generated edges in range")
}

/// Uniform random labeled tree on nodes 1..=n via Pruefer decoding.
fn random_tree(n: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    if n == 2 {
        return vec![(1, 2)];
    }
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(1..=n)).collect();
    let mut degree = vec![1usize; n + 1];
    for &a in &seq {
        degree[a] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    let mut leaves: std::collections::BinaryHeap<std::cmp::Reverse<usize>> = (1..=n)
        .filter(|&v| degree[v] == 1)
        .map(std::cmp::Reverse)
        .collect();
    for &a in &seq {
        let std::cmp::Reverse(leaf) = leaves.pop().expect("tree invariant");
        edges.push((leaf, a));
        degree[a] -= 1;
        if degree[a] == 1 {
            leaves.push(std::cmp::Reverse(a));
        }
    }
    let std::cmp::Reverse(u) = leaves.pop().expect("two leaves remain");
    let std::cmp::Reverse(v) = leaves.pop().expect("two leaves remain");
    edges.push((u, v));
    edges
}

/// A certified non-rooted graph: nodes split into two cells with no
/// inter-cell edges, so the condensation has at least two source
/// components. Intra-cell edges are random.
pub fn random_nonrooted(n: usize, rng: &mut impl Rng) -> Result<CommunicationGraph, Error> {
    if n < 2 {
        return Err(Error::Graph("a 1-node graph is always rooted".into()));
    }
    let cut = rng.gen_range(1..n); // cell A = 1..=cut, cell B = cut+1..=n
    let mut edges = Vec::new();
    for p in 1..=n {
        for q in 1..=n {
            let same_cell = (p <= cut) == (q <= cut);
            if p != q && same_cell && rng.gen_bool(0.5) {
                edges.push((p, q));
            }
        }
    }
    CommunicationGraph::new(n, edges)
}

/// A nonsplit (and rooted) random graph: a random center broadcasts to
/// everyone, extra edges with probability `density`.
pub fn random_nonsplit(n: usize, rng: &mut impl Rng, density: f64) -> CommunicationGraph {
    let center = rng.gen_range(1..=n);
    let mut edges: Vec<(usize, usize)> = (1..=n).map(|q| (center, q)).collect();
    if density > 0.0 {
        for p in 1..=n {
            for q in 1..=n {
                if p != q && rng.gen_bool(density) {
                    edges.push((p, q));
                }
            }
        }
    }
    CommunicationGraph::new(n, edges).expect("generated edges in range")
}

/// Repetition policy for explicit graph lists.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Repeat {
    Cycle,
    HoldLast,
}

#[derive(Clone, Debug)]
enum ScheduleKind {
    Explicit {
        graphs: Vec<CommunicationGraph>,
        repeat: Repeat,
    },
    RandomRooted {
        seed: u64,
        density: f64,
    },
    PartiallyRooted {
        seed: u64,
        estimate: usize,
    },
    LoopsOnly,
}

/// A round-indexed source of communication graphs.
#[derive(Clone, Debug)]
pub struct Schedule {
    n: usize,
    kind: ScheduleKind,
}

impl Schedule {
    pub fn explicit(graphs: Vec<CommunicationGraph>, repeat: Repeat) -> Result<Self, Error> {
        let first = graphs
            .first()
            .ok_or_else(|| Error::Config("explicit schedule needs at least one graph".into()))?;
        let n = first.n();
        if graphs.iter().any(|g| g.n() != n) {
            return Err(Error::Config("explicit schedule mixes process counts".into()));
        }
        Ok(Schedule {
            n,
            kind: ScheduleKind::Explicit { graphs, repeat },
        })
    }

    pub fn random_rooted(n: usize, seed: u64, density: f64) -> Result<Self, Error> {
        if n == 0 {
            return Err(Error::Config("process count must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&density) {
            return Err(Error::Config("density must be in [0,1]".into()));
        }
        Ok(Schedule {
            n,
            kind: ScheduleKind::RandomRooted { seed, density },
        })
    }

    /// Blocks of n-1 rounds in which exactly N-1 randomly placed slots
    /// carry rooted graphs and the rest are certified non-rooted.
    pub fn partially_rooted(n: usize, estimate: usize, seed: u64) -> Result<Self, Error> {
        if estimate < 2 || estimate > n {
            return Err(Error::Config(format!(
                "estimate N={estimate} must satisfy 2 <= N <= n={n}"
            )));
        }
        Ok(Schedule {
            n,
            kind: ScheduleKind::PartiallyRooted { seed, estimate },
        })
    }

    pub fn loops_only(n: usize) -> Result<Self, Error> {
        if n == 0 {
            return Err(Error::Config("process count must be at least 1".into()));
        }
        Ok(Schedule {
            n,
            kind: ScheduleKind::LoopsOnly,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The communication graph of round `k` (1-based).
    pub fn graph_at(&self, k: u64) -> CommunicationGraph {
        assert!(k >= 1, "rounds are 1-based");
        match &self.kind {
            ScheduleKind::Explicit { graphs, repeat } => {
                let idx = (k - 1) as usize;
                match repeat {
                    Repeat::Cycle => graphs[idx % graphs.len()].clone(),
                    Repeat::HoldLast => graphs[idx.min(graphs.len() - 1)].clone(),
                }
            }
            ScheduleKind::RandomRooted { seed, density } => {
                random_rooted(self.n, &mut round_rng(*seed, k), *density)
            }
            ScheduleKind::PartiallyRooted { seed, estimate } => {
                let block_len = (self.n - 1) as u64;
                let block = (k - 1) / block_len;
                let pos = ((k - 1) % block_len) as usize;
                // the rooted slot positions of a block depend on the block only
                let mut block_rng = round_rng(mix(*seed), block);
                let mut slots: Vec<usize> = (0..block_len as usize).collect();
                slots.shuffle(&mut block_rng);
                let rooted_here = slots[..estimate - 1].contains(&pos);
                let mut rng = round_rng(*seed, k);
                if rooted_here {
                    random_rooted(self.n, &mut rng, 0.1)
                } else {
                    random_nonrooted(self.n, &mut rng).expect("n >= 2 by constructor")
                }
            }
            ScheduleKind::LoopsOnly => CommunicationGraph::loops_only(self.n),
        }
    }

    /// Product graph of macro-round `l` (1-based) for blocks of
    /// `macro_length` rounds starting at round 1.
    pub fn macro_graph(&self, l: u64, macro_length: u64) -> Result<CommunicationGraph, Error> {
        let start = (l - 1) * macro_length + 1;
        let graphs: Vec<_> = (start..start + macro_length).map(|k| self.graph_at(k)).collect();
        CommunicationGraph::product_of(&graphs)
    }
}

/// Result of checking window products for nonsplitness.
#[derive(Clone, Debug)]
pub struct WindowReport {
    pub all_nonsplit: bool,
    /// Starting round of the first window whose product splits.
    pub first_failure: Option<u64>,
    pub windows_checked: u64,
}

/// Checks whether every window of `window` consecutive rounds within
/// `horizon` has a nonsplit product. Windows are aligned to block
/// boundaries by default; `sliding` checks every offset.
pub fn k_nonsplit_window_check(
    schedule: &Schedule,
    window: u64,
    horizon: u64,
    sliding: bool,
) -> Result<WindowReport, Error> {
    if window < 1 || horizon < window {
        return Err(Error::Config("need window >= 1 and horizon >= window".into()));
    }
    let starts: Vec<u64> = if sliding {
        (1..=horizon - window + 1).collect()
    } else {
        (1..=horizon - window + 1).step_by(window as usize).collect()
    };
    let mut first_failure = None;
    for &start in &starts {
        let graphs: Vec<_> = (start..start + window).map(|k| schedule.graph_at(k)).collect();
        if !CommunicationGraph::product_of(&graphs)?.is_nonsplit() {
            first_failure = Some(start);
            break;
        }
    }
    Ok(WindowReport {
        all_nonsplit: first_failure.is_none(),
        first_failure,
        windows_checked: starts.len() as u64,
    })
}

/// Where the adversary draws its per-round candidates from.
#[derive(Clone, Debug)]
pub enum PoolSpec {
    /// A fixed set of graphs, all offered every round.
    Fixed(Vec<CommunicationGraph>),
    /// Fresh random rooted graphs each round.
    Random { density: f64, per_round: usize },
}

impl PoolSpec {
    fn candidates(&self, n: usize, seed: u64, k: u64) -> Vec<CommunicationGraph> {
        match self {
            PoolSpec::Fixed(graphs) => graphs.clone(),
            PoolSpec::Random { density, per_round } => {
                let mut rng = round_rng(seed, k);
                (0..*per_round)
                    .map(|_| random_rooted(n, &mut rng, *density))
                    .collect()
            }
        }
    }
}

/// A schedule chosen by the greedy adversary plus the per-round spread
/// ratios it achieved.
#[derive(Clone, Debug)]
pub struct AdversaryRun<S: Scalar> {
    pub schedule: Schedule,
    pub ratios: Vec<S>,
}

/// One-step greedy adversary: at every round it picks, from the sampled
/// pool of rooted graphs, the graph maximizing the spread ratio
/// delta(x(k)) / delta(x(k-1)) against the given behavior. Ratios are
/// reported as 0 once the spread hits 0. Deterministic given the seed.
pub fn greedy_adversary<S: Scalar>(
    behavior: &Behavior,
    n: usize,
    initial: &[S],
    horizon: u64,
    pool: &PoolSpec,
    seed: u64,
) -> Result<AdversaryRun<S>, Error> {
    if initial.len() != n {
        return Err(Error::Config(format!(
            "expected {n} initial values, got {}",
            initial.len()
        )));
    }
    let mut sim = Simulation::new(behavior.clone(), initial.to_vec());
    let mut chosen = Vec::with_capacity(horizon as usize);
    let mut ratios = Vec::with_capacity(horizon as usize);
    for k in 1..=horizon {
        let candidates = pool.candidates(n, seed, k);
        if candidates.is_empty() {
            return Err(Error::Config("adversary pool produced no candidates".into()));
        }
        let before = delta(&sim.values());
        let mut best: Option<(S, CommunicationGraph, Simulation<S>)> = None;
        for g in candidates {
            if !g.is_rooted() || g.n() != n {
                return Err(Error::Config(
                    "adversary pool must yield rooted graphs on n nodes".into(),
                ));
            }
            let mut probe = sim.clone();
            probe.step(&g)?;
            let after = delta(&probe.values());
            let ratio = if before == S::zero() {
                S::zero()
            } else {
                after / before.clone()
            };
            let better = match &best {
                None => true,
                Some((best_ratio, _, _)) => ratio > *best_ratio,
            };
            if better {
                best = Some((ratio, g, probe));
            }
        }
        let (ratio, g, probe) = best.expect("nonempty candidate set");
        sim = probe;
        chosen.push(g);
        ratios.push(ratio);
    }
    Ok(AdversaryRun {
        schedule: Schedule::explicit(chosen, Repeat::Cycle)?,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_edges() {
        let h_plus = fig1_graph(Fig1Tag::HPlus);
        assert_eq!(h_plus.edges().collect::<Vec<_>>(), vec![(1, 1), (1, 2), (2, 2)]);
        let h_minus = fig1_graph(Fig1Tag::HMinus);
        assert_eq!(h_minus.edges().collect::<Vec<_>>(), vec![(1, 1), (2, 1), (2, 2)]);
        assert_eq!(fig1_graph(Fig1Tag::G), CommunicationGraph::complete(2));
    }

    #[test]
    fn fig2_edges() {
        let k = fig2_graph(3, Fig2Tag::K).unwrap();
        assert_eq!(
            k,
            CommunicationGraph::new(3, [(2, 3), (3, 2), (2, 1)]).unwrap()
        );
        let l = fig2_graph(3, Fig2Tag::L).unwrap();
        assert_eq!(
            l,
            CommunicationGraph::new(3, [(2, 3), (3, 2), (3, 1)]).unwrap()
        );
        assert!(fig2_graph(2, Fig2Tag::K).is_err());
    }

    #[test]
    fn fig2_nonsplit_rooted_and_equivalent_at_2() {
        for n in [3usize, 4, 7] {
            let k = fig2_graph(n, Fig2Tag::K).unwrap();
            let l = fig2_graph(n, Fig2Tag::L).unwrap();
            assert!(k.is_nonsplit());
            assert!(l.is_nonsplit());
            assert!(k.is_rooted());
            assert!(l.is_rooted());
            // K and L agree on the in-neighborhood of node 2
            let in_k: Vec<_> = k.in_neighbors(2).collect();
            let in_l: Vec<_> = l.in_neighbors(2).collect();
            assert_eq!(in_k, in_l);
        }
    }

    #[test]
    fn random_rooted_is_rooted() {
        let mut rng = round_rng(11, 1);
        for n in [1usize, 2, 3, 8, 16] {
            for density in [0.0, 0.3, 1.0] {
                let g = random_rooted(n, &mut rng, density);
                assert!(g.is_rooted(), "n={n} density={density}");
            }
        }
        let complete = random_rooted(5, &mut rng, 1.0);
        assert_eq!(complete, CommunicationGraph::complete(5));
        assert!(complete.is_nonsplit());
    }

    #[test]
    fn random_nonrooted_is_not_rooted() {
        let mut rng = round_rng(12, 1);
        assert_eq!(
            random_nonrooted(2, &mut rng).unwrap(),
            CommunicationGraph::loops_only(2)
        );
        for n in [2usize, 3, 6, 13] {
            for _ in 0..20 {
                assert!(!random_nonrooted(n, &mut rng).unwrap().is_rooted());
            }
        }
        assert!(random_nonrooted(1, &mut rng).is_err());
    }

    #[test]
    fn random_nonsplit_is_nonsplit() {
        let mut rng = round_rng(13, 1);
        for n in [2usize, 5, 12] {
            for _ in 0..20 {
                let g = random_nonsplit(n, &mut rng, 0.2);
                assert!(g.is_nonsplit());
                assert!(g.is_rooted());
            }
        }
    }

    #[test]
    fn schedules_are_reproducible() {
        let a = Schedule::random_rooted(6, 42, 0.25).unwrap();
        let b = Schedule::random_rooted(6, 42, 0.25).unwrap();
        for k in 1..=30 {
            assert_eq!(a.graph_at(k), b.graph_at(k));
        }
        // round access is pure: asking twice gives the same graph
        assert_eq!(a.graph_at(7), a.graph_at(7));
        let c = Schedule::random_rooted(6, 43, 0.25).unwrap();
        assert!((1..=30).any(|k| a.graph_at(k) != c.graph_at(k)));
    }

    #[test]
    fn partially_rooted_block_counts() {
        let (n, estimate) = (7usize, 4usize);
        let s = Schedule::partially_rooted(n, estimate, 5).unwrap();
        let block_len = (n - 1) as u64;
        for block in 0..20u64 {
            let rooted = (1..=block_len)
                .filter(|off| s.graph_at(block * block_len + off).is_rooted())
                .count();
            assert!(rooted >= estimate - 1, "block {block} has {rooted} rooted");
        }
    }

    #[test]
    fn partially_rooted_degenerate_estimate() {
        let s = Schedule::partially_rooted(5, 5, 9).unwrap();
        for k in 1..=40 {
            assert!(s.graph_at(k).is_rooted());
        }
        assert!(Schedule::partially_rooted(5, 1, 0).is_err());
        assert!(Schedule::partially_rooted(5, 6, 0).is_err());
    }

    #[test]
    fn window_check_rooted_vs_loops() {
        let n = 5;
        let rooted = Schedule::random_rooted(n, 3, 0.2).unwrap();
        let report = k_nonsplit_window_check(&rooted, (n - 1) as u64, 40, false).unwrap();
        assert!(report.all_nonsplit, "failure at {:?}", report.first_failure);

        let loops = Schedule::loops_only(3).unwrap();
        let report = k_nonsplit_window_check(&loops, 2, 20, false).unwrap();
        assert!(!report.all_nonsplit);
        assert_eq!(report.first_failure, Some(1));
    }

    #[test]
    fn explicit_schedule_repeat_policies() {
        let graphs = vec![fig1_graph(Fig1Tag::HPlus), fig1_graph(Fig1Tag::HMinus)];
        let cyc = Schedule::explicit(graphs.clone(), Repeat::Cycle).unwrap();
        assert_eq!(cyc.graph_at(3), graphs[0]);
        let hold = Schedule::explicit(graphs.clone(), Repeat::HoldLast).unwrap();
        assert_eq!(hold.graph_at(3), graphs[1]);
        assert!(Schedule::explicit(vec![], Repeat::Cycle).is_err());
    }
}
