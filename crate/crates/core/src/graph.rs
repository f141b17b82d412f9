//! Communication graphs, the round-composition product, and the
//! structural predicates (rooted, nonsplit) the contraction results
//! rest on.
//!
//! Edge direction convention, used everywhere in this crate: an edge
//! `(p, q)` means "q hears p", i.e. `q` is an outgoing neighbor of `p`
//! and `p` is an incoming neighbor of `q`. Every communication graph
//! carries a self-loop at each node; constructors enforce this.

use std::fmt;

use crate::error::Error;

/// A directed graph over processes `1..=n` with mandatory self-loops.
///
/// Stored as per-node in-neighbor bitsets (dense rows of u64 words),
/// which makes the product operation a batch of word-wise ORs and the
/// nonsplit check a batch of word-wise ANDs. Immutable after
/// construction.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CommunicationGraph {
    n: usize,
    words: usize,
    /// Row q-1 holds the in-neighbor bitset of node q.
    in_rows: Vec<u64>,
}

impl CommunicationGraph {
    /// Builds a graph on `n` nodes from `extra_edges` (1-based pairs),
    /// adding all self-loops. Duplicates collapse.
    pub fn new(
        n: usize,
        extra_edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, Error> {
        if n == 0 {
            return Err(Error::Graph("process count must be at least 1".into()));
        }
        let words = n.div_ceil(64);
        let mut g = CommunicationGraph {
            n,
            words,
            in_rows: vec![0u64; n * words],
        };
        for p in 1..=n {
            g.set_edge(p, p);
        }
        for (p, q) in extra_edges {
            if p < 1 || p > n || q < 1 || q > n {
                return Err(Error::Graph(format!(
                    "edge ({p},{q}) out of range for n={n}"
                )));
            }
            g.set_edge(p, q);
        }
        Ok(g)
    }

    /// The loops-only graph (the identity of the product).
    pub fn loops_only(n: usize) -> Self {
        Self::new(n, std::iter::empty()).expect("n >= 1")
    }

    /// The complete graph on `n` nodes.
    pub fn complete(n: usize) -> Self {
        let edges = (1..=n).flat_map(|p| (1..=n).map(move |q| (p, q)));
        Self::new(n, edges).expect("n >= 1")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn set_edge(&mut self, p: usize, q: usize) {
        let row = (q - 1) * self.words;
        self.in_rows[row + (p - 1) / 64] |= 1u64 << ((p - 1) % 64);
    }

    pub fn has_edge(&self, p: usize, q: usize) -> bool {
        debug_assert!(p >= 1 && p <= self.n && q >= 1 && q <= self.n);
        let row = (q - 1) * self.words;
        self.in_rows[row + (p - 1) / 64] >> ((p - 1) % 64) & 1 != 0
    }

    fn in_row(&self, q: usize) -> &[u64] {
        &self.in_rows[(q - 1) * self.words..q * self.words]
    }

    /// Incoming neighbors of `q`, ascending.
    pub fn in_neighbors(&self, q: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.n;
        (1..=n).filter(move |&p| self.has_edge(p, q))
    }

    /// Outgoing neighbors of `p`, ascending.
    pub fn out_neighbors(&self, p: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.n;
        (1..=n).filter(move |&q| self.has_edge(p, q))
    }

    /// All edges as 1-based pairs, lexicographic.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (1..=n).flat_map(move |p| {
            (1..=n).filter_map(move |q| self.has_edge(p, q).then_some((p, q)))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.in_rows.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// The product `self ∘ other`: edge (p,q) iff some r with (p,r) in
    /// `self` and (r,q) in `other`. Models information flow over two
    /// consecutive rounds.
    pub fn compose(&self, other: &CommunicationGraph) -> Result<CommunicationGraph, Error> {
        if self.n != other.n {
            return Err(Error::Graph(format!(
                "cannot compose graphs with n={} and n={}",
                self.n, other.n
            )));
        }
        let mut out = CommunicationGraph {
            n: self.n,
            words: self.words,
            in_rows: vec![0u64; self.n * self.words],
        };
        // In_q(G∘H) = union of In_r(G) over r in In_q(H)
        for q in 1..=self.n {
            let dst = (q - 1) * self.words;
            for r in 1..=self.n {
                if other.has_edge(r, q) {
                    let src = self.in_row(r);
                    for w in 0..self.words {
                        out.in_rows[dst + w] |= src[w];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Left-to-right fold of [`compose`](Self::compose).
    pub fn product_of(graphs: &[CommunicationGraph]) -> Result<CommunicationGraph, Error> {
        let (first, rest) = graphs
            .split_first()
            .ok_or_else(|| Error::Graph("product of empty graph sequence".into()))?;
        let mut acc = first.clone();
        for g in rest {
            acc = acc.compose(g)?;
        }
        Ok(acc)
    }

    /// Whether some node has a directed path to every node, i.e. the
    /// graph contains a rooted spanning tree. Decided by condensing to
    /// strongly connected components: rooted iff exactly one component
    /// has no incoming edge from outside.
    pub fn is_rooted(&self) -> bool {
        let comp = self.scc_ids();
        let ncomp = 1 + *comp.iter().max().expect("n >= 1");
        let mut has_incoming = vec![false; ncomp];
        for (p, q) in self.edges() {
            if comp[p - 1] != comp[q - 1] {
                has_incoming[comp[q - 1]] = true;
            }
        }
        has_incoming.iter().filter(|&&b| !b).count() == 1
    }

    /// Whether any two nodes have a common incoming neighbor.
    pub fn is_nonsplit(&self) -> bool {
        for p in 1..=self.n {
            let row_p = self.in_row(p);
            for q in p + 1..=self.n {
                let row_q = self.in_row(q);
                if !row_p.iter().zip(row_q).any(|(a, b)| a & b != 0) {
                    return false;
                }
            }
        }
        true
    }

    /// Kosaraju SCC, 0-based component ids.
    fn scc_ids(&self) -> Vec<usize> {
        let n = self.n;
        // first pass: finish order on the forward graph (p -> q for edge (p,q))
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            seen[start] = true;
            while let Some(&(v, next)) = stack.last() {
                match (next..n).find(|&q| !seen[q] && self.has_edge(v + 1, q + 1)) {
                    Some(q) => {
                        stack.last_mut().expect("nonempty").1 = q + 1;
                        seen[q] = true;
                        stack.push((q, 0));
                    }
                    None => {
                        order.push(v);
                        stack.pop();
                    }
                }
            }
        }
        // second pass: reverse graph in finish order
        let mut comp = vec![usize::MAX; n];
        let mut ncomp = 0;
        for &start in order.iter().rev() {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = ncomp;
            while let Some(v) = stack.pop() {
                for p in 0..n {
                    // reverse edge: p <- v in forward graph means edge (v+1, p+1)? no:
                    // forward edge (p,q); reverse adjacency of v is {p : (p,v) edge},
                    // which is exactly the in-neighbor row of v.
                    if comp[p] == usize::MAX && self.has_edge(p + 1, v + 1) {
                        comp[p] = ncomp;
                        stack.push(p);
                    }
                }
            }
            ncomp += 1;
        }
        comp
    }

    /// Parses the edge-list text format: first line `n <count>`, then
    /// `<p> <q>` lines, `#` comments. Self-loops may be omitted in the
    /// file; they are added regardless, and omissions are reported so
    /// callers can warn.
    pub fn parse_edge_list(text: &str) -> Result<(CommunicationGraph, Vec<usize>), Error> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Graph("empty edge-list file".into()))?;
        let n = match header.split_whitespace().collect::<Vec<_>>()[..] {
            ["n", count] => count
                .parse::<usize>()
                .map_err(|_| Error::Graph(format!("bad process count: {count:?}")))?,
            _ => {
                return Err(Error::Graph(format!(
                    "expected header `n <count>`, got {header:?}"
                )))
            }
        };
        let mut edges = Vec::new();
        let mut has_loop = vec![false; n + 1];
        for line in lines {
            let parts: Vec<_> = line.split_whitespace().collect();
            let [p, q] = parts[..] else {
                return Err(Error::Graph(format!("expected `<p> <q>`, got {line:?}")));
            };
            let p: usize = p
                .parse()
                .map_err(|_| Error::Graph(format!("bad endpoint: {p:?}")))?;
            let q: usize = q
                .parse()
                .map_err(|_| Error::Graph(format!("bad endpoint: {q:?}")))?;
            if p == q && p >= 1 && p <= n {
                has_loop[p] = true;
            }
            edges.push((p, q));
        }
        let g = CommunicationGraph::new(n, edges)?;
        let missing = (1..=n).filter(|&p| !has_loop[p]).collect();
        Ok((g, missing))
    }

    /// Serializes to the edge-list text format (self-loops included).
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.n);
        for (p, q) in self.edges() {
            out.push_str(&format!("{p} {q}\n"));
        }
        out
    }
}

impl fmt::Debug for CommunicationGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CommunicationGraph(n={}, edges={:?})", self.n, self.edges().collect::<Vec<_>>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: usize, edges: &[(usize, usize)]) -> CommunicationGraph {
        CommunicationGraph::new(n, edges.iter().copied()).unwrap()
    }

    #[test]
    fn new_forces_self_loops() {
        let graph = g(2, &[]);
        let edges: Vec<_> = graph.edges().collect();
        assert_eq!(edges, vec![(1, 1), (2, 2)]);
    }

    #[test]
    fn new_rejects_out_of_range() {
        assert!(CommunicationGraph::new(1, [(1, 2)]).is_err());
        assert!(CommunicationGraph::new(0, []).is_err());
    }

    #[test]
    fn compose_enumerates_intermediates() {
        let a = g(3, &[(1, 2)]);
        let b = g(3, &[(2, 3)]);
        let c = a.compose(&b).unwrap();
        let mut edges: Vec<_> = c.edges().collect();
        edges.sort();
        assert_eq!(edges, vec![(1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)]);
    }

    #[test]
    fn compose_identity() {
        let h = g(4, &[(1, 2), (3, 4), (2, 1)]);
        let id = CommunicationGraph::loops_only(4);
        assert_eq!(id.compose(&h).unwrap(), h);
        assert_eq!(h.compose(&id).unwrap(), h);
    }

    #[test]
    fn compose_h_plus_h_minus_gives_complete() {
        let h_plus = g(2, &[(1, 2)]);
        let h_minus = g(2, &[(2, 1)]);
        assert_eq!(
            h_plus.compose(&h_minus).unwrap(),
            CommunicationGraph::complete(2)
        );
    }

    #[test]
    fn compose_rejects_mismatched_n() {
        assert!(g(2, &[]).compose(&g(3, &[])).is_err());
    }

    #[test]
    fn rooted_examples() {
        assert!(g(3, &[(1, 2), (1, 3)]).is_rooted());
        assert!(!g(2, &[]).is_rooted());
        assert!(g(1, &[]).is_rooted());
        // two-cycle plus isolated node: not rooted
        assert!(!g(3, &[(1, 2), (2, 1)]).is_rooted());
        // chain
        assert!(g(4, &[(1, 2), (2, 3), (3, 4)]).is_rooted());
    }

    #[test]
    fn nonsplit_examples() {
        assert!(g(2, &[(1, 2)]).is_nonsplit()); // common in-neighbor 1
        assert!(!g(2, &[]).is_nonsplit());
        assert!(CommunicationGraph::complete(5).is_nonsplit());
    }

    #[test]
    fn product_of_single_and_empty() {
        let a = g(3, &[(1, 2)]);
        assert_eq!(CommunicationGraph::product_of(&[a.clone()]).unwrap(), a);
        assert!(CommunicationGraph::product_of(&[]).is_err());
    }

    #[test]
    fn edge_list_round_trip_and_loop_warning() {
        let text = "# a comment\nn 3\n1 2   # inline\n2 3\n1 1\n";
        let (graph, missing) = CommunicationGraph::parse_edge_list(text).unwrap();
        assert_eq!(graph, g(3, &[(1, 2), (2, 3)]));
        assert_eq!(missing, vec![2, 3]);
        let (again, missing2) = CommunicationGraph::parse_edge_list(&graph.to_edge_list()).unwrap();
        assert_eq!(again, graph);
        assert!(missing2.is_empty());
    }

    #[test]
    fn large_n_uses_multiple_words() {
        // node 1 broadcasts to everyone
        let edges: Vec<_> = (2..=70).map(|q| (1, q)).collect();
        let graph = g(70, &edges);
        assert!(graph.is_rooted());
        assert!(graph.is_nonsplit()); // node 1 is a common in-neighbor
        assert!(graph.has_edge(1, 70));
        assert!(!CommunicationGraph::loops_only(70).is_nonsplit());
        assert!(!CommunicationGraph::loops_only(70).is_rooted());
    }
}
