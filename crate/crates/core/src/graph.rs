//! Interaction networks and the undirected-graph algorithms used to pick
//! non-interfering focal units.
//!
//! Units are indexed `0..n` in the library; file formats use 1-based ids.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Directed interaction network over `n` units.
///
/// `peers(i)` holds every `j` with `A_ij = 1`, meaning `j` affects `i`.
/// Peer lists are sorted and never contain `i` itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    peers: Vec<Vec<usize>>,
}

impl Network {
    /// Network with no edges.
    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("network needs at least one unit".into()));
        }
        Ok(Self { peers: vec![Vec::new(); n] })
    }

    /// Builds a network from `(i, j)` pairs meaning `A_ij = 1`.
    ///
    /// With `undirected`, each pair also sets `A_ji = 1`. Duplicate pairs are
    /// merged; self-loops are rejected.
    pub fn from_pairs<I>(n: usize, pairs: I, undirected: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut net = Self::empty(n)?;
        for (i, j) in pairs {
            net.check(i)?;
            net.check(j)?;
            if i == j {
                return Err(Error::InvalidParameter(format!("self-loop on unit {i}")));
            }
            net.peers[i].push(j);
            if undirected {
                net.peers[j].push(i);
            }
        }
        for list in &mut net.peers {
            list.sort_unstable();
            list.dedup();
        }
        Ok(net)
    }

    /// Complete undirected network on `n` units.
    pub fn complete(n: usize) -> Result<Self> {
        let pairs = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        Self::from_pairs(n, pairs, true)
    }

    pub fn len(&self) -> usize {
        self.peers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peers.is_empty()
    }

    fn check(&self, i: usize) -> Result<()> {
        if i < self.peers.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: i, n: self.peers.len() })
        }
    }

    /// Units that affect `i`.
    pub fn peers(&self, i: usize) -> Result<&[usize]> {
        self.check(i)?;
        Ok(&self.peers[i])
    }

    /// Unchecked peer access for hot loops; panics on a bad index.
    pub(crate) fn peers_of(&self, i: usize) -> &[usize] {
        &self.peers[i]
    }

    /// `{i}` together with its peers, sorted.
    pub fn closed_neighborhood(&self, i: usize) -> Result<Vec<usize>> {
        self.check(i)?;
        Ok(self.closed_of(i))
    }

    pub(crate) fn closed_of(&self, i: usize) -> Vec<usize> {
        let peers = &self.peers[i];
        let at = peers.partition_point(|&j| j < i);
        let mut out = Vec::with_capacity(peers.len() + 1);
        out.extend_from_slice(&peers[..at]);
        out.push(i);
        out.extend_from_slice(&peers[at..]);
        out
    }

    pub fn degree(&self, i: usize) -> Result<usize> {
        Ok(self.peers(i)?.len())
    }

    /// True when `A_ij = A_ji` for every pair.
    pub fn is_symmetric(&self) -> bool {
        self.peers.iter().enumerate().all(|(i, list)| list.iter().all(|&j| self.peers[j].binary_search(&i).is_ok()))
    }

    /// All `(i, j)` with `A_ij = 1`, in row order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.peers.iter().enumerate().flat_map(|(i, list)| list.iter().map(move |&j| (i, j)))
    }

    /// Undirected edges `{i, j}` with `i < j`; only meaningful for symmetric networks.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs().filter(|&(i, j)| i < j)
    }

    /// Dense adjacency matrix, for small debugging cases.
    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        let n = self.len();
        let mut out = vec![vec![0u8; n]; n];
        for (i, j) in self.pairs() {
            out[i][j] = 1;
        }
        out
    }
}

/// Undirected Erdős–Rényi network: each unordered pair is linked
/// independently with probability `p`. Stored symmetrically.
pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Network> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("edge probability {p} outside [0, 1]")));
    }
    let mut peers = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                peers[i].push(j);
                peers[j].push(i);
            }
        }
    }
    for list in &mut peers {
        list.sort_unstable();
    }
    Ok(Network { peers })
}

/// Simple undirected graph over a subset of unit ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleGraph {
    vertices: Vec<usize>,
    // adjacency in local (position) indices, sorted
    adj: Vec<Vec<usize>>,
}

impl SimpleGraph {
    /// Builds a graph from vertex ids and undirected edges between them.
    pub fn new<I>(vertices: &[usize], edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let vertices: Vec<usize> = vertices.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let mut adj = vec![Vec::new(); vertices.len()];
        let local = |v: usize| {
            vertices
                .binary_search(&v)
                .map_err(|_| Error::InvalidParameter(format!("edge endpoint {v} is not a vertex")))
        };
        for (u, v) in edges {
            let (a, b) = (local(u)?, local(v)?);
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop on vertex {u}")));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { vertices, adj })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        match (self.vertices.binary_search(&u), self.vertices.binary_search(&v)) {
            (Ok(a), Ok(b)) => self.adj[a].binary_search(&b).is_ok(),
            _ => false,
        }
    }

    /// Neighbor ids of vertex `v` (empty if `v` is not a vertex).
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        match self.vertices.binary_search(&v) {
            Ok(a) => self.adj[a].iter().map(|&b| self.vertices[b]).collect(),
            Err(_) => Vec::new(),
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj.iter().enumerate().flat_map(move |(a, list)| {
            list.iter().filter(move |&&b| a < b).map(move |&b| (self.vertices[a], self.vertices[b]))
        })
    }
}

/// Graph on `vertices` with an edge between two units whenever their closed
/// neighborhoods intersect.
pub fn common_friend_graph(net: &Network, vertices: &[usize]) -> Result<SimpleGraph> {
    overlap_graph(net, vertices, |v| net.closed_of(v))
}

/// Graph on `vertices` with an edge between two units whenever the unit sets
/// returned by `neighborhood` intersect.
pub fn overlap_graph<F>(net: &Network, vertices: &[usize], neighborhood: F) -> Result<SimpleGraph>
where
    F: Fn(usize) -> Vec<usize>,
{
    for &v in vertices {
        net.check(v)?;
    }
    let verts: Vec<usize> = vertices.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();

    // members[u] = local indices of vertices whose neighborhood holds u
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); net.len()];
    for (a, &v) in verts.iter().enumerate() {
        for u in neighborhood(v) {
            net.check(u)?;
            members[u].push(a);
        }
    }
    let mut adj = vec![Vec::new(); verts.len()];
    for group in members.iter().filter(|g| g.len() > 1) {
        for (x, &a) in group.iter().enumerate() {
            for &b in &group[x + 1..] {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    Ok(SimpleGraph { vertices: verts, adj })
}

/// Greedy maximal independent set.
///
/// Repeatedly takes a vertex of minimum remaining degree (ties broken by
/// `rng`), then deletes it and its neighbors. The result is independent and
/// maximal. Returned ids are sorted.
pub fn greedy_independent_set<R: Rng + ?Sized>(g: &SimpleGraph, rng: &mut R) -> Vec<usize> {
    let k = g.vertices.len();
    if k == 0 {
        return Vec::new();
    }
    // random priority breaks degree ties
    let mut tiebreak: Vec<usize> = (0..k).collect();
    tiebreak.shuffle(rng);
    let mut rank = vec![0usize; k];
    for (pos, &v) in tiebreak.iter().enumerate() {
        rank[v] = pos;
    }

    let mut degree: Vec<usize> = g.adj.iter().map(Vec::len).collect();
    let mut alive = vec![true; k];
    let mut heap: BTreeSet<(usize, usize, usize)> = (0..k).map(|v| (degree[v], rank[v], v)).collect();
    let mut chosen = Vec::new();

    while let Some((_, _, v)) = heap.pop_first() {
        chosen.push(g.vertices[v]);
        alive[v] = false;
        for &u in &g.adj[v] {
            if !alive[u] {
                continue;
            }
            alive[u] = false;
            heap.remove(&(degree[u], rank[u], u));
            for &w in &g.adj[u] {
                if alive[w] {
                    heap.remove(&(degree[w], rank[w], w));
                    degree[w] -= 1;
                    heap.insert((degree[w], rank[w], w));
                }
            }
        }
    }
    chosen.sort_unstable();
    chosen
}

/// True when no two members of `set` are adjacent in `g`.
pub fn is_independent(g: &SimpleGraph, set: &[usize]) -> bool {
    set.iter().enumerate().all(|(x, &u)| set[x + 1..].iter().all(|&v| !g.has_edge(u, v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn path3() -> SimpleGraph {
        SimpleGraph::new(&[1, 2, 3], [(1, 2), (2, 3)]).unwrap()
    }

    #[test]
    fn erdos_renyi_extremes() {
        let mut rng = stream(1, 0);
        let empty = erdos_renyi(3, 0.0, &mut rng).unwrap();
        assert!((0..3).all(|i| empty.degree(i).unwrap() == 0));
        let full = erdos_renyi(3, 1.0, &mut rng).unwrap();
        assert!((0..3).all(|i| full.degree(i).unwrap() == 2));
        assert!(full.is_symmetric());
        assert!(erdos_renyi(3, 1.5, &mut rng).is_err());
        assert!(erdos_renyi(0, 0.5, &mut rng).is_err());
    }

    #[test]
    fn erdos_renyi_mean_degree() {
        // E[deg] = (n - 1) p = 3 * 199 / 200
        let n = 200;
        let total: f64 = (0..100)
            .map(|s| {
                let net = erdos_renyi(n, 3.0 / n as f64, &mut stream(s, 0)).unwrap();
                (0..n).map(|i| net.degree(i).unwrap()).sum::<usize>() as f64 / n as f64
            })
            .sum();
        let mean = total / 100.0;
        assert!((mean - 3.0 * 199.0 / 200.0).abs() < 0.2, "mean degree {mean}");
    }

    #[test]
    fn erdos_renyi_is_reproducible() {
        let a = erdos_renyi(50, 0.1, &mut stream(9, 2)).unwrap();
        let b = erdos_renyi(50, 0.1, &mut stream(9, 2)).unwrap();
        assert_eq!(a, b);
        assert!(a.pairs().all(|(i, j)| i != j));
    }

    #[test]
    fn peers_and_neighborhoods() {
        let empty = Network::empty(6).unwrap();
        assert!(empty.peers(4).unwrap().is_empty());
        assert_eq!(empty.closed_neighborhood(4).unwrap(), vec![4]);

        let full = Network::complete(3).unwrap();
        assert_eq!(full.peers(0).unwrap(), &[1, 2]);
        assert_eq!(full.closed_neighborhood(1).unwrap(), vec![0, 1, 2]);

        // A_{1,2} = 1 only: 2 affects 1
        let directed = Network::from_pairs(2, [(0, 1)], false).unwrap();
        assert_eq!(directed.peers(0).unwrap(), &[1]);
        assert!(directed.peers(1).unwrap().is_empty());

        let sym = Network::from_pairs(2, [(0, 1)], true).unwrap();
        assert_eq!(sym.closed_neighborhood(0).unwrap(), vec![0, 1]);
        assert!(sym.peers(2).is_err());
        assert!(Network::from_pairs(2, [(1, 1)], false).is_err());
    }

    #[test]
    fn common_friend_edges() {
        let net = Network::from_pairs(4, [(0, 1), (2, 3)], true).unwrap();
        assert_eq!(common_friend_graph(&net, &[0, 2]).unwrap().edge_count(), 0);

        let net = Network::from_pairs(3, [(0, 1), (1, 2)], true).unwrap();
        let g = common_friend_graph(&net, &[0, 2]).unwrap();
        assert!(g.has_edge(0, 2) && g.has_edge(2, 0));

        let g = common_friend_graph(&Network::complete(4).unwrap(), &[0, 1, 2, 3]).unwrap();
        assert_eq!(g.edge_count(), 6);

        assert!(common_friend_graph(&net, &[5]).is_err());
    }

    #[test]
    fn common_friend_directed_overlap() {
        // 2 affects both 0 and 1, so their closed neighborhoods share 2
        let net = Network::from_pairs(3, [(0, 2), (1, 2)], false).unwrap();
        let g = common_friend_graph(&net, &[0, 1]).unwrap();
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn greedy_small_cases() {
        let mut rng = stream(3, 0);
        let edgeless = SimpleGraph::new(&[1, 2, 3], []).unwrap();
        assert_eq!(greedy_independent_set(&edgeless, &mut rng), vec![1, 2, 3]);

        let tri = SimpleGraph::new(&[1, 2, 3], [(1, 2), (2, 3), (1, 3)]).unwrap();
        assert_eq!(greedy_independent_set(&tri, &mut rng).len(), 1);

        for s in 0..20 {
            assert_eq!(greedy_independent_set(&path3(), &mut stream(s, 0)), vec![1, 3]);
        }
        let none = SimpleGraph::new(&[], []).unwrap();
        assert!(greedy_independent_set(&none, &mut rng).is_empty());
    }

    #[test]
    fn path3_maximum_by_enumeration() {
        let g = path3();
        let v = g.vertices().to_vec();
        let best: Vec<Vec<usize>> = (0u32..8)
            .map(|mask| v.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &x)| x).collect::<Vec<_>>())
            .filter(|s| is_independent(&g, s))
            .fold(Vec::new(), |mut acc: Vec<Vec<usize>>, s| {
                match acc.first().map(Vec::len) {
                    Some(l) if l > s.len() => {}
                    Some(l) if l == s.len() => acc.push(s),
                    _ => acc = vec![s],
                }
                acc
            });
        assert_eq!(best, vec![vec![1, 3]]);
    }

    #[test]
    fn dense_view() {
        let net = Network::from_pairs(3, [(0, 1)], false).unwrap();
        assert_eq!(net.to_dense(), vec![vec![0, 1, 0], vec![0, 0, 0], vec![0, 0, 0]]);
    }
}
