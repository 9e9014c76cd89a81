//! Link-failure localization on a tree network.
//!
//! Observations are pairwise connectivity checks: first one per tree edge
//! (the direct link checks), then one per fixed extra node pair. A check is
//! One ("connected") iff every edge on the unique tree path is functional.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::Rng as _;

use crate::battleship::random_baseline;
use crate::collector::QueryOracle;
use crate::error::{Error, Result};
use crate::model::ObservationDataset;
use crate::rng::{self, Rng};
use crate::types::{ObservationLog, ObservationVector};

pub const N_NODES: usize = 100;
pub const N_EXTRA_PAIRS: usize = 300;
pub const DEFAULT_P_FAIL: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeTopology {
    nodes: usize,
    edges: Vec<(usize, usize)>,
    extra_pairs: Vec<(usize, usize)>,
    /// Edge indices on the path of each observation pair.
    paths: Vec<Vec<usize>>,
    /// Size of the component on one side of each edge when it alone fails.
    side_sizes: Vec<usize>,
}

fn unordered(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

impl TreeTopology {
    /// Validates the tree and the extra pairs and precomputes all paths.
    pub fn new(nodes: usize, edges: Vec<(usize, usize)>, extra_pairs: Vec<(usize, usize)>) -> Result<Self> {
        if nodes < 2 || edges.len() != nodes - 1 {
            return Err(Error::Config(format!(
                "a tree on {nodes} nodes needs {} edges, got {}",
                nodes.saturating_sub(1),
                edges.len()
            )));
        }
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
        for (k, &(u, v)) in edges.iter().enumerate() {
            if u >= nodes || v >= nodes || u == v {
                return Err(Error::Config(format!("invalid edge {k}: ({u}, {v})")));
            }
            adj[u].push((v, k));
            adj[v].push((u, k));
        }
        // root at 0; parent edge and depth for every node
        let mut parent = vec![usize::MAX; nodes];
        let mut parent_edge = vec![usize::MAX; nodes];
        let mut depth = vec![0usize; nodes];
        let mut order = Vec::with_capacity(nodes);
        let mut visited = vec![false; nodes];
        let mut stack = vec![0usize];
        visited[0] = true;
        while let Some(u) = stack.pop() {
            order.push(u);
            for &(v, k) in &adj[u] {
                if !visited[v] {
                    visited[v] = true;
                    parent[v] = u;
                    parent_edge[v] = k;
                    depth[v] = depth[u] + 1;
                    stack.push(v);
                }
            }
        }
        if order.len() != nodes {
            return Err(Error::Config("edges do not form a connected tree".into()));
        }
        let mut subtree = vec![1usize; nodes];
        for &u in order.iter().rev() {
            if u != 0 {
                subtree[parent[u]] += subtree[u];
            }
        }
        let mut side_sizes = vec![0; edges.len()];
        for v in 1..nodes {
            side_sizes[parent_edge[v]] = subtree[v];
        }

        let edge_set: std::collections::HashSet<(usize, usize)> =
            edges.iter().map(|&(u, v)| unordered(u, v)).collect();
        let mut pair_set = std::collections::HashSet::new();
        for &(u, v) in &extra_pairs {
            if u >= nodes || v >= nodes || u == v {
                return Err(Error::Config(format!("invalid measurement pair ({u}, {v})")));
            }
            let key = unordered(u, v);
            if edge_set.contains(&key) {
                return Err(Error::Config(format!("measurement pair ({u}, {v}) duplicates an edge")));
            }
            if !pair_set.insert(key) {
                return Err(Error::Config(format!("measurement pair ({u}, {v}) repeated")));
            }
        }

        let path = |mut a: usize, mut b: usize| {
            let mut out = Vec::new();
            while a != b {
                if depth[a] >= depth[b] {
                    out.push(parent_edge[a]);
                    a = parent[a];
                } else {
                    out.push(parent_edge[b]);
                    b = parent[b];
                }
            }
            out.sort_unstable();
            out
        };
        let paths = edges
            .iter()
            .chain(extra_pairs.iter())
            .map(|&(u, v)| path(u, v))
            .collect();
        Ok(Self {
            nodes,
            edges,
            extra_pairs,
            paths,
            side_sizes,
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn extra_pairs(&self) -> &[(usize, usize)] {
        &self.extra_pairs
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Direct checks followed by extra pairs.
    pub fn n_obs(&self) -> usize {
        self.edges.len() + self.extra_pairs.len()
    }

    /// Sorted edge indices on the path checked by observation `obs`.
    pub fn path(&self, obs: usize) -> &[usize] {
        &self.paths[obs]
    }

    /// `(M, N)` component sizes when only `edge` fails.
    pub fn split_sizes(&self, edge: usize) -> (usize, usize) {
        let m = self.side_sizes[edge];
        (m, self.nodes - m)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("V={}\n", self.nodes);
        for &(u, v) in &self.edges {
            let _ = writeln!(s, "edge {u} {v}");
        }
        for &(u, v) in &self.extra_pairs {
            let _ = writeln!(s, "pair {u} {v}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut nodes = None;
        let mut edges = Vec::new();
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let err = |msg: String| Error::Parse {
                what: "topology file",
                line: lineno + 1,
                msg,
            };
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if nodes.is_none() {
                let v = line
                    .strip_prefix("V=")
                    .ok_or_else(|| err(format!("expected \"V=<nodes>\", found {line:?}")))?;
                nodes = Some(v.trim().parse::<usize>().map_err(|e| err(e.to_string()))?);
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(format!("expected \"edge|pair u v\", found {line:?}")));
            }
            let u = fields[1].parse::<usize>().map_err(|e| err(e.to_string()))?;
            let v = fields[2].parse::<usize>().map_err(|e| err(e.to_string()))?;
            match fields[0] {
                "edge" if pairs.is_empty() => edges.push((u, v)),
                "edge" => return Err(err("edge lines must precede pair lines".into())),
                "pair" => pairs.push((u, v)),
                other => return Err(err(format!("unknown record {other:?}"))),
            }
        }
        let nodes = nodes.ok_or(Error::Parse {
            what: "topology file",
            line: 1,
            msg: "missing \"V=<nodes>\" header".into(),
        })?;
        Self::new(nodes, edges, pairs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Random recursive tree plus uniformly drawn non-adjacent measurement pairs.
pub fn generate_topology_with(nodes: usize, n_pairs: usize, rng: &mut Rng) -> Result<TreeTopology> {
    if nodes < 2 {
        return Err(Error::Config("need at least two nodes".into()));
    }
    let edges: Vec<(usize, usize)> = (1..nodes).map(|k| (rng.gen_range(0..k), k)).collect();
    let adjacent: std::collections::HashSet<(usize, usize)> = edges.iter().map(|&(u, v)| unordered(u, v)).collect();
    let candidates: Vec<(usize, usize)> = (0..nodes)
        .flat_map(|u| ((u + 1)..nodes).map(move |v| (u, v)))
        .filter(|p| !adjacent.contains(p))
        .collect();
    if n_pairs > candidates.len() {
        return Err(Error::Config(format!(
            "only {} non-adjacent pairs exist, asked for {n_pairs}",
            candidates.len()
        )));
    }
    let mut picked: Vec<(usize, usize)> = index::sample(rng, candidates.len(), n_pairs)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    picked.sort_unstable();
    TreeTopology::new(nodes, edges, picked)
}

/// The 100-node, 300-pair benchmark topology.
pub fn generate_topology(rng: &mut Rng) -> TreeTopology {
    generate_topology_with(N_NODES, N_EXTRA_PAIRS, rng).expect("100 nodes always admit 300 extra pairs")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultState {
    failed: Vec<bool>,
}

impl FaultState {
    pub fn none(n_edges: usize) -> Self {
        Self {
            failed: vec![false; n_edges],
        }
    }

    pub fn from_failed(n_edges: usize, failed_edges: &[usize]) -> Result<Self> {
        let mut failed = vec![false; n_edges];
        for &e in failed_edges {
            if e >= n_edges {
                return Err(Error::IndexOutOfRange { index: e, len: n_edges });
            }
            failed[e] = true;
        }
        Ok(Self { failed })
    }

    pub fn is_failed(&self, edge: usize) -> bool {
        self.failed[edge]
    }

    pub fn failed(&self) -> Vec<usize> {
        (0..self.failed.len()).filter(|&e| self.failed[e]).collect()
    }

    pub fn count(&self) -> usize {
        self.failed.iter().filter(|&&f| f).count()
    }

    pub fn n_edges(&self) -> usize {
        self.failed.len()
    }
}

pub fn sample_fault(topo: &TreeTopology, p_fail: f64, rng: &mut Rng) -> Result<FaultState> {
    if !(0.0..=1.0).contains(&p_fail) {
        return Err(Error::Config(format!("failure probability {p_fail} outside [0, 1]")));
    }
    Ok(FaultState {
        failed: (0..topo.n_edges()).map(|_| rng.gen::<f64>() < p_fail).collect(),
    })
}

pub fn fault_observations(topo: &TreeTopology, fault: &FaultState) -> Result<ObservationVector> {
    if fault.n_edges() != topo.n_edges() {
        return Err(Error::LengthMismatch {
            expected: topo.n_edges(),
            got: fault.n_edges(),
        });
    }
    let bits: Vec<bool> = (0..topo.n_obs())
        .map(|o| topo.path(o).iter().all(|&e| !fault.is_failed(e)))
        .collect();
    Ok(ObservationVector::from_bits(&bits))
}

/// `M N / ((M + N)(M + N - 1))`.
pub fn dependency_from_sizes(m: usize, n: usize) -> f64 {
    let total = (m + n) as f64;
    (m * n) as f64 / (total * (total - 1.0))
}

pub fn dependency_coefficient(topo: &TreeTopology, edge: usize) -> Result<f64> {
    if edge >= topo.n_edges() {
        return Err(Error::IndexOutOfRange {
            index: edge,
            len: topo.n_edges(),
        });
    }
    let (m, n) = topo.split_sizes(edge);
    Ok(dependency_from_sizes(m, n))
}

/// Checks unobserved direct links uniformly at random.
pub fn rand_link_baseline<O: QueryOracle>(
    oracle: O,
    topo: &TreeTopology,
    budget: usize,
    rng: &mut Rng,
) -> Result<ObservationLog> {
    let direct: Vec<usize> = (0..topo.n_edges()).collect();
    random_baseline(oracle, &direct, budget, rng)
}

pub fn fault_dataset(topo: &TreeTopology, count: usize, p_fail: f64, seed: u64) -> Result<ObservationDataset> {
    let mut rng = rng::seeded(seed);
    let rows = (0..count)
        .map(|_| sample_fault(topo, p_fail, &mut rng).and_then(|f| fault_observations(topo, &f)))
        .collect::<Result<Vec<_>>>()?;
    ObservationDataset::new(topo.n_obs(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collector::TruthOracle;
    use crate::types::ObservationValue::{One, Zero};

    fn topo(seed: u64) -> TreeTopology {
        generate_topology(&mut rng::seeded(seed))
    }

    /// Node pairs disconnected after removing `removed`, by flood fill.
    fn disconnected_pairs(t: &TreeTopology, removed: &[usize]) -> usize {
        let mut adj = vec![Vec::new(); t.nodes()];
        for (k, &(u, v)) in t.edges().iter().enumerate() {
            if !removed.contains(&k) {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        let mut comp = vec![usize::MAX; t.nodes()];
        let mut sizes = Vec::new();
        for s in 0..t.nodes() {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = sizes.len();
            let mut stack = vec![s];
            comp[s] = id;
            let mut size = 0;
            while let Some(u) = stack.pop() {
                size += 1;
                for &v in &adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = id;
                        stack.push(v);
                    }
                }
            }
            sizes.push(size);
        }
        let n = t.nodes();
        n * (n - 1) / 2 - sizes.iter().map(|s| s * (s - 1) / 2).sum::<usize>()
    }

    #[test]
    fn generated_topology_invariants() {
        let t = topo(1);
        assert_eq!(t.nodes(), 100);
        assert_eq!(t.n_edges(), 99);
        assert_eq!(t.extra_pairs().len(), 300);
        assert_eq!(t.n_obs(), 399);
        assert_eq!(disconnected_pairs(&t, &[]), 0, "connected");
        let edges: std::collections::HashSet<_> = t.edges().iter().map(|&(u, v)| unordered(u, v)).collect();
        let pairs: std::collections::HashSet<_> = t.extra_pairs().iter().map(|&(u, v)| unordered(u, v)).collect();
        assert_eq!(pairs.len(), 300);
        assert!(pairs.is_disjoint(&edges));
    }

    #[test]
    fn topology_is_deterministic_and_roundtrips() {
        assert_eq!(topo(4).to_text(), topo(4).to_text());
        let t = topo(4);
        assert_eq!(TreeTopology::from_text(&t.to_text()).unwrap(), t);
        assert!(t.to_text().starts_with("V=100\nedge "));
    }

    #[test]
    fn topology_parser_rejects_cycles_and_junk() {
        assert!(TreeTopology::from_text("V=3\nedge 0 1\nedge 1 0\n").is_err());
        assert!(TreeTopology::from_text("V=3\nedge 0 1\nedge 1 2\npair 0 1\n").is_err());
        assert!(TreeTopology::from_text("edge 0 1\n").is_err());
        assert!(TreeTopology::from_text("V=3\nedge 0 1\nedge 1 x\n").is_err());
        assert!(TreeTopology::from_text("V=3\nedge 0 1\nedge 1 2\npair 0 2\n").is_ok());
    }

    #[test]
    fn fault_sampling() {
        let t = topo(2);
        let mut rng = rng::seeded(3);
        assert_eq!(sample_fault(&t, 0.0, &mut rng).unwrap().count(), 0);
        assert_eq!(sample_fault(&t, 1.0, &mut rng).unwrap().count(), 99);
        let total: usize = (0..10_000).map(|_| sample_fault(&t, 0.02, &mut rng).unwrap().count()).sum();
        let mean = total as f64 / 10_000.0;
        assert!((mean - 1.98).abs() < 0.1, "{mean}");
        assert!(sample_fault(&t, 1.5, &mut rng).is_err());
    }

    #[test]
    fn observation_extremes() {
        let t = topo(5);
        let none = fault_observations(&t, &FaultState::none(99)).unwrap();
        assert!(none.values().iter().all(|&v| v == One));
        let all = FaultState::from_failed(99, &(0..99).collect::<Vec<_>>()).unwrap();
        let obs = fault_observations(&t, &all).unwrap();
        assert!(obs.values().iter().all(|&v| v == Zero));
    }

    #[test]
    fn leaf_failure_zeroes_exactly_its_paths() {
        let t = topo(6);
        let leaf_edge = (0..99).find(|&e| t.split_sizes(e).0 == 1).unwrap();
        let leaf = t.edges()[leaf_edge].1;
        let obs = fault_observations(&t, &FaultState::from_failed(99, &[leaf_edge]).unwrap()).unwrap();
        for o in 0..t.n_obs() {
            let (u, v) = if o < 99 { t.edges()[o] } else { t.extra_pairs()[o - 99] };
            // a leaf edge lies on a path iff the path ends at the leaf
            let expect_zero = o == leaf_edge || (o >= 99 && (u == leaf || v == leaf));
            assert_eq!(obs.get(o) == Zero, expect_zero, "obs {o}");
        }
    }

    #[test]
    fn direct_failure_implies_dependent_pairs_fail() {
        let t = topo(7);
        let mut rng = rng::seeded(8);
        for _ in 0..200 {
            let f = sample_fault(&t, 0.05, &mut rng).unwrap();
            let obs = fault_observations(&t, &f).unwrap();
            for e in 0..99 {
                if obs.get(e) == Zero {
                    for o in 99..399 {
                        if t.path(o).contains(&e) {
                            assert_eq!(obs.get(o), Zero);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn dependency_values() {
        assert!((dependency_from_sizes(1, 99) - 0.01).abs() < 1e-15);
        assert!((dependency_from_sizes(50, 50) - 2500.0 / 9900.0).abs() < 1e-15);
        assert!((dependency_from_sizes(2, 98) - 196.0 / 9900.0).abs() < 1e-15);
        assert!((dependency_from_sizes(2, 98) - 0.019798).abs() < 1e-6);
    }

    #[test]
    fn split_sizes_match_flood_fill() {
        let t = topo(9);
        for e in 0..99 {
            let (m, n) = t.split_sizes(e);
            assert_eq!(m + n, 100);
            assert_eq!(m * n, disconnected_pairs(&t, &[e]));
            let d = dependency_coefficient(&t, e).unwrap();
            assert!(d > 0.0 && d <= 2500.0 / 9900.0 + 1e-15);
        }
        assert!(dependency_coefficient(&t, 99).is_err());
    }

    #[test]
    fn rand_link_stays_on_direct_checks() {
        let t = topo(10);
        let mut rng = rng::seeded(11);
        let f = sample_fault(&t, 0.02, &mut rng).unwrap();
        let truth = fault_observations(&t, &f).unwrap();
        let log = rand_link_baseline(TruthOracle::new(truth.clone()).unwrap(), &t, 99, &mut rng).unwrap();
        let mut idx: Vec<usize> = log.iter().map(|&(i, _)| i).collect();
        idx.sort();
        assert_eq!(idx, (0..99).collect::<Vec<_>>());
        assert!(rand_link_baseline(TruthOracle::new(truth.clone()).unwrap(), &t, 0, &mut rng).unwrap().is_empty());
        assert!(rand_link_baseline(TruthOracle::new(truth).unwrap(), &t, 100, &mut rng).is_err());
    }
}
